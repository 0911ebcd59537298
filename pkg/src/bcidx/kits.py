"""Relation properties and the explanation kits built from them.

A kit is a set of (relation type, predicate) pairs.  A predicate takes an
influence edge ``(x, y)`` and an input assignment and says whether the
relation holds.  Dialectical predicates compare posteriors of the decided
value of ``y`` while the other influencers of ``y`` stay clamped at their
decided values, so every comparison is a single naive Bayes step.
"""

from __future__ import annotations

import itertools
import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .errors import AttributionUnavailable, BudgetExceeded, KitError
from .influence import FULL, IO
from .model import Assignment, Classifier, Posterior, check_assignment, local_posterior

logger = logging.getLogger(__name__)

ATTACK = "attack"
SUPPORT = "support"

DEFAULT_CF_BUDGET = 1_000_000
REACHABLE = "reachable"
CLAMPED = "clamped"

Edge = tuple[str, str]
Predicate = Callable[[Edge, Assignment], bool]


@dataclass(frozen=True)
class RelationType:
    label: str
    name: str = ""
    polarity: str | None = None

    def __post_init__(self) -> None:
        if self.polarity not in (None, ATTACK, SUPPORT):
            raise KitError(f"polarity must be attack, support or None, not {self.polarity!r}")
        if not self.name:
            object.__setattr__(self, "name", self.label)

    def __str__(self) -> str:
        return self.label


MD_ATTACK = RelationType("−", "monotonic-attack", ATTACK)
MD_SUPPORT = RelationType("+", "monotonic-support", SUPPORT)
SD_ATTACK = RelationType("·−", "stochastic-attack", ATTACK)
SD_SUPPORT = RelationType("·+", "stochastic-support", SUPPORT)
CRITICAL = RelationType("!", "critical", None)
POTENTIAL = RelationType("*", "potential", None)
ATTR_ATTACK = RelationType("attr−", "attr-attack", ATTACK)
ATTR_SUPPORT = RelationType("attr+", "attr-support", SUPPORT)

BUILTIN_TYPES = {
    t.label: t
    for t in (MD_ATTACK, MD_SUPPORT, SD_ATTACK, SD_SUPPORT, CRITICAL, POTENTIAL, ATTR_ATTACK, ATTR_SUPPORT)
}


def relation_type(label: str) -> RelationType:
    """Built-in type for ``label``; unknown labels become polarity-free types."""
    return BUILTIN_TYPES.get(label) or RelationType(label)


# -- posterior oracle -------------------------------------------------------


class PosteriorOracle:
    """Memoized local posteriors shared by the predicates of one classifier.

    ``evaluations`` counts distinct naive Bayes steps, which is what the
    complexity probe measures.  Safe to share between threads.
    """

    def __init__(self, clf: Classifier, cf_budget: int = DEFAULT_CF_BUDGET):
        self.clf = clf
        self.cf_budget = cf_budget
        self._lock = threading.RLock()
        self._local: dict[tuple[str, tuple[tuple[str, str], ...]], Posterior] = {}
        self._decisions: dict[frozenset, dict[str, str]] = {}
        self._cf_tables: dict[tuple[str, str], tuple[tuple[tuple[str, ...], str], ...]] = {}
        self.enumerated = 0

    @property
    def evaluations(self) -> int:
        return len(self._local)

    def local(self, y: str, evidence: Mapping[str, str]) -> Posterior:
        key = (y, tuple((u, evidence[u]) for u in self.clf.children(y)))
        with self._lock:
            hit = self._local.get(key)
            if hit is None:
                hit = local_posterior(self.clf, y, dict(key[1]))
                self._local[key] = hit
            return hit

    def value(self, a: Assignment, x: str) -> str:
        """Decided value of ``x`` under input ``a``, computed on demand."""
        if x in a:
            return a[x]
        key = frozenset(a.items())
        with self._lock:
            memo = self._decisions.setdefault(key, {})
            if x not in memo:
                memo[x] = self.local(x, self.evidence(a, x)).argmax()
            return memo[x]

    def evidence(self, a: Assignment, y: str) -> dict[str, str]:
        return {u: self.value(a, u) for u in self.clf.children(y)}

    # -- counterfactual tables ----------------------------------------

    def upstream_observations(self, y: str) -> tuple[str, ...]:
        seen, stack = set(), [y]
        while stack:
            for u in self.clf.children(stack.pop()):
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return tuple(o for o in self.clf.observations if o in seen)

    def cf_size(self, y: str, semantics: str = REACHABLE) -> int:
        if semantics == REACHABLE:
            scope = self.upstream_observations(y)
        else:
            scope = self.clf.children(y)
        return math.prod(len(self.clf.domain(u)) for u in scope)

    def cf_table(self, y: str, semantics: str = REACHABLE) -> tuple[tuple[tuple[str, ...], str], ...]:
        """Distinct (influencer values, decision of ``y``) rows.

        ``reachable`` enumerates every assignment of the observations below
        ``y`` and decides through the chain, so only jointly attainable
        influencer values appear.  ``clamped`` enumerates the Cartesian
        product of the influencer domains directly.
        """
        key = (y, semantics)
        with self._lock:
            hit = self._cf_tables.get(key)
            if hit is not None:
                return hit
        size = self.cf_size(y, semantics)
        if size > self.cf_budget:
            raise BudgetExceeded(
                f"counterfactual budget exceeded: {size} combinations for {y!r} (budget {self.cf_budget})"
            )
        kids = self.clf.children(y)
        rows: dict[tuple[tuple[str, ...], str], None] = {}
        if semantics == REACHABLE:
            scope = self.upstream_observations(y)
            for combo in itertools.product(*(self.clf.domain(o) for o in scope)):
                b = dict(zip(scope, combo))
                vals = tuple(self.value(b, u) for u in kids)
                rows[(vals, self.value(b, y))] = None
        elif semantics == CLAMPED:
            for combo in itertools.product(*(self.clf.domain(u) for u in kids)):
                rows[(combo, self.local(y, dict(zip(kids, combo))).argmax())] = None
        else:
            raise KitError(f"unknown counterfactual semantics {semantics!r}")
        table = tuple(rows)
        with self._lock:
            self._cf_tables[key] = table
            self.enumerated += size
        return table


# -- predicates ---------------------------------------------------------------


def _alternatives(oracle: PosteriorOracle, edge: Edge, a: Assignment) -> tuple[float, list[tuple[str, float]]]:
    """Posterior of σ(a,y) at the current input and under each alternative value of x."""
    x, y = edge
    ev = oracle.evidence(a, y)
    cy = oracle.value(a, y)
    cur = oracle.local(y, ev)[cy]
    alts = []
    for xk in oracle.clf.domain(x):
        if xk != ev[x]:
            alts.append((xk, oracle.local(y, {**ev, x: xk})[cy]))
    return cur, alts


def md_attack(oracle: PosteriorOracle, edge: Edge, a: Assignment) -> bool:
    cur, alts = _alternatives(oracle, edge, a)
    return all(cur < p for _, p in alts)


def md_support(oracle: PosteriorOracle, edge: Edge, a: Assignment) -> bool:
    cur, alts = _alternatives(oracle, edge, a)
    return all(cur > p for _, p in alts)


def _sd_mean(oracle: PosteriorOracle, edge: Edge, a: Assignment) -> tuple[float, float | None]:
    cur, alts = _alternatives(oracle, edge, a)
    prior = oracle.clf.priors[edge[0]]
    weight = math.fsum(prior[xk] for xk, _ in alts)
    if weight == 0.0:
        logger.warning("alternatives of %s have zero prior mass; no stochastic relation on %s", edge[0], edge)
        return cur, None
    return cur, math.fsum(prior[xk] * p for xk, p in alts) / weight


def sd_attack(oracle: PosteriorOracle, edge: Edge, a: Assignment) -> bool:
    cur, mean = _sd_mean(oracle, edge, a)
    return mean is not None and cur < mean


def sd_support(oracle: PosteriorOracle, edge: Edge, a: Assignment) -> bool:
    cur, mean = _sd_mean(oracle, edge, a)
    return mean is not None and cur > mean


def _cf_split(oracle: PosteriorOracle, edge: Edge, a: Assignment, semantics: str):
    x, y = edge
    kids = oracle.clf.children(y)
    i = kids.index(x)
    cur = tuple(oracle.value(a, u) for u in kids)
    cy = oracle.value(a, y)
    return oracle.cf_table(y, semantics), i, cur, cy


def cf_critical(oracle: PosteriorOracle, edge: Edge, a: Assignment, semantics: str = REACHABLE) -> bool:
    table, i, cur, cy = _cf_split(oracle, edge, a, semantics)
    rest = cur[:i] + cur[i + 1 :]
    feasible = [d for vals, d in table if vals[i] != cur[i] and vals[:i] + vals[i + 1 :] == rest]
    return bool(feasible) and all(d != cy for d in feasible)


def cf_potential(oracle: PosteriorOracle, edge: Edge, a: Assignment, semantics: str = REACHABLE) -> bool:
    if cf_critical(oracle, edge, a, semantics):
        return False
    table, i, cur, cy = _cf_split(oracle, edge, a, semantics)
    keep, flip = set(), set()
    for vals, d in table:
        rest = vals[:i] + vals[i + 1 :]
        if vals[i] == cur[i] and d == cy:
            keep.add(rest)
        elif vals[i] != cur[i] and d != cy:
            flip.add(rest)
    return bool(keep & flip)


def attr_attack(source, edge: Edge, a: Assignment) -> bool:
    return source.score(a, *edge) < 0


def attr_support(source, edge: Edge, a: Assignment) -> bool:
    return source.score(a, *edge) > 0


# -- kits ---------------------------------------------------------------------


@dataclass(frozen=True)
class ExplanationKit:
    """A named set of relation types with their predicates."""

    name: str
    pairs: tuple[tuple[RelationType, Predicate], ...]
    graph_kind: str = FULL
    oracle: PosteriorOracle | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        pairs = tuple(self.pairs)
        if not pairs:
            raise KitError("a kit needs at least one relation type")
        labels = [t.label for t, _ in pairs]
        if len(set(labels)) != len(labels):
            raise KitError(f"duplicate relation labels in kit {self.name!r}: {labels}")
        if self.graph_kind not in (FULL, IO):
            raise KitError(f"unknown graph kind {self.graph_kind!r}")
        object.__setattr__(self, "pairs", pairs)

    @property
    def types(self) -> tuple[RelationType, ...]:
        return tuple(t for t, _ in self.pairs)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(t.label for t, _ in self.pairs)

    def type(self, label: str) -> RelationType:
        for t, _ in self.pairs:
            if t.label == label:
                return t
        raise KitError(f"kit {self.name!r} has no relation {label!r}")

    def predicate(self, label: str) -> Predicate:
        for t, p in self.pairs:
            if t.label == label:
                return p
        raise KitError(f"kit {self.name!r} has no relation {label!r}")

    def holds(self, edge: Edge, a: Assignment) -> tuple[RelationType, ...]:
        return tuple(t for t, p in self.pairs if p(edge, a))

    def attack_support(self) -> tuple[RelationType | None, RelationType | None]:
        att = [t for t in self.types if t.polarity == ATTACK]
        sup = [t for t in self.types if t.polarity == SUPPORT]
        return (att[0] if att else None, sup[0] if sup else None)

    def is_dialectical(self) -> bool:
        return any(t.polarity is not None for t in self.types)


def _bind(fn, dep, **kw) -> Predicate:
    def pred(edge: Edge, a: Assignment) -> bool:
        return fn(dep, edge, a, **kw)

    pred.__name__ = fn.__name__
    return pred


KIT_NAMES = ("md", "sd", "cf", "attribution")


def make_kit(
    name: str,
    clf: Classifier | None = None,
    *,
    oracle: PosteriorOracle | None = None,
    source=None,
    cf_semantics: str = REACHABLE,
    cf_budget: int = DEFAULT_CF_BUDGET,
) -> ExplanationKit:
    """Assemble a built-in kit.

    ``attribution`` (alias ``lime``/``shap``/``attr``) needs ``source``, an
    object with ``score(a, x, y)``; the other kits need the classifier.
    """
    key = name.lower()
    if key in ("lime", "shap", "attr", "attribution"):
        if source is None:
            raise KitError("attribution kits need an attribution source")
        return ExplanationKit(
            key,
            ((ATTR_ATTACK, _bind(attr_attack, source)), (ATTR_SUPPORT, _bind(attr_support, source))),
            IO,
        )
    if key not in ("md", "sd", "cf"):
        raise KitError(f"unknown kit {name!r}; choose from md, sd, cf, attribution")
    if oracle is None:
        if clf is None:
            raise KitError(f"kit {name!r} needs a classifier")
        oracle = PosteriorOracle(clf, cf_budget)
    if key == "md":
        pairs = ((MD_ATTACK, _bind(md_attack, oracle)), (MD_SUPPORT, _bind(md_support, oracle)))
    elif key == "sd":
        pairs = ((SD_ATTACK, _bind(sd_attack, oracle)), (SD_SUPPORT, _bind(sd_support, oracle)))
    else:
        if cf_semantics not in (REACHABLE, CLAMPED):
            raise KitError(f"unknown counterfactual semantics {cf_semantics!r}")
        pairs = (
            (CRITICAL, _bind(cf_critical, oracle, semantics=cf_semantics)),
            (POTENTIAL, _bind(cf_potential, oracle, semantics=cf_semantics)),
        )
    return ExplanationKit(key, pairs, FULL, oracle)


def custom_kit(
    name: str,
    pairs: Iterable[tuple[RelationType | str, Predicate]],
    graph_kind: str = FULL,
) -> ExplanationKit:
    """A user-defined kit; string labels become polarity-free relation types."""
    built = tuple((relation_type(t) if isinstance(t, str) else t, p) for t, p in pairs)
    return ExplanationKit(name, built, graph_kind)


def checked_input(clf: Classifier, a: Assignment) -> dict[str, str]:
    """Validate an input assignment and drop any classification bindings."""
    check_assignment(clf, a)
    return {o: a[o] for o in clf.observations}


__all__: Sequence[str] = [
    "ATTACK",
    "SUPPORT",
    "RelationType",
    "ExplanationKit",
    "PosteriorOracle",
    "make_kit",
    "custom_kit",
    "md_attack",
    "md_support",
    "sd_attack",
    "sd_support",
    "cf_critical",
    "cf_potential",
    "attr_attack",
    "attr_support",
]
