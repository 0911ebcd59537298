"""Discrete Bayesian network classifiers with per-parent factored tables.

Every classification is decided by a naive Bayes step over its children in
the dependency graph.  Children that are themselves classifications are
decided first and then clamped to their decided value, so a chain is
evaluated bottom-up from the observations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping

from .errors import (
    DegenerateDistribution,
    DomainError,
    IncompleteInput,
    ModelError,
    UnknownVariable,
)

OBSERVATION = "observation"
CLASSIFICATION = "classification"

_NORM_TOL = 1e-9
_LOG_SPACE_FACTORS = 20

Assignment = Mapping[str, str]


@dataclass(frozen=True)
class Variable:
    name: str
    role: str
    domain: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.role not in (OBSERVATION, CLASSIFICATION):
            raise ModelError(f"{self.name}: role must be observation or classification")
        if len(self.domain) < 2:
            raise ModelError(f"{self.name}: domain needs at least two values")
        if len(set(self.domain)) != len(self.domain):
            raise ModelError(f"{self.name}: duplicate domain values")


@dataclass(frozen=True)
class Posterior:
    """Posterior distribution of one variable, in domain order."""

    variable: str
    probs: dict[str, float]

    def __getitem__(self, value: str) -> float:
        return self.probs[value]

    def argmax(self) -> str:
        best, best_p = None, -1.0
        for value, p in self.probs.items():
            if p > best_p:  # strict: first maximal value wins ties
                best, best_p = value, p
        return best


class Classifier:
    """An immutable Bayesian network classifier.

    Parameters
    ----------
    variables
        Every variable with its role and ordered domain.
    edges
        Dependency pairs ``(parent, child)``.
    priors
        ``priors[x][value]``.
    conditionals
        ``conditionals[child][child_value][parent][parent_value]``, one table
        per dependency edge.
    warnings
        Diagnostics attached by the learner (e.g. zero-probability rows).
    """

    def __init__(
        self,
        variables: Iterable[Variable],
        edges: Iterable[tuple[str, str]],
        priors: Mapping[str, Mapping[str, float]],
        conditionals: Mapping[str, Mapping[str, Mapping[str, Mapping[str, float]]]],
        warnings: Iterable[str] = (),
    ):
        self.variables: dict[str, Variable] = {}
        for v in variables:
            if v.name in self.variables:
                raise ModelError(f"duplicate variable {v.name!r}")
            self.variables[v.name] = v
        self.observations = tuple(n for n, v in self.variables.items() if v.role == OBSERVATION)
        self.classifications = tuple(
            n for n, v in self.variables.items() if v.role == CLASSIFICATION
        )
        self.edges = tuple(sorted({(p, c) for p, c in edges}))
        self._children: dict[str, tuple[str, ...]] = {n: () for n in self.variables}
        self._parents: dict[str, tuple[str, ...]] = {n: () for n in self.variables}
        for p, c in self.edges:
            for n in (p, c):
                if n not in self.variables:
                    raise ModelError(f"edge mentions unknown variable {n!r}")
            if p == c:
                raise ModelError(f"self loop on {p!r}")
            if self.variables[p].role == OBSERVATION:
                raise ModelError(f"observation {p!r} cannot have children")
            self._children[p] += (c,)
            self._parents[c] += (p,)
        self.priors = {x: {v: float(p) for v, p in row.items()} for x, row in priors.items()}
        self.conditionals = {
            c: {
                cv: {p: {pv: float(q) for pv, q in col.items()} for p, col in by_parent.items()}
                for cv, by_parent in table.items()
            }
            for c, table in conditionals.items()
        }
        self.warnings = tuple(warnings)
        self._order = self._topological_order()
        self._validate_tables()

    # -- structure -----------------------------------------------------

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.variables)

    def domain(self, x: str) -> tuple[str, ...]:
        try:
            return self.variables[x].domain
        except KeyError:
            raise UnknownVariable(x) from None

    def children(self, x: str) -> tuple[str, ...]:
        self._check(x)
        return self._children[x]

    def parents(self, x: str) -> tuple[str, ...]:
        self._check(x)
        return self._parents[x]

    def is_classification(self, x: str) -> bool:
        self._check(x)
        return self.variables[x].role == CLASSIFICATION

    def topological_order(self) -> tuple[str, ...]:
        """Parents before children in the dependency graph."""
        return self._order

    def _check(self, x: str) -> None:
        if x not in self.variables:
            raise UnknownVariable(x)

    def _topological_order(self) -> tuple[str, ...]:
        indeg = {n: len(self._parents[n]) for n in self.variables}
        ready = [n for n in self.variables if indeg[n] == 0]
        order = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for c in self._children[n]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != len(self.variables):
            raise ModelError("dependency graph has a cycle")
        return tuple(order)

    def _validate_tables(self) -> None:
        for x, var in self.variables.items():
            row = self.priors.get(x)
            if row is None or set(row) != set(var.domain):
                raise ModelError(f"prior table of {x!r} does not cover its domain")
            _check_distribution(row.values(), f"prior of {x!r}")
        for p, c in self.edges:
            table = self.conditionals.get(c, {})
            for pv in self.domain(p):
                col = []
                for cv in self.domain(c):
                    try:
                        col.append(table[cv][p][pv])
                    except KeyError:
                        raise ModelError(f"missing P({c}={cv} | {p}={pv})") from None
                _check_distribution(col, f"P({c} | {p}={pv})")

    def cond(self, child: str, child_value: str, parent: str, parent_value: str) -> float:
        return self.conditionals[child][child_value][parent][parent_value]

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "variables": [
                {"name": v.name, "role": v.role, "domain": list(v.domain)}
                for v in self.variables.values()
            ],
            "edges": [list(e) for e in self.edges],
            "priors": self.priors,
            "conditionals": self.conditionals,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "Classifier":
        try:
            variables = [
                Variable(v["name"], v["role"], tuple(v["domain"])) for v in doc["variables"]
            ]
            return cls(
                variables,
                [tuple(e) for e in doc["edges"]],
                doc["priors"],
                doc["conditionals"],
                doc.get("warnings", ()),
            )
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed classifier document: {exc}") from exc

    def to_json(self) -> str:
        # repr-based float formatting round-trips exactly
        return json.dumps(self.to_dict(), indent=2, sort_keys=False, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "Classifier":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Classifier) and self.to_dict() == other.to_dict()

    def __repr__(self) -> str:
        return (
            f"Classifier(observations={list(self.observations)}, "
            f"classifications={list(self.classifications)}, edges={list(self.edges)})"
        )


def _check_distribution(values: Iterable[float], what: str) -> None:
    vals = list(values)
    if any(v < 0 or v > 1 or math.isnan(v) for v in vals):
        raise ModelError(f"{what}: probabilities must lie in [0, 1]")
    if abs(sum(vals) - 1.0) > _NORM_TOL:
        raise ModelError(f"{what}: sums to {sum(vals)!r}, not 1")


# -- inference ----------------------------------------------------------


def check_assignment(clf: Classifier, a: Assignment, require_inputs: bool = True) -> None:
    for x, v in a.items():
        if v not in clf.domain(x):
            raise DomainError(f"{v!r} is not a value of {x!r}")
    if require_inputs:
        missing = [o for o in clf.observations if o not in a]
        if missing:
            raise IncompleteInput(f"incomplete input: unbound observations {missing}")


class _Inference:
    """Memoized bottom-up evaluation for one assignment."""

    def __init__(self, clf: Classifier, a: Assignment):
        self.clf = clf
        self.a = a
        self._posteriors: dict[str, Posterior] = {}

    def value(self, x: str) -> str:
        if x in self.a:
            return self.a[x]
        if not self.clf.is_classification(x):
            raise IncompleteInput(f"incomplete input: observation {x!r} is unbound")
        return self.posterior(x).argmax()

    def posterior(self, x: str) -> Posterior:
        hit = self._posteriors.get(x)
        if hit is not None:
            return hit
        clf = self.clf
        dom = clf.domain(x)
        if x in self.a:
            post = Posterior(x, {v: 1.0 if v == self.a[x] else 0.0 for v in dom})
        else:
            evidence = [(u, self.value(u)) for u in clf.children(x)]
            post = Posterior(x, _naive_bayes(clf, x, evidence))
        self._posteriors[x] = post
        return post


def _naive_bayes(clf: Classifier, x: str, evidence: list[tuple[str, str]]) -> dict[str, float]:
    dom = clf.domain(x)
    prior = clf.priors[x]
    if len(evidence) + 1 > _LOG_SPACE_FACTORS:
        logs = []
        for xi in dom:
            factors = [prior[xi]] + [clf.cond(u, uv, x, xi) for u, uv in evidence]
            logs.append(-math.inf if min(factors) == 0.0 else sum(map(math.log, factors)))
        top = max(logs)
        if top == -math.inf:
            raise DegenerateDistribution(f"degenerate distribution for {x!r}")
        scores = [math.exp(s - top) for s in logs]
    else:
        scores = []
        for xi in dom:
            s = prior[xi]
            for u, uv in evidence:
                s *= clf.cond(u, uv, x, xi)
            scores.append(s)
    total = math.fsum(scores)
    if not total > 0.0:
        raise DegenerateDistribution(f"degenerate distribution for {x!r}")
    return {xi: s / total for xi, s in zip(dom, scores)}


def local_posterior(clf: Classifier, x: str, evidence: Assignment) -> Posterior:
    """One naive Bayes step: posterior of ``x`` with its children clamped to ``evidence``."""
    try:
        items = [(u, evidence[u]) for u in clf.children(x)]
    except KeyError as exc:
        raise IncompleteInput(f"incomplete input: child {exc.args[0]!r} of {x!r} is unbound") from None
    for u, v in items:
        if v not in clf.domain(u):
            raise DomainError(f"{v!r} is not a value of {u!r}")
    return Posterior(x, _naive_bayes(clf, x, items))


def posterior(clf: Classifier, a: Assignment, x: str) -> Posterior:
    """Posterior of ``x`` given the input ``a`` (bound variables are clamped)."""
    clf._check(x)
    check_assignment(clf, a)
    return _Inference(clf, a).posterior(x)


def decide(clf: Classifier, a: Assignment, x: str) -> str:
    """Most probable value of ``x``; ties go to the earliest domain value."""
    return posterior(clf, a, x).argmax()


def predict_all(clf: Classifier, a: Assignment) -> dict[str, str]:
    """Extend ``a`` with the decided value of every classification."""
    check_assignment(clf, a)
    inf = _Inference(clf, a)
    out = dict(a)
    for x in reversed(clf.topological_order()):
        if x not in out and clf.is_classification(x):
            out[x] = inf.value(x)
    return out


def posteriors_all(clf: Classifier, a: Assignment) -> dict[str, Posterior]:
    """Posterior of every classification under ``a`` (chained, clamped)."""
    check_assignment(clf, a)
    inf = _Inference(clf, a)
    return {x: inf.posterior(x) for x in clf.classifications}


def modified_input(clf: Classifier, a: Assignment, x: str, value: str) -> dict[str, str]:
    """Copy of ``a`` with ``x`` set to ``value`` (``x`` may be a classification)."""
    if value not in clf.domain(x):
        raise DomainError(f"{value!r} is not a value of {x!r}")
    out = dict(a)
    out[x] = value
    return out
