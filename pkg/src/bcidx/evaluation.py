"""Empirical analyses over explanation kits: prevalence, agreement,
dialectical monotonicity, complexity probes and proposition checks."""

from __future__ import annotations

import csv
import io
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import KitError, ModelError
from .idx import generate, posterior_units
from .influence import FULL, IO, InfluenceGraph, coincide, influences, io_influences, structural_coincidence
from .kits import (
    ATTACK,
    CLAMPED,
    REACHABLE,
    SUPPORT,
    ExplanationKit,
    PosteriorOracle,
    make_kit,
)
from .model import CLASSIFICATION, OBSERVATION, Assignment, Classifier, Variable, _Inference, modified_input

Edge = tuple[str, str]


def _map(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(jobs) as pool:
        return list(pool.map(fn, items))  # preserves input order


def _graph_for(c: Classifier, kit: ExplanationKit, outputs: Sequence[str] | None) -> InfluenceGraph:
    if kit.graph_kind == IO:
        if not outputs:
            raise KitError(f"kit {kit.name!r} needs an output set")
        return io_influences(c, outputs)
    return influences(c)


def relations(
    c: Classifier, g: InfluenceGraph, kit: ExplanationKit, a: Assignment, explananda: Sequence[str] | None = None
) -> dict[str, frozenset[Edge]]:
    """Union of the IDXs for every explanandum (default: every influenced variable)."""
    if explananda is None:
        explananda = [y for y in c.classifications if g.parents(y)]
    out: dict[str, set[Edge]] = {label: set() for label in kit.labels}
    for e in explananda:
        idx = generate(c, g, kit, e, a)
        for label, es in idx.relations.items():
            out[label] |= es
    return {k: frozenset(v) for k, v in out.items()}


# -- prevalence ---------------------------------------------------------------


@dataclass(frozen=True)
class Prevalence:
    kit: str
    instances: int
    edges: int
    percent: Mapping[str, Fraction]
    percent_classification: Mapping[str, Fraction]

    def rows(self) -> list[dict[str, Any]]:
        return [
            {
                "kit": self.kit,
                "relation": label,
                "percent": float(self.percent[label]),
                "percent_classification": float(self.percent_classification[label]),
                "instances": self.instances,
                "influences": self.edges,
            }
            for label in self.percent
        ]


def prevalence(
    c: Classifier,
    kit: ExplanationKit,
    instances: Sequence[Assignment],
    outputs: Sequence[str] | None = None,
    jobs: int = 1,
) -> Prevalence:
    """Mean share of influences in each relation, exact as fractions of 100.

    ``percent_classification`` counts only edges between two classifications.
    """
    if not instances:
        raise ModelError("prevalence needs at least one instance")
    g = _graph_for(c, kit, outputs)
    n_edges = len(g)
    if n_edges == 0:
        raise ModelError("influence graph is empty")
    rels = _map(lambda a: relations(c, g, kit, a), list(instances), jobs)
    pct, pct_c = {}, {}
    for label in kit.labels:
        tot = sum(len(r[label]) for r in rels)
        tot_c = sum(
            1 for r in rels for x, y in r[label] if c.is_classification(x) and c.is_classification(y)
        )
        pct[label] = Fraction(100 * tot, n_edges * len(rels))
        pct_c[label] = Fraction(100 * tot_c, n_edges * len(rels))
    return Prevalence(kit.name, len(rels), n_edges, pct, pct_c)


# -- agreement -------------------------------------------------------------------


def _polarity_of(kit: ExplanationKit, rels: Mapping[str, frozenset[Edge]], edge: Edge) -> str | None:
    att, sup = kit.attack_support()
    in_att = edge in rels[att.label]
    in_sup = edge in rels[sup.label]
    if in_att and in_sup:  # impossible for strict kits, but be explicit
        return "both"
    return ATTACK if in_att else SUPPORT if in_sup else None


@dataclass(frozen=True)
class Agreement:
    kit_a: str
    kit_b: str
    instances: int
    edges: int
    percent: Fraction  # same relation, including "no relation"
    percent_nonempty: Fraction  # same attack or same support only

    def row(self) -> dict[str, Any]:
        return {
            "kit_a": self.kit_a,
            "kit_b": self.kit_b,
            "percent": float(self.percent),
            "percent_nonempty": float(self.percent_nonempty),
            "instances": self.instances,
            "influences": self.edges,
        }


def agreement(
    c: Classifier,
    kit_a: ExplanationKit,
    kit_b: ExplanationKit,
    outputs: Sequence[str] | None,
    instances: Sequence[Assignment],
    jobs: int = 1,
) -> Agreement:
    """Share of influences on which two dialectical kits give the same relation.

    With ``outputs`` the universe is the input-output influences and full
    kits are restricted to it; without, both kits must be full-graph kits.
    """
    for k in (kit_a, kit_b):
        att, sup = k.attack_support()
        if att is None or sup is None:
            raise KitError(f"kit {k.name!r} has no attack/support relation types to compare")
    if not instances:
        raise ModelError("agreement needs at least one instance")
    if outputs:
        universe = io_influences(c, outputs)
    elif kit_a.graph_kind == FULL and kit_b.graph_kind == FULL:
        universe = influences(c)
    else:
        raise KitError("comparing an input-output kit needs an output set")
    edges = universe.edges
    if not edges:
        raise ModelError("influence graph is empty")

    def rel(kit: ExplanationKit, a: Assignment) -> dict[str, frozenset[Edge]]:
        g = io_influences(c, outputs) if kit.graph_kind == IO else influences(c)
        targets = [y for y in (outputs or c.classifications) if g.parents(y)]
        return relations(c, g, kit, a, targets)

    def one(a: Assignment) -> tuple[int, int]:
        ra, rb = rel(kit_a, a), rel(kit_b, a)
        same = nonempty = 0
        for e in edges:
            pa, pb = _polarity_of(kit_a, ra, e), _polarity_of(kit_b, rb, e)
            if pa == pb:
                same += 1
                if pa is not None:
                    nonempty += 1
        return same, nonempty

    counts = _map(one, list(instances), jobs)
    denom = len(edges) * len(counts)
    return Agreement(
        kit_a.name,
        kit_b.name,
        len(counts),
        len(edges),
        Fraction(100 * sum(s for s, _ in counts), denom),
        Fraction(100 * sum(n for _, n in counts), denom),
    )


# -- dialectical monotonicity --------------------------------------------------


@dataclass(frozen=True)
class Violation:
    instance: int
    edge: Edge
    relation: str
    value: str
    before: float
    after: float


@dataclass(frozen=True)
class MonotonicityReport:
    kit: str
    candidates: int
    sampled: int
    violations: tuple[Violation, ...]
    seed: int

    @property
    def flagged(self) -> int:
        return len({(v.instance, v.edge, v.relation) for v in self.violations})

    @property
    def rate(self) -> float:
        return self.flagged / self.sampled if self.sampled else 0.0

    def row(self) -> dict[str, Any]:
        return {
            "kit": self.kit,
            "candidates": self.candidates,
            "sampled": self.sampled,
            "violating": self.flagged,
            "percent": 100.0 * self.rate,
            "seed": self.seed,
        }


def _changes(c: Classifier, kit: ExplanationKit, oracle: PosteriorOracle, a: Assignment, edge: Edge):
    """(alternative value, P(σ(a,y)) before, after) for each single change of x."""
    x, y = edge
    cy = oracle.value(a, y)
    if kit.graph_kind == IO:
        # other influencers are the remaining observations: change x in the input
        before = _Inference(c, a).posterior(y)[cy]
        for xk in c.domain(x):
            if xk != a[x]:
                yield xk, before, _Inference(c, modified_input(c, a, x, xk)).posterior(y)[cy]
        return
    ev = oracle.evidence(a, y)
    before = oracle.local(y, ev)[cy]
    for xk in c.domain(x):
        if xk != ev[x]:
            yield xk, before, oracle.local(y, {**ev, x: xk})[cy]


def monotonicity_violations(
    c: Classifier,
    kit: ExplanationKit,
    instances: Sequence[Assignment],
    sample_size: int = 25_000,
    seed: int = 0,
    outputs: Sequence[str] | None = None,
) -> MonotonicityReport:
    """Sample attack/support edges and test every single-influencer change.

    An attacker must strictly raise, and a supporter strictly lower, the
    posterior of the influencee's decided value whenever its value changes.
    """
    if not kit.is_dialectical():
        raise KitError(f"kit {kit.name!r} has no attack/support relation types")
    g = _graph_for(c, kit, outputs)
    polar = {t.label: t.polarity for t in kit.types if t.polarity is not None}
    candidates: list[tuple[int, Edge, str]] = []
    for i, a in enumerate(instances):
        rel = relations(c, g, kit, a)
        for label in polar:
            candidates.extend((i, e, label) for e in sorted(rel[label]))
    rng = np.random.default_rng(seed)
    if len(candidates) > sample_size:
        picks = sorted(rng.choice(len(candidates), size=sample_size, replace=False).tolist())
        chosen = [candidates[k] for k in picks]
    else:
        chosen = candidates
    oracle = PosteriorOracle(c)
    found = []
    for i, edge, label in chosen:
        a = instances[i]
        for xk, before, after in _changes(c, kit, oracle, a, edge):
            ok = after > before if polar[label] == ATTACK else after < before
            if not ok:
                found.append(Violation(i, edge, label, xk, before, after))
    return MonotonicityReport(kit.name, len(candidates), len(chosen), tuple(found), seed)


# -- complexity ---------------------------------------------------------------------


@dataclass(frozen=True)
class Probe:
    kit: str
    explanandum: str
    measured: int
    predicted: int

    def row(self) -> dict[str, Any]:
        return asdict(self)


def cf_enumeration_size(c: Classifier, e: str, semantics: str = REACHABLE) -> int:
    g = influences(c)
    oracle = PosteriorOracle(c)
    seen, stack, total = {e}, [e], 0
    while stack:
        y = stack.pop()
        if g.parents(y):
            total += oracle.cf_size(y, semantics)
        for x in g.parents(y):
            if x not in seen:
                seen.add(x)
                stack.append(x)
    return total


def complexity_probe(
    c: Classifier,
    kit_name: str,
    e: str,
    a: Assignment,
    *,
    cf_semantics: str = REACHABLE,
    cf_budget: int | None = None,
) -> Probe:
    """Instrumented cost of one explanation.

    Dialectical kits report distinct posterior evaluations; the counterfactual
    kit reports how many input combinations it enumerated.
    """
    g = influences(c)
    oracle = PosteriorOracle(c) if cf_budget is None else PosteriorOracle(c, cf_budget)
    kit = make_kit(kit_name, c, oracle=oracle, cf_semantics=cf_semantics)
    generate(c, g, kit, e, a)
    if kit.name == "cf":
        return Probe(kit.name, e, oracle.enumerated, cf_enumeration_size(c, e, cf_semantics))
    if kit.name not in ("md", "sd"):
        raise KitError("complexity probes cover the md, sd and cf kits")
    return Probe(kit.name, e, oracle.evaluations, posterior_units(c, g, e))


# -- random classifiers and propositions ----------------------------------------------


def random_classifier(
    rng: np.random.Generator,
    max_vars: int = 5,
    max_values: int = 4,
    binary: bool = False,
    edge_prob: float = 0.5,
) -> Classifier:
    """Random chain classifier for property checks.

    Variables are placed in a random order and each forward pair becomes a
    dependency with probability ``edge_prob``; variables left without
    children are observations.  One time in four the structure is a naive
    Bayes star instead.  Table entries are normalized uniform draws on
    [0.05, 1], so every probability is positive.
    """
    n = int(rng.integers(2, max_vars + 1))
    names = [f"v{i}" for i in range(n)]
    edges: set[tuple[str, str]] = set()
    if rng.random() < 0.25:
        edges = {(names[0], v) for v in names[1:]}
    else:
        for i, j in itertools.combinations(range(n), 2):
            if rng.random() < edge_prob:
                edges.add((names[i], names[j]))
        if not edges:
            edges.add((names[0], names[-1]))
    parents_of = {p for p, _ in edges}
    variables = []
    for v in names:
        k = 2 if binary else int(rng.integers(2, max_values + 1))
        role = CLASSIFICATION if v in parents_of else OBSERVATION
        variables.append(Variable(v, role, tuple(f"{v}_{j}" for j in range(k))))
    dom = {v.name: v.domain for v in variables}

    def dist(k: int) -> list[float]:
        w = rng.uniform(0.05, 1.0, size=k)
        w = w / w.sum()
        w[-1] = 1.0 - float(np.sum(w[:-1]))
        return [float(x) for x in w]

    priors = {v: dict(zip(dom[v], dist(len(dom[v])))) for v in names}
    cond: dict = {}
    for p, ch in sorted(edges):
        table = cond.setdefault(ch, {cv: {} for cv in dom[ch]})
        for pv in dom[p]:
            for cv, q in zip(dom[ch], dist(len(dom[ch]))):
                table[cv].setdefault(p, {})[pv] = q
    return Classifier(variables, sorted(edges), priors, cond)


def random_input(c: Classifier, rng: np.random.Generator) -> dict[str, str]:
    return {o: c.domain(o)[int(rng.integers(len(c.domain(o))))] for o in c.observations}


@dataclass
class PropositionReport:
    seed: int
    trials: int
    cf_semantics: str
    checked: dict[str, int] = field(default_factory=dict)
    counterexamples: dict[str, list[dict[str, Any]]] = field(default_factory=dict)

    def count(self, prop: str) -> int:
        return len(self.counterexamples.get(prop, []))

    def ok(self, prop: str | None = None) -> bool:
        props = [prop] if prop else list(self.checked)
        return all(self.count(p) == 0 for p in props)

    def rows(self) -> list[dict[str, Any]]:
        return [
            {"proposition": p, "checked": n, "counterexamples": self.count(p), "seed": self.seed,
             "trials": self.trials, "cf_semantics": self.cf_semantics}
            for p, n in self.checked.items()
        ]


def check_propositions(
    seed: int = 0,
    trials: int = 100,
    inputs_per_trial: int = 3,
    max_vars: int = 5,
    max_values: int = 4,
    cf_semantics: str = REACHABLE,
) -> PropositionReport:
    """Check the kit subset relations edgewise on random classifiers.

    * ``prop1``: full and input-output influences coincide iff the
      dependencies are exactly outputs x observations;
    * ``prop2``: every monotonic relation is also the stochastic one;
    * ``prop3``: with all-binary domains the two kits are equal;
    * ``prop5``: critical implies monotonic support implies stochastic support.

    Every third trial uses all-binary domains.  Counterexamples carry the
    trial seed so they can be replayed with ``random_classifier``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rep = PropositionReport(seed, trials, cf_semantics, {p: 0 for p in ("prop1", "prop2", "prop3", "prop5")})
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        binary = t % 3 == 2
        c = random_classifier(rng, max_vars, 2 if binary else max_values, binary)
        # prop 1 over every output subset
        for k in range(len(c.classifications) + 1):
            for outs in itertools.combinations(c.classifications, k):
                rep.checked["prop1"] += 1
                if coincide(c, outs) != structural_coincidence(c, outs):
                    rep.counterexamples.setdefault("prop1", []).append({"trial": t, "outputs": list(outs)})
        oracle = PosteriorOracle(c)
        md = make_kit("md", c, oracle=oracle)
        sd = make_kit("sd", c, oracle=oracle)
        cf = make_kit("cf", c, oracle=oracle, cf_semantics=cf_semantics)
        g = influences(c)
        all_binary = all(len(c.domain(v)) == 2 for v in c.names)
        for _ in range(inputs_per_trial):
            a = random_input(c, rng)
            for edge in g.edges:
                mdr = {t_.polarity for t_ in md.holds(edge, a)}
                sdr = {t_.polarity for t_ in sd.holds(edge, a)}
                crit = cf.predicate("!")(edge, a)
                info = {"trial": t, "input": dict(a), "edge": list(edge)}
                rep.checked["prop2"] += 1
                if not mdr <= sdr:
                    rep.counterexamples.setdefault("prop2", []).append({**info, "md": sorted(mdr), "sd": sorted(sdr)})
                if all_binary:
                    rep.checked["prop3"] += 1
                    if mdr != sdr:
                        rep.counterexamples.setdefault("prop3", []).append({**info, "md": sorted(mdr), "sd": sorted(sdr)})
                rep.checked["prop5"] += 1
                if crit and not (SUPPORT in mdr and SUPPORT in sdr):
                    rep.counterexamples.setdefault("prop5", []).append(
                        {**info, "md": sorted(mdr), "sd": sorted(sdr), "y_values": len(c.domain(edge[1]))}
                    )
    return rep


# -- report output ------------------------------------------------------------------


def rows_to_csv(rows: Iterable[Mapping[str, Any]]) -> str:
    rows = list(rows)
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def format_table(rows: Sequence[Mapping[str, Any]]) -> str:
    """Fixed-width text table, percentages to two decimals."""
    rows = list(rows)
    if not rows:
        return "(no rows)\n"
    cols = list(rows[0])
    cells = [[f"{r[c]:.2f}" if isinstance(r[c], float) else str(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    line = "  ".join(c.ljust(w) for c, w in zip(cols, widths))
    out = [line, "  ".join("-" * w for w in widths)]
    out += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(out) + "\n"


__all__ = [
    "prevalence",
    "agreement",
    "monotonicity_violations",
    "complexity_probe",
    "check_propositions",
    "random_classifier",
    "random_input",
    "relations",
    "rows_to_csv",
    "format_table",
    "CLAMPED",
    "REACHABLE",
]
