"""Influence-driven explanations: generation, validation and rendering."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from .errors import KitError, ModelError
from .influence import InfluenceGraph
from .kits import ExplanationKit, relation_type
from .model import Assignment, Classifier, check_assignment, predict_all

FORMAT = "idx/1"

Edge = tuple[str, str]


@dataclass(frozen=True)
class IDX:
    """Relevant variables plus one edge set per relation label, rooted at ``explanandum``."""

    explanandum: str
    relevant: frozenset[str]
    relations: Mapping[str, frozenset[Edge]]
    assignment: Mapping[str, str] = field(default_factory=dict)
    kit: str = ""
    observations: frozenset[str] = frozenset()

    def edges(self) -> frozenset[Edge]:
        out: set[Edge] = set()
        for es in self.relations.values():
            out |= es
        return frozenset(out)

    def labels_of(self, edge: Edge) -> tuple[str, ...]:
        return tuple(label for label, es in self.relations.items() if edge in es)

    def relation(self, label: str) -> frozenset[Edge]:
        return self.relations.get(label, frozenset())

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": FORMAT,
            "kit": self.kit,
            "explanandum": self.explanandum,
            "relevant": sorted(self.relevant),
            "relations": {label: sorted(map(list, es)) for label, es in self.relations.items()},
            "assignment": dict(sorted(self.assignment.items())),
            "observations": sorted(self.observations),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "IDX":
        if doc.get("format") != FORMAT:
            raise ModelError(f"unsupported IDX format {doc.get('format')!r}")
        try:
            return cls(
                doc["explanandum"],
                frozenset(doc["relevant"]),
                {k: frozenset(tuple(e) for e in v) for k, v in doc["relations"].items()},
                dict(doc.get("assignment", {})),
                doc.get("kit", ""),
                frozenset(doc.get("observations", ())),
            )
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed IDX document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "IDX":
        return cls.from_dict(json.loads(text))


def generate(c: Classifier, g: InfluenceGraph, kit: ExplanationKit, e: str, a: Assignment) -> IDX:
    """Explain the decided value of ``e`` under input ``a``.

    Every influencer reachable from ``e`` is expanded once, whether or not a
    relation held on the edge that led to it; variables that end up with no
    relation path to ``e`` are then dropped.
    """
    if not c.is_classification(e):
        raise ModelError(f"explanandum {e!r} is not a classification")
    if kit.graph_kind != g.kind:
        raise KitError(f"kit {kit.name!r} expects a {kit.graph_kind} influence graph, got {g.kind}")
    check_assignment(c, a)
    relations: dict[str, set[Edge]] = {label: set() for label in kit.labels}
    expanded: set[str] = set()

    def visit(y: str) -> None:
        expanded.add(y)
        for x in g.parents(y):
            for t in kit.holds((x, y), a):
                relations[t.label].add((x, y))
            if x not in expanded:
                visit(x)

    visit(e)

    into: dict[str, set[str]] = {}
    for es in relations.values():
        for x, y in es:
            into.setdefault(y, set()).add(x)
    relevant, stack = {e}, [e]
    while stack:
        for x in sorted(into.get(stack.pop(), ())):
            if x not in relevant:
                relevant.add(x)
                stack.append(x)
    kept = {label: frozenset(ed for ed in es if ed[0] in relevant and ed[1] in relevant) for label, es in relations.items()}

    oracle = kit.oracle
    if oracle is not None:
        snapshot = {v: oracle.value(a, v) for v in relevant}
    else:
        full = predict_all(c, a)
        snapshot = {v: full[v] for v in relevant}
    return IDX(e, frozenset(relevant), kept, snapshot, kit.name, frozenset(v for v in relevant if not c.is_classification(v)))


def validate(idx: IDX, c: Classifier, g: InfluenceGraph, kit: ExplanationKit, a: Assignment) -> list[str]:
    """Violations of membership, predicate and connectivity conditions (empty if valid)."""
    problems: list[str] = []
    if idx.explanandum not in idx.relevant:
        problems.append(f"membership: explanandum {idx.explanandum!r} is not relevant")
    for label, es in sorted(idx.relations.items()):
        try:
            pred = kit.predicate(label)
        except KitError:
            problems.append(f"membership: relation {label!r} is not in kit {kit.name!r}")
            continue
        for edge in sorted(es):
            if edge not in g:
                problems.append(f"membership: {edge} is not an influence")
            elif not (edge[0] in idx.relevant and edge[1] in idx.relevant):
                problems.append(f"membership: {edge} leaves the relevant variables")
            elif not pred(edge, a):
                problems.append(f"predicate: {label} does not hold on {edge}")
    into: dict[str, set[str]] = {}
    for x, y in idx.edges():
        into.setdefault(y, set()).add(x)
    reached, stack = {idx.explanandum}, [idx.explanandum]
    while stack:
        for x in into.get(stack.pop(), ()):
            if x not in reached:
                reached.add(x)
                stack.append(x)
    for v in sorted(idx.relevant - reached):
        problems.append(f"connectivity: {v!r} has no relation path to {idx.explanandum!r}")
    return problems


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(idx: IDX) -> str:
    """Graphviz rendering: observations grey, edges labelled with relation symbols."""
    lines = [f"digraph {_q('idx_' + idx.explanandum)} {{", "  rankdir=BT;", "  node [shape=ellipse, style=filled, fillcolor=white];"]
    for v in sorted(idx.relevant):
        label = f"{v}={idx.assignment[v]}" if v in idx.assignment else v
        attrs = [f"label={_q(label)}"]
        if v in idx.observations:
            attrs.append("fillcolor=lightgrey")
        if v == idx.explanandum:
            attrs.append("peripheries=2")
        lines.append(f"  {_q(v)} [{', '.join(attrs)}];")
    for label in sorted(idx.relations):
        for x, y in sorted(idx.relations[label]):
            lines.append(f"  {_q(x)} -> {_q(y)} [label={_q(relation_type(label).label)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json(idx: IDX) -> str:
    return idx.to_json()


def from_json(text: str) -> IDX:
    return IDX.from_json(text)


def posterior_units(c: Classifier, g: InfluenceGraph, e: str) -> int:
    """Expected distinct posterior evaluations of a dialectical IDX for ``e``.

    One baseline per expanded variable with influencers, plus one per
    alternative value of each of its influencers.
    """
    seen, stack, total = {e}, [e], 0
    while stack:
        y = stack.pop()
        ps = g.parents(y)
        if ps:
            total += 1 + sum(len(c.domain(x)) - 1 for x in ps)
        for x in ps:
            if x not in seen:
                seen.add(x)
                stack.append(x)
    return total

