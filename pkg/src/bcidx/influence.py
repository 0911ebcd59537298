"""Influence graphs: which variables feed the inference of which classification."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .errors import ModelError, UnknownVariable
from .model import Classifier

FULL = "full"
IO = "io"


@dataclass(frozen=True)
class InfluenceGraph:
    """Edges ``(x, y)`` meaning ``x`` influences the classification ``y``."""

    edges: tuple[tuple[str, str], ...]
    kind: str = FULL
    outputs: tuple[str, ...] = ()
    variables: tuple[str, ...] = ()
    _parents: dict[str, tuple[str, ...]] = field(default=None, repr=False, compare=False)
    _children: dict[str, tuple[str, ...]] = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in (FULL, IO):
            raise ModelError(f"unknown influence graph kind {self.kind!r}")
        edges = tuple(sorted(set(self.edges)))
        universe = set(self.variables) | {v for e in edges for v in e}
        variables = tuple(v for v in self.variables if v in universe) + tuple(
            sorted(universe - set(self.variables))
        )
        parents: dict[str, tuple[str, ...]] = {v: () for v in variables}
        children: dict[str, tuple[str, ...]] = {v: () for v in variables}
        for x, y in edges:
            parents[y] += (x,)
            children[x] += (y,)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "_parents", parents)
        object.__setattr__(self, "_children", children)

    def parents(self, e: str) -> tuple[str, ...]:
        """Influencers of ``e`` (sorted)."""
        try:
            return self._parents[e]
        except KeyError:
            raise UnknownVariable(e) from None

    def children(self, x: str) -> tuple[str, ...]:
        try:
            return self._children[x]
        except KeyError:
            raise UnknownVariable(x) from None

    def edge_set(self) -> frozenset[tuple[str, str]]:
        return frozenset(self.edges)

    def __contains__(self, edge: object) -> bool:
        return edge in self.edge_set()

    def __len__(self) -> int:
        return len(self.edges)

    def is_acyclic(self) -> bool:
        state: dict[str, int] = {}

        def visit(v: str) -> bool:
            state[v] = 1
            for w in self._children[v]:
                s = state.get(w, 0)
                if s == 1 or (s == 0 and not visit(w)):
                    return False
            state[v] = 2
            return True

        return all(state.get(v, 0) == 2 or visit(v) for v in self.variables)

    def to_dot(self, name: str = "influences") -> str:
        lines = [f"digraph {_dot_id(name)} {{", "  rankdir=BT;"]
        for v in self.variables:
            lines.append(f"  {_dot_id(v)};")
        for x, y in self.edges:
            lines.append(f"  {_dot_id(x)} -> {_dot_id(y)} [style=dashed];")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _dot_id(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def influences(c: Classifier) -> InfluenceGraph:
    """Reverse every dependency edge leaving a classification."""
    edges = [(x, p) for p, x in c.edges if c.is_classification(p)]
    return InfluenceGraph(tuple(edges), FULL, (), c.names)


def io_influences(c: Classifier, outputs: Iterable[str]) -> InfluenceGraph:
    """Every observation influences every output."""
    outputs = tuple(dict.fromkeys(outputs))
    for y in outputs:
        if not c.is_classification(y):
            raise ModelError(f"output {y!r} is not a classification")
    edges = [(o, y) for o in c.observations for y in outputs]
    return InfluenceGraph(tuple(edges), IO, outputs, c.names)


def structural_coincidence(c: Classifier, outputs: Iterable[str]) -> bool:
    """The dependency relation is exactly outputs x observations."""
    outputs = set(outputs)
    return set(c.edges) == {(y, o) for y in outputs for o in c.observations}


def coincide(c: Classifier, outputs: Iterable[str]) -> bool:
    """Whether the full and input-output influence graphs have the same edges."""
    return influences(c).edge_set() == io_influences(c, outputs).edge_set()


def parents(g: InfluenceGraph, e: str) -> tuple[str, ...]:
    return g.parents(e)
