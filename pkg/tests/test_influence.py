import numpy as np
import pytest
from hypothesis import given, strategies as st

from bcidx.errors import ModelError, UnknownVariable
from bcidx.evaluation import random_classifier
from bcidx.influence import IO, coincide, influences, io_influences, parents, structural_coincidence
from bcidx.model import CLASSIFICATION, OBSERVATION, Classifier, Variable


def test_play_outside_influences(po):
    g = influences(po)
    assert g.edge_set() == {("w", "o"), ("t", "o"), ("r", "o"), ("t", "r"), ("p", "r")}
    assert set(parents(g, "o")) == {"w", "t", "r"}
    assert set(parents(g, "r")) == {"t", "p"}
    assert parents(g, "w") == ()
    with pytest.raises(UnknownVariable):
        g.parents("zz")
    assert g.is_acyclic()


def test_io_influences(po):
    g = io_influences(po, ["o"])
    assert g.kind == IO
    assert g.edge_set() == {("w", "o"), ("t", "o"), ("p", "o")}
    both = io_influences(po, ["o", "r"])
    assert len(both) == 6 and ("w", "r") in both
    assert len(io_influences(po, [])) == 0
    with pytest.raises(ModelError):
        io_influences(po, ["w"])


def test_coincide(po):
    assert not coincide(po, ["o"])
    assert not coincide(po, ["o", "r"])


def nbc(k):
    vs = [Variable("c", CLASSIFICATION, ("+", "-"))] + [Variable(f"x{i}", OBSERVATION, ("a", "b")) for i in range(k)]
    cond = {f"x{i}": {"a": {"c": {"+": 0.3, "-": 0.6}}, "b": {"c": {"+": 0.7, "-": 0.4}}} for i in range(k)}
    pri = {v.name: dict.fromkeys(v.domain, 0.5) for v in vs}
    return Classifier(vs, [("c", f"x{i}") for i in range(k)], pri, cond)


def test_nbc_star_and_coincidence():
    c = nbc(4)
    g = influences(c)
    assert len(g) == 4 and set(g.parents("c")) == {"x0", "x1", "x2", "x3"}
    assert coincide(c, ["c"]) and structural_coincidence(c, ["c"])


def test_empty_dependencies():
    vs = [Variable("c", CLASSIFICATION, ("+", "-")), Variable("x", OBSERVATION, ("a", "b"))]
    c = Classifier(vs, [], {"c": {"+": 0.5, "-": 0.5}, "x": {"a": 0.5, "b": 0.5}}, {})
    assert len(influences(c)) == 0


def test_dot_uses_dashed_edges(po):
    dot = influences(po).to_dot()
    assert dot.count("style=dashed") == 5
    assert dot.startswith("digraph")


@given(st.integers(0, 100_000))
def test_coincide_iff_structural(seed):
    c = random_classifier(np.random.default_rng(seed))
    full = influences(c)
    assert full.is_acyclic()
    assert full.edge_set() == {(x, p) for p, x in c.edges if c.is_classification(p)}
    for k in range(len(c.classifications) + 1):
        outs = c.classifications[:k]
        assert coincide(c, outs) == structural_coincidence(c, outs)
