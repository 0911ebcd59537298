import numpy as np
import pytest
from hypothesis import given, strategies as st

from bcidx.errors import KitError, ModelError
from bcidx.evaluation import random_classifier, random_input
from bcidx.fixtures import PLAY_OUTSIDE_DECISIONS, PLAY_OUTSIDE_INPUTS, as_input, play_outside_reference
from bcidx.idx import IDX, generate, posterior_units, to_dot, validate
from bcidx.influence import influences, io_influences
from bcidx.kits import PosteriorOracle, custom_kit, make_kit
from bcidx.attribution import ConstantSource
from bcidx.model import predict_all

A = {"w": "l", "t": "m", "p": "l"}
REFERENCE = play_outside_reference()


@pytest.fixture(scope="module")
def kits(po):
    o = PosteriorOracle(po)
    return {k: make_kit(k, po, oracle=o) for k in ("md", "sd", "cf")}


@pytest.mark.parametrize("key", PLAY_OUTSIDE_INPUTS, ids="".join)
def test_reference_table(po, kits, key):
    a = as_input(key)
    full = predict_all(po, a)
    assert (full["r"], full["o"]) == PLAY_OUTSIDE_DECISIONS[key]
    g = influences(po)
    for y, expected in REFERENCE[key].items():
        for label, xs in expected.items():
            kit = kits[{"−": "md", "+": "md", "·−": "sd", "·+": "sd", "!": "cf", "*": "cf"}[label]]
            got = {x for x in g.parents(y) if kit.type(label) in kit.holds((x, y), a)}
            assert got == set(xs), (key, y, label)


def test_monotonic_figure(po, kits):
    idx = generate(po, influences(po), kits["md"], "o", A)
    assert idx.relation("−") == {("t", "o"), ("w", "o")}
    assert idx.relation("+") == {("r", "o"), ("p", "r")}
    assert idx.relevant == {"o", "r", "w", "t", "p"}
    assert idx.assignment == {"w": "l", "t": "m", "p": "l", "r": "+", "o": "-"}
    assert validate(idx, po, influences(po), kits["md"], A) == []


def test_counterfactual_figure(po, kits):
    idx = generate(po, influences(po), kits["cf"], "o", A)
    assert idx.relation("!") == {("p", "r"), ("r", "o")}
    assert idx.relation("*") == frozenset()
    assert idx.relevant == {"o", "r", "p"}


def test_dot_rendering(po, kits):
    dot = to_dot(generate(po, influences(po), kits["md"], "o", A))
    assert dot.startswith('digraph "idx_o" {')
    assert sum("->" in line for line in dot.splitlines()) == 4
    assert sum("label=" in line and "->" not in line for line in dot.splitlines()) == 5
    assert '"o" [label="o=-", peripheries=2];' in dot
    assert '"w" [label="w=l", fillcolor=lightgrey];' in dot
    assert '"p" -> "r" [label="+"];' in dot


def test_json_round_trip(po, kits):
    idx = generate(po, influences(po), kits["sd"], "o", A)
    again = IDX.from_json(idx.to_json())
    assert again == idx
    assert again.to_json() == idx.to_json()
    with pytest.raises(ModelError):
        IDX.from_dict({"format": "other"})


def test_validate_reports_violations(po, kits):
    g = influences(po)
    bad = IDX("o", frozenset({"o", "t", "p"}), {"−": frozenset({("t", "o")}), "+": frozenset({("t", "r")})})
    problems = validate(bad, po, g, kits["md"], A)
    assert any(p.startswith("membership:") for p in problems)
    lying = IDX("o", frozenset({"o", "r", "p"}), {"−": frozenset({("r", "o")}), "+": frozenset()})
    assert any(p.startswith("predicate:") for p in validate(lying, po, g, kits["md"], A))
    orphan = IDX("o", frozenset({"o", "r", "p"}), {"−": frozenset(), "+": frozenset({("r", "o")})})
    assert validate(orphan, po, g, kits["md"], A) == ["connectivity: 'p' has no relation path to 'o'"]


def test_constant_false_kit_gives_trivial_idx(po):
    kit = custom_kit("never", [("no", lambda e, a: False)])
    idx = generate(po, influences(po), kit, "o", A)
    assert idx.relevant == {"o"} and idx.edges() == frozenset()


def test_generation_errors(po, kits):
    with pytest.raises(ModelError):
        generate(po, influences(po), kits["md"], "w", A)
    io_kit = make_kit("attr", po, source=ConstantSource({}))
    with pytest.raises(KitError, match="influence graph"):
        generate(po, influences(po), io_kit, "o", A)


def test_io_idx(po):
    src = ConstantSource({("w", "o"): -0.2, ("t", "o"): 0.1, ("p", "o"): 0.0})
    kit = make_kit("attr", po, source=src)
    idx = generate(po, io_influences(po, ["o"]), kit, "o", A)
    assert idx.relation("attr−") == {("w", "o")} and idx.relation("attr+") == {("t", "o")}
    assert idx.relevant == {"o", "w", "t"}


def test_posterior_units_on_fixture(po):
    # o: 1 + (2 + 2 + 1); r: 1 + (2 + 1)
    assert posterior_units(po, influences(po), "o") == 10
    assert posterior_units(po, influences(po), "r") == 4


@given(st.integers(0, 100_000), st.sampled_from(["md", "sd", "cf"]))
def test_generated_idx_is_valid(seed, name):
    rng = np.random.default_rng(seed)
    c = random_classifier(rng)
    a = random_input(c, rng)
    g = influences(c)
    kit = make_kit(name, c)
    for e in c.classifications:
        idx = generate(c, g, kit, e, a)
        assert validate(idx, c, g, kit, a) == []
        assert idx.edges() <= g.edge_set()
