"""Shipped example classifiers and their reference explanations."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .learning import Dataset, TrainConfig, load_config, read_csv, train
from .model import CLASSIFICATION, OBSERVATION, Classifier, Variable


def data_path(name: str) -> Path:
    return Path(str(resources.files("bcidx") / "data" / name))


def play_outside_dataset() -> Dataset:
    return read_csv(data_path("play_outside.csv"))


def play_outside_config() -> TrainConfig:
    return load_config(data_path("play_outside.toml"))


def play_outside() -> Classifier:
    """Chain classifier: o (play outside) over w, t, r; r (raining) over t, p."""
    clf, _ = train(play_outside_dataset(), play_outside_config())
    return clf


PLAY_OUTSIDE_INPUTS = tuple(
    tuple(r) for r in (
        "lll", "mll", "lml", "mml", "hll", "lhl", "hml", "mhl", "hhl",
        "llh", "mlh", "lmh", "mmh", "hlh", "hmh", "lhh", "mhh", "hhh",
    )
)

# Reference explanation sets per input (w, t, p).  Each entry gives, for
# r and o, the influencers in the stochastic attack/support, monotonic
# attack/support, critical and potential relations.
_T = {
    "lll": ("t", "p", "", "p", "w", "tr", "w", "r", "p", "", "r", "t"),
    "mll": ("t", "p", "", "p", "", "wtr", "", "r", "p", "", "", "wtr"),
    "lml": ("t", "p", "", "p", "wt", "r", "wt", "r", "p", "", "r", ""),
    "mml": ("t", "p", "", "p", "t", "wr", "t", "r", "p", "", "r", "w"),
    "hll": ("t", "p", "", "p", "", "wtr", "", "r", "p", "", "", "wtr"),
    "lhl": ("", "tp", "", "tp", "w", "tr", "w", "tr", "", "tp", "", "r"),
    "hml": ("t", "p", "", "p", "t", "wr", "t", "r", "p", "", "r", "w"),
    "mhl": ("", "tp", "", "tp", "", "wtr", "", "tr", "", "tp", "", "wr"),
    "hhl": ("", "tp", "", "tp", "", "wtr", "", "tr", "", "tp", "", "wr"),
    "llh": ("", "tp", "", "p", "", "wtr", "", "wr", "p", "t", "wr", ""),
    "mlh": ("", "tp", "", "p", "tr", "w", "r", "", "p", "t", "t", "w"),
    "lmh": ("", "tp", "", "p", "", "wtr", "", "wtr", "p", "t", "r", "wt"),
    "mmh": ("", "tp", "", "p", "w", "tr", "", "tr", "p", "t", "tr", ""),
    "hlh": ("", "tp", "", "p", "tr", "w", "r", "", "p", "t", "t", "w"),
    "hmh": ("", "tp", "", "p", "w", "tr", "", "tr", "p", "t", "tr", ""),
    "lhh": ("p", "t", "p", "t", "w", "tr", "w", "tr", "t", "", "", "r"),
    "mhh": ("p", "t", "p", "t", "", "wtr", "", "tr", "t", "", "", "wr"),
    "hhh": ("p", "t", "p", "t", "", "wtr", "", "tr", "t", "", "", "wr"),
}

_LABELS = ("·−", "·+", "−", "+")


def play_outside_reference() -> dict[tuple[str, ...], dict[str, dict[str, frozenset[str]]]]:
    """``ref[(w,t,p)][y][label]`` is the set of influencers of ``y`` in that relation."""
    out = {}
    for key, row in _T.items():
        per_y = {}
        for y, cols in (("r", row[0:4] + row[8:10]), ("o", row[4:8] + row[10:12])):
            per_y[y] = {
                label: frozenset(s) for label, s in zip(_LABELS + ("!", "*"), cols)
            }
        out[tuple(key)] = per_y
    return out


PLAY_OUTSIDE_DECISIONS = {
    tuple(k): v
    for k, v in {
        "lll": ("+", "-"), "mll": ("+", "-"), "lml": ("+", "-"), "mml": ("+", "-"),
        "hll": ("+", "-"), "lhl": ("+", "-"), "hml": ("+", "-"), "mhl": ("+", "-"),
        "hhl": ("+", "-"), "llh": ("-", "+"), "mlh": ("-", "-"), "lmh": ("-", "+"),
        "mmh": ("-", "+"), "hlh": ("-", "-"), "hmh": ("-", "+"), "lhh": ("+", "-"),
        "mhh": ("+", "-"), "hhh": ("+", "-"),
    }.items()
}


def as_input(key: tuple[str, ...]) -> dict[str, str]:
    return dict(zip("wtp", key))


def three_valued_counterexample() -> Classifier:
    """One 3-valued observation x feeding a binary class y.

    At x=a the class is y=+ with posterior .6; switching to b raises it to
    .95 while c lowers it to about .14.  The prior-weighted alternatives
    average below .6, so x stochastically supports y although one change
    increases the posterior: a dialectical monotonicity violation.
    """
    variables = [
        Variable("x", OBSERVATION, ("a", "b", "c")),
        Variable("y", CLASSIFICATION, ("+", "-")),
    ]
    cond = {"x": {"a": {"y": {"+": 0.3, "-": 0.2}}, "b": {"y": {"+": 0.57, "-": 0.03}}, "c": {"y": {"+": 0.13, "-": 0.77}}}}
    priors = {
        "y": {"+": 0.5, "-": 0.5},
        "x": {"a": 0.25, "b": 0.3, "c": 0.45},
    }
    return Classifier(variables, [("y", "x")], priors, cond)


COUNTEREXAMPLE_INPUT = {"x": "a"}
