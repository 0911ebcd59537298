"""Attribution scores v(a, x, y) for input-output influences.

Three sources share one interface, ``score(a, x, y)``: a perturbation
surrogate fitted by weighted least squares, exact Shapley values under prior
masking, and scores imported from a file produced by an external tool.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import AttributionUnavailable, BudgetExceeded, DataError
from .model import Assignment, Classifier, _Inference, check_assignment

logger = logging.getLogger(__name__)

MIN_SAMPLES = 100
MAX_SHAPLEY_OBSERVATIONS = 20
RIDGE = 1e-6


def instance_key(a: Assignment) -> str:
    """Canonical ``k=v,...`` literal of an assignment (keys sorted)."""
    return ",".join(f"{k}={a[k]}" for k in sorted(a))


@dataclass(frozen=True)
class AttributionScores:
    """Scores for one input assignment, keyed by (observation, output)."""

    values: Mapping[tuple[str, str], float]
    instance: str = ""

    def get(self, x: str, y: str) -> float:
        try:
            return self.values[(x, y)]
        except KeyError:
            raise AttributionUnavailable(f"attribution unavailable for ({x}, {y})") from None

    def outputs(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(y for _, y in self.values))


class _Memo:
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._cache: dict[frozenset, AttributionScores] = {}

    def get_or(self, a: Assignment, build: Callable[[], AttributionScores]) -> AttributionScores:
        key = frozenset(a.items())
        with self._lock:
            hit = self._cache.get(key)
        if hit is None:
            hit = build()
            with self._lock:
                self._cache.setdefault(key, hit)
        return hit


def _decided_probability(clf: Classifier, b: Assignment, y: str, target: str) -> float:
    return _Inference(clf, b).posterior(y)[target]


# -- surrogate ----------------------------------------------------------------


@dataclass
class SurrogateSource:
    """LIME-style local linear surrogate.

    Each sample resamples every observation from its prior with probability
    one half.  Features are indicators "observation unchanged"; the target is
    the posterior of the decided output value; samples are weighted by
    ``exp(-d^2 / width^2)`` with ``d`` the number of changed observations.
    """

    clf: Classifier
    outputs: Sequence[str]
    samples: int = 5000
    width: float | None = None
    seed: int = 0
    _memo: _Memo = field(default_factory=_Memo, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.samples < MIN_SAMPLES:
            raise DataError(f"surrogate needs at least {MIN_SAMPLES} samples")
        self.outputs = tuple(self.outputs)
        for y in self.outputs:
            if not self.clf.is_classification(y):
                raise DataError(f"output {y!r} is not a classification")
        if self.width is None:
            self.width = 0.75 * math.sqrt(len(self.clf.observations))
        if not self.width > 0:
            raise DataError("kernel width must be positive")

    def scores(self, a: Assignment) -> AttributionScores:
        check_assignment(self.clf, a)
        return self._memo.get_or(a, lambda: self._fit(a))

    def score(self, a: Assignment, x: str, y: str) -> float:
        return self.scores(a).get(x, y)

    def _fit(self, a: Assignment) -> AttributionScores:
        clf = self.clf
        obs = clf.observations
        base = {o: a[o] for o in obs}
        decided = _Inference(clf, base)
        values: dict[tuple[str, str], float] = {}
        for j, y in enumerate(self.outputs):
            target = decided.value(y)
            z, t = self._sample(base, y, target, np.random.default_rng([self.seed, j]))
            dist = len(obs) - z.sum(axis=1)
            w = np.exp(-(dist**2) / self.width**2)
            coef = weighted_least_squares(z, t, w)
            for o, c in zip(obs, coef[1:]):
                values[(o, y)] = float(c)
        return AttributionScores(values, instance_key(base))

    def _sample(self, base: dict[str, str], y: str, target: str, rng: np.random.Generator):
        clf = self.clf
        obs = clf.observations
        n = self.samples
        cols = []
        for o in obs:
            dom = clf.domain(o)
            p = np.array([clf.priors[o][v] for v in dom])
            drawn = rng.choice(len(dom), size=n, p=p / p.sum())
            resample = rng.random(n) < 0.5
            cur = dom.index(base[o])
            col = np.where(resample, drawn, cur)
            col[0] = cur  # the instance itself
            cols.append(col)
        idx = np.stack(cols, axis=1)
        z = (idx == np.array([clf.domain(o).index(base[o]) for o in obs])).astype(float)
        memo: dict[tuple[int, ...], float] = {}
        t = np.empty(n)
        for i, row in enumerate(map(tuple, idx)):
            p = memo.get(row)
            if p is None:
                b = {o: clf.domain(o)[k] for o, k in zip(obs, row)}
                p = memo[row] = _decided_probability(clf, b, y, target)
            t[i] = p
        return z, t


def weighted_least_squares(z: np.ndarray, t: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Coefficients ``[intercept, *slopes]``; falls back to ridge if singular."""
    x = np.column_stack([np.ones(len(t)), z])
    xtw = x.T * w
    a = xtw @ x
    b = xtw @ t
    if np.linalg.matrix_rank(a) < a.shape[0]:
        logger.warning("singular normal equations; using ridge penalty %g", RIDGE)
        a = a + RIDGE * np.eye(a.shape[0])
    return np.linalg.solve(a, b)


# -- exact Shapley --------------------------------------------------------------


@dataclass
class ShapleySource:
    """Exact Shapley values; absent observations are averaged over their priors."""

    clf: Classifier
    outputs: Sequence[str]
    budget: int = 1_000_000
    _memo: _Memo = field(default_factory=_Memo, init=False, repr=False)

    def __post_init__(self) -> None:
        self.outputs = tuple(self.outputs)
        for y in self.outputs:
            if not self.clf.is_classification(y):
                raise DataError(f"output {y!r} is not a classification")
        n = len(self.clf.observations)
        if n > MAX_SHAPLEY_OBSERVATIONS:
            raise BudgetExceeded(
                f"exact Shapley values need at most {MAX_SHAPLEY_OBSERVATIONS} observations "
                f"(got {n}); use the surrogate instead"
            )
        cost = math.prod(1 + len(self.clf.domain(o)) for o in self.clf.observations)
        if cost > self.budget:
            raise BudgetExceeded(
                f"exact Shapley enumeration needs {cost} evaluations (budget {self.budget}); "
                "use the surrogate instead"
            )

    def scores(self, a: Assignment) -> AttributionScores:
        check_assignment(self.clf, a)
        return self._memo.get_or(a, lambda: self._compute(a))

    def score(self, a: Assignment, x: str, y: str) -> float:
        return self.scores(a).get(x, y)

    def value_function(self, a: Assignment, y: str) -> dict[int, float]:
        """v(S) for every coalition bitmask S over the observations."""
        clf = self.clf
        obs = clf.observations
        n = len(obs)
        base = {o: a[o] for o in obs}
        target = _Inference(clf, base).value(y)
        memo: dict[tuple[str, ...], float] = {}

        def prob(values: tuple[str, ...]) -> float:
            p = memo.get(values)
            if p is None:
                p = memo[values] = _decided_probability(clf, dict(zip(obs, values)), y, target)
            return p

        v = {}
        for mask in range(1 << n):
            free = [i for i in range(n) if not mask >> i & 1]
            total = []
            for combo in itertools.product(*(clf.domain(obs[i]) for i in free)):
                values = [base[o] for o in obs]
                weight = 1.0
                for i, val in zip(free, combo):
                    values[i] = val
                    weight *= clf.priors[obs[i]][val]
                if weight:
                    total.append(weight * prob(tuple(values)))
            v[mask] = math.fsum(total)
        return v

    def _compute(self, a: Assignment) -> AttributionScores:
        obs = self.clf.observations
        n = len(obs)
        fact = [math.factorial(k) for k in range(n + 1)]
        values: dict[tuple[str, str], float] = {}
        for y in self.outputs:
            v = self.value_function(a, y)
            for i, o in enumerate(obs):
                bit = 1 << i
                terms = []
                for mask in range(1 << n):
                    if mask & bit:
                        continue
                    s = bin(mask).count("1")
                    terms.append(fact[s] * fact[n - s - 1] / fact[n] * (v[mask | bit] - v[mask]))
                values[(o, y)] = math.fsum(terms)
        return AttributionScores(values, instance_key({o: a[o] for o in obs}))


# -- file import / export -------------------------------------------------------


def _read_records(path: Path) -> list[dict]:
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON: {exc}") from None
        if isinstance(doc, Mapping):
            doc = doc.get("scores", [])
        if not isinstance(doc, list):
            raise DataError(f"{path}: expected a list of score records")
        return doc
    rows = list(csv.DictReader(text.splitlines()))
    if rows and set(rows[0]) != {"instance", "observation", "output", "score"}:
        raise DataError(f"{path}: header must be instance,observation,output,score")
    return rows


def read_score_file(path: str | Path) -> dict[str, AttributionScores]:
    """All scores in a CSV or JSON file, grouped by instance id."""
    path = Path(path)
    grouped: dict[str, dict[tuple[str, str], float]] = {}
    for i, rec in enumerate(_read_records(path)):
        try:
            inst, x, y, raw = str(rec["instance"]), str(rec["observation"]), str(rec["output"]), rec["score"]
        except (KeyError, TypeError):
            raise DataError(f"{path}: record {i} lacks instance/observation/output/score") from None
        try:
            s = float(raw)
        except (TypeError, ValueError):
            raise DataError(f"{path}: non-numeric score {raw!r} for ({x}, {y})") from None
        if not math.isfinite(s):
            raise DataError(f"{path}: non-finite score for ({x}, {y})")
        grouped.setdefault(inst, {})[(x, y)] = s
    return {k: AttributionScores(v, k) for k, v in grouped.items()}


def load_scores(
    path: str | Path,
    instance: str,
    observations: Iterable[str] | None = None,
    outputs: Iterable[str] | None = None,
) -> AttributionScores:
    """Scores of one instance, checked to cover observations x outputs exactly."""
    table = read_score_file(path)
    if instance not in table:
        raise AttributionUnavailable(f"attribution unavailable: no scores for instance {instance!r}")
    scores = table[instance]
    return _checked(scores, observations, outputs, str(path))


def _checked(scores: AttributionScores, observations, outputs, where: str) -> AttributionScores:
    if outputs is not None:
        outputs = tuple(outputs)
        extra = sorted({y for _, y in scores.values} - set(outputs))
        if extra:
            raise DataError(f"{where}: scores for undeclared outputs {extra}")
    if observations is not None and outputs is not None:
        for x in observations:
            for y in outputs:
                if (x, y) not in scores.values:
                    raise AttributionUnavailable(
                        f"attribution unavailable for ({x}, {y}) in instance {scores.instance!r}"
                    )
    return scores


def save_scores(path: str | Path, scores: Iterable[AttributionScores]) -> None:
    path = Path(path)
    records = [
        {"instance": s.instance, "observation": x, "output": y, "score": v}
        for s in scores
        for (x, y), v in s.values.items()
    ]
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps(records, indent=2) + "\n", encoding="utf-8")
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, ["instance", "observation", "output", "score"], lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow({**r, "score": repr(r["score"])})


@dataclass
class FileSource:
    """Scores imported from a file, looked up by instance id.

    ``resolve`` maps an assignment to its instance id; by default the
    canonical ``k=v,...`` literal of its observations.
    """

    clf: Classifier
    path: str | Path
    outputs: Sequence[str]
    resolve: Callable[[Assignment], str] | None = None
    _table: dict[str, AttributionScores] = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        self.outputs = tuple(self.outputs)
        self._table = read_score_file(self.path)

    def scores(self, a: Assignment) -> AttributionScores:
        key = (self.resolve or self._default_key)(a)
        if key not in self._table:
            raise AttributionUnavailable(f"attribution unavailable: no scores for instance {key!r}")
        return _checked(self._table[key], self.clf.observations, self.outputs, str(self.path))

    def _default_key(self, a: Assignment) -> str:
        return instance_key({o: a[o] for o in self.clf.observations if o in a})

    def score(self, a: Assignment, x: str, y: str) -> float:
        return self.scores(a).get(x, y)


@dataclass
class ConstantSource:
    """Fixed scores regardless of the input; handy for tests and custom kits."""

    values: Mapping[tuple[str, str], float]

    def scores(self, a: Assignment) -> AttributionScores:
        return AttributionScores(dict(self.values), instance_key(a))

    def score(self, a: Assignment, x: str, y: str) -> float:
        return self.scores(a).get(x, y)


def make_source(kind: str, clf: Classifier, outputs: Sequence[str], *, samples: int = 5000, seed: int = 0,
                width: float | None = None, resolve=None):
    """Source from a CLI-style spec: ``surrogate``, ``shapley`` or ``file:<path>``."""
    if kind in ("surrogate", "lime"):
        return SurrogateSource(clf, outputs, samples, width, seed)
    if kind in ("shapley", "shap"):
        return ShapleySource(clf, outputs)
    if kind.startswith("file:"):
        return FileSource(clf, kind[5:], outputs, resolve)
    raise DataError(f"unknown attribution source {kind!r}")
