"""Fitting classifiers from categorical data.

Counting follows Laplace smoothing with the ``alpha * |values|`` denominator.
Priors are raw frequencies unless ``smooth_priors`` is set, which is how the
class priors of the reference play-outside tables come out (12/18 = .67).
"""

from __future__ import annotations

import bisect
import csv
import itertools
import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

from .errors import DataError, ModelError
from .model import CLASSIFICATION, OBSERVATION, Classifier, Variable

logger = logging.getLogger(__name__)

CATEGORICAL = "categorical"
NUMERIC = "numeric"


@dataclass(frozen=True)
class Dataset:
    columns: tuple[str, ...]
    kinds: tuple[str, ...]
    rows: tuple[tuple[Any, ...], ...]

    def __post_init__(self) -> None:
        if len(self.columns) != len(self.kinds):
            raise DataError("one kind per column")
        if len(set(self.columns)) != len(self.columns):
            raise DataError("duplicate column names")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.columns):
                raise DataError(f"row {i} has {len(row)} cells, expected {len(self.columns)}")

    def __len__(self) -> int:
        return len(self.rows)

    def index(self, column: str) -> int:
        try:
            return self.columns.index(column)
        except ValueError:
            raise DataError(f"no column named {column!r}") from None

    def column(self, name: str) -> list[Any]:
        i = self.index(name)
        return [r[i] for r in self.rows]

    def records(self) -> list[dict[str, Any]]:
        return [dict(zip(self.columns, r)) for r in self.rows]

    def select(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(self.columns, self.kinds, tuple(self.rows[i] for i in indices))

    @classmethod
    def from_records(cls, records: Sequence[Mapping[str, Any]], columns: Sequence[str]) -> "Dataset":
        cols = tuple(columns)
        return cls(cols, (CATEGORICAL,) * len(cols), tuple(tuple(str(r[c]) for c in cols) for r in records))


def read_csv(path: str | Path, numeric: Iterable[str] | None = None) -> Dataset:
    """Load a CSV with a header row.

    Columns listed in ``numeric`` are parsed as floats; when ``numeric`` is
    None a column is numeric iff every cell parses as a float.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        raw = [row for row in reader if row]
    header = [h.strip() for h in header]
    for i, row in enumerate(raw):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 1} has {len(row)} cells, expected {len(header)}")
        for j, cell in enumerate(row):
            if cell.strip() == "":
                raise DataError(f"{path}: missing value in row {i + 1}, column {header[j]!r}")
    raw = [[c.strip() for c in row] for row in raw]
    kinds = []
    for j, name in enumerate(header):
        if numeric is None:
            kinds.append(NUMERIC if raw and all(_is_float(r[j]) for r in raw) else CATEGORICAL)
        else:
            kinds.append(NUMERIC if name in set(numeric) else CATEGORICAL)
    rows = []
    for row in raw:
        try:
            rows.append(tuple(float(c) if k == NUMERIC else c for c, k in zip(row, kinds)))
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from None
    return Dataset(tuple(header), tuple(kinds), tuple(rows))


def write_csv(d: Dataset, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(d.columns)
        w.writerows(d.rows)


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def natural_key(s: str) -> list:
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", s)]


# -- discretization -------------------------------------------------------

SAME_SIZE = "SS"
SAME_LENGTH = "SL"
CUSTOM = "custom"


@dataclass(frozen=True)
class BinSpec:
    strategy: str
    count: int | None = None
    cuts: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.strategy not in (SAME_SIZE, SAME_LENGTH, CUSTOM):
            raise DataError(f"unknown binning strategy {self.strategy!r}")
        if self.strategy == CUSTOM:
            if not self.cuts:
                raise DataError("custom binning needs cut points")
            if any(b <= a for a, b in zip(self.cuts, self.cuts[1:])):
                raise DataError("custom cut points must be strictly increasing")
        elif self.count is None or self.count < 2:
            raise DataError("number of buckets must be at least 2")


def cut_points(values: Sequence[float], spec: BinSpec) -> tuple[float, ...]:
    """Interior cut points; a value equal to a cut falls in the lower bucket."""
    if spec.strategy == CUSTOM:
        return tuple(float(c) for c in spec.cuts)
    arr = np.asarray(values, dtype=float)
    lo, hi = float(arr.min()), float(arr.max())
    if spec.strategy == SAME_LENGTH:
        if lo == hi:
            raise DataError("constant column cannot be split into equal-width buckets")
        return tuple(lo + k * (hi - lo) / spec.count for k in range(1, spec.count))
    qs = np.quantile(arr, [k / spec.count for k in range(1, spec.count)])
    cuts = tuple(sorted({float(q) for q in qs if lo <= q < hi}))
    if not cuts:
        raise DataError("column has too few distinct values for equal-frequency buckets")
    if len(cuts) + 1 < spec.count:
        logger.info("merged duplicate quantile cuts: %d buckets instead of %d", len(cuts) + 1, spec.count)
    return cuts


def bucket_labels(cuts: Sequence[float]) -> tuple[str, ...]:
    return tuple(f"b{i}" for i in range(len(cuts) + 1))


def bucketize(value: float, cuts: Sequence[float]) -> str:
    return f"b{bisect.bisect_left(cuts, value)}"


def fit_discretization(d: Dataset, bins: Mapping[str, BinSpec]) -> dict[str, tuple[float, ...]]:
    missing = [c for c, k in zip(d.columns, d.kinds) if k == NUMERIC and c not in bins]
    if missing:
        raise DataError(f"no binning given for numeric columns {missing}")
    return {c: cut_points(d.column(c), spec) for c, spec in bins.items() if c in d.columns}


def apply_discretization(d: Dataset, cuts: Mapping[str, Sequence[float]]) -> Dataset:
    idx = {d.index(c): tuple(cs) for c, cs in cuts.items() if c in d.columns}
    rows = []
    for r in d.rows:
        rows.append(tuple(bucketize(float(v), idx[j]) if j in idx else v for j, v in enumerate(r)))
    kinds = tuple(CATEGORICAL if j in idx else k for j, k in enumerate(d.kinds))
    return Dataset(d.columns, kinds, tuple(rows))


def discretize(d: Dataset, bins: Mapping[str, BinSpec]) -> Dataset:
    """Replace numeric columns with bucket labels ``b0 .. b{k-1}``."""
    return apply_discretization(d, fit_discretization(d, bins))


# -- fitting --------------------------------------------------------------


@dataclass(frozen=True)
class Hyperparams:
    alpha: float = 1.0
    class_priors: Mapping[str, Sequence[float]] = field(default_factory=dict)
    smooth_priors: bool = False
    split_seed: int = 0

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise DataError("alpha must be non-negative")
        for name, beta in self.class_priors.items():
            if any(b < 0 or b > 1 for b in beta) or abs(sum(beta) - 1.0) > 1e-9:
                raise DataError(f"class priors for {name!r} must lie in [0,1] and sum to 1")


def infer_domains(d: Dataset, declared: Mapping[str, Sequence[str]] | None = None) -> dict[str, tuple[str, ...]]:
    """Observed values of each column in natural order, unless declared."""
    declared = declared or {}
    out = {}
    for c, kind in zip(d.columns, d.kinds):
        if kind != CATEGORICAL:
            raise DataError(f"column {c!r} is numeric; discretize it first")
        seen = set(d.column(c))
        if c in declared:
            dom = tuple(str(v) for v in declared[c])
            extra = seen - set(dom)
            if extra:
                raise DataError(f"column {c!r} has values {sorted(extra)} outside its declared domain")
        else:
            dom = tuple(sorted(seen, key=natural_key))
        if len(dom) < 2:
            dom = dom + tuple(v for v in ("__other__",) if v not in dom)
            logger.warning("column %r has a single value; padded its domain", c)
        out[c] = dom
    return out


def fit_structure(
    d: Dataset,
    edges: Sequence[tuple[str, str]],
    classes: Sequence[str],
    h: Hyperparams,
    domains: Mapping[str, Sequence[str]] | None = None,
) -> Classifier:
    """Count all tables of a given dependency structure."""
    if len(d) == 0:
        raise DataError("empty dataset")
    if len(set(classes)) != len(classes):
        raise DataError("duplicate class names")
    doms = infer_domains(d, domains)
    for c in classes:
        if c not in doms:
            raise DataError(f"no column named {c!r}")
    n = len(d)
    alpha = h.alpha
    warnings: list[str] = []
    cols = {c: d.column(c) for c in d.columns}

    variables = [
        Variable(c, CLASSIFICATION if c in classes else OBSERVATION, doms[c]) for c in d.columns
    ]
    priors: dict[str, dict[str, float]] = {}
    for c in d.columns:
        counts = Counter(cols[c])
        if c in h.class_priors:
            beta = list(h.class_priors[c])
            if len(beta) != len(doms[c]):
                raise DataError(f"class priors for {c!r} need {len(doms[c])} entries")
            priors[c] = dict(zip(doms[c], map(float, beta)))
        elif h.smooth_priors:
            k = len(doms[c])
            priors[c] = {v: (counts[v] + alpha) / (n + alpha * k) for v in doms[c]}
        else:
            priors[c] = {v: counts[v] / n for v in doms[c]}

    conditionals: dict[str, dict[str, dict[str, dict[str, float]]]] = {}
    for parent, child in edges:
        joint = Counter(zip(cols[parent], cols[child]))
        marg = Counter(cols[parent])
        k = len(doms[child])
        table = conditionals.setdefault(child, {cv: {} for cv in doms[child]})
        for pv in doms[parent]:
            denom = marg[pv] + alpha * k
            if denom == 0:
                warnings.append(f"P({child} | {parent}={pv}) unseen with alpha=0; set uniform")
                col = {cv: 1.0 / k for cv in doms[child]}
            else:
                col = {cv: (joint[(pv, cv)] + alpha) / denom for cv in doms[child]}
                if alpha == 0 and any(q == 0.0 for q in col.values()):
                    warnings.append(f"P({child} | {parent}={pv}) has zero entries (alpha=0)")
            for cv, q in col.items():
                table[cv].setdefault(parent, {})[pv] = q
    for w in warnings:
        logger.warning(w)
    try:
        return Classifier(variables, edges, priors, conditionals, warnings)
    except ModelError as exc:
        raise DataError(str(exc)) from exc


def fit_nbc(
    d: Dataset,
    class_col: str,
    h: Hyperparams,
    domains: Mapping[str, Sequence[str]] | None = None,
) -> Classifier:
    """Naive Bayes: every other column is a child of ``class_col``."""
    d.index(class_col)
    edges = [(class_col, c) for c in d.columns if c != class_col]
    return fit_structure(d, edges, [class_col], h, domains)


# -- chain classifiers ------------------------------------------------------


def mutual_information(xs: Sequence[Any], ys: Sequence[Any]) -> float:
    """Plug-in mutual information in nats."""
    n = len(xs)
    if n == 0:
        return 0.0
    pxy = Counter(zip(xs, ys))
    px, py = Counter(xs), Counter(ys)
    mi = 0.0
    for (a, b), c in pxy.items():
        mi += c / n * math.log(c * n / (px[a] * py[b]))
    return max(mi, 0.0)


def class_tree(d: Dataset, classes: Sequence[str], root: str | None = None) -> list[tuple[str, str]]:
    """Maximum spanning tree of pairwise mutual information, oriented from ``root``.

    The default root is the class with the largest summed mutual information.
    """
    classes = list(classes)
    if len(set(classes)) != len(classes):
        raise DataError("duplicate class names")
    if len(classes) == 1:
        return []
    cols = {c: d.column(c) for c in classes}
    g = nx.Graph()
    g.add_nodes_from(classes)
    for a, b in itertools.combinations(classes, 2):
        g.add_edge(a, b, weight=mutual_information(cols[a], cols[b]))
    tree = nx.maximum_spanning_tree(g, algorithm="kruskal")
    if root is None:
        score = {c: sum(w for _, _, w in g.edges(c, data="weight")) for c in classes}
        root = max(classes, key=lambda c: score[c])  # first class wins ties
    elif root not in classes:
        raise DataError(f"chain root {root!r} is not a class column")
    oriented, seen, frontier = [], {root}, [root]
    while frontier:
        node = frontier.pop(0)
        for nb in sorted(tree.neighbors(node), key=classes.index):
            if nb not in seen:
                seen.add(nb)
                oriented.append((node, nb))
                frontier.append(nb)
    return oriented


def fit_bcc(
    d: Dataset,
    class_cols: Sequence[str],
    h: Hyperparams,
    tree: Sequence[tuple[str, str]] | None = None,
    *,
    edges: Sequence[tuple[str, str]] | None = None,
    root: str | None = None,
    observation_parents: str = "leaves",
    domains: Mapping[str, Sequence[str]] | None = None,
) -> Classifier:
    """Bayesian chain classifier.

    ``edges`` gives the full dependency structure directly.  Otherwise the
    class tree (given, or learned from mutual information) is completed by
    making every observation a child of each leaf class
    (``observation_parents="leaves"``) or of every class (``"all"``).
    """
    class_cols = list(class_cols)
    if not class_cols:
        raise DataError("at least one class column is required")
    if len(set(class_cols)) != len(class_cols):
        raise DataError("duplicate class names")
    for c in class_cols:
        d.index(c)
    observations = [c for c in d.columns if c not in class_cols]
    if edges is None:
        if tree is None:
            tree = class_tree(d, class_cols, root)
        tree = [tuple(e) for e in tree]
        if observation_parents == "leaves":
            internal = {p for p, _ in tree}
            hosts = [c for c in class_cols if c not in internal]
        elif observation_parents == "all":
            hosts = class_cols
        else:
            raise DataError(f"unknown observation_parents {observation_parents!r}")
        edges = list(tree) + [(c, o) for c in hosts for o in observations]
    edges = [tuple(e) for e in edges]
    for p, c in edges:
        if c in class_cols:
            continue
        if p not in class_cols:
            raise DataError(f"edge {p}->{c}: observations must be leaves")
    return fit_structure(d, edges, class_cols, h, domains)


# -- splitting --------------------------------------------------------------


def split(d: Dataset, ratio: float = 0.75, seed: int = 0, stratify: str | None = None) -> tuple[Dataset, Dataset]:
    """Seeded train/test split, stratified on ``stratify`` when given."""
    n = len(d)
    if n < 4:
        raise DataError("need at least 4 rows to split")
    if not 0 < ratio < 1:
        raise DataError("split ratio must lie strictly between 0 and 1 (test set would be empty)")
    rng = np.random.default_rng(seed)
    n_train = int(round(ratio * n))
    if n_train in (0, n):
        raise DataError("split leaves an empty train or test set")
    strata: dict[Any, list[int]] = {}
    if stratify is not None:
        col = d.column(stratify)
        for i, v in enumerate(col):
            strata.setdefault(v, []).append(i)
        if min(len(s) for s in strata.values()) < 2:
            logger.warning("stratum with fewer than 2 rows; falling back to an unstratified split")
            strata = {}
    if not strata:
        perm = rng.permutation(n)
        train = sorted(perm[:n_train].tolist())
    else:
        keys = sorted(strata, key=lambda k: natural_key(str(k)))
        exact = {k: ratio * len(strata[k]) for k in keys}
        take = {k: int(math.floor(exact[k])) for k in keys}
        leftover = n_train - sum(take.values())
        by_frac = sorted(keys, key=lambda k: (-(exact[k] - take[k]), rng.random()))
        for k in by_frac[:leftover]:
            take[k] += 1
        train = []
        for k in keys:
            members = np.asarray(strata[k])
            train.extend(members[rng.permutation(len(members))[: take[k]]].tolist())
        train.sort()
    chosen = set(train)
    test = [i for i in range(n) if i not in chosen]
    return d.select(train), d.select(test)


# -- config -----------------------------------------------------------------


@dataclass
class TrainConfig:
    classes: list[str]
    alpha: float = 1.0
    priors: dict[str, list[float]] = field(default_factory=dict)
    smooth_priors: bool = False
    bins: dict[str, BinSpec] = field(default_factory=dict)
    root: str | None = None
    edges: list[tuple[str, str]] | None = None
    tree: list[tuple[str, str]] | None = None
    observation_parents: str = "leaves"
    domains: dict[str, list[str]] = field(default_factory=dict)
    seed: int = 0

    def hyperparams(self) -> Hyperparams:
        return Hyperparams(self.alpha, self.priors, self.smooth_priors, self.seed)


def load_config(path: str | Path) -> TrainConfig:
    """Read a JSON or TOML training config."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            doc = tomllib.loads(text)
        else:
            doc = json.loads(text)
    except Exception as exc:
        raise DataError(f"{path}: cannot parse config: {exc}") from exc
    return config_from_dict(doc)


def config_from_dict(doc: Mapping[str, Any]) -> TrainConfig:
    if "classes" not in doc:
        raise DataError("config needs a 'classes' list")
    classes = doc["classes"]
    if isinstance(classes, str):
        classes = [classes]
    bins = {}
    for col, spec in (doc.get("bins") or {}).items():
        cuts = spec.get("cuts")
        strategy = spec.get("strategy", CUSTOM if cuts else SAME_LENGTH)
        bins[col] = BinSpec(strategy, spec.get("count"), tuple(cuts) if cuts else None)
    priors = doc.get("priors") or {}
    if not isinstance(priors, Mapping):  # bare tuple applies to the single class
        priors = {classes[0]: list(priors)}
    chain = doc.get("chain") or {}
    edges = chain.get("edges", doc.get("edges"))
    tree = chain.get("tree")
    return TrainConfig(
        classes=list(classes),
        alpha=float(doc.get("alpha", 1.0)),
        priors={k: [float(x) for x in v] for k, v in priors.items()},
        smooth_priors=bool(doc.get("smooth_priors", False)),
        bins=bins,
        root=chain.get("root"),
        edges=[tuple(e) for e in edges] if edges else None,
        tree=[tuple(e) for e in tree] if tree else None,
        observation_parents=chain.get("observation_parents", "leaves"),
        domains={k: [str(x) for x in v] for k, v in (doc.get("domains") or {}).items()},
        seed=int(doc.get("seed", 0)),
    )


def train(d: Dataset, cfg: TrainConfig) -> tuple[Classifier, dict[str, tuple[float, ...]]]:
    """Discretize per ``cfg`` and fit; returns the classifier and the cut points."""
    cuts = fit_discretization(d, cfg.bins)
    data = apply_discretization(d, cuts)
    domains = dict(cfg.domains)
    for col, cs in cuts.items():
        domains.setdefault(col, list(bucket_labels(cs)))
    h = cfg.hyperparams()
    if len(cfg.classes) == 1 and cfg.edges is None and cfg.tree is None:
        clf = fit_nbc(data, cfg.classes[0], h, domains)
    else:
        clf = fit_bcc(
            data,
            cfg.classes,
            h,
            cfg.tree,
            edges=cfg.edges,
            root=cfg.root,
            observation_parents=cfg.observation_parents,
            domains=domains,
        )
    return clf, cuts
