"""Command-line interface: ``bcidx {train,predict,explain,evaluate,export}``.

Exit codes: 0 success, 1 usage, 2 data or schema problem, 3 computational
budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import attribution, evaluation
from .errors import BCIDXError, BudgetExceeded, DataError
from .idx import IDX, generate, to_dot, validate
from .influence import influences, io_influences
from .kits import CLAMPED, DEFAULT_CF_BUDGET, REACHABLE, PosteriorOracle, make_kit
from .learning import Dataset, apply_discretization, bucketize, load_config, read_csv, train
from .model import Classifier, check_assignment, posteriors_all, predict_all

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BUDGET = 0, 1, 2, 3
MODEL_FORMAT = "bcidx-model/1"

log = logging.getLogger("bcidx")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 by default
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- model files ----------------------------------------------------------------


def save_model(path: str | Path, clf: Classifier, cuts: dict[str, tuple[float, ...]]) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "classifier": clf.to_dict(),
        "discretization": {k: list(v) for k, v in sorted(cuts.items())},
    }
    Path(path).write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> tuple[Classifier, dict[str, tuple[float, ...]]]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: cannot read model: {exc}") from None
    if doc.get("format") != MODEL_FORMAT:
        raise DataError(f"{path}: not a {MODEL_FORMAT} document")
    cuts = {k: tuple(v) for k, v in doc.get("discretization", {}).items()}
    return Classifier.from_dict(doc["classifier"]), cuts


# -- inputs -------------------------------------------------------------------------


def parse_literal(text: str) -> dict[str, str]:
    """``k=v,k=v`` to a dict."""
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise UsageError(f"instance literal needs k=v pairs, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    if not out:
        raise UsageError("empty instance literal")
    return out


def instances_from(clf: Classifier, cuts, d: Dataset) -> list[dict[str, str]]:
    """Observation assignments of every row, discretized with the stored cuts."""
    missing = [o for o in clf.observations if o not in d.columns]
    if missing:
        raise DataError(f"data lacks observation columns {missing}")
    d = apply_discretization(d, {k: v for k, v in cuts.items() if k in d.columns})
    out = []
    for rec in d.records():
        a = {o: str(rec[o]) for o in clf.observations}
        check_assignment(clf, a)
        out.append(a)
    return out


def _instance(args, clf: Classifier, cuts) -> tuple[dict[str, str], str]:
    if args.instance:
        a = parse_literal(args.instance)
        numeric = {k: v for k, v in a.items() if k in cuts}
        for k, v in numeric.items():
            try:
                a[k] = bucketize(float(v), cuts[k])
            except ValueError:
                pass  # already a bucket label
        a = {k: v for k, v in a.items() if k in clf.observations or k in clf.classifications}
        check_assignment(clf, a)
        return a, attribution.instance_key({k: v for k, v in a.items() if k in clf.observations})
    if args.data is None or args.row is None:
        raise UsageError("give --instance k=v,... or --data CSV with --row N")
    rows = instances_from(clf, cuts, read_csv(args.data))
    if not 0 <= args.row < len(rows):
        raise UsageError(f"--row {args.row} out of range (0..{len(rows) - 1})")
    return rows[args.row], str(args.row)


def _outputs(args, clf: Classifier, default: Sequence[str]) -> tuple[str, ...]:
    if getattr(args, "outputs", None):
        return tuple(x.strip() for x in args.outputs.split(",") if x.strip())
    return tuple(default)


def _default_explanandum(clf: Classifier) -> str:
    roots = [c for c in clf.classifications if not clf.parents(c)]
    if len(clf.classifications) == 1:
        return clf.classifications[0]
    if len(roots) == 1:
        return roots[0]
    raise UsageError(f"several classifications {list(clf.classifications)}; choose one with --explanandum")


def build_kit(spec: str, clf: Classifier, args, outputs: Sequence[str], oracle: PosteriorOracle | None = None,
              resolve=None):
    name = spec.lower()
    if name in ("md", "sd", "cf"):
        return make_kit(name, clf, oracle=oracle or PosteriorOracle(clf, args.cf_budget), cf_semantics=args.cf_semantics)
    if name in ("lime", "surrogate"):
        source = attribution.make_source("surrogate", clf, outputs, samples=args.attr_samples, seed=args.seed)
        return make_kit("lime", source=source)
    if name in ("shap", "shapley"):
        return make_kit("shap", source=attribution.make_source("shapley", clf, outputs))
    if name.startswith("file:"):
        return make_kit("attr", source=attribution.make_source(spec, clf, outputs, resolve=resolve))
    if name == "attr":
        src = attribution.make_source(args.attr, clf, outputs, samples=args.attr_samples, seed=args.seed, resolve=resolve)
        return make_kit("attr", source=src)
    raise UsageError(f"unknown kit {spec!r}")


# -- commands ----------------------------------------------------------------------


def cmd_train(args) -> int:
    if not args.config:
        raise UsageError("train needs --config")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    d = read_csv(args.data)
    clf, cuts = train(d, cfg)
    out = args.out or args.model
    if not out:
        raise UsageError("train needs --out (or --model) for the model file")
    save_model(out, clf, cuts)
    for w in clf.warnings:
        log.warning(w)
    return EXIT_OK


def cmd_predict(args) -> int:
    clf, cuts = load_model(_need(args.model, "--model"))
    rows = instances_from(clf, cuts, read_csv(_need(args.data, "--data")))
    cols = ["row", *clf.observations]
    for c in clf.classifications:
        cols.append(c)
        cols.extend(f"P({c}={v})" for v in clf.domain(c))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for i, a in enumerate(rows):
        full = predict_all(clf, a)
        post = posteriors_all(clf, a)
        rec = [i, *(a[o] for o in clf.observations)]
        for c in clf.classifications:
            rec.append(full[c])
            rec.extend(f"{post[c][v]:.6f}" for v in clf.domain(c))
        w.writerow(rec)
    _emit(args.out, buf.getvalue())
    return EXIT_OK


def cmd_explain(args) -> int:
    clf, cuts = load_model(_need(args.model, "--model"))
    a, inst_id = _instance(args, clf, cuts)
    a = {k: v for k, v in a.items() if k in clf.observations}
    e = args.explanandum or _default_explanandum(clf)
    if e not in clf.classifications:
        raise DataError(f"explanandum {e!r} is not a classification")
    outputs = _outputs(args, clf, [e])
    kit = build_kit(args.kit, clf, args, outputs, resolve=lambda _a: inst_id)
    g = io_influences(clf, outputs) if kit.graph_kind == "io" else influences(clf)
    idx = generate(clf, g, kit, e, a)
    problems = validate(idx, clf, g, kit, a)
    if problems:  # generator and validator disagree: a bug, not a user error
        raise RuntimeError("; ".join(problems))
    _emit(args.out, idx.to_json())
    if args.dot:
        Path(args.dot).write_text(to_dot(idx), encoding="utf-8")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    report = args.report
    if report == "props":
        rep = evaluation.check_propositions(args.seed or 0, args.trials, cf_semantics=args.cf_semantics)
        rows = rep.rows()
    else:
        clf, cuts = load_model(_need(args.model, "--model"))
        instances = instances_from(clf, cuts, read_csv(_need(args.data, "--data")))
        if args.limit:
            instances = instances[: args.limit]
        outputs = _outputs(args, clf, [c for c in clf.classifications if not clf.parents(c)])
        kits = args.kit or ["md", "sd"]
        seed = args.seed or 0
        oracle = PosteriorOracle(clf, args.cf_budget)
        row_of: dict[frozenset, str] = {}
        for i, a in enumerate(instances):
            row_of.setdefault(frozenset(a.items()), str(i))
        resolve = lambda a: row_of.get(frozenset(a.items()), "")  # noqa: E731
        built = [build_kit(k, clf, args, outputs, oracle=oracle, resolve=resolve) for k in kits]
        rows = []
        if report == "prevalence":
            for k in built:
                rows += evaluation.prevalence(clf, k, instances, outputs, jobs=args.jobs).rows()
        elif report == "agreement":
            if len(built) < 2:
                raise UsageError("agreement needs at least two --kit flags")
            for i, ka in enumerate(built):
                for kb in built[i + 1 :]:
                    io_ = outputs if "io" in (ka.graph_kind, kb.graph_kind) or args.outputs else None
                    rows.append(evaluation.agreement(clf, ka, kb, io_, instances, jobs=args.jobs).row())
        elif report == "monotonicity":
            for k in built:
                rows.append(evaluation.monotonicity_violations(clf, k, instances, args.samples, seed, outputs).row())
        elif report == "complexity":
            e = args.explanandum or _default_explanandum(clf)
            for name in kits:
                for i, a in enumerate(instances):
                    p = evaluation.complexity_probe(
                        clf, name, e, a, cf_semantics=args.cf_semantics, cf_budget=args.cf_budget
                    )
                    rows.append({"row": i, **p.row()})
        else:  # argparse restricts choices
            raise UsageError(f"unknown report {report!r}")
    text = evaluation.rows_to_csv(rows)
    _emit(args.out, text)
    if args.pretty:
        sys.stderr.write(evaluation.format_table(rows))
    return EXIT_OK


def cmd_export(args) -> int:
    src = _need(args.idx, "--idx")
    try:
        idx = IDX.from_json(Path(src).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{src}: {exc}") from None
    _emit(args.out, to_dot(idx))
    return EXIT_OK


def _need(value, flag: str):
    if value is None:
        raise UsageError(f"missing {flag}")
    return value


def _emit(path: str | None, text: str) -> None:
    if path and path != "-":
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="training config (TOML or JSON)")
    common.add_argument("--seed", type=int, default=None, help="master random seed (default 0)")
    common.add_argument("--model", help="model JSON file")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")

    kitopts = _Parser(add_help=False)
    kitopts.add_argument("--attr", default="surrogate", help="source for --kit attr: surrogate, shapley or file:<path>")
    kitopts.add_argument("--attr-samples", type=int, default=5000, help="surrogate sample count (default 5000)")
    kitopts.add_argument("--outputs", help="comma-separated output classifications for attribution kits")
    kitopts.add_argument("--cf-budget", type=int, default=DEFAULT_CF_BUDGET, help="max combinations per counterfactual table")
    kitopts.add_argument("--cf-semantics", choices=(REACHABLE, CLAMPED), default=REACHABLE,
                         help="how counterfactual alternatives are enumerated (default reachable)")

    p = _Parser(prog="bcidx", description="Influence-driven explanations for Bayesian network classifiers.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", parents=[common], help="fit a classifier from CSV data")
    t.add_argument("--data", required=True, help="training CSV with a header row")

    pr = sub.add_parser("predict", parents=[common], help="decide every classification for each CSV row")
    pr.add_argument("--data", help="CSV of instances")

    ex = sub.add_parser("explain", parents=[common, kitopts], help="generate an IDX for one instance")
    ex.add_argument("--kit", default="md", help="md (default), sd, cf, lime, shap, attr or file:<scores>")
    ex.add_argument("--instance", help="inline instance, e.g. w=l,t=m,p=l")
    ex.add_argument("--data", help="CSV of instances (with --row)")
    ex.add_argument("--row", type=int, help="row index into --data")
    ex.add_argument("--explanandum", help="classification to explain (default: the unique root)")
    ex.add_argument("--dot", help="also write Graphviz DOT here")

    ev = sub.add_parser("evaluate", parents=[common, kitopts], help="prevalence, agreement and other reports")
    ev.add_argument("--kit", action="append", help="kit to evaluate; repeat for several (default md and sd)")
    ev.add_argument("--data", help="CSV of test instances")
    ev.add_argument("--report", required=True, choices=("prevalence", "agreement", "monotonicity", "complexity", "props"))
    ev.add_argument("--samples", type=int, default=25_000, help="edges sampled for the monotonicity report")
    ev.add_argument("--trials", type=int, default=100, help="random classifiers for the props report")
    ev.add_argument("--limit", type=int, help="use only the first N instances")
    ev.add_argument("--explanandum", help="explanandum for the complexity report")
    ev.add_argument("--jobs", type=int, default=1, help="worker threads; output order is unaffected")
    ev.add_argument("--pretty", action="store_true", help="also print a text table to stderr")

    xp = sub.add_parser("export", parents=[common], help="render a stored IDX JSON as DOT")
    xp.add_argument("--idx", required=True, help="IDX JSON file")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s: %(message)s")
    if args.seed is None:
        args.seed = 0
    handlers = {
        "train": cmd_train,
        "predict": cmd_predict,
        "explain": cmd_explain,
        "evaluate": cmd_evaluate,
        "export": cmd_export,
    }
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"bcidx: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as exc:
        print(f"bcidx: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (BCIDXError, OSError) as exc:
        print(f"bcidx: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
