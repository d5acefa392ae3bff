"""multiborders command-line interface.

Exit codes: 0 success, 1 bad input (parse, validation, file errors), 2 runtime
failure (training or dimension mismatch).
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import binary_models, coding, composer, control_lang, data, engine, metrics
from .control_lang import Dialect


class CliError(Exception):
    def __init__(self, message, code=1):
        super().__init__(message)
        self.code = code


def _err(*args):
    print(*args, file=sys.stderr)


def _load_control(path, dialect):
    try:
        return control_lang.load(path, dialect)
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror}") from exc
    except control_lang.ControlLanguageError as exc:
        raise CliError(f"{path}: {exc}") from exc


def _read_data(path, n_classes=None):
    try:
        return data.read_data(path, n_classes)
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror}") from exc
    except (data.DataFileError, ValueError) as exc:
        raise CliError(f"{path}: {exc}") from exc


def _format_classes(classes):
    return "{" + ",".join(map(str, sorted(classes))) + "}"


def cmd_train(args):
    tree = _load_control(args.control, Dialect.TRAINING)
    dataset = _read_data(args.data)
    report = control_lang.validate(tree, dataset.n_classes)
    if not report.ok:
        raise CliError("\n".join([f"{args.control}: validation failed"] + [f"  {v}" for v in report.violations]))
    try:
        model = composer.train_tree(tree, dataset, seed=args.seed, jobs=args.jobs)
    except composer.NodeTrainingError as exc:
        raise CliError(f"training failed at {exc}", code=2) from exc
    directory, base = os.path.split(args.output)
    try:
        composer.export(model, directory or ".", base)
    except OSError as exc:
        raise CliError(str(exc)) from exc
    print(f"trained {len(model.models)} binary models")
    for key, (n1, n2) in model.sample_counts.items():
        print(f"  {composer.model_filename(base, key)}: {n1} side-1 / {n2} side-2 samples")
    if not model.models:
        print("  (constant classifier, no binary models)")
    print(f"wrote {os.path.join(directory, base + composer.CONTROL_SUFFIX)}")
    return 0


def _read_points(path, d):
    try:
        rows, _ = data.read_table(path)
        table = np.array([[float(v) for v in r] for r in rows])
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror}") from exc
    except (data.DataFileError, ValueError) as exc:
        raise CliError(f"{path}: {exc}") from exc
    # a trailing label column, as in training files, is ignored
    if d is None:
        return table[:, :-1] if table.shape[1] > 1 else table
    if table.shape[1] == d + 1:
        return table[:, :-1]
    if table.shape[1] == d:
        return table
    raise CliError(f"{path}: {table.shape[1]} columns but the model expects {d} features", code=2)


def cmd_classify(args):
    try:
        model = composer.load_trained(args.control)
    except control_lang.ControlLanguageError as exc:
        raise CliError(f"{args.control}: {exc}") from exc
    except (OSError, binary_models.ModelFormatError) as exc:
        raise CliError(str(exc)) from exc
    clf = engine.Classifier(model, coding.Method.LSQ_RIDGE if args.ridge > 0 else coding.Method.LSQ,
                            args.ridge)
    if args.probs and not clf.single_level:
        raise CliError("--probs needs a single-level partition model; "
                       "hierarchical models only report the winning class probability")
    points = _read_points(args.test, model.d)
    start = time.perf_counter()
    results, counters = clf.classify_batch(points, jobs=args.jobs)
    elapsed = time.perf_counter() - start
    with open(args.output, "w", encoding="utf-8") as f:
        for res in results:
            if args.probs:
                values = res.distribution
            else:
                values = [res.probability]
            f.write(f"{res.predicted_class} " + " ".join(f"{v:.17g}" for v in values) + "\n")
    _err(f"classified {len(results)} points: {counters.binary_evaluations} binary evaluations, "
         f"{elapsed:.3f} s")
    return 0


def cmd_validate(args):
    tree = _load_control(args.control, Dialect(args.dialect))
    report = control_lang.validate(tree, args.classes, allow_duplicates=args.allow_duplicates)
    for w in report.warnings:
        _err(f"warning: {w}")
    for v in report.violations:
        print(v)
    if report.ok:
        print(f"{args.control}: ok")
        return 0
    return 1


def cmd_plan(args):
    tree = _load_control(args.control, Dialect.TRAINING)
    dataset = _read_data(args.data) if args.data else None
    n_classes = dataset.n_classes if dataset else 1 + max(control_lang.leaf_classes(tree))
    report = control_lang.validate(tree, n_classes)
    if not report.ok:
        raise CliError("\n".join([f"{args.control}: validation failed"]
                                 + [f"  {v}" for v in report.violations]))
    steps = composer.plan(tree, dataset)
    if not steps:
        print("# constant classifier: no binary models to train")
    for s in steps:
        counts = "" if s.n1 is None else f" {s.n1} {s.n2}"
        print(f'{s.key} "{s.options}" {_format_classes(s.side1)} {_format_classes(s.side2)}{counts}')
    return 0


def cmd_synth(args):
    try:
        dataset = data.synth_continuum(args.n, args.d, args.classes, args.lo, args.hi,
                                       args.sigma, args.seed)
    except (data.ThresholdSpecInvalid, data.ClassStarvation, ValueError) as exc:
        raise CliError(str(exc)) from exc
    data.write_data(dataset, args.output)
    _err(f"wrote {len(dataset)} samples, class counts {dataset.class_counts().tolist()}")
    return 0


def cmd_metrics(args):
    truth = _read_data(args.truth).labels
    try:
        rows, lines = data.read_table(args.predictions)
        predicted = np.array([data.parse_label(r[0], n) for r, n in zip(rows, lines)])
    except OSError as exc:
        raise CliError(f"{args.predictions}: {exc.strerror}") from exc
    except data.DataFileError as exc:
        raise CliError(f"{args.predictions}: {exc}") from exc
    n_classes = args.classes or int(max(truth.max(), predicted.max())) + 1
    try:
        report = metrics.compute_metrics(truth, predicted, n_classes)
    except (metrics.LengthMismatch, metrics.LabelOutOfRange) as exc:
        raise CliError(str(exc)) from exc
    print(report.format())
    if args.json:
        print(report.to_json())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multiborders",
                                     description="Multi-class classification from binary classifiers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train every binary model in a training control file")
    p.add_argument("control")
    p.add_argument("data")
    p.add_argument("output", help="output base, e.g. out/hum -> out/hum.mbc + out/hum.*.mbm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="classify test points with a classification control file")
    p.add_argument("control")
    p.add_argument("test")
    p.add_argument("output")
    p.add_argument("--probs", action="store_true",
                   help="write all class probabilities (single-level models only)")
    p.add_argument("--ridge", type=float, default=0.0,
                   help="ridge penalty for the probability solve (0 = plain least squares)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("validate", help="check a control file")
    p.add_argument("control")
    p.add_argument("--dialect", choices=[d.value for d in Dialect], default="training")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--allow-duplicates", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plan", help="list the binary models a training file needs, without training")
    p.add_argument("control")
    p.add_argument("data", nargs="?")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("synth", help="write a synthetic ordinal dataset")
    p.add_argument("output")
    p.add_argument("--n", type=int, default=8000)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--classes", type=int, default=8)
    p.add_argument("--lo", type=float, default=7e-5)
    p.add_argument("--hi", type=float, default=1e-3)
    p.add_argument("--sigma", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("metrics", help="score predictions against a labelled data file")
    p.add_argument("truth")
    p.add_argument("predictions")
    p.add_argument("--classes", type=int)
    p.add_argument("--json", action="store_true", help="also print a one-line JSON record")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        _err(f"multiborders {args.command}: {exc}")
        return exc.code
    except engine.DimensionMismatch as exc:
        _err(f"multiborders {args.command}: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
