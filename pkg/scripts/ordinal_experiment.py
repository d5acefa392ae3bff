"""Compare hierarchical and non-hierarchical schemes on synthetic ordinal data.

Prints one table row per (noise level, scheme): accuracy, uncertainty
coefficient, correlation, binary evaluations per point and timings.

    python scripts/ordinal_experiment.py --sigma 0 0.1 0.3
"""

import argparse
import time
from pathlib import Path

from multiborders import composer, control_lang
from multiborders.data import synth_continuum
from multiborders.engine import Classifier
from multiborders.metrics import compute_metrics

CONTROLS = Path(__file__).resolve().parent.parent / "controls"


def run(scheme, train, test, options=None, jobs=1):
    text = (CONTROLS / f"{scheme}.ctl").read_text()
    if options:
        text = text.replace("-n 5000 -e 5 -r 0", options)
    tree = control_lang.loads(text)
    t0 = time.perf_counter()
    model = composer.train_tree(tree, train, jobs=jobs)
    t1 = time.perf_counter()
    results, counters = Classifier(model).classify_batch(test.features)
    t2 = time.perf_counter()
    report = compute_metrics(test.labels, [r.predicted_class for r in results], test.n_classes)
    return report, counters.binary_evaluations / len(test), t1 - t0, t2 - t1


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sigma", type=float, nargs="+", default=[0.0, 0.3])
    parser.add_argument("--n-train", type=int, default=8000)
    parser.add_argument("--n-test", type=int, default=2000)
    parser.add_argument("--d", type=int, default=2)
    parser.add_argument("--options", help="replace every option string in the control files")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    print(f"{'sigma':>6} {'scheme':>9} {'acc':>6} {'U.C.':>6} {'corr':>6} {'evals':>6} {'train s':>8} {'class s':>8}")
    for sigma in args.sigma:
        train = synth_continuum(args.n_train, d=args.d, sigma=sigma, seed=1)
        test = synth_continuum(args.n_test, d=args.d, sigma=sigma, seed=2)
        for scheme in ("adjacent", "halving"):
            m, evals, t_train, t_class = run(scheme, train, test, args.options, args.jobs)
            print(f"{sigma:6.2f} {scheme:>9} {m.accuracy:6.3f} {m.uncertainty_coefficient:6.3f} "
                  f"{m.pearson_correlation:6.3f} {evals:6.0f} {t_train:8.2f} {t_class:8.2f}")


if __name__ == "__main__":
    main()
