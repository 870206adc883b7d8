"""Command-line front end: fit, transform, eval, bench, synth.

Exit codes are a stable contract: 0 on success, 2 on usage, contract or parse
failures, 3 on numerical failures. Every report embeds the resolved
configuration in comment lines, and output files are only overwritten with
--force.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import io as salio
from .dataset import center, split_indices
from .errors import ContractError, MetricUndefinedError, NumericError, SalkitError
from .kernels import KernelSpec, KsalEraser, fit_ksal, reduced_cross_kernel
from .linear import SalEraser, fit_sal, interpolate_projection
from .metrics import tpr_gap, tpr_rms
from .probes import InlpEraser, TrainConfig, apply_eraser, fit_inlp, train_kernel_probe, train_linear_probe
from .synth import SyntheticSpec, generate_synthetic

DEFAULT_KERNEL_CAP = 20000

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


class _SingleUse(argparse.Action):
    """Reject a flag that appears more than once (method flags are exclusive)."""

    def __call__(self, parser, namespace, values, option_string=None):
        if getattr(namespace, f"_{self.dest}_seen", False):
            parser.error(f"{option_string} given more than once; values are mutually exclusive")
        setattr(namespace, f"_{self.dest}_seen", True)
        setattr(namespace, self.dest, values)


def _check_out(path: str, force: bool) -> None:
    if os.path.exists(path) and not force:
        raise ContractError(f"output file {path!r} exists; pass --force to overwrite")


def _config_lines(args: argparse.Namespace) -> list[str]:
    pairs = []
    for key, value in sorted(vars(args).items()):
        if key.startswith("_") or key == "func":
            continue
        pairs.append(f"{key}={value}")
    return ["# salkit v1", "# " + " ".join(pairs)]


def _probe_config(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.probe_lr,
        epochs=args.probe_epochs,
        l2=args.probe_l2,
        seed=args.seed,
    )


def _add_probe_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--probe-lr", type=float, default=0.1, help="probe learning rate")
    sub.add_argument("--probe-epochs", type=int, default=200, help="probe training epochs")
    sub.add_argument("--probe-l2", type=float, default=1e-4, help="probe L2 strength")


def _require_kernel_budget(n: int, cap: int) -> None:
    if n > cap:
        raise ContractError(
            f"kernel computation on n={n} samples exceeds the cap of {cap}; "
            "kernel methods scale with n^2 memory and n^3 time, raise "
            "--max-kernel-n only if you have the resources"
        )


# ---------------------------------------------------------------------------
# fit


def _cmd_fit(args: argparse.Namespace) -> int:
    _check_out(args.out, args.force)
    dataset = center(salio.read_dataset(args.data))

    lines = _config_lines(args)
    if args.method == "sal":
        eraser = fit_sal(dataset, alpha=args.alpha, k_override=args.k)
        salio.save_eraser(args.out, eraser)
        for i, s in enumerate(eraser.sigma, start=1):
            lines.append(f"sigma_{i}\t{s:.12g}")
        lines.append(f"k\t{eraser.k}")
    elif args.method == "ksal":
        if args.k is None:
            raise ContractError("kernel mode needs an explicit --k")
        _require_kernel_budget(dataset.n_samples, args.max_kernel_n)
        spec = KernelSpec(family=args.kernel, gamma=args.gamma)
        eraser = fit_ksal(dataset, spec, args.k)
        salio.save_eraser(args.out, eraser)
        for i, val in enumerate(eraser.eigenvalues, start=1):
            lines.append(f"eigenvalue_{i}\t{val:.12g}")
        lines.append(f"k\t{eraser.k}")
        if eraser.k != eraser.requested_k:
            print(
                f"note: requested k={eraser.requested_k} shrank to {eraser.k} "
                "(spectrum ran out of nonzero eigenvalues)",
                file=sys.stderr,
            )
    else:
        eraser = fit_inlp(dataset, args.iterations, _probe_config(args))
        salio.save_eraser(args.out, eraser)
        for i, acc in enumerate(eraser.probe_accuracies, start=1):
            lines.append(f"probe_accuracy_{i}\t{acc:.12g}")
        lines.append(f"k\t{eraser.directions.shape[0]}")
    print("\n".join(lines))
    return EXIT_OK


# ---------------------------------------------------------------------------
# transform


def _sniff_format(path: str) -> str:
    with open(path, encoding="utf-8") as handle:
        first = handle.readline()
    return "dataset" if first.startswith("id\t") else "embeddings"


def _transform_matrix(eraser, rows: np.ndarray, lam: float) -> np.ndarray:
    if isinstance(eraser, KsalEraser):
        if lam != 1.0:
            raise ContractError("--lambda is only supported for sal and inlp erasers")
        return reduced_cross_kernel(eraser, rows)
    if isinstance(eraser, SalEraser):
        blend = interpolate_projection(eraser, lam)
    elif isinstance(eraser, InlpEraser):
        blend = lam * eraser.projector() + (1.0 - lam) * np.eye(eraser.dim)
    else:
        raise ContractError(f"unsupported eraser type {type(eraser).__name__}")
    if rows.shape[1] != eraser.dim:
        raise ContractError(
            f"data dimension {rows.shape[1]} does not match eraser dimension {eraser.dim}"
        )
    return (rows - eraser.input_mean) @ blend + eraser.input_mean


def _cmd_transform(args: argparse.Namespace) -> int:
    _check_out(args.out, args.force)
    if not 0.0 <= args.lam <= 1.0:
        raise ContractError(f"--lambda must lie in [0, 1], got {args.lam}")
    eraser = salio.load_eraser(args.eraser)
    fmt = args.format if args.format != "auto" else _sniff_format(args.data)
    if fmt == "dataset":
        dataset = salio.read_dataset(args.data)
        transformed = _transform_matrix(eraser, dataset.inputs, args.lam)
        out = salio.LabeledDataset(
            inputs=transformed,
            task_labels=dataset.task_labels,
            guarded=dataset.guarded,
            guarded_labels=dataset.guarded_labels,
            ids=dataset.ids,
        )
        salio.write_dataset(args.out, out)
    else:
        table = salio.read_embeddings(args.data)
        transformed = _transform_matrix(eraser, table.vectors, args.lam)
        salio.write_embeddings(
            args.out, salio.EmbeddingTable(vocabulary=table.vocabulary, vectors=transformed)
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def _fairness_cells(task_pred, task_labels, groups) -> tuple[str, str, str]:
    """(metric name, value or NA, note). Binary tasks use the TPR gap, else RMS.

    Undefined cases (a group without positives, more than two groups) become
    labeled NA cells with a note instead of failing the whole report.
    """
    n_classes = len(set(task_labels.tolist()))
    metric = "tpr_gap" if n_classes == 2 else "tpr_rms"
    try:
        if n_classes == 2:
            return metric, f"{tpr_gap(task_pred, task_labels, groups):.6g}", ""
        return metric, f"{tpr_rms(task_pred, task_labels, groups):.6g}", ""
    except (MetricUndefinedError, ContractError) as exc:
        return metric, "NA", str(exc)


def _cmd_eval(args: argparse.Namespace) -> int:
    _check_out(args.out, args.force)
    dataset = salio.read_dataset(args.data)
    n = dataset.n_samples
    train_idx, test_idx = split_indices(n, args.test_fraction, args.seed)
    train = center(dataset.subset(train_idx))
    test = dataset.subset(test_idx)
    config = _probe_config(args)

    # Resolve the erasers to evaluate, one row per k.
    rows: list[tuple[str, object]] = []
    if args.eraser is not None:
        rows.append(("file", salio.load_eraser(args.eraser)))
    elif args.method is not None or args.sweep_k is not None:
        fit_subset = train
        if args.debias_fraction is not None:
            rng = np.random.default_rng(args.seed)
            m = max(2, int(round(args.debias_fraction * train.n_samples)))
            pick = rng.permutation(train.n_samples)[:m]
            fit_subset = center(dataset.subset(train_idx[pick]))
        if args.method == "inlp":
            rows.append((str(args.iterations), fit_inlp(fit_subset, args.iterations, config)))
        else:
            base = fit_sal(fit_subset, alpha=args.alpha, k_override=None)
            if args.sweep_k is not None:
                for k in range(0, min(args.sweep_k, base.rank) + 1):
                    rows.append((str(k), base.with_k(k)))
            else:
                eraser = base if args.k is None else base.with_k(args.k)
                rows.append((str(eraser.k), eraser))
    else:
        rows.append(("none", None))

    kernel_spec = None
    if args.kernel_probe is not None:
        _require_kernel_budget(n, args.max_kernel_n)
        kernel_spec = KernelSpec(family=args.kernel_probe, gamma=args.gamma)

    out_lines = _config_lines(args)
    out_lines.append(
        "k\ttask_accuracy\tattr_accuracy_linear\tattr_accuracy_kernel"
        "\tfairness_metric\tfairness_value"
    )
    notes: list[str] = []
    for k_label, eraser in rows:
        if eraser is None:
            x_train, x_test = train.inputs, test.inputs - train.input_mean
        elif isinstance(eraser, KsalEraser):
            x_train = reduced_cross_kernel(eraser, train.inputs + train.input_mean)
            x_test = reduced_cross_kernel(eraser, test.inputs)
        else:
            x_train = apply_eraser(eraser, train.inputs + train.input_mean)
            x_test = apply_eraser(eraser, test.inputs)

        task_probe = train_linear_probe(x_train, train.task_labels, config)
        task_pred = task_probe.predict(x_test)
        task_acc = float(np.mean(task_pred == test.task_labels))

        attr_probe = train_linear_probe(x_train, train.guarded_labels, config)
        attr_acc = float(np.mean(attr_probe.predict(x_test) == test.guarded_labels))

        attr_kernel = "NA"
        if kernel_spec is not None:
            kp = train_kernel_probe(x_train, train.guarded_labels, kernel_spec, config)
            attr_kernel = f"{float(np.mean(kp.predict(x_test) == test.guarded_labels)):.6g}"

        metric, value, note = _fairness_cells(task_pred, test.task_labels, test.guarded_labels)
        if note:
            notes.append(f"k={k_label}: {note}")
        out_lines.append(
            f"{k_label}\t{task_acc:.6g}\t{attr_acc:.6g}\t{attr_kernel}\t{metric}\t{value}"
        )

    with open(args.out, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(out_lines) + "\n")
    for note in notes:
        print(f"warning: {note}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


def _cmd_bench(args: argparse.Namespace) -> int:
    _check_out(args.out, args.force)
    spec = SyntheticSpec(
        n=args.n, d=args.d, bias_rank=args.dprime, bias_strength=3.0,
        task_strength=3.0, seed=args.seed,
    )
    dataset = center(generate_synthetic(spec))
    config = TrainConfig(epochs=args.probe_epochs, seed=args.seed)

    sal_times = []
    for _ in range(args.repeats):
        start = time.perf_counter()
        fit_sal(dataset, alpha=2.0)
        sal_times.append(time.perf_counter() - start)
    inlp_times = []
    for _ in range(args.repeats):
        start = time.perf_counter()
        fit_inlp(dataset, args.inlp_iterations, config)
        inlp_times.append(time.perf_counter() - start)

    sal_median = float(np.median(sal_times))
    inlp_median = float(np.median(inlp_times))
    lines = _config_lines(args)
    lines.append("method\tmedian_seconds\truns")
    lines.append(f"sal\t{sal_median:.6g}\t" + " ".join(f"{t:.6g}" for t in sal_times))
    lines.append(f"inlp\t{inlp_median:.6g}\t" + " ".join(f"{t:.6g}" for t in inlp_times))
    ratio = inlp_median / sal_median if sal_median > 0 else float("inf")
    lines.append(f"inlp_over_sal\t{ratio:.6g}\t")
    text = "\n".join(lines) + "\n"
    with open(args.out, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    print(text, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth


def _cmd_synth(args: argparse.Namespace) -> int:
    _check_out(args.out, args.force)
    spec = SyntheticSpec(
        n=args.n,
        d=args.d,
        bias_rank=args.bias_rank,
        bias_strength=args.bias_strength,
        task_strength=args.task_strength,
        nonlinear=args.nonlinear,
        seed=args.seed,
    )
    salio.write_dataset(args.out, generate_synthetic(spec))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="salkit",
        description="Remove guarded-attribute information from vector representations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit an eraser and write it to a file")
    fit.add_argument("--method", choices=("sal", "ksal", "inlp"), required=True,
                     action=_SingleUse, help="removal method")
    fit.add_argument("--data", required=True, help="dataset TSV")
    fit.add_argument("--out", required=True, help="eraser output file")
    fit.add_argument("--alpha", type=float, default=2.0,
                     help="singular value ratio threshold for choosing k (sal)")
    fit.add_argument("--k", type=int, default=None, help="number of directions to remove")
    fit.add_argument("--kernel", choices=("linear", "poly2", "rbf"), default="rbf",
                     help="input kernel family (ksal)")
    fit.add_argument("--gamma", type=float, default=0.1, help="rbf width parameter")
    fit.add_argument("--iterations", type=int, default=10, help="inlp iterations")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--max-kernel-n", type=int, default=DEFAULT_KERNEL_CAP)
    fit.add_argument("--force", action="store_true", help="overwrite existing output")
    _add_probe_flags(fit)
    fit.set_defaults(func=_cmd_fit)

    tra = sub.add_parser("transform", help="apply a saved eraser to a data file")
    tra.add_argument("--eraser", required=True)
    tra.add_argument("--data", required=True)
    tra.add_argument("--out", required=True)
    tra.add_argument("--lambda", dest="lam", type=float, default=1.0,
                     help="blend strength: 0 leaves inputs unchanged, 1 removes fully")
    tra.add_argument("--format", choices=("auto", "dataset", "embeddings"), default="auto")
    tra.add_argument("--force", action="store_true")
    tra.set_defaults(func=_cmd_transform)

    ev = sub.add_parser("eval", help="probe accuracies and fairness metrics")
    ev.add_argument("--data", required=True, help="dataset TSV with y and z columns")
    ev.add_argument("--out", required=True, help="report TSV")
    ev.add_argument("--eraser", default=None, help="pre-fitted eraser file")
    ev.add_argument("--method", choices=("sal", "inlp"), default=None,
                    action=_SingleUse, help="fit this eraser on the train split")
    ev.add_argument("--alpha", type=float, default=2.0)
    ev.add_argument("--k", type=int, default=None)
    ev.add_argument("--iterations", type=int, default=10)
    ev.add_argument("--sweep-k", type=int, default=None,
                    help="evaluate every k from 0 to this bound")
    ev.add_argument("--kernel-probe", choices=("linear", "poly2", "rbf"), default=None,
                    help="also report a kernel attribute probe")
    ev.add_argument("--gamma", type=float, default=0.1)
    ev.add_argument("--debias-fraction", type=float, default=None,
                    help="fit the eraser on this fraction of the train split")
    ev.add_argument("--test-fraction", type=float, default=0.3)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--max-kernel-n", type=int, default=DEFAULT_KERNEL_CAP)
    ev.add_argument("--force", action="store_true")
    _add_probe_flags(ev)
    ev.set_defaults(func=_cmd_eval)

    ben = sub.add_parser("bench", help="time sal against inlp on synthetic data")
    ben.add_argument("--n", type=int, required=True)
    ben.add_argument("--d", type=int, required=True)
    ben.add_argument("--dprime", type=int, default=1)
    ben.add_argument("--out", required=True)
    ben.add_argument("--repeats", type=int, default=3)
    ben.add_argument("--inlp-iterations", type=int, default=2)
    ben.add_argument("--probe-epochs", type=int, default=200)
    ben.add_argument("--seed", type=int, default=0)
    ben.add_argument("--force", action="store_true")
    ben.set_defaults(func=_cmd_bench)

    syn = sub.add_parser("synth", help="generate a synthetic dataset TSV")
    syn.add_argument("--out", required=True)
    syn.add_argument("--n", type=int, default=1000)
    syn.add_argument("--d", type=int, default=10)
    syn.add_argument("--bias-rank", type=int, default=1)
    syn.add_argument("--bias-strength", type=float, default=3.0)
    syn.add_argument("--task-strength", type=float, default=3.0)
    syn.add_argument("--nonlinear", action="store_true")
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--force", action="store_true")
    syn.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SalkitError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
