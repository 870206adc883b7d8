"""Acceptance suite: one test per shipping criterion, each printing a
PASS/FAIL line with the measured values (run with -s to see them stream)."""

import time

import numpy as np
import pytest

import salkit as sk
from salkit.cli import main as cli_main


def report(num, name, ok, detail):
    print(f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"


def erase(eraser, train, test):
    erased_train = sk.apply_eraser(eraser, train.inputs + train.input_mean)
    erased_test = sk.apply_eraser(eraser, test.inputs)
    return erased_train, erased_test


def held_out_accuracy(train_x, train_labels, test_x, test_labels, config=None):
    probe = sk.train_linear_probe(train_x, train_labels, config or sk.TrainConfig())
    return float(np.mean(probe.predict(test_x) == test_labels))


def test_criterion_01_residual_covariance_identity():
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    ds = sk.center(
        sk.LabeledDataset(
            inputs=rng.standard_normal((500, 20)),
            task_labels=np.zeros(500).astype(str),
            guarded=rng.standard_normal((500, 3)),
            guarded_labels=np.zeros(500).astype(str),
        )
    )
    base = sk.fit_sal(ds, k_override=0)
    worst = 0.0
    for k in range(4):
        expected = base.sigma[k] if k < base.sigma.size else 0.0
        got = sk.residual_covariance(base.with_k(k), ds)
        worst = max(worst, abs(got - expected))
    elapsed = time.perf_counter() - start
    report(
        1, "residual covariance equals the next singular value",
        worst < 1e-8 and elapsed < 1.0,
        f"worst |residual - sigma_k+1| = {worst:.2e} (tol 1e-8), {elapsed:.2f}s (< 1s)",
    )


def test_criterion_02_planted_bias_removal():
    start = time.perf_counter()
    ds = sk.generate_synthetic(
        sk.SyntheticSpec(n=2000, d=50, bias_rank=1, bias_strength=3.0,
                         task_strength=3.0, seed=7)
    )
    train_idx, test_idx = sk.split_indices(ds.n_samples, 0.3, 7)
    train = sk.center(ds.subset(train_idx))
    test = ds.subset(test_idx)

    raw_test = test.inputs - train.input_mean
    attr_before = held_out_accuracy(train.inputs, train.guarded_labels, raw_test, test.guarded_labels)
    task_before = held_out_accuracy(train.inputs, train.task_labels, raw_test, test.task_labels)

    eraser = sk.fit_sal(train, k_override=1)
    erased_train, erased_test = erase(eraser, train, test)
    attr_after = held_out_accuracy(erased_train, train.guarded_labels, erased_test, test.guarded_labels)
    task_after = held_out_accuracy(erased_train, train.task_labels, erased_test, test.task_labels)

    elapsed = time.perf_counter() - start
    ok = (
        attr_before >= 0.95
        and attr_after <= 0.55
        and task_before - task_after <= 0.02
        and elapsed < 30.0
    )
    report(
        2, "planted rank-1 bias is removed, task retained",
        ok,
        f"attr {attr_before:.3f} -> {attr_after:.3f} (need >=0.95 -> <=0.55), "
        f"task {task_before:.3f} -> {task_after:.3f} (drop <= 0.02), {elapsed:.1f}s (< 30s)",
    )


def test_criterion_03_nonlinear_removal():
    start = time.perf_counter()
    ds = sk.generate_synthetic(sk.SyntheticSpec(n=1000, d=10, nonlinear=True, seed=3))
    train_idx, test_idx = sk.split_indices(ds.n_samples, 0.3, 3)
    train = sk.center(ds.subset(train_idx))
    test = ds.subset(test_idx)
    poly2 = sk.KernelSpec("poly2")
    config = sk.TrainConfig(epochs=3000)

    sal = sk.fit_sal(train, alpha=2.0)
    erased_train, erased_test = erase(sal.with_k(sal.rank), train, test)
    probe = sk.train_kernel_probe(erased_train, train.guarded_labels, poly2, config)
    acc_after_linear = float(np.mean(probe.predict(erased_test) == test.guarded_labels))

    full = sk.center(ds)
    ksal = sk.fit_ksal(full, poly2, k=2)
    feats = sk.reduced_train_features(ksal)
    probe = sk.train_kernel_probe(
        feats[train_idx], ds.guarded_labels[train_idx], sk.KernelSpec("linear"), config
    )
    acc_after_kernel = float(
        np.mean(probe.predict(feats[test_idx]) == ds.guarded_labels[test_idx])
    )

    elapsed = time.perf_counter() - start
    ok = acc_after_linear >= 0.9 and acc_after_kernel <= 0.6 and elapsed < 120.0
    report(
        3, "quadratic leakage survives linear removal, not kernel removal",
        ok,
        f"poly2 probe after linear removal (k={sal.rank}): {acc_after_linear:.3f} (>= 0.9), "
        f"after kernel removal (k=2): {acc_after_kernel:.3f} (<= 0.6), {elapsed:.1f}s (< 120s)",
    )


def test_criterion_04_kernel_linear_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    z = rng.integers(0, 2, 60) * 2.0 - 1.0
    ds = sk.center(
        sk.LabeledDataset(
            inputs=rng.standard_normal((60, 6)),
            task_labels=z.astype(str),
            guarded=z,
            guarded_labels=z.astype(int).astype(str),
        )
    )
    sal = sk.fit_sal(ds, k_override=1)
    projected = ds.inputs @ sal.projector()
    ksal = sk.fit_ksal(ds, sk.KernelSpec("linear"), k=1)
    k_phi = sk.gram_matrix(sk.KernelSpec("linear"), ds.inputs)
    tol = 1e-6 * float(np.linalg.norm(k_phi, 2))
    diff = float(np.abs(sk.reduced_kernel(ksal) - projected @ projected.T).max())
    elapsed = time.perf_counter() - start
    report(
        4, "reduced kernel equals the Gram of linearly projected inputs",
        diff < tol and elapsed < 1.0,
        f"max diff {diff:.2e} (tol {tol:.2e}), {elapsed:.2f}s (< 1s)",
    )


def test_criterion_05_reduced_kernel_closed_form():
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    ds = sk.center(
        sk.LabeledDataset(
            inputs=rng.standard_normal((50, 5)),
            task_labels=np.zeros(50).astype(str),
            guarded=rng.standard_normal((50, 3)),
            guarded_labels=np.zeros(50).astype(str),
        )
    )
    worst_rel = 0.0
    for family in ("linear", "poly2", "rbf"):
        spec = sk.KernelSpec(family, gamma=0.1)
        k_phi = sk.gram_matrix(spec, ds.inputs)
        norm = float(np.linalg.norm(k_phi, 2))
        for k in (0, 1, 3):
            eraser = sk.fit_ksal(ds, spec, k=k)
            w = eraser.w_block
            closed = k_phi - k_phi @ w @ w.T @ k_phi
            diff = float(np.abs(sk.reduced_kernel(eraser) - closed).max())
            worst_rel = max(worst_rel, diff / norm)
    elapsed = time.perf_counter() - start
    report(
        5, "reduced kernel matches its closed form for every family and k",
        worst_rel < 1e-8 and elapsed < 5.0,
        f"worst relative diff {worst_rel:.2e} (tol 1e-8), {elapsed:.1f}s (< 5s)",
    )


def test_criterion_06_eigenvector_transfer_lemma():
    start = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        worst = max(
            worst,
            sk.verify_lemma_a(rng.standard_normal((5, 8)), rng.standard_normal((2, 8))),
        )
    elapsed = time.perf_counter() - start
    report(
        6, "eigenvector transfer identity holds numerically",
        worst <= 1e-8 and elapsed < 1.0,
        f"worst residual {worst:.2e} over 20 instances (tol 1e-8), {elapsed:.2f}s (< 1s)",
    )


def test_criterion_07_interpolated_projection():
    ds = sk.generate_synthetic(
        sk.SyntheticSpec(n=2000, d=50, bias_rank=1, bias_strength=3.0,
                         task_strength=3.0, seed=7)
    )
    train_idx, test_idx = sk.split_indices(ds.n_samples, 0.3, 7)
    train = sk.center(ds.subset(train_idx))
    test = ds.subset(test_idx)
    eraser = sk.fit_sal(train, k_override=1)
    probe = sk.train_linear_probe(train.inputs, train.guarded_labels)

    def accuracy_at(lam):
        blend = sk.interpolate_projection(eraser, lam)
        moved = (test.inputs - eraser.input_mean) @ blend + eraser.input_mean
        return float(np.mean(probe.predict(moved - train.input_mean) == test.guarded_labels))

    blend0 = sk.interpolate_projection(eraser, 0.0)
    identity_out = (test.inputs - eraser.input_mean) @ blend0 + eraser.input_mean
    identity_diff = float(np.abs(identity_out - test.inputs).max())

    acc0, acc1 = accuracy_at(0.0), accuracy_at(1.0)
    ok = (acc0 - acc1 >= 0.3) and identity_diff <= 1e-9
    report(
        7, "interpolation trades removal strength against fidelity",
        ok,
        f"attr accuracy {acc0:.3f} at lambda=0 vs {acc1:.3f} at lambda=1 "
        f"(gap >= 0.3), lambda=0 max deviation {identity_diff:.2e} (<= 1e-9)",
    )


def test_criterion_08_runtime_benchmark(tmp_path):
    out = tmp_path / "bench.tsv"
    code = cli_main([
        "bench", "--n", "74882", "--d", "768", "--dprime", "1",
        "--out", str(out), "--repeats", "3", "--inlp-iterations", "1",
    ])
    assert code == 0
    medians = {}
    for line in out.read_text(encoding="utf-8").splitlines():
        parts = line.split("\t")
        if parts[0] in ("sal", "inlp"):
            medians[parts[0]] = float(parts[1])
    ok = medians["sal"] < 5.0 and medians["sal"] < medians["inlp"]
    report(
        8, "spectral fit is fast at production scale",
        ok,
        f"sal median {medians['sal']:.2f}s (< 5s), inlp median {medians['inlp']:.2f}s, "
        f"ratio {medians['inlp'] / medians['sal']:.0f}x (reported, not asserted)",
    )


def test_criterion_09_metric_fixtures():
    labels = np.array([1, 1, 1, 1, 0, 0, 1, 1, 1, 1, 0, 0])
    groups = np.array(["A"] * 6 + ["B"] * 6)
    predictions = np.array([1, 1, 1, 1, 0, 1, 1, 0, 0, 0, 0, 0])
    gap = sk.tpr_gap(predictions, labels, groups)

    rms_labels, rms_groups, rms_preds = [], [], []
    for cls, other, b_hits in (("a", "b", 7), ("b", "a", 6)):
        rms_labels += [cls] * 20
        rms_groups += ["A"] * 10 + ["B"] * 10
        rms_preds += [cls] * 10 + [cls] * b_hits + [other] * (10 - b_hits)
    rms = sk.tpr_rms(np.array(rms_preds), np.array(rms_labels), np.array(rms_groups))

    ok = abs(gap - 0.75) < 1e-4 and abs(rms - 0.3536) < 1e-4
    report(
        9, "fairness metrics match hand-counted fixtures",
        ok,
        f"tpr_gap {gap:.4f} (0.75 +- 1e-4), tpr_rms {rms:.4f} (0.3536 +- 1e-4)",
    )


def test_criterion_10_serialization_round_trip(tmp_path):
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(40, 100))
        d = int(rng.integers(3, 15))
        dprime = int(rng.integers(1, min(d, 5) + 1))
        ds = sk.center(
            sk.LabeledDataset(
                inputs=rng.standard_normal((n, d)),
                task_labels=np.zeros(n).astype(str),
                guarded=rng.standard_normal((n, dprime)),
                guarded_labels=np.zeros(n).astype(str),
            )
        )
        eraser = sk.fit_sal(ds, alpha=float(rng.uniform(1.0, 4.0)))
        path = tmp_path / f"e{seed}.sal"
        sk.save_eraser(path, eraser)
        loaded = sk.load_eraser(path)
        worst = max(worst, float(np.abs(loaded.projector() - eraser.projector()).max()))
    report(
        10, "saved erasers reproduce their projector",
        worst <= 1e-12,
        f"worst projector deviation {worst:.2e} over 10 erasers (tol 1e-12)",
    )
