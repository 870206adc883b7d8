import numpy as np
import pytest

import salkit as sk
from salkit.errors import ContractError, NumericError


def blobs(n=200, d=5, margin=1.5, seed=0):
    rng = np.random.default_rng(seed)
    y = np.array([0] * (n // 2) + [1] * (n - n // 2))
    x = 0.3 * rng.standard_normal((n, d))
    x[:, 0] += np.where(y == 1, margin, -margin)
    return x, y


def planted(n=2000, d=10, strength=4.0, seed=7):
    ds = sk.generate_synthetic(
        sk.SyntheticSpec(n=n, d=d, bias_rank=1, bias_strength=strength, task_strength=3.0, seed=seed)
    )
    train_idx, test_idx = sk.split_indices(n, 0.3, 0)
    return sk.center(ds.subset(train_idx)), ds.subset(test_idx)


# ---------------------------------------------------------------------------
# linear probe


def test_separable_blobs_high_accuracy():
    x, y = blobs(margin=1.0)
    probe = sk.train_linear_probe(x, y)
    assert probe.train_accuracy >= 0.99
    assert probe.weights.ndim == 1  # binary keeps a single vector


def test_constant_features_majority_rate():
    x = np.ones((40, 3))
    y = np.array([0] * 25 + [1] * 15)
    probe = sk.train_linear_probe(x, y)
    assert abs(probe.train_accuracy - 0.625) <= 0.05


def test_planted_bias_before_and_after_removal():
    train, test = planted()
    before = sk.train_linear_probe(train.inputs, train.guarded_labels)
    acc_before = np.mean(before.predict(test.inputs - train.input_mean) == test.guarded_labels)
    assert acc_before >= 0.95

    eraser = sk.fit_sal(train, k_override=1)
    erased_train = sk.apply_eraser(eraser, train.inputs + train.input_mean)
    erased_test = sk.apply_eraser(eraser, test.inputs)
    after = sk.train_linear_probe(erased_train, train.guarded_labels)
    acc_after = np.mean(after.predict(erased_test) == test.guarded_labels)
    assert acc_after <= 0.55
    assert acc_before - acc_after >= 0.3  # leakage ordering


def test_single_class_rejected():
    x, _ = blobs(n=20)
    with pytest.raises(ContractError):
        sk.train_linear_probe(x, np.zeros(20))


def test_too_few_samples_rejected():
    with pytest.raises(ContractError):
        sk.train_linear_probe(np.ones((5, 2)), np.array([0, 1, 0, 1, 0]))


def test_divergence_raises_numeric_error():
    rng = np.random.default_rng(2)
    x = 1e4 * rng.standard_normal((60, 4))
    y = rng.integers(0, 2, 60)  # unlearnable labels keep the gradient alive
    with pytest.raises(NumericError):
        sk.train_linear_probe(x, y, sk.TrainConfig(learning_rate=1e8, epochs=400))


def test_probe_determinism_bit_identical():
    x, y = blobs(seed=3)
    a = sk.train_linear_probe(x, y, sk.TrainConfig(seed=12))
    b = sk.train_linear_probe(x, y, sk.TrainConfig(seed=12))
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.bias, b.bias)
    c = sk.train_linear_probe(x, y, sk.TrainConfig(seed=13))
    assert not np.array_equal(a.weights, c.weights)


def test_loss_history_non_increasing():
    x, y = blobs(seed=4)
    probe = sk.train_linear_probe(x, y)
    assert np.all(np.diff(probe.loss_history) <= 1e-6)


def test_multiclass_probe_shapes_and_accuracy():
    rng = np.random.default_rng(5)
    centers = np.array([[3, 0], [-3, 0], [0, 3]])
    y = np.repeat([0, 1, 2], 60)
    x = centers[y] + 0.4 * rng.standard_normal((180, 2))
    probe = sk.train_linear_probe(x, y)
    assert probe.weights.shape == (2, 3)
    assert probe.train_accuracy >= 0.98
    assert np.all(np.diff(probe.loss_history) <= 1e-6)


# ---------------------------------------------------------------------------
# kernel probe


def test_xor_four_clusters_poly2():
    rng = np.random.default_rng(1)
    signs = rng.integers(0, 2, (400, 2)) * 2 - 1
    x = signs + 0.1 * rng.standard_normal((400, 2))
    z = (signs[:, 0] * signs[:, 1]).astype(str)
    kernel_probe = sk.train_kernel_probe(x, z, sk.KernelSpec("poly2"))
    assert kernel_probe.train_accuracy >= 0.95
    linear_probe = sk.train_linear_probe(x, z)
    assert linear_probe.train_accuracy <= 0.65  # linearly unlearnable


def test_linear_kernel_probe_matches_linear_probe():
    x, y = blobs(margin=1.0, seed=6)
    lin = sk.train_linear_probe(x, y)
    ker = sk.train_kernel_probe(x, y, sk.KernelSpec("linear"))
    assert abs(lin.train_accuracy - ker.train_accuracy) <= 0.03


def test_kernel_probe_constant_labels_rejected():
    x, _ = blobs(n=30)
    with pytest.raises(ContractError):
        sk.train_kernel_probe(x, np.ones(30), sk.KernelSpec("poly2"))


def test_kernel_probe_determinism():
    x, y = blobs(seed=7)
    a = sk.train_kernel_probe(x, y, sk.KernelSpec("rbf"), sk.TrainConfig(seed=2))
    b = sk.train_kernel_probe(x, y, sk.KernelSpec("rbf"), sk.TrainConfig(seed=2))
    assert np.array_equal(a.dual_weights, b.dual_weights)


def test_kernel_probe_predicts_new_points():
    x, y = blobs(n=120, margin=2.0, seed=8)
    probe = sk.train_kernel_probe(x, y, sk.KernelSpec("rbf", gamma=0.5))
    fresh, fresh_y = blobs(n=40, margin=2.0, seed=9)
    assert np.mean(probe.predict(fresh) == fresh_y) >= 0.95


# ---------------------------------------------------------------------------
# INLP


def test_inlp_zero_iterations_identity():
    train, _ = planted()
    eraser = sk.fit_inlp(train, 0)
    assert eraser.directions.shape == (0, train.n_features)
    assert np.allclose(eraser.projector(), np.eye(train.n_features))
    x = np.arange(float(train.n_features))
    assert np.allclose(sk.apply_eraser(eraser, x), x)


def test_inlp_single_iteration_removes_planted_bias():
    train, test = planted()
    eraser = sk.fit_inlp(train, 1)
    assert eraser.iterations == 1
    erased_train = sk.apply_eraser(eraser, train.inputs + train.input_mean)
    erased_test = sk.apply_eraser(eraser, test.inputs)
    probe = sk.train_linear_probe(erased_train, train.guarded_labels)
    acc = np.mean(probe.predict(erased_test) == test.guarded_labels)
    assert acc <= 0.55


def test_inlp_projector_rank_matches_directions():
    train, _ = planted()
    eraser = sk.fit_inlp(train, 3)
    removed = eraser.directions.shape[0]
    svals = np.linalg.svd(eraser.projector(), compute_uv=False)
    assert np.sum(svals > 1e-10) == train.n_features - removed


def test_inlp_projector_invariants():
    train, _ = planted()
    eraser = sk.fit_inlp(train, 2)
    proj = eraser.projector()
    assert np.abs(proj - proj.T).max() < 1e-8
    assert np.abs(proj @ proj - proj).max() < 1e-8
    for direction in eraser.directions:
        assert abs(np.linalg.norm(direction) - 1.0) < 1e-10
        assert np.abs(proj @ direction).max() < 1e-8


def test_inlp_early_stop_on_chance_probe():
    rng = np.random.default_rng(10)
    x = rng.standard_normal((300, 6))
    z = rng.integers(0, 2, 300)
    ds = sk.center(
        sk.LabeledDataset(
            inputs=x, task_labels=z.astype(str), guarded=z * 2.0 - 1.0,
            guarded_labels=z.astype(str),
        )
    )
    eraser = sk.fit_inlp(ds, 10)
    # unrelated labels: the probe sits near chance, so iteration stops early
    assert eraser.iterations < 10


# ---------------------------------------------------------------------------
# apply_eraser


def test_apply_eraser_sal_hand_case():
    eraser = sk.SalEraser(
        u=np.eye(2), sigma=np.array([1.0]), v=np.array([[1.0]]), k=1,
        alpha=2.0, input_mean=np.zeros(2),
    )
    out = sk.apply_eraser(eraser, np.array([[3.0, 4.0], [1.0, 2.0]]))
    assert np.allclose(out, [[0.0, 4.0], [0.0, 2.0]])


def test_apply_eraser_matches_sal_and_inlp_on_noiseless_rank_one():
    rng = np.random.default_rng(11)
    direction = rng.standard_normal(8)
    direction /= np.linalg.norm(direction)
    z = rng.integers(0, 2, 300) * 2 - 1
    x = 3.0 * np.outer(z, direction)
    ds = sk.center(
        sk.LabeledDataset(
            inputs=x, task_labels=z.astype(str), guarded=z.astype(float),
            guarded_labels=z.astype(str),
        )
    )
    sal = sk.fit_sal(ds, k_override=1)
    inlp = sk.fit_inlp(ds, 1, sk.TrainConfig(epochs=2000))
    assert np.abs(sal.projector() - inlp.projector()).max() <= 1e-3


def test_apply_eraser_dimension_mismatch():
    train, _ = planted()
    eraser = sk.fit_inlp(train, 1)
    with pytest.raises(ContractError):
        sk.apply_eraser(eraser, np.ones(train.n_features + 1))


def test_apply_eraser_rejects_unknown_type():
    with pytest.raises(ContractError):
        sk.apply_eraser(object(), np.ones(3))
