"""Labeled sample container and centering.

A :class:`LabeledDataset` holds n samples of (input vector, task label,
guarded-attribute encoding). Binary guarded attributes are encoded as a
single column in {-1, +1}; attributes with three or more values become a
one-hot block, one column per value in sorted order. Centering subtracts
column means from both the inputs and the guarded block and records the
means so that later transforms of new points stay consistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractError, DataError

# Column means at or below this (scaled by data magnitude) count as centered.
CENTERING_TOL = 1e-9


def encode_guarded(labels: np.ndarray) -> np.ndarray:
    """Encode categorical guarded labels as a real matrix.

    Two distinct values map to one column in {-1, +1} (the lexicographically
    larger value gets +1). Three or more map to a one-hot block with columns
    in sorted value order. The result is uncentered; ``center`` takes care of
    shifting it to zero mean.
    """
    labels = np.asarray(labels)
    try:
        values = sorted(set(labels.tolist()))
    except TypeError:
        values = sorted(set(labels.tolist()), key=str)
    if len(values) < 2:
        raise ContractError("guarded attribute needs at least two distinct values")
    if len(values) == 2:
        col = np.where(labels == values[1], 1.0, -1.0)
        return col.reshape(-1, 1)
    block = np.zeros((len(labels), len(values)))
    index = {v: j for j, v in enumerate(values)}
    for i, v in enumerate(labels.tolist()):
        block[i, index[v]] = 1.0
    return block


@dataclass(frozen=True)
class LabeledDataset:
    """n samples of (input row, task label, guarded encoding) plus centering means."""

    inputs: np.ndarray          # n x d
    task_labels: np.ndarray     # length n, categorical
    guarded: np.ndarray         # n x d', real encoding of the attribute
    guarded_labels: np.ndarray  # length n, original categorical attribute values
    ids: np.ndarray = field(default=None)  # length n, sample identifiers
    input_mean: np.ndarray = field(default=None)    # length d
    guarded_mean: np.ndarray = field(default=None)  # length d'

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float)
        if inputs.ndim != 2:
            raise DataError(f"inputs must be a 2-D matrix, got ndim={inputs.ndim}")
        guarded = np.asarray(self.guarded, dtype=float)
        if guarded.ndim == 1:
            guarded = guarded.reshape(-1, 1)
        if guarded.ndim != 2:
            raise DataError(f"guarded must be a vector or matrix, got ndim={guarded.ndim}")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "guarded", guarded)
        object.__setattr__(self, "task_labels", np.asarray(self.task_labels))
        object.__setattr__(self, "guarded_labels", np.asarray(self.guarded_labels))
        n, d = inputs.shape
        if n < 2:
            raise DataError(f"need at least 2 samples, got {n}")
        if guarded.shape[0] != n or len(self.task_labels) != n or len(self.guarded_labels) != n:
            raise DataError("inputs, labels and guarded encodings disagree on sample count")
        if guarded.shape[1] > d:
            raise DataError(
                f"guarded dimension {guarded.shape[1]} exceeds input dimension {d}"
            )
        if not np.isfinite(inputs).all() or not np.isfinite(guarded).all():
            raise DataError("non-finite values in inputs or guarded encodings")
        if self.ids is None:
            object.__setattr__(self, "ids", np.array([str(i) for i in range(n)]))
        else:
            object.__setattr__(self, "ids", np.asarray(self.ids))
        if self.input_mean is None:
            object.__setattr__(self, "input_mean", np.zeros(d))
        if self.guarded_mean is None:
            object.__setattr__(self, "guarded_mean", np.zeros(guarded.shape[1]))

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_features(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_guarded(self) -> int:
        return self.guarded.shape[1]

    def is_centered(self, tol: float = CENTERING_TOL) -> bool:
        """True when both blocks have column means within tolerance of zero."""
        scale_x = max(1.0, float(np.abs(self.inputs).max()))
        scale_z = max(1.0, float(np.abs(self.guarded).max()))
        return bool(
            np.abs(self.inputs.mean(axis=0)).max() <= tol * scale_x
            and np.abs(self.guarded.mean(axis=0)).max() <= tol * scale_z
        )

    def subset(self, index: np.ndarray) -> "LabeledDataset":
        """Row subset (e.g. a train/test split). Means are reset; re-center after."""
        index = np.asarray(index)
        return LabeledDataset(
            inputs=self.inputs[index],
            task_labels=self.task_labels[index],
            guarded=self.guarded[index],
            guarded_labels=self.guarded_labels[index],
            ids=self.ids[index],
        )


def center(dataset: LabeledDataset) -> LabeledDataset:
    """Subtract column means from inputs and guarded encodings.

    The subtracted means accumulate into ``input_mean`` / ``guarded_mean`` so
    the original coordinate frame can always be recovered; centering an
    already centered dataset is a no-op up to rounding.
    """
    if not np.isfinite(dataset.inputs).all() or not np.isfinite(dataset.guarded).all():
        raise DataError("non-finite values in inputs or guarded encodings")
    x_mean = dataset.inputs.mean(axis=0)
    z_mean = dataset.guarded.mean(axis=0)
    return replace(
        dataset,
        inputs=dataset.inputs - x_mean,
        guarded=dataset.guarded - z_mean,
        input_mean=dataset.input_mean + x_mean,
        guarded_mean=dataset.guarded_mean + z_mean,
    )


def guarded_classes(dataset: LabeledDataset) -> np.ndarray:
    """Categorical guarded labels, as stored on the dataset."""
    return dataset.guarded_labels


def split_indices(
    n: int, test_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded random (train, test) index split with at least one sample each."""
    if not 0.0 < test_fraction < 1.0:
        raise ContractError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_test = int(round(n * test_fraction))
    n_test = min(max(n_test, 1), n - 1)
    return perm[n_test:], perm[:n_test]
