"""Deterministic synthetic datasets with planted attribute and task signal.

Randomness comes from ``numpy.random.default_rng(seed)`` (the PCG64 generator)
with a fixed draw order, so a spec always produces a bit-identical dataset:

linear mode
    1. a d x (bias_rank + 1) standard normal frame, orthonormalized column by
       column (first bias_rank columns carry the attribute, the last the task),
    2. guarded signs, one n x bias_rank block of independent {-1, +1} draws,
    3. task signs, n independent {-1, +1} draws,
    4. n x d standard normal noise.
    Inputs are noise + bias_strength * signs @ frame^T + task_strength * task
    along the task column, so the input/attribute cross-covariance has rank
    exactly bias_rank and the task direction is orthogonal to it.

nonlinear mode
    1. a task direction inside coordinates 2..d-1, normalized,
    2. task signs, 3. n x d standard normal noise, 4. two n-vectors of
       quadrant signs.
    Coordinates 0 and 1 become (sign + noise / bias_strength), rescaled to
    unit variance, and the guarded label is the sign of their product: four
    clusters in an XOR layout whose quadrant structure carries no linear
    signal. bias_strength sets the cluster-to-jitter ratio. A faint linear
    trace of the label (0.15 standard deviations, well below what a linear
    probe can exploit) rides on coordinate 2, so a rank-one linear eraser
    finds a real direction to remove far away from the quadrant plane instead
    of amplifying sampling noise into an arbitrary one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset
from .errors import ContractError

# Linear trace of the nonlinear-mode label on coordinate 2. Kept below the
# level a linear probe can exploit (best achievable accuracy ~0.56).
XOR_LINEAR_TRACE = 0.15


@dataclass(frozen=True)
class SyntheticSpec:
    """Size, planted-signal strengths, and seed for one synthetic dataset."""

    n: int
    d: int
    bias_rank: int = 1
    bias_strength: float = 3.0
    task_strength: float = 3.0
    nonlinear: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ContractError(f"need n >= 2, got {self.n}")
        if self.d < 1:
            raise ContractError(f"need d >= 1, got {self.d}")
        if not 1 <= self.bias_rank <= self.d:
            raise ContractError(
                f"bias_rank must lie in [1, d={self.d}], got {self.bias_rank}"
            )
        if self.bias_strength < 0 or self.task_strength < 0:
            raise ContractError("signal strengths must be non-negative")
        if self.nonlinear and self.d < 3:
            raise ContractError("nonlinear mode needs d >= 3")


def _orthonormal_columns(frame: np.ndarray) -> np.ndarray:
    """Column-wise Gram-Schmidt; avoids BLAS-dependent QR sign conventions."""
    out = np.zeros_like(frame)
    kept = 0
    for j in range(frame.shape[1]):
        v = frame[:, j].copy()
        for i in range(kept):
            v -= (out[:, i] @ v) * out[:, i]
        nrm = float(np.linalg.norm(v))
        if nrm > 1e-12:
            out[:, kept] = v / nrm
            kept += 1
    return out[:, :kept]


def _sign_labels(signs: np.ndarray) -> np.ndarray:
    """Join a row of signs into a categorical label; single column stays +-1."""
    if signs.shape[1] == 1:
        return signs[:, 0].astype(int).astype(str)
    return np.array(["".join("+" if s > 0 else "-" for s in row) for row in signs])


def generate_synthetic(spec: SyntheticSpec) -> LabeledDataset:
    """Generate one dataset from the spec. Bit-identical for equal specs."""
    rng = np.random.default_rng(spec.seed)
    n, d, r = spec.n, spec.d, spec.bias_rank

    if spec.nonlinear:
        if spec.bias_strength == 0:
            raise ContractError("nonlinear mode needs bias_strength > 0")
        task_dir = np.zeros(d)
        sub = rng.standard_normal(d - 2)
        task_dir[2:] = sub / np.linalg.norm(sub)
        y = rng.integers(0, 2, size=n) * 2 - 1
        x = rng.standard_normal((n, d))
        quadrant = rng.integers(0, 2, size=(n, 2)) * 2.0 - 1.0
        unit_var = 1.0 / np.sqrt(1.0 + 1.0 / spec.bias_strength**2)
        for col in (0, 1):
            x[:, col] = (quadrant[:, col] + x[:, col] / spec.bias_strength) * unit_var
        z_signs = np.where(x[:, 0] * x[:, 1] >= 0, 1.0, -1.0).reshape(-1, 1)
        x[:, 2] += XOR_LINEAR_TRACE * z_signs[:, 0]
        x = x + spec.task_strength * y[:, None] * task_dir
        guarded = z_signs
        guarded_labels = _sign_labels(z_signs)
    else:
        frame = _orthonormal_columns(rng.standard_normal((d, r + 1)))
        if frame.shape[1] < r + 1:
            if spec.task_strength > 0:
                raise ContractError(
                    "no orthogonal task direction available (bias_rank == d)"
                )
            bias_frame = frame[:, :r]
            task_dir = np.zeros(d)
        else:
            bias_frame = frame[:, :r]
            task_dir = frame[:, r]
        z_signs = rng.integers(0, 2, size=(n, r)) * 2.0 - 1.0
        y = rng.integers(0, 2, size=n) * 2 - 1
        x = rng.standard_normal((n, d))
        x = x + spec.bias_strength * z_signs @ bias_frame.T
        x = x + spec.task_strength * y[:, None] * task_dir
        guarded = z_signs
        guarded_labels = _sign_labels(z_signs)

    return LabeledDataset(
        inputs=x,
        task_labels=y.astype(int).astype(str),
        guarded=guarded,
        guarded_labels=guarded_labels,
    )
