"""Linear spectral attribute removal.

The eraser is fit by a singular value decomposition of the empirical
cross-covariance between centered inputs and centered guarded encodings,

    omega = (1/n) * sum_i x_i z_i^T    (d x d').

Left singular directions with large singular values carry the most
input/attribute covariance; dropping the top k of them and keeping the rest
(``u_bar``) yields representations whose remaining cross-covariance with the
attribute has spectral norm sigma_{k+1}. Both the dimension-reducing map
``u_bar^T x`` and the in-place projection ``u_bar u_bar^T x`` are provided,
plus a blend of the in-place projector with the identity for use with
classifiers that cannot be retrained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset
from .errors import ContractError, NumericError

# Singular values at or below RANK_TOL * sigma_1 count as zero.
RANK_TOL = 1e-10


@dataclass(frozen=True)
class CrossCovariance:
    """Empirical cross-covariance omega (d x d') and the sample count behind it."""

    omega: np.ndarray
    n_samples: int

    def __post_init__(self):
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float))
        if not np.isfinite(self.omega).all():
            raise NumericError("cross-covariance contains non-finite entries")
        if self.n_samples <= 0:
            raise ContractError("n_samples must be positive")


@dataclass(frozen=True)
class SalEraser:
    """Fitted linear eraser: SVD factors, the cut point k, and centering mean.

    ``u`` is the full d x d orthonormal factor; columns k..d-1 span the kept
    subspace. ``sigma`` holds the min(d, d') singular values in non-increasing
    order and ``v`` the d' x d' right factor.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    k: int
    alpha: float
    input_mean: np.ndarray

    @property
    def dim(self) -> int:
        return self.u.shape[0]

    @property
    def rank(self) -> int:
        return numerical_rank(self.sigma)

    @property
    def u_bar(self) -> np.ndarray:
        """Kept directions: columns k..d-1 of u."""
        return self.u[:, self.k :]

    def projector(self) -> np.ndarray:
        """The in-place removal projector u_bar u_bar^T (d x d, symmetric)."""
        ub = self.u_bar
        return ub @ ub.T

    def with_k(self, k: int) -> "SalEraser":
        """Same SVD, different cut point. Cheap way to sweep k."""
        if not 0 <= k <= self.rank:
            raise ContractError(f"k={k} outside [0, rank={self.rank}]")
        return SalEraser(self.u, self.sigma, self.v, int(k), self.alpha, self.input_mean)


def numerical_rank(sigma: np.ndarray) -> int:
    """Number of singular values above RANK_TOL * sigma[0]."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.size == 0 or sigma[0] <= 0.0:
        return 0
    return int(np.count_nonzero(sigma > RANK_TOL * sigma[0]))


def compute_cross_covariance(dataset: LabeledDataset) -> CrossCovariance:
    """(1/n) X^T Z for a centered dataset."""
    if not dataset.is_centered():
        raise ContractError("dataset is not centered; call center() first")
    n = dataset.n_samples
    omega = dataset.inputs.T @ dataset.guarded / n
    return CrossCovariance(omega=omega, n_samples=n)


def select_k(sigma: np.ndarray, alpha: float) -> int:
    """Minimal k >= 1 with sigma[0]/sigma[k] > alpha, else the numerical rank.

    Singular values at the numerical-zero floor satisfy the ratio by
    convention (the ratio is effectively infinite). An all-zero spectrum
    selects k = 0.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.size == 0:
        raise ContractError("empty singular value vector")
    if alpha < 1.0:
        raise ContractError(f"alpha must be >= 1, got {alpha}")
    if sigma[0] <= 0.0:
        return 0
    rank = numerical_rank(sigma)
    floor = RANK_TOL * sigma[0]
    for k in range(1, sigma.size):
        if sigma[k] <= floor or sigma[0] / sigma[k] > alpha:
            return k
    return rank


def fit_sal(
    dataset: LabeledDataset,
    alpha: float = 2.0,
    k_override: int | None = None,
) -> SalEraser:
    """Fit the linear eraser on a centered dataset.

    A full SVD of the cross-covariance is taken; k comes from ``select_k``
    unless ``k_override`` pins it. Each column of u is sign-flipped so its
    largest-magnitude entry is positive (the paired row of v^T flips with it),
    which makes serialization deterministic without touching any projector.
    """
    if alpha < 1.0:
        raise ContractError(f"alpha must be >= 1, got {alpha}")
    cov = compute_cross_covariance(dataset)
    try:
        u, sigma, vt = np.linalg.svd(cov.omega, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD of cross-covariance failed: {exc}") from exc

    d = u.shape[0]
    m = sigma.size
    for j in range(d):
        i = int(np.argmax(np.abs(u[:, j])))
        if u[i, j] < 0:
            u[:, j] = -u[:, j]
            if j < m:
                vt[j, :] = -vt[j, :]

    rank = numerical_rank(sigma)
    if k_override is not None:
        if not 0 <= k_override <= rank:
            raise ContractError(f"k_override={k_override} exceeds rank {rank}")
        k = int(k_override)
    else:
        k = select_k(sigma, alpha)

    return SalEraser(
        u=u,
        sigma=sigma,
        v=vt.T,
        k=k,
        alpha=float(alpha),
        input_mean=dataset.input_mean.copy(),
    )


def _check_dim(eraser: SalEraser, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != eraser.dim:
        raise ContractError(
            f"input dimension {x.shape[-1]} does not match eraser dimension {eraser.dim}"
        )
    return x


def project_reduce(eraser: SalEraser, x: np.ndarray) -> np.ndarray:
    """Coordinates of the centered input in the kept subspace, u_bar^T (x - mean).

    Accepts a single length-d vector or a matrix of row vectors; the output
    has d - k trailing dimensions.
    """
    x = _check_dim(eraser, x)
    return (x - eraser.input_mean) @ eraser.u_bar


def project_inplace(eraser: SalEraser, x: np.ndarray) -> np.ndarray:
    """Remove the top-k directions in the original space.

    Computes u_bar u_bar^T (x - mean) + mean; idempotent on the centered
    component and shape preserving.
    """
    x = _check_dim(eraser, x)
    return (x - eraser.input_mean) @ eraser.projector() + eraser.input_mean


def interpolate_projection(eraser: SalEraser, lam: float) -> np.ndarray:
    """Blend of the removal projector with the identity, lam*P + (1-lam)*I.

    lam = 0 leaves inputs untouched, lam = 1 is full removal. Callers apply
    the returned d x d matrix to centered inputs.
    """
    if not 0.0 <= lam <= 1.0:
        raise ContractError(f"lambda must lie in [0, 1], got {lam}")
    d = eraser.dim
    return lam * eraser.projector() + (1.0 - lam) * np.eye(d)


def residual_covariance(eraser: SalEraser, dataset: LabeledDataset) -> float:
    """Spectral norm of the cross-covariance left after in-place removal.

    For an eraser fitted on the same centered dataset this equals
    sigma_{k+1} (zero once k reaches the rank).
    """
    if dataset.n_features != eraser.dim:
        raise ContractError(
            f"dataset dimension {dataset.n_features} does not match eraser "
            f"dimension {eraser.dim}"
        )
    if not dataset.is_centered():
        raise ContractError("dataset is not centered; call center() first")
    projected = dataset.inputs @ eraser.projector()
    residual = projected.T @ dataset.guarded / dataset.n_samples
    return float(np.linalg.norm(residual, 2))
