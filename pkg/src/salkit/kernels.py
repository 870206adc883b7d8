"""Kernelized attribute removal.

The linear eraser generalizes to feature spaces induced by a kernel. With
Gram matrices K_phi (inputs) and K_psi (guarded encodings, always a plain dot
product), the removal directions in feature space are recovered from
eigenvectors of the Gram product

    gamma = K_psi @ K_phi,

orthonormalized under the K_phi inner product <a, b> = a^T K_phi b: mapping an
eigenvector w through the (never materialized) feature matrix gives an
eigenvector of the feature-space cross-covariance outer product, so the top-k
block W spans exactly the directions a linear eraser would prune there.
Debiased training rows live in the rows of K_sqrt @ L, where K_sqrt is a
square root of K_phi from its SVD and L an orthonormal basis of the null
space of (K_sqrt @ W)^T. The reduced Gram matrix K_sqrt L L^T K_sqrt^T equals
K_phi - K_phi W W^T K_phi, which the tests use as an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg

from .dataset import LabeledDataset
from .errors import ContractError, MetricUndefinedError, NumericError
from .linear import RANK_TOL

KERNEL_FAMILIES = ("linear", "poly2", "rbf")

# Relative noise floors: eigenvalue cut in fit_ksal, K_phi-norm cut in the
# Gram-Schmidt pass, singular value cut in the null-space construction.
EIGENVALUE_TOL = 1e-10
ORTHO_DROP_TOL = 1e-10
NULLSPACE_TOL = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus parameters. gamma applies to the rbf family only."""

    family: str
    gamma: float = 0.1

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ContractError(
                f"unknown kernel family {self.family!r}; choose from {KERNEL_FAMILIES}"
            )
        if self.family == "rbf" and not self.gamma > 0:
            raise ContractError(f"rbf kernel needs gamma > 0, got {self.gamma}")


@dataclass(frozen=True)
class GramPair:
    """Input and guarded Gram matrices over the same n samples."""

    k_phi: np.ndarray
    k_psi: np.ndarray

    def __post_init__(self):
        k_phi = np.asarray(self.k_phi, dtype=float)
        k_psi = np.asarray(self.k_psi, dtype=float)
        if k_phi.shape != k_psi.shape or k_phi.shape[0] != k_phi.shape[1]:
            raise ContractError("Gram matrices must be square and equally sized")
        for name, mat in (("k_phi", k_phi), ("k_psi", k_psi)):
            scale = max(1.0, float(np.abs(mat).max()))
            if np.abs(mat - mat.T).max() > 1e-10 * scale:
                raise ContractError(f"{name} is not symmetric")
        object.__setattr__(self, "k_phi", k_phi)
        object.__setattr__(self, "k_psi", k_psi)

    def validate_psd(self, tol: float = 1e-8) -> None:
        """Check both matrices are positive semi-definite up to noise."""
        for name, mat in (("k_phi", self.k_phi), ("k_psi", self.k_psi)):
            smallest = float(np.linalg.eigvalsh(mat)[0])
            if smallest < -tol * max(1.0, float(np.linalg.norm(mat, 2))):
                raise NumericError(f"{name} has eigenvalue {smallest}, not PSD")


@dataclass(frozen=True)
class KsalEraser:
    """Fitted kernel eraser.

    ``w_block`` holds the K_phi-orthonormalized top eigenvectors (n x k),
    ``k_sqrt`` the square root of K_phi, ``l_basis`` the orthonormal null-space
    basis (n x (n-k)). ``k`` is the effective number of removed directions; it
    can be smaller than ``requested_k`` when the eigenvalue spectrum runs out
    of numerically nonzero entries first.
    """

    train_inputs: np.ndarray
    spec: KernelSpec
    w_block: np.ndarray
    k_sqrt: np.ndarray
    l_basis: np.ndarray
    k: int
    input_mean: np.ndarray
    requested_k: int
    k_phi_w: np.ndarray  # K_phi @ w_block, cached for out-of-sample projections
    eigenvalues: np.ndarray  # eigenvalues backing the kept directions

    @property
    def n_train(self) -> int:
        return self.train_inputs.shape[0]


def eval_kernel(spec: KernelSpec, x: np.ndarray, y: np.ndarray) -> float:
    """Kernel value for a single pair of equally sized vectors."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ContractError(f"vector lengths differ: {x.shape[0]} vs {y.shape[0]}")
    if spec.family == "linear":
        return float(x @ y)
    if spec.family == "poly2":
        return float((1.0 + x @ y) ** 2)
    diff = x - y
    return float(np.exp(-spec.gamma * (diff @ diff)))


def _pairwise(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kernel values between all rows of a (q x d) and b (n x d): q x n."""
    prods = a @ b.T
    if spec.family == "linear":
        return prods
    if spec.family == "poly2":
        return (1.0 + prods) ** 2
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * prods
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-spec.gamma * sq)


def gram_matrix(spec: KernelSpec, rows: np.ndarray) -> np.ndarray:
    """Symmetric Gram matrix over the rows.

    Symmetry is exact: the upper triangle is computed and mirrored. The rbf
    diagonal is exactly one (zero distance).
    """
    rows = np.asarray(rows, dtype=float)
    if not np.isfinite(rows).all():
        raise ContractError("non-finite entries in kernel inputs")
    if spec.family == "rbf":
        prods = rows @ rows.T
        norms = np.diag(prods).copy()
        sq = norms[:, None] + norms[None, :] - 2.0 * prods
        np.maximum(sq, 0.0, out=sq)
        np.fill_diagonal(sq, 0.0)
        gram = np.exp(-spec.gamma * sq)
    else:
        gram = _pairwise(spec, rows, rows)
    upper = np.triu(gram)
    return upper + np.triu(gram, 1).T


def kappa(spec: KernelSpec, train_rows: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Kernel values of x against every training row.

    A single length-d vector gives a length-n vector; a q x d matrix of
    queries gives q x n.
    """
    train_rows = np.asarray(train_rows, dtype=float)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    queries = x.reshape(1, -1) if single else x
    if queries.shape[1] != train_rows.shape[1]:
        raise ContractError(
            f"query dimension {queries.shape[1]} does not match training "
            f"dimension {train_rows.shape[1]}"
        )
    out = _pairwise(spec, queries, train_rows)
    return out[0] if single else out


def _spectral_norm(a: np.ndarray) -> float:
    """2-norm, computed exactly for modest sizes, bounded above otherwise."""
    if min(a.shape) <= 2048:
        return float(np.linalg.norm(a, 2))
    n1 = np.abs(a).sum(axis=0).max()
    ninf = np.abs(a).sum(axis=1).max()
    return float(np.sqrt(n1 * ninf))


def top_eigenvectors(gamma: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvectors of gamma for the k largest real eigenvalues.

    gamma is expected to be a product of PSD matrices, so its spectrum is real
    and non-negative up to numerical noise; an imaginary part above
    1e-6 * ||gamma|| is treated as a numerical failure, as is an eigenpair
    whose residual ||gamma w - lambda w|| exceeds 1e-6 * ||gamma|| * ||w||.
    Uses implicitly restarted Arnoldi iteration for large problems and a dense
    solve otherwise. Returns (n x k vectors, k eigenvalues), eigenvalues
    non-increasing.
    """
    gamma = np.asarray(gamma, dtype=float)
    n = gamma.shape[0]
    if gamma.ndim != 2 or gamma.shape[1] != n:
        raise ContractError("gamma must be square")
    if not 0 <= k <= n:
        raise ContractError(f"k={k} outside [0, n={n}]")
    if k == 0:
        return np.zeros((n, 0)), np.zeros(0)

    norm = _spectral_norm(gamma)
    if k < n - 1 and n > 64:
        v0 = np.full(n, 1.0 / np.sqrt(n))
        try:
            vals, vecs = scipy.sparse.linalg.eigs(gamma, k=k, which="LR", v0=v0)
        except scipy.sparse.linalg.ArpackError as exc:
            raise NumericError(f"Arnoldi iteration failed: {exc}") from exc
    else:
        vals, vecs = np.linalg.eig(gamma)

    order = np.argsort(-vals.real)[:k]
    vals = vals[order]
    vecs = vecs[:, order]
    if norm > 0 and np.abs(vals.imag).max(initial=0.0) > 1e-6 * norm:
        raise NumericError(
            f"complex eigenvalues (|imag| up to {np.abs(vals.imag).max():.3e}) "
            "for a matrix expected to have a real spectrum"
        )
    vals = vals.real
    vecs = vecs.real
    vec_norms = np.linalg.norm(vecs, axis=0)
    vec_norms[vec_norms == 0] = 1.0
    vecs = vecs / vec_norms

    residual = gamma @ vecs - vecs * vals[None, :]
    worst = np.linalg.norm(residual, axis=0).max(initial=0.0)
    if worst > 1e-6 * max(norm, np.finfo(float).tiny):
        raise NumericError(
            f"eigenpair residual {worst:.3e} exceeds tolerance {1e-6 * norm:.3e}"
        )
    return vecs, vals


def _kphi_orthonormalize(
    vectors: np.ndarray, k_phi: np.ndarray, norm_kphi: float
) -> np.ndarray:
    """Modified Gram-Schmidt under <a, b> = a^T K_phi b, in the given order.

    Vectors whose remaining K_phi-norm drops below the noise floor are dropped.
    """
    basis: list[np.ndarray] = []
    images: list[np.ndarray] = []  # K_phi @ b for each kept b
    for j in range(vectors.shape[1]):
        w = vectors[:, j].copy()
        kw = k_phi @ w
        for b, kb in zip(basis, images):
            coef = b @ kw
            w -= coef * b
            kw -= coef * kb
        sq = float(w @ kw)
        nrm = np.sqrt(sq) if sq > 0 else 0.0
        if nrm <= ORTHO_DROP_TOL * norm_kphi:
            continue
        w /= nrm
        basis.append(w)
        images.append(k_phi @ w)
    if not basis:
        return np.zeros((vectors.shape[0], 0))
    return np.column_stack(basis)


def _sqrt_from_svd(k_phi: np.ndarray) -> np.ndarray:
    """Square root U diag(sqrt(s)) V^T from the SVD of a symmetric PSD matrix."""
    try:
        u, s, vt = np.linalg.svd(k_phi)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD of input Gram matrix failed: {exc}") from exc
    return (u * np.sqrt(s)) @ vt


def _nullspace(a: np.ndarray, n: int) -> np.ndarray:
    """Orthonormal basis of the null space of a (rows x n), noise floor relative."""
    if a.shape[0] == 0:
        return np.eye(n)
    try:
        _, s, vt = np.linalg.svd(a, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"null-space SVD failed: {exc}") from exc
    rank = int(np.count_nonzero(s > NULLSPACE_TOL * s[0])) if s.size else 0
    return vt[rank:].T


def fit_ksal(dataset: LabeledDataset, spec: KernelSpec, k: int) -> KsalEraser:
    """Fit the kernel eraser on a centered dataset, removing k directions.

    The guarded kernel is always the plain dot product of the guarded
    encodings. k may be any value in [0, n]; directions beyond the numerical
    rank of the Gram product carry no covariance and are not removed, so the
    effective ``k`` on the returned eraser can be smaller than requested.
    """
    if not dataset.is_centered():
        raise ContractError("dataset is not centered; call center() first")
    n = dataset.n_samples
    if not 0 <= k <= n:
        raise ContractError(f"k={k} outside [0, n={n}]")

    k_phi = gram_matrix(spec, dataset.inputs)
    k_psi = gram_matrix(KernelSpec("linear"), dataset.guarded)
    grams = GramPair(k_phi=k_phi, k_psi=k_psi)
    norm_kphi = _spectral_norm(k_phi)

    # Rank of the product is capped by the guarded dimension, so never ask the
    # eigensolver for more pairs than that.
    n_ask = min(k, dataset.n_guarded, n)
    if n_ask > 0:
        gamma = grams.k_psi @ grams.k_phi
        vecs, vals = top_eigenvectors(gamma, n_ask)
        keep = vals > EIGENVALUE_TOL * max(vals[0], 0.0) if vals.size else []
        vecs = vecs[:, keep]
        vals = vals[keep]
    else:
        vecs = np.zeros((n, 0))
        vals = np.zeros(0)

    w_block = _kphi_orthonormalize(vecs, k_phi, norm_kphi)
    k_eff = w_block.shape[1]
    vals = vals[:k_eff]

    k_sqrt = _sqrt_from_svd(k_phi)
    l_basis = _nullspace((k_sqrt @ w_block).T, n)

    return KsalEraser(
        train_inputs=dataset.inputs.copy(),
        spec=spec,
        w_block=w_block,
        k_sqrt=k_sqrt,
        l_basis=l_basis,
        k=k_eff,
        input_mean=dataset.input_mean.copy(),
        requested_k=int(k),
        k_phi_w=k_phi @ w_block,
        eigenvalues=vals.copy(),
    )


def kernel_project_removed(eraser: KsalEraser, x: np.ndarray) -> np.ndarray:
    """Coordinates of the query inside the removed feature-space block.

    Returns W^T kappa(x - mean), a length-k vector (q x k for a matrix of
    queries). Queries are centered with the training mean first.
    """
    kap = kappa(eraser.spec, eraser.train_inputs, np.asarray(x, dtype=float) - eraser.input_mean)
    return kap @ eraser.w_block


def reduced_train_features(eraser: KsalEraser) -> np.ndarray:
    """Debiased training representations: rows of K_sqrt @ L, n x (n-k)."""
    return eraser.k_sqrt @ eraser.l_basis


def reduced_kernel(eraser: KsalEraser) -> np.ndarray:
    """Gram matrix of the training points after removal: K_sqrt L L^T K_sqrt^T."""
    t = reduced_train_features(eraser)
    return t @ t.T


def reduced_cross_kernel(eraser: KsalEraser, x: np.ndarray) -> np.ndarray:
    """Reduced kernel values between a query and every training point.

    Computes kappa(x) - K_phi W W^T kappa(x), the inner products of the
    removal-projected feature images. For x equal to training point j this is
    column j of the reduced kernel matrix.
    """
    kap = kappa(eraser.spec, eraser.train_inputs, np.asarray(x, dtype=float) - eraser.input_mean)
    return kap - (kap @ eraser.w_block) @ eraser.k_phi_w.T


def kernel_deviation_ratio(k_phi: np.ndarray, k_hat: np.ndarray) -> float:
    """Mean absolute entry-wise change relative to the spread of the original.

    Returns gamma / rho with gamma the mean of |k_hat - k_phi| and rho the
    population standard deviation of the k_phi entries.
    """
    k_phi = np.asarray(k_phi, dtype=float)
    k_hat = np.asarray(k_hat, dtype=float)
    if k_phi.shape != k_hat.shape:
        raise ContractError(f"shape mismatch: {k_phi.shape} vs {k_hat.shape}")
    rho = float(k_phi.std())
    if rho == 0.0:
        raise MetricUndefinedError("deviation ratio undefined: constant kernel matrix")
    dev = float(np.abs(k_hat - k_phi).mean())
    return dev / rho


def verify_lemma_a(x_features: np.ndarray, z_features: np.ndarray) -> float:
    """Numerically check the eigenvector-transfer identity on explicit features.

    With feature matrices Phi (m x n) and Psi (m' x n) given explicitly, every
    eigenvector w of K_psi K_phi maps through Phi to an eigenvector of
    Omega Omega^T with Omega = Phi Psi^T. Returns the worst normalized
    residual max ||Omega Omega^T (Phi w) - lambda (Phi w)|| / (||Phi w|| ||Omega Omega^T||)
    over all eigenpairs; pairs with a vanishing image Phi w are vacuous and
    skipped, and a zero Omega yields zero.
    """
    phi = np.asarray(x_features, dtype=float)
    psi = np.asarray(z_features, dtype=float)
    if phi.shape[1] != psi.shape[1]:
        raise ContractError("feature matrices must share the sample dimension")
    k_phi = phi.T @ phi
    k_psi = psi.T @ psi
    omega = phi @ psi.T
    outer = omega @ omega.T
    norm_outer = float(np.linalg.norm(outer, 2))
    if norm_outer == 0.0:
        return 0.0
    vals, vecs = np.linalg.eig(k_psi @ k_phi)
    phi_scale = float(np.linalg.norm(phi))
    worst = 0.0
    for lam, w in zip(vals, vecs.T):
        image = phi @ w.real
        image_norm = float(np.linalg.norm(image))
        if image_norm <= 1e-10 * phi_scale:
            continue
        resid = float(np.linalg.norm(outer @ image - lam.real * image))
        worst = max(worst, resid / (image_norm * norm_outer))
    return worst
