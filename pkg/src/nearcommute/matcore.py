"""Dense complex matrix kernel: Hermitian eigendecomposition, operator norm,
functional calculus, spectral projections, pinching.

Everything downstream (bound checkers, subspace engines, the commuting-pair
pipeline) is built on the functions here.  All operations are pure: inputs are
never mutated and outputs are freshly allocated arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "HermitianEig",
    "OrthoProjection",
    "as_matrix",
    "eig_hermitian",
    "op_norm",
    "commutator",
    "spectral_projection",
    "spectral_projection_normal",
    "apply_function",
    "pinch",
    "random_hermitian",
    "random_unitary",
]

# Relative tolerance for accepting an input as Hermitian.
HERMITICITY_RTOL = 1e-10


class MatrixShapeError(ValueError):
    """Raised when an input is not a finite square complex matrix."""


class NotHermitianError(ValueError):
    """Raised when an input exceeds the Hermiticity tolerance."""


class NotResolutionError(ValueError):
    """Raised when a projection family is not a resolution of identity."""


def as_matrix(a) -> np.ndarray:
    """Validate and return ``a`` as a square complex128 ndarray."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise MatrixShapeError(f"expected a square matrix, got shape {m.shape}")
    if m.size and not np.all(np.isfinite(m)):
        raise MatrixShapeError("matrix has non-finite entries")
    return m


def op_norm(a) -> float:
    """Operator norm (largest singular value); accepts rectangular blocks."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise MatrixShapeError(f"expected a matrix, got shape {m.shape}")
    if 0 in m.shape:
        return 0.0
    if not np.all(np.isfinite(m)):
        raise MatrixShapeError("matrix has non-finite entries")
    return float(np.linalg.norm(m, 2))


def commutator(a, b) -> np.ndarray:
    """[A, B] = AB - BA."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise MatrixShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b - b @ a


@dataclass(frozen=True)
class HermitianEig:
    """Eigendecomposition of a Hermitian matrix.

    eigenvalues are ascending; columns of ``vectors`` are the matching
    orthonormal eigenvectors.  ``defect`` records the Hermiticity defect
    ||A - A*||/2 that was symmetrized away before decomposing.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    defect: float = 0.0

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.eigenvalues) @ self.vectors.conj().T

    def matrix_function(self, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        vals = np.asarray(f(self.eigenvalues), dtype=np.complex128)
        return (self.vectors * vals) @ self.vectors.conj().T


@dataclass(frozen=True)
class OrthoProjection:
    """An orthogonal projection together with its rank."""

    matrix: np.ndarray
    rank: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def complement(self) -> "OrthoProjection":
        return OrthoProjection(np.eye(self.dim) - self.matrix, self.dim - self.rank)

    def defects(self) -> tuple[float, float]:
        """(||P^2 - P||, ||P - P*||) self-consistency residuals."""
        p = self.matrix
        return (op_norm(p @ p - p), op_norm(p - p.conj().T))


def projection_from_basis(basis: np.ndarray, dim: int | None = None) -> OrthoProjection:
    """Projection onto the column span of an orthonormal ``basis`` (n x k)."""
    b = np.asarray(basis, dtype=np.complex128)
    if b.ndim == 1:
        b = b[:, None]
    n = b.shape[0] if dim is None else dim
    if b.shape[1] == 0:
        return OrthoProjection(np.zeros((n, n), dtype=np.complex128), 0)
    return OrthoProjection(b @ b.conj().T, b.shape[1])


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    """Rotate a unit vector so its largest-magnitude entry is real positive."""
    i = int(np.argmax(np.abs(v)))
    a = v[i]
    if abs(a) == 0.0:
        return v
    return v * (abs(a) / a)


def _gram_schmidt_span(columns: np.ndarray, target_rank: int, tol: float) -> np.ndarray:
    """Deterministic modified Gram-Schmidt over ``columns``, keeping
    ``target_rank`` directions.

    Columns are consumed largest-residual-first (ties broken by input order),
    which keeps the basis numerically orthonormal even when the input columns
    are strongly dependent; the selection is still a pure function of the
    input."""
    work = columns.astype(np.complex128).copy()
    kept: list[np.ndarray] = []
    for _ in range(target_rank):
        norms = np.linalg.norm(work, axis=0)
        j = int(np.argmax(norms))
        if norms[j] <= tol:
            raise np.linalg.LinAlgError("Gram-Schmidt failed to recover cluster basis")
        v = work[:, j] / norms[j]
        kept.append(v)
        work -= np.outer(v, v.conj() @ work)
    return np.column_stack(kept)


def eig_hermitian(a, *, rtol: float = HERMITICITY_RTOL) -> HermitianEig:
    """Eigendecomposition of a (numerically) Hermitian matrix.

    The input is symmetrized as (A + A*)/2 before decomposition; inputs whose
    Hermiticity defect exceeds ``rtol * ||A||`` are rejected.  Output is made
    deterministic: eigenvalues ascend, every eigenvector carries a canonical
    phase, and degenerate clusters are re-orthonormalized by Gram-Schmidt over
    the cluster projector's columns in input order, which removes any
    dependence on LAPACK's arbitrary in-cluster basis choice.
    """
    m = as_matrix(a)
    n = m.shape[0]
    if n == 0:
        return HermitianEig(np.zeros(0), np.zeros((0, 0), dtype=np.complex128), 0.0)
    scale = max(op_norm(m), np.finfo(float).tiny)
    defect = op_norm(m - m.conj().T) / 2.0
    if defect > rtol * scale:
        raise NotHermitianError(
            f"Hermiticity defect {defect:.3e} exceeds {rtol:.1e} * ||A|| = {rtol * scale:.3e}"
        )
    sym = (m + m.conj().T) / 2.0
    w, v = np.linalg.eigh(sym)

    # Degenerate-cluster canonicalization.
    cluster_tol = 1e-12 * n * max(scale, 1.0)
    i = 0
    while i < n:
        j = i + 1
        while j < n and w[j] - w[j - 1] <= cluster_tol:
            j += 1
        if j - i > 1:
            p = v[:, i:j] @ v[:, i:j].conj().T
            v[:, i:j] = _gram_schmidt_span(p, j - i, 1e-8)
        v[:, i:j] = np.apply_along_axis(_canonical_phase, 0, v[:, i:j])
        i = j
    return HermitianEig(w.copy(), v, float(defect))


def spectral_projection(eig: HermitianEig, s: Callable[[float], bool] | np.ndarray) -> OrthoProjection:
    """Spectral projection onto the eigenvalues selected by predicate ``s``.

    ``s`` may be a callable on reals or a precomputed boolean mask over the
    eigenvalue array.
    """
    if callable(s):
        mask = np.array([bool(s(float(x))) for x in eig.eigenvalues])
    else:
        mask = np.asarray(s, dtype=bool)
        if mask.shape != eig.eigenvalues.shape:
            raise MatrixShapeError("selection mask does not match eigenvalue count")
    cols = eig.vectors[:, mask]
    return projection_from_basis(cols, eig.dim)


def interval_projection(eig: HermitianEig, lo: float, hi: float,
                        closed_left: bool = True, closed_right: bool = True) -> OrthoProjection:
    """Spectral projection onto an interval of the real line."""
    w = eig.eigenvalues
    mask = (w >= lo) if closed_left else (w > lo)
    mask &= (w <= hi) if closed_right else (w < hi)
    return spectral_projection(eig, mask)


@dataclass(frozen=True)
class NormalEig:
    """Joint spectral data of a normal matrix: complex eigenvalues + unitary basis."""

    eigenvalues: np.ndarray  # complex
    vectors: np.ndarray


def spectral_projection_normal(eig: NormalEig, s: Callable[[complex], bool]) -> OrthoProjection:
    """Spectral projection of a normal matrix onto a complex-plane predicate."""
    mask = np.array([bool(s(complex(z))) for z in eig.eigenvalues])
    return projection_from_basis(eig.vectors[:, mask], eig.vectors.shape[0])


def apply_function(eig: HermitianEig, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """f(A) = V diag(f(lambda)) V* by eigenvalue substitution (exact for the
    sampled eigenvalues)."""
    return eig.matrix_function(f)


def pinch(a, parts: Sequence[OrthoProjection | np.ndarray], *, tol: float = 1e-10) -> np.ndarray:
    """Pinching sum P_i A P_i for a resolution of identity {P_i}.

    Kills all off-diagonal blocks with respect to the family; never increases
    the operator norm.
    """
    m = as_matrix(a)
    mats = [p.matrix if isinstance(p, OrthoProjection) else as_matrix(p) for p in parts]
    if not mats:
        raise NotResolutionError("empty projection family")
    total = sum(mats)
    n = m.shape[0]
    if op_norm(total - np.eye(n)) > tol:
        raise NotResolutionError("projections do not sum to the identity")
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            if op_norm(mats[i] @ mats[j]) > tol:
                raise NotResolutionError(f"projections {i} and {j} are not orthogonal")
    out = np.zeros_like(m)
    for p in mats:
        out += p @ m @ p
    return out


def random_hermitian(rng: np.random.Generator, n: int, *, norm: float | None = None) -> np.ndarray:
    """Random Hermitian matrix; if ``norm`` is given, rescaled to that operator norm."""
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = (g + g.conj().T) / 2.0
    if norm is not None:
        cur = op_norm(h)
        if cur > 0:
            h *= norm / cur
    return h


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-ish random unitary from the QR of a complex Gaussian matrix."""
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def orthonormal_columns(cols: np.ndarray, *, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the column span of ``cols`` (rank-revealing SVD)."""
    c = np.asarray(cols, dtype=np.complex128)
    if c.ndim == 1:
        c = c[:, None]
    if c.shape[1] == 0:
        return c.reshape(c.shape[0], 0)
    u, s, _ = np.linalg.svd(c, full_matrices=False)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    return u[:, :rank]
