"""Geometry of projection pairs: two-projection block decomposition,
nested-projection repair, tridiagonal positivity certificates, and
inverse-decay profiling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .checks import BoundCheck
from .matcore import (
    OrthoProjection,
    as_matrix,
    eig_hermitian,
    op_norm,
    orthonormal_columns,
    projection_from_basis,
)

__all__ = [
    "JordanBlock",
    "JordanDecomposition",
    "jordan_blocks",
    "jordan_basis",
    "nest_projection",
    "nest_projection_core",
    "tridiag_positive_test",
    "inverse_decay_profile",
]

PROJ_TOL = 1e-8


def _require_projection(p, name: str) -> np.ndarray:
    m = p.matrix if isinstance(p, OrthoProjection) else as_matrix(p)
    if op_norm(m @ m - m) > PROJ_TOL or op_norm(m - m.conj().T) > PROJ_TOL:
        raise ValueError(f"{name} is not an orthogonal projection to tolerance")
    return m


def _range_basis(p: np.ndarray, tol: float = 0.5) -> np.ndarray:
    """Orthonormal basis of the range of a projection (singular vectors with
    singular value above ``tol``; exact projections have values in {0,1})."""
    return orthonormal_columns(p, tol=tol)


@dataclass(frozen=True)
class JordanBlock:
    """One invariant block of a projection pair: 1 or 2 orthonormal columns
    plus the restrictions of P and Q to the block."""

    basis: np.ndarray
    p_restricted: np.ndarray
    q_restricted: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class JordanDecomposition:
    blocks: list[JordanBlock]

    @property
    def dims(self) -> list[int]:
        return [b.dim for b in self.blocks]

    def full_basis(self) -> np.ndarray:
        return np.column_stack([b.basis for b in self.blocks])

    def reconstruct(self) -> tuple[np.ndarray, np.ndarray]:
        """(P, Q) rebuilt from the block restrictions."""
        n = self.blocks[0].basis.shape[0]
        p = np.zeros((n, n), dtype=np.complex128)
        q = np.zeros((n, n), dtype=np.complex128)
        for blk in self.blocks:
            p += blk.basis @ blk.p_restricted @ blk.basis.conj().T
            q += blk.basis @ blk.q_restricted @ blk.basis.conj().T
        return p, q


def jordan_blocks(p, q, *, tol: float = 1e-10) -> JordanDecomposition:
    """Orthogonal decomposition into blocks of dimension <= 2, each invariant
    under both projections.

    The generic part comes from the eigenvectors of Q compressed to Ran(P);
    an eigenvalue cos^2(theta) strictly inside (0,1) pairs its eigenvector
    with its Q-image into a 2-dim block.  Everything else splits into
    1-dim blocks.
    """
    pm = _require_projection(p, "P")
    qm = _require_projection(q, "Q")
    if pm.shape != qm.shape:
        raise ValueError("P and Q must act on the same space")
    n = pm.shape[0]
    blocks: list[JordanBlock] = []
    used: list[np.ndarray] = []

    up = _range_basis(pm)
    if up.shape[1]:
        comp = up.conj().T @ qm @ up
        ec = eig_hermitian((comp + comp.conj().T) / 2, rtol=1e-6)
        for idx in range(ec.dim):
            lam = float(ec.eigenvalues[idx])
            pvec = up @ ec.vectors[:, idx]
            if lam <= tol * 10 or lam >= 1 - tol * 10:
                basis = pvec[:, None]
                used.append(pvec)
                blocks.append(JordanBlock(
                    basis,
                    np.array([[1.0 + 0j]]),
                    np.array([[complex(lam >= 0.5)]]),
                ))
            else:
                qv = qm @ pvec
                w = qv - (pvec.conj() @ qv) * pvec
                w = w / np.linalg.norm(w)
                basis = np.column_stack([pvec, w])
                used.extend([pvec, w])
                blocks.append(JordanBlock(
                    basis,
                    basis.conj().T @ pm @ basis,
                    basis.conj().T @ qm @ basis,
                ))
    # Remainder lives in ker(P); Q restricts to it.
    if used:
        um = np.column_stack(used)
        rem_proj = np.eye(n) - um @ um.conj().T
    else:
        rem_proj = np.eye(n, dtype=np.complex128)
    rem = _range_basis(rem_proj) if op_norm(rem_proj) > 0.5 else np.zeros((n, 0), dtype=np.complex128)
    if rem.shape[1]:
        comp = rem.conj().T @ qm @ rem
        ec = eig_hermitian((comp + comp.conj().T) / 2, rtol=1e-6)
        for idx in range(ec.dim):
            lam = float(ec.eigenvalues[idx])
            vec = rem @ ec.vectors[:, idx]
            blocks.append(JordanBlock(
                vec[:, None],
                np.array([[0.0 + 0j]]),
                np.array([[complex(lam >= 0.5)]]),
            ))
    return JordanDecomposition(blocks)


def jordan_basis(p, q) -> np.ndarray:
    """Orthonormal basis {p_i} of Ran(P) with (p_i, Q p_j) = 0 for i != j.

    Columns are the eigenvectors of Q compressed to Ran(P), lifted back.
    """
    pm = _require_projection(p, "P")
    qm = _require_projection(q, "Q")
    up = _range_basis(pm)
    if up.shape[1] == 0:
        return up
    comp = up.conj().T @ qm @ up
    ec = eig_hermitian((comp + comp.conj().T) / 2, rtol=1e-6)
    return up @ ec.vectors


def nest_projection_core(e, g, f_prime) -> OrthoProjection:
    """Structural construction of F with E <= F <= G: F = E plus the
    above-half spectral part of F' compressed to Ran(G - E)."""
    em = _require_projection(e, "E")
    gm = _require_projection(g, "G")
    fm = _require_projection(f_prime, "F'")
    if op_norm(em - gm @ em) > PROJ_TOL:
        raise ValueError("E <= G fails")
    d = gm - em
    ud = _range_basis(d) if op_norm(d) > 0.5 else np.zeros((em.shape[0], 0), dtype=np.complex128)
    cols = [ _range_basis(em) ] if op_norm(em) > 0.5 else []
    if ud.shape[1]:
        comp = ud.conj().T @ fm @ ud
        ec = eig_hermitian((comp + comp.conj().T) / 2, rtol=1e-6)
        keep = ec.eigenvalues > 0.5
        if np.any(keep):
            cols.append(ud @ ec.vectors[:, keep])
    if not cols:
        n = em.shape[0]
        return OrthoProjection(np.zeros((n, n), dtype=np.complex128), 0)
    basis = np.column_stack(cols)
    return projection_from_basis(basis, em.shape[0])


def nest_projection(e, g, f_prime, *, max_eps: float = 0.1
                    ) -> tuple[OrthoProjection, BoundCheck]:
    """Repair F' into F with E <= F <= G exactly, keeping ||F - F'|| <= 5 eps
    where eps = max(||E F'perp||, ||F' Gperp||).

    The sandwich holds by construction; the 5-eps distance is returned as a
    BoundCheck.  Requires eps < max_eps (the bound is vacuous otherwise).
    """
    em = _require_projection(e, "E")
    gm = _require_projection(g, "G")
    fm = _require_projection(f_prime, "F'")
    n = em.shape[0]
    eps = max(op_norm(em @ (np.eye(n) - fm)), op_norm(fm @ (np.eye(n) - gm)))
    if eps >= max_eps:
        raise ValueError(f"eps = {eps:.3e} too large for nest_projection (>= {max_eps})")
    f = nest_projection_core(em, gm, fm)
    check = BoundCheck(op_norm(f.matrix - fm), 5.0 * eps, "nest_projection ||F-F'|| <= 5eps")
    return f, check


@dataclass
class TridiagPositivity:
    """Result of the tridiagonal positivity certificate."""

    positive: bool
    witness: np.ndarray          # the comparison matrix D
    witness_factor: np.ndarray   # G with G*G + |b_n|^2 e_nn = D
    min_eigenvalue: float

    def __bool__(self) -> bool:
        return self.positive


def tridiag_positive_test(m, c, d) -> TridiagPositivity:
    """Certify positivity of a Hermitian tridiagonal M with M_ii >= c_i^2+d_i^2
    and |M_{i,i+1}| <= d_i c_{i+1}.

    Builds the comparison matrix D (with factor G satisfying G*G + |b_n|^2
    e_nn = D) whose off-diagonal matches M and whose diagonal is dominated by
    M's; then M >= D >= 0.  Raises when the hypotheses fail - that is
    "test not applicable", not "not positive".
    """
    mm = as_matrix(m)
    n = mm.shape[0]
    cv = np.asarray(c, dtype=float)
    dv = np.asarray(d, dtype=float)
    if cv.shape != (n,) or dv.shape != (n,):
        raise ValueError("c, d must have one entry per row")
    if np.any(cv < 0) or np.any(dv < 0):
        raise ValueError("c, d must be nonnegative")
    if op_norm(mm - mm.conj().T) > 1e-10 * max(1.0, op_norm(mm)):
        raise ValueError("M must be Hermitian")
    band_max = float(np.max(np.triu(np.abs(mm), 2))) if n > 2 else 0.0
    if band_max > 1e-12 * max(1.0, op_norm(mm)):
        raise ValueError("M must be tridiagonal")
    diag = np.real(np.diag(mm))
    tol = 1e-12 * max(1.0, float(np.max(np.abs(mm))))
    if np.any(diag + tol < cv ** 2 + dv ** 2):
        raise ValueError("hypothesis M_ii >= c_i^2 + d_i^2 violated")
    off = np.diag(mm, 1)
    if np.any(np.abs(off) > dv[:-1] * cv[1:] + tol):
        raise ValueError("hypothesis |M_{i,i+1}| <= d_i c_{i+1} violated")

    # comparison matrix: a_i = c_i; b_i matched to M's off-diagonal phases
    a = cv.astype(np.complex128)
    b = np.zeros(n, dtype=np.complex128)
    for i in range(n - 1):
        if dv[i] * cv[i + 1] > 0 and cv[i + 1] > 0:
            b[i] = np.conj(off[i]) / cv[i + 1]
    b[n - 1] = dv[n - 1]
    dd = np.zeros((n, n), dtype=np.complex128)
    for i in range(n):
        dd[i, i] = np.abs(a[i]) ** 2 + np.abs(b[i]) ** 2
    for i in range(n - 1):
        dd[i, i + 1] = np.conj(b[i]) * a[i + 1]
        dd[i + 1, i] = np.conj(dd[i, i + 1])
    gmat = np.zeros((n, n), dtype=np.complex128)
    for k in range(n):
        gmat[k, k] = a[k]
        if k + 1 < n:
            gmat[k + 1, k] = b[k]
    ident = gmat.conj().T @ gmat
    ident[n - 1, n - 1] += np.abs(b[n - 1]) ** 2
    if op_norm(ident - dd) > 1e-10 * max(1.0, op_norm(dd)):
        raise AssertionError("witness identity G*G + b_n^2 e_nn = D failed")

    min_eig = float(np.min(np.linalg.eigvalsh((mm + mm.conj().T) / 2)))
    positive = min_eig >= -1e-10 * max(1.0, op_norm(mm))
    return TridiagPositivity(positive, dd, gmat, min_eig)


@dataclass
class InverseDecayProfile:
    """Fitted envelope |(A^{-1})_{ij}| <= C alpha^{|i-j|} for a positive
    definite tridiagonal A."""

    c: float
    alpha: float
    spectrum_lo: float
    spectrum_hi: float
    offset_maxima: np.ndarray

    def residual_table(self) -> np.ndarray:
        """Per-offset slack C alpha^m - max_{|i-j|=m} |(A^{-1})_{ij}| (>= 0)."""
        m = np.arange(self.offset_maxima.size)
        return self.c * self.alpha ** m - self.offset_maxima


def inverse_decay_profile(a) -> InverseDecayProfile:
    """Fit the smallest (C, alpha) with |(A^{-1})_{ij}| <= C alpha^{|i-j|}
    holding exactly on this instance.

    C is pinned by the diagonal maximum; alpha is the smallest rate consistent
    with every off-diagonal band given that C.
    """
    am = as_matrix(a)
    n = am.shape[0]
    band = np.triu(np.abs(am), 2)
    if band.size and np.max(band) > 1e-12 * max(1.0, op_norm(am)):
        raise ValueError("A must be tridiagonal")
    w = np.linalg.eigvalsh((am + am.conj().T) / 2)
    if w[0] <= 0:
        raise ValueError("A must be positive definite")
    inv = np.linalg.inv(am)
    offs = np.zeros(n)
    for m in range(n):
        offs[m] = float(np.max(np.abs(np.diag(inv, m))))
    c = offs[0]
    ratios = [
        (offs[m] / c) ** (1.0 / m)
        for m in range(1, n)
        if offs[m] > 0 and c > 0
    ]
    alpha = max(ratios) if ratios else 0.0
    return InverseDecayProfile(c, float(alpha), float(w[0]), float(w[-1]), offs)
