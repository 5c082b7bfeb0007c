"""Measured-vs-predicted checkers for the commutator / spectral-projection /
Lieb-Robinson inequalities.

Each checker computes both sides of its inequality and returns a BoundCheck,
so callers assert ``lhs <= rhs`` explicitly.  Set arguments are predicates on
the real line (or precomputed masks); distances between sets are evaluated on
the realized eigenvalues, which is exactly what the projections see.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .checks import BoundCheck
from .matcore import (
    HermitianEig,
    as_matrix,
    commutator,
    eig_hermitian,
    op_norm,
    spectral_projection,
)
from .smoothing import Profile, mollifier_profile

__all__ = [
    "BoundCheck",
    "check_davis_kahan",
    "check_comm_proj",
    "schur_divide",
    "check_spectral_gap",
    "fourier_commutator_bound",
    "lieb_robinson_decay",
    "lieb_robinson_function",
    "lieb_robinson_nested",
    "verify_finite_range",
    "DAVIS_KAHAN_GENERAL_C",
]

# The general-geometry Davis-Kahan constant is not pinned anywhere; this
# default is configuration, not an asserted value.  All acceptance tests use the
# sandwich form, whose constant is 1/delta.
DAVIS_KAHAN_GENERAL_C = math.pi / 2

_MOLLIFIER: Profile | None = None


def _mollifier() -> Profile:
    global _MOLLIFIER
    if _MOLLIFIER is None:
        _MOLLIFIER = mollifier_profile()
    return _MOLLIFIER


def _mask(eig: HermitianEig, s) -> np.ndarray:
    if callable(s):
        return np.array([bool(s(float(x))) for x in eig.eigenvalues])
    m = np.asarray(s, dtype=bool)
    if m.shape != eig.eigenvalues.shape:
        raise ValueError("mask length does not match eigenvalue count")
    return m


def _set_distance(vals1: np.ndarray, vals2: np.ndarray) -> float:
    if vals1.size == 0 or vals2.size == 0:
        return math.inf
    return float(np.min(np.abs(vals1[:, None] - vals2[None, :])))


def check_davis_kahan(a, b, s1, s2, delta_gap: float | None = None,
                      general_c: float = DAVIS_KAHAN_GENERAL_C) -> BoundCheck:
    """||E_{S1}(A) E_{S2}(B)|| against the Davis-Kahan sin-theta bound.

    With ``delta_gap`` the interval-sandwich form is used (S1 inside an
    interval, S2 outside its delta_gap-enlargement): rhs = ||A-B|| / delta_gap.
    Otherwise the general form with the configured constant applies.
    """
    ea, eb = eig_hermitian(a), eig_hermitian(b)
    m1, m2 = _mask(ea, s1), _mask(eb, s2)
    v1 = ea.eigenvalues[m1]
    v2 = eb.eigenvalues[m2]
    dist = _set_distance(v1, v2)
    if dist <= 0:
        raise ValueError("S1 and S2 are not disjoint on the realized spectra")
    p1 = spectral_projection(ea, m1).matrix
    p2 = spectral_projection(eb, m2).matrix
    lhs = op_norm(p1 @ p2)
    diff = op_norm(as_matrix(a) - as_matrix(b))
    if delta_gap is not None:
        if delta_gap <= 0:
            raise ValueError("delta_gap must be positive")
        if v1.size and v2.size:
            alpha, beta = float(v1.min()), float(v1.max())
            if np.any((v2 > alpha - delta_gap) & (v2 < beta + delta_gap)):
                raise ValueError("sandwich hypothesis fails: S2 intrudes within delta_gap of [alpha, beta]")
        return BoundCheck(lhs, diff / delta_gap, "davis-kahan sandwich")
    return BoundCheck(lhs, general_c * diff / dist, "davis-kahan general (configured c)")


def check_comm_proj(c, d, s1, s2) -> BoundCheck:
    """||E_{S1}(D) C E_{S2}(D)|| <= ||[C,D]|| / dist(S1, S2)."""
    ed = eig_hermitian(d)
    m1, m2 = _mask(ed, s1), _mask(ed, s2)
    dist = _set_distance(ed.eigenvalues[m1], ed.eigenvalues[m2])
    if not (dist > 0):
        raise ValueError("dist(S1, S2) must be positive")
    p1 = spectral_projection(ed, m1).matrix
    p2 = spectral_projection(ed, m2).matrix
    lhs = op_norm(p1 @ as_matrix(c) @ p2)
    if math.isinf(dist):
        return BoundCheck(lhs, 0.0 if lhs <= 0 else lhs, "comm-proj (one side empty)")
    rhs = op_norm(commutator(c, d)) / dist
    return BoundCheck(lhs, rhs, "comm-proj")


def schur_divide(t, a: Sequence[float], b: Sequence[float], d: float) -> BoundCheck:
    """||(T_ij / (a_i - b_j))|| <= ||T|| / d, given a_i - b_j >= d > 0."""
    tm = np.asarray(t, dtype=np.complex128)
    if tm.ndim != 2:
        raise ValueError("T must be a matrix")
    av = np.asarray(a, dtype=float)
    bv = np.asarray(b, dtype=float)
    if av.shape[0] != tm.shape[0] or bv.shape[0] != tm.shape[1]:
        raise ValueError("a, b lengths must match T's shape")
    gaps = av[:, None] - bv[None, :]
    if d <= 0 or np.any(gaps < d - 1e-15 * max(1.0, abs(d))):
        raise ValueError("hypothesis a_i - b_j >= d violated")
    lhs = float(np.linalg.norm(tm / gaps, 2))
    rhs = float(np.linalg.norm(tm, 2)) / d
    return BoundCheck(lhs, rhs, "schur-divide")


def check_spectral_gap(a, b, gap_lo: float, gap_hi: float,
                       mollifier: Profile | None = None) -> BoundCheck:
    """||[E_{(-inf, gap_lo]}(A), B]|| <= c2 ||[A,B]|| / (gap_hi - gap_lo) for A
    with no spectrum inside (gap_lo, gap_hi).

    c2 = 4 ||rho^||_1 for the configured mollifier: the spectral projection is
    a mollified indicator f = chi * rho_eps, whose Fourier transform is
    2pi chi^ rho_eps^ under the (1/2pi) e^{-ikx} convention, so
    C_f <= 2pi (1/pi) ||rho^||_1 / eps with eps = (gap width)/2.  (A smaller
    constant that drops the 2pi convolution factor is measurably violated on
    random instances; any valid constant here is at least 1.)"""
    if not gap_hi > gap_lo:
        raise ValueError("need gap_hi > gap_lo")
    ea = eig_hermitian(a)
    inside = (ea.eigenvalues > gap_lo) & (ea.eigenvalues < gap_hi)
    if np.any(inside):
        raise ValueError("spectrum intrudes into the declared gap")
    rho = mollifier if mollifier is not None else _mollifier()
    c2 = 4.0 * rho.c1
    p = spectral_projection(ea, ea.eigenvalues <= gap_lo).matrix
    lhs = op_norm(commutator(p, as_matrix(b)))
    rhs = c2 * op_norm(commutator(a, b)) / (gap_hi - gap_lo)
    return BoundCheck(lhs, rhs, f"spectral-gap (c2={c2:.6f})")


def fourier_commutator_bound(profile: Profile, a, b) -> BoundCheck:
    """||[f(A), B]|| <= C_f ||[A,B]|| with C_f = int |k f^(k)| dk computed by
    quadrature."""
    ea = eig_hermitian(a)
    fa = ea.matrix_function(lambda x: np.asarray(profile(x), dtype=np.complex128))
    lhs = op_norm(commutator(fa, as_matrix(b)))
    rhs = profile.c0 * op_norm(commutator(a, b))
    return BoundCheck(lhs, rhs, f"fourier-commutator (C_f={profile.c0:.6f})")


def verify_finite_range(h, eig_b: HermitianEig, delta: float,
                        tol: float = 1e-10) -> float:
    """Largest |H entry| between eigenvectors of B at eigenvalue distance >=
    Delta; raises if it exceeds tol (finite-range hypothesis is verified, not
    assumed)."""
    ht = eig_b.vectors.conj().T @ as_matrix(h) @ eig_b.vectors
    lam = eig_b.eigenvalues
    far = np.abs(lam[:, None] - lam[None, :]) >= delta
    worst = float(np.max(np.abs(ht[far]))) if np.any(far) else 0.0
    if worst > tol:
        raise ValueError(f"finite-range hypothesis fails: coupling {worst:.3e} at distance >= {delta}")
    return worst


def lieb_robinson_decay(h, b, delta: float, s1, s2, t: float) -> BoundCheck:
    """||E_{S1}(B) e^{itH} E_{S2}(B)|| <= e^{-dist(S1,S2)/Delta} for |t| up to
    dist/(e^2 Delta), given ||H|| <= 1 and verified finite range Delta."""
    hm = as_matrix(h)
    if op_norm(hm) > 1.0 + 1e-9:
        raise ValueError("need ||H|| <= 1")
    eb = eig_hermitian(b)
    verify_finite_range(hm, eb, delta)
    m1, m2 = _mask(eb, s1), _mask(eb, s2)
    dist = _set_distance(eb.eigenvalues[m1], eb.eigenvalues[m2])
    if not (dist > 0):
        raise ValueError("S1, S2 must be separated")
    v_lr = math.e ** 2 * delta
    if math.isfinite(dist) and abs(t) > dist / v_lr + 1e-12:
        raise ValueError(f"|t| = {abs(t)} exceeds dist/v_LR = {dist / v_lr}")
    eh = eig_hermitian(hm)
    u_t = eh.matrix_function(lambda x: np.exp(1j * t * x))
    p1 = spectral_projection(eb, m1).matrix
    p2 = spectral_projection(eb, m2).matrix
    lhs = op_norm(p1 @ u_t @ p2)
    rhs = math.exp(-dist / delta) if math.isfinite(dist) else 0.0
    return BoundCheck(lhs, rhs, "lieb-robinson evolution")


def lieb_robinson_function(h, b, delta: float, s1, s2, profile: Profile) -> BoundCheck:
    """||E_{S1}(B) f(H) E_{S2}(B)|| <= tail(f, dist/(e^2 Delta)) +
    ||f^||_1 e^{-dist/Delta}."""
    hm = as_matrix(h)
    if op_norm(hm) > 1.0 + 1e-9:
        raise ValueError("need ||H|| <= 1")
    eb = eig_hermitian(b)
    verify_finite_range(hm, eb, delta)
    m1, m2 = _mask(eb, s1), _mask(eb, s2)
    dist = _set_distance(eb.eigenvalues[m1], eb.eigenvalues[m2])
    if not (dist > 0 and math.isfinite(dist)):
        raise ValueError("S1, S2 must be separated and nonempty")
    eh = eig_hermitian(hm)
    fh = eh.matrix_function(lambda x: np.asarray(profile(x), dtype=np.complex128))
    p1 = spectral_projection(eb, m1).matrix
    p2 = spectral_projection(eb, m2).matrix
    lhs = op_norm(p1 @ fh @ p2)
    rhs = profile.tail(dist / (math.e ** 2 * delta)) + profile.c1 * math.exp(-dist / delta)
    return BoundCheck(lhs, rhs, "lieb-robinson function")


def lieb_robinson_nested(h, b, delta: float, s_inner, s_outer,
                         profile: Profile) -> BoundCheck:
    """||[f(H) - f(H')] E_{S''}(B)|| <= 2 tail(f, d/(e^2 Delta)) +
    3 ||f^||_1 e^{-d/Delta}, where H' = E_{S'}(B) H E_{S'}(B) and d is the
    distance from S'' to the complement of S'."""
    hm = as_matrix(h)
    if op_norm(hm) > 1.0 + 1e-9:
        raise ValueError("need ||H|| <= 1")
    eb = eig_hermitian(b)
    verify_finite_range(hm, eb, delta)
    m_in, m_out = _mask(eb, s_inner), _mask(eb, s_outer)
    if np.any(m_in & ~m_out):
        raise ValueError("S'' must be contained in S'")
    dist = _set_distance(eb.eigenvalues[m_in], eb.eigenvalues[~m_out])
    if not (dist > 0):
        raise ValueError("S'' must be separated from the complement of S'")
    p_in = spectral_projection(eb, m_in).matrix
    p_out = spectral_projection(eb, m_out).matrix
    h_prime = p_out @ hm @ p_out
    f = lambda x: np.asarray(profile(x), dtype=np.complex128)
    fh = eig_hermitian(hm).matrix_function(f)
    fhp = eig_hermitian(h_prime).matrix_function(f)
    lhs = op_norm((fh - fhp) @ p_in)
    if math.isinf(dist):
        rhs = max(lhs, 0.0)
    else:
        rhs = 2.0 * profile.tail(dist / (math.e ** 2 * delta)) + 3.0 * profile.c1 * math.exp(-dist / delta)
    return BoundCheck(lhs, rhs, "lieb-robinson nested")
