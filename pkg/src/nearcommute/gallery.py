"""Counterexample generators, the winding-number obstruction, the
quarter-tridiagonal leakage example, and macroscopic-observable (tensor-lift)
operators with their exact identities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matcore import (
    as_matrix,
    commutator,
    eig_hermitian,
    op_norm,
)
from .subspace import joint_jacobi

__all__ = [
    "voiculescu",
    "WindingResult",
    "winding_number",
    "quarter_tridiag",
    "tn_lift",
    "tn_identities",
    "adjacent_transposition_rep",
    "joint_diag_objective",
    "minimize_joint_diag",
]

DIMENSION_BUDGET = 4096


def voiculescu(n: int) -> tuple[np.ndarray, np.ndarray]:
    """The standard almost-commuting unitary pair: the root-of-unity diagonal
    and the cyclic shift.  ||[U_n, V_n]|| = |1 - omega_n|."""
    if n < 1:
        raise ValueError("n must be >= 1")
    omega = np.exp(2j * math.pi / n)
    u = np.diag(omega ** np.arange(1, n + 1))
    v = np.zeros((n, n), dtype=np.complex128)
    for j in range(n):
        v[(j + 1) % n, j] = 1.0
    return u, v


@dataclass
class WindingResult:
    """Integer winding of the determinant path, with a stability flag set only
    when halving the step leaves the value unchanged and the path stays away
    from zero."""

    winding: int
    min_abs: float
    steps: int
    stable: bool


def _r_loop(u, v, steps: int) -> np.ndarray:
    """det((1-r) UV + r VU) over r in [0,1]; a closed loop since
    det(UV) = det(VU)."""
    uv = u @ v
    vu = v @ u
    rs = np.linspace(0.0, 1.0, steps + 1)
    return np.asarray([complex(np.linalg.det((1 - r) * uv + r * vu)) for r in rs])


def _loop_winding(points: np.ndarray) -> tuple[float, float]:
    min_abs = float(np.min(np.abs(points)))
    if min_abs < 1e-12:
        return 0.0, min_abs
    args = np.angle(points)
    d = np.diff(args)
    d = (d + math.pi) % (2 * math.pi) - math.pi
    return float(np.sum(d)) / (2 * math.pi), min_abs


def _square_winding(u, v, u2, v2, steps: int) -> tuple[int, float]:
    """Argument accumulation of det((1-r)U(t)V(t) + rV(t)U(t)) around the
    boundary of the (t, r) square.

    The two t-edges traverse det(U(t)V(t)) = det(V(t)U(t)) in opposite
    directions and cancel exactly, so the boundary total equals the r-loop
    winding at t=0 minus the r-loop winding at t=1; computing it that way
    avoids sampling the (possibly singular) straight-line edge."""
    w0, m0 = _loop_winding(_r_loop(u, v, steps))
    w1, m1 = _loop_winding(_r_loop(u2, v2, steps))
    return int(round(w0 - w1)), min(m0, m1)


def winding_number(u, v, u2, v2, steps: int = 256) -> WindingResult:
    """Winding of det((1-r)UV + rVU) around the homotopy square from (U, V)
    to the commuting pair (U2, V2).

    A nonzero stable value obstructs deforming (U, V) to (U2, V2) through
    pairs whose determinant loop avoids zero.  Loops passing within 1e-12 of
    zero clear the stability flag instead of guessing a branch.
    """
    if op_norm(commutator(u2, v2)) > 1e-10 * max(1.0, op_norm(u2) * op_norm(v2)):
        raise ValueError("(U2, V2) must commute")
    u, v, u2, v2 = (as_matrix(m) for m in (u, v, u2, v2))
    w1, m1 = _square_winding(u, v, u2, v2, steps)
    w2, m2 = _square_winding(u, v, u2, v2, 2 * steps)
    min_abs = min(m1, m2)
    stable = (w1 == w2) and min_abs >= 1e-12
    return WindingResult(w2, min_abs, steps, stable)


def quarter_tridiag(n: int) -> tuple[np.ndarray, np.ndarray]:
    """The tridiagonal matrix with 1/4 couplings and a 1/2 corner, plus the
    leakage vector: the spectral window [5/8 - 1/100, 5/8 + 1/100] applied to
    the first basis vector.

    The isolated top eigenvector decays by a factor ~2 per site away from the
    corner, so the leakage is tiny in norm but concentrated at the far end.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    j = np.zeros((n, n))
    for i in range(n - 1):
        j[i, i + 1] = 0.25
        j[i + 1, i] = 0.25
    j[n - 1, n - 1] = 0.5
    eig = eig_hermitian(j)
    window = (eig.eigenvalues >= 5 / 8 - 0.01) & (eig.eigenvalues <= 5 / 8 + 0.01)
    cols = eig.vectors[:, window]
    leak = cols @ (cols.conj().T @ np.eye(n)[:, 0])
    return j, np.real(leak)


def tn_lift(a, big_n: int, *, budget: int = DIMENSION_BUDGET) -> np.ndarray:
    """Macroscopic observable: the normalized sum of A acting on each tensor
    factor of an N-fold product."""
    am = as_matrix(a)
    n = am.shape[0]
    if big_n < 1:
        raise ValueError("N must be >= 1")
    if n ** big_n > budget:
        raise ValueError(f"dimension {n}^{big_n} exceeds the budget {budget}")
    dim = n ** big_n
    out = np.zeros((dim, dim), dtype=np.complex128)
    for k in range(big_n):
        term = np.eye(n ** (big_n - 1 - k), dtype=np.complex128)
        term = np.kron(term, am)
        term = np.kron(term, np.eye(n ** k, dtype=np.complex128))
        out += term
    return out / big_n


def adjacent_transposition_rep(n: int, big_n: int, k: int) -> np.ndarray:
    """Permutation matrix swapping tensor factors k and k+1 of (C^n)^{x N}."""
    if not (0 <= k < big_n - 1):
        raise ValueError("need 0 <= k < N-1")
    dim = n ** big_n
    perm = np.zeros((dim, dim))
    for idx in range(dim):
        digits = []
        rest = idx
        for _ in range(big_n):
            digits.append(rest % n)
            rest //= n
        digits[k], digits[k + 1] = digits[k + 1], digits[k]
        jdx = sum(d * n ** p for p, d in enumerate(digits))
        perm[jdx, idx] = 1.0
    return perm


def tn_identities(a, b, big_n: int, *, budget: int = DIMENSION_BUDGET) -> dict:
    """Residuals of the exact tensor-lift identities.

    commutator: [T_N(A), T_N(B)] = (1/N) T_N([A,B]); recursion: T_{N+1} from
    T_N; covariance: T_N(UAU*) = U^{xN} T_N(A) (U*)^{xN}; the norm sandwich
    ||A||/2 <= ||T_N(A)|| <= ||A||; and commutation with the symmetric-group
    representation (adjacent transpositions generate it).
    """
    am, bm = as_matrix(a), as_matrix(b)
    n = am.shape[0]
    ta = tn_lift(am, big_n, budget=budget)
    tb = tn_lift(bm, big_n, budget=budget)
    comm_res = op_norm(commutator(ta, tb) - tn_lift(commutator(am, bm), big_n, budget=budget) / big_n)
    rec_res = None
    if n ** (big_n + 1) <= budget:
        # exact append-site recursion carrying the N/(N+1) prefactor
        lhs = tn_lift(am, big_n + 1, budget=budget)
        rhs = (big_n / (big_n + 1)) * np.kron(ta, np.eye(n)) \
            + np.kron(np.eye(n ** big_n, dtype=np.complex128), am) / (big_n + 1)
        rec_res = op_norm(lhs - rhs)
    rng = np.random.default_rng(721)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    u_small = q * (np.diag(r) / np.abs(np.diag(r)))
    u_big = np.eye(1, dtype=np.complex128)
    for _ in range(big_n):
        u_big = np.kron(u_big, u_small)
    cov_res = op_norm(tn_lift(u_small @ am @ u_small.conj().T, big_n, budget=budget)
                      - u_big @ ta @ u_big.conj().T)
    norm_a = op_norm(am)
    norm_ta = op_norm(ta)
    perm_res = 0.0
    for k in range(big_n - 1):
        p = adjacent_transposition_rep(n, big_n, k)
        perm_res = max(perm_res, op_norm(commutator(ta, p)))
    return {
        "dim": n ** big_n,
        "commutator_residual": comm_res,
        "recursion_residual": rec_res,
        "covariance_residual": cov_res,
        "norm_A": norm_a,
        "norm_TN": norm_ta,
        "norm_sandwich_ok": (norm_a / 2 - 1e-12 <= norm_ta <= norm_a + 1e-12),
        "permutation_residual": perm_res,
    }


def joint_diag_objective(a, b, u) -> float:
    """max over the pair of the off-diagonal operator norm after conjugating
    by a unitary."""
    am, bm, um = as_matrix(a), as_matrix(b), as_matrix(u)
    n = am.shape[0]
    if op_norm(um.conj().T @ um - np.eye(n)) > 1e-8:
        raise ValueError("U must be unitary")
    vals = []
    for m in (am, bm):
        r = um @ m @ um.conj().T
        vals.append(op_norm(r - np.diag(np.diag(r))))
    return max(vals)


def minimize_joint_diag(a, b, *, sweeps: int = 100) -> tuple[np.ndarray, float]:
    """Jacobi-sweep descent of the joint near-diagonality objective.

    Returns (U, value) with value = joint_diag_objective(a, b, U); the
    objective is exactly 0 for commuting pairs.
    """
    am, bm = as_matrix(a), as_matrix(b)
    u, _ = joint_jacobi([am, bm], sweeps=sweeps)
    u_conj = u.conj().T
    return u_conj, joint_diag_objective(am, bm, u_conj)
