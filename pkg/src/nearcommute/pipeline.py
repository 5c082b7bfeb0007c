"""End-to-end constructors of exactly commuting pairs near almost-commuting
inputs: the Hermitian pair pipeline, the cheap few-eigenvalue construction,
the three-Hermitian corollary, and the Hermitian-unitary / gapped-unitary
variants.

The output commuting pair is produced by pinching along an explicitly built
orthogonal decomposition, so the final commutator is roundoff, never an
approximation to be tuned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .checks import BoundCheck
from .matcore import (
    as_matrix,
    commutator,
    eig_hermitian,
    op_norm,
    orthonormal_columns,
)
from .smoothing import (
    Profile,
    finite_range,
    finite_range_normal,
    normal_eig,
)
from .subspace import (
    DegenerateSystemError,
    HastingsConfig,
    LinOracle,
    hastings_W,
    szarek_W,
    verify_tridiagonal,
)

__all__ = [
    "CommuteReport",
    "choose_exponents",
    "commute_hermitian_pair",
    "cheap_commute",
    "three_hermitian",
    "commute_hermitian_unitary",
    "unitary_pair_gap",
    "cayley_to_circle",
    "cayley_to_line",
    "delta_sweep",
]

DELTA_FLOOR = 1e-16
SZAREK_BLOCK_THRESHOLD = 4


@dataclass
class CommuteReport:
    """Commuting outputs with measured distances and the per-stage log."""

    a_prime: np.ndarray
    b_prime: np.ndarray
    dist_a: float
    dist_b: float
    comm_residual: float
    stage_log: dict = field(default_factory=dict)
    checks: list[BoundCheck] = field(default_factory=list)
    c_prime: np.ndarray | None = None
    dist_c: float | None = None

    def to_json_dict(self, include_matrices: bool = False) -> dict:
        out = {
            "dist_a": self.dist_a,
            "dist_b": self.dist_b,
            "comm_residual": self.comm_residual,
            "stage_log": _jsonable(self.stage_log),
            "checks": [c.as_dict() for c in self.checks],
        }
        if self.dist_c is not None:
            out["dist_c"] = self.dist_c
        if include_matrices:
            out["a_prime"] = _encode_matrix(self.a_prime)
            out["b_prime"] = _encode_matrix(self.b_prime)
            if self.c_prime is not None:
                out["c_prime"] = _encode_matrix(self.c_prime)
        return out


def _encode_matrix(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, BoundCheck):
        return obj.as_dict()
    return obj


def choose_exponents(gamma2, finite_range_needed: bool = True):
    """Exponent bookkeeping (gamma0, gamma1, gamma) for the pipeline rates.

    With the finite-range averaging step the three error exponents balance at
    gamma = gamma2/(1 + 2 gamma2); without it (A already finite range) at
    gamma = gamma2/(1 + gamma2).  Exact over Fraction inputs.
    """
    if gamma2 <= 0:
        raise ValueError("gamma2 must be positive")
    one = gamma2 * 0 + 1  # preserves Fraction/float type
    gamma1 = gamma2 / (one + gamma2)
    if finite_range_needed:
        gamma0 = one / (one + gamma1)
        gamma = gamma2 / (one + 2 * gamma2)
    else:
        gamma0 = one
        gamma = gamma2 / (one + gamma2)
    return gamma0, gamma1, gamma


def _require_hermitian_contraction(m, name: str,
                                   defects: dict | None = None) -> np.ndarray:
    mm = as_matrix(m)
    defect = op_norm(mm - mm.conj().T) / 2
    if defect > 1e-9 * max(1.0, op_norm(mm)):
        raise ValueError(f"{name} must be Hermitian")
    if op_norm(mm) > 1.0 + 1e-9:
        raise ValueError(f"{name} must be a contraction")
    if defects is not None:
        defects[name] = defect
    return (mm + mm.conj().T) / 2


def _first_empty_subinterval(sub_ids: np.ndarray, n_sub: int) -> int | None:
    """Smallest subinterval index with no eigenvalue, or None if all occupied."""
    present = np.unique(sub_ids)
    if present.size == 0:
        return 0
    if present[0] > 0:
        return 0
    jumps = np.where(np.diff(present) > 1)[0]
    if jumps.size:
        return int(present[jumps[0]]) + 1
    if present[-1] < n_sub - 1:
        return int(present[-1]) + 1
    return None


def _interval_subspace_engine(j_block: np.ndarray, sub_ids: np.ndarray,
                              n_sub: int, engine: str, oracle: LinOracle
                              ) -> tuple[np.ndarray, dict]:
    """Run the W-engine on one interval's compressed block.

    j_block acts on the eigenvectors of B inside the interval, grouped by
    Delta-subinterval ids; returns (W basis in block coordinates, log entry).
    An empty subinterval yields the exact reducing subspace directly, without
    materializing the (possibly enormous) block list.
    """
    d = j_block.shape[0]
    log: dict = {"dim": d, "L": n_sub}
    if d == 0:
        return np.zeros((0, 0), dtype=np.complex128), log
    scale = max(1.0, op_norm(j_block))
    js = j_block / scale
    log["rescale"] = scale
    eye = np.eye(d, dtype=np.complex128)
    if n_sub < 2 or np.all(sub_ids == sub_ids[0]):
        # no room for a V_1 <= W perp V_L sandwich: keep the whole block
        log["degenerate"] = True
        log["eps2"] = 0.0
        return eye, log
    gap = _first_empty_subinterval(sub_ids, n_sub)
    if gap is not None:
        w = eye[:, sub_ids < gap]
        pw = w @ w.conj().T
        log["trivial_gap"] = gap
        log["eps2"] = op_norm((np.eye(d) - pw) @ js @ pw) * scale
        return w, log
    blocks = [eye[:, sub_ids == k] for k in range(n_sub)]
    dims = [b.shape[1] for b in blocks]
    sys = verify_tridiagonal(js, blocks)
    use = engine
    if engine == "auto":
        use = "szarek" if min(dims) <= SZAREK_BLOCK_THRESHOLD else "hastings"
    try:
        if use == "hastings":
            cfg = HastingsConfig.from_system_size(sys.L)
            cert, _ = hastings_W(sys, cfg, oracle)
        else:
            cert = szarek_W(sys)
    except (DegenerateSystemError, ValueError) as exc:
        log["degenerate"] = True
        log["reason"] = str(exc)
        log["eps2"] = 0.0
        return eye, log
    log["engine"] = use
    log["eps2"] = cert.eps2 * scale
    log["certificate"] = cert.summary()
    return cert.w_basis, log


def commute_hermitian_pair(a, b, gamma2: float = 1.0,
                           oracle: LinOracle | None = None,
                           *, engine: str = "auto",
                           profile: Profile | None = None) -> CommuteReport:
    """Construct commuting Hermitian (A', B') near almost-commuting (A, B).

    Steps: finite-range averaging of A against B at range Delta = delta^g0;
    partition of [-1,1] into n_cut = ceil(1/Delta^g1) intervals; per interval,
    a block-tridiagonal system over Delta-subintervals and a W-subspace from
    the configured engine; regrouped spaces W_i^perp + W_{i+1} carry constant
    B-values (left interval endpoints) and the pinching of H.
    """
    defects: dict = {}
    am = _require_hermitian_contraction(a, "A", defects)
    bm = _require_hermitian_contraction(b, "B", defects)
    oracle = oracle or LinOracle()
    n = am.shape[0]
    delta = op_norm(commutator(am, bm))
    g0, g1, gamma = choose_exponents(float(gamma2), True)
    delta_eff = max(delta, DELTA_FLOOR)
    big_delta = delta_eff ** g0
    n_cut = int(math.ceil(1.0 / big_delta ** g1))
    width = 2.0 / n_cut

    fr = finite_range(am, bm, big_delta, profile)
    h = fr.matrix
    checks = list(fr.checks)

    eb = eig_hermitian(bm)
    lam = eb.eigenvalues
    ids = np.minimum(np.floor((lam + 1.0) / width).astype(int), n_cut - 1)
    ids = np.maximum(ids, 0)

    occupied = sorted(set(int(i) for i in ids))
    w_bases: dict[int, np.ndarray] = {}
    wperp_bases: dict[int, np.ndarray] = {}
    interval_log: list[dict] = []
    eps2_max = 0.0
    any_degenerate = False
    for i in occupied:
        cols = eb.vectors[:, ids == i]
        d_i = cols.shape[1]
        jb = cols.conj().T @ h @ cols
        jb = (jb + jb.conj().T) / 2
        lam_i = lam[ids == i]
        lo = -1.0 + i * width
        # uniform cells of width in [Delta, 2*Delta) filling the interval
        # exactly: non-adjacent cells are then >= Delta apart even across
        # interval boundaries, so H stays tridiagonal on the global cell list
        n_sub = max(1, int(math.floor(width / big_delta)))
        sub_width = width / n_sub
        sub = np.minimum(np.floor((lam_i - lo) / sub_width).astype(int), n_sub - 1)
        sub = np.maximum(sub, 0)
        w_local, log = _interval_subspace_engine(jb, sub, n_sub, engine, oracle)
        log["interval"] = i
        interval_log.append(log)
        if log.get("degenerate"):
            any_degenerate = True
        eps2_max = max(eps2_max, log.get("eps2", 0.0))
        w_lift = cols @ w_local if w_local.shape[1] else np.zeros((n, 0), dtype=np.complex128)
        if w_local.shape[1] < d_i:
            comp = np.eye(d_i) - (w_local @ w_local.conj().T if w_local.shape[1] else 0.0)
            wp_local = orthonormal_columns(comp, tol=0.5)
            wp_lift = cols @ wp_local
        else:
            wp_lift = np.zeros((n, 0), dtype=np.complex128)
        w_bases[i + 1] = w_lift          # W_i indexed 1..n_cut over B_i = E_{I_{i-1}}
        wperp_bases[i + 1] = wp_lift

    # new basis: Btilde_j = W_j^perp + W_{j+1}, value = left endpoint of I_j
    tilde: list[tuple[float, np.ndarray]] = []
    for jdx in range(0, n_cut + 1):
        pieces = []
        if jdx in wperp_bases and wperp_bases[jdx].shape[1]:
            pieces.append(wperp_bases[jdx])
        if (jdx + 1) in w_bases and w_bases[jdx + 1].shape[1]:
            pieces.append(w_bases[jdx + 1])
        if pieces:
            value = 1.0 if jdx >= n_cut else -1.0 + jdx * width
            tilde.append((value, np.column_stack(pieces)))
    t_all = np.column_stack([basis for _, basis in tilde])
    if t_all.shape[1] != n:
        raise AssertionError("regrouped subspaces do not span the space")

    hc = t_all.conj().T @ h @ t_all
    b_prime = np.zeros((n, n), dtype=np.complex128)
    h_blocks = np.zeros((n, n), dtype=np.complex128)
    off = 0
    for value, basis in tilde:
        k = basis.shape[1]
        sl = slice(off, off + k)
        h_blocks[sl, sl] = hc[sl, sl]
        b_prime[sl, sl] = value * np.eye(k)
        off += k
    a_prime = t_all @ h_blocks @ t_all.conj().T
    a_prime = (a_prime + a_prime.conj().T) / 2
    b_prime = t_all @ b_prime @ t_all.conj().T
    b_prime = (b_prime + b_prime.conj().T) / 2

    dist_a = op_norm(am - a_prime)
    dist_b = op_norm(bm - b_prime)
    res = op_norm(commutator(a_prime, b_prime))
    checks.append(BoundCheck(dist_b, 2.0 / n_cut + 1e-10, "||B-B'|| <= 2/n_cut"))
    h_h_prime = op_norm(h - a_prime)
    if not any_degenerate:
        checks.append(BoundCheck(h_h_prime, 2.0 * eps2_max + 1e-10,
                                 "||H-H'|| <= 2 max eps2"))
    log = {
        "delta": delta,
        "Delta": big_delta,
        "n_cut": n_cut,
        "gamma0": g0,
        "gamma1": g1,
        "gamma": gamma,
        "profile": fr.profile_name,
        "symmetrization_defects": defects,
        "eps2_max": eps2_max,
        "h_to_pinched": h_h_prime,
        "degenerate_intervals": any_degenerate,
        "intervals": interval_log,
    }
    return CommuteReport(a_prime, b_prime, dist_a, dist_b, res, log, checks)


def cheap_commute(a, b, *, cluster_rtol: float = 1e-8) -> CommuteReport:
    """Few-eigenvalue construction: merge near-collisions of A's spectrum,
    project B onto the merged blocks.

    With m distinct eigenvalues (under the clustering tolerance) both
    distances are at most (m / sqrt(2)) ||[A,B]||^(1/2).
    """
    am = _require_hermitian_contraction(a, "A")
    bm = as_matrix(b)
    ea = eig_hermitian(am)
    delta = op_norm(commutator(am, bm))
    lam = ea.eigenvalues
    scale = max(1.0, float(np.max(np.abs(lam))) if lam.size else 1.0)
    # distinct eigenvalues under the clustering tolerance
    m_count = 1
    for i in range(1, lam.size):
        if lam[i] - lam[i - 1] > cluster_rtol * scale:
            m_count += 1
    thresh = math.sqrt(2.0) * math.sqrt(delta) if delta > 0 else cluster_rtol * scale
    groups: list[list[int]] = [[0]] if lam.size else []
    for i in range(1, lam.size):
        if lam[i] - lam[i - 1] <= thresh:
            groups[-1].append(i)
        else:
            groups.append([i])
    n = am.shape[0]
    a_prime = np.zeros((n, n), dtype=np.complex128)
    b_prime = np.zeros((n, n), dtype=np.complex128)
    for g in groups:
        cols = ea.vectors[:, g]
        mid = (lam[g[0]] + lam[g[-1]]) / 2.0
        p = cols @ cols.conj().T
        a_prime += mid * p
        b_prime += p @ bm @ p
    dist_a = op_norm(am - a_prime)
    dist_b = op_norm(bm - b_prime)
    bound = m_count / math.sqrt(2.0) * math.sqrt(delta)
    checks = [
        BoundCheck(dist_a, bound + 1e-12, "||A-A'|| <= (m/sqrt2) delta^(1/2)"),
        BoundCheck(dist_b, bound + 1e-12, "||B-B'|| <= (m/sqrt2) delta^(1/2)"),
    ]
    ps_reference = math.sqrt(max(m_count - 1, 0) / 2.0 * delta)
    log = {
        "delta": delta,
        "m": m_count,
        "merge_threshold": thresh,
        "groups": len(groups),
        "pearcy_shields_reference": ps_reference,
    }
    res = op_norm(commutator(a_prime, b_prime))
    return CommuteReport(a_prime, b_prime, dist_a, dist_b, res, log, checks)


def three_hermitian(a, b, c, oracle: LinOracle | None = None,
                    *, gamma2: float = 1.0) -> CommuteReport:
    """Triple repair: cluster A's spectrum, pinch B and C onto the blocks,
    then repair (B, C) inside each block with the pair pipeline."""
    am = _require_hermitian_contraction(a, "A")
    bm = _require_hermitian_contraction(b, "B")
    cm = _require_hermitian_contraction(c, "C")
    oracle = oracle or LinOracle()
    delta_ab = op_norm(commutator(am, bm))
    delta_ac = op_norm(commutator(am, cm))
    delta_a = max(delta_ab, delta_ac)
    ea = eig_hermitian(am)
    lam = ea.eigenvalues
    thresh = math.sqrt(2.0) * math.sqrt(delta_a) if delta_a > 0 else 1e-8
    groups: list[list[int]] = [[0]] if lam.size else []
    for i in range(1, lam.size):
        if lam[i] - lam[i - 1] <= thresh:
            groups[-1].append(i)
        else:
            groups.append([i])
    n = am.shape[0]
    a_prime = np.zeros((n, n), dtype=np.complex128)
    b_prime = np.zeros((n, n), dtype=np.complex128)
    c_prime = np.zeros((n, n), dtype=np.complex128)
    block_logs = []
    for g in groups:
        cols = ea.vectors[:, g]
        mid = (lam[g[0]] + lam[g[-1]]) / 2.0
        a_prime += mid * (cols @ cols.conj().T)
        b_blk = cols.conj().T @ bm @ cols
        c_blk = cols.conj().T @ cm @ cols
        b_blk = (b_blk + b_blk.conj().T) / 2
        c_blk = (c_blk + c_blk.conj().T) / 2
        if op_norm(commutator(b_blk, c_blk)) <= 1e-13 * len(g):
            # the compressed pair already commutes: keep it unchanged
            blk_b, blk_c = b_blk, c_blk
            block_logs.append({"size": len(g), "dist_b": 0.0, "dist_c": 0.0,
                               "residual": op_norm(commutator(b_blk, c_blk))})
        else:
            rep = commute_hermitian_pair(b_blk, c_blk, gamma2, oracle)
            blk_b, blk_c = rep.a_prime, rep.b_prime
            block_logs.append({"size": len(g), "dist_b": rep.dist_a,
                               "dist_c": rep.dist_b, "residual": rep.comm_residual})
        b_prime += cols @ blk_b @ cols.conj().T
        c_prime += cols @ blk_c @ cols.conj().T
    res = max(op_norm(commutator(a_prime, b_prime)),
              op_norm(commutator(a_prime, c_prime)),
              op_norm(commutator(b_prime, c_prime)))
    log = {
        "delta_ab": delta_ab,
        "delta_ac": delta_ac,
        "delta_bc": op_norm(commutator(bm, cm)),
        "clusters": len(groups),
        "blocks": block_logs,
    }
    return CommuteReport(a_prime, b_prime, op_norm(am - a_prime),
                         op_norm(bm - b_prime), res, log, [],
                         c_prime=c_prime, dist_c=op_norm(cm - c_prime))


def _require_unitary(m, name: str) -> np.ndarray:
    mm = as_matrix(m)
    n = mm.shape[0]
    if op_norm(mm.conj().T @ mm - np.eye(n)) > 1e-9:
        raise ValueError(f"{name} must be unitary")
    return mm


def commute_hermitian_unitary(a, u, gamma2: float = 1.0,
                              oracle: LinOracle | None = None,
                              *, engine: str = "auto",
                              profile: Profile | None = None) -> CommuteReport:
    """Commuting (A', U') near an almost-commuting Hermitian/unitary pair.

    The circle is cut into arcs indexed cyclically; the finite-range step uses
    the normal variant of the averaging (range sqrt(2) Delta in the plane) and
    the last regrouped space wraps around to the first.
    """
    am = _require_hermitian_contraction(a, "A")
    um = _require_unitary(u, "U")
    oracle = oracle or LinOracle()
    n = am.shape[0]
    delta = op_norm(commutator(am, um))
    g0, g1, _ = choose_exponents(float(gamma2), True)
    delta_eff = max(delta, DELTA_FLOOR)
    big_delta = delta_eff ** g0
    n_cut = max(3, int(math.ceil(1.0 / big_delta ** g1)))
    arc = 2.0 * math.pi / n_cut

    fr = finite_range_normal(am, um, big_delta, profile)
    h = fr.matrix
    checks = list(fr.checks)

    eu = normal_eig(um)
    phases = np.mod(np.angle(eu.eigenvalues), 2.0 * math.pi)
    order = np.argsort(phases)
    phases = phases[order]
    vecs = eu.vectors[:, order]
    ids = np.minimum(np.floor(phases / arc).astype(int), n_cut - 1)

    # sub-arc width: chords at two sub-arcs' separation exceed sqrt(2)*Delta
    phi_sub = 2.0 * math.asin(min(1.0, math.sqrt(2.0) * big_delta / 2.0))
    phi_sub = max(phi_sub, 1e-12)
    occupied = sorted(set(int(i) for i in ids))
    w_bases: dict[int, np.ndarray] = {}
    wperp_bases: dict[int, np.ndarray] = {}
    interval_log = []
    eps2_max = 0.0
    any_degenerate = False
    for i in occupied:
        sel = ids == i
        cols = vecs[:, sel]
        jb = cols.conj().T @ h @ cols
        jb = (jb + jb.conj().T) / 2
        ph_i = phases[sel]
        lo = i * arc
        # uniform sub-arcs at least phi_sub wide filling the arc exactly,
        # keeping H tridiagonal on the global sub-arc list (see the
        # Hermitian pipeline)
        n_sub = max(1, int(math.floor(arc / phi_sub)))
        sub_arc = arc / n_sub
        sub = np.minimum(np.floor((ph_i - lo) / sub_arc).astype(int), n_sub - 1)
        sub = np.maximum(sub, 0)
        w_local, log = _interval_subspace_engine(jb, sub, n_sub, engine, oracle)
        log["arc"] = i
        interval_log.append(log)
        if log.get("degenerate"):
            any_degenerate = True
        eps2_max = max(eps2_max, log.get("eps2", 0.0))
        d_i = cols.shape[1]
        w_lift = cols @ w_local if w_local.shape[1] else np.zeros((n, 0), dtype=np.complex128)
        if w_local.shape[1] < d_i:
            comp = np.eye(d_i) - (w_local @ w_local.conj().T if w_local.shape[1] else 0.0)
            wp_lift = cols @ orthonormal_columns(comp, tol=0.5)
        else:
            wp_lift = np.zeros((n, 0), dtype=np.complex128)
        w_bases[i + 1] = w_lift
        wperp_bases[i + 1] = wp_lift

    tilde: list[tuple[complex, np.ndarray]] = []
    for jdx in range(1, n_cut + 1):
        pieces = []
        if jdx in wperp_bases and wperp_bases[jdx].shape[1]:
            pieces.append(wperp_bases[jdx])
        nxt = jdx + 1 if jdx < n_cut else 1  # cyclic wrap
        if nxt in w_bases and w_bases[nxt].shape[1]:
            pieces.append(w_bases[nxt])
        if pieces:
            value = np.exp(1j * arc * jdx)
            tilde.append((value, np.column_stack(pieces)))
    t_all = np.column_stack([basis for _, basis in tilde])
    if t_all.shape[1] != n:
        raise AssertionError("regrouped arc subspaces do not span the space")
    hc = t_all.conj().T @ h @ t_all
    u_prime = np.zeros((n, n), dtype=np.complex128)
    h_blocks = np.zeros((n, n), dtype=np.complex128)
    off = 0
    for value, basis in tilde:
        k = basis.shape[1]
        sl = slice(off, off + k)
        h_blocks[sl, sl] = hc[sl, sl]
        u_prime[sl, sl] = value * np.eye(k)
        off += k
    a_prime = t_all @ h_blocks @ t_all.conj().T
    a_prime = (a_prime + a_prime.conj().T) / 2
    u_prime = t_all @ u_prime @ t_all.conj().T

    dist_a = op_norm(am - a_prime)
    dist_u = op_norm(um - u_prime)
    res = op_norm(commutator(a_prime, u_prime))
    checks.append(BoundCheck(dist_u, 2.0 * math.sin(min(arc / 2.0, math.pi / 2)) + 1e-10,
                             "||U-U'|| <= chord of one arc width"))
    log = {
        "delta": delta,
        "Delta": big_delta,
        "n_cut": n_cut,
        "arc_width": arc,
        "eps2_max": eps2_max,
        "degenerate_intervals": any_degenerate,
        "intervals": interval_log,
    }
    return CommuteReport(a_prime, u_prime, dist_a, dist_u, res, log, checks)


def cayley_to_line(z):
    """g(z) = i (1+z)/(1-z): circle minus {1} to the real line."""
    z = np.asarray(z, dtype=np.complex128)
    return 1j * (1.0 + z) / (1.0 - z)


def cayley_to_circle(x):
    """f(x) = (x-i)/(x+i): real line to the unit circle; inverse of
    cayley_to_line."""
    x = np.asarray(x, dtype=np.complex128)
    return (x - 1j) / (x + 1j)


def unitary_pair_gap(u, v, theta: float | None = None,
                     oracle: LinOracle | None = None,
                     *, gamma2: float = 1.0) -> CommuteReport:
    """Commuting unitaries near (U, V) when V has a spectral arc gap.

    V is rotated so the largest gap sits at 1, mapped to a Hermitian W by the
    Cayley transform, repaired against U, and mapped back.
    """
    um = _require_unitary(u, "U")
    vm = _require_unitary(v, "V")
    oracle = oracle or LinOracle()
    ev = normal_eig(vm)
    phases = np.sort(np.mod(np.angle(ev.eigenvalues), 2.0 * math.pi))
    gaps = np.diff(np.concatenate([phases, [phases[0] + 2.0 * math.pi]]))
    k = int(np.argmax(gaps))
    gap_width = float(gaps[k])
    theta_detected = gap_width / 2.0
    # a usable gap must stand out from the typical spacing, not just exist
    typical = float(np.median(gaps)) if gaps.size > 1 else 0.0
    if theta_detected < 1e-6 or gap_width < 3.0 * typical:
        raise ValueError("no detectable spectral gap on the circle")
    if theta is None:
        theta = theta_detected
    elif theta > theta_detected + 1e-12:
        raise ValueError(f"requested gap radius {theta} exceeds detected {theta_detected}")
    gap_center = float(phases[k] + gap_width / 2.0)
    # rotate so the gap midpoint lands at phase 0 (the point 1 on the circle)
    rot = complex(np.exp(-1j * gap_center))
    v_rot = rot * vm

    w = cayley_matrix_to_line(v_rot)
    delta_uv = op_norm(commutator(um, vm))
    comm_check = BoundCheck(op_norm(commutator(um, w)),
                            delta_uv / (1.0 - math.cos(theta)) + 1e-12,
                            "||[U,W]|| <= ||[U,V]||/(1-cos theta)")
    scale = max(1.0, op_norm(w))
    rep = commute_hermitian_unitary(w / scale, um, gamma2, oracle)
    w_prime = scale * rep.a_prime
    u_prime = rep.b_prime
    v_prime = cayley_matrix_to_circle(w_prime) / rot
    dist_w = op_norm(w - w_prime)
    v_check = BoundCheck(op_norm(vm - v_prime), 2.0 * dist_w + 1e-12,
                         "||V-V'|| <= 2||W-W'||")
    res = op_norm(commutator(u_prime, v_prime))
    log = {
        "theta_detected": theta_detected,
        "theta": theta,
        "gap_center": gap_center,
        "w_norm": op_norm(w),
        "w_rescale": scale,
        "dist_w": dist_w,
        "inner": rep.stage_log,
    }
    return CommuteReport(u_prime, v_prime, op_norm(um - u_prime),
                         op_norm(vm - v_prime), res, log,
                         [comm_check, v_check] + rep.checks)


def cayley_matrix_to_line(v: np.ndarray) -> np.ndarray:
    """W = i (1 + V)(1 - V)^{-1} for unitary V without spectrum at 1."""
    n = v.shape[0]
    w = 1j * (np.eye(n) + v) @ np.linalg.inv(np.eye(n) - v)
    return (w + w.conj().T) / 2


def cayley_matrix_to_circle(w: np.ndarray) -> np.ndarray:
    """V = f(W) = (W - i)(W + i)^{-1} for Hermitian W (via eigendecomposition)."""
    ew = eig_hermitian(w, rtol=1e-8)
    return ew.matrix_function(lambda x: (x - 1j) / (x + 1j))


def delta_sweep(a0, b0, perturbation, deltas: Sequence[float],
                gamma2: float = 1.0, oracle: LinOracle | None = None) -> list[dict]:
    """Run the pair pipeline on (A0 + t G)/(1+t) for a scaled perturbation G,
    one row per requested commutator size.

    A0, B0 must commute; the scaling t is chosen so the measured ||[A,B]||
    matches each requested delta.
    """
    a0 = _require_hermitian_contraction(a0, "A0")
    b0 = _require_hermitian_contraction(b0, "B0")
    g = as_matrix(perturbation)
    g = (g + g.conj().T) / 2
    gn = op_norm(g)
    if gn > 0:
        g = g / gn
    if op_norm(commutator(a0, b0)) > 1e-10:
        raise ValueError("base pair must commute")
    base = op_norm(commutator(g, b0))
    if base <= 0:
        raise ValueError("perturbation commutes with B0; sweep is empty")
    rows = []
    for want in deltas:
        t = want / base
        a = (a0 + t * g) / (1.0 + t)
        rep = commute_hermitian_pair(a, b0, gamma2, oracle)
        rows.append({
            "delta": rep.stage_log["delta"],
            "requested_delta": want,
            "dist_a": rep.dist_a,
            "dist_b": rep.dist_b,
            "eps2_max": rep.stage_log["eps2_max"],
            "n_cut": rep.stage_log["n_cut"],
            "comm_residual": rep.comm_residual,
        })
    return rows
