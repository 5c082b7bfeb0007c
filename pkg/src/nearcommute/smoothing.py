"""Profile functions, smooth partitions of unity, numerically computed Fourier
constants and tails, and finite-range averaging.

A Profile is a real, even, compactly supported window function together with
its numerically computed Fourier data: the constants c0 = int |k f^(k)| dk and
c1 = int |f^(k)| dk and the tail function tail(c) = int_{|k|>=c} |f^(k)| dk.
The Fourier convention is f^(k) = (1/2pi) int f(x) e^{-ikx} dx, so c1 >= f(0).

Everything is quadrature: constants are never assumed, and each value carries
a refinement-halving error estimate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .checks import BoundCheck
from .matcore import (
    NormalEig,
    as_matrix,
    commutator,
    eig_hermitian,
    op_norm,
)

__all__ = [
    "SmoothStep",
    "Profile",
    "make_smooth_step",
    "smooth_profile",
    "poly_bump_profile",
    "indicator_profile",
    "mollifier_profile",
    "profile_constants",
    "partition_of_unity",
    "FiniteRangeResult",
    "finite_range",
    "finite_range_multi",
    "finite_range_normal",
    "joint_eigh",
    "normal_eig",
    "TailTable",
    "tail_tables",
    "default_G",
    "default_F",
]

FOURIER_GRID = 2 ** 16
SPAN_FACTOR = 64.0  # spatial zero-padding factor; sets k-resolution 2*pi/(span*support)


class QuadratureDivergence(RuntimeError):
    """Raised when a Fourier integral shows no sign of converging."""


class SmoothStep:
    """The base ramp F on [0,1]: smooth, strictly decreasing, F(0)=1, F(1)=0,
    flat to all orders at both ends, and F(x) + F(1-x) = 1."""

    @staticmethod
    def _g(x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x, dtype=float)
        pos = x > 0
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            out[pos] = np.exp(-1.0 / x[pos])
        return out

    def __call__(self, x) -> np.ndarray | float:
        t = np.asarray(x, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(np.clip(t, 0.0, 1.0))
        g1 = self._g(1.0 - t)
        g2 = self._g(t)
        val = g1 / (g1 + g2)
        return float(val[0]) if scalar else val


def make_smooth_step() -> SmoothStep:
    """Base profile used by every smooth window in this module."""
    return SmoothStep()


_BASE_STEP = make_smooth_step()


@dataclass
class _FourierData:
    k: np.ndarray            # ascending angular frequency grid
    fhat_abs: np.ndarray     # |f^(k)| on the grid
    c0: float
    c1: float
    c0_err: float
    c1_err: float
    tail_beyond_grid: float  # Sobolev-style estimate of int_{|k|>kmax}|f^|
    _cum_from_top: np.ndarray = field(repr=False, default=None)

    @property
    def kmax(self) -> float:
        return float(self.k[-1])

    def tail(self, c: float) -> float:
        """int_{|k| >= c} |f^(k)| dk (symmetric grid; adds the off-grid estimate)."""
        if self._cum_from_top is None:
            half = self.k >= 0
            kk = self.k[half]
            vv = self.fhat_abs[half]
            seg = 0.5 * (vv[1:] + vv[:-1]) * np.diff(kk)
            cum = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
            self._cum_from_top = (kk, 2.0 * cum)
        kk, cum = self._cum_from_top
        if c <= 0:
            return self.c1
        if c >= kk[-1]:
            return self.tail_beyond_grid
        return float(np.interp(c, kk, cum)) + self.tail_beyond_grid


def _dft_abs(fn: Callable, radius: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """|f^| on the symmetric k-grid from an n-point discrete transform."""
    span = SPAN_FACTOR * radius
    dx = span / n
    x = -span / 2.0 + dx * np.arange(n)
    fx = np.asarray(fn(x), dtype=float)
    sign = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    fhat = (dx / (2.0 * math.pi)) * sign * np.fft.fft(fx)
    k = 2.0 * math.pi * np.fft.fftfreq(n, d=dx)
    order = np.argsort(k)
    return k[order], np.abs(fhat[order])


def _sobolev_tail(k: np.ndarray, fa: np.ndarray, cutoff: float) -> float:
    """H^n estimate of the un-gridded tail int_{|k|>cutoff}|f^| (best n in 1..3)."""
    best = math.inf
    for n in (1, 2, 3):
        l2 = math.sqrt(float(np.trapezoid(fa ** 2, k)))
        l2n = math.sqrt(float(np.trapezoid((np.abs(k) ** n * fa) ** 2, k)))
        est = (l2 + l2n) * math.sqrt(2.0 / (2 * n - 1)) / cutoff ** (n - 0.5)
        best = min(best, est)
    return best


def _octave_divergence(k: np.ndarray, integrand: np.ndarray) -> bool:
    """True when the top octaves of int integrand dk keep growing (divergence)."""
    half = k > 0
    kk, vv = k[half], integrand[half]
    kmax = kk[-1]
    contrib = []
    for j in range(6):
        lo, hi = kmax / 2 ** (j + 1), kmax / 2 ** j
        m = (kk >= lo) & (kk < hi)
        contrib.append(float(np.trapezoid(vv[m], kk[m])) if np.any(m) else 0.0)
    contrib = contrib[::-1]  # ascending octaves
    total = float(np.trapezoid(vv, kk))
    top3 = contrib[-3:]
    growing = all(top3[i + 1] >= 0.9 * top3[i] for i in range(2))
    return growing and top3[-1] > 0.02 * max(total, 1e-300)


class Profile:
    """A window f with flat radius r, ramp width w, center omega0.

    f is identically 1 on [omega0-r, omega0+r], even about omega0, supported in
    [omega0-r-w, omega0+r+w], with 0 <= f <= 1.  Fourier data (which does not
    depend on omega0) is computed on demand and cached.
    """

    def __init__(self, fn: Callable, r: float, w: float, omega0: float = 0.0,
                 name: str = "", smooth: bool = True):
        self._fn = fn   # centered at 0
        self.r = float(r)
        self.w = float(w)
        self.omega0 = float(omega0)
        self.name = name or f"profile(r={r},w={w})"
        self.smooth = smooth
        self._fourier: _FourierData | None = None

    # -- evaluation ---------------------------------------------------------
    @property
    def support_radius(self) -> float:
        return self.r + self.w

    def __call__(self, x) -> np.ndarray | float:
        t = np.asarray(x, dtype=float) - self.omega0
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out = np.where(np.abs(t) >= self.support_radius, 0.0, self._fn(t))
        return float(out[0]) if scalar else out

    def shifted(self, omega0: float) -> "Profile":
        return Profile(self._fn, self.r, self.w, omega0,
                       name=f"{self.name}@{omega0:g}", smooth=self.smooth)

    # -- Fourier data -------------------------------------------------------
    @property
    def fourier(self) -> _FourierData:
        if self._fourier is None:
            self._fourier = self._compute_fourier()
        return self._fourier

    def _compute_fourier(self) -> _FourierData:
        rad = self.support_radius
        k1, fa1 = _dft_abs(self._fn, rad, FOURIER_GRID)
        k2, fa2 = _dft_abs(self._fn, rad, FOURIER_GRID // 2)
        c1 = float(np.trapezoid(fa1, k1))
        c0 = float(np.trapezoid(np.abs(k1) * fa1, k1))
        # refinement-halving comparison restricted to the shared |k| range
        kcut = k2[-1]
        m = np.abs(k1) <= kcut
        c1_half = float(np.trapezoid(fa2, k2))
        c0_half = float(np.trapezoid(np.abs(k2) * fa2, k2))
        c1_err = abs(float(np.trapezoid(fa1[m], k1[m])) - c1_half)
        c0_err = abs(float(np.trapezoid(np.abs(k1[m]) * fa1[m], k1[m])) - c0_half)
        tail_est = _sobolev_tail(k1, fa1, k1[-1])
        if _octave_divergence(k1, np.abs(k1) * fa1):
            raise QuadratureDivergence(
                f"c0 integral for {self.name} is not converging (discontinuous profile?)"
            )
        return _FourierData(k1, fa1, c0, c1, c0_err + tail_est * k1[-1],
                            c1_err + tail_est, tail_est)

    @property
    def c0(self) -> float:
        return self.fourier.c0

    @property
    def c1(self) -> float:
        return self.fourier.c1

    def tail(self, c: float) -> float:
        return self.fourier.tail(c)

    @property
    def samples(self) -> np.ndarray:
        """Uniform grid samples of f over its (centered) support."""
        rad = self.support_radius
        x = np.linspace(-rad, rad, 4097)
        return np.asarray(self._fn(x), dtype=float)


def smooth_profile(r: float, w: float, omega0: float = 0.0) -> Profile:
    """The standard window: 1 on the radius-r core, SmoothStep ramp of width w."""
    if w <= 0 or r < 0:
        raise ValueError("need w > 0 and r >= 0")

    def fn(t, _r=r, _w=w):
        a = np.abs(np.asarray(t, dtype=float))
        ramp = _BASE_STEP(np.clip((a - _r) / _w, 0.0, 1.0))
        return np.where(a <= _r, 1.0, np.where(a >= _r + _w, 0.0, ramp))

    return Profile(fn, r, w, omega0, name=f"F[{r:g},{w:g}]", smooth=True)


def poly_bump_profile() -> Profile:
    """f(x) = (1 - x^2)^3 on [-1, 1]: the default finite-range averaging profile."""

    def fn(t):
        a = np.asarray(t, dtype=float)
        return np.where(np.abs(a) >= 1.0, 0.0, (1.0 - a ** 2) ** 3)

    return Profile(fn, 0.0, 1.0, 0.0, name="(1-x^2)^3", smooth=False)


def indicator_profile(radius: float = 1.0) -> Profile:
    """Sharp indicator window; its c0 integral diverges (used to exercise the
    divergence flag)."""

    def fn(t, _r=radius):
        return np.where(np.abs(np.asarray(t, dtype=float)) <= _r, 1.0, 0.0)

    return Profile(fn, radius, 1e-12, 0.0, name=f"chi[{radius:g}]", smooth=False)


def mollifier_profile() -> Profile:
    """Normalized bump exp(-1/(1-x^2)) on [-1,1] with unit integral."""

    def raw(t):
        a = np.asarray(t, dtype=float)
        out = np.zeros_like(a)
        inside = np.abs(a) < 1.0
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            out[inside] = np.exp(-1.0 / (1.0 - a[inside] ** 2))
        return out

    x = np.linspace(-1.0, 1.0, 200001)
    mass = float(np.trapezoid(raw(x), x))

    def fn(t, _m=mass):
        return raw(t) / _m

    return Profile(fn, 0.0, 1.0, 0.0, name="bump-mollifier", smooth=True)


def profile_constants(profile: Profile) -> tuple[float, float]:
    """(c0, c1) for a profile, by quadrature with refinement-halving error
    certification.  Raises QuadratureDivergence when c0 does not converge."""
    f = profile.fourier
    return f.c0, f.c1


def partition_of_unity(n_win: int) -> list[Profile]:
    """Windows F[0, 2/n_win] centered at -1 + 2*i/n_win, i = 0..n_win.

    Their pointwise sum is identically 1 on [-1, 1]; windows two apart have
    disjoint supports.
    """
    if n_win < 2:
        raise ValueError("need n_win >= 2")
    kappa = 2.0 / n_win
    base = smooth_profile(0.0, kappa)
    return [base.shifted(-1.0 + kappa * i) for i in range(n_win + 1)]


# ---------------------------------------------------------------------------
# Commuting families / normal matrices
# ---------------------------------------------------------------------------

def joint_eigh(mats: Sequence[np.ndarray], *, comm_tol: float = 1e-10
               ) -> tuple[np.ndarray, np.ndarray]:
    """Simultaneously diagonalize a commuting Hermitian family.

    Returns (V, lam) with V unitary and lam[j] the eigenvalues of mats[j] in
    the shared basis; refines degenerate clusters one matrix at a time so the
    result is deterministic.
    """
    ms = [as_matrix(m) for m in mats]
    n = ms[0].shape[0]
    scale = max([op_norm(m) for m in ms] + [1.0])
    for i in range(len(ms)):
        for j in range(i + 1, len(ms)):
            c = op_norm(commutator(ms[i], ms[j]))
            if c > comm_tol * max(1.0, scale ** 2):
                raise ValueError(f"family not commuting: ||[B_{i},B_{j}]|| = {c:.3e}")
    v = np.eye(n, dtype=np.complex128)
    lams = np.zeros((len(ms), n))
    clusters: list[np.ndarray] = [np.arange(n)]
    for j, m in enumerate(ms):
        new_clusters: list[np.ndarray] = []
        for idx in clusters:
            sub = v[:, idx]
            comp = sub.conj().T @ m @ sub
            eig = eig_hermitian((comp + comp.conj().T) / 2, rtol=1e-6)
            v[:, idx] = sub @ eig.vectors
            lams[j, idx] = eig.eigenvalues
            # split the cluster by the new eigenvalues
            w = eig.eigenvalues
            start = 0
            for t in range(1, len(idx) + 1):
                if t == len(idx) or w[t] - w[t - 1] > 1e-8 * max(1.0, scale):
                    new_clusters.append(idx[start:t])
                    start = t
        clusters = new_clusters
    return v, lams


def normal_eig(n_mat: np.ndarray, *, tol: float = 1e-10) -> NormalEig:
    """Eigendecomposition of a normal matrix via its commuting real/imaginary
    parts."""
    m = as_matrix(n_mat)
    defect = op_norm(commutator(m, m.conj().T))
    scale = max(op_norm(m), 1.0)
    if defect > tol * scale ** 2:
        raise ValueError(f"matrix is not normal: ||[N,N*]|| = {defect:.3e}")
    re = (m + m.conj().T) / 2
    im = (m - m.conj().T) / 2j
    v, lams = joint_eigh([re, im])
    return NormalEig(lams[0] + 1j * lams[1], v)


# ---------------------------------------------------------------------------
# Finite-range averaging
# ---------------------------------------------------------------------------

@dataclass
class FiniteRangeResult:
    """Output of a finite-range construction: the matrix H plus the asserted
    distance/commutator bounds."""

    matrix: np.ndarray
    checks: list[BoundCheck]
    delta: float
    profile_name: str

    def require(self) -> "FiniteRangeResult":
        for c in self.checks:
            c.require()
        return self


def _require_averaging_profile(profile: Profile | None) -> Profile:
    p = profile if profile is not None else poly_bump_profile()
    if p.support_radius > 1.0 + 1e-12:
        raise ValueError("averaging profile must be supported in [-1, 1]")
    if abs(float(p(p.omega0)) - 1.0) > 1e-12:
        raise ValueError("averaging profile must satisfy f(0) = 1")
    return p


def finite_range(a, b, delta: float, profile: Profile | None = None) -> FiniteRangeResult:
    """Replace A by an H that is finite range Delta with respect to B.

    In B's eigenbasis H has entries A_{lm} * f((l - m)/Delta); consequently
    E_{S1}(B) H E_{S2}(B) = 0 exactly whenever dist(S1, S2) >= Delta, and
    ||A - H|| <= (c0/Delta) ||[A,B]||, ||[H,B]|| <= c1 ||[A,B]||.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    p = _require_averaging_profile(profile)
    a = as_matrix(a)
    eb = eig_hermitian(b)
    at = eb.vectors.conj().T @ a @ eb.vectors
    lam = eb.eigenvalues
    mult = p((lam[:, None] - lam[None, :]) / delta)
    h = eb.vectors @ (at * mult) @ eb.vectors.conj().T
    h = (h + h.conj().T) / 2
    b = as_matrix(b)
    comm = op_norm(commutator(a, b))
    checks = [
        BoundCheck(op_norm(a - h), (p.c0 / delta) * comm, "finite_range ||A-H|| <= (c0/Delta)||[A,B]||"),
        BoundCheck(op_norm(commutator(h, b)), p.c1 * comm,
                   "finite_range ||[H,B]|| <= c1||[A,B]||"),
    ]
    return FiniteRangeResult(h, checks, delta, p.name)


def finite_range_multi(a, bs: Sequence[np.ndarray], delta: float,
                       profile: Profile | None = None) -> FiniteRangeResult:
    """Finite-range construction against a commuting Hermitian family, using
    the product multiplier in the joint eigenbasis."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    p = _require_averaging_profile(profile)
    a = as_matrix(a)
    v, lams = joint_eigh(bs)
    at = v.conj().T @ a @ v
    mult = np.ones_like(at, dtype=float)
    for j in range(lams.shape[0]):
        lam = lams[j]
        mult = mult * p((lam[:, None] - lam[None, :]) / delta)
    h = v @ (at * mult) @ v.conj().T
    h = (h + h.conj().T) / 2
    m = lams.shape[0]
    comms = [op_norm(commutator(a, as_matrix(b))) for b in bs]
    checks = [
        BoundCheck(op_norm(a - h), (p.c0 * p.c1 ** (m - 1) / delta) * sum(comms),
                   "finite_range_multi ||A-H||"),
    ]
    for j, b in enumerate(bs):
        checks.append(BoundCheck(op_norm(commutator(h, as_matrix(b))),
                                 p.c1 ** m * comms[j],
                                 f"finite_range_multi ||[H,B_{j}]||"))
    return FiniteRangeResult(h, checks, delta, p.name)


def finite_range_normal(a, n_mat, delta: float,
                        profile: Profile | None = None) -> FiniteRangeResult:
    """Finite-range construction against a normal matrix N, via its commuting
    real/imaginary parts.  The spectral cut-off in the complex plane is
    sqrt(2) * Delta."""
    p = _require_averaging_profile(profile)
    m = as_matrix(n_mat)
    scale = max(op_norm(m), 1.0)
    if op_norm(commutator(m, m.conj().T)) > 1e-10 * scale ** 2:
        raise ValueError("N is not normal to tolerance")
    re = (m + m.conj().T) / 2
    im = (m - m.conj().T) / 2j
    res = finite_range_multi(a, [re, im], delta, p)
    comm = op_norm(commutator(as_matrix(a), m))
    checks = [
        BoundCheck(op_norm(as_matrix(a) - res.matrix), (2 * p.c0 * p.c1 / delta) * comm,
                   "finite_range_normal ||A-H||"),
        BoundCheck(op_norm(commutator(res.matrix, m)), 2 * p.c1 ** 2 * comm,
                   "finite_range_normal ||[H,N]||"),
    ]
    return FiniteRangeResult(res.matrix, checks, delta, p.name)


# ---------------------------------------------------------------------------
# Tail tables
# ---------------------------------------------------------------------------

def default_G(l) -> np.ndarray | float:
    """Slow-growth default G(l) = max(2, log^2(2 + l)); G >= 2 always."""
    v = np.log(2.0 + np.asarray(l, dtype=float)) ** 2
    return np.maximum(2.0, v)


def default_F(L) -> np.ndarray | float:
    """Slow-growth default F(L) = log^2(2 + L)."""
    return np.log(2.0 + np.asarray(L, dtype=float)) ** 2


@dataclass
class TailTable:
    """Numeric decay table for one function: tail(c) over a threshold grid."""

    function_id: str
    thresholds: np.ndarray
    tails: np.ndarray
    errors: np.ndarray
    l1_norm: float

    def __post_init__(self):
        self.thresholds = np.asarray(self.thresholds, dtype=float)
        self.tails = np.asarray(self.tails, dtype=float)
        self.errors = np.asarray(self.errors, dtype=float)

    def monotone_from(self) -> int:
        """First index past which the table is nonincreasing."""
        d = np.diff(self.tails)
        bad = np.where(d > 0)[0]
        return int(bad[-1] + 1) if bad.size else 0

    def lookup(self, c: float) -> float:
        return float(np.interp(c, self.thresholds, self.tails))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["threshold", "tail", "error_estimate"])
            for c, t, e in zip(self.thresholds, self.tails, self.errors):
                wr.writerow([repr(float(c)), repr(float(t)), repr(float(e))])


def tail_tables(l_grid: Sequence[float], L_grid: Sequence[float],
                G: Callable = default_G, F: Callable = default_F,
                beta1: float = 1.0) -> dict[str, TailTable]:
    """Build the S(L) and T(l) decay tables.

    S(L) = tail_{F[0,1]}((L-1)/(e^2 n_win)) + ||F[0,1]^||_1 e^{-(L-1)/2} with
    n_win = ceil(L^beta1 / F(L)); T(l) = 2 tail_{F[1,1]}(G(l)/(10 e^2)) +
    3 ||F[1,1]^||_1 e^{-l/5}.  Requires G >= 2 on the grid.
    """
    l_grid = np.asarray(l_grid, dtype=float)
    L_grid = np.asarray(L_grid, dtype=float)
    gv = np.asarray(G(l_grid), dtype=float)
    if np.any(gv < 2.0):
        raise ValueError("G must be >= 2 everywhere")
    p01 = smooth_profile(0.0, 1.0)
    p11 = smooth_profile(1.0, 1.0)
    e2 = math.e ** 2

    s_vals, s_err = [], []
    for L in L_grid:
        n_win = math.ceil(L ** beta1 / float(F(L)))
        c = (L - 1.0) / (e2 * max(n_win, 1))
        s_vals.append(p01.tail(c) + p01.c1 * math.exp(-(L - 1.0) / 2.0))
        s_err.append(p01.fourier.c1_err)
    t_vals, t_err = [], []
    for l, g in zip(l_grid, gv):
        c = g / (10.0 * e2)
        t_vals.append(2.0 * p11.tail(c) + 3.0 * p11.c1 * math.exp(-l / 5.0))
        t_err.append(2.0 * p11.fourier.c1_err)

    return {
        "S": TailTable("S(L)", L_grid, np.array(s_vals), np.array(s_err), p01.c1),
        "T": TailTable("T(l)", l_grid, np.array(t_vals), np.array(t_err), p11.c1),
    }


def scaling_identity_residual(j: float, w: float, c: float) -> float:
    """Relative residual of tail_{F[jw,w]}(c) == tail_{F[j,1]}(c w).

    Both sides are computed by quadrature; the identity is exact in the
    continuum."""
    lhs = smooth_profile(j * w, w).tail(c)
    rhs = smooth_profile(j, 1.0).tail(c * w)
    return abs(lhs - rhs) / max(abs(rhs), 1e-300)
