"""Floquet analysis of the linearized lattice equation (Mathieu/Hill).

The linearized equation in dimensionless time tau = omega*t/2 reads

    x'' + [a_dc + 2 q * sum_i w_i cos(2 m_i tau)] x = 0,

monochromatic default w = ((1, 1.0),).  Three complementary tools live
here:

- :func:`monodromy` integrates the fundamental matrix over one common
  period; |trace| <= 2 is the stability criterion.
- :func:`characteristic_exponent` solves the classic continued-fraction
  relation for the exponent beta (a_dc = 0), so that the secular
  frequency is omega0 = (beta/2) * omega.
- :func:`floquet_coefficients` builds the mode u(t) = sum_n c_{2n}
  exp[i (omega0 + n*omega) t] from the minimal solution of the
  three-term recursion, normalized by the Wronskian sum rule
  sum_n c_{2n}^2 (omega0 + n*omega)/omega0 = 1.

The recursion is solved by backward recurrence from both truncation
edges (matched at n = 0) because forward recurrence is unstable for the
decaying solution.  Signs follow the +2q cos(2 tau) convention above;
q < 0 is accepted and flips the sign of every odd-n coefficient, which
is the same equation shifted by tau -> tau + pi/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .scales import DriveConfig

_MONO = DriveConfig(frequency=1.0, stability_q=0.0)  # shape-only default drive
_N_TRUNC_MAX = 64


class IntegrationError(RuntimeError):
    """Adaptive integration failed to meet its local tolerance."""


@dataclass(frozen=True)
class MonodromyResult:
    matrix: np.ndarray  # 2x2 fundamental matrix after one period
    trace: float
    stable: bool
    q: float
    drive: DriveConfig

    @property
    def determinant(self) -> float:
        m = self.matrix
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]


@dataclass(frozen=True)
class FloquetMode:
    """Mathieu solution object: exponent beta plus coefficients c_{2n}."""

    q: float
    beta_exp: float
    coeffs: dict  # n -> c_{2n}, real
    omega: float  # drive angular frequency, rad/ns
    n_trunc: int

    @property
    def omega0(self) -> float:
        return 0.5 * self.beta_exp * self.omega

    def arrays(self):
        ns = np.array(sorted(self.coeffs), dtype=np.int64)
        cs = np.array([self.coeffs[int(n)] for n in ns])
        return ns, cs

    def sum_rule(self) -> float:
        """sum_n c^2 (beta + 2n)/beta; equals 1 for a normalized mode."""
        ns, cs = self.arrays()
        if self.beta_exp == 0.0:
            return float(np.sum(cs**2))
        return float(np.sum(cs**2 * (self.beta_exp + 2.0 * ns) / self.beta_exp))

    def recursion_residual(self) -> float:
        """max |q(c_{2n+2}+c_{2n-2}) - (beta+2n)^2 c_{2n}| over interior n."""
        ns, cs = self.arrays()
        if len(ns) < 3:
            return 0.0
        lhs = self.q * (cs[2:] + cs[:-2])
        rhs = (self.beta_exp + 2.0 * ns[1:-1]) ** 2 * cs[1:-1]
        return float(np.max(np.abs(lhs - rhs)))

    def wronskian(self, t) -> complex:
        u, du = evaluate_mode(self, t)
        return u.conjugate() * du - u * du.conjugate()


def _drive_profile(drive: DriveConfig):
    mults = np.array([m for m, _ in drive.harmonics], dtype=np.int64)
    weights = np.array([w for _, w in drive.harmonics])
    g = int(np.gcd.reduce(mults))
    period = math.pi / g
    return mults, weights, period


def monodromy(q: float, drive: DriveConfig | None = None) -> MonodromyResult:
    """Fundamental matrix of the linear equation over one common period.

    q overrides drive.stability_q so parameter scans can share one drive
    shape (dc offset and harmonic content).
    """
    drive = drive if drive is not None else _MONO
    mults, weights, period = _drive_profile(drive)
    a_dc = drive.dc_a

    def rhs(tau, y):
        f = a_dc + 2.0 * q * np.dot(weights, np.cos(2.0 * mults * tau))
        return [y[1], -f * y[0], y[3], -f * y[2]]

    sol = solve_ivp(
        rhs, (0.0, period), [1.0, 0.0, 0.0, 1.0],
        method="DOP853", rtol=1e-12, atol=1e-13, dense_output=False,
    )
    if not sol.success:
        raise IntegrationError(
            f"monodromy integration failed at q={q}: {sol.message}"
        )
    y = sol.y[:, -1]
    matrix = np.array([[y[0], y[2]], [y[1], y[3]]])
    trace = float(matrix[0, 0] + matrix[1, 1])
    return MonodromyResult(matrix=matrix, trace=trace, stable=abs(trace) <= 2.0, q=q, drive=drive)


def _cf_tail(beta: float, q: float, sign: int, depth: int) -> float:
    """q*r(1) where r(n) = c_{2n*sign}/c_{2(n-1)*sign}, by backward recurrence."""
    q2 = q * q
    t = 0.0
    for n in range(depth, 0, -1):
        den = (beta + sign * 2.0 * n) ** 2 - t
        if den == 0.0:
            den = 1e-300
        t = q2 / den
    return t


def _cf_residual(beta: float, q: float, depth: int = 40) -> float:
    """Characteristic function F(beta) whose roots are Floquet exponents."""
    t1 = _cf_tail(beta, q, +1, depth)
    t2 = _cf_tail(beta, q, -1, depth)
    # refine depth until stationary
    d = depth
    while d < 400:
        d *= 2
        t1b = _cf_tail(beta, q, +1, d)
        t2b = _cf_tail(beta, q, -1, d)
        if abs(t1b - t1) < 1e-15 * max(1.0, abs(t1b)) and abs(t2b - t2) < 1e-15 * max(1.0, abs(t2b)):
            t1, t2 = t1b, t2b
            break
        t1, t2 = t1b, t2b
    return beta * beta - t1 - t2


def characteristic_exponent(q: float) -> float:
    """Floquet exponent beta (mod 2, principal value in (0, 1]) at a_dc = 0.

    Solves the continued-fraction relation; the monodromy trace only
    brackets the root, so agreement between 2*cos(pi*beta) and the
    integrated trace is a genuine cross-check.  Raises for unstable q.
    """
    q = abs(q)
    if q == 0.0:
        return 0.0
    mono = monodromy(q)
    if not mono.stable:
        raise ValueError(f"unstable drive point q={q} (|trace| = {abs(mono.trace):.6f} > 2)")
    beta0 = math.acos(min(1.0, max(-1.0, 0.5 * mono.trace))) / math.pi
    for cand in (beta0, 2.0 - beta0):
        root = _refine_cf_root(cand, q)
        if root is not None:
            return root
    raise RuntimeError(f"continued fraction failed to converge at q={q}")


def _refine_cf_root(cand: float, q: float):
    f_cand = _cf_residual(cand, q)
    if abs(f_cand) < 1e-13:
        return cand
    for delta in (1e-4, 1e-3, 1e-2, 5e-2, 0.2):
        lo, hi = cand - delta, cand + delta
        try:
            f_lo, f_hi = _cf_residual(lo, q), _cf_residual(hi, q)
        except (OverflowError, ZeroDivisionError):
            continue
        if f_lo * f_hi < 0:
            root = brentq(_cf_residual, lo, hi, args=(q,), xtol=1e-15, rtol=8.9e-16)
            if abs(_cf_residual(root, q)) < 1e-9:
                return root
    return None


def floquet_coefficients(q: float, n_trunc: int = 8, omega: float = 1.0) -> FloquetMode:
    """Minimal-solution coefficients of the mode, sum-rule normalized.

    n_trunc is grown automatically (up to 64) until the edge coefficients
    have decayed by at least 1e3 relative to the largest one.
    """
    if n_trunc < 4:
        raise ValueError(f"n_trunc must be >= 4, got {n_trunc}")
    if q == 0.0:
        return FloquetMode(q=0.0, beta_exp=0.0, coeffs={0: 1.0}, omega=omega, n_trunc=n_trunc)
    beta = characteristic_exponent(abs(q))

    n = n_trunc
    while True:
        coeffs = _solve_recursion(q, beta, n)
        cmax = max(abs(c) for c in coeffs.values())
        edge = max(abs(coeffs[n]), abs(coeffs[-n]))
        if edge <= 1e-3 * cmax:
            break
        if n >= _N_TRUNC_MAX:
            raise RuntimeError(
                f"Floquet coefficients did not decay by 1e3 at the truncation edge "
                f"for q={q} even at n_trunc={_N_TRUNC_MAX}"
            )
        n = min(2 * n, _N_TRUNC_MAX)

    # Wronskian sum rule: sum c^2 (beta+2n)/beta = 1
    s = sum(c * c * (beta + 2.0 * k) / beta for k, c in coeffs.items())
    if s <= 0:
        raise RuntimeError(f"sum rule normalization is non-positive at q={q} (S={s})")
    scale = 1.0 / math.sqrt(s)
    coeffs = {k: c * scale for k, c in coeffs.items()}
    return FloquetMode(q=q, beta_exp=beta, coeffs=coeffs, omega=omega, n_trunc=n)


def _solve_recursion(q: float, beta: float, n_trunc: int) -> dict:
    """Backward recurrence from both edges, matched at n = 0 (unnormalized)."""
    # positive side: start at n = +n_trunc with (tiny, 0) and recurse down
    up = np.zeros(n_trunc + 2)
    up[n_trunc] = 1.0
    for nn in range(n_trunc, 0, -1):
        up[nn - 1] = (beta + 2.0 * nn) ** 2 * up[nn] / q - up[nn + 1]
        if abs(up[nn - 1]) > 1e250:  # rescale, only ratios matter
            up[: nn + 2] /= abs(up[nn - 1])
    dn = np.zeros(n_trunc + 2)
    dn[n_trunc] = 1.0
    for nn in range(n_trunc, 0, -1):
        dn[nn - 1] = (beta - 2.0 * nn) ** 2 * dn[nn] / q - dn[nn + 1]
        if abs(dn[nn - 1]) > 1e250:
            dn[: nn + 2] /= abs(dn[nn - 1])
    if up[0] == 0.0 or dn[0] == 0.0:
        raise RuntimeError(f"recursion degenerate at q={q}, n_trunc={n_trunc}")
    coeffs = {0: 1.0}
    for nn in range(1, n_trunc + 1):
        coeffs[nn] = up[nn] / up[0]
        coeffs[-nn] = dn[nn] / dn[0]
    return coeffs


def evaluate_mode(mode: FloquetMode, t):
    """(u, du/dt) of the mode at time(s) t (same units as 1/mode.omega)."""
    ns, cs = mode.arrays()
    nu = mode.omega0 + ns * mode.omega  # component frequencies
    t_arr = np.asarray(t, dtype=float)
    phase = np.exp(1j * np.multiply.outer(t_arr, nu))
    u = phase @ cs
    du = phase @ (1j * nu * cs)
    if np.ndim(t) == 0:
        return complex(u), complex(du)
    return u, du


def stability_boundaries(
    q_lo: float,
    q_hi: float,
    drive: DriveConfig | None = None,
    resolution: float = 0.01,
    q_tol: float = 1e-4,
) -> list[tuple[float, float]]:
    """Stable windows (q_lo, q_hi) inside [q_lo, q_hi].

    Scans sign changes of |trace| - 2 on a grid of the given resolution
    and refines each boundary by bisection to q_tol.  An empty list is a
    valid answer.
    """
    if not (math.isfinite(q_lo) and math.isfinite(q_hi)) or q_hi < q_lo:
        raise ValueError(f"bad search interval [{q_lo}, {q_hi}]")
    drive = drive if drive is not None else _MONO

    def g(q):
        return abs(monodromy(q, drive).trace) - 2.0

    if q_hi == q_lo:
        return [(q_lo, q_hi)] if g(q_lo) <= 0.0 else []

    n_pts = max(2, int(math.ceil((q_hi - q_lo) / resolution)) + 1)
    qs = np.linspace(q_lo, q_hi, n_pts)
    gs = np.array([g(qv) for qv in qs])

    def bisect(a, b, ga, gb):
        while b - a > q_tol:
            mid = 0.5 * (a + b)
            gm = g(mid)
            if (ga <= 0.0) == (gm <= 0.0):
                a, ga = mid, gm
            else:
                b, gb = mid, gm
        return 0.5 * (a + b)

    windows = []
    start = None
    for i in range(n_pts):
        stable_here = gs[i] <= 0.0
        if stable_here and start is None:
            if i == 0:
                start = qs[0]
            else:
                start = bisect(qs[i - 1], qs[i], gs[i - 1], gs[i])
        elif not stable_here and start is not None:
            end = bisect(qs[i - 1], qs[i], gs[i - 1], gs[i])
            windows.append((start, end))
            start = None
    if start is not None:
        windows.append((start, qs[-1]))
    return windows
