"""Direct integration of the nonlinear classical lattice equation.

In dimensionless variables (x = k*position, tau = omega*t/2) a carrier
in the standing-wave potential obeys

    x'' + 2 q sin(x) * sum_i w_i cos(2 m_i tau) = 0.

A trajectory launched from a node with the equipartition velocity
v0 = sqrt(2 k_B T / E_S) is classified as trapped if its maximal
excursion stays below half a lattice spacing (|x| < pi) over a long
window, or below a mean-free-path cutoff.  Scanning (q, k_B T / E_S)
cells with Maxwell-Boltzmann-sampled velocities yields the stability
diagrams; the per-cell work is embarrassingly parallel and runs through
a compiled adaptive Runge-Kutta kernel.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit, prange
from scipy.integrate import solve_ivp
from scipy.special import erf

from .scales import DriveConfig
from . import hill

DEFAULT_TAU_MAX = 1000.0 * math.pi  # ~10^3 drive periods; diagram lobes stop moving when doubled
RTOL = 1e-10
ATOL = 1e-12

_MONO = DriveConfig(frequency=1.0, stability_q=0.0)


@dataclass(frozen=True)
class ClassicalState:
    x_tilde: float
    v_tilde: float
    tau: float = 0.0

    def __post_init__(self):
        for name in ("x_tilde", "v_tilde", "tau"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    max_excursion: float
    escape_tau: float | None
    criterion: str
    threshold: float


@dataclass(frozen=True)
class Trajectory:
    tau: np.ndarray
    x: np.ndarray
    v: np.ndarray

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("tau,x_tilde,v_tilde\n")
            for t, x, v in zip(self.tau, self.x, self.v):
                fh.write(f"{t:.17g},{x:.17g},{v:.17g}\n")


@dataclass(frozen=True)
class StabilityDiagram:
    q_grid: np.ndarray
    temp_grid: np.ndarray
    fraction: np.ndarray  # (n_q, n_temp) trapped fraction
    max_excursion_median: np.ndarray  # (n_q, n_temp)
    verdicts: list  # [i_q][i_temp] -> StabilityVerdict (cell aggregate)
    samples_per_cell: int
    seed: int
    tau_max: float
    criterion: str
    threshold: float

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("q,theta,fraction_stable,max_excursion_median\n")
            for i, q in enumerate(self.q_grid):
                for j, th in enumerate(self.temp_grid):
                    fh.write(
                        f"{q:.17g},{th:.17g},"
                        f"{self.fraction[i, j]:.17g},{self.max_excursion_median[i, j]:.17g}\n"
                    )

    def metadata(self) -> dict:
        return {
            "seed": self.seed,
            "tau_max": self.tau_max,
            "samples_per_cell": self.samples_per_cell,
            "criterion": self.criterion,
            "threshold": self.threshold,
            "rtol": RTOL,
            "atol": ATOL,
            "q_grid": [float(q) for q in self.q_grid],
            "temp_grid": [float(t) for t in self.temp_grid],
        }

    def write_metadata(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.metadata(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _drive_arrays(drive: DriveConfig):
    mults = np.array([m for m, _ in drive.harmonics], dtype=np.float64)
    weights = np.array([w for _, w in drive.harmonics], dtype=np.float64)
    return mults, weights


# ----------------------------------------------------------------------
# compiled adaptive RK45 (Dormand-Prince) with escape detection
# ----------------------------------------------------------------------

@njit(cache=True)
def _force(tau, x, q, mults, weights):
    f = 0.0
    for i in range(mults.shape[0]):
        f += weights[i] * math.cos(2.0 * mults[i] * tau)
    return -2.0 * q * math.sin(x) * f


@njit(cache=True)
def _integrate_escape(q, x0, v0, tau_max, threshold, mults, weights, rtol, atol):
    """Integrate to tau_max or first |x| >= threshold.

    Returns (escaped, escape_tau, max_excursion). escape_tau is nan when
    the trajectory never escapes.
    """
    x = x0
    v = v0
    tau = 0.0
    max_exc = abs(x)
    if max_exc >= threshold:
        return True, 0.0, max_exc
    h = 1e-3
    k1x = v
    k1v = _force(tau, x, q, mults, weights)
    while tau < tau_max:
        if h > tau_max - tau:
            h = tau_max - tau
        # Dormand-Prince 5(4), FSAL
        x2 = x + h * 0.2 * k1x
        v2 = v + h * 0.2 * k1v
        k2x = v2
        k2v = _force(tau + 0.2 * h, x2, q, mults, weights)

        x3 = x + h * (0.075 * k1x + 0.225 * k2x)
        v3 = v + h * (0.075 * k1v + 0.225 * k2v)
        k3x = v3
        k3v = _force(tau + 0.3 * h, x3, q, mults, weights)

        x4 = x + h * ((44.0 / 45.0) * k1x - (56.0 / 15.0) * k2x + (32.0 / 9.0) * k3x)
        v4 = v + h * ((44.0 / 45.0) * k1v - (56.0 / 15.0) * k2v + (32.0 / 9.0) * k3v)
        k4x = v4
        k4v = _force(tau + 0.8 * h, x4, q, mults, weights)

        x5 = x + h * ((19372.0 / 6561.0) * k1x - (25360.0 / 2187.0) * k2x
                      + (64448.0 / 6561.0) * k3x - (212.0 / 729.0) * k4x)
        v5 = v + h * ((19372.0 / 6561.0) * k1v - (25360.0 / 2187.0) * k2v
                      + (64448.0 / 6561.0) * k3v - (212.0 / 729.0) * k4v)
        k5x = v5
        k5v = _force(tau + (8.0 / 9.0) * h, x5, q, mults, weights)

        x6 = x + h * ((9017.0 / 3168.0) * k1x - (355.0 / 33.0) * k2x
                      + (46732.0 / 5247.0) * k3x + (49.0 / 176.0) * k4x
                      - (5103.0 / 18656.0) * k5x)
        v6 = v + h * ((9017.0 / 3168.0) * k1v - (355.0 / 33.0) * k2v
                      + (46732.0 / 5247.0) * k3v + (49.0 / 176.0) * k4v
                      - (5103.0 / 18656.0) * k5v)
        k6x = v6
        k6v = _force(tau + h, x6, q, mults, weights)

        x_new = x + h * ((35.0 / 384.0) * k1x + (500.0 / 1113.0) * k3x
                         + (125.0 / 192.0) * k4x - (2187.0 / 6784.0) * k5x
                         + (11.0 / 84.0) * k6x)
        v_new = v + h * ((35.0 / 384.0) * k1v + (500.0 / 1113.0) * k3v
                         + (125.0 / 192.0) * k4v - (2187.0 / 6784.0) * k5v
                         + (11.0 / 84.0) * k6v)
        k7x = v_new
        k7v = _force(tau + h, x_new, q, mults, weights)

        ex = h * ((71.0 / 57600.0) * k1x - (71.0 / 16695.0) * k3x
                  + (71.0 / 1920.0) * k4x - (17253.0 / 339200.0) * k5x
                  + (22.0 / 525.0) * k6x - (1.0 / 40.0) * k7x)
        ev = h * ((71.0 / 57600.0) * k1v - (71.0 / 16695.0) * k3v
                  + (71.0 / 1920.0) * k4v - (17253.0 / 339200.0) * k5v
                  + (22.0 / 525.0) * k6v - (1.0 / 40.0) * k7v)
        sx = atol + rtol * max(abs(x), abs(x_new))
        sv = atol + rtol * max(abs(v), abs(v_new))
        err = math.sqrt(0.5 * ((ex / sx) ** 2 + (ev / sv) ** 2))

        if err <= 1.0:
            tau += h
            x = x_new
            v = v_new
            k1x = k7x
            k1v = k7v
            ax = abs(x)
            if ax > max_exc:
                max_exc = ax
            if ax >= threshold:
                return True, tau, max_exc
        if err == 0.0:
            factor = 5.0
        else:
            factor = 0.9 * err ** (-0.2)
            if factor > 5.0:
                factor = 5.0
            elif factor < 0.2:
                factor = 0.2
        h *= factor
        if h < 1e-14:
            # step-size underflow; flag by returning a poisoned excursion
            return True, tau, -1.0
    return False, math.nan, max_exc


@njit(parallel=True, cache=True)
def _classify_batch(qs, x0s, v0s, tau_max, threshold, mults, weights, rtol, atol,
                    out_stable, out_maxexc, out_esc):
    for i in prange(qs.shape[0]):
        escaped, esc_tau, max_exc = _integrate_escape(
            qs[i], x0s[i], v0s[i], tau_max, threshold, mults, weights, rtol, atol
        )
        out_stable[i] = 0 if escaped else 1
        out_maxexc[i] = max_exc
        out_esc[i] = esc_tau


def _threshold_for(criterion: str, mfp_limit: float | None) -> float:
    if criterion == "half_lattice":
        return math.pi
    if criterion == "mean_free_path":
        if mfp_limit is None or mfp_limit <= 0:
            raise ValueError("mean_free_path criterion needs a positive mfp_limit (k * l_mfp)")
        return float(mfp_limit)
    raise ValueError(f"unknown criterion {criterion!r}")


def integrate_trajectory(
    q: float,
    init: ClassicalState,
    drive: DriveConfig | None = None,
    tau_max: float = DEFAULT_TAU_MAX,
    n_samples: int = 2048,
) -> Trajectory:
    """Densely sampled solution of the nonlinear lattice equation."""
    if tau_max <= 0:
        raise ValueError(f"tau_max must be > 0, got {tau_max}")
    drive = drive if drive is not None else _MONO
    if drive.dc_a != 0.0:
        raise ValueError("the nonlinear lattice equation carries no dc term")
    mults, weights = _drive_arrays(drive)

    def rhs(tau, y):
        f = float(np.dot(weights, np.cos(2.0 * mults * tau)))
        return [y[1], -2.0 * q * math.sin(y[0]) * f]

    t_eval = np.linspace(init.tau, init.tau + tau_max, n_samples)
    sol = solve_ivp(
        rhs, (init.tau, init.tau + tau_max), [init.x_tilde, init.v_tilde],
        method="DOP853", rtol=RTOL, atol=ATOL, t_eval=t_eval,
    )
    if not sol.success:
        raise hill.IntegrationError(f"trajectory integration failed: {sol.message}")
    return Trajectory(tau=sol.t, x=sol.y[0], v=sol.y[1])


def classify_stability(
    q: float,
    theta: float,
    drive: DriveConfig | None = None,
    tau_max: float = DEFAULT_TAU_MAX,
    criterion: str = "half_lattice",
    mfp_limit: float | None = None,
) -> StabilityVerdict:
    """Trapped/escaped verdict for the equipartition launch v0 = sqrt(2 theta).

    theta is k_B T / E_S.  Stability means max |x| stays strictly below
    the threshold over [0, tau_max]; touching it counts as escape.
    """
    if theta < 0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    drive = drive if drive is not None else _MONO
    threshold = _threshold_for(criterion, mfp_limit)
    mults, weights = _drive_arrays(drive)
    escaped, esc_tau, max_exc = _integrate_escape(
        q, 0.0, math.sqrt(2.0 * theta), tau_max, threshold, mults, weights, RTOL, ATOL
    )
    if max_exc < 0:
        raise hill.IntegrationError(f"step-size underflow at q={q}, theta={theta}")
    return StabilityVerdict(
        stable=not escaped,
        max_excursion=max_exc,
        escape_tau=None if math.isnan(esc_tau) else esc_tau,
        criterion=criterion,
        threshold=threshold,
    )


def stability_diagram(
    q_grid,
    temp_grid,
    drive: DriveConfig | None = None,
    tau_max: float = DEFAULT_TAU_MAX,
    samples_per_cell: int = 1,
    seed: int = 0,
    criterion: str = "half_lattice",
    mfp_limit: float | None = None,
) -> StabilityDiagram:
    """Per-cell trapped fractions over a (q, k_B T/E_S) grid.

    With samples_per_cell == 1 each cell launches the deterministic
    equipartition velocity; otherwise velocities are |N(0, sqrt(2 theta))|
    Maxwell-Boltzmann draws from a per-cell seeded stream, so results are
    bit-reproducible for a given (seed, grid) regardless of scheduling.
    """
    q_grid = np.asarray(q_grid, dtype=float)
    temp_grid = np.asarray(temp_grid, dtype=float)
    if q_grid.ndim != 1 or temp_grid.ndim != 1 or len(q_grid) == 0 or len(temp_grid) == 0:
        raise ValueError("q_grid and temp_grid must be non-empty 1-d sequences")
    if np.any(np.diff(q_grid) < 0) or np.any(np.diff(temp_grid) < 0):
        raise ValueError("grids must be monotone non-decreasing")
    if samples_per_cell < 1:
        raise ValueError("samples_per_cell must be >= 1")
    drive = drive if drive is not None else _MONO
    threshold = _threshold_for(criterion, mfp_limit)
    mults, weights = _drive_arrays(drive)

    n_q, n_t, n_s = len(q_grid), len(temp_grid), samples_per_cell
    qs = np.empty(n_q * n_t * n_s)
    v0s = np.empty_like(qs)
    for i, q in enumerate(q_grid):
        for j, th in enumerate(temp_grid):
            base = (i * n_t + j) * n_s
            if n_s == 1:
                v0s[base] = math.sqrt(2.0 * th)
            else:
                rng = np.random.default_rng((seed, i, j))
                v0s[base: base + n_s] = np.abs(rng.normal(0.0, math.sqrt(2.0 * th), n_s))
            qs[base: base + n_s] = q
    x0s = np.zeros_like(qs)
    out_stable = np.empty(len(qs), dtype=np.int8)
    out_maxexc = np.empty(len(qs))
    out_esc = np.empty(len(qs))
    _classify_batch(qs, x0s, v0s, tau_max, threshold, mults, weights, RTOL, ATOL,
                    out_stable, out_maxexc, out_esc)
    if np.any(out_maxexc < 0):
        raise hill.IntegrationError("step-size underflow in diagram cell")

    fraction = np.empty((n_q, n_t))
    med = np.empty((n_q, n_t))
    verdicts = []
    for i in range(n_q):
        row = []
        for j in range(n_t):
            base = (i * n_t + j) * n_s
            sl = slice(base, base + n_s)
            frac = float(np.mean(out_stable[sl]))
            fraction[i, j] = frac
            med[i, j] = float(np.median(out_maxexc[sl]))
            esc = out_esc[sl]
            esc = esc[~np.isnan(esc)]
            row.append(
                StabilityVerdict(
                    stable=frac >= 0.5,
                    max_excursion=med[i, j],
                    escape_tau=float(np.median(esc)) if len(esc) else None,
                    criterion=criterion,
                    threshold=threshold,
                )
            )
        verdicts.append(row)
    return StabilityDiagram(
        q_grid=q_grid,
        temp_grid=temp_grid,
        fraction=fraction,
        max_excursion_median=med,
        verdicts=verdicts,
        samples_per_cell=n_s,
        seed=seed,
        tau_max=tau_max,
        criterion=criterion,
        threshold=threshold,
    )


def trapped_fraction(theta: float) -> float:
    """Fraction of a 1-d Maxwell-Boltzmann ensemble with |v| below the
    equipartition velocity v0 = sqrt(k_B T/m); erf(1/sqrt(2)) ~ 0.68 for
    any theta > 0, and 1 by convention for theta = 0 (everything at rest).
    """
    if theta < 0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    if theta == 0.0:
        return 1.0
    return float(erf(1.0 / math.sqrt(2.0)))


def secular_approximation(q: float, amplitude: float, tau) -> np.ndarray:
    """Lowest-order secular-times-micromotion trajectory.

    x(tau) = amplitude * cos(beta tau) * [1 - (q/2) cos(2 tau)], with the
    exponent beta from the continued fraction.  Valid deep in the
    pseudopotential regime; a warning is raised above q = 0.5.  The
    micromotion phase matches the drive weight convention w = -1 (a
    quarter-period shift of the standard one).
    """
    if q > 0.5:
        warnings.warn(f"secular approximation assumes q^2 << 1; q={q}", stacklevel=2)
    beta = hill.characteristic_exponent(q)
    tau = np.asarray(tau, dtype=float)
    return amplitude * np.cos(beta * tau) * (1.0 - 0.5 * q * np.cos(2.0 * tau))
