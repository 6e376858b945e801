"""Born-Markov Floquet master equation at the Gaussian-moment level.

Near a lattice node the driven Hamiltonian is quadratic,

    H_S(t) = p^2/2m + (m/2) W(t) x^2,    W(t) = -(omega^2/2) q cos(omega t),

and the phonon bath enters through the Lindblad dissipator built from the
Floquet shift operator

    C_S(t) = alpha_x(t) x + beta_p(t) p,
    alpha_x = -i sqrt(m/(2 hbar omega0)) du/dt,
    beta_p  =  i u / sqrt(2 m hbar omega0),

with u(t) the Mathieu mode of the same W(t).  Because the generator is
quadratic, the five moments v = (<x>, <p>, <x^2>, <p^2>, <xp+px>) close:

    dv/dt = M(t) v + C(t),

with first moments damped at gamma/2 independently of u(t) and the
second-moment inhomogeneity proportional to gamma (2N+1), where N is the
c_{2n}-weighted thermal occupation.  The moment propagator here is exact
for Gaussian states; :func:`fock_oracle` integrates the same master
equation brute-force in a truncated number basis of the static reference
oscillator and serves as the independent check.

Sign convention: a mode for this module must solve u'' + W(t) u = 0 with
the W(t) above, i.e. the Mathieu recursion at -q.  :func:`drive_mode`
builds it from a physical DriveConfig.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from . import hill
from .hill import FloquetMode, evaluate_mode
from .scales import DriveConfig
from .units import HBAR, KB

DEFAULT_ZETA = 2.35e-2  # ohmic fit value gamma = zeta * omega0
PROPAGATE_RTOL = 1e-10
PROPAGATE_ATOL = 1e-12
UNCERTAINTY_TOL = 1e-8


@dataclass(frozen=True)
class BathParams:
    """Phenomenological ohmic bath: damping rate and temperature.

    gamma is in rad/ns; kT is the thermal energy k_B*T in ueV.  When
    gamma is None it is resolved as zeta*omega0 (zeta defaults to the
    ohmic fit value 2.35e-2).
    """

    gamma: float | None = None
    kT: float = 0.0
    zeta: float | None = None

    def __post_init__(self):
        if self.gamma is not None and self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.kT < 0:
            raise ValueError(f"kT must be >= 0, got {self.kT}")
        if self.zeta is not None and self.zeta < 0:
            raise ValueError(f"zeta must be >= 0, got {self.zeta}")

    @classmethod
    def from_kelvin(cls, temperature_k: float, gamma: float | None = None, zeta: float | None = None):
        return cls(gamma=gamma, kT=KB * temperature_k, zeta=zeta)

    def resolve_gamma(self, omega0: float) -> float:
        if self.gamma is not None:
            return self.gamma
        zeta = self.zeta if self.zeta is not None else DEFAULT_ZETA
        return zeta * omega0


@dataclass(frozen=True)
class ShiftCoefficients:
    alpha_x: complex
    beta_p: complex
    t: float

    def commutator_norm(self) -> complex:
        """(alpha_x beta_p* - alpha_x* beta_p) * i hbar; 1 for a valid mode."""
        ax, bp = self.alpha_x, self.beta_p
        return (ax * bp.conjugate() - ax.conjugate() * bp) * 1j * HBAR


@dataclass(frozen=True)
class MomentState:
    """Gaussian state of the carrier: first and second central moments.

    Units: nm, ueV*ns/nm; cov_sym = <xp+px>/2 - <x><p>.
    """

    mean_x: float
    mean_p: float
    var_x: float
    var_p: float
    cov_sym: float

    def __post_init__(self):
        if self.var_x <= 0 or self.var_p <= 0:
            raise ValueError("variances must be positive")
        het = self.var_x * self.var_p - self.cov_sym**2
        if het < (HBAR / 2.0) ** 2 * (1.0 - 1e-9):
            raise ValueError(
                f"state violates the uncertainty relation: var_x*var_p - cov^2 = {het} "
                f"< (hbar/2)^2 = {(HBAR / 2.0) ** 2}"
            )

    @classmethod
    def coherent(cls, m: float, omega0: float, mean_x: float = 0.0, mean_p: float = 0.0):
        """Displaced vacuum of the static reference oscillator."""
        return cls(mean_x, mean_p, HBAR / (2.0 * m * omega0), HBAR * m * omega0 / 2.0, 0.0)

    @classmethod
    def thermal(cls, m: float, omega0: float, n_bar: float):
        s = 2.0 * n_bar + 1.0
        return cls(0.0, 0.0, s * HBAR / (2.0 * m * omega0), s * HBAR * m * omega0 / 2.0, 0.0)

    def uncertainty_product(self) -> float:
        return self.var_x * self.var_p - self.cov_sym**2


@dataclass(frozen=True)
class EffectiveOccupation:
    N: float
    terms: dict  # n -> contribution


@dataclass(frozen=True)
class QuasiStationaryVerdict:
    quasi_stationary: bool
    period_tau: float
    max_rel_deviation: float
    stationary: bool


class MomentTrajectory:
    """Sampled moment evolution plus the run parameters that produced it."""

    def __init__(self, t, mean_x, mean_p, var_x, var_p, cov_sym, omega, omega0, gamma, N, m):
        self.t = np.asarray(t)
        self.tau = 0.5 * omega * self.t
        self.mean_x = np.asarray(mean_x)
        self.mean_p = np.asarray(mean_p)
        self.var_x = np.asarray(var_x)
        self.var_p = np.asarray(var_p)
        self.cov_sym = np.asarray(cov_sym)
        self.omega = omega
        self.omega0 = omega0
        self.gamma = gamma
        self.N = N
        self.m = m

    def state_at(self, index: int) -> MomentState:
        return MomentState(
            float(self.mean_x[index]), float(self.mean_p[index]),
            float(self.var_x[index]), float(self.var_p[index]), float(self.cov_sym[index]),
        )

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,tau,mean_x,mean_p,var_x,var_p,cov_sym\n")
            for i in range(len(self.t)):
                fh.write(
                    f"{self.t[i]:.17g},{self.tau[i]:.17g},{self.mean_x[i]:.17g},"
                    f"{self.mean_p[i]:.17g},{self.var_x[i]:.17g},{self.var_p[i]:.17g},"
                    f"{self.cov_sym[i]:.17g}\n"
                )

    def metadata(self) -> dict:
        return {
            "omega_rad_per_ns": self.omega,
            "omega0_rad_per_ns": self.omega0,
            "gamma_rad_per_ns": self.gamma,
            "N_effective": self.N,
            "mass_uev_ns2_nm2": self.m,
            "rtol": PROPAGATE_RTOL,
            "atol": PROPAGATE_ATOL,
            "uncertainty_tol": UNCERTAINTY_TOL,
        }

    def write_metadata(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.metadata(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def drive_mode(drive: DriveConfig, n_trunc: int = 8) -> FloquetMode:
    """Floquet mode matching this module's W(t) = -(omega^2/2) q cos(omega t).

    The linearized lattice equation in scaled time carries +2q cos(2 tau);
    the potential-maximum-at-t=0 phase used here flips the sign, so the
    recursion runs at -q (beta and |c_{2n}| are unchanged).
    """
    if not drive.is_monochromatic:
        raise ValueError("the master equation treats monochromatic drives")
    return hill.floquet_coefficients(-drive.stability_q, omega=drive.omega, n_trunc=n_trunc)


def shift_coefficients(mode: FloquetMode, m: float, t: float) -> ShiftCoefficients:
    """Coefficients (alpha_x, beta_p) of C_S(t) = alpha_x x + beta_p p."""
    omega0 = mode.omega0
    if omega0 <= 0:
        raise ValueError("untrapped mode: omega0 must be positive")
    u, du = evaluate_mode(mode, t)
    alpha_x = -1j * math.sqrt(m / (2.0 * HBAR * omega0)) * du
    beta_p = 1j * u / math.sqrt(2.0 * m * HBAR * omega0)
    return ShiftCoefficients(alpha_x=alpha_x, beta_p=beta_p, t=t)


def thermal_occupation(nu: float, kT: float) -> float:
    """Bose factor 1/(exp(hbar nu/kT) - 1) at signed frequency nu.

    At negative nu this evaluates to -(1 + n_bar(|nu|)), which is what
    makes every term of the effective occupation positive.  kT = 0 gives
    the limits 0 (nu > 0) and -1 (nu < 0).
    """
    if nu == 0.0:
        raise ValueError("thermal occupation diverges at zero frequency")
    if kT == 0.0:
        return 0.0 if nu > 0 else -1.0
    x = HBAR * nu / kT
    if x > 700.0:
        return 0.0
    if x < -700.0:
        return -1.0
    return 1.0 / math.expm1(x)


def effective_occupation(mode: FloquetMode, bath: BathParams) -> EffectiveOccupation:
    """c_{2n}-weighted thermal occupation N driving the dissipator.

    N = sum_n c_{2n}^2 (omega0 + n omega)/omega0 * n_th(omega0 + n omega);
    negative-frequency components fold into positive contributions, so
    micromotion heats even at T = 0.
    """
    omega0 = mode.omega0
    if omega0 <= 0:
        raise ValueError("untrapped mode: omega0 must be positive")
    terms = {}
    for n, c in sorted(mode.coeffs.items()):
        nu = omega0 + n * mode.omega
        terms[n] = c * c * (nu / omega0) * thermal_occupation(nu, bath.kT)
    return EffectiveOccupation(N=sum(terms.values()), terms=terms)


class MomentODE:
    """Time-periodic generator (M(t), C(t)) of the closed moment dynamics."""

    def __init__(self, mode: FloquetMode, m: float, bath: BathParams):
        if mode.omega0 <= 0:
            raise ValueError("untrapped mode: omega0 must be positive")
        if m <= 0:
            raise ValueError("mass must be positive")
        self.mode = mode
        self.m = m
        self.bath = bath
        self.omega = mode.omega
        self.omega0 = mode.omega0
        self.gamma = bath.resolve_gamma(self.omega0)
        self.N = effective_occupation(mode, bath).N
        self._warn_regime()
        ns, cs = mode.arrays()
        self._nu = self.omega0 + ns * self.omega
        self._cs = cs

    def _warn_regime(self):
        g, kT, w0 = self.gamma, self.bath.kT, self.omega0
        if g > 0 and kT > 0 and HBAR * g / kT > 0.3:
            warnings.warn(
                f"Markov guard: hbar*gamma/k_BT = {HBAR * g / kT:.3g} > 0.3", stacklevel=3
            )
        if kT > 0 and kT / (HBAR * w0) > 0.3:
            warnings.warn(
                f"cooling guard: k_BT/(hbar omega0) = {kT / (HBAR * w0):.3g} > 0.3", stacklevel=3
            )
        if g > 0 and g / w0 > 0.3:
            warnings.warn(f"Born guard: gamma/omega0 = {g / w0:.3g} > 0.3", stacklevel=3)

    def spring(self, t: float) -> float:
        """W(t); |W| = (omega^2/2) q at t = 0."""
        return 0.5 * self.omega**2 * self.mode.q * math.cos(self.omega * t)

    def _mode_at(self, t: float):
        phase = np.exp(1j * self._nu * t)
        u = np.dot(self._cs, phase)
        du = np.dot(1j * self._nu * self._cs, phase)
        return u, du

    def matrix(self, t: float):
        """(M(t), C(t)) with v = (<x>, <p>, <x^2>, <p^2>, <xp+px>)."""
        m, g = self.m, self.gamma
        W = self.spring(t)
        M = np.array([
            [-0.5 * g, 1.0 / m, 0.0, 0.0, 0.0],
            [-m * W, -0.5 * g, 0.0, 0.0, 0.0],
            [0.0, 0.0, -g, 0.0, 1.0 / m],
            [0.0, 0.0, 0.0, -g, -m * W],
            [0.0, 0.0, -2.0 * m * W, 2.0 / m, -g],
        ])
        u, du = self._mode_at(t)
        pref = g * (2.0 * self.N + 1.0) * HBAR / self.omega0
        C = np.array([
            0.0,
            0.0,
            pref * abs(u) ** 2 / (2.0 * m),
            pref * m * abs(du) ** 2 / 2.0,
            pref * (u * du.conjugate()).real,
        ])
        return M, C

    def rhs(self, t: float, v: np.ndarray) -> np.ndarray:
        # scalar form of matrix(t) @ v + C(t); this is the integrator's
        # hot path, called ~1e5 times per run
        m, g = self.m, self.gamma
        W = self.spring(t)
        u, du = self._mode_at(t)
        pref = g * (2.0 * self.N + 1.0) * HBAR / self.omega0
        mw = m * W
        return np.array([
            v[1] / m - 0.5 * g * v[0],
            -mw * v[0] - 0.5 * g * v[1],
            v[4] / m - g * v[2] + pref * (u.real * u.real + u.imag * u.imag) / (2.0 * m),
            -mw * v[4] - g * v[3] + pref * m * (du.real * du.real + du.imag * du.imag) / 2.0,
            -2.0 * mw * v[2] + 2.0 * v[3] / m - g * v[4]
            + pref * (u.real * du.real + u.imag * du.imag),
        ])


def assemble_moment_ode(mode: FloquetMode, m: float, bath: BathParams) -> MomentODE:
    """Generator of dv/dt = M(t) v + C(t) for the master equation."""
    return MomentODE(mode, m, bath)


def _raw_from_state(s: MomentState) -> np.ndarray:
    return np.array([
        s.mean_x,
        s.mean_p,
        s.var_x + s.mean_x**2,
        s.var_p + s.mean_p**2,
        2.0 * s.cov_sym + 2.0 * s.mean_x * s.mean_p,
    ])


def _central_from_raw(v: np.ndarray):
    mean_x, mean_p = v[0], v[1]
    var_x = v[2] - mean_x**2
    var_p = v[3] - mean_p**2
    cov = 0.5 * v[4] - mean_x * mean_p
    return mean_x, mean_p, var_x, var_p, cov


def _check_uncertainty(var_x, var_p, cov, where: str):
    het = var_x * var_p - cov**2
    bound = (HBAR / 2.0) ** 2 * (1.0 - UNCERTAINTY_TOL)
    bad = het < bound
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise RuntimeError(
            f"uncertainty invariant violated {where} (sample {idx}): "
            f"var_x*var_p - cov^2 = {np.atleast_1d(het)[idx]:.6e} < {bound:.6e}"
        )


def propagate_moments(
    state0: MomentState,
    ode: MomentODE,
    t_end: float,
    n_samples: int = 2048,
    t_eval=None,
) -> MomentTrajectory:
    """Adaptive integration of the moment equations.

    The generalized uncertainty relation is checked at every sample; a
    violation beyond tolerance means the generator or the mode is broken
    and raises.  t_eval overrides the uniform sampling (e.g. to resolve
    only the late-time window finely).
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if t_eval is None:
        t_eval = np.linspace(0.0, t_end, n_samples)
    else:
        t_eval = np.asarray(t_eval, dtype=float)
    sol = solve_ivp(
        ode.rhs, (0.0, t_end), _raw_from_state(state0),
        method="DOP853", rtol=PROPAGATE_RTOL, atol=PROPAGATE_ATOL, t_eval=t_eval,
    )
    if not sol.success:
        raise hill.IntegrationError(f"moment propagation failed: {sol.message}")
    mean_x, mean_p, var_x, var_p, cov = _central_from_raw(sol.y)
    _check_uncertainty(var_x, var_p, cov, "along trajectory")
    return MomentTrajectory(
        sol.t, mean_x, mean_p, var_x, var_p, cov,
        omega=ode.omega, omega0=ode.omega0, gamma=ode.gamma, N=ode.N, m=ode.m,
    )


def reference_oscillator(
    state0: MomentState,
    omega0: float,
    bath: BathParams,
    t_end: float,
    m: float,
    n_samples: int = 2048,
) -> MomentTrajectory:
    """Moments of the static damped oscillator at omega0 (no micromotion).

    This is the textbook comparison dynamics: the same equations with
    W = omega0^2, u = exp(i omega0 t) and N = n_th(omega0); its asymptotic
    occupation is the plain thermal one.
    """
    if omega0 <= 0:
        raise ValueError("omega0 must be positive")
    g = bath.resolve_gamma(omega0)
    n_bar = thermal_occupation(omega0, bath.kT) if bath.kT > 0 else 0.0
    pref = g * (2.0 * n_bar + 1.0) * HBAR / omega0
    M = np.array([
        [-0.5 * g, 1.0 / m, 0.0, 0.0, 0.0],
        [-m * omega0**2, -0.5 * g, 0.0, 0.0, 0.0],
        [0.0, 0.0, -g, 0.0, 1.0 / m],
        [0.0, 0.0, 0.0, -g, -m * omega0**2],
        [0.0, 0.0, -2.0 * m * omega0**2, 2.0 / m, -g],
    ])
    C = np.array([0.0, 0.0, pref / (2.0 * m), pref * m * omega0**2 / 2.0, 0.0])

    t_eval = np.linspace(0.0, t_end, n_samples)
    sol = solve_ivp(
        lambda t, v: M @ v + C, (0.0, t_end), _raw_from_state(state0),
        method="DOP853", rtol=PROPAGATE_RTOL, atol=PROPAGATE_ATOL, t_eval=t_eval,
    )
    if not sol.success:
        raise hill.IntegrationError(f"reference-oscillator propagation failed: {sol.message}")
    mean_x, mean_p, var_x, var_p, cov = _central_from_raw(sol.y)
    _check_uncertainty(var_x, var_p, cov, "along reference trajectory")
    return MomentTrajectory(
        sol.t, mean_x, mean_p, var_x, var_p, cov,
        omega=omega0, omega0=omega0, gamma=g, N=n_bar, m=m,
    )


def quasistationary_moments(mode: FloquetMode, m: float, N: float, t) -> tuple:
    """Analytic asymptotic second moments (var_x, var_p, cov_sym) at time t.

    The cooled state has <A^dag A> = N and no coherences, which pins the
    periodic orbit of the second moments; useful as an oracle.
    """
    u, du = evaluate_mode(mode, t)
    s = (2.0 * N + 1.0) * HBAR / (2.0 * mode.omega0)
    var_x = s * np.abs(u) ** 2 / m
    var_p = s * m * np.abs(du) ** 2
    cov = s * (u * np.conj(du)).real
    return var_x, var_p, cov


# ----------------------------------------------------------------------
# truncated-Fock-space oracle
# ----------------------------------------------------------------------

def _ladder(n_max: int) -> np.ndarray:
    a = np.zeros((n_max, n_max), dtype=complex)
    for n in range(1, n_max):
        a[n - 1, n] = math.sqrt(n)
    return a


def _gaussian_density_matrix(state: MomentState, m: float, omega0: float, n_max: int) -> np.ndarray:
    """rho of a Gaussian state in the reference-oscillator number basis.

    Built as displaced-squeezed-thermal, D(alpha) S(z) rho_th S^dag D^dag;
    the squeeze axis is perpendicular to the covariance's large principal
    axis.  Raises when the truncated basis cannot hold the state (tail
    weight above 1e-8) and verifies the construction against the
    requested moments before use.
    """
    a = _ladder(n_max)
    adag = a.conj().T
    # dimensionless quadrature covariance (vacuum = 1/2 on the diagonal)
    sx = state.var_x * m * omega0 / HBAR
    sp = state.var_p / (HBAR * m * omega0)
    sxp = state.cov_sym / HBAR
    cov = np.array([[sx, sxp], [sxp, sp]])
    det = float(np.linalg.det(cov))
    nu = math.sqrt(max(det, 0.25))  # symplectic eigenvalue, >= 1/2
    n_bar = nu - 0.5
    evals, evecs = np.linalg.eigh(cov)
    r = 0.25 * math.log(evals[1] / evals[0])  # anti-squeezed along evecs[:,1]
    theta = math.atan2(evecs[1, 1], evecs[0, 1])  # direction of the large axis

    if n_bar < 1e-12:
        rho = np.zeros((n_max, n_max), dtype=complex)
        rho[0, 0] = 1.0
    else:
        ratio = n_bar / (n_bar + 1.0)
        p = ratio ** np.arange(n_max) * (1.0 - ratio)
        rho = np.diag(p).astype(complex)
    if abs(r) > 1e-14:
        z = -r * np.exp(2j * theta)
        S = expm(0.5 * (np.conj(z) * (a @ a) - z * (adag @ adag)))
        rho = S @ rho @ S.conj().T
    x_op = math.sqrt(HBAR / (2.0 * m * omega0)) * (a + adag)
    p_op = 1j * math.sqrt(HBAR * m * omega0 / 2.0) * (adag - a)
    alpha = (state.mean_x * math.sqrt(m * omega0 / HBAR)
             + 1j * state.mean_p / math.sqrt(HBAR * m * omega0)) / math.sqrt(2.0)
    if abs(alpha) > 0:
        D = expm(alpha * adag - np.conj(alpha) * a)
        rho = D @ rho @ D.conj().T
    rho /= np.trace(rho).real

    tail = _fock_tail_weight(rho)
    if tail > 1e-8:
        raise ValueError(
            f"initial state tail weight {tail:.2e} > 1e-8 at n_max={n_max}"
        )

    # guard: the construction must reproduce the requested moments
    got_x = np.trace(rho @ x_op).real
    got_p = np.trace(rho @ p_op).real
    got_xx = np.trace(rho @ x_op @ x_op).real - got_x**2
    got_pp = np.trace(rho @ p_op @ p_op).real - got_p**2
    got_xp = 0.5 * np.trace(rho @ (x_op @ p_op + p_op @ x_op)).real - got_x * got_p
    scale_x, scale_p = math.sqrt(state.var_x), math.sqrt(state.var_p)
    checks = [
        abs(got_x - state.mean_x) / scale_x,
        abs(got_p - state.mean_p) / scale_p,
        abs(got_xx - state.var_x) / state.var_x,
        abs(got_pp - state.var_p) / state.var_p,
        abs(got_xp - state.cov_sym) / (scale_x * scale_p),
    ]
    if max(checks) > 1e-6:
        raise RuntimeError(
            f"Gaussian state construction failed to match moments (errors {checks}); "
            "increase n_max or check the squeezing convention"
        )
    return rho


def _fock_tail_weight(rho: np.ndarray, levels: int = 3) -> float:
    return float(np.sum(np.diag(rho).real[-levels:]))


# Every operator entering the master equation (x, p, H, C_S) couples
# |n> only to |n +- 2|, so they are stored as bands {offset: diagonal}
# and applied in O(n^2) instead of O(n^3) dense products.

def _band_apply_left(bands: dict, rho: np.ndarray) -> np.ndarray:
    n = rho.shape[0]
    out = np.zeros_like(rho)
    for k, v in bands.items():
        if k == 0:
            out += v[:, None] * rho
        elif k > 0:  # V[i, i+k] = v[i]
            out[: n - k] += v[:, None] * rho[k:]
        else:  # V[i-k... V[i+|k|, i] = v[i]
            out[-k:] += v[:, None] * rho[: n + k]
    return out


def _quadrature_bands(m: float, omega0: float, n_max: int):
    n = np.arange(n_max, dtype=float)
    root = np.sqrt(n[1:])  # <n-1| a |n>
    cx = math.sqrt(HBAR / (2.0 * m * omega0))
    cp = math.sqrt(HBAR * m * omega0 / 2.0)
    x_b = {+1: cx * root + 0j, -1: cx * root + 0j}
    p_b = {+1: -1j * cp * root, -1: 1j * cp * root}

    def mul(a_b, b_b):
        # product of two +-1-band operators: bands 0, +-2
        out = {0: np.zeros(n_max, dtype=complex),
               2: np.zeros(n_max - 2, dtype=complex),
               -2: np.zeros(n_max - 2, dtype=complex)}
        # (AB)[i,i] = A[i,i+1]B[i+1,i] + A[i,i-1]B[i-1,i]
        out[0][: n_max - 1] += a_b[+1] * b_b[-1]
        out[0][1:] += a_b[-1] * b_b[+1]
        # (AB)[i,i+2] = A[i,i+1]B[i+1,i+2]
        out[2] = a_b[+1][: n_max - 2] * b_b[+1][1:]
        # (AB)[i+2,i] = A[i+2,i+1]B[i+1,i]
        out[-2] = a_b[-1][1:] * b_b[-1][: n_max - 2]
        return out

    return x_b, p_b, mul(x_b, x_b), mul(p_b, p_b), mul(x_b, p_b), mul(p_b, x_b)


@numba.njit(cache=True, fastmath=True)
def _fock_rhs_kernel(rho_pad, n, h0, hu, hd, su, sd, lu, ld, gd, gu, hbar, out):
    """Fused Liouvillian application.

    rho_pad is (n+4)x(n+4) with the state at offset 2 and a zero margin,
    so every band access is branch-free.  h0/hu/hd are H_nh[i,i],
    H_nh[i,i+2], H_nh[i,i-2]; su[i]=sqrt(i+1) (0 at the edge), sd[i]=
    sqrt(i); lu/ld the scalar coefficients of the +-1 bands of C_S.
    """
    luc = np.conj(lu)
    ldc = np.conj(ld)
    minus_i_over_h = -1j / hbar
    h0c = np.conj(h0)
    huc = np.conj(hu)
    hdc = np.conj(hd)
    # column coefficients of the two jump sandwiches
    c1u = gd * luc * su  # pairs rho[., j+1] in C rho C^dag
    c1d = gd * ldc * sd
    c2u = gu * ld * su
    c2d = gu * lu * sd
    for i in range(n):
        ip = i + 2
        r0 = rho_pad[ip]
        rU = rho_pad[ip + 2]
        rD = rho_pad[ip - 2]
        ru = rho_pad[ip + 1]
        rd = rho_pad[ip - 1]
        a1 = lu * su[i]
        b1 = ld * sd[i]
        a2 = ldc * su[i]
        b2 = luc * sd[i]
        h0i = h0[i]
        hui = hu[i]
        hdi = hd[i]
        for j in range(n):
            jp = j + 2
            h_val = (h0i * r0[jp] + hui * rU[jp] + hdi * rD[jp]
                     - r0[jp] * h0c[j] - r0[jp - 2] * hdc[j] - r0[jp + 2] * huc[j])
            j1 = a1 * (c1u[j] * ru[jp + 1] + c1d[j] * ru[jp - 1]) \
                + b1 * (c1u[j] * rd[jp + 1] + c1d[j] * rd[jp - 1])
            j2 = a2 * (c2u[j] * ru[jp + 1] + c2d[j] * ru[jp - 1]) \
                + b2 * (c2u[j] * rd[jp + 1] + c2d[j] * rd[jp - 1])
            out[i, j] = minus_i_over_h * h_val + j1 + j2


def _band_as_rows(bands: dict, n: int):
    """(diag, up2, dn2) rows: V[i,i], V[i,i+2], V[i,i-2], zero padded."""
    diag = np.zeros(n, dtype=complex)
    up = np.zeros(n, dtype=complex)
    dn = np.zeros(n, dtype=complex)
    if 0 in bands:
        diag[:] = bands[0]
    if 2 in bands:
        up[: n - 2] = bands[2]
    if -2 in bands:
        dn[2:] = bands[-2]
    return diag, up, dn


def _fock_run(mode, m, bath, n_max, state0, t_end, n_samples, rtol=1e-9, atol=1e-10):
    omega = mode.omega
    omega0 = mode.omega0
    g = bath.resolve_gamma(omega0)
    N = effective_occupation(mode, bath).N
    x_b, p_b, x2_b, p2_b, xp_b, px_b = _quadrature_bands(m, omega0, n_max)
    ns, cs = mode.arrays()
    nu = omega0 + ns * omega
    q = mode.q

    rho0 = _gaussian_density_matrix(state0, m, omega0, n_max)

    sqm = math.sqrt(m / (2.0 * HBAR * omega0))
    sqp = 1.0 / math.sqrt(2.0 * m * HBAR * omega0)
    cx = math.sqrt(HBAR / (2.0 * m * omega0))
    cp = math.sqrt(HBAR * m * omega0 / 2.0)

    hk0, hku, hkd = _band_as_rows({k: v / (2.0 * m) for k, v in p2_b.items()}, n_max)
    x20, x2u, x2d = _band_as_rows(x2_b, n_max)
    p20, p2u, p2d = _band_as_rows(p2_b, n_max)
    xp0, xpu, xpd = _band_as_rows(xp_b, n_max)
    px0, pxu, pxd = _band_as_rows(px_b, n_max)
    su = np.sqrt(np.arange(1, n_max + 1, dtype=float))
    su[-1] = 0.0  # no coupling out of the truncated top
    sd = np.sqrt(np.arange(n_max, dtype=float))
    gd = g * (N + 1.0)
    gu = g * N
    rho_pad = np.zeros((n_max + 4, n_max + 4), dtype=complex)
    out = np.empty((n_max, n_max), dtype=complex)

    def rhs(t, rho_flat):
        phase = np.exp(1j * nu * t)
        u = np.dot(cs, phase)
        du = np.dot(1j * nu * cs, phase)
        W = 0.5 * omega**2 * q * math.cos(omega * t)
        ax = -1j * sqm * du
        bp = 1j * u * sqp
        cc = (ax * np.conj(ax)).real
        bb = (bp * np.conj(bp)).real
        apb = np.conj(ax) * bp
        abp = ax * np.conj(bp)
        w2 = 0.5 * m * W
        diss = -0.5j * HBAR * (gd + gu)
        h0 = hk0 + w2 * x20 + diss * (cc * x20 + bb * p20) \
            - 0.5j * HBAR * ((gd * apb + gu * abp) * xp0 + (gd * abp + gu * apb) * px0)
        hu = hku + w2 * x2u + diss * (cc * x2u + bb * p2u) \
            - 0.5j * HBAR * ((gd * apb + gu * abp) * xpu + (gd * abp + gu * apb) * pxu)
        hd = hkd + w2 * x2d + diss * (cc * x2d + bb * p2d) \
            - 0.5j * HBAR * ((gd * apb + gu * abp) * xpd + (gd * abp + gu * apb) * pxd)
        lu_c = ax * cx - 1j * bp * cp  # C_S[i, i+1] / sqrt(i+1)
        ld_c = ax * cx + 1j * bp * cp  # C_S[i+1, i] / sqrt(i+1)
        rho_pad[2:-2, 2:-2] = rho_flat.reshape(n_max, n_max)
        _fock_rhs_kernel(rho_pad, n_max, h0, hu, hd, su, sd, lu_c, ld_c, gd, gu, HBAR, out)
        return out.ravel().copy()

    t_eval = np.linspace(0.0, t_end, n_samples)
    sol = solve_ivp(
        rhs, (0.0, t_end), rho0.ravel(),
        method="DOP853", rtol=rtol, atol=atol, t_eval=t_eval,
    )
    if not sol.success:
        raise hill.IntegrationError(f"Fock-basis integration failed: {sol.message}")

    n_t = len(sol.t)
    mean_x = np.empty(n_t)
    mean_p = np.empty(n_t)
    var_x = np.empty(n_t)
    var_p = np.empty(n_t)
    cov = np.empty(n_t)
    for i in range(n_t):
        rho = sol.y[:, i].reshape(n_max, n_max)
        mean_x[i] = np.trace(_band_apply_left(x_b, rho)).real
        mean_p[i] = np.trace(_band_apply_left(p_b, rho)).real
        var_x[i] = np.trace(_band_apply_left(x2_b, rho)).real - mean_x[i] ** 2
        var_p[i] = np.trace(_band_apply_left(p2_b, rho)).real - mean_p[i] ** 2
        sym = 0.5 * (np.trace(_band_apply_left(xp_b, rho)) + np.trace(_band_apply_left(px_b, rho)))
        cov[i] = sym.real - mean_x[i] * mean_p[i]
    return MomentTrajectory(
        sol.t, mean_x, mean_p, var_x, var_p, cov,
        omega=omega, omega0=omega0, gamma=g, N=N, m=m,
    )


def fock_oracle(
    mode: FloquetMode,
    m: float,
    bath: BathParams,
    n_max: int,
    state0: MomentState,
    t_end: float,
    n_samples: int = 512,
    check_convergence: bool = True,
    convergence_tol: float = 1e-6,
) -> MomentTrajectory:
    """Brute-force master-equation solution in a truncated number basis.

    Integrates rho(t) directly with the exact quadratic H_S(t) and the
    time-dependent shift operators, then reads off the same five moments
    as the Gaussian propagator.  With check_convergence the run is
    repeated at 2*n_max; if any moment shifts by more than
    convergence_tol relative (scale set by the moment's excursion) the
    truncation is deemed unconverged and the call fails.  The doubled run
    is the one returned.  Note the micromotion coherences converge slowly
    up the ladder: at drive strengths q ~ 0.5 the n_max=40 -> 80 drift is
    of order 1e-3, so a tolerance of 1e-6 needs n_max well above 40.
    """
    if n_max < 16:
        raise ValueError(f"n_max must be >= 16, got {n_max}")
    traj = _fock_run(mode, m, bath, n_max, state0, t_end, n_samples)
    if check_convergence:
        ref = _fock_run(mode, m, bath, 2 * n_max, state0, t_end, n_samples)
        for name in ("mean_x", "mean_p", "var_x", "var_p", "cov_sym"):
            one = getattr(traj, name)
            two = getattr(ref, name)
            scale = np.max(np.abs(two))
            if scale == 0:
                continue
            err = np.max(np.abs(one - two)) / scale
            if err > convergence_tol:
                raise RuntimeError(
                    f"Fock oracle not converged in n_max: {name} changes by {err:.2e} "
                    f"relative when doubling n_max={n_max} (tol {convergence_tol})"
                )
        traj = ref
    return traj


@dataclass(frozen=True)
class KineticEnergySplit:
    zero_point: float  # hbar*omega0/4, ueV
    delta_heat: float  # micromotion excess, ueV

    @property
    def total(self) -> float:
        return self.zero_point + self.delta_heat


def averaged_kinetic_energy(mode: FloquetMode) -> KineticEnergySplit:
    """Period-averaged kinetic energy of the cooled asymptotic state.

    total = (hbar/4 omega0) sum_n c_{2n}^2 (omega0 + n omega)^2; the mass
    cancels.  zero_point is hbar*omega0/4 and delta_heat the micromotion
    excess above it, a factor-of-2 increase in the small-q limit.
    """
    omega0 = mode.omega0
    if omega0 <= 0:
        if len(mode.coeffs) == 1:
            return KineticEnergySplit(zero_point=0.0, delta_heat=0.0)
        raise ValueError("untrapped mode: omega0 must be positive")
    ns, cs = mode.arrays()
    nu = omega0 + ns * mode.omega
    total = HBAR / (4.0 * omega0) * float(np.sum(cs**2 * nu**2))
    zp = HBAR * omega0 / 4.0
    return KineticEnergySplit(zero_point=zp, delta_heat=total - zp)


def detect_quasistationary(traj: MomentTrajectory, n_phase: int = 128) -> QuasiStationaryVerdict:
    """Test whether the late-time second moments are drive-periodic.

    Compares the last two full drive periods (period pi in tau) of the
    second moments on a common phase grid; relative deviation below 1e-3
    means quasi-stationary.  Constant moments count as the degenerate
    (stationary) periodic case.  The trajectory must be long enough for
    transients: t_end >= 5/gamma (gamma = 0 never settles).
    """
    if traj.gamma <= 0:
        return QuasiStationaryVerdict(False, math.pi, math.inf, False)
    t_end = traj.t[-1]
    period_t = 2.0 * math.pi / traj.omega
    if t_end < 3.0 * period_t:
        raise ValueError("trajectory must cover at least three drive periods")

    # cov_sym can vanish identically, so its scale is floored by the
    # geometric mean of the variances
    sx = float(np.max(np.abs(traj.var_x)))
    sp = float(np.max(np.abs(traj.var_p)))
    floors = {"var_x": sx, "var_p": sp, "cov_sym": math.sqrt(sx * sp)}
    devs = []
    spans = []
    for name in ("var_x", "var_p", "cov_sym"):
        y = getattr(traj, name)
        grid_a = t_end - 2.0 * period_t + np.linspace(0.0, period_t, n_phase, endpoint=False)
        grid_b = grid_a + period_t
        ya = np.interp(grid_a, traj.t, y)
        yb = np.interp(grid_b, traj.t, y)
        scale = max(np.max(np.abs(yb)), 1e-3 * floors[name], 1e-300)
        devs.append(np.max(np.abs(ya - yb)) / scale)
        spans.append(np.ptp(yb) / scale)
    max_dev = float(max(devs))
    if max(spans) < 1e-6 and max_dev < 1e-6:
        # constant moments: the degenerate (period-free) periodic case
        return QuasiStationaryVerdict(True, math.pi, max_dev, True)
    if t_end < 5.0 / traj.gamma:
        raise ValueError(
            f"trajectory too short for transients: t_end={t_end} < 5/gamma={5.0 / traj.gamma}"
        )
    return QuasiStationaryVerdict(
        quasi_stationary=max_dev < 1e-3,
        period_tau=math.pi,
        max_rel_deviation=max_dev,
        stationary=False,
    )


def lamb_dicke_check(traj: MomentTrajectory, k: float):
    """Diagnostic for the quadratic-potential approximation.

    Returns (max k|<x>|, max k sigma_x, ok); either exceeding 0.3 flags
    the run as outside the Lamb-Dicke regime.
    """
    kx = float(np.max(np.abs(traj.mean_x))) * k
    ksig = float(np.max(np.sqrt(traj.var_x))) * k
    ok = kx <= 0.3 and ksig <= 0.3
    if not ok:
        warnings.warn(
            f"Lamb-Dicke diagnostic: k|<x>|={kx:.3g}, k sigma_x={ksig:.3g} exceed 0.3",
            stacklevel=2,
        )
    return kx, ksig, ok
