import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from sawlattice import hill, qme
from sawlattice.hill import FloquetMode
from sawlattice.units import HBAR


def pseudo_mode(beta=0.34, omega=300.0):
    """Single-coefficient mode u = exp(i omega0 t): the static-oscillator limit."""
    return FloquetMode(q=0.0, beta_exp=beta, coeffs={0: 1.0}, omega=omega, n_trunc=8)


# ---------------------------------------------------------------- shift ops

def test_shift_coefficients_standard_annihilation_limit(cooling_setup):
    # in the pseudopotential limit C_S(0) is the textbook annihilation
    # operator and C_S(t) just rotates: alpha_x(0) = m*omega0/sqrt(2 m hbar
    # omega0), beta_p(0) = i/sqrt(2 m hbar omega0)
    m = cooling_setup["m"]
    mode = pseudo_mode()
    w0 = mode.omega0
    sc = qme.shift_coefficients(mode, m, 0.0)
    norm = math.sqrt(2.0 * m * HBAR * w0)
    assert sc.alpha_x == pytest.approx(m * w0 / norm, rel=1e-12)
    assert sc.beta_p == pytest.approx(1j / norm, rel=1e-12)
    # at later times: C_S(t) = exp(i omega0 t) * (standard annihilation)
    for t in (0.013, 0.4):
        sct = qme.shift_coefficients(mode, m, t)
        phase = np.exp(1j * w0 * t)
        assert sct.alpha_x == pytest.approx(phase * m * w0 / norm, rel=1e-12)
        assert sct.beta_p == pytest.approx(phase * 1j / norm, rel=1e-12)


def test_shift_coefficients_commutator(cooling_setup):
    mode, m = cooling_setup["mode"], cooling_setup["m"]
    rng = np.random.default_rng(1)
    for t in rng.uniform(0.0, 0.5, 10):
        sc = qme.shift_coefficients(mode, m, float(t))
        assert sc.commutator_norm() == pytest.approx(1.0, abs=1e-10)


def test_shift_coefficients_untrapped():
    flat = FloquetMode(q=0.0, beta_exp=0.0, coeffs={0: 1.0}, omega=300.0, n_trunc=8)
    with pytest.raises(ValueError, match="untrapped"):
        qme.shift_coefficients(flat, 1e-5, 0.0)


# ------------------------------------------------------- occupation number

def test_occupation_reduces_to_thermal(cooling_setup):
    mode = pseudo_mode()
    kT = 0.4 * HBAR * mode.omega0
    occ = qme.effective_occupation(mode, qme.BathParams(gamma=0.0, kT=kT))
    assert occ.N == pytest.approx(qme.thermal_occupation(mode.omega0, kT), rel=1e-12)


def test_occupation_zero_at_t0_without_drive():
    occ = qme.effective_occupation(pseudo_mode(), qme.BathParams(gamma=0.0, kT=0.0))
    assert occ.N == 0.0


def test_occupation_micromotion_heating_at_t0(cooling_setup):
    # frozen from the coefficient sum: negative-frequency components keep
    # heating even a zero-temperature bath
    mode = cooling_setup["mode"]
    occ = qme.effective_occupation(mode, qme.BathParams(gamma=0.0, kT=0.0))
    assert occ.N == pytest.approx(0.157555, rel=1e-4)
    assert all(v >= 0.0 for v in occ.terms.values())
    # independent fold: only n <= -1 components contribute at T = 0
    w0, w = mode.omega0, mode.omega
    manual = sum(c * c * abs(w0 + n * w) / w0 for n, c in mode.coeffs.items() if w0 + n * w < 0)
    assert occ.N == pytest.approx(manual, rel=1e-12)


def test_occupation_terms_positive_corpus(cooling_setup):
    w0 = cooling_setup["omega0"]
    for q in (0.1, 0.3, 0.47):
        mode = hill.floquet_coefficients(-q, omega=cooling_setup["mode"].omega)
        for kT in (0.0, 0.05 * HBAR * w0, 2.0 * HBAR * w0):
            occ = qme.effective_occupation(mode, qme.BathParams(gamma=0.0, kT=kT))
            assert all(v >= -1e-18 for v in occ.terms.values())
            assert occ.N >= 0.0


def test_thermal_occupation_function():
    assert qme.thermal_occupation(10.0, 0.0) == 0.0
    assert qme.thermal_occupation(-10.0, 0.0) == -1.0
    kT = 2.0
    nb = qme.thermal_occupation(3.0, kT)
    assert nb == pytest.approx(1.0 / math.expm1(HBAR * 3.0 / kT), rel=1e-12)
    # negative-frequency value folds to -(1 + n_bar(|nu|))
    assert qme.thermal_occupation(-3.0, kT) == pytest.approx(-(1.0 + nb), rel=1e-12)
    with pytest.raises(ValueError):
        qme.thermal_occupation(0.0, kT)


# ------------------------------------------------------------- bath params

def test_bath_params():
    w0 = 50.0
    assert qme.BathParams(gamma=1.0, kT=0.0).resolve_gamma(w0) == 1.0
    assert qme.BathParams(zeta=0.01).resolve_gamma(w0) == pytest.approx(0.5)
    assert qme.BathParams().resolve_gamma(w0) == pytest.approx(qme.DEFAULT_ZETA * w0)
    kelvin = qme.BathParams.from_kelvin(0.1, gamma=1.0)
    assert kelvin.kT == pytest.approx(8.617333262, rel=1e-9)  # 100 mK in ueV
    for bad in (dict(gamma=-1.0), dict(kT=-1.0), dict(zeta=-0.1)):
        with pytest.raises(ValueError):
            qme.BathParams(**bad)


def test_moment_state_validation(cooling_setup):
    m, w0 = cooling_setup["m"], cooling_setup["omega0"]
    s = qme.MomentState.coherent(m, w0)
    assert s.uncertainty_product() == pytest.approx((HBAR / 2.0) ** 2, rel=1e-12)
    with pytest.raises(ValueError, match="positive"):
        qme.MomentState(0.0, 0.0, -1.0, 1.0, 0.0)
    with pytest.raises(ValueError, match="uncertainty"):
        qme.MomentState(0.0, 0.0, 0.5 * s.var_x, 0.5 * s.var_p, 0.0)


# ----------------------------------------------------------- moment system

def test_moment_matrix_first_rows(cooling_setup):
    mode, m, bath = cooling_setup["mode"], cooling_setup["m"], cooling_setup["bath"]
    ode = qme.assemble_moment_ode(mode, m, bath)
    g = ode.gamma
    for t in (0.0, 0.00123, 0.0321):
        M, C = ode.matrix(t)
        W = ode.spring(t)
        assert np.allclose(M[0], [-0.5 * g, 1.0 / m, 0.0, 0.0, 0.0], rtol=1e-14)
        assert np.allclose(M[1], [-m * W, -0.5 * g, 0.0, 0.0, 0.0], rtol=1e-14)
        assert C[0] == 0.0 and C[1] == 0.0
        # rhs fast path agrees with the matrix form
        v = np.array([1.0, -2.0, 3.0, 5.0, -0.7])
        assert np.allclose(ode.rhs(t, v), M @ v + C, rtol=1e-13, atol=1e-16)
    # spring amplitude read-off
    q = abs(mode.q)
    assert abs(ode.spring(0.0)) == pytest.approx(0.5 * mode.omega**2 * q, rel=1e-12)


def test_gamma_zero_heisenberg_pair(cooling_setup):
    mode, m = cooling_setup["mode"], cooling_setup["m"]
    ode = qme.assemble_moment_ode(mode, m, qme.BathParams(gamma=0.0, kT=0.0))
    M, C = ode.matrix(0.017)
    assert M[0, 0] == 0.0 and M[1, 1] == 0.0
    assert np.all(C == 0.0)


def test_gamma_zero_matches_classical_ode(cooling_setup):
    mode, m, state0 = cooling_setup["mode"], cooling_setup["m"], cooling_setup["state0"]
    ode = qme.assemble_moment_ode(mode, m, qme.BathParams(gamma=0.0, kT=0.0))
    t_end = 6.0 * 2.0 * math.pi / mode.omega0
    traj = qme.propagate_moments(state0, ode, t_end, n_samples=600)
    sol = solve_ivp(
        lambda t, y: [y[1] / m, -m * ode.spring(t) * y[0]],
        (0.0, t_end), [state0.mean_x, state0.mean_p],
        method="DOP853", rtol=1e-12, atol=1e-14, t_eval=traj.t,
    )
    scale = np.max(np.abs(sol.y[0]))
    assert np.max(np.abs(traj.mean_x - sol.y[0])) < 1e-6 * scale


def test_first_moment_decay_rate(cooling_setup):
    # envelope extracted by the Wronskian projection is ripple-free, so
    # the fitted slope must equal gamma/2 essentially exactly
    mode, m, bath, state0 = (cooling_setup[k] for k in ("mode", "m", "bath", "state0"))
    ode = qme.assemble_moment_ode(mode, m, bath)
    t_end = 6.0 * 2.0 * math.pi / mode.omega0
    traj = qme.propagate_moments(state0, ode, t_end, n_samples=3000)
    u, du = hill.evaluate_mode(mode, traj.t)
    c = (np.conj(u) * traj.mean_p / m - np.conj(du) * traj.mean_x) / (1j * mode.omega0)
    slope = np.polyfit(traj.t, np.log(np.abs(c)), 1)[0]
    assert -slope == pytest.approx(0.5 * ode.gamma, rel=0.02)


def test_uncertainty_preserved(cooling_setup):
    mode, m, bath, state0 = (cooling_setup[k] for k in ("mode", "m", "bath", "state0"))
    ode = qme.assemble_moment_ode(mode, m, bath)
    traj = qme.propagate_moments(state0, ode, 3.0 * 2.0 * math.pi / mode.omega0, n_samples=500)
    het = traj.var_x * traj.var_p - traj.cov_sym**2
    assert np.all(het >= (HBAR / 2.0) ** 2 * (1.0 - 1e-8))


def test_quasistationary_orbit_is_fixed_point(cooling_setup):
    # seeding the propagation with the analytic asymptotic moments must
    # keep it on the periodic orbit
    mode, m, bath = cooling_setup["mode"], cooling_setup["m"], cooling_setup["bath"]
    ode = qme.assemble_moment_ode(mode, m, bath)
    vx, vp, cov = qme.quasistationary_moments(mode, m, ode.N, 0.0)
    state = qme.MomentState(0.0, 0.0, float(vx), float(vp), float(cov))
    T = 2.0 * math.pi / mode.omega
    traj = qme.propagate_moments(state, ode, 5.0 * T, n_samples=400)
    vx_t, vp_t, cov_t = qme.quasistationary_moments(mode, m, ode.N, traj.t)
    assert np.max(np.abs(traj.var_x - vx_t)) < 1e-8 * np.max(vx_t)
    assert np.max(np.abs(traj.var_p - vp_t)) < 1e-8 * np.max(vp_t)
    assert np.max(np.abs(traj.cov_sym - cov_t)) < 1e-8 * np.max(np.abs(cov_t))


def test_regime_guard_warnings(cooling_setup):
    mode, m = cooling_setup["mode"], cooling_setup["m"]
    w0 = mode.omega0
    with pytest.warns(UserWarning, match="cooling guard"):
        qme.assemble_moment_ode(mode, m, qme.BathParams(gamma=1e-3 * w0, kT=0.5 * HBAR * w0))
    with pytest.warns(UserWarning, match="Born guard"):
        qme.assemble_moment_ode(mode, m, qme.BathParams(gamma=0.5 * w0, kT=0.01 * HBAR * w0))


# ------------------------------------------------------ reference oscillator

def test_reference_oscillator_fixed_point(cooling_setup):
    m = cooling_setup["m"]
    w0 = cooling_setup["omega0"]
    bath = qme.BathParams(gamma=0.05 * w0, kT=0.3 * HBAR * w0)
    n_bar = qme.thermal_occupation(w0, bath.kT)
    s0 = qme.MomentState.coherent(m, w0, mean_p=0.01 * HBAR * cooling_setup["k"])
    t_end = 40.0 / bath.gamma
    traj = qme.reference_oscillator(s0, w0, bath, t_end, m, n_samples=800)
    occ = (traj.var_x[-1] * m * w0 / HBAR + traj.var_p[-1] / (HBAR * m * w0) - 1.0) / 2.0
    assert occ == pytest.approx(n_bar, rel=1e-6, abs=1e-9)
    # first moments decayed by e^{-gamma t/2} = e^{-20}
    assert abs(traj.mean_x[-1]) < 1e-8 * np.max(np.abs(traj.mean_x))


def test_reference_oscillator_thermal_init_constant(cooling_setup):
    m, w0 = cooling_setup["m"], cooling_setup["omega0"]
    bath = qme.BathParams(gamma=0.01 * w0, kT=0.2 * HBAR * w0)
    s0 = qme.MomentState.thermal(m, w0, qme.thermal_occupation(w0, bath.kT))
    traj = qme.reference_oscillator(s0, w0, bath, 10.0 * 2.0 * math.pi / w0, m, n_samples=300)
    assert np.ptp(traj.var_x) < 1e-9 * traj.var_x[0]
    verdict = qme.detect_quasistationary(traj)
    assert verdict.quasi_stationary and verdict.stationary


def test_reference_oscillator_tracks_full_dynamics(cooling_setup):
    # without micromotion the static damped oscillator shadows the full
    # propagation within the ripple band
    mode, m, bath, state0 = (cooling_setup[k] for k in ("mode", "m", "bath", "state0"))
    w0 = mode.omega0
    ode = qme.assemble_moment_ode(mode, m, bath)
    t_end = 4.0 * 2.0 * math.pi / w0
    full = qme.propagate_moments(state0, ode, t_end, n_samples=1200)
    ref = qme.reference_oscillator(state0, w0, bath, t_end, m, n_samples=1200)
    amp = np.max(np.abs(ref.mean_x))
    # measured ripple band at q = 0.47 is ~0.38 of the secular amplitude
    # (leading order q/2 plus the mode's O(q^2) normalization offset)
    dev = np.max(np.abs(full.mean_x - ref.mean_x))
    assert 0.5 * abs(mode.q) * 0.5 < dev / amp < 0.45


def test_detect_quasistationary_gamma_zero(cooling_setup):
    mode, m, state0 = cooling_setup["mode"], cooling_setup["m"], cooling_setup["state0"]
    ode = qme.assemble_moment_ode(mode, m, qme.BathParams(gamma=0.0, kT=0.0))
    traj = qme.propagate_moments(state0, ode, 4.0 * 2.0 * math.pi / mode.omega, n_samples=200)
    assert not qme.detect_quasistationary(traj).quasi_stationary


def test_detect_quasistationary_needs_transients(cooling_setup):
    mode, m, bath, state0 = (cooling_setup[k] for k in ("mode", "m", "bath", "state0"))
    ode = qme.assemble_moment_ode(mode, m, bath)
    traj = qme.propagate_moments(state0, ode, 5.0 * 2.0 * math.pi / mode.omega, n_samples=300)
    with pytest.raises(ValueError, match="transients"):
        qme.detect_quasistationary(traj)


# ------------------------------------------------------------- Fock oracle

def test_fock_oracle_symmetry(cooling_setup):
    # gamma = 0 from the undisplaced ground state: <x> = <p> = 0 forever
    mode, m = cooling_setup["mode"], cooling_setup["m"]
    w0 = mode.omega0
    bath = qme.BathParams(gamma=0.0, kT=0.0)
    s0 = qme.MomentState.coherent(m, w0)
    traj = qme._fock_run(mode, m, bath, 24, s0, 2.0 * 2.0 * math.pi / mode.omega, 60)
    assert np.max(np.abs(traj.mean_x)) < 1e-10 * math.sqrt(s0.var_x)
    assert np.max(np.abs(traj.mean_p)) < 1e-10 * math.sqrt(s0.var_p)


def test_fock_oracle_matches_gaussian_short(cooling_setup):
    mode, m, bath, state0 = (cooling_setup[k] for k in ("mode", "m", "bath", "state0"))
    t_end = 1.0 * 2.0 * math.pi / mode.omega0
    fock = qme._fock_run(mode, m, bath, 48, state0, t_end, 80)
    ode = qme.assemble_moment_ode(mode, m, bath)
    gauss = qme.propagate_moments(state0, ode, t_end, n_samples=80)
    for name in ("mean_x", "mean_p", "var_x", "var_p", "cov_sym"):
        a, b = getattr(gauss, name), getattr(fock, name)
        assert np.max(np.abs(a - b)) < 3e-4 * np.max(np.abs(b)), name


def test_fock_oracle_steady_state_purity(cooling_setup):
    # the cooled quasi-stationary state has det Sigma = ((2N+1) hbar/2)^2
    # at every time (|u|^2 |du|^2 - Re(u du*)^2 = omega0^2 by the
    # Wronskian), so its Gaussian purity is 1/(2N+1) ripple-free; N
    # collapses to the plain thermal occupation as q -> 0
    mode, m = cooling_setup["mode"], cooling_setup["m"]
    w0 = mode.omega0
    bath = qme.BathParams(gamma=0.2 * w0, kT=0.25 * HBAR * w0)
    N = qme.effective_occupation(mode, bath).N
    s0 = qme.MomentState.coherent(m, w0)
    traj = qme._fock_run(mode, m, bath, 48, s0, 30.0 / bath.gamma, 60)
    det = traj.var_x[-1] * traj.var_p[-1] - traj.cov_sym[-1] ** 2
    purity = (HBAR / 2.0) / math.sqrt(det)
    assert purity == pytest.approx(1.0 / (2.0 * N + 1.0), rel=2e-4)
    # same identity straight from the moment propagator in the q -> 0
    # (reference oscillator) limit, where N is the bare thermal occupation
    n_bar = qme.thermal_occupation(w0, bath.kT)
    ref = qme.reference_oscillator(s0, w0, bath, 45.0 / bath.gamma, m, n_samples=60)
    det_ref = ref.var_x[-1] * ref.var_p[-1] - ref.cov_sym[-1] ** 2
    assert (HBAR / 2.0) / math.sqrt(det_ref) == pytest.approx(1.0 / (2.0 * n_bar + 1.0), rel=1e-8)


def test_fock_oracle_convergence_gate(cooling_setup):
    mode, m, bath, state0 = (cooling_setup[k] for k in ("mode", "m", "bath", "state0"))
    t_end = 0.3 * 2.0 * math.pi / mode.omega0
    with pytest.raises(RuntimeError, match="not converged"):
        qme.fock_oracle(mode, m, bath, 16, state0, t_end, n_samples=40,
                        convergence_tol=1e-9)
    with pytest.raises(ValueError, match="n_max"):
        qme.fock_oracle(mode, m, bath, 8, state0, t_end)


def test_fock_oracle_rejects_leaky_state(cooling_setup):
    mode, m, bath = cooling_setup["mode"], cooling_setup["m"], cooling_setup["bath"]
    w0 = mode.omega0
    big = qme.MomentState.coherent(m, w0, mean_x=8.0 * math.sqrt(HBAR / (2 * m * w0)))
    with pytest.raises(ValueError, match="tail weight"):
        qme._fock_run(mode, m, bath, 16, big, 0.01, 5)


def test_gaussian_density_matrix_squeezed_thermal(cooling_setup):
    # exercise the squeezing/rotation branch of the state builder; its
    # internal moment check raises on any convention error
    m, w0 = cooling_setup["m"], cooling_setup["omega0"]
    vac_x = HBAR / (2.0 * m * w0)
    vac_p = HBAR * m * w0 / 2.0
    state = qme.MomentState(
        mean_x=0.4 * math.sqrt(vac_x), mean_p=-0.2 * math.sqrt(vac_p),
        var_x=2.1 * vac_x, var_p=0.8 * vac_p, cov_sym=0.3 * (HBAR / 2.0),
    )
    rho = qme._gaussian_density_matrix(state, m, w0, 48)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    evals = np.linalg.eigvalsh(rho)
    assert evals.min() > -1e-10


# ------------------------------------------------------- kinetic energy

def test_kinetic_energy_pseudopotential_limit():
    mode = pseudo_mode(beta=0.4, omega=250.0)
    ke = qme.averaged_kinetic_energy(mode)
    assert ke.delta_heat == 0.0
    assert ke.total == pytest.approx(HBAR * mode.omega0 / 4.0, rel=1e-14)


def test_kinetic_energy_no_drive_degenerate():
    mode = FloquetMode(q=0.0, beta_exp=0.0, coeffs={0: 1.0}, omega=250.0, n_trunc=8)
    ke = qme.averaged_kinetic_energy(mode)
    assert ke.total == 0.0


def test_kinetic_energy_factor_two(cooling_setup):
    omega = cooling_setup["mode"].omega
    # frozen from the coefficient-sum oracle
    ratios = {0.05: 2.001958, 0.1: 2.007884, 0.4: 2.146686}
    for q, expected in ratios.items():
        mode = hill.floquet_coefficients(-q, omega=omega)
        ke = qme.averaged_kinetic_energy(mode)
        assert ke.total / ke.zero_point == pytest.approx(expected, abs=1e-3)
    # monotone approach to the factor-2 limit from above
    rs = []
    for q in (0.02, 0.1, 0.2, 0.3, 0.4):
        ke = qme.averaged_kinetic_energy(hill.floquet_coefficients(-q, omega=omega))
        rs.append(ke.total / ke.zero_point)
    assert all(r2 >= r1 for r1, r2 in zip(rs, rs[1:]))
    assert rs[0] == pytest.approx(2.0, abs=1e-3)


# ------------------------------------------------------------ diagnostics

def test_lamb_dicke_check(cooling_setup):
    # with n_b ~ 1 the ground-state spread is k*sigma_x ~ 1/(2 sqrt(n_b)),
    # marginal by design: the diagnostic must flag it, while a 4x longer
    # lattice wavelength (16x the bound states) passes
    mode, m, bath, state0, k = (cooling_setup[kk] for kk in ("mode", "m", "bath", "state0", "k"))
    ode = qme.assemble_moment_ode(mode, m, bath)
    traj = qme.propagate_moments(state0, ode, 2.0 * 2.0 * math.pi / mode.omega0, n_samples=300)
    with pytest.warns(UserWarning, match="Lamb-Dicke"):
        kx, ksig, ok = qme.lamb_dicke_check(traj, k)
    assert not ok
    assert kx < 0.3  # the mean stays tiny; the spread is what is marginal
    assert 0.3 < ksig < 1.2
    kx4, ksig4, ok4 = qme.lamb_dicke_check(traj, k / 4.0)
    assert ok4 and ksig4 < 0.3


def test_trajectory_export(tmp_path, cooling_setup):
    mode, m, bath, state0 = (cooling_setup[k] for k in ("mode", "m", "bath", "state0"))
    ode = qme.assemble_moment_ode(mode, m, bath)
    traj = qme.propagate_moments(state0, ode, 0.05, n_samples=20)
    csv = tmp_path / "moments.csv"
    traj.to_csv(csv)
    lines = csv.read_text().splitlines()
    assert lines[0] == "t,tau,mean_x,mean_p,var_x,var_p,cov_sym"
    assert len(lines) == 21
    meta = tmp_path / "moments.meta.json"
    traj.write_metadata(meta)
    import json

    doc = json.loads(meta.read_text())
    assert doc["N_effective"] == pytest.approx(ode.N)
    assert doc["omega0_rad_per_ns"] == pytest.approx(mode.omega0)
