"""Hubbard-parameter estimates and the self-consistency requirement chain.

Deep-lattice tight-binding expressions give the tunneling t, an
image-charge estimate gives the screened on-site repulsion U, and the
exchange J = 4 t^2/U follows.  The feasibility report evaluates the
inequality chain

    hbar*gamma << k_B T << hbar*omega0 << hbar*omega << E_S

link by link ("<<" operationalized as a ratio threshold, default 0.3),
plus the single-transducer amplitude bound, bound-state count,
spin-coherence and heating-budget checks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .scales import DerivedScales
from .units import E2_OVER_4PI_EPS0, HBAR, UEV_PER_NS_IN_MW

MUCH_LESS_RATIO = 0.3  # default reading of "<<"
V_IDT_BOUND = 500.0  # ueV; single-IDT amplitude ceiling
SPIN_EXCHANGE_MIN = 10.0  # J*T2*/hbar must exceed this for coherent exchange

# literature order-of-magnitude presets, ns
T2_STAR_PRESETS = {"GaAs": 15.0, "28Si/SiGe": 1.0e5}


@dataclass(frozen=True)
class HubbardEstimate:
    t_hop: float  # ueV
    U_onsite: float  # ueV
    J_exchange: float  # ueV
    f_scr: float
    d_screen: float  # nm; inf for unscreened
    lattice_a: float  # nm
    n_b: float
    # random on-site disorder is out of scope; the field below only
    # records that the term exists in the lattice model
    disorder_note: str = "on-site disorder term carried symbolically only"


@dataclass(frozen=True)
class ChainLink:
    name: str
    lhs: float  # ueV
    rhs: float  # ueV
    ratio: float
    ok: bool


@dataclass(frozen=True)
class FeasibilityReport:
    chain: tuple
    chain_ok: bool
    relaxed_chain: tuple  # gamma, k_BT << hbar*omega0 variant
    relaxed_ok: bool
    v_idt: float
    v_idt_ok: bool
    n_b: float
    n_b_ok: bool
    spin_exchange: float | None  # J*T2*/hbar
    spin_ok: bool | None
    heat: tuple | None  # (W_heat_saw, W_heat_total, ok), mW
    v_eff: float | None  # m/s
    threshold: float

    def as_dict(self) -> dict:
        return {
            "chain": [vars(l) for l in self.chain],
            "chain_ok": self.chain_ok,
            "relaxed_chain": [vars(l) for l in self.relaxed_chain],
            "relaxed_ok": self.relaxed_ok,
            "v_idt_uev": self.v_idt,
            "v_idt_ok": self.v_idt_ok,
            "n_b": self.n_b,
            "n_b_ok": self.n_b_ok,
            "spin_exchange": self.spin_exchange,
            "spin_ok": self.spin_ok,
            "heat_mw": None if self.heat is None else list(self.heat),
            "v_eff_m_per_s": self.v_eff,
            "much_less_threshold": self.threshold,
        }

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def tunneling(q: float, n_b: float, E_S: float) -> float:
    """Nearest-neighbour tunneling t in ueV from (q, n_b, E_S).

    Uses t/E_S = q^2 exp(-4 n_b) / (2 sqrt(2 pi n_b)) and cross-checks it
    against the recoil form t/E_R = (4/sqrt(pi)) (V0/E_R)^(3/4)
    exp(-2 sqrt(V0/E_R)); the two are algebraically identical through
    V0/E_R = 4 n_b^2 and V0 = (q^2/8) E_S, so any disagreement flags a
    regression.
    """
    if n_b <= 0:
        raise ValueError(f"n_b must be positive, got {n_b}")
    t_es = q * q * math.exp(-4.0 * n_b) / (2.0 * math.sqrt(2.0 * math.pi * n_b)) * E_S

    v0_over_er = 4.0 * n_b * n_b
    e_r = (q * q / 8.0) * E_S / v0_over_er
    t_er = e_r * (4.0 / math.sqrt(math.pi)) * v0_over_er**0.75 * math.exp(-2.0 * math.sqrt(v0_over_er))
    if E_S > 0 and abs(t_es - t_er) > 1e-12 * max(abs(t_es), abs(t_er)):
        raise AssertionError(
            f"tunneling formulas disagree: {t_es} vs {t_er} at q={q}, n_b={n_b}"
        )
    return t_es


def coulomb_onsite(lattice_a: float, eps_r: float, d_screen: float = math.inf):
    """(U, f_scr): on-site Coulomb scale with image-charge screening.

    U = f_scr * e^2/(4 pi eps0 eps_r a);
    f_scr = 1 - [1 + 4 (d/a)^2]^(-1/2), 1 for an unscreened system.
    """
    if lattice_a <= 0:
        raise ValueError(f"lattice_a must be positive, got {lattice_a}")
    if eps_r < 1:
        raise ValueError(f"eps_r must be >= 1, got {eps_r}")
    if math.isinf(d_screen):
        f_scr = 1.0
    else:
        if d_screen < 0:
            raise ValueError(f"d_screen must be >= 0, got {d_screen}")
        f_scr = 1.0 - 1.0 / math.sqrt(1.0 + 4.0 * (d_screen / lattice_a) ** 2)
    u = f_scr * E2_OVER_4PI_EPS0 / (eps_r * lattice_a)
    return u, f_scr


def exchange(t_hop: float, U_onsite: float) -> float:
    """Spin exchange J = 4 t^2 / U (virtual hopping, U >> t)."""
    if U_onsite <= 0:
        raise ValueError(f"U_onsite must be positive, got {U_onsite}")
    return 4.0 * t_hop**2 / U_onsite


def estimate(q: float, scales: DerivedScales, eps_r: float, d_screen: float = math.inf) -> HubbardEstimate:
    """Full (t, U, J) estimate for a drive point and screening distance."""
    t = tunneling(q, scales.n_b, scales.E_S)
    u, f_scr = coulomb_onsite(scales.lattice_a, eps_r, d_screen)
    return HubbardEstimate(
        t_hop=t,
        U_onsite=u,
        J_exchange=exchange(t, u),
        f_scr=f_scr,
        d_screen=d_screen,
        lattice_a=scales.lattice_a,
        n_b=scales.n_b,
    )


def heating_budget(scales: DerivedScales, V0_phonon: float, Q: float, P_cool: float):
    """(W_heat_saw, W_heat_total, ok) in mW.

    W_heat_saw = hbar*omega * (V_SAW/V0_phonon)^2 * omega/Q, the phonon
    population times the cavity decay; V0_phonon is the single-phonon
    amplitude (not the lattice depth).  Total heating carries the
    IDT-inefficiency factor 10; ok iff it stays within the cooling power.
    """
    if Q <= 0:
        raise ValueError(f"Q must be positive, got {Q}")
    if V0_phonon <= 0:
        raise ValueError(f"V0_phonon must be positive, got {V0_phonon}")
    omega = scales.hbar_omega / HBAR  # rad/ns
    n_ph = (scales.V_SAW / V0_phonon) ** 2
    w_saw = scales.hbar_omega * n_ph * (omega / Q) * UEV_PER_NS_IN_MW
    w_total = 10.0 * w_saw
    return w_saw, w_total, w_total <= P_cool


def adiabatic_speed(lattice_a: float, omega0: float, eps_ad: float) -> float:
    """Lattice drag speed v_eff = eps_ad * a * omega0/(2 pi) in m/s.

    eps_ad is the adiabaticity parameter of the phase ramp; a in nm and
    omega0 in rad/ns make a*omega0/(2 pi) come out in nm/ns = m/s.
    """
    if not (0.0 < eps_ad < 1.0):
        raise ValueError(f"eps_ad must be in (0, 1), got {eps_ad}")
    return eps_ad * lattice_a * omega0 / (2.0 * math.pi)


def _link(name: str, lhs: float, rhs: float, threshold: float) -> ChainLink:
    ratio = lhs / rhs if rhs > 0 else math.inf
    return ChainLink(name=name, lhs=lhs, rhs=rhs, ratio=ratio, ok=ratio <= threshold)


def regime_check(
    scales: DerivedScales,
    gamma: float,
    kT: float,
    hubbard: HubbardEstimate | None = None,
    T2_star: float | None = None,
    eps_ad: float | None = None,
    Q: float | None = None,
    V0_phonon: float | None = None,
    P_cool: float | None = None,
    threshold: float = MUCH_LESS_RATIO,
) -> FeasibilityReport:
    """Evaluate every link of the requirement chain for a trap setup.

    gamma in rad/ns, kT in ueV.  A failing report is a valid result; each
    link carries its ratio so the caller can see how much margin is left.
    Optional extras switch on the spin-coherence, adiabatic-transport and
    heating-budget checks.
    """
    hg = HBAR * gamma
    links = (
        _link("hbar_gamma << k_B T", hg, kT, threshold),
        _link("k_B T << hbar_omega0", kT, scales.hbar_omega0, threshold),
        _link("hbar_omega0 << hbar_omega", scales.hbar_omega0, scales.hbar_omega, threshold),
        _link("hbar_omega << E_S", scales.hbar_omega, scales.E_S, threshold),
    )
    relaxed = (
        _link("hbar_gamma << hbar_omega0", hg, scales.hbar_omega0, threshold),
        _link("k_B T << hbar_omega0", kT, scales.hbar_omega0, threshold),
        _link("hbar_omega0 << hbar_omega", scales.hbar_omega0, scales.hbar_omega, threshold),
        _link("hbar_omega << E_S", scales.hbar_omega, scales.E_S, threshold),
    )
    spin = None
    spin_ok = None
    if hubbard is not None and T2_star is not None:
        spin = hubbard.J_exchange * T2_star / HBAR
        spin_ok = spin >= SPIN_EXCHANGE_MIN
    heat = None
    if Q is not None and V0_phonon is not None and P_cool is not None:
        heat = heating_budget(scales, V0_phonon, Q, P_cool)
    v_eff = None
    if eps_ad is not None:
        v_eff = adiabatic_speed(scales.lattice_a, scales.hbar_omega0 / HBAR, eps_ad)
    return FeasibilityReport(
        chain=links,
        chain_ok=all(l.ok for l in links),
        relaxed_chain=relaxed,
        relaxed_ok=all(l.ok for l in relaxed),
        v_idt=scales.V_IDT,
        v_idt_ok=scales.V_IDT <= V_IDT_BOUND,
        n_b=scales.n_b,
        n_b_ok=scales.n_b >= 1.0,
        spin_exchange=spin,
        spin_ok=spin_ok,
        heat=heat,
        v_eff=v_eff,
        threshold=threshold,
    )


# exemplary setup: PSAW-boosted heavy holes with E_S = 1 meV at 50 GHz
CASE_STUDY_E_S = 1000.0  # ueV
CASE_STUDY_FREQUENCY = 50.0e9  # Hz
CASE_STUDY_V_S = 18000.0  # m/s
CASE_STUDY_EPS_R = 9.5
CASE_STUDY_Q = (0.5, 0.7)
CASE_STUDY_D = (10.0, 100.0)  # nm


def case_study() -> dict:
    """The reference parameter table for the exemplary setup.

    Sweeps q in {0.5, 0.7} and screening distance d in {10, 100} nm at
    E_S = 1 meV, f = 50 GHz, v_s = 18 km/s, eps_r = 9.5 and reports the
    derived scale and Hubbard ranges.
    """
    from .scales import DriveConfig, MaterialSystem
    from .units import ELECTRON_MASS

    mass_m0 = 2.0 * CASE_STUDY_E_S / CASE_STUDY_V_S**2 / ELECTRON_MASS
    material = MaterialSystem(
        "case study (GaN-like holes, PSAW)", mass_m0, CASE_STUDY_V_S, CASE_STUDY_EPS_R
    )
    from .scales import derived_scales

    rows = []
    for q in CASE_STUDY_Q:
        drive = DriveConfig(frequency=CASE_STUDY_FREQUENCY, stability_q=q)
        sc = derived_scales(material, drive, order=2)
        t = tunneling(q, sc.n_b, sc.E_S)
        for d in CASE_STUDY_D:
            u, f_scr = coulomb_onsite(sc.lattice_a, CASE_STUDY_EPS_R, d)
            rows.append({
                "hbar_omega_uev": sc.hbar_omega,
                "q": q,
                "hbar_omega0_uev": sc.hbar_omega0,
                "V0_uev": sc.V0,
                "n_b": sc.n_b,
                "a_nm": sc.lattice_a,
                "d_nm": d,
                "t_uev": t,
                "U_uev": u,
                "f_scr": f_scr,
            })
    return {
        "inputs": {
            "E_S_uev": CASE_STUDY_E_S,
            "frequency_hz": CASE_STUDY_FREQUENCY,
            "v_s_m_per_s": CASE_STUDY_V_S,
            "eps_r": CASE_STUDY_EPS_R,
        },
        "rows": rows,
    }


def case_study_to_csv(table: dict, path):
    cols = ["hbar_omega_uev", "q", "hbar_omega0_uev", "V0_uev", "n_b",
            "a_nm", "d_nm", "t_uev", "U_uev", "f_scr"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in table["rows"]:
            fh.write(",".join(f"{row[c]:.17g}" for c in cols) + "\n")
