import math

import pytest

from sawlattice import hill
from sawlattice.pseudopotential import EffectiveHamiltonian, classical_effective, quantum_effective
from sawlattice.scales import DriveConfig, derived_scales
from sawlattice.units import HBAR


def scales_at(material, q, order=2):
    return derived_scales(material, DriveConfig(frequency=50e9, stability_q=q), order=order)


def test_lattice_depth_reference_points(case_material):
    sc = scales_at(case_material, 0.5)
    assert classical_effective(0.5, sc).V0 == pytest.approx(31.25, rel=1e-12)
    sc = scales_at(case_material, 0.7)
    with pytest.warns(UserWarning):
        h = classical_effective(0.7, sc)
    assert h.V0 == pytest.approx(61.25, rel=1e-12)


def test_free_particle_limit(case_material):
    sc = scales_at(case_material, 0.0)
    h = classical_effective(0.0, sc)
    assert h.V0 == 0.0
    assert h.kinetic_correction_coeff == 0.0
    assert h.omega0 == 0.0


def test_classical_equals_quantum_second_order_depth(case_material):
    for q in (0.1, 0.3, 0.5):
        sc = scales_at(case_material, q)
        assert classical_effective(q, sc).V0 == pytest.approx(
            quantum_effective(q, sc, order=2).V0, rel=1e-14
        )


def test_order_structure(case_material):
    sc = scales_at(case_material, 0.3)
    h2 = quantum_effective(0.3, sc, order=2)
    assert h2.order == 2
    assert h2.kinetic_correction_coeff == 0.0
    assert h2.quantum_correction == 0.0
    h4 = quantum_effective(0.3, sc, order=4)
    assert h4.kinetic_correction_coeff == pytest.approx((3.0 / 32.0) * 0.09, rel=1e-14)
    assert h4.quantum_correction == pytest.approx((0.09 / 32.0) * sc.E_R, rel=1e-14)
    # classical kinetic correction is the operator-ordered one times four
    hc = classical_effective(0.3, sc)
    assert hc.kinetic_correction_coeff == pytest.approx(4.0 * h4.kinetic_correction_coeff, rel=1e-14)
    with pytest.raises(ValueError):
        EffectiveHamiltonian(order=2, V0=1.0, kinetic_correction_coeff=0.1,
                             quantum_correction=0.0, eps=0.1, omega0=1.0)


def test_fourth_order_depth_ratio(case_material):
    sc = scales_at(case_material, 0.4)
    h2 = quantum_effective(0.4, sc, order=2)
    h4 = quantum_effective(0.4, sc, order=4)
    assert h4.V0 / h2.V0 == pytest.approx(1.0 + sc.q_tilde, rel=1e-13)


def test_fourth_order_reduces_at_zero_recoil(case_material):
    sc = scales_at(case_material, 0.4)
    frozen = sc.__class__(
        E_S=sc.E_S, E_R=0.0, V_SAW=sc.V_SAW, V_IDT=sc.V_IDT,
        hbar_omega=sc.hbar_omega, hbar_omega0=sc.hbar_omega0, V0=sc.V0,
        eps=sc.eps, q_tilde=0.0, n_b=sc.n_b, lattice_a=sc.lattice_a,
        wavelength=sc.wavelength,
    )
    h2 = quantum_effective(0.4, frozen, order=2)
    h4 = quantum_effective(0.4, frozen, order=4)
    assert h4.V0 == pytest.approx(h2.V0, rel=1e-15)
    assert h4.omega0 == pytest.approx(h2.omega0, rel=1e-15)
    assert h4.quantum_correction == 0.0


def test_harmonic_expansion_identity(case_material):
    # expanding V0 sin^2(kx) about a node gives (m/2) omega0^2 x^2 with
    # omega0 = (q/sqrt(8)) omega, exactly
    q = 0.23
    sc = scales_at(case_material, q)
    h = quantum_effective(q, sc, order=2)
    k = 2.0 * math.pi / sc.wavelength
    omega = sc.hbar_omega / HBAR
    omega0_from_curvature = math.sqrt(2.0 * h.V0 * k * k / case_material.mass)
    assert omega0_from_curvature == pytest.approx((q / math.sqrt(8.0)) * omega, rel=1e-12)
    assert h.omega0 == pytest.approx(omega0_from_curvature, rel=1e-12)


def test_secular_frequency_against_floquet(case_material):
    # the harmonic estimate agrees with the exact exponent to O(q^3)
    for q in (0.1, 0.2, 0.3):
        sc = scales_at(case_material, q)
        h = quantum_effective(q, sc, order=2)
        omega = sc.hbar_omega / HBAR
        exact = 0.5 * hill.characteristic_exponent(q) * omega
        assert abs(h.omega0 - exact) / exact < 0.02


def test_frequency_variant_switch(case_material):
    sc = scales_at(case_material, 0.4)
    displayed = quantum_effective(0.4, sc, order=4, freq_variant="displayed")
    alt = quantum_effective(0.4, sc, order=4, freq_variant="alternative")
    omega = sc.hbar_omega / HBAR
    assert displayed.omega0 == pytest.approx(displayed.eps * omega, rel=1e-15)
    assert alt.omega0 == pytest.approx(
        (0.4 / math.sqrt(8.0)) * math.sqrt(1.0 + sc.q_tilde**2) * omega, rel=1e-15
    )
    with pytest.raises(ValueError):
        quantum_effective(0.4, sc, order=4, freq_variant="bogus")
