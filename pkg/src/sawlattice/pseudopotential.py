"""Effective time-independent Hamiltonians from the high-frequency expansion.

The slow (secular) dynamics in a rapidly driven lattice is governed by

    H_eff = p^2/2m * [1 + kappa * cos^2(kx)] + V0 * sin^2(kx) + dV * sin^2(kx)

where V0 = eps^2 * E_S is the ponderomotive lattice depth, kappa the
dimensionless mass-correction coefficient (a fourth-order term) and dV a
fourth-order quantum correction proportional to the recoil energy.  The
classical and quantum routes agree at second order; at fourth order the
quantum result adds the recoil terms.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .scales import DerivedScales
from .units import HBAR


@dataclass(frozen=True)
class EffectiveHamiltonian:
    order: int  # 2 or 4
    V0: float  # lattice depth, ueV
    kinetic_correction_coeff: float  # coefficient of cos^2(kx), dimensionless
    quantum_correction: float  # recoil-scale sin^2(kx) term, ueV
    eps: float
    omega0: float  # rad/ns

    def __post_init__(self):
        if self.order == 2 and (self.kinetic_correction_coeff != 0.0 or self.quantum_correction != 0.0):
            raise ValueError("order-2 effective Hamiltonians carry no fourth-order terms")


def classical_effective(q: float, scales: DerivedScales) -> EffectiveHamiltonian:
    """Classical ponderomotive Hamiltonian for the slow coordinate.

    V0 = (q/8) V_SAW = (q^2/8) E_S; the kinetic term acquires the
    fourth-order correction (3/8) q^2 cos^2(kX).
    """
    _warn_large_q(q)
    eps = q / math.sqrt(8.0)
    omega = scales.hbar_omega / HBAR
    return EffectiveHamiltonian(
        order=4,
        V0=eps * eps * scales.E_S,
        kinetic_correction_coeff=0.375 * q * q,
        quantum_correction=0.0,
        eps=eps,
        omega0=eps * omega,
    )


def quantum_effective(
    q: float,
    scales: DerivedScales,
    order: int = 2,
    freq_variant: str = "displayed",
) -> EffectiveHamiltonian:
    """Quantum high-frequency expansion of the driven-lattice Hamiltonian.

    order 2:  V0 = (q^2/8) E_S, eps = q/sqrt(8), no corrections.
    order 4:  eps^2 = (q^2/8)(1 + q_tilde) with q_tilde = E_R/(4 E_S),
              plus the kinetic g-coefficient (3/32) q^2 and the quantum
              sin^2 term (q^2/32) E_R.

    freq_variant selects how omega0 follows from the fourth-order result.
    The derivation's displayed factor gives omega0/omega = eps with
    eps^2 = (q^2/8)(1+q_tilde) ("displayed", default); the alternative
    reading omega0/omega = (q/sqrt(8)) * sqrt(1+q_tilde^2) is kept behind
    "alternative" because the two appear side by side in the literature
    and differ at order q_tilde.
    """
    if order not in (2, 4):
        raise ValueError(f"order must be 2 or 4, got {order}")
    if freq_variant not in ("displayed", "alternative"):
        raise ValueError(f"unknown freq_variant {freq_variant!r}")
    _warn_large_q(q)
    omega = scales.hbar_omega / HBAR
    if order == 2:
        eps = q / math.sqrt(8.0)
        return EffectiveHamiltonian(
            order=2,
            V0=eps * eps * scales.E_S,
            kinetic_correction_coeff=0.0,
            quantum_correction=0.0,
            eps=eps,
            omega0=eps * omega,
        )
    qt = scales.q_tilde
    eps_sq = (q * q / 8.0) * (1.0 + qt)
    eps = math.sqrt(eps_sq)
    if freq_variant == "displayed":
        omega0 = eps * omega
    else:
        omega0 = (q / math.sqrt(8.0)) * math.sqrt(1.0 + qt * qt) * omega
    return EffectiveHamiltonian(
        order=4,
        V0=eps_sq * scales.E_S,
        kinetic_correction_coeff=(3.0 / 32.0) * q * q,
        quantum_correction=(q * q / 32.0) * scales.E_R,
        eps=eps,
        omega0=omega0,
    )


def _warn_large_q(q: float):
    if q > 0.5:
        warnings.warn(
            f"high-frequency expansion assumes q^2 << 1; q={q} is outside its comfort zone",
            stacklevel=3,
        )
