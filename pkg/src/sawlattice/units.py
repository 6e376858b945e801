"""Internal unit system and physical constants.

Every module works in the same "device" units:

- energy      micro-electronvolt (ueV)
- length      nanometre (nm)
- time        nanosecond (ns)
- velocity    nm/ns (numerically equal to m/s)
- mass        ueV * ns^2 / nm^2
- frequency   rad/ns (angular)

These are the scales at which the quantities of interest are O(1)-O(1000),
so nothing underflows and printed numbers can be read off directly.
hbar and k_B are carried explicitly, never set to one.
"""

import math

# hbar = 6.582119569e-16 eV*s
HBAR = 0.6582119569  # ueV * ns

# Planck constant h = 2*pi*hbar, handy for f <-> energy conversions
H_PLANCK = 2.0 * math.pi * HBAR  # ueV * ns

# Boltzmann constant, 8.617333262e-5 eV/K
KB = 86.17333262  # ueV / K

# free-electron mass m0 = 9.1093837015e-31 kg expressed in ueV*ns^2/nm^2
# (1 ueV*ns^2/nm^2 = 1.602176634e-25 kg)
ELECTRON_MASS = 5.685630103565723e-06

# Coulomb scale e^2/(4*pi*eps0) = 1.4399645 eV*nm
E2_OVER_4PI_EPS0 = 1.4399645478425669e6  # ueV * nm

# power conversion: 1 ueV/ns in milliwatt
UEV_PER_NS_IN_MW = 1.6021766340e-13


def omega_from_frequency_hz(frequency_hz: float) -> float:
    """Angular frequency in rad/ns from an ordinary frequency in Hz."""
    return 2.0 * math.pi * frequency_hz * 1.0e-9


def frequency_hz_from_omega(omega: float) -> float:
    """Ordinary frequency in Hz from an angular frequency in rad/ns."""
    return omega / (2.0 * math.pi) * 1.0e9


def thermal_energy(temperature_k: float) -> float:
    """k_B*T in ueV for a temperature in kelvin."""
    return KB * temperature_k
