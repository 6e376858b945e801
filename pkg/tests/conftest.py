import math

import pytest

from sawlattice import qme
from sawlattice.scales import DriveConfig, MaterialSystem
from sawlattice.units import ELECTRON_MASS, HBAR

CASE_E_S = 1000.0  # ueV
CASE_V_S = 18000.0  # m/s
CASE_F = 50.0e9  # Hz


@pytest.fixture(scope="session")
def case_material():
    """GaN-like platform tuned so E_S is exactly 1 meV at v_s = 18 km/s."""
    mass_m0 = 2.0 * CASE_E_S / CASE_V_S**2 / ELECTRON_MASS
    return MaterialSystem("case material", mass_m0, CASE_V_S, 9.5)


@pytest.fixture(scope="session")
def cooling_setup(case_material):
    """q=0.47 drive with gamma/omega0 = 1e-3 and k_BT = 0.1 hbar*omega0."""
    drive = DriveConfig(frequency=CASE_F, stability_q=0.47)
    mode = qme.drive_mode(drive)
    omega0 = mode.omega0
    bath = qme.BathParams(gamma=1e-3 * omega0, kT=0.1 * HBAR * omega0)
    m = case_material.mass
    wavelength = CASE_V_S / (CASE_F * 1e-9)
    k = 2.0 * math.pi / wavelength
    state0 = qme.MomentState.coherent(m, omega0, mean_x=0.0, mean_p=0.01 * HBAR * k)
    return {
        "material": case_material,
        "drive": drive,
        "mode": mode,
        "omega0": omega0,
        "bath": bath,
        "m": m,
        "k": k,
        "state0": state0,
    }
