"""Acoustic traps and lattices for charge carriers.

Simulation toolkit for standing-surface-acoustic-wave traps: classical
Mathieu-type stability analysis, Floquet pseudopotential theory, a
Gaussian quantum-master-equation propagator with micromotion, and
Hubbard-parameter/feasibility estimators.
"""

__version__ = "0.1.0"

from .scales import (
    DerivedScales,
    DriveConfig,
    MaterialPreset,
    MaterialSystem,
    derived_scales,
    load_material_presets,
    sound_energy,
)
from .hill import (
    FloquetMode,
    MonodromyResult,
    characteristic_exponent,
    evaluate_mode,
    floquet_coefficients,
    monodromy,
    stability_boundaries,
)
from .classical import (
    ClassicalState,
    StabilityDiagram,
    StabilityVerdict,
    classify_stability,
    integrate_trajectory,
    secular_approximation,
    stability_diagram,
    trapped_fraction,
)
from .pseudopotential import EffectiveHamiltonian, classical_effective, quantum_effective
from .qme import (
    BathParams,
    EffectiveOccupation,
    MomentState,
    MomentTrajectory,
    ShiftCoefficients,
    assemble_moment_ode,
    averaged_kinetic_energy,
    detect_quasistationary,
    drive_mode,
    effective_occupation,
    fock_oracle,
    propagate_moments,
    reference_oscillator,
    shift_coefficients,
)
from .hubbard import (
    FeasibilityReport,
    HubbardEstimate,
    adiabatic_speed,
    case_study,
    coulomb_onsite,
    exchange,
    heating_budget,
    regime_check,
    tunneling,
)
