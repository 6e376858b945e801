"""Material presets, drive configuration and derived trap scales.

The central figure of merit is the sound energy E_S = (m/2) v_s^2, the
kinetic energy of a carrier moving at the speed of sound of the driven
surface mode.  Everything else (drive quantum, secular quantum, lattice
depth, bound-state count, recoil) is derived from (material, drive) by
closed-form expressions collected in :func:`derived_scales`.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from importlib import resources

from .units import HBAR, ELECTRON_MASS, omega_from_frequency_hz

# upper edge of the first stability window of the undriven-dc Mathieu
# equation; hill.stability_boundaries recovers it numerically to 1e-4
FIRST_REGION_Q_MAX = 0.9080

ENV_CATALOG_PATH = "SAWLATTICE_MATERIALS"


@dataclass(frozen=True)
class MaterialSystem:
    """A physical platform: carrier plus host heterostructure.

    carrier_mass is in units of the free-electron mass, sound_speed in
    m/s (= nm/ns), dielectric_rel is the relative permittivity used for
    Coulomb estimates.
    """

    name: str
    carrier_mass: float
    sound_speed: float
    dielectric_rel: float
    notes: str = ""

    def __post_init__(self):
        if self.carrier_mass < 0:
            raise ValueError(f"carrier_mass must be >= 0, got {self.carrier_mass}")
        if self.sound_speed <= 0:
            raise ValueError(f"sound_speed must be > 0, got {self.sound_speed}")
        if self.dielectric_rel < 1:
            raise ValueError(f"dielectric_rel must be >= 1, got {self.dielectric_rel}")

    @property
    def mass(self) -> float:
        """Carrier mass in internal units (ueV*ns^2/nm^2)."""
        return self.carrier_mass * ELECTRON_MASS


@dataclass(frozen=True)
class MaterialPreset:
    """Catalog row: like MaterialSystem but with a sound-speed range.

    Velocity ranges reflect that higher surface modes span a band; the
    scalar actually used in a computation must be picked explicitly via
    :meth:`material`.
    """

    name: str
    mass_m0: float
    v_s_range: tuple[float, float]
    eps_r: float
    notes: str = ""

    def material(self, sound_speed: float | str = "min") -> MaterialSystem:
        """Resolve the preset to a concrete MaterialSystem.

        sound_speed is "min", "max", or a number inside the range.
        """
        lo, hi = self.v_s_range
        if sound_speed == "min":
            v = lo
        elif sound_speed == "max":
            v = hi
        else:
            v = float(sound_speed)
            if not (lo <= v <= hi):
                raise ValueError(
                    f"sound_speed {v} outside preset range [{lo}, {hi}] for {self.name!r}"
                )
        return MaterialSystem(self.name, self.mass_m0, v, self.eps_r, self.notes)


@dataclass(frozen=True)
class DriveConfig:
    """External drive: SAW frequency and dimensionless strength.

    harmonics is a tuple of (multiplier, weight) pairs describing
    polychromatic drives f(tau) = 2q * sum_i w_i cos(2 m_i tau); the
    monochromatic default is ((1, 1.0),).
    """

    frequency: float  # Hz
    stability_q: float
    dc_a: float = 0.0
    harmonics: tuple[tuple[int, float], ...] = ((1, 1.0),)

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError(f"frequency must be > 0, got {self.frequency}")
        if self.stability_q < 0:
            raise ValueError(f"stability_q must be >= 0, got {self.stability_q}")
        if len(self.harmonics) == 0:
            raise ValueError("harmonics must contain at least one (multiplier, weight)")
        norm = []
        for mult, w in self.harmonics:
            if int(mult) != mult or mult < 1:
                raise ValueError(f"harmonic multiplier must be a positive integer, got {mult}")
            if not math.isfinite(w):
                raise ValueError(f"harmonic weight must be finite, got {w}")
            norm.append((int(mult), float(w)))
        object.__setattr__(self, "harmonics", tuple(norm))

    @property
    def is_monochromatic(self) -> bool:
        """True for the plain single-tone drive (one harmonic, weight 1)."""
        return self.harmonics == ((1, 1.0),)

    @property
    def omega(self) -> float:
        """Angular drive frequency in rad/ns."""
        return omega_from_frequency_hz(self.frequency)


@dataclass(frozen=True)
class DerivedScales:
    """All scalar energy/length scales of a trap configuration (ueV, nm)."""

    E_S: float
    E_R: float
    V_SAW: float
    V_IDT: float
    hbar_omega: float
    hbar_omega0: float
    V0: float
    eps: float
    q_tilde: float
    n_b: float
    lattice_a: float
    wavelength: float

    def as_dict(self) -> dict:
        return {
            "E_S_uev": self.E_S,
            "E_R_uev": self.E_R,
            "V_SAW_uev": self.V_SAW,
            "V_IDT_uev": self.V_IDT,
            "hbar_omega_uev": self.hbar_omega,
            "hbar_omega0_uev": self.hbar_omega0,
            "V0_uev": self.V0,
            "eps": self.eps,
            "q_tilde": self.q_tilde,
            "n_b": self.n_b,
            "lattice_a_nm": self.lattice_a,
            "wavelength_nm": self.wavelength,
        }


def sound_energy(material: MaterialSystem) -> float:
    """Sound energy E_S = (m/2) v_s^2 in ueV."""
    return 0.5 * material.mass * material.sound_speed**2


def derived_scales(
    material: MaterialSystem,
    drive: DriveConfig,
    order: int = 2,
    strict_pseudo: bool = False,
) -> DerivedScales:
    """Populate every scalar scale of the trap from (material, drive).

    order selects the depth of the high-frequency expansion used for the
    pseudopotential quantities: eps^2 = q^2/8 at order 2, multiplied by
    (1 + q_tilde) at order 4. With strict_pseudo, a drive beyond the
    first Mathieu stability window is rejected (eps is meaningless there).
    """
    if order not in (2, 4):
        raise ValueError(f"order must be 2 or 4, got {order}")
    if not drive.is_monochromatic:
        raise ValueError("pseudopotential scales are defined for monochromatic drives only")
    q = drive.stability_q
    if strict_pseudo and q > FIRST_REGION_Q_MAX:
        raise ValueError(
            f"q={q} is beyond the first stability window (q <= {FIRST_REGION_Q_MAX}); "
            "pseudopotential quantities are undefined"
        )

    e_s = sound_energy(material)
    omega = drive.omega
    hbar_omega = HBAR * omega
    wavelength = material.sound_speed / (drive.frequency * 1e-9)  # nm
    lattice_a = wavelength / 2.0
    k = 2.0 * math.pi / wavelength
    e_r = (HBAR * k) ** 2 / (2.0 * material.mass) if material.mass > 0 else math.inf
    q_tilde = e_r / (4.0 * e_s) if e_s > 0 else math.inf

    eps_sq = q * q / 8.0
    if order == 4:
        eps_sq *= 1.0 + q_tilde
    eps = math.sqrt(eps_sq)
    hbar_omega0 = eps * hbar_omega
    v0 = eps_sq * e_s
    # n_b = V0 / (hbar*omega0) = eps*E_S/(hbar*omega); finite for q -> 0
    n_b = eps * e_s / hbar_omega

    return DerivedScales(
        E_S=e_s,
        E_R=e_r,
        V_SAW=q * e_s,
        V_IDT=q * e_s / 2.0,
        hbar_omega=hbar_omega,
        hbar_omega0=hbar_omega0,
        V0=v0,
        eps=eps,
        q_tilde=q_tilde,
        n_b=n_b,
        lattice_a=lattice_a,
        wavelength=wavelength,
    )


def _parse_material_rows(rows, source: str) -> list[MaterialPreset]:
    presets = []
    for i, row in enumerate(rows):
        if not isinstance(row, dict):
            raise ValueError(f"{source}: material #{i} is not an object")
        missing = {"name", "mass_m0", "v_s_m_per_s", "eps_r"} - set(row)
        if missing:
            raise ValueError(
                f"{source}: material #{i} ({row.get('name', '?')!r}) missing field(s) "
                + ", ".join(sorted(missing))
            )
        v = row["v_s_m_per_s"]
        if isinstance(v, (int, float)):
            v_range = (float(v), float(v))
        elif isinstance(v, (list, tuple)) and len(v) == 2:
            v_range = (float(v[0]), float(v[1]))
        else:
            raise ValueError(
                f"{source}: material #{i} field 'v_s_m_per_s' must be a number or [min, max]"
            )
        if not (0 < v_range[0] <= v_range[1]):
            raise ValueError(
                f"{source}: material #{i} field 'v_s_m_per_s' must satisfy 0 < min <= max"
            )
        try:
            presets.append(
                MaterialPreset(
                    name=str(row["name"]),
                    mass_m0=float(row["mass_m0"]),
                    v_s_range=v_range,
                    eps_r=float(row["eps_r"]),
                    notes=str(row.get("notes", "")),
                )
            )
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{source}: material #{i}: {exc}") from exc
    return presets


def _load_catalog_file(path) -> list[MaterialPreset]:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        return []
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: line {exc.lineno}, col {exc.colno}: {exc.msg}") from exc
    if isinstance(doc, list):
        rows = doc
    elif isinstance(doc, dict) and "materials" in doc:
        rows = doc["materials"]
    else:
        raise ValueError(f"{path}: expected a list of materials or an object with 'materials'")
    return _parse_material_rows(rows, str(path))


def builtin_catalog() -> list[MaterialPreset]:
    """The shipped catalog (one row per reference platform)."""
    with resources.files("sawlattice").joinpath("data/materials.json").open("r") as fh:
        doc = json.load(fh)
    return _parse_material_rows(doc["materials"], "builtin catalog")


def load_material_presets(path=None) -> list[MaterialPreset]:
    """Built-in catalog plus the user catalog at `path` (if any).

    When path is None, the SAWLATTICE_MATERIALS environment variable is
    consulted. User rows with a name already in the catalog replace the
    built-in row.
    """
    presets = builtin_catalog()
    if path is None:
        path = os.environ.get(ENV_CATALOG_PATH) or None
    if path is not None:
        extra = _load_catalog_file(path)
        by_name = {p.name: p for p in presets}
        for p in extra:
            by_name[p.name] = p
        ordered = [by_name[p.name] for p in presets]
        ordered += [p for p in extra if p.name not in {q.name for q in presets}]
        presets = ordered
    return presets


def find_preset(name: str, presets=None) -> MaterialPreset:
    presets = presets if presets is not None else load_material_presets()
    for p in presets:
        if p.name == name:
            return p
    known = ", ".join(p.name for p in presets)
    raise KeyError(f"no material preset named {name!r}; known: {known}")
