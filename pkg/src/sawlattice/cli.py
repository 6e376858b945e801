"""Command-line front end: sweeps, dataset export, SVG emission.

Every run is reproducible: outputs are byte-identical for the same
(config, seed) and each dataset gets a JSON metadata sidecar carrying the
tool version, the config hash and the numerical tolerances.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__, classical, hill, hubbard, plotting, qme
from .scales import (
    DriveConfig,
    MaterialSystem,
    derived_scales,
    find_preset,
    load_material_presets,
)
from .units import HBAR

COMMANDS = ("scales", "stability", "trajectory", "qme", "hubbard", "feasibility", "case-study")

DEFAULT_INPUTS = {
    "scales": {
        "material": "holes in GaN", "sound_speed": "max",
        "frequency_ghz": 50.0, "q": 0.5, "order": 2,
    },
    "stability": {
        "q_min": 0.0, "q_max": 1.0, "q_steps": 21,
        "theta_min": 0.0, "theta_max": 0.06, "theta_steps": 13,
        "samples_per_cell": 1, "tau_max_over_pi": 1000.0,
    },
    "trajectory": {
        "q": 0.47, "theta": 0.005, "tau_max_over_pi": 30.0, "n_samples": 4000,
    },
    "qme": {
        "material": "holes in GaN", "sound_speed": "max",
        "frequency_ghz": 50.0, "q": 0.47,
        "gamma_over_omega0": 1e-3, "kT_over_hbar_omega0": 0.1,
        "p0_hbar_k": 0.01, "secular_periods": 10.0, "n_samples": 2000,
    },
    "hubbard": {
        "material": "holes in GaN", "sound_speed": "max",
        "frequency_ghz": 50.0, "q": 0.7, "d_screen_nm": None,
    },
    "feasibility": {
        "material": "holes in GaN", "sound_speed": "max",
        "frequency_ghz": 50.0, "q": 0.5,
        "gamma_over_omega0": 1e-3, "kT_over_hbar_omega0": 0.1,
        "d_screen_nm": 100.0, "T2_star_ns": 15.0, "eps_ad": 0.005,
        "threshold": 0.3,
    },
    "case-study": {},
}


class ValidationError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    inputs: dict = field(default_factory=dict)
    sweep: dict | None = None
    output: str = "."
    seed: int = 0
    materials_path: str | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        unknown = set(doc) - {"command", "inputs", "sweep", "output", "seed", "materials_path"}
        if unknown:
            raise ValidationError(f"unknown config field(s): {sorted(unknown)}")
        command = doc.get("command")
        if command not in COMMANDS:
            raise ValidationError(f"config.command must be one of {COMMANDS}, got {command!r}")
        inputs = dict(DEFAULT_INPUTS[command])
        for key, val in (doc.get("inputs") or {}).items():
            if key not in inputs and command != "case-study":
                raise ValidationError(f"unknown input '{key}' for command '{command}'")
            inputs[key] = val
        return cls(
            command=command,
            inputs=inputs,
            sweep=doc.get("sweep"),
            output=doc.get("output", "."),
            seed=int(doc.get("seed", 0)),
            materials_path=doc.get("materials_path"),
        )

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "inputs": self.inputs,
            "sweep": self.sweep,
            "output": self.output,
            "seed": self.seed,
            "materials_path": self.materials_path,
        }

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _apply_overrides(doc: dict, sets: list[str]) -> dict:
    for item in sets:
        if "=" not in item:
            raise ValidationError(f"--set expects path=value, got {item!r}")
        path, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw  # bare strings are allowed
        node = doc
        keys = path.split(".")
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ValidationError(f"--set path {path!r} walks through a non-object")
        node[keys[-1]] = value
    return doc


def _sidecar(cfg: RunConfig, extra: dict) -> dict:
    meta = {
        "tool": "sawlattice",
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "command": cfg.command,
        "seed": cfg.seed,
    }
    meta.update(extra)
    return meta


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _material(cfg: RunConfig) -> MaterialSystem:
    presets = load_material_presets(cfg.materials_path)
    name = cfg.inputs["material"]
    try:
        preset = find_preset(name, presets)
    except KeyError as exc:
        raise ValidationError(str(exc)) from exc
    return preset.material(cfg.inputs.get("sound_speed", "min"))


def _drive(cfg: RunConfig, q=None) -> DriveConfig:
    f_ghz = float(cfg.inputs["frequency_ghz"])
    if f_ghz <= 0:
        raise ValidationError(f"inputs.frequency_ghz must be > 0, got {f_ghz}")
    return DriveConfig(frequency=f_ghz * 1e9, stability_q=float(q if q is not None else cfg.inputs["q"]))


def _outdir(cfg: RunConfig) -> str:
    os.makedirs(cfg.output, exist_ok=True)
    if not os.access(cfg.output, os.W_OK):
        raise ValidationError(f"output directory {cfg.output!r} is not writable")
    return cfg.output


def _fmt(x) -> str:
    return f"{x:.17g}"


def run(config: RunConfig) -> list[str]:
    """Execute a validated config; returns the artifact paths written."""
    out = _outdir(config)
    handler = {
        "scales": _run_scales,
        "stability": _run_stability,
        "trajectory": _run_trajectory,
        "qme": _run_qme,
        "hubbard": _run_hubbard,
        "feasibility": _run_feasibility,
        "case-study": _run_case_study,
    }[config.command]
    return handler(config, out)


def _run_scales(cfg: RunConfig, out: str) -> list[str]:
    material = _material(cfg)
    order = int(cfg.inputs["order"])
    sc = derived_scales(material, _drive(cfg), order=order)
    csv_path = os.path.join(out, "scales.csv")
    d = sc.as_dict()
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(d.keys()) + "\n")
        fh.write(",".join(_fmt(v) for v in d.values()) + "\n")
    meta_path = os.path.join(out, "scales.meta.json")
    _write_json(meta_path, _sidecar(cfg, {"material": material.name,
                                          "sound_speed_m_per_s": material.sound_speed,
                                          "order": order}))
    for key, val in d.items():
        print(f"{key:>18s} = {val:.6g}")
    return [csv_path, meta_path]


def _grid(cfg, lo_key, hi_key, steps_key):
    lo = float(cfg.inputs[lo_key])
    hi = float(cfg.inputs[hi_key])
    steps = int(cfg.inputs[steps_key])
    if steps < 1:
        raise ValidationError(f"inputs.{steps_key} must be >= 1, got {steps}")
    if hi < lo:
        raise ValidationError(f"inputs.{hi_key} must be >= inputs.{lo_key}")
    return np.linspace(lo, hi, steps)


def _run_stability(cfg: RunConfig, out: str) -> list[str]:
    q_grid = _grid(cfg, "q_min", "q_max", "q_steps")
    theta_grid = _grid(cfg, "theta_min", "theta_max", "theta_steps")
    samples = int(cfg.inputs["samples_per_cell"])
    if samples < 1:
        raise ValidationError("inputs.samples_per_cell must be >= 1")
    tau_max = float(cfg.inputs["tau_max_over_pi"]) * math.pi
    diagram = classical.stability_diagram(
        q_grid, theta_grid, tau_max=tau_max, samples_per_cell=samples, seed=cfg.seed
    )
    csv_path = os.path.join(out, "stability.csv")
    diagram.to_csv(csv_path)
    meta_path = os.path.join(out, "stability.meta.json")
    _write_json(meta_path, _sidecar(cfg, diagram.metadata()))
    svg_path = plotting.emit_plot(csv_path, "heatmap")
    return [csv_path, meta_path, svg_path]


def _run_trajectory(cfg: RunConfig, out: str) -> list[str]:
    q = float(cfg.inputs["q"])
    theta = float(cfg.inputs["theta"])
    if theta < 0:
        raise ValidationError("inputs.theta must be >= 0")
    tau_max = float(cfg.inputs["tau_max_over_pi"]) * math.pi
    init = classical.ClassicalState(0.0, math.sqrt(2.0 * theta))
    traj = classical.integrate_trajectory(q, init, tau_max=tau_max,
                                          n_samples=int(cfg.inputs["n_samples"]))
    csv_path = os.path.join(out, "trajectory.csv")
    traj.to_csv(csv_path)
    meta_path = os.path.join(out, "trajectory.meta.json")
    _write_json(meta_path, _sidecar(cfg, {
        "q": q, "theta": theta, "tau_max": tau_max,
        "rtol": classical.RTOL, "atol": classical.ATOL,
    }))
    svg_path = plotting.emit_plot(csv_path, "trajectory")
    return [csv_path, meta_path, svg_path]


def _run_qme(cfg: RunConfig, out: str) -> list[str]:
    material = _material(cfg)
    drive = _drive(cfg)
    mode = qme.drive_mode(drive)
    omega0 = mode.omega0
    bath = qme.BathParams(
        gamma=float(cfg.inputs["gamma_over_omega0"]) * omega0,
        kT=float(cfg.inputs["kT_over_hbar_omega0"]) * HBAR * omega0,
    )
    m = material.mass
    sc = derived_scales(material, drive)
    k = 2.0 * math.pi / sc.wavelength
    p0 = float(cfg.inputs["p0_hbar_k"]) * HBAR * k
    state0 = qme.MomentState.coherent(m, omega0, mean_x=0.0, mean_p=p0)
    t_end = float(cfg.inputs["secular_periods"]) * 2.0 * math.pi / omega0
    ode = qme.assemble_moment_ode(mode, m, bath)
    traj = qme.propagate_moments(state0, ode, t_end, n_samples=int(cfg.inputs["n_samples"]))
    csv_path = os.path.join(out, "qme_moments.csv")
    traj.to_csv(csv_path)
    meta_path = os.path.join(out, "qme_moments.meta.json")
    meta = traj.metadata()
    meta["lattice_k_per_nm"] = k
    _write_json(meta_path, _sidecar(cfg, meta))
    svg_traj = plotting.emit_plot(csv_path, "trajectory", os.path.join(out, "qme_trajectory.svg"))
    svg_mom = plotting.emit_plot(csv_path, "moments", os.path.join(out, "qme_moments.svg"))
    return [csv_path, meta_path, svg_traj, svg_mom]


def _hubbard_row(material, cfg, q, d_screen):
    drive = _drive(cfg, q=q)
    sc = derived_scales(material, drive)
    d = math.inf if d_screen is None else float(d_screen)
    est = hubbard.estimate(q, sc, material.dielectric_rel, d)
    return {
        "q": q,
        "d_screen_nm": None if math.isinf(d) else d,
        "t_uev": est.t_hop,
        "U_uev": est.U_onsite,
        "J_uev": est.J_exchange,
        "f_scr": est.f_scr,
        "lattice_a_nm": est.lattice_a,
        "n_b": est.n_b,
    }


def _run_hubbard(cfg: RunConfig, out: str) -> list[str]:
    material = _material(cfg)
    sweep = cfg.sweep or {}
    unknown = set(sweep) - {"q", "d_screen_nm"}
    if unknown:
        raise ValidationError(f"hubbard sweep supports q and d_screen_nm, got {sorted(unknown)}")
    qs = sweep.get("q", [cfg.inputs["q"]])
    ds = sweep.get("d_screen_nm", [cfg.inputs["d_screen_nm"]])
    if len(qs) == 0 or len(ds) == 0:
        raise ValidationError("sweep grids must be non-empty")
    rows = [_hubbard_row(material, cfg, float(q), d) for q in qs for d in ds]
    csv_path = os.path.join(out, "hubbard.csv")
    cols = ["q", "d_screen_nm", "t_uev", "U_uev", "J_uev", "f_scr", "lattice_a_nm", "n_b"]
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join("inf" if row[c] is None else _fmt(row[c]) for c in cols) + "\n")
    meta_path = os.path.join(out, "hubbard.meta.json")
    _write_json(meta_path, _sidecar(cfg, {"material": material.name, "rows": len(rows)}))
    return [csv_path, meta_path]


def _run_feasibility(cfg: RunConfig, out: str) -> list[str]:
    material = _material(cfg)
    drive = _drive(cfg)
    sc = derived_scales(material, drive)
    omega0 = sc.hbar_omega0 / HBAR
    gamma = float(cfg.inputs["gamma_over_omega0"]) * omega0
    kT = float(cfg.inputs["kT_over_hbar_omega0"]) * sc.hbar_omega0
    d = cfg.inputs["d_screen_nm"]
    est = hubbard.estimate(drive.stability_q, sc, material.dielectric_rel,
                           math.inf if d is None else float(d))
    report = hubbard.regime_check(
        sc, gamma=gamma, kT=kT, hubbard=est,
        T2_star=float(cfg.inputs["T2_star_ns"]),
        eps_ad=float(cfg.inputs["eps_ad"]),
        threshold=float(cfg.inputs["threshold"]),
    )
    json_path = os.path.join(out, "feasibility.json")
    report.to_json(json_path)
    meta_path = os.path.join(out, "feasibility.meta.json")
    _write_json(meta_path, _sidecar(cfg, {"material": material.name}))
    for link in report.chain:
        flag = "ok " if link.ok else "FAIL"
        print(f"[{flag}] {link.name:<28s} ratio = {link.ratio:.3g}")
    print(f"chain {'passes' if report.chain_ok else 'fails'}; "
          f"V_IDT = {report.v_idt:.3g} ueV ({'ok' if report.v_idt_ok else 'over bound'}); "
          f"n_b = {report.n_b:.3g}")
    return [json_path, meta_path]


def _run_case_study(cfg: RunConfig, out: str) -> list[str]:
    table = hubbard.case_study()
    csv_path = os.path.join(out, "case_study.csv")
    hubbard.case_study_to_csv(table, csv_path)
    meta_path = os.path.join(out, "case_study.meta.json")
    _write_json(meta_path, _sidecar(cfg, table["inputs"]))
    return [csv_path, meta_path]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sawlattice",
        description="acoustic-lattice simulation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} computation")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", default=[], metavar="PATH=VALUE",
                       help="override a config field, e.g. --set inputs.q=0.7")
        p.add_argument("--out", help="output directory (default '.')")
        p.add_argument("--seed", type=int, help="RNG seed for sampled sweeps")
        p.add_argument("--materials", help="extra material catalog (JSON)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = {"command": args.command}
        if args.config:
            with open(args.config, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
            if loaded.get("command", args.command) != args.command:
                raise ValidationError(
                    f"config command {loaded.get('command')!r} does not match "
                    f"subcommand {args.command!r}"
                )
            loaded["command"] = args.command
            doc = loaded
        doc = _apply_overrides(doc, args.set)
        if args.out:
            doc["output"] = args.out
        if args.seed is not None:
            doc["seed"] = args.seed
        if args.materials:
            doc["materials_path"] = args.materials
        config = RunConfig.from_dict(doc)
        artifacts = run(config)
    except (ValidationError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (hill.IntegrationError, RuntimeError, AssertionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    for path in artifacts:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
