import json
import xml.etree.ElementTree as ET

import pytest

from sawlattice import cli
from sawlattice.cli import RunConfig, main


def run_cli(args):
    return main([str(a) for a in args])


def test_case_study_command(tmp_path, capsys):
    assert run_cli(["case-study", "--out", tmp_path]) == 0
    out = capsys.readouterr().out
    assert "case_study.csv" in out
    csv = (tmp_path / "case_study.csv").read_text().splitlines()
    assert len(csv) == 5
    meta = json.loads((tmp_path / "case_study.meta.json").read_text())
    assert meta["tool"] == "sawlattice"
    assert "config_hash" in meta and "version" in meta


def test_scales_command_with_overrides(tmp_path, capsys):
    assert run_cli(["scales", "--out", tmp_path, "--set", "inputs.q=0.7",
                    "--set", "inputs.sound_speed=\"max\""]) == 0
    header, row = (tmp_path / "scales.csv").read_text().splitlines()
    values = dict(zip(header.split(","), [float(x) for x in row.split(",")]))
    assert values["V0_uev"] == pytest.approx(62.06, rel=0.01)
    assert values["lattice_a_nm"] == 180.0


def test_stability_command(tmp_path):
    assert run_cli([
        "stability", "--out", tmp_path, "--seed", 7,
        "--set", "inputs.q_steps=4", "--set", "inputs.theta_steps=3",
        "--set", "inputs.q_max=0.6", "--set", "inputs.theta_max=0.02",
        "--set", "inputs.samples_per_cell=4", "--set", "inputs.tau_max_over_pi=100",
    ]) == 0
    lines = (tmp_path / "stability.csv").read_text().splitlines()
    assert lines[0] == "q,theta,fraction_stable,max_excursion_median"
    assert len(lines) == 1 + 4 * 3
    svg = tmp_path / "stability.svg"
    assert svg.exists()
    ET.parse(svg)  # well-formed XML
    meta = json.loads((tmp_path / "stability.meta.json").read_text())
    assert meta["seed"] == 7
    assert meta["samples_per_cell"] == 4


def test_csv_byte_determinism(tmp_path):
    args = ["stability", "--seed", 3,
            "--set", "inputs.q_steps=3", "--set", "inputs.theta_steps=3",
            "--set", "inputs.q_max=0.5", "--set", "inputs.theta_max=0.03",
            "--set", "inputs.samples_per_cell=6", "--set", "inputs.tau_max_over_pi=60"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli(args + ["--out", a]) == 0
    assert run_cli(args + ["--out", b]) == 0
    assert (a / "stability.csv").read_bytes() == (b / "stability.csv").read_bytes()


def test_trajectory_command(tmp_path):
    assert run_cli(["trajectory", "--out", tmp_path,
                    "--set", "inputs.tau_max_over_pi=10",
                    "--set", "inputs.n_samples=500"]) == 0
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "tau,x_tilde,v_tilde"
    assert len(lines) == 501
    assert (tmp_path / "trajectory.svg").exists()


def test_qme_command(tmp_path):
    assert run_cli(["qme", "--out", tmp_path,
                    "--set", "inputs.secular_periods=2",
                    "--set", "inputs.n_samples=300"]) == 0
    lines = (tmp_path / "qme_moments.csv").read_text().splitlines()
    assert lines[0] == "t,tau,mean_x,mean_p,var_x,var_p,cov_sym"
    meta = json.loads((tmp_path / "qme_moments.meta.json").read_text())
    assert meta["gamma_rad_per_ns"] > 0
    assert meta["N_effective"] > 0
    for svg in ("qme_trajectory.svg", "qme_moments.svg"):
        ET.parse(tmp_path / svg)
    # the variance column must ripple (micromotion at the drive period)
    var_x = [float(l.split(",")[4]) for l in lines[1:]]
    assert max(var_x) > 1.05 * min(var_x)


def test_hubbard_command_sweep(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "command": "hubbard",
        "sweep": {"q": [0.5, 0.7], "d_screen_nm": [10.0, 100.0]},
    }))
    assert run_cli(["hubbard", "--config", cfg, "--out", tmp_path]) == 0
    lines = (tmp_path / "hubbard.csv").read_text().splitlines()
    assert len(lines) == 5


def test_hubbard_empty_sweep_is_validation_error(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "hubbard", "sweep": {"q": []}}))
    assert run_cli(["hubbard", "--config", cfg, "--out", tmp_path]) == 2
    assert "non-empty" in capsys.readouterr().err


def test_feasibility_command(tmp_path):
    assert run_cli(["feasibility", "--out", tmp_path]) == 0
    doc = json.loads((tmp_path / "feasibility.json").read_text())
    assert doc["chain_ok"] is True
    assert doc["v_idt_ok"] is True
    assert len(doc["chain"]) == 4


def test_unknown_input_rejected(tmp_path, capsys):
    assert run_cli(["scales", "--out", tmp_path, "--set", "inputs.bogus=1"]) == 2
    assert "unknown input" in capsys.readouterr().err


def test_unknown_material_rejected(tmp_path, capsys):
    assert run_cli(["scales", "--out", tmp_path, "--set", "inputs.material=\"unobtainium\""]) == 2
    assert "unobtainium" in capsys.readouterr().err


def test_bad_config_json(tmp_path):
    cfg = tmp_path / "broken.json"
    cfg.write_text("{not json")
    assert run_cli(["scales", "--config", cfg, "--out", tmp_path]) == 2


def test_command_mismatch(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "scales"}))
    assert run_cli(["hubbard", "--config", cfg, "--out", tmp_path]) == 2
    assert "does not match" in capsys.readouterr().err


def test_config_roundtrip():
    doc = {
        "command": "hubbard",
        "inputs": {"q": 0.6, "d_screen_nm": 42.0},
        "sweep": {"q": [0.5, 0.6]},
        "output": "somewhere",
        "seed": 9,
    }
    cfg = RunConfig.from_dict(doc)
    again = RunConfig.from_dict(cfg.to_dict())
    assert again == cfg
    assert again.config_hash() == cfg.config_hash()
    assert cfg.inputs["q"] == 0.6
    assert cfg.inputs["material"] == "holes in GaN"  # defaults filled in


def test_config_rejects_unknown_fields():
    with pytest.raises(cli.ValidationError):
        RunConfig.from_dict({"command": "scales", "banana": 1})
    with pytest.raises(cli.ValidationError):
        RunConfig.from_dict({"command": "warp"})


def test_materials_override(tmp_path):
    mats = tmp_path / "mats.json"
    mats.write_text(json.dumps({"materials": [
        {"name": "testium", "mass_m0": 1.0, "v_s_m_per_s": [10000, 10000], "eps_r": 10.0},
    ]}))
    assert run_cli(["scales", "--out", tmp_path, "--materials", mats,
                    "--set", "inputs.material=\"testium\""]) == 0
    header, row = (tmp_path / "scales.csv").read_text().splitlines()
    values = dict(zip(header.split(","), [float(x) for x in row.split(",")]))
    assert values["E_S_uev"] == pytest.approx(0.5 * 1.0 * 5.685630103565723e-06 * 1e8)
