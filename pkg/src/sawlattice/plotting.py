"""SVG rendering of exported datasets (heatmaps, trajectories, moments).

Axis labels stay in the dimensionless units of the simulation outputs
(q, k_B T/E_S, tau).  Rendering is deterministic: the SVG hash salt is
pinned and no creation date is embedded.
"""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "sawlattice"
import matplotlib.pyplot as plt
import numpy as np

KINDS = ("heatmap", "trajectory", "moments")


def _read_csv(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader if row]
    data = {name: np.array([r[i] for r in rows]) for i, name in enumerate(header)}
    return header, data


def emit_plot(dataset_path, kind: str, out_path=None) -> str:
    """Render a dataset CSV to a self-contained SVG, returning its path.

    The dataset's `.meta.json` sidecar is picked up when present (for
    envelope overlays); it is not required.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {KINDS}")
    out_path = str(out_path) if out_path else str(dataset_path).rsplit(".", 1)[0] + ".svg"
    header, data = _read_csv(dataset_path)
    meta = _read_sidecar(dataset_path)
    if kind == "heatmap":
        _plot_heatmap(header, data, out_path)
    elif kind == "trajectory":
        _plot_trajectory(header, data, out_path, meta)
    else:
        _plot_moments(header, data, out_path)
    return out_path


def _read_sidecar(dataset_path):
    path = str(dataset_path).rsplit(".", 1)[0] + ".meta.json"
    if not os.path.exists(path):
        return None
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _require(header, needed, kind):
    missing = [c for c in needed if c not in header]
    if missing:
        raise ValueError(f"dataset schema does not match kind '{kind}': missing {missing}")


def _plot_heatmap(header, data, out_path):
    _require(header, ["q", "theta", "fraction_stable"], "heatmap")
    qs = np.unique(data["q"])
    ths = np.unique(data["theta"])
    grid = np.full((len(ths), len(qs)), np.nan)
    qi = {v: i for i, v in enumerate(qs)}
    ti = {v: i for i, v in enumerate(ths)}
    for q, th, f in zip(data["q"], data["theta"], data["fraction_stable"]):
        grid[ti[th], qi[q]] = f
    fig, ax = plt.subplots(figsize=(6, 4))
    # cell-centred edges; a 1x1 grid still renders one filled cell
    mesh = ax.pcolormesh(
        _edges(qs), _edges(ths), grid, cmap="viridis", vmin=0.0, vmax=1.0, shading="flat"
    )
    fig.colorbar(mesh, ax=ax, label="trapped fraction")
    ax.set_xlabel("q")
    ax.set_ylabel(r"$k_B T / E_S$")
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _edges(centers):
    c = np.asarray(centers, dtype=float)
    if len(c) == 1:
        half = 0.5 * (abs(c[0]) if c[0] != 0 else 0.5)
        return np.array([c[0] - half, c[0] + half])
    mid = 0.5 * (c[1:] + c[:-1])
    return np.concatenate([[c[0] - (mid[0] - c[0])], mid, [c[-1] + (c[-1] - mid[-1])]])


def _plot_trajectory(header, data, out_path, meta=None):
    fig, ax = plt.subplots(figsize=(7, 3.5))
    if "x_tilde" in header:
        ax.plot(data["tau"], data["x_tilde"], lw=0.8, color="k")
        ax.set_ylabel(r"$kx$")
    elif "mean_x" in header:
        ax.plot(data["tau"], data["mean_x"], lw=0.8, color="k", label=r"$\langle x\rangle$")
        if meta and meta.get("gamma_rad_per_ns", 0) > 0 and "t" in header:
            # damped secular envelope, the no-micromotion comparison
            gamma = meta["gamma_rad_per_ns"]
            a0 = float(np.max(np.abs(data["mean_x"][: max(2, len(data["t"]) // 50)])))
            env = a0 * np.exp(-0.5 * gamma * data["t"])
            ax.plot(data["tau"], env, "r--", lw=1.0, label="secular envelope")
            ax.plot(data["tau"], -env, "r--", lw=1.0)
        ax.legend(loc="upper right", fontsize=8)
        ax.set_ylabel(r"$\langle x \rangle$ [nm]")
    else:
        raise ValueError("dataset schema does not match kind 'trajectory'")
    ax.set_xlabel(r"$\tau$")
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _plot_moments(header, data, out_path):
    _require(header, ["tau", "var_x", "var_p"], "moments")
    fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    axes[0].plot(data["tau"], data["mean_x"], lw=0.8, color="k")
    axes[0].set_ylabel(r"$\langle x \rangle$ [nm]")
    axes[1].plot(data["tau"], data["var_x"], lw=0.8, label=r"$\sigma_x^2$")
    var_p = data["var_p"]
    scale = np.max(var_p) if np.max(var_p) > 0 else 1.0
    axes[1].plot(data["tau"], var_p / scale * np.max(data["var_x"]), lw=0.8,
                 label=r"$\sigma_p^2$ (scaled)")
    axes[1].set_ylabel("variance")
    axes[1].set_xlabel(r"$\tau$")
    axes[1].legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
