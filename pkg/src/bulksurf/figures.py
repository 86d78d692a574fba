"""Figure rendering for run outputs (headless matplotlib, PNG files)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .runner import RunOutcome
from .scenarios import ScenarioConfig, build_mesh

__all__ = ["render_run_figures"]


def _timeseries_figure(outcome: RunOutcome, config: ScenarioConfig, path: Path) -> None:
    t = np.array([rec.t for rec in outcome.records])
    fig, (ax_norm, ax_mass) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)

    names = [sn.name for sn in outcome.records[0].species]
    for idx, name in enumerate(names):
        linf = np.array([rec.species[idx].linf for rec in outcome.records])
        kind = outcome.records[0].species[idx].kind
        ax_norm.plot(t, linf, label=f"{name} ({kind})")
    ax_norm.set_ylabel(r"$L^\infty$ norm")
    if outcome.status == "blowup_detected":
        ax_norm.set_yscale("log")
    ax_norm.legend(loc="best", fontsize=8)
    ax_norm.set_title(f"{config.name}: {outcome.status}")

    mass = np.array([rec.total_mass for rec in outcome.records])
    resid = np.array([rec.envelope_residual for rec in outcome.records])
    ax_mass.plot(t, mass, label="total mass")
    ax_mass.plot(t, resid, label="envelope residual", linestyle="--")
    ax_mass.set_xlabel("t")
    ax_mass.set_ylabel("mass")
    ax_mass.legend(loc="best", fontsize=8)

    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _fields_figure(outcome: RunOutcome, config: ScenarioConfig, path: Path) -> None:
    mesh = build_mesh(config)
    state = outcome.final_state
    m1, m2 = config.species.m1, config.species.m2
    ncols = m1 + m2
    fig = plt.figure(figsize=(4 * ncols, 3.6))

    theta_edges = np.linspace(0.0, 2.0 * np.pi, mesh.ntheta + 1)
    r_edges = np.linspace(0.0, mesh.radius, mesh.nr + 1)
    col = 1
    for i, name in enumerate(config.species.bulk_names):
        ax = fig.add_subplot(1, ncols, col, projection="polar")
        grid = state.u[i].reshape(mesh.nr, mesh.ntheta)
        pcm = ax.pcolormesh(theta_edges, r_edges, grid, shading="flat")
        ax.set_yticklabels([])
        ax.set_xticklabels([])
        ax.set_title(f"{name} (bulk), t={state.t:.3g}", fontsize=9)
        fig.colorbar(pcm, ax=ax, shrink=0.8)
        col += 1
    for j, name in enumerate(config.species.surface_names):
        ax = fig.add_subplot(1, ncols, col)
        ax.plot(mesh.boundary_theta, state.v[j])
        ax.set_xlabel(r"$\theta$")
        ax.set_title(f"{name} (surface), t={state.t:.3g}", fontsize=9)
        col += 1

    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_run_figures(
    outcome: RunOutcome, config: ScenarioConfig, out_dir: str | Path
) -> list[Path]:
    """Render the diagnostics timeseries and final-field figures as PNGs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ts_path = out / "diagnostics.png"
    _timeseries_figure(outcome, config, ts_path)
    fields_path = out / "fields_final.png"
    _fields_figure(outcome, config, fields_path)
    return [ts_path, fields_path]
