"""Run outputs: diagnostics CSV, field snapshots, summary and manifest JSON.

Numeric CSV fields use shortest round-trip decimals (Python float repr), so
identical runs produce byte-identical files. The manifest embeds the full
resolved configuration; reloading it reproduces the run exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

from . import __version__
from .conditions import (
    check_growth_thresholds,
    check_intermediate_sum,
    check_mass_control,
    check_polynomial_bound,
    check_quasi_positivity,
)
from .diagnostics import window_sup_report
from .runner import STATUS_BLOWUP, STATUS_COMPLETED, RunOutcome
from .scenarios import ScenarioConfig, build_mesh

__all__ = ["write_outputs", "run_certificate_checks", "DIAGNOSTICS_HEADER"]

DIAGNOSTICS_HEADER = (
    "t,species,kind,L1,L2,Lp,Linf,total_mass,envelope_residual,"
    "W_sup,W_trace_sup,Z_sup,window_sup,clip_correction"
)

SCHEMA_VERSION = 1


def _fmt(x: float) -> str:
    return repr(float(x))


def write_diagnostics_csv(outcome: RunOutcome, path: Path) -> None:
    lines = [DIAGNOSTICS_HEADER]
    for rec in outcome.records:
        shared = ",".join(
            _fmt(x)
            for x in (
                rec.total_mass,
                rec.envelope_residual,
                rec.w_sup,
                rec.w_trace_sup,
                rec.z_sup,
                rec.window_sup,
                rec.clip_correction,
            )
        )
        for sn in rec.species:
            lines.append(
                f"{_fmt(rec.t)},{sn.name},{sn.kind},{_fmt(sn.l1)},{_fmt(sn.l2)},"
                f"{_fmt(sn.lp)},{_fmt(sn.linf)},{shared}"
            )
    path.write_text("\n".join(lines) + "\n")


def _snapshot_rows(config: ScenarioConfig, state) -> list[str]:
    mesh = build_mesh(config)
    rows = ["species,kind,index_r,index_theta,value"]
    for i, name in enumerate(config.species.bulk_names):
        f = state.u[i].reshape(mesh.nr, mesh.ntheta)
        for k in range(mesh.nr):
            for j in range(mesh.ntheta):
                rows.append(f"{name},bulk,{k},{j},{_fmt(f[k, j])}")
    for jdx, name in enumerate(config.species.surface_names):
        for j in range(mesh.ntheta):
            rows.append(f"{name},surface,,{j},{_fmt(state.v[jdx, j])}")
    return rows


def run_certificate_checks(config: ScenarioConfig, dimension: int = 2) -> list[dict]:
    """The scenario's declared checks, as JSON-ready report dicts."""
    net = config.network
    reports = [check_quasi_positivity(net).to_json_dict()]
    if config.mass_cert is not None:
        reports.append(check_mass_control(net, config.mass_cert).to_json_dict())
    if config.intermediate_cert is not None:
        reports.append(check_intermediate_sum(net, config.intermediate_cert).to_json_dict())
        reports.append(
            check_growth_thresholds(config.intermediate_cert, dimension).to_json_dict()
        )
    _, poly_report = check_polynomial_bound(net)
    reports.append(poly_report.to_json_dict())
    return reports


def build_summary(outcome: RunOutcome, config: ScenarioConfig, checks: list[dict]) -> dict:
    final = outcome.records[-1]
    envelope_tol = 1e-8 * (1.0 + outcome.initial_mass)
    max_residual = max(rec.envelope_residual for rec in outcome.records)
    window = window_sup_report(outcome.records, config.solver.t_end)
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": config.name,
        "status": outcome.status,
        "final_time": final.t,
        "first_exceedance_time": outcome.first_exceedance_time,
        "final_norms": {
            sn.name: {"kind": sn.kind, "L1": sn.l1, "L2": sn.l2, "Lp": sn.lp, "Linf": sn.linf}
            for sn in final.species
        },
        "total_mass_initial": outcome.initial_mass,
        "total_mass_final": final.total_mass,
        "envelope": {
            "L": config.mass_cert.L if config.mass_cert else 0.0,
            "max_residual": max_residual,
            "tolerance": envelope_tol,
            "verdict": "pass" if max_residual <= envelope_tol else "violated",
        },
        "window_sups": window.windows,
        "time_integral_sups": {
            "W_sup": final.w_sup,
            "W_trace_sup": final.w_trace_sup,
            "Z_sup": final.z_sup,
        },
        "clip_correction_total": final.clip_correction,
        "compatibility": outcome.compatibility.to_json_dict()
        if outcome.compatibility
        else None,
        "checks": checks,
    }


def write_outputs(
    outcome: RunOutcome,
    config: ScenarioConfig,
    out_dir: str | Path | None = None,
    figures: bool = True,
    dimension: int = 2,
) -> list[Path]:
    """Write diagnostics.csv, snapshots, summary.json, manifest.json, figures.

    Returns the written paths. ``out_dir`` falls back to the scenario's
    configured output directory.
    """
    target = out_dir or config.outputs.directory
    if target is None:
        raise ValueError("no output directory given (config.outputs.directory or out_dir)")
    out = Path(target)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    csv_path = out / "diagnostics.csv"
    write_diagnostics_csv(outcome, csv_path)
    written.append(csv_path)

    for t, state in outcome.snapshots:
        snap_path = out / f"fields_t{float(t)!r}.csv"
        snap_path.write_text("\n".join(_snapshot_rows(config, state)) + "\n")
        written.append(snap_path)

    checks = run_certificate_checks(config, dimension)
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(build_summary(outcome, config, checks), indent=2) + "\n")
    written.append(summary_path)

    manifest_path = out / "manifest.json"
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": __version__,
        "config": config.to_dict(),
    }
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    written.append(manifest_path)

    if figures:
        from .figures import render_run_figures

        written.extend(render_run_figures(outcome, config, out))
    return written
