"""Run orchestration: step loop, record emission, blow-up detection.

The loop is single-threaded; per-step work delegates to the TimeStepper. A
diagnostics record is emitted at t = 0 and at every multiple of the record
interval; a run that stops early (blow-up, rejection, solver failure) gets a
final record at the stopping time. Field snapshots are captured at the first
step reaching each requested time.

Blow-up is surrogated numerically: the run stops with ``blowup_detected`` as
soon as any field's max norm exceeds the configured threshold or turns
non-finite. The true criterion is a limsup statement unreachable in finite
arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diagnostics import DiagnosticsRecord, build_record, weighted_total_mass
from .scenarios import ScenarioConfig, build_initial_fields, build_mesh
from .solver import (
    CompatibilityReport,
    LinearSolveError,
    PositivityError,
    SimState,
    SolverConfig,
    TimeStepper,
    check_compatibility,
)

__all__ = ["RunOutcome", "run", "STATUS_COMPLETED", "STATUS_BLOWUP",
           "STATUS_POSITIVITY", "STATUS_LINEAR"]

STATUS_COMPLETED = "completed"
STATUS_BLOWUP = "blowup_detected"
STATUS_POSITIVITY = "positivity_rejected"
STATUS_LINEAR = "linear_solver_failed"

_WINDOW_LENGTH = 2.0


@dataclass
class RunOutcome:
    status: str
    final_state: SimState
    records: list[DiagnosticsRecord]
    step_times: np.ndarray
    step_mass: np.ndarray
    snapshots: list[tuple[float, SimState]] = field(default_factory=list)
    first_exceedance_time: float | None = None
    compatibility: CompatibilityReport | None = None
    failure_detail: str | None = None
    initial_mass: float = 0.0


def run(config: ScenarioConfig, solver_cfg: SolverConfig | None = None) -> RunOutcome:
    """Integrate a scenario to t_end (or until an early-stop condition)."""
    cfg = solver_cfg or config.solver
    mesh = build_mesh(config)
    net = config.network
    species = config.species
    cert = config.mass_cert

    u0, v0 = build_initial_fields(config, mesh)
    compatibility = check_compatibility(mesh, net, u0, v0)
    state = SimState.initial(u0, v0, mesh)
    stepper = TimeStepper(mesh, species, cfg)

    mass0 = weighted_total_mass(mesh, state, cert)
    lp_p = config.outputs.lp_exponent
    interval = config.outputs.record_interval
    clip_total = 0.0

    # trailing window of (t, max linf) pairs for the running window sup
    window: list[tuple[float, float]] = []

    def window_sup(t_now: float, linf_now: float) -> float:
        window.append((t_now, linf_now))
        while window and window[0][0] < t_now - _WINDOW_LENGTH - 1e-12:
            window.pop(0)
        return max(val for _, val in window)

    def make_record(st: SimState, wsup: float) -> DiagnosticsRecord:
        return build_record(mesh, species, st, cert, mass0, lp_p, wsup, clip_total)

    linf0 = state.max_abs()
    records = [make_record(state, window_sup(0.0, linf0))]
    step_times = [0.0]
    step_mass = [mass0]

    n_steps = int(round(cfg.t_end / cfg.dt))
    snap_queue = sorted(config.outputs.snapshot_times)
    snapshots: list[tuple[float, SimState]] = []
    while snap_queue and snap_queue[0] <= 0.0 + cfg.dt * 0.5:
        snapshots.append((state.t, state.copy()))
        snap_queue.pop(0)

    status = STATUS_COMPLETED
    failure = None
    first_exceedance = None
    next_record = 1

    for _ in range(n_steps):
        try:
            state, info = stepper.step(state, net)
        except PositivityError as exc:
            status, failure = STATUS_POSITIVITY, str(exc)
            break
        except LinearSolveError as exc:
            status, failure = STATUS_LINEAR, str(exc)
            break
        clip_total += info.clipped_mass
        step_times.append(state.t)
        step_mass.append(weighted_total_mass(mesh, state, cert))

        finite = state.all_finite()
        linf = state.max_abs() if finite else float("inf")
        if not finite or linf > cfg.blowup_threshold:
            status = STATUS_BLOWUP
            first_exceedance = state.t
            records.append(make_record(state, window_sup(state.t, linf)))
            break

        wsup = window_sup(state.t, linf)
        while next_record * interval <= state.t + 0.5 * cfg.dt:
            records.append(make_record(state, wsup))
            next_record += 1
        while snap_queue and snap_queue[0] <= state.t + 0.5 * cfg.dt:
            snapshots.append((state.t, state.copy()))
            snap_queue.pop(0)

    if status in (STATUS_POSITIVITY, STATUS_LINEAR) and records[-1].t < state.t:
        records.append(make_record(state, window_sup(state.t, state.max_abs())))

    return RunOutcome(
        status=status,
        final_state=state,
        records=records,
        step_times=np.asarray(step_times),
        step_mass=np.asarray(step_mass),
        snapshots=snapshots,
        first_exceedance_time=first_exceedance,
        compatibility=compatibility,
        failure_detail=failure,
        initial_mass=mass0,
    )
