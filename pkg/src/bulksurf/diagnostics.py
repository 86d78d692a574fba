"""Runtime diagnostics: norms, mass envelopes, time-integral sups, windows.

Everything here reads state snapshots and is pure; records are meant to be
cheap enough to emit at every record interval of a run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conditions import MassControlCert
from .mesh import PolarMesh
from .network import SpeciesSet
from .solver import SimState

__all__ = [
    "lp_norm",
    "SpeciesNorms",
    "DiagnosticsRecord",
    "mass_report",
    "time_integral_sup",
    "WindowReport",
    "window_sup_report",
    "TraceInequalityReport",
    "trace_inequality_report",
    "build_record",
    "weighted_total_mass",
]

# Empirical cap for the fitted trace-inequality constant on this mesh family
# (uniform polar disks); fitted values above it get flagged.
TRACE_CONSTANT_CALIBRATION = 4.0


def _measure_for(mesh: PolarMesh, f: np.ndarray) -> np.ndarray:
    if f.shape == (mesh.ncells,):
        return mesh.cell_areas
    if f.shape == (mesh.ntheta,):
        return mesh.boundary_arc_lengths
    raise ValueError(
        f"field of shape {f.shape} matches neither cells ({mesh.ncells},) "
        f"nor boundary nodes ({mesh.ntheta},)"
    )


def lp_norm(mesh: PolarMesh, f, p: float) -> float:
    """Discrete L^p norm weighted by cell area or arc length; max-abs for inf."""
    f = np.asarray(f, dtype=float)
    if p != math.inf and p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    measure = _measure_for(mesh, f)
    if p == math.inf:
        return float(np.max(np.abs(f))) if f.size else 0.0
    return float(np.sum(np.abs(f) ** p * measure) ** (1.0 / p))


@dataclass
class SpeciesNorms:
    name: str
    kind: str  # "bulk" | "surface"
    l1: float
    l2: float
    lp: float
    linf: float


@dataclass
class DiagnosticsRecord:
    """One row of the diagnostics trace.

    window_sup is the running sup of all species' max norms over the trailing
    2-time-unit window ending at t; the per-cylinder report over integer
    start times is computed from the full record list afterwards.
    """

    t: float
    species: list[SpeciesNorms]
    total_mass: float
    envelope_residual: float
    w_sup: float
    w_trace_sup: float
    z_sup: float
    window_sup: float
    clip_correction: float

    def max_linf(self) -> float:
        return max((s.linf for s in self.species), default=0.0)


def weighted_total_mass(mesh: PolarMesh, state: SimState, cert: MassControlCert | None) -> float:
    """sum_i alpha_i * integral(u_i) + sum_j beta_j * integral(v_j)."""
    m1 = state.u.shape[0]
    m2 = state.v.shape[0]
    alpha = np.asarray(cert.alpha, dtype=float) if cert else np.ones(m1)
    beta = np.asarray(cert.beta, dtype=float) if cert else np.ones(m2)
    total = float(alpha @ (state.u @ mesh.cell_areas))
    if m2:
        total += float(beta @ (state.v @ mesh.boundary_arc_lengths))
    return total


def mass_report(
    mesh: PolarMesh,
    state: SimState,
    cert: MassControlCert | None = None,
    initial_mass: float | None = None,
) -> tuple[float, float]:
    """Weighted total mass and its envelope residual at the state's time.

    For L <= 0 the envelope is flat: residual = mass(t) - mass(0), which must
    stay within tolerance (nonpositive up to integration error). For L > 0
    the residual is measured against the exponential envelope
    (mass(0) + c) * exp(L t) - c with c = (|Omega| + |M|) * max weight, the
    integrated form of d/dt mass <= L * (mass + |Omega| + |M|). Positive
    residual means the envelope is violated.
    """
    total = weighted_total_mass(mesh, state, cert)
    if initial_mass is None:
        return total, 0.0
    L = cert.L if cert else 0.0
    if L <= 0:
        return total, total - initial_mass
    weights = (tuple(cert.alpha) + tuple(cert.beta)) if cert else (1.0,)
    c = (mesh.area_total + mesh.boundary_length_total) * max(max(weights), 1.0)
    envelope = (initial_mass + c) * math.exp(L * state.t) - c
    return total, total - envelope


def time_integral_sup(mesh: PolarMesh, state: SimState) -> tuple[float, float, float]:
    """Max over cells/nodes and species of the accumulated time integrals."""
    w_sup = float(np.max(state.w_accum)) if state.w_accum.size else 0.0
    w_trace_sup = float(np.max(state.w_trace_accum)) if state.w_trace_accum.size else 0.0
    z_sup = float(np.max(state.z_accum)) if state.z_accum.size else 0.0
    return w_sup, w_trace_sup, z_sup


@dataclass
class WindowReport:
    """Sup of all species' max norms over each 2-unit cylinder [tau, tau+2]."""

    windows: list[dict] = field(default_factory=list)
    note: str | None = None

    def sups(self) -> list[float]:
        return [w["sup"] for w in self.windows]


def window_sup_report(records: list[DiagnosticsRecord], t_end: float) -> WindowReport:
    """Windowed sup norms over cylinders of length 2, stride 1.

    Windows start at integer tau with tau + 2 <= t_end; a run shorter than
    one window yields an empty, noted report.
    """
    if t_end < 2.0:
        return WindowReport(windows=[], note=f"t_end = {t_end} < 2: no complete cylinder")
    eps = 1e-9
    windows = []
    tau = 0
    while tau + 2.0 <= t_end + eps:
        sup = 0.0
        seen = False
        for rec in records:
            if tau - eps <= rec.t <= tau + 2.0 + eps:
                sup = max(sup, rec.max_linf())
                seen = True
        if seen:
            windows.append({"tau": float(tau), "sup": sup})
        tau += 1
    return WindowReport(windows=windows)


@dataclass
class TraceInequalityReport:
    lhs: float
    grad_term: float
    bulk_term: float
    fitted_c: float | None
    flagged: bool

    def to_json_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "grad_term": self.grad_term,
            "bulk_term": self.bulk_term,
            "fitted_c": self.fitted_c,
            "flagged": self.flagged,
        }


def _cellwise_gradient_magnitude(mesh: PolarMesh, f2d: np.ndarray) -> np.ndarray:
    """|grad| per cell from face-difference quotients (the Laplacian stencil).

    Each direction averages the available one-sided face quotients; the pole
    ring has no inner radial face and the rim no outer one.
    """
    nr, nt = mesh.nr, mesh.ntheta
    dr = np.zeros((nr, nt))
    q_r = (f2d[1:, :] - f2d[:-1, :]) / mesh.hr  # (nr-1, nt) at radial faces
    if nr > 1:
        dr[0] = q_r[0]
        dr[-1] = q_r[-1]
        if nr > 2:
            dr[1:-1] = 0.5 * (q_r[1:] + q_r[:-1])
    r_mid = (np.arange(nr) + 0.5) * mesh.hr
    arc_dist = r_mid[:, None] * mesh.htheta
    q_right = (np.roll(f2d, -1, axis=1) - f2d) / arc_dist
    q_left = (f2d - np.roll(f2d, 1, axis=1)) / arc_dist
    dth = 0.5 * (q_right + q_left)
    return np.sqrt(dr**2 + dth**2)


def trace_inequality_report(
    mesh: PolarMesh,
    field_values,
    sigma: float,
    calibration: float = TRACE_CONSTANT_CALIBRATION,
) -> TraceInequalityReport:
    """Discrete boundary-vs-bulk interpolation check for a nonnegative field.

    Compares the boundary integral of trace(w)^sigma against
    sigma * integral(w^(sigma-1) |grad w|) + integral(w^sigma) and fits the
    single constant lhs / (sigma * grad_term + bulk_term). Fitted values are
    mesh-family empirical numbers, not continuum constants; anything above
    ``calibration`` is flagged.
    """
    n = 2  # disk dimension
    if not (2.0 < sigma < 2.0 + 2.0 / n):
        raise ValueError(f"sigma must lie in (2, {2 + 2 / n}), got {sigma}")
    w = np.asarray(field_values, dtype=float)
    if w.shape != (mesh.ncells,):
        raise ValueError(f"expected a bulk field of shape ({mesh.ncells},)")
    if np.any(w < 0):
        raise ValueError("trace inequality requires a nonnegative field")

    trace = w[mesh.boundary_cell_index]
    lhs = float(np.sum(trace**sigma * mesh.boundary_arc_lengths))
    f2d = w.reshape(mesh.nr, mesh.ntheta)
    grad_mag = _cellwise_gradient_magnitude(mesh, f2d).ravel()
    grad_term = float(np.sum(w ** (sigma - 1.0) * grad_mag * mesh.cell_areas))
    bulk_term = float(np.sum(w**sigma * mesh.cell_areas))
    denom = sigma * grad_term + bulk_term
    if denom == 0.0:
        return TraceInequalityReport(lhs, grad_term, bulk_term, None, False)
    fitted = lhs / denom
    return TraceInequalityReport(lhs, grad_term, bulk_term, fitted, fitted > calibration)


def build_record(
    mesh: PolarMesh,
    species: SpeciesSet,
    state: SimState,
    cert: MassControlCert | None,
    initial_mass: float | None,
    lp_exponent: float,
    window_sup: float,
    clip_correction: float,
) -> DiagnosticsRecord:
    norms = []
    for i, name in enumerate(species.bulk_names):
        f = state.u[i]
        norms.append(
            SpeciesNorms(
                name=name,
                kind="bulk",
                l1=lp_norm(mesh, f, 1),
                l2=lp_norm(mesh, f, 2),
                lp=lp_norm(mesh, f, lp_exponent),
                linf=lp_norm(mesh, f, math.inf),
            )
        )
    for j, name in enumerate(species.surface_names):
        g = state.v[j]
        norms.append(
            SpeciesNorms(
                name=name,
                kind="surface",
                l1=lp_norm(mesh, g, 1),
                l2=lp_norm(mesh, g, 2),
                lp=lp_norm(mesh, g, lp_exponent),
                linf=lp_norm(mesh, g, math.inf),
            )
        )
    total, residual = mass_report(mesh, state, cert, initial_mass)
    w_sup, w_trace_sup, z_sup = time_integral_sup(mesh, state)
    return DiagnosticsRecord(
        t=state.t,
        species=norms,
        total_mass=total,
        envelope_residual=residual,
        w_sup=w_sup,
        w_trace_sup=w_trace_sup,
        z_sup=z_sup,
        window_sup=window_sup,
        clip_correction=clip_correction,
    )
