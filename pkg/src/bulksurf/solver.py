"""Time integration of the coupled bulk-surface system.

One step treats diffusion implicitly and reactions explicitly, per species:
rates are evaluated at the step-start state (boundary rates at the traced
bulk values), the reaction update is applied, and each species then solves a
symmetric positive definite system for its diffusion update, with the
boundary flux injected on the right-hand side at its step-start value. With
``reaction_coupling="strang"`` the reaction update splits into two half steps
around a Crank-Nicolson diffusion core, lifting the scheme to second order in
time; the default ``"explicit"`` coupling is backward Euler diffusion, whose
system matrix is an M-matrix and therefore preserves nonnegativity.

Accumulated time integrals (W over cells, the traced W on boundary nodes, Z
over nodes) use end-of-step values, i.e. a right-endpoint rule.

Implicit systems are solved by preconditioned conjugate gradients with a
sparse-LU preconditioner factored once per species; the residual check is a
genuine CG residual, so ``linear_tol`` and ``max_linear_iters`` keep their
meaning. Per-species solves are independent given step-start coupling values;
the orchestration here is single-threaded and every reduction has a fixed
summation order, so identical configurations reproduce bit-identical states.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import PolarMesh
from .network import ReactionNetwork, SpeciesSet

__all__ = [
    "SolverConfig",
    "SimState",
    "StepInfo",
    "TimeStepper",
    "LinearSolveError",
    "PositivityError",
    "CompatibilityReport",
    "check_compatibility",
    "step",
]

POSITIVITY_POLICIES = ("reject", "clip", "none")
REACTION_COUPLINGS = ("explicit", "strang")

# Negative values smaller than this (times the field scale) are treated as
# solver roundoff and zeroed under every policy.
_ROUNDOFF_GUARD = 1e-13


class LinearSolveError(RuntimeError):
    """An implicit solve failed to reach linear_tol within max_linear_iters."""

    def __init__(self, label: str, iterations: int, relative_residual: float):
        self.label = label
        self.iterations = iterations
        self.relative_residual = relative_residual
        super().__init__(
            f"{label}: no convergence after {iterations} iterations "
            f"(relative residual {relative_residual:.3e})"
        )


class PositivityError(RuntimeError):
    """A field went negative under the 'reject' policy."""

    def __init__(self, kind: str, species: str, index: int, value: float, t: float):
        self.kind = kind
        self.species = species
        self.index = index
        self.value = value
        self.t = t
        super().__init__(
            f"{kind} species {species!r} went negative at {kind} index {index} "
            f"(value {value:.6e}, t = {t:.6g})"
        )


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    linear_tol: float = 1e-10
    max_linear_iters: int = 400
    positivity_policy: str = "reject"
    blowup_threshold: float = 1e6
    reaction_coupling: str = "explicit"

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (np.isfinite(self.t_end) and self.t_end >= 0):
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if not (0.0 < self.linear_tol < 1.0):
            raise ValueError(f"linear_tol must lie in (0, 1), got {self.linear_tol}")
        if self.max_linear_iters < 1:
            raise ValueError("max_linear_iters must be >= 1")
        if self.positivity_policy not in POSITIVITY_POLICIES:
            raise ValueError(
                f"positivity_policy must be one of {POSITIVITY_POLICIES}, "
                f"got {self.positivity_policy!r}"
            )
        if not (np.isfinite(self.blowup_threshold) and self.blowup_threshold > 0):
            raise ValueError("blowup_threshold must be positive")
        if self.reaction_coupling not in REACTION_COUPLINGS:
            raise ValueError(
                f"reaction_coupling must be one of {REACTION_COUPLINGS}, "
                f"got {self.reaction_coupling!r}"
            )

    def with_updates(self, **kwargs) -> "SolverConfig":
        return replace(self, **kwargs)


@dataclass
class SimState:
    """Fields at one time level plus their accumulated time integrals.

    u has shape (m1, ncells), v has shape (m2, ntheta). w_accum integrates u
    per cell, w_trace_accum integrates the boundary trace of u per node, and
    z_accum integrates v per node; all are nondecreasing while the fields
    stay nonnegative. t always equals step_count * dt for fixed-step runs.
    """

    t: float
    u: np.ndarray
    v: np.ndarray
    w_accum: np.ndarray
    w_trace_accum: np.ndarray
    z_accum: np.ndarray
    step_count: int = 0

    @classmethod
    def initial(cls, u0: np.ndarray, v0: np.ndarray, mesh: PolarMesh) -> "SimState":
        u0 = np.atleast_2d(np.asarray(u0, dtype=float))
        v0 = np.asarray(v0, dtype=float).reshape(-1, mesh.ntheta)
        if u0.shape[1] != mesh.ncells:
            raise ValueError(
                f"initial bulk fields have {u0.shape[1]} cells, mesh has {mesh.ncells}"
            )
        return cls(
            t=0.0,
            u=u0.copy(),
            v=v0.copy(),
            w_accum=np.zeros_like(u0),
            w_trace_accum=np.zeros((u0.shape[0], mesh.ntheta)),
            z_accum=np.zeros_like(v0),
            step_count=0,
        )

    def copy(self) -> "SimState":
        return SimState(
            t=self.t,
            u=self.u.copy(),
            v=self.v.copy(),
            w_accum=self.w_accum.copy(),
            w_trace_accum=self.w_trace_accum.copy(),
            z_accum=self.z_accum.copy(),
            step_count=self.step_count,
        )

    def max_abs(self) -> float:
        m = float(np.max(np.abs(self.u))) if self.u.size else 0.0
        if self.v.size:
            m = max(m, float(np.max(np.abs(self.v))))
        return m

    def all_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v)))


@dataclass
class StepInfo:
    clipped_mass: float = 0.0
    linear_iterations: int = 0


def _pcg(A, b, x0, rtol, maxiter, presolve, label):
    """Conjugate gradients with a preconditioner; returns (x, iterations)."""
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    x = x0.copy()
    r = b - A @ x
    if np.linalg.norm(r) <= rtol * bnorm:
        return x, 0
    z = presolve(r)
    p = z.copy()
    rz = float(r @ z)
    for k in range(1, maxiter + 1):
        Ap = A @ p
        alpha = rz / float(p @ Ap)
        x = x + alpha * p
        r = r - alpha * Ap
        rnorm = float(np.linalg.norm(r))
        if rnorm <= rtol * bnorm:
            return x, k
        z = presolve(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise LinearSolveError(label, maxiter, float(np.linalg.norm(b - A @ x)) / bnorm)


class _ImplicitDiffusion:
    """One species' implicit diffusion solve on a fixed mesh and step size.

    Solves (M + theta*dt*d*S) x = M*rhs_explicit - (1-theta)*dt*d*S*rhs
    + dt*source_mass, where M = diag(measure) and S is the stiffness matrix;
    theta = 1 is backward Euler, theta = 1/2 Crank-Nicolson. The system is
    symmetric positive definite; an exact sparse LU serves as preconditioner.
    """

    def __init__(self, measure, stiffness, diffusivity, dt, theta, label):
        self.measure = measure
        self.stiffness = stiffness
        self.diffusivity = diffusivity
        self.dt = dt
        self.theta = theta
        self.label = label
        matrix = sp.diags(measure) + (theta * dt * diffusivity) * stiffness
        self.matrix = matrix.tocsr()
        self._lu = spla.splu(matrix.tocsc())

    def solve(self, field, source_mass, x0, rtol, maxiter):
        rhs = self.measure * field
        if self.theta < 1.0:
            rhs = rhs - ((1.0 - self.theta) * self.dt * self.diffusivity) * (
                self.stiffness @ field
            )
        if source_mass is not None:
            rhs = rhs + self.dt * source_mass
        return _pcg(self.matrix, rhs, x0, rtol, maxiter, self._lu.solve, self.label)


class TimeStepper:
    """Advances a SimState; the implicit operators are factored once."""

    def __init__(self, mesh: PolarMesh, species: SpeciesSet, cfg: SolverConfig):
        self.mesh = mesh
        self.species = species
        self.cfg = cfg
        theta = 0.5 if cfg.reaction_coupling == "strang" else 1.0
        bulk_s = mesh.bulk_stiffness()
        surf_s = mesh.surface_stiffness()
        self.bulk_ops = [
            _ImplicitDiffusion(
                mesh.cell_areas, bulk_s, d, cfg.dt, theta, f"bulk solve {name}"
            )
            for name, d in zip(species.bulk_names, species.d)
        ]
        self.surface_ops = [
            _ImplicitDiffusion(
                mesh.boundary_arc_lengths,
                surf_s,
                delta,
                cfg.dt,
                theta,
                f"surface solve {name}",
            )
            for name, delta in zip(species.surface_names, species.delta)
        ]

    def _reaction_rates(self, net: ReactionNetwork, u, v):
        u_trace = u[:, self.mesh.boundary_cell_index]
        f = net.eval_bulk(u)
        g, h = net.eval_boundary(u_trace, v)
        return f, g, h

    def _apply_policy(self, state: SimState) -> float:
        """Zero roundoff negatives, then enforce the positivity policy.

        Returns the clipped mass (policy "clip") so it can be logged as a
        mass-accounting correction.
        """
        clipped = 0.0
        policy = self.cfg.positivity_policy
        for kind, fields, measure, names in (
            ("bulk", state.u, self.mesh.cell_areas, self.species.bulk_names),
            ("surface", state.v, self.mesh.boundary_arc_lengths, self.species.surface_names),
        ):
            if fields.size == 0:
                continue
            with np.errstate(invalid="ignore"):
                guard = _ROUNDOFF_GUARD * max(1.0, float(np.nanmax(np.abs(fields))))
                tiny = (fields < 0) & (fields >= -guard)
            fields[tiny] = 0.0
            if policy == "none":
                continue
            with np.errstate(invalid="ignore"):
                negative = fields < 0
            if not np.any(negative):
                continue
            if policy == "reject":
                idx = np.argwhere(negative)[0]
                raise PositivityError(
                    kind,
                    names[idx[0]],
                    int(idx[1]),
                    float(fields[idx[0], idx[1]]),
                    state.t,
                )
            clipped += float(np.sum(-(fields * negative) * measure))
            fields[negative] = 0.0
        return clipped

    def _flux_rate(self, g: np.ndarray) -> np.ndarray:
        """Per-cell rate of change from the boundary flux densities g."""
        rate = np.zeros((g.shape[0], self.mesh.ncells))
        bidx = self.mesh.boundary_cell_index
        rate[:, bidx] = g * (
            self.mesh.boundary_arc_lengths / self.mesh.cell_areas[bidx]
        )
        return rate

    def step(self, state: SimState, net: ReactionNetwork):
        """One time step; returns (new_state, StepInfo).

        Explicit coupling: full reaction update, then backward Euler
        diffusion with dt times the step-start flux on the right-hand side.
        Strang coupling: half update of reactions AND flux, Crank-Nicolson
        pure diffusion, then the second half at the post-diffusion state, so
        pointwise-cancelling flux/surface rate pairs still conserve mass
        exactly.
        """
        cfg = self.cfg
        dt = cfg.dt
        arcs = self.mesh.boundary_arc_lengths
        bidx = self.mesh.boundary_cell_index
        strang = cfg.reaction_coupling == "strang"
        f, g, h = self._reaction_rates(net, state.u, state.v)

        if strang:
            u_e = state.u + (0.5 * dt) * (f + self._flux_rate(g))
            v_e = state.v + (0.5 * dt) * h if state.v.size else state.v.copy()
        else:
            u_e = state.u + dt * f
            v_e = state.v + dt * h if state.v.size else state.v.copy()

        iters = 0
        u_new = np.empty_like(state.u)
        for i, op in enumerate(self.bulk_ops):
            if strang:
                source = None
            else:
                source = np.zeros(self.mesh.ncells)
                source[bidx] = g[i] * arcs
            u_new[i], it = op.solve(
                u_e[i], source, state.u[i], cfg.linear_tol, cfg.max_linear_iters
            )
            iters += it
        v_new = np.empty_like(state.v)
        for j, op in enumerate(self.surface_ops):
            v_new[j], it = op.solve(
                v_e[j], None, state.v[j], cfg.linear_tol, cfg.max_linear_iters
            )
            iters += it

        if strang:
            f2 = net.eval_bulk(u_new)
            g2, h2 = net.eval_boundary(u_new[:, bidx], v_new)
            u_new = u_new + (0.5 * dt) * (f2 + self._flux_rate(g2))
            if v_new.size:
                v_new = v_new + (0.5 * dt) * h2

        new_state = SimState(
            t=(state.step_count + 1) * dt,
            u=u_new,
            v=v_new,
            w_accum=state.w_accum,
            w_trace_accum=state.w_trace_accum,
            z_accum=state.z_accum,
            step_count=state.step_count + 1,
        )
        clipped = self._apply_policy(new_state)
        new_state.w_accum = state.w_accum + dt * new_state.u
        new_state.w_trace_accum = state.w_trace_accum + dt * new_state.u[:, bidx]
        new_state.z_accum = state.z_accum + dt * new_state.v
        return new_state, StepInfo(clipped_mass=clipped, linear_iterations=iters)


def step(state: SimState, mesh: PolarMesh, net: ReactionNetwork, cfg: SolverConfig) -> SimState:
    """Single-step convenience wrapper; builds a fresh TimeStepper.

    Loops should construct one TimeStepper and reuse it, which factors the
    implicit operators only once.
    """
    new_state, _ = TimeStepper(mesh, net.species, cfg).step(state, net)
    return new_state


@dataclass
class CompatibilityReport:
    """Mismatch between the initial normal flux and the boundary rate.

    Advisory only: a nonzero residual flags initial data for which the
    continuum problem's classical-solution setup is not met; it does not
    block a run.
    """

    max_abs: float
    l2: float
    per_species: dict

    def to_json_dict(self) -> dict:
        return {
            "max_abs": self.max_abs,
            "l2": self.l2,
            "per_species": self.per_species,
        }


def check_compatibility(
    mesh: PolarMesh, net: ReactionNetwork, u0: np.ndarray, v0: np.ndarray
) -> CompatibilityReport:
    """Residual d_i * (one-sided normal difference of u0) - G_i(trace u0, v0).

    The normal difference uses the outermost two rings; the trace is the
    outermost cell value.
    """
    u0 = np.atleast_2d(np.asarray(u0, dtype=float))
    v0 = np.asarray(v0, dtype=float).reshape(-1, mesh.ntheta)
    s = net.species
    bidx = mesh.boundary_cell_index
    inner = bidx - mesh.ntheta
    u_trace = u0[:, bidx]
    g, _ = net.eval_boundary(u_trace, v0)
    per_species = {}
    sq_sum = 0.0
    max_abs = 0.0
    for i, name in enumerate(s.bulk_names):
        normal_diff = (u0[i, bidx] - u0[i, inner]) / mesh.hr
        res = s.d[i] * normal_diff - g[i]
        per_species[name] = {
            "max_abs": float(np.max(np.abs(res))),
            "l2": float(np.sqrt(np.sum(res**2 * mesh.boundary_arc_lengths))),
        }
        sq_sum += float(np.sum(res**2 * mesh.boundary_arc_lengths))
        max_abs = max(max_abs, per_species[name]["max_abs"])
    return CompatibilityReport(max_abs=max_abs, l2=float(np.sqrt(sq_sum)), per_species=per_species)
