"""Norms, mass envelopes, time-integral sups, windows, trace inequality."""

import math

import numpy as np
import pytest

from bulksurf.conditions import MassControlCert
from bulksurf.diagnostics import (
    DiagnosticsRecord,
    SpeciesNorms,
    lp_norm,
    mass_report,
    time_integral_sup,
    trace_inequality_report,
    weighted_total_mass,
    window_sup_report,
)
from bulksurf.mesh import build_polar_mesh
from bulksurf.network import SpeciesSet, build_network
from bulksurf.solver import SimState, SolverConfig, TimeStepper


class TestLpNorm:
    def test_unit_field_l1_is_disk_area(self):
        mesh = build_polar_mesh(1.0, 8, 16)
        assert lp_norm(mesh, np.ones(mesh.ncells), 1) == pytest.approx(np.pi, rel=1e-12)

    def test_unit_field_linf(self):
        mesh = build_polar_mesh(1.0, 8, 16)
        assert lp_norm(mesh, np.ones(mesh.ncells), math.inf) == 1.0

    def test_boundary_indicator_l1_is_arc_length(self):
        mesh = build_polar_mesh(1.0, 4, 8)
        g = np.zeros(mesh.ntheta)
        g[3] = 1.0
        assert lp_norm(mesh, g, 1) == pytest.approx(2 * np.pi / 8, rel=1e-12)

    def test_rejects_p_below_one(self):
        mesh = build_polar_mesh(1.0, 4, 8)
        with pytest.raises(ValueError):
            lp_norm(mesh, np.ones(mesh.ncells), 0.5)

    def test_holder_consistency(self):
        mesh = build_polar_mesh(1.0, 8, 16)
        rng = np.random.default_rng(4)
        for p in (1.5, 2.0, 4.0, 10.0):
            for f, total in (
                (rng.random(mesh.ncells), mesh.area_total),
                (rng.random(mesh.ntheta), mesh.boundary_length_total),
            ):
                l1 = lp_norm(mesh, f, 1)
                lp = lp_norm(mesh, f, p)
                assert l1 <= total ** (1 - 1 / p) * lp + 1e-10


class TestMassReport:
    def test_zero_fields(self):
        mesh = build_polar_mesh(1.0, 4, 8)
        state = SimState.initial(np.zeros((1, mesh.ncells)), np.zeros((1, 8)), mesh)
        cert = MassControlCert(alpha=(1.0,), beta=(1.0,), L=0.0)
        total, residual = mass_report(mesh, state, cert, initial_mass=0.0)
        assert total == 0.0 and residual == 0.0

    def test_matches_solver_bookkeeping_sum(self):
        # two independent code paths: the report's weighted sum vs a manual
        # dot product against measures
        mesh = build_polar_mesh(1.0, 6, 12)
        rng = np.random.default_rng(8)
        u = rng.random((2, mesh.ncells))
        v = rng.random((1, mesh.ntheta))
        state = SimState.initial(u, v, mesh)
        cert = MassControlCert(alpha=(1.0, 2.0), beta=(0.5,), L=0.0)
        total, _ = mass_report(mesh, state, cert, initial_mass=0.0)
        manual = (
            float(np.sum(u[0] * mesh.cell_areas))
            + 2.0 * float(np.sum(u[1] * mesh.cell_areas))
            + 0.5 * float(np.sum(v[0] * mesh.boundary_arc_lengths))
        )
        assert total == pytest.approx(manual, abs=1e-12)
        assert total == pytest.approx(weighted_total_mass(mesh, state, cert), abs=1e-15)

    def test_positive_L_uses_exponential_envelope(self):
        mesh = build_polar_mesh(1.0, 4, 8)
        state = SimState.initial(np.ones((1, mesh.ncells)), np.ones((1, 8)), mesh)
        state.t = 0.5
        cert = MassControlCert(alpha=(1.0,), beta=(1.0,), L=2.0)
        m0 = weighted_total_mass(mesh, state, cert)
        total, residual = mass_report(mesh, state, cert, initial_mass=m0)
        c = mesh.area_total + mesh.boundary_length_total
        envelope = (m0 + c) * math.exp(2.0 * 0.5) - c
        assert residual == pytest.approx(total - envelope, rel=1e-12)
        assert residual < 0  # flat mass sits safely under the growing envelope


class TestTimeIntegralSup:
    def test_pure_diffusion_of_unit_field_gives_t(self):
        mesh = build_polar_mesh(1.0, 6, 12)
        species = SpeciesSet(("u1",), ("v1",), (1.0,), (1.0,))
        net = build_network(species, ["0"], ["0"], ["0"], {})
        cfg = SolverConfig(dt=1e-2, t_end=1.0)
        stepper = TimeStepper(mesh, species, cfg)
        state = SimState.initial(np.ones((1, mesh.ncells)), np.zeros((1, 12)), mesh)
        for _ in range(30):
            state, _ = stepper.step(state, net)
        w_sup, w_trace_sup, z_sup = time_integral_sup(mesh, state)
        assert abs(w_sup - state.t) <= 1e-10
        assert abs(w_trace_sup - state.t) <= 1e-10
        assert z_sup == 0.0

    def test_zero_state_gives_zero(self):
        mesh = build_polar_mesh(1.0, 4, 8)
        state = SimState.initial(np.zeros((1, mesh.ncells)), np.zeros((1, 8)), mesh)
        assert time_integral_sup(mesh, state) == (0.0, 0.0, 0.0)

    def test_sups_nondecreasing_along_a_run(self):
        mesh = build_polar_mesh(1.0, 6, 12)
        species = SpeciesSet(("u1",), ("v1",), (1.0,), (1.0,))
        net = build_network(
            species, ["0"], ["v1 - u1"], ["u1 - v1 - v1"], {}
        )
        cfg = SolverConfig(dt=1e-3, t_end=1.0)
        stepper = TimeStepper(mesh, species, cfg)
        state = SimState.initial(
            np.ones((1, mesh.ncells)), np.full((1, 12), 0.5), mesh
        )
        prev = (0.0, 0.0, 0.0)
        for _ in range(100):
            state, _ = stepper.step(state, net)
            sups = time_integral_sup(mesh, state)
            assert all(s >= p for s, p in zip(sups, prev))
            prev = sups


def _record(t, linf, kinds=("bulk",)):
    return DiagnosticsRecord(
        t=t,
        species=[SpeciesNorms("s", k, linf, linf, linf, linf) for k in kinds],
        total_mass=0.0,
        envelope_residual=0.0,
        w_sup=0.0,
        w_trace_sup=0.0,
        z_sup=0.0,
        window_sup=0.0,
        clip_correction=0.0,
    )


class TestWindowReport:
    def test_constant_state_equal_sups(self):
        records = [_record(0.1 * k, 2.0) for k in range(101)]
        report = window_sup_report(records, 10.0)
        assert len(report.windows) == 9
        assert all(w["sup"] == 2.0 for w in report.windows)

    def test_short_run_yields_empty_noted_report(self):
        records = [_record(0.1 * k, 1.0) for k in range(11)]
        report = window_sup_report(records, 1.0)
        assert report.windows == []
        assert report.note is not None

    def test_decaying_records_give_decreasing_sups(self):
        records = [_record(0.1 * k, math.exp(-0.1 * k)) for k in range(101)]
        report = window_sup_report(records, 10.0)
        sups = report.sups()
        assert all(b < a for a, b in zip(sups, sups[1:]))
        # each window's sup is attained at its left edge
        assert sups[0] == pytest.approx(1.0)


class TestTraceInequality:
    def test_unit_field_fits_constant_two(self):
        mesh = build_polar_mesh(1.0, 16, 32)
        report = trace_inequality_report(mesh, np.ones(mesh.ncells), 2.5)
        assert report.lhs == pytest.approx(2 * np.pi, rel=1e-12)
        assert report.grad_term == 0.0
        assert report.bulk_term == pytest.approx(np.pi, rel=1e-12)
        assert abs(report.fitted_c - 2.0) <= 1e-12
        assert not report.flagged

    def test_zero_field_not_applicable(self):
        mesh = build_polar_mesh(1.0, 8, 16)
        report = trace_inequality_report(mesh, np.zeros(mesh.ncells), 2.5)
        assert report.fitted_c is None and not report.flagged

    def test_radial_ramp_stable_across_refinement(self):
        fitted = []
        for nr in (16, 32, 64):
            mesh = build_polar_mesh(1.0, nr, 2 * nr)
            report = trace_inequality_report(mesh, mesh.cell_r.copy(), 2.5)
            fitted.append(report.fitted_c)
        spread = (max(fitted) - min(fitted)) / min(fitted)
        assert spread <= 0.10

    def test_sigma_range_enforced(self):
        mesh = build_polar_mesh(1.0, 4, 8)
        for sigma in (2.0, 3.0, 1.0, 5.0):
            with pytest.raises(ValueError):
                trace_inequality_report(mesh, np.ones(mesh.ncells), sigma)

    def test_negative_field_rejected(self):
        mesh = build_polar_mesh(1.0, 4, 8)
        f = np.ones(mesh.ncells)
        f[0] = -1.0
        with pytest.raises(ValueError):
            trace_inequality_report(mesh, f, 2.5)
