"""Scenario loading, validation, presets, and their certificate checks."""

import json

import numpy as np
import pytest

from bulksurf.conditions import (
    MassControlCert,
    check_mass_control,
    check_quasi_positivity,
)
from bulksurf.outputs import run_certificate_checks
from bulksurf.scenarios import (
    ConfigError,
    ScenarioConfig,
    build_initial_fields,
    build_mesh,
    load_scenario,
    preset_names,
)


class TestLoad:
    def test_preset_names(self):
        assert preset_names() == [
            "bulk_blowup_stress",
            "conserved_exchange",
            "dissipative_exchange",
            "ligand_receptor",
            "surface_decay",
        ]

    def test_missing_file_error_names_path(self):
        with pytest.raises(ConfigError, match="no/such/scenario.json"):
            load_scenario("no/such/scenario.json")

    def test_scenario_file_round_trips(self, tmp_path):
        config = load_scenario("conserved_exchange")
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(config.to_dict()))
        again = load_scenario(path)
        assert again.to_dict() == config.to_dict()

    def test_manifest_unwrapping(self, tmp_path):
        config = load_scenario("surface_decay")
        manifest = {
            "schema_version": 1,
            "artifact_version": "0.1.0",
            "config": config.to_dict(),
        }
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(manifest))
        assert load_scenario(path).to_dict() == config.to_dict()

    def test_invalid_json_reported(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_scenario(path)


class TestValidation:
    def _raw(self):
        return load_scenario("conserved_exchange").to_dict()

    def test_bad_dt_reports_field_path(self):
        raw = self._raw()
        raw["solver"]["dt"] = 0.0
        with pytest.raises(ConfigError, match="solver"):
            ScenarioConfig.from_dict(raw)

    def test_unknown_species_in_reactions(self):
        raw = self._raw()
        raw["reactions"]["G"]["nope"] = "0"
        with pytest.raises(ConfigError, match="reactions.G.nope"):
            ScenarioConfig.from_dict(raw)

    def test_undeclared_name_in_expression(self):
        raw = self._raw()
        raw["reactions"]["G"]["u1"] = "kappa*w9"
        with pytest.raises(ConfigError, match="w9"):
            ScenarioConfig.from_dict(raw)

    def test_missing_initial_data_entry(self):
        raw = self._raw()
        del raw["initial_data"]["v1"]
        with pytest.raises(ConfigError, match="initial_data.v1"):
            ScenarioConfig.from_dict(raw)

    def test_negative_initial_data_rejected(self):
        raw = self._raw()
        raw["initial_data"]["v1"] = {"preset": "constant", "value": -1.0}
        with pytest.raises(ConfigError, match="nonnegative"):
            ScenarioConfig.from_dict(raw)

    def test_cosine_mode_dipping_negative_rejected(self):
        raw = self._raw()
        raw["initial_data"]["v1"] = {
            "preset": "cosine_mode",
            "offset": 0.5,
            "amplitude": 1.0,
        }
        with pytest.raises(ConfigError, match="nonnegative"):
            ScenarioConfig.from_dict(raw)

    def test_radial_bump_on_surface_rejected(self):
        raw = self._raw()
        raw["initial_data"]["v1"] = {"preset": "radial_bump", "amplitude": 1.0}
        with pytest.raises(ConfigError, match="bulk species only"):
            ScenarioConfig.from_dict(raw)

    def test_unknown_initial_preset_rejected(self):
        raw = self._raw()
        raw["initial_data"]["u1"] = {"preset": "vortex"}
        with pytest.raises(ConfigError, match="initial_data.u1.preset"):
            ScenarioConfig.from_dict(raw)

    def test_cert_dimension_mismatch(self):
        raw = self._raw()
        raw["certificates"]["mass_control"]["alpha"] = [1.0, 1.0]
        with pytest.raises(ConfigError, match="mass_control"):
            ScenarioConfig.from_dict(raw)

    def test_geometry_validated(self):
        raw = self._raw()
        raw["geometry"]["ntheta"] = 5
        with pytest.raises(ConfigError, match="geometry"):
            ScenarioConfig.from_dict(raw)


class TestInitialData:
    def test_surface_decay_initial_mode(self):
        config = load_scenario("surface_decay")
        mesh = build_mesh(config)
        u0, v0 = build_initial_fields(config, mesh)
        assert np.all(u0 == 0.0)
        assert v0[0] == pytest.approx(1.0 + np.cos(mesh.boundary_theta))

    def test_radial_bump_peaks_at_center(self):
        config = load_scenario("conserved_exchange")
        mesh = build_mesh(config)
        u0, _ = build_initial_fields(config, mesh)
        assert u0[0].max() == u0[0, 0]
        assert np.all(u0 >= 0.0)


class TestPresetCertificates:
    def test_conserved_exchange_certifies_with_L_zero(self):
        config = load_scenario("conserved_exchange")
        assert check_quasi_positivity(config.network).passed
        report = check_mass_control(config.network, config.mass_cert)
        assert config.mass_cert.L == 0.0
        assert report.passed and report.exact

    def test_blowup_stress_fails_mass_control(self):
        config = load_scenario("bulk_blowup_stress")
        for L in (0.0, 5.0):
            cert = MassControlCert(alpha=(1.0,), beta=(), L=L)
            assert not check_mass_control(config.network, cert).passed

    def test_every_preset_passes_declared_checks_except_registered(self):
        for name in preset_names():
            config = load_scenario(name)
            reports = run_certificate_checks(config)
            failed = {r["check"] for r in reports if not r["passed"]}
            assert failed <= set(config.expected_check_failures), (
                f"{name}: unexpected check failures {failed}"
            )
            if name == "bulk_blowup_stress":
                assert "mass_control" in failed
