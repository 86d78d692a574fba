"""Scenario configuration: schema, validation, presets.

A scenario is a JSON document (or the equivalent dict) declaring species,
rate expressions with a parameter table, optional certificates, geometry,
initial data, solver settings, and output settings. ``load_scenario`` accepts
either a preset name or a path; a written ``manifest.json`` reloads as the
identical scenario, so reruns reproduce bit-identical diagnostics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .conditions import IntermediateSumCert, MassControlCert
from .mesh import PolarMesh, build_polar_mesh
from .network import ReactionNetwork, SpeciesSet, build_network
from .solver import SolverConfig

__all__ = [
    "ConfigError",
    "GeometryConfig",
    "OutputConfig",
    "ScenarioConfig",
    "PRESETS",
    "preset_names",
    "load_scenario",
    "build_mesh",
    "build_initial_fields",
]

SCHEMA_VERSION = 1

INITIAL_PRESETS = ("constant", "radial_bump", "cosine_mode")


class ConfigError(ValueError):
    """Configuration problem, reported with the offending field path."""


def _require(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: missing required field")
    return mapping[key]


@dataclass(frozen=True)
class GeometryConfig:
    radius: float
    nr: int
    ntheta: int


@dataclass(frozen=True)
class OutputConfig:
    record_interval: float
    snapshot_times: tuple[float, ...] = ()
    lp_exponent: float = 4.0
    directory: str | None = None

    def __post_init__(self):
        if self.record_interval <= 0:
            raise ConfigError("outputs.record_interval: must be > 0")
        if self.lp_exponent < 1:
            raise ConfigError("outputs.lp_exponent: must be >= 1")


@dataclass
class ScenarioConfig:
    """Fully validated scenario; the network is parsed once at load time."""

    name: str
    description: str
    species: SpeciesSet
    parameters: dict
    reaction_texts: dict
    network: ReactionNetwork
    mass_cert: MassControlCert | None
    intermediate_cert: IntermediateSumCert | None
    geometry: GeometryConfig
    initial_data: dict
    solver: SolverConfig
    outputs: OutputConfig
    expected_check_failures: tuple[str, ...] = ()

    def with_solver(self, **kwargs) -> "ScenarioConfig":
        return replace(self, solver=self.solver.with_updates(**kwargs))

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "description": self.description,
            "species": {
                "bulk": [
                    {"name": n, "diffusivity": dv}
                    for n, dv in zip(self.species.bulk_names, self.species.d)
                ],
                "surface": [
                    {"name": n, "diffusivity": dv}
                    for n, dv in zip(self.species.surface_names, self.species.delta)
                ],
            },
            "parameters": dict(self.parameters),
            "reactions": {
                "F": dict(self.reaction_texts.get("F", {})),
                "G": dict(self.reaction_texts.get("G", {})),
                "H": dict(self.reaction_texts.get("H", {})),
            },
            "certificates": {},
            "geometry": {
                "radius": self.geometry.radius,
                "nr": self.geometry.nr,
                "ntheta": self.geometry.ntheta,
            },
            "initial_data": {k: dict(v) for k, v in self.initial_data.items()},
            "solver": {
                "dt": self.solver.dt,
                "t_end": self.solver.t_end,
                "linear_tol": self.solver.linear_tol,
                "max_linear_iters": self.solver.max_linear_iters,
                "positivity_policy": self.solver.positivity_policy,
                "blowup_threshold": self.solver.blowup_threshold,
                "reaction_coupling": self.solver.reaction_coupling,
            },
            "outputs": {
                "record_interval": self.outputs.record_interval,
                "snapshot_times": list(self.outputs.snapshot_times),
                "lp_exponent": self.outputs.lp_exponent,
            },
            "expected_check_failures": list(self.expected_check_failures),
        }
        if self.outputs.directory:
            d["outputs"]["directory"] = self.outputs.directory
        if self.mass_cert:
            d["certificates"]["mass_control"] = {
                "alpha": list(self.mass_cert.alpha),
                "beta": list(self.mass_cert.beta),
                "L": self.mass_cert.L,
                "K": self.mass_cert.K,
            }
        if self.intermediate_cert:
            d["certificates"]["intermediate_sum"] = {
                "A": [list(row) for row in self.intermediate_cert.A],
                "K1": self.intermediate_cert.K1,
                "r_omega": self.intermediate_cert.r_omega,
                "r_m": self.intermediate_cert.r_m,
                "mu_m": self.intermediate_cert.mu_m,
            }
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise ConfigError("scenario: expected a JSON object")
        name = raw.get("name", "unnamed")
        description = raw.get("description", "")

        sp = _require(raw, "species", "scenario")
        bulk = sp.get("bulk", [])
        surf = sp.get("surface", [])
        if not bulk:
            raise ConfigError("species.bulk: at least one bulk species is required")
        try:
            species = SpeciesSet(
                bulk_names=tuple(str(_require(e, "name", f"species.bulk[{i}]")) for i, e in enumerate(bulk)),
                surface_names=tuple(str(_require(e, "name", f"species.surface[{j}]")) for j, e in enumerate(surf)),
                d=tuple(float(e.get("diffusivity", 1.0)) for e in bulk),
                delta=tuple(float(e.get("diffusivity", 1.0)) for e in surf),
            )
        except ValueError as exc:
            raise ConfigError(f"species: {exc}") from exc

        parameters = {str(k): float(v) for k, v in raw.get("parameters", {}).items()}

        reactions = raw.get("reactions", {})
        f_map = dict(reactions.get("F", {}))
        g_map = dict(reactions.get("G", {}))
        h_map = dict(reactions.get("H", {}))
        for label, mapping, allowed in (
            ("F", f_map, species.bulk_names),
            ("G", g_map, species.bulk_names),
            ("H", h_map, species.surface_names),
        ):
            for key in mapping:
                if key not in allowed:
                    raise ConfigError(
                        f"reactions.{label}.{key}: not a declared "
                        f"{'bulk' if label != 'H' else 'surface'} species"
                    )
        reaction_texts = {"F": f_map, "G": g_map, "H": h_map}
        try:
            network = build_network(
                species,
                [f_map.get(n, "0") for n in species.bulk_names],
                [g_map.get(n, "0") for n in species.bulk_names],
                [h_map.get(n, "0") for n in species.surface_names],
                parameters,
            )
        except ValueError as exc:
            raise ConfigError(f"reactions: {exc}") from exc

        certs = raw.get("certificates", {})
        mass_cert = None
        if "mass_control" in certs:
            c = certs["mass_control"]
            try:
                mass_cert = MassControlCert(
                    alpha=tuple(float(x) for x in _require(c, "alpha", "certificates.mass_control")),
                    beta=tuple(float(x) for x in c.get("beta", [])),
                    L=float(_require(c, "L", "certificates.mass_control")),
                    K=float(c.get("K", 0.0)),
                )
            except ValueError as exc:
                raise ConfigError(f"certificates.mass_control: {exc}") from exc
            if len(mass_cert.alpha) != species.m1 or len(mass_cert.beta) != species.m2:
                raise ConfigError(
                    "certificates.mass_control: weight counts must match species counts"
                )
        inter_cert = None
        if "intermediate_sum" in certs:
            c = certs["intermediate_sum"]
            try:
                inter_cert = IntermediateSumCert(
                    A=tuple(tuple(float(x) for x in row) for row in _require(c, "A", "certificates.intermediate_sum")),
                    K1=float(c.get("K1", 0.0)),
                    r_omega=float(c.get("r_omega", 1.0)),
                    r_m=float(c.get("r_m", 1.0)),
                    mu_m=float(c.get("mu_m", 1.0)),
                )
            except ValueError as exc:
                raise ConfigError(f"certificates.intermediate_sum: {exc}") from exc
            if inter_cert.matrix().shape[0] != species.m1 + species.m2:
                raise ConfigError(
                    "certificates.intermediate_sum: A must be "
                    f"({species.m1 + species.m2})x({species.m1 + species.m2})"
                )

        geo = _require(raw, "geometry", "scenario")
        try:
            geometry = GeometryConfig(
                radius=float(_require(geo, "radius", "geometry")),
                nr=int(_require(geo, "nr", "geometry")),
                ntheta=int(_require(geo, "ntheta", "geometry")),
            )
            build_polar_mesh(geometry.radius, geometry.nr, geometry.ntheta)
        except ValueError as exc:
            raise ConfigError(f"geometry: {exc}") from exc

        init = _require(raw, "initial_data", "scenario")
        for sname in species.names:
            if sname not in init:
                raise ConfigError(f"initial_data.{sname}: missing entry")
        for sname, entry in init.items():
            if sname not in species.names:
                raise ConfigError(f"initial_data.{sname}: not a declared species")
            preset = entry.get("preset")
            if preset not in INITIAL_PRESETS:
                raise ConfigError(
                    f"initial_data.{sname}.preset: must be one of {INITIAL_PRESETS}"
                )
            if preset == "radial_bump" and sname in species.surface_names:
                raise ConfigError(
                    f"initial_data.{sname}.preset: radial_bump applies to bulk species only"
                )
        initial_data = {k: dict(v) for k, v in init.items()}

        sv = _require(raw, "solver", "scenario")
        try:
            solver = SolverConfig(
                dt=float(_require(sv, "dt", "solver")),
                t_end=float(_require(sv, "t_end", "solver")),
                linear_tol=float(sv.get("linear_tol", 1e-10)),
                max_linear_iters=int(sv.get("max_linear_iters", 400)),
                positivity_policy=str(sv.get("positivity_policy", "reject")),
                blowup_threshold=float(sv.get("blowup_threshold", 1e6)),
                reaction_coupling=str(sv.get("reaction_coupling", "explicit")),
            )
        except ValueError as exc:
            raise ConfigError(f"solver: {exc}") from exc

        out = raw.get("outputs", {})
        outputs = OutputConfig(
            record_interval=float(out.get("record_interval", 0.01)),
            snapshot_times=tuple(float(t) for t in out.get("snapshot_times", [])),
            lp_exponent=float(out.get("lp_exponent", 4.0)),
            directory=out.get("directory"),
        )

        config = cls(
            name=str(name),
            description=str(description),
            species=species,
            parameters=parameters,
            reaction_texts=reaction_texts,
            network=network,
            mass_cert=mass_cert,
            intermediate_cert=inter_cert,
            geometry=geometry,
            initial_data=initial_data,
            solver=solver,
            outputs=outputs,
            expected_check_failures=tuple(raw.get("expected_check_failures", [])),
        )
        # building the fields validates nonnegativity of the initial data
        mesh = build_mesh(config)
        build_initial_fields(config, mesh)
        return config


def build_mesh(config: ScenarioConfig) -> PolarMesh:
    g = config.geometry
    return build_polar_mesh(g.radius, g.nr, g.ntheta)


def _initial_field(entry: dict, name: str, r: np.ndarray, theta: np.ndarray) -> np.ndarray:
    preset = entry["preset"]
    if preset == "constant":
        value = float(entry.get("value", 0.0))
        out = np.full(r.shape, value)
    elif preset == "radial_bump":
        amplitude = float(entry.get("amplitude", 1.0))
        sigma = float(entry.get("sigma", 0.25))
        if sigma <= 0:
            raise ConfigError(f"initial_data.{name}.sigma: must be > 0")
        out = amplitude * np.exp(-(r**2) / (2.0 * sigma**2))
    else:  # cosine_mode
        offset = float(entry.get("offset", 1.0))
        amplitude = float(entry.get("amplitude", 1.0))
        mode = int(entry.get("mode", 1))
        out = offset + amplitude * np.cos(mode * theta)
    if np.any(out < 0):
        raise ConfigError(f"initial_data.{name}: initial data must be nonnegative")
    return out


def build_initial_fields(config: ScenarioConfig, mesh: PolarMesh):
    """Evaluate the per-species initial-data presets on the mesh."""
    s = config.species
    u0 = np.array(
        [
            _initial_field(config.initial_data[n], n, mesh.cell_r, mesh.cell_theta)
            for n in s.bulk_names
        ]
    )
    if s.m2:
        zeros = np.zeros_like(mesh.boundary_theta)
        v0 = np.array(
            [
                _initial_field(config.initial_data[n], n, zeros, mesh.boundary_theta)
                for n in s.surface_names
            ]
        )
    else:
        v0 = np.zeros((0, mesh.ntheta))
    return u0, v0


# ----------------------------------------------------------------------
# presets


def _conserved_exchange() -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": "conserved_exchange",
        "description": (
            "Single bulk/surface pair exchanging mass through the boundary "
            "with a sub-quadratic surface rate; the flux and surface rates "
            "cancel exactly, so total mass is conserved."
        ),
        "species": {
            "bulk": [{"name": "u1", "diffusivity": 1.0}],
            "surface": [{"name": "v1", "diffusivity": 1.0}],
        },
        "parameters": {"kappa": 1.0},
        "reactions": {
            "F": {"u1": "0"},
            "G": {"u1": "kappa*v1 - kappa*u1^1.5"},
            "H": {"v1": "kappa*u1^1.5 - kappa*v1"},
        },
        "certificates": {
            "mass_control": {"alpha": [1.0], "beta": [1.0], "L": 0.0, "K": 0.0},
            "intermediate_sum": {
                "A": [[1.0, 0.0], [0.0, 1.0]],
                "K1": 1.0,
                "r_omega": 1.0,
                "r_m": 1.0,
                "mu_m": 1.5,
            },
        },
        "geometry": {"radius": 1.0, "nr": 32, "ntheta": 64},
        "initial_data": {
            "u1": {"preset": "radial_bump", "amplitude": 1.0, "sigma": 0.4},
            "v1": {"preset": "constant", "value": 0.5},
        },
        "solver": {
            "dt": 1e-3,
            "t_end": 5.0,
            "linear_tol": 1e-12,
            "max_linear_iters": 400,
            "positivity_policy": "reject",
            "blowup_threshold": 1e6,
            "reaction_coupling": "explicit",
        },
        "outputs": {"record_interval": 0.01, "snapshot_times": [5.0], "lp_exponent": 4.0},
        "expected_check_failures": [],
    }


def _dissipative_exchange() -> dict:
    cfg = _conserved_exchange()
    cfg.update(
        name="dissipative_exchange",
        description=(
            "Conserved exchange plus a linear surface sink; the combined "
            "boundary rate is nonpositive, so total mass dissipates and the "
            "fields stay bounded uniformly in time."
        ),
    )
    cfg["parameters"] = {"kappa": 1.0, "lam": 0.5}
    cfg["reactions"]["H"] = {"v1": "kappa*u1^1.5 - kappa*v1 - lam*v1"}
    cfg["geometry"] = {"radius": 1.0, "nr": 16, "ntheta": 32}
    cfg["solver"]["t_end"] = 10.0
    cfg["outputs"]["snapshot_times"] = [10.0]
    return cfg


def _ligand_receptor() -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": "ligand_receptor",
        "description": (
            "Bulk ligand binding a surface receptor into a surface complex "
            "(reversible); quadratic monomials cancel in every certificate "
            "combination."
        ),
        "species": {
            "bulk": [{"name": "u1", "diffusivity": 1.0}],
            "surface": [
                {"name": "v1", "diffusivity": 1.0},
                {"name": "v2", "diffusivity": 1.0},
            ],
        },
        "parameters": {"k1": 1.0, "k2": 1.0},
        "reactions": {
            "F": {"u1": "0"},
            "G": {"u1": "-k1*u1*v1 + k2*v2"},
            "H": {"v1": "-k1*u1*v1 + k2*v2", "v2": "k1*u1*v1 - k2*v2"},
        },
        "certificates": {
            "mass_control": {"alpha": [1.0], "beta": [1.0, 1.0], "L": 1.0, "K": 0.0},
            "intermediate_sum": {
                "A": [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 1.0, 1.0]],
                "K1": 2.0,
                "r_omega": 1.0,
                "r_m": 1.0,
                "mu_m": 1.0,
            },
        },
        "geometry": {"radius": 1.0, "nr": 16, "ntheta": 32},
        "initial_data": {
            "u1": {"preset": "constant", "value": 1.0},
            "v1": {"preset": "constant", "value": 0.8},
            "v2": {"preset": "constant", "value": 0.2},
        },
        "solver": {
            "dt": 1e-3,
            "t_end": 2.0,
            "linear_tol": 1e-12,
            "max_linear_iters": 400,
            "positivity_policy": "reject",
            "blowup_threshold": 1e6,
            "reaction_coupling": "explicit",
        },
        "outputs": {"record_interval": 0.01, "snapshot_times": [2.0], "lp_exponent": 4.0},
        "expected_check_failures": [],
    }


def _bulk_blowup_stress() -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": "bulk_blowup_stress",
        "description": (
            "Spatially uniform quadratic bulk growth with no boundary "
            "coupling; violates mass control by design and blows up in "
            "finite time (the ODE u' = u^2 from u0 = 2 blows up at t = 0.5)."
        ),
        "species": {"bulk": [{"name": "u1", "diffusivity": 1.0}], "surface": []},
        "parameters": {},
        "reactions": {"F": {"u1": "u1^2"}, "G": {"u1": "0"}, "H": {}},
        "certificates": {
            "mass_control": {"alpha": [1.0], "beta": [], "L": 0.0, "K": 0.0},
            "intermediate_sum": {
                "A": [[1.0]],
                "K1": 1.0,
                "r_omega": 2.0,
                "r_m": 1.0,
                "mu_m": 1.0,
            },
        },
        "geometry": {"radius": 1.0, "nr": 4, "ntheta": 8},
        "initial_data": {"u1": {"preset": "constant", "value": 2.0}},
        "solver": {
            "dt": 1e-4,
            "t_end": 0.6,
            "linear_tol": 1e-10,
            "max_linear_iters": 400,
            "positivity_policy": "reject",
            "blowup_threshold": 1e6,
            "reaction_coupling": "explicit",
        },
        "outputs": {"record_interval": 0.01, "snapshot_times": [], "lp_exponent": 4.0},
        "expected_check_failures": ["mass_control", "growth_thresholds"],
    }


def _surface_decay() -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": "surface_decay",
        "description": (
            "Pure surface diffusion of v0 = 1 + cos(theta) on the unit "
            "circle; the cosine mode decays like exp(-t), giving an analytic "
            "oracle for time accuracy."
        ),
        "species": {
            "bulk": [{"name": "u1", "diffusivity": 1.0}],
            "surface": [{"name": "v1", "diffusivity": 1.0}],
        },
        "parameters": {},
        "reactions": {"F": {"u1": "0"}, "G": {"u1": "0"}, "H": {"v1": "0"}},
        "certificates": {
            "mass_control": {"alpha": [1.0], "beta": [1.0], "L": 0.0, "K": 0.0},
            "intermediate_sum": {
                "A": [[1.0, 0.0], [0.0, 1.0]],
                "K1": 1.0,
                "r_omega": 1.0,
                "r_m": 1.0,
                "mu_m": 1.0,
            },
        },
        "geometry": {"radius": 1.0, "nr": 4, "ntheta": 256},
        "initial_data": {
            "u1": {"preset": "constant", "value": 0.0},
            "v1": {"preset": "cosine_mode", "offset": 1.0, "amplitude": 1.0, "mode": 1},
        },
        "solver": {
            "dt": 1e-4,
            "t_end": 1.0,
            "linear_tol": 1e-12,
            "max_linear_iters": 400,
            "positivity_policy": "reject",
            "blowup_threshold": 1e6,
            "reaction_coupling": "explicit",
        },
        "outputs": {"record_interval": 0.01, "snapshot_times": [1.0], "lp_exponent": 4.0},
        "expected_check_failures": [],
    }


PRESETS = {
    "conserved_exchange": _conserved_exchange,
    "dissipative_exchange": _dissipative_exchange,
    "ligand_receptor": _ligand_receptor,
    "bulk_blowup_stress": _bulk_blowup_stress,
    "surface_decay": _surface_decay,
}


def preset_names() -> list[str]:
    return sorted(PRESETS)


def load_scenario(path_or_name: str | Path) -> ScenarioConfig:
    """Load a scenario from a preset name, a scenario file, or a manifest.

    A manifest (as written next to run outputs) is recognized by its nested
    ``config`` key and unwrapped, so a recorded run can be replayed directly.
    """
    key = str(path_or_name)
    if key in PRESETS:
        return ScenarioConfig.from_dict(PRESETS[key]())
    path = Path(path_or_name)
    if not path.exists():
        raise ConfigError(
            f"unknown preset and no such file: {key} "
            f"(presets: {', '.join(preset_names())})"
        )
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if isinstance(raw, dict) and "config" in raw and "schema_version" in raw:
        raw = raw["config"]
    return ScenarioConfig.from_dict(raw)
