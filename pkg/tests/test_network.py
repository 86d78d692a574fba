"""Expression parsing, posynomial evaluation, and network invariants."""

import math

import numpy as np
import pytest

from bulksurf.network import (
    NetworkParseError,
    NonLipschitzWarning,
    Posynomial,
    SpeciesSet,
    build_network,
    eval_rates,
    parse_expression,
    parse_network,
)

UV = ("u1", "v1")


def _species(m1=1, m2=1):
    return SpeciesSet(
        bulk_names=tuple(f"u{i+1}" for i in range(m1)),
        surface_names=tuple(f"v{j+1}" for j in range(m2)),
        d=(1.0,) * m1,
        delta=(1.0,) * m2,
    )


class TestParse:
    def test_zero_gives_empty_terms(self):
        p = parse_expression("0", UV)
        assert p.nterms == 0

    def test_signed_power_terms(self):
        p = parse_expression("v1 - u1^1.5", UV)
        assert p.nterms == 2
        assert p.coeffs.tolist() == [1.0, -1.0]
        assert p.exponents.tolist() == [[0.0, 1.0], [1.0, 0.0]] or p.exponents.tolist() == [
            [0.0, 1.0],
            [1.5, 0.0],
        ]
        # explicit: first term exponent on v1, second 1.5 on u1
        assert p.exponents[1, 0] == 1.5

    def test_parameters_fold_into_coefficient(self):
        p = parse_expression("-k1*u1*v1 + k2*v1", UV, {"k1": 2.0, "k2": 3.0})
        assert p.coeffs.tolist() == [-2.0, 3.0]
        assert p.exponents[0].tolist() == [1.0, 1.0]

    def test_undeclared_name_reports_location(self):
        with pytest.raises(NetworkParseError) as err:
            parse_expression("u1*w1", UV)
        assert "w1" in str(err.value)
        assert err.value.position == 3

    def test_negative_exponent_rejected(self):
        with pytest.raises(NetworkParseError, match="negative exponent"):
            parse_expression("u1^-2", UV)

    def test_malformed_syntax(self):
        for text in ("u1 +", "* u1", "u1 ^ v1", "u1 u1", ""):
            with pytest.raises(NetworkParseError):
                parse_expression(text, UV)

    def test_duplicate_monomials_merge(self):
        p = parse_expression("u1 + u1", UV)
        assert p.nterms == 1
        assert p.coeffs[0] == 2.0

    def test_exact_cancellation_drops_term(self):
        p = parse_expression("u1*v1 - u1*v1 + v1", UV)
        assert p.nterms == 1
        assert p.exponents[0].tolist() == [0.0, 1.0]

    def test_fractional_exponent_warns(self):
        with pytest.warns(NonLipschitzWarning):
            parse_expression("u1^0.5", UV)

    def test_number_power_does_not_warn(self):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("error")
            p = parse_expression("2^0.5*u1", UV)
        assert p.coeffs[0] == pytest.approx(math.sqrt(2.0))

    def test_species_parameter_clash_rejected(self):
        with pytest.raises(NetworkParseError, match="both"):
            parse_expression("u1", UV, {"u1": 1.0})

    def test_scientific_notation(self):
        p = parse_expression("1e-3*u1 + 2.5E2", UV)
        assert p.coeffs.tolist() == [1e-3, 250.0]


class TestRoundTrip:
    def test_presets_round_trip_term_identical(self):
        texts = [
            "kappa*v1 - kappa*u1^1.5",
            "-k1*u1*v1 + k2*v1",
            "0",
            "3.5*u1^2*v1 - 0.25*v1 + 1",
        ]
        params = {"kappa": 1.0, "k1": 1.0, "k2": 1.0}
        for text in texts:
            p = parse_expression(text, UV, params)
            again = parse_expression(p.to_text(UV), UV)
            assert p == again

    def test_random_round_trip(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            nterms = rng.integers(1, 5)
            coeffs = rng.standard_normal(nterms)
            coeffs[coeffs == 0] = 1.0
            expos = rng.choice([0.0, 1.0, 1.5, 2.0, 3.0], size=(nterms, 2))
            p = Posynomial(coeffs, expos)
            assert p == parse_expression(p.to_text(UV), UV)


class TestEvaluate:
    def test_ligand_receptor_equilibrium(self):
        species = _species(1, 2)
        net = build_network(
            species,
            ["0"],
            ["-k1*u1*v1 + k2*v2"],
            ["-k1*u1*v1 + k2*v2", "k1*u1*v1 - k2*v2"],
            {"k1": 1.0, "k2": 1.0},
        )
        f, g, h = eval_rates(net, [1.0], [1.0, 1.0])
        assert f.tolist() == [0.0]
        assert g.tolist() == [0.0]
        assert h.tolist() == [0.0, 0.0]

    def test_exchange_hand_value(self):
        # kappa*(v1 - u1^1.5) at kappa=2, u=4, v=1: 2*(1 - 8) = -14
        net = build_network(
            _species(), ["0"], ["kappa*v1 - kappa*u1^1.5"], ["0"], {"kappa": 2.0}
        )
        _, g, _ = eval_rates(net, [4.0], [1.0])
        assert g[0] == -14.0

    def test_constant_terms_at_origin(self):
        net = build_network(_species(), ["3"], ["u1*v1 + 2"], ["v1^2"], {})
        f, g, h = eval_rates(net, [0.0], [0.0])
        assert (f[0], g[0], h[0]) == (3.0, 2.0, 0.0)

    def test_negative_input_rejected(self):
        net = build_network(_species(), ["u1"], ["0"], ["0"], {})
        with pytest.raises(ValueError, match="nonnegative"):
            eval_rates(net, [-0.1], [0.0])

    def test_shape_mismatch_rejected(self):
        net = build_network(_species(), ["u1"], ["0"], ["0"], {})
        with pytest.raises(ValueError):
            eval_rates(net, [1.0, 2.0], [0.0])

    def test_no_nan_on_nonnegative_orthant(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            nterms = rng.integers(1, 4)
            coeffs = rng.standard_normal(nterms)
            expos = rng.uniform(0.0, 3.0, size=(nterms, 2))
            p = Posynomial(coeffs, expos)
            pts = rng.uniform(0.0, 10.0, size=(2, 64))
            pts[:, :8] = 0.0  # include exact zeros: 0**0 must be 1
            vals = p.evaluate(pts)
            assert np.all(np.isfinite(vals))

    def test_zero_power_zero_is_one(self):
        p = Posynomial([2.0], [[0.0, 0.0]])
        assert p.evaluate(np.array([0.0, 0.0])) == 2.0

    def test_term_homogeneity_against_pow_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            e = rng.choice([0.0, 0.5, 1.0, 1.5, 2.0], size=2)
            c = float(rng.standard_normal()) or 1.0
            p = Posynomial([c], [e])
            x = rng.uniform(0.1, 5.0, size=2)
            s = float(rng.uniform(0.5, 3.0))
            scaled = x.copy()
            scaled[0] *= s
            oracle = c * math.pow(x[0] * s, e[0]) * math.pow(x[1], e[1])
            assert p.evaluate(scaled) == pytest.approx(oracle, rel=1e-12)
            assert p.evaluate(scaled) == pytest.approx(
                p.evaluate(x) * math.pow(s, e[0]), rel=1e-12
            )


class TestNetworkInvariants:
    def test_bulk_rate_cannot_use_surface_species(self):
        with pytest.raises(ValueError, match="surface"):
            build_network(_species(), ["v1"], ["0"], ["0"], {})

    def test_species_set_validation(self):
        with pytest.raises(ValueError):
            SpeciesSet((), (), (), ())  # no bulk species
        with pytest.raises(ValueError):
            SpeciesSet(("a",), ("a",), (1.0,), (1.0,))  # duplicate names
        with pytest.raises(ValueError):
            SpeciesSet(("a",), (), (0.0,), ())  # nonpositive diffusivity

    def test_parse_network_fragment(self):
        net = parse_network(
            {
                "species": {
                    "bulk": [{"name": "u1", "diffusivity": 2.0}],
                    "surface": [{"name": "v1", "diffusivity": 0.5}],
                },
                "parameters": {"kappa": 1.0},
                "reactions": {
                    "G": {"u1": "kappa*v1 - kappa*u1"},
                    "H": {"v1": "kappa*u1 - kappa*v1"},
                },
            }
        )
        assert net.species.d == (2.0,)
        assert net.F[0].nterms == 0  # defaulted to "0"
        _, g, h = eval_rates(net, [1.0], [3.0])
        assert g[0] == 2.0 and h[0] == -2.0

    def test_evaluation_is_deterministic(self):
        net = build_network(
            _species(), ["u1^2 - u1"], ["v1 - u1^1.5"], ["u1^1.5 - v1"], {}
        )
        pts = np.random.default_rng(1).uniform(0, 5, size=(2, 100))
        a = net.eval_boundary(pts[:1], pts[1:])
        b = net.eval_boundary(pts[:1], pts[1:])
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
