"""Reaction nonlinearities as signed sums of power products.

Rates are represented as posynomial-style expressions: sums of terms
``coefficient * prod(species ** exponent)`` with real nonnegative exponents,
evaluated on the closed nonnegative orthant with the convention 0**0 == 1.
Bulk rates F_i depend on bulk species only; boundary-flux rates G_i and
surface rates H_j may depend on every species.

The expression grammar (shared with the scenario configuration format) is::

    expression := ["+"|"-"] term { ("+"|"-") term }
    term       := factor { "*" factor }
    factor     := NUMBER | NAME [ "^" ["-"] NUMBER ]

where NAME is a declared species or parameter and exponents are nonnegative
real literals. There are no parentheses: distribute by hand.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "NonLipschitzWarning",
    "NetworkParseError",
    "SpeciesSet",
    "Posynomial",
    "ReactionNetwork",
    "parse_expression",
    "build_network",
    "parse_network",
    "eval_rates",
]


class NonLipschitzWarning(UserWarning):
    """An exponent in (0, 1) makes the rate non-Lipschitz at zero.

    Local-existence theory does not strictly apply to such rates; the parse
    records the fact but does not regularize.
    """


class NetworkParseError(ValueError):
    """Syntax or name-resolution error, with the offending source position."""

    def __init__(self, message: str, text: str, position: int):
        self.position = position
        self.text = text
        super().__init__(f"{message} (at position {position} in {text!r})")


@dataclass(frozen=True)
class SpeciesSet:
    """Declared species and their positive diffusivities."""

    bulk_names: tuple[str, ...]
    surface_names: tuple[str, ...]
    d: tuple[float, ...]
    delta: tuple[float, ...]

    def __post_init__(self):
        if len(self.bulk_names) < 1:
            raise ValueError("at least one bulk species is required")
        if len(self.d) != len(self.bulk_names):
            raise ValueError("one bulk diffusivity per bulk species is required")
        if len(self.delta) != len(self.surface_names):
            raise ValueError("one surface diffusivity per surface species is required")
        if any(not np.isfinite(x) or x <= 0 for x in self.d + self.delta):
            raise ValueError("diffusivities must be positive and finite")
        names = self.bulk_names + self.surface_names
        if len(set(names)) != len(names):
            raise ValueError(f"species names must be unique, got {names}")

    @property
    def m1(self) -> int:
        return len(self.bulk_names)

    @property
    def m2(self) -> int:
        return len(self.surface_names)

    @property
    def names(self) -> tuple[str, ...]:
        return self.bulk_names + self.surface_names


class Posynomial:
    """A signed sum of power-product terms over a fixed variable set.

    Terms are deduplicated on construction (identical exponent vectors merge,
    exact zero coefficients drop) and keep first-appearance order, so sums
    evaluate in a deterministic term order.
    """

    __slots__ = ("coeffs", "exponents")

    def __init__(self, coeffs, exponents, nvars: int | None = None):
        coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
        exponents = np.asarray(exponents, dtype=float)
        if exponents.size == 0:
            if nvars is None:
                raise ValueError("nvars is required for an empty posynomial")
            exponents = exponents.reshape(0, nvars)
            coeffs = coeffs.reshape(0)
        if exponents.ndim != 2 or exponents.shape[0] != coeffs.shape[0]:
            raise ValueError("exponents must be (nterms, nvars) matching coeffs")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("coefficients must be finite")
        if not np.all(np.isfinite(exponents)) or np.any(exponents < 0):
            raise ValueError("exponents must be finite and nonnegative")

        merged: dict[tuple, float] = {}
        order: list[tuple] = []
        for c, e in zip(coeffs, exponents):
            key = tuple(e.tolist())
            if key not in merged:
                merged[key] = 0.0
                order.append(key)
            merged[key] += float(c)
        keep = [k for k in order if merged[k] != 0.0]
        self.coeffs = np.array([merged[k] for k in keep], dtype=float)
        self.exponents = (
            np.array(keep, dtype=float)
            if keep
            else np.zeros((0, exponents.shape[1]))
        )

    @classmethod
    def zero(cls, nvars: int) -> "Posynomial":
        return cls(np.zeros(0), np.zeros((0, nvars)), nvars=nvars)

    @property
    def nterms(self) -> int:
        return len(self.coeffs)

    @property
    def nvars(self) -> int:
        return self.exponents.shape[1]

    def evaluate(self, x):
        """Evaluate at a point (nvars,) or stacked points (nvars, npoints).

        Terms are summed in stored order for bit-stable results. Exponent 0
        contributes factor 1 regardless of the base, so 0**0 == 1.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = x[:, None] if single else x
        if pts.shape[0] != self.nvars:
            raise ValueError(
                f"point has {pts.shape[0]} variables, expected {self.nvars}"
            )
        total = np.zeros(pts.shape[1])
        for c, e in zip(self.coeffs, self.exponents):
            term = np.full(pts.shape[1], c)
            for s in np.nonzero(e)[0]:
                term = term * np.power(pts[s], e[s])
            total = total + term
        return float(total[0]) if single else total

    def term_degrees(self) -> np.ndarray:
        return self.exponents.sum(axis=1) if self.nterms else np.zeros(0)

    def max_positive_degree(self) -> float:
        """Largest total degree among positive-coefficient terms (0 if none)."""
        pos = self.coeffs > 0
        if not np.any(pos):
            return 0.0
        return float(self.term_degrees()[pos].max())

    def positive_coefficient_sum(self) -> float:
        return float(self.coeffs[self.coeffs > 0].sum()) if self.nterms else 0.0

    def restrict_to_zero(self, var: int) -> "Posynomial":
        """Drop every term with a positive exponent on ``var`` (set it to 0)."""
        if self.nterms == 0:
            return Posynomial.zero(self.nvars)
        keep = self.exponents[:, var] == 0.0
        return Posynomial(self.coeffs[keep], self.exponents[keep], self.nvars)

    def scaled(self, s: float) -> "Posynomial":
        return Posynomial(self.coeffs * s, self.exponents.copy(), self.nvars)

    @classmethod
    def linear_combination(
        cls, weights: Sequence[float], posys: Sequence["Posynomial"], nvars: int
    ) -> "Posynomial":
        """Sum of weight*posynomial with symbolic term combination."""
        coeffs: list[float] = []
        expos: list[np.ndarray] = []
        for w, p in zip(weights, posys):
            if w == 0.0 or p.nterms == 0:
                continue
            coeffs.extend((w * p.coeffs).tolist())
            expos.extend(p.exponents)
        if not coeffs:
            return cls.zero(nvars)
        return cls(np.asarray(coeffs), np.vstack(expos), nvars)

    def to_text(self, names: Sequence[str]) -> str:
        """Canonical printable form; parsing it back is term-identical."""
        if self.nterms == 0:
            return "0"
        pieces = []
        for idx, (c, e) in enumerate(zip(self.coeffs, self.exponents)):
            factors = [repr(abs(float(c)))]
            for s in np.nonzero(e)[0]:
                if e[s] == 1.0:
                    factors.append(names[s])
                else:
                    factors.append(f"{names[s]}^{float(e[s])!r}")
            mono = "*".join(factors)
            if idx == 0:
                pieces.append(mono if c > 0 else f"-{mono}")
            else:
                pieces.append(f"+ {mono}" if c > 0 else f"- {mono}")
        return " ".join(pieces)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Posynomial)
            and self.exponents.shape == other.exponents.shape
            and np.array_equal(self.coeffs, other.coeffs)
            and np.array_equal(self.exponents, other.exponents)
        )

    def __repr__(self) -> str:
        return f"Posynomial(nterms={self.nterms}, nvars={self.nvars})"


# ----------------------------------------------------------------------
# expression parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*^]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad_at = len(text) - len(stripped)
            raise NetworkParseError(
                f"unexpected character {text[bad_at]!r}", text, bad_at
            )
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def parse_expression(
    text: str,
    species_order: Sequence[str],
    parameters: Mapping[str, float] | None = None,
) -> Posynomial:
    """Parse one rate expression into a posynomial.

    Species resolve to variables in the order given; parameter names resolve
    to their numeric values and fold into the term coefficient. Errors carry
    the source position. Exponents in (0, 1) trigger a NonLipschitzWarning.
    """
    parameters = dict(parameters or {})
    var_index = {name: i for i, name in enumerate(species_order)}
    clash = set(var_index) & set(parameters)
    if clash:
        raise NetworkParseError(
            f"names {sorted(clash)} are declared both as species and parameters",
            text,
            0,
        )
    tokens = _tokenize(text)
    cursor = 0

    def peek():
        return tokens[cursor]

    def advance():
        nonlocal cursor
        tok = tokens[cursor]
        cursor += 1
        return tok

    def parse_exponent(name_pos: int) -> float:
        kind, val, pos = peek()
        sign = 1.0
        if kind == "op" and val == "-":
            advance()
            sign = -1.0
            kind, val, pos = peek()
        if kind != "number":
            raise NetworkParseError("expected a numeric exponent after '^'", text, pos)
        advance()
        exponent = sign * float(val)
        if exponent < 0:
            raise NetworkParseError(
                f"negative exponent {exponent} is not allowed", text, pos
            )
        return exponent

    def parse_factor(coeff: float, expo: np.ndarray) -> float:
        kind, val, pos = advance()
        if kind == "number":
            base = float(val)
            if peek()[0] == "op" and peek()[1] == "^":
                advance()
                base = base ** parse_exponent(pos)
            return coeff * base
        if kind == "name":
            exponent = 1.0
            if peek()[0] == "op" and peek()[1] == "^":
                advance()
                exponent = parse_exponent(pos)
            if val in var_index:
                if 0.0 < exponent < 1.0:
                    warnings.warn(
                        f"exponent {exponent} on {val!r} in {text!r} lies in "
                        "(0, 1); the rate is not locally Lipschitz at zero",
                        NonLipschitzWarning,
                        stacklevel=3,
                    )
                expo[var_index[val]] += exponent
                return coeff
            if val in parameters:
                return coeff * float(parameters[val]) ** exponent
            raise NetworkParseError(
                f"unknown name {val!r} (not a declared species or parameter)",
                text,
                pos,
            )
        raise NetworkParseError("expected a number or name", text, pos)

    def parse_term(sign: float):
        expo = np.zeros(len(species_order))
        coeff = parse_factor(sign, expo)
        while peek()[0] == "op" and peek()[1] == "*":
            advance()
            coeff = parse_factor(coeff, expo)
        return coeff, expo

    coeffs: list[float] = []
    expos: list[np.ndarray] = []
    sign = 1.0
    kind, val, pos = peek()
    if kind == "op" and val in "+-":
        advance()
        sign = 1.0 if val == "+" else -1.0
    elif kind == "end":
        raise NetworkParseError("empty expression", text, pos)
    c, e = parse_term(sign)
    coeffs.append(c)
    expos.append(e)
    while peek()[0] != "end":
        kind, val, pos = advance()
        if kind != "op" or val not in "+-":
            raise NetworkParseError(f"expected '+' or '-', got {val!r}", text, pos)
        c, e = parse_term(1.0 if val == "+" else -1.0)
        coeffs.append(c)
        expos.append(e)

    return Posynomial(np.asarray(coeffs), np.vstack(expos), len(species_order))


@dataclass(frozen=True)
class ReactionNetwork:
    """Parsed rate functions: F per bulk species, G per flux, H per surface.

    Immutable after construction; evaluation is pure and concurrently
    callable.
    """

    species: SpeciesSet
    F: tuple[Posynomial, ...]
    G: tuple[Posynomial, ...]
    H: tuple[Posynomial, ...]

    def __post_init__(self):
        s = self.species
        nvars = s.m1 + s.m2
        if len(self.F) != s.m1 or len(self.G) != s.m1 or len(self.H) != s.m2:
            raise ValueError("rate counts must match species counts")
        for p in self.F + self.G + self.H:
            if p.nvars != nvars:
                raise ValueError("every rate must range over all declared species")
        for i, p in enumerate(self.F):
            if p.nterms and np.any(p.exponents[:, s.m1 :] > 0):
                raise ValueError(
                    f"F[{i}] references surface species; bulk rates depend on "
                    "bulk species only"
                )

    @property
    def nvars(self) -> int:
        return self.species.m1 + self.species.m2

    def eval_bulk(self, u: np.ndarray) -> np.ndarray:
        """F at stacked bulk values u of shape (m1, npoints); no sign checks."""
        pts = np.vstack([u, np.zeros((self.species.m2, u.shape[1]))])
        with np.errstate(invalid="ignore", over="ignore"):
            return np.array([p.evaluate(pts) for p in self.F])

    def eval_boundary(self, u_trace: np.ndarray, v: np.ndarray):
        """G and H at stacked boundary values (m1, n) and (m2, n); no sign checks."""
        pts = np.vstack([u_trace, v])
        with np.errstate(invalid="ignore", over="ignore"):
            g = np.array([p.evaluate(pts) for p in self.G])
            h = (
                np.array([p.evaluate(pts) for p in self.H])
                if self.H
                else np.zeros((0, pts.shape[1]))
            )
        return g, h

    def to_texts(self) -> dict:
        names = self.species.names
        return {
            "F": {n: p.to_text(names) for n, p in zip(self.species.bulk_names, self.F)},
            "G": {n: p.to_text(names) for n, p in zip(self.species.bulk_names, self.G)},
            "H": {
                n: p.to_text(names) for n, p in zip(self.species.surface_names, self.H)
            },
        }


def build_network(
    species: SpeciesSet,
    f_texts: Sequence[str],
    g_texts: Sequence[str],
    h_texts: Sequence[str],
    parameters: Mapping[str, float] | None = None,
) -> ReactionNetwork:
    """Parse per-species rate expressions, ordered as the species are declared."""
    names = species.names
    F = tuple(parse_expression(t, names, parameters) for t in f_texts)
    G = tuple(parse_expression(t, names, parameters) for t in g_texts)
    H = tuple(parse_expression(t, names, parameters) for t in h_texts)
    return ReactionNetwork(species, F, G, H)


def parse_network(fragment) -> ReactionNetwork:
    """Build a network from a configuration fragment (dict or JSON string).

    Expected keys: ``species`` with ``bulk``/``surface`` entry lists (each
    ``{"name": ..., "diffusivity": ...}``), optional ``parameters``, and
    ``reactions`` with ``F``/``G``/``H`` maps from species name to expression
    text. Missing reaction entries default to "0".
    """
    if isinstance(fragment, str):
        fragment = json.loads(fragment)
    spec = fragment.get("species", {})
    bulk = spec.get("bulk", [])
    surf = spec.get("surface", [])
    species = SpeciesSet(
        bulk_names=tuple(e["name"] for e in bulk),
        surface_names=tuple(e["name"] for e in surf),
        d=tuple(float(e.get("diffusivity", 1.0)) for e in bulk),
        delta=tuple(float(e.get("diffusivity", 1.0)) for e in surf),
    )
    params = fragment.get("parameters", {})
    reactions = fragment.get("reactions", {})
    f_map = reactions.get("F", {})
    g_map = reactions.get("G", {})
    h_map = reactions.get("H", {})
    return build_network(
        species,
        [f_map.get(n, "0") for n in species.bulk_names],
        [g_map.get(n, "0") for n in species.bulk_names],
        [h_map.get(n, "0") for n in species.surface_names],
        params,
    )


def eval_rates(net: ReactionNetwork, u, v):
    """Evaluate (F, G, H) at one nonnegative state point.

    Rejects negative input: a negative concentration reaching a rate
    evaluation signals a positivity failure upstream.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (net.species.m1,) or v.shape != (net.species.m2,):
        raise ValueError(
            f"expected point shapes ({net.species.m1},), ({net.species.m2},), "
            f"got {u.shape}, {v.shape}"
        )
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise ValueError("rate evaluation requires finite input")
    if np.any(u < 0) or np.any(v < 0):
        raise ValueError("rate evaluation requires nonnegative input")
    x = np.concatenate([u, v])
    f_vals = np.array([p.evaluate(x) for p in net.F])
    g_vals = np.array([p.evaluate(x) for p in net.G])
    h_vals = np.array([p.evaluate(x) for p in net.H])
    return f_vals, g_vals, h_vals
