"""Structural certificate checks for reaction networks.

Each check validates a user-supplied certificate by sampling the nonnegative
orthant (falsification only: a pass does not prove the inequality) and, where
the combined terms admit it, by a cheap term-wise domination argument that
upgrades the verdict to ``exact``. Certificate synthesis is out of scope.

Margins are always reported as RHS - LHS, so negative means violated; a check
passes when the worst margin stays above -tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from .network import Posynomial, ReactionNetwork

__all__ = [
    "MassControlCert",
    "IntermediateSumCert",
    "SamplePlan",
    "CheckReport",
    "GrowthThresholdReport",
    "check_quasi_positivity",
    "check_mass_control",
    "check_intermediate_sum",
    "check_polynomial_bound",
    "check_growth_thresholds",
]


@dataclass(frozen=True)
class MassControlCert:
    """Weights and linear-growth constant for the mass inequalities.

    K is stored for completeness but no check consumes it; dissipation is the
    case L < 0, or L = 0 with K = 0.
    """

    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    L: float
    K: float = 0.0

    def __post_init__(self):
        if any(a <= 0 or not np.isfinite(a) for a in self.alpha):
            raise ValueError("alpha weights must be positive and finite")
        if any(b <= 0 or not np.isfinite(b) for b in self.beta):
            raise ValueError("beta weights must be positive and finite")
        if not np.isfinite(self.L):
            raise ValueError("L must be finite")
        if self.K < 0 or not np.isfinite(self.K):
            raise ValueError("K must be >= 0")


@dataclass(frozen=True)
class IntermediateSumCert:
    """Triangular combination matrix and growth exponents."""

    A: tuple[tuple[float, ...], ...]
    K1: float
    r_omega: float
    r_m: float
    mu_m: float

    def __post_init__(self):
        a = self.matrix()
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("A must be square")
        if np.any(np.triu(a, k=1) != 0.0):
            raise ValueError("A must be lower triangular")
        if np.any(np.tril(a, k=-1) < 0.0):
            raise ValueError("off-diagonal entries of A must be >= 0")
        if np.any(np.diag(a) <= 0.0):
            raise ValueError("diagonal entries of A must be > 0")
        if self.K1 < 0 or not np.isfinite(self.K1):
            raise ValueError("K1 must be >= 0")
        for name in ("r_omega", "r_m", "mu_m"):
            val = getattr(self, name)
            if val < 1.0 or not np.isfinite(val):
                raise ValueError(f"{name} must be >= 1, got {val}")

    def matrix(self) -> np.ndarray:
        return np.asarray(self.A, dtype=float)


@dataclass(frozen=True)
class SamplePlan:
    """Deterministic sampling plan on the box [0, u_max]^dim.

    Points are, in order: the origin, per-axis points at u_max scaled by
    {1e-3, 1e-2, 1e-1, 1}, then the first ``count`` unscrambled Halton points.
    The prefix structure makes worst margins monotone in ``count``.
    """

    u_max: float = 10.0
    count: int = 4096
    tolerance: float = 1e-9

    def __post_init__(self):
        if self.u_max <= 0 or self.count < 0 or self.tolerance < 0:
            raise ValueError("sample plan requires u_max > 0, count >= 0, tol >= 0")

    def points(self, dim: int) -> np.ndarray:
        if dim == 0:
            return np.zeros((1, 0))
        fixed = [np.zeros(dim)]
        for axis in range(dim):
            for frac in (1e-3, 1e-2, 1e-1, 1.0):
                p = np.zeros(dim)
                p[axis] = self.u_max * frac
                fixed.append(p)
        pts = [np.array(fixed)]
        if self.count > 0:
            halton = qmc.Halton(d=dim, scramble=False).random(self.count)
            pts.append(halton * self.u_max)
        return np.vstack(pts)


DEFAULT_PLAN = SamplePlan()


@dataclass
class CheckReport:
    """Outcome of one structural check.

    ``worst_margin`` is the most-violated slack (negative = violation);
    ``witness`` is the sample point achieving it. ``exact`` marks verdicts
    established by term-wise domination rather than sampling alone.
    """

    check: str
    passed: bool
    exact: bool
    worst_margin: float
    witness: dict | None
    samples_used: int
    note: str | None = None

    def to_json_dict(self) -> dict:
        out = {
            "check": self.check,
            "passed": self.passed,
            "exact": self.exact,
            "worst_margin": self.worst_margin,
            "witness": self.witness,
            "samples_used": self.samples_used,
        }
        if self.note is not None:
            out["note"] = self.note
        return out


def _witness(label: str, point: np.ndarray, m1: int, margin: float) -> dict:
    return {
        "inequality": label,
        "u": [float(x) for x in point[:m1]],
        "v": [float(x) for x in point[m1:]],
        "margin": float(margin),
    }


def _track_worst(best, margins: np.ndarray, points: np.ndarray, label: str, m1: int):
    idx = int(np.argmin(margins))
    if margins[idx] < best[0]:
        return (float(margins[idx]), _witness(label, points[idx], m1, margins[idx]))
    return best


# ----------------------------------------------------------------------
# quasi-positivity


def check_quasi_positivity(
    net: ReactionNetwork, plan: SamplePlan = DEFAULT_PLAN
) -> CheckReport:
    """Each rate must be nonnegative wherever its own species vanishes.

    Samples F_i and G_i with u_i pinned to zero and H_j with v_j pinned to
    zero; the margin is the rate value itself. Marked exact when, after
    symbolically dropping the vanishing terms, every remaining coefficient is
    nonnegative (a sound sign argument; sampling remains falsification-only).
    """
    s = net.species
    dim = s.m1 + s.m2
    pts = plan.points(dim)
    best = (np.inf, None)
    exact = True
    for i in range(s.m1):
        pinned = pts.copy()
        pinned[:, i] = 0.0
        for label, posy in ((f"F[{s.bulk_names[i]}]", net.F[i]),
                            (f"G[{s.bulk_names[i]}]", net.G[i])):
            vals = posy.evaluate(pinned.T)
            best = _track_worst(best, vals, pinned, label, s.m1)
            rest = posy.restrict_to_zero(i)
            if rest.nterms and np.any(rest.coeffs < 0):
                exact = False
    for j in range(s.m2):
        pinned = pts.copy()
        pinned[:, s.m1 + j] = 0.0
        vals = net.H[j].evaluate(pinned.T)
        best = _track_worst(best, vals, pinned, f"H[{s.surface_names[j]}]", s.m1)
        rest = net.H[j].restrict_to_zero(s.m1 + j)
        if rest.nterms and np.any(rest.coeffs < 0):
            exact = False
    worst = 0.0 if best[1] is None else best[0]
    passed = worst >= -plan.tolerance
    return CheckReport(
        check="quasi_positivity",
        passed=passed,
        exact=exact and passed,
        worst_margin=worst,
        witness=best[1],
        samples_used=len(pts),
    )


# ----------------------------------------------------------------------
# mass control


def _linear_domination(posy: Posynomial, L: float, slots: np.ndarray, tol: float) -> bool:
    """Term-wise domination of P by L * (sum of the slot variables + 1).

    Each positive term c * prod(x^e) with total degree <= 1 is split by
    weighted AM-GM onto the variable slots (weight e_s) and the constant slot
    (weight 1 - sum e); exact means every slot load stays within L.
    """
    loads = np.zeros(posy.nvars + 1)
    for c, e in zip(posy.coeffs, posy.exponents):
        if c <= 0:
            continue
        deg = float(e.sum())
        if deg > 1.0 + tol:
            return False
        if np.any((e > 0) & ~slots):
            return False
        loads[: posy.nvars] += c * e
        loads[-1] += c * (1.0 - deg)
    return bool(np.all(loads <= L + tol))


def check_mass_control(
    net: ReactionNetwork,
    cert: MassControlCert,
    plan: SamplePlan = DEFAULT_PLAN,
) -> CheckReport:
    """Weighted rate sums must grow at most linearly.

    Two inequalities are checked: the bulk sum
    ``sum_i alpha_i F_i(u) <= L (|u| + 1)`` and the combined boundary sum
    ``sum_i alpha_i G_i + sum_j beta_j H_j <= L (|u| + |v| + 1)``, which is
    the quantity that drives the total-mass envelope. Marked exact when every
    positive term of both combinations is dominated term-wise by the linear
    right-hand side.
    """
    s = net.species
    if len(cert.alpha) != s.m1 or len(cert.beta) != s.m2:
        raise ValueError(
            f"certificate has {len(cert.alpha)}+{len(cert.beta)} weights, "
            f"network has {s.m1}+{s.m2} species"
        )
    nvars = s.m1 + s.m2
    p_bulk = Posynomial.linear_combination(cert.alpha, net.F, nvars)
    p_surf = Posynomial.linear_combination(
        tuple(cert.alpha) + tuple(cert.beta), tuple(net.G) + tuple(net.H), nvars
    )
    pts = plan.points(nvars)
    x = pts.T
    abs_u = x[: s.m1].sum(axis=0)
    abs_v = x[s.m1 :].sum(axis=0) if s.m2 else np.zeros(x.shape[1])

    margins_bulk = cert.L * (abs_u + 1.0) - p_bulk.evaluate(x)
    margins_surf = cert.L * (abs_u + abs_v + 1.0) - p_surf.evaluate(x)
    best = (np.inf, None)
    best = _track_worst(best, margins_bulk, pts, "bulk: sum(alpha*F)", s.m1)
    best = _track_worst(best, margins_surf, pts, "surface: sum(alpha*G)+sum(beta*H)", s.m1)

    bulk_slots = np.arange(nvars) < s.m1
    all_slots = np.ones(nvars, dtype=bool)
    exact = _linear_domination(p_bulk, cert.L, bulk_slots, plan.tolerance) and (
        _linear_domination(p_surf, cert.L, all_slots, plan.tolerance)
    )
    return CheckReport(
        check="mass_control",
        passed=best[0] >= -plan.tolerance,
        exact=exact,
        worst_margin=float(best[0]),
        witness=best[1],
        samples_used=len(pts),
    )


# ----------------------------------------------------------------------
# intermediate sum condition


def _power_domination(posy: Posynomial, k1: float, rho: float, tol: float) -> bool:
    """Sound exactness test for P <= K1 * (power-sum of degree rho + 1).

    Every positive term must have total degree <= rho and the positive
    coefficients must sum to at most K1; each such term c * m then satisfies
    m <= max(1, max variable)^rho <= power-sum + 1.
    """
    if posy.nterms == 0:
        return k1 >= -tol
    pos = posy.coeffs > 0
    if not np.any(pos):
        return k1 >= -tol
    if np.any(posy.term_degrees()[pos] > rho + tol):
        return False
    return posy.positive_coefficient_sum() <= k1 + tol


def check_intermediate_sum(
    net: ReactionNetwork,
    cert: IntermediateSumCert,
    plan: SamplePlan = DEFAULT_PLAN,
) -> CheckReport:
    """Row-wise triangular combinations bounded by prescribed power growth.

    Rows of A @ [F; 0] are checked against K1 * (sum_i u_i^r_omega + 1);
    rows of A @ [G; H] against K1 * (|u|^r_m + |v|^r_m + 1) for the first m1
    rows and K1 * (|u|^mu_m + |v|^mu_m + 1) for the surface rows. A row is
    exact when its positive terms are degree-dominated and their coefficients
    sum within K1.
    """
    s = net.species
    n = s.m1 + s.m2
    a = cert.matrix()
    if a.shape != (n, n):
        raise ValueError(f"A has shape {a.shape}, expected ({n}, {n})")
    nvars = n
    padded_f = tuple(net.F) + tuple(Posynomial.zero(nvars) for _ in range(s.m2))
    gh = tuple(net.G) + tuple(net.H)

    pts = plan.points(nvars)
    x = pts.T
    abs_u = x[: s.m1].sum(axis=0)
    abs_v = x[s.m1 :].sum(axis=0) if s.m2 else np.zeros(x.shape[1])
    power_sum_u = sum(np.power(x[i], cert.r_omega) for i in range(s.m1))

    best = (np.inf, None)
    exact = True
    tol = plan.tolerance
    for row in range(n):
        p_f = Posynomial.linear_combination(a[row], padded_f, nvars)
        rhs = cert.K1 * (power_sum_u + 1.0)
        margins = rhs - p_f.evaluate(x)
        best = _track_worst(best, margins, pts, f"bulk row {row}", s.m1)
        exact = exact and _power_domination(p_f, cert.K1, cert.r_omega, tol)

        p_gh = Posynomial.linear_combination(a[row], gh, nvars)
        rho = cert.r_m if row < s.m1 else cert.mu_m
        label = "flux" if row < s.m1 else "surface"
        rhs = cert.K1 * (np.power(abs_u, rho) + np.power(abs_v, rho) + 1.0)
        margins = rhs - p_gh.evaluate(x)
        best = _track_worst(best, margins, pts, f"{label} row {row}", s.m1)
        exact = exact and _power_domination(p_gh, cert.K1, rho, tol)

    return CheckReport(
        check="intermediate_sum",
        passed=best[0] >= -tol,
        exact=exact,
        worst_margin=float(best[0]),
        witness=best[1],
        samples_used=len(pts),
    )


# ----------------------------------------------------------------------
# polynomial bound


def check_polynomial_bound(
    net: ReactionNetwork, plan: SamplePlan = DEFAULT_PLAN
) -> tuple[float, CheckReport]:
    """Constructive polynomial growth bound for all rates.

    Returns r = the maximum total degree over positive-coefficient terms of
    every F, G, H (only those bind from above) and a report carrying
    K2 = the sum of all positive coefficients. The pair satisfies
    rate <= K2 * (|u|^r + |v|^r + 1) by construction, so the report always
    passes; the sampled margin is included as a soundness cross-check.
    """
    s = net.species
    all_rates = tuple(net.F) + tuple(net.G) + tuple(net.H)
    r = max((p.max_positive_degree() for p in all_rates), default=0.0)
    k2 = sum(p.positive_coefficient_sum() for p in all_rates)
    note = None
    if all(p.nterms == 0 for p in all_rates):
        note = "network has no terms; r = 0 by convention"

    pts = plan.points(s.m1 + s.m2)
    x = pts.T
    abs_u = x[: s.m1].sum(axis=0)
    abs_v = x[s.m1 :].sum(axis=0) if s.m2 else np.zeros(x.shape[1])
    rhs = k2 * (np.power(abs_u, r) + np.power(abs_v, r) + 1.0)
    best = (np.inf, None)
    for label, posy in zip(
        [f"F[{n}]" for n in s.bulk_names]
        + [f"G[{n}]" for n in s.bulk_names]
        + [f"H[{n}]" for n in s.surface_names],
        all_rates,
    ):
        margins = rhs - posy.evaluate(x)
        best = _track_worst(best, margins, pts, label, s.m1)
    worst = 0.0 if best[1] is None else float(best[0])
    report = CheckReport(
        check="polynomial_bound",
        passed=True,
        exact=True,
        worst_margin=worst,
        witness={"r": float(r), "K2": float(k2), "worst_point": best[1]},
        samples_used=len(pts),
        note=note,
    )
    return float(r), report


# ----------------------------------------------------------------------
# growth thresholds


@dataclass
class GrowthThresholdReport:
    """Pass/fail of the certificate exponents against 1+2/n, 1+1/n, and 2."""

    n: int
    entries: list[dict] = field(default_factory=list)
    note: str | None = None

    @property
    def passed(self) -> bool:
        return all(e["passed"] for e in self.entries)

    def to_json_dict(self) -> dict:
        out = {
            "check": "growth_thresholds",
            "n": self.n,
            "passed": self.passed,
            "entries": self.entries,
        }
        if self.note is not None:
            out["note"] = self.note
        return out


def check_growth_thresholds(cert: IntermediateSumCert, n: int) -> GrowthThresholdReport:
    """Checks 1 <= r_omega < 1+2/n, 1 <= r_m < 1+1/n, 1 <= mu_m < 2.

    Lower bounds are inclusive, upper bounds strict. The dimension enters the
    first two thresholds only; the mu_m threshold 2 is dimension-free, but the
    sharpened boundedness result it feeds is stated for n >= 4, so a note is
    emitted for smaller n.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"dimension n must be an integer >= 2, got {n}")
    n = int(n)
    thresholds = {
        "r_omega": 1.0 + 2.0 / n,
        "r_m": 1.0 + 1.0 / n,
        "mu_m": 2.0,
    }
    entries = []
    for name, upper in thresholds.items():
        value = float(getattr(cert, name))
        entries.append(
            {
                "exponent": name,
                "value": value,
                "lower": 1.0,
                "upper": upper,
                "passed": bool(1.0 <= value < upper),
            }
        )
    note = None
    if n < 4:
        note = (
            f"n = {n} < 4: the dimension-free mu_m window is stated for n >= 4; "
            "for smaller n the dimensional bounds already cover it"
        )
    return GrowthThresholdReport(n=n, entries=entries, note=note)
