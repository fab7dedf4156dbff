"""Problem definitions for the quadratic-gradient laboratory.

A problem instance is the Dirichlet boundary value problem

    -Lap(u) + g(x, u) |grad u|^2 = lambda * f(u) + t * u^sigma_t,   u > 0 in Omega,
    u = 0 on the boundary,

posed on a ball, an annulus (radially symmetric reduction) or a planar
rectangle.  This module holds the serializable description of such an
instance: the domain, the reaction term f, the gradient coefficient g
with its lower-order structure, the critical-exponent thresholds, and a
validator that samples every declared structural condition on a fixed
deterministic grid.

Everything here is plain data plus pure functions; nothing mutates a
spec after construction, so instances can be shared freely across
threads and processes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator


class SpecError(ValueError):
    """Malformed or inconsistent problem description."""


class TableRangeError(ValueError):
    """A table-defined function was asked for a value outside its knots."""


class DomainError(ValueError):
    """Evaluation requested where the coefficient is singular or undefined."""


# s-grid used by every sampled condition check: log-spaced, fixed once.
COND_GRID_LO = 1e-8
COND_GRID_HI = 1e8
COND_GRID_PER_DECADE = 10


def condition_sample_grid() -> np.ndarray:
    """The deterministic s-grid every declared condition is sampled on."""
    decades = int(round(math.log10(COND_GRID_HI / COND_GRID_LO)))
    return np.logspace(math.log10(COND_GRID_LO), math.log10(COND_GRID_HI),
                       decades * COND_GRID_PER_DECADE + 1)


# ---------------------------------------------------------------------------
# table-defined scalar functions


class TableFunction:
    """Monotone-cubic interpolant through strictly increasing knots.

    Values between knots come from a PCHIP interpolant (shape preserving,
    C^1).  Queries outside the knot range raise TableRangeError rather
    than extrapolate; transformed problems therefore materialize tables
    wide enough to cover everything a solver can visit.
    """

    def __init__(self, knots, values):
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if knots.ndim != 1 or knots.shape != values.shape:
            raise SpecError("table knots/values must be 1-d arrays of equal length")
        if knots.size < 4:
            raise SpecError("table needs at least 4 knots")
        if not np.all(np.isfinite(knots)) or not np.all(np.isfinite(values)):
            raise SpecError("table knots/values must be finite")
        if not np.all(np.diff(knots) > 0):
            raise SpecError("table knots must be strictly increasing")
        self.knots = knots
        self.values = values
        self._interp = PchipInterpolator(knots, values, extrapolate=False)
        self._deriv = self._interp.derivative()

    @property
    def lo(self) -> float:
        return float(self.knots[0])

    @property
    def hi(self) -> float:
        return float(self.knots[-1])

    def _check_range(self, s: np.ndarray) -> None:
        bad = (s < self.knots[0]) | (s > self.knots[-1])
        if np.any(bad):
            sbad = np.asarray(s)[bad]
            raise TableRangeError(
                f"table query s={sbad.flat[0]:.6g} outside knot range "
                f"[{self.knots[0]:.6g}, {self.knots[-1]:.6g}]")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        self._check_range(s)
        out = self._interp(s)
        return out if out.ndim else float(out)

    def deriv(self, s):
        s = np.asarray(s, dtype=float)
        self._check_range(s)
        out = self._deriv(s)
        return out if out.ndim else float(out)

    def antiderivative_from(self, a: float, s):
        """Integral of the interpolant from a to s (both inside the range)."""
        s = np.asarray(s, dtype=float)
        self._check_range(s)
        self._check_range(np.asarray(a, dtype=float))
        anti = self._interp.antiderivative()
        out = anti(s) - anti(a)
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        return {"knots": self.knots.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "TableFunction":
        _reject_unknown(d, {"knots", "values"}, "table")
        if "knots" not in d or "values" not in d:
            raise SpecError("table requires 'knots' and 'values'")
        return cls(d["knots"], d["values"])

    def __eq__(self, other):
        return (isinstance(other, TableFunction)
                and np.array_equal(self.knots, other.knots)
                and np.array_equal(self.values, other.values))


def _reject_unknown(d: dict, allowed: set, what: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise SpecError(f"unknown field(s) in {what}: {sorted(unknown)}")


def _opt_table(d, key, what):
    v = d.get(key)
    if v is None:
        return None
    if not isinstance(v, dict):
        raise SpecError(f"{what}.{key} must be a table object or null")
    return TableFunction.from_dict(v)


# ---------------------------------------------------------------------------
# domain


RADIAL_KINDS = ("radial-ball", "radial-annulus")
DOMAIN_KINDS = RADIAL_KINDS + ("interval", "rectangle")


@dataclass(frozen=True)
class DomainSpec:
    """Geometry of Omega.

    Radial kinds keep the full space dimension (>= 3) and reduce to an
    ODE in r; the rectangle is genuinely two dimensional.  "interval"
    is the segment (0, R) with Dirichlet conditions at both ends; it
    exists for the eigenvalue and linear-solver calibration problems,
    where closed forms are available, and rides the radial machinery
    with N = 1 (every 1/r term carries an N-1 factor).
    """

    kind: str
    dimension: int
    outer_radius: float = 1.0
    inner_radius: float = 0.0
    side_lengths: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise SpecError(f"unknown domain kind {self.kind!r}")
        if self.kind in RADIAL_KINDS:
            if int(self.dimension) != self.dimension or self.dimension < 3:
                raise SpecError("radial domains require integer dimension >= 3")
            if not (self.outer_radius > 0 and math.isfinite(self.outer_radius)):
                raise SpecError("outer_radius must be positive and finite")
            if self.kind == "radial-annulus":
                if not (0 < self.inner_radius < self.outer_radius):
                    raise SpecError("annulus requires 0 < inner_radius < outer_radius")
            elif self.inner_radius != 0.0:
                raise SpecError("ball has inner_radius 0")
        elif self.kind == "interval":
            if self.dimension != 1:
                raise SpecError("interval domain is one dimensional")
            if not (self.outer_radius > 0 and math.isfinite(self.outer_radius)):
                raise SpecError("outer_radius must be positive and finite")
            if self.inner_radius != 0.0:
                raise SpecError("interval starts at 0")
        else:
            if self.dimension != 2:
                raise SpecError("rectangle domain is two dimensional")
            if (self.side_lengths is None or len(self.side_lengths) != 2
                    or not all(s > 0 and math.isfinite(s) for s in self.side_lengths)):
                raise SpecError("rectangle requires two positive side lengths")
        if self.kind != "rectangle" and self.side_lengths is not None:
            raise SpecError("side_lengths only applies to rectangles")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dimension": self.dimension,
            "outer_radius": self.outer_radius,
            "inner_radius": self.inner_radius,
            "side_lengths": list(self.side_lengths) if self.side_lengths else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        _reject_unknown(d, {"kind", "dimension", "outer_radius", "inner_radius",
                            "side_lengths"}, "domain")
        if "kind" not in d or "dimension" not in d:
            raise SpecError("domain requires 'kind' and 'dimension'")
        side = d.get("side_lengths")
        return cls(kind=d["kind"], dimension=int(d["dimension"]),
                   outer_radius=float(d.get("outer_radius", 1.0)),
                   inner_radius=float(d.get("inner_radius", 0.0)),
                   side_lengths=tuple(side) if side is not None else None)


# ---------------------------------------------------------------------------
# critical exponent and thresholds


def two_star(dimension: int) -> float:
    """Critical Sobolev exponent 2N/(N-2)."""
    if int(dimension) != dimension or dimension < 3:
        raise SpecError("critical exponent needs integer dimension >= 3")
    return 2.0 * dimension / (dimension - 2.0)


@dataclass(frozen=True)
class Thresholds:
    """The three exponent thresholds attached to (N, p).

    sigma1 separates the regimes of the decreasing-ratio test below;
    sigma2 and sigma3 are the whole-space and half-space supersolution
    thresholds.  For p > 1 they are strictly ordered
    sigma3 < sigma2 < sigma1 < 1 and collapse to 1 as p -> 1.
    """

    dimension: int
    p: float
    sigma1: float
    sigma2: float
    sigma3: float

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "p": self.p, "sigma1": self.sigma1,
                "sigma2": self.sigma2, "sigma3": self.sigma3}


def thresholds(dimension: int, p: float) -> Thresholds:
    ts = two_star(dimension)
    if not (1.0 < p < ts - 1.0):
        raise SpecError(f"thresholds need 1 < p < {ts - 1.0} for N={dimension}")
    n = dimension
    s1 = (ts - 1.0 - p) / (ts - 2.0)
    s2 = (n - (n - 2.0) * p) / 2.0
    s3 = (n + 1.0 - (n - 1.0) * p) / 2.0
    return Thresholds(dimension=n, p=p, sigma1=s1, sigma2=s2, sigma3=s3)


# ---------------------------------------------------------------------------
# reaction term f


F_VARIANTS = ("pure-power", "shifted-power", "table", "psi-power")
F_CONDITIONS = ("f_star", "f_zero", "f_infty")


@dataclass(frozen=True)
class NonlinearitySpec:
    """Reaction term f(s).

    variant "pure-power" is s^p, "shifted-power" is a*(s+shift)^p, and
    "table" interpolates user data.  "psi-power" is the push-forward of
    scale*s^base_p through the gamma=1 change of unknown with parameters
    (mu, delta, anchor); it stays closed-form so that semilinearized
    problems solve without an interpolation error floor.  p is the
    declared growth exponent in every case; it drives the thresholds and
    the scaled norms of sweeps.  `declared` lists the structural
    conditions the term claims to satisfy (subset of f_star / f_zero /
    f_infty); validate_spec samples each one.
    """

    variant: str
    p: float
    a: float = 1.0
    shift: float = 0.0
    limit_at_infinity: Optional[float] = None
    table: Optional[TableFunction] = None
    declared: tuple = ()
    mu: float = 0.0
    delta: float = 0.0
    anchor: float = 0.0
    base_p: Optional[float] = None
    scale: float = 1.0

    def __post_init__(self):
        if self.variant not in F_VARIANTS:
            raise SpecError(f"unknown f variant {self.variant!r}")
        if not (math.isfinite(self.p) and self.p > 1.0):
            raise SpecError("f requires growth exponent p > 1")
        if self.variant == "shifted-power":
            if self.a < 1.0:
                raise SpecError("shifted-power requires a >= 1")
            if self.shift < 0.0:
                raise SpecError("shifted-power requires shift >= 0")
        if self.variant == "table" and self.table is None:
            raise SpecError("table variant requires a table")
        if self.variant != "table" and self.table is not None:
            raise SpecError(f"{self.variant} does not take a table")
        if self.variant == "psi-power":
            if self.base_p is None or not (math.isfinite(self.base_p)
                                           and self.base_p > 1.0):
                raise SpecError("psi-power requires base_p > 1")
            if not (0.0 <= self.mu < 1.0):
                raise SpecError("psi-power requires 0 <= mu < 1")
            if self.delta < 0.0 or self.anchor < 0.0:
                raise SpecError("psi-power requires delta >= 0 and anchor >= 0")
            if self.mu > 0.0 and self.delta == 0.0 and self.anchor == 0.0:
                raise SpecError("psi-power with delta = 0 needs a positive anchor")
            if self.scale <= 0.0:
                raise SpecError("psi-power requires scale > 0")
            p_eff = (self.base_p - self.mu) / (1.0 - self.mu)
            if abs(self.p - p_eff) > 1e-9 * max(1.0, abs(p_eff)):
                raise SpecError("psi-power growth label p must equal "
                                "(base_p - mu)/(1 - mu)")
        elif self.base_p is not None:
            raise SpecError(f"{self.variant} does not take base_p")
        bad = set(self.declared) - set(F_CONDITIONS)
        if bad:
            raise SpecError(f"unknown declared f condition(s): {sorted(bad)}")

    def to_dict(self) -> dict:
        d = {"variant": self.variant, "p": self.p, "a": self.a,
             "shift": self.shift, "limit_at_infinity": self.limit_at_infinity,
             "table": self.table.to_dict() if self.table else None,
             "declared": list(self.declared)}
        if self.variant == "psi-power":
            d.update({"mu": self.mu, "delta": self.delta, "anchor": self.anchor,
                      "base_p": self.base_p, "scale": self.scale})
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NonlinearitySpec":
        _reject_unknown(d, {"variant", "p", "a", "shift", "limit_at_infinity",
                            "table", "declared", "mu", "delta", "anchor",
                            "base_p", "scale"}, "f")
        if "variant" not in d or "p" not in d:
            raise SpecError("f requires 'variant' and 'p'")
        lim = d.get("limit_at_infinity")
        bp = d.get("base_p")
        return cls(variant=d["variant"], p=float(d["p"]), a=float(d.get("a", 1.0)),
                   shift=float(d.get("shift", 0.0)),
                   limit_at_infinity=float(lim) if lim is not None else None,
                   table=_opt_table(d, "table", "f"),
                   declared=tuple(d.get("declared", ())),
                   mu=float(d.get("mu", 0.0)), delta=float(d.get("delta", 0.0)),
                   anchor=float(d.get("anchor", 0.0)),
                   base_p=float(bp) if bp is not None else None,
                   scale=float(d.get("scale", 1.0)))

    def _psi_power_s(self, t):
        """Preimage of the evaluation point under the change of unknown."""
        if self.mu == 0.0:
            return t
        a0 = (self.anchor + self.delta) ** self.mu
        q = 1.0 - self.mu
        w = self.delta ** q + q * t / a0
        return np.power(w, 1.0 / q) - self.delta


def eval_f(f: NonlinearitySpec, s):
    """f(s) for s >= 0 (vectorized)."""
    s = np.asarray(s, dtype=float)
    if f.variant == "pure-power":
        out = np.power(s, f.p)
    elif f.variant == "shifted-power":
        out = f.a * np.power(s + f.shift, f.p)
    elif f.variant == "psi-power":
        t = f._psi_power_s(s)
        a0 = (f.anchor + f.delta) ** f.mu
        if f.delta == 0.0:
            out = f.scale * a0 * np.power(t, f.base_p - f.mu)
        else:
            out = f.scale * a0 * np.power(t + f.delta, -f.mu) * np.power(t, f.base_p)
    else:
        out = f.table(s)
        out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


def eval_f_prime(f: NonlinearitySpec, s):
    """df/ds, used by the analytic Jacobians."""
    s = np.asarray(s, dtype=float)
    if f.variant == "pure-power":
        out = f.p * np.power(s, f.p - 1.0)
    elif f.variant == "shifted-power":
        out = f.a * f.p * np.power(s + f.shift, f.p - 1.0)
    elif f.variant == "psi-power":
        # d/dt [psi'(s) * scale * s^bp] = scale * (f'(s) - g(s) f(s)),
        # s the preimage of the evaluation point under psi
        t = f._psi_power_s(s)
        if f.delta == 0.0:
            out = f.scale * (f.base_p - f.mu) * np.power(t, f.base_p - 1.0)
        else:
            out = f.scale * (f.base_p * np.power(t, f.base_p - 1.0)
                             - f.mu * np.power(t, f.base_p) / (t + f.delta))
    else:
        out = np.asarray(f.table.deriv(s), dtype=float)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# coefficient field mu(x)


MU_VARIANTS = ("constant", "radial-table", "piecewise")


@dataclass(frozen=True)
class MuFieldSpec:
    """Spatial weight of the gradient coefficient, as a function of the
    distance rho from the domain center.

    "piecewise" is the two-region field used by the degeneration probes:
    value mu_in on {rho < omega_radius} and tau_out outside.  The inner
    region must be strictly interior to the domain.
    """

    variant: str = "constant"
    value: float = 1.0
    mu_in: float = 0.0
    tau_out: float = 0.0
    omega_radius: float = 0.0
    table: Optional[TableFunction] = None

    def __post_init__(self):
        if self.variant not in MU_VARIANTS:
            raise SpecError(f"unknown mu variant {self.variant!r}")
        if self.variant == "radial-table" and self.table is None:
            raise SpecError("radial-table mu requires a table")
        if self.variant == "piecewise" and not (self.omega_radius > 0):
            raise SpecError("piecewise mu requires omega_radius > 0")

    def to_dict(self) -> dict:
        return {"variant": self.variant, "value": self.value, "mu_in": self.mu_in,
                "tau_out": self.tau_out, "omega_radius": self.omega_radius,
                "table": self.table.to_dict() if self.table else None}

    @classmethod
    def from_dict(cls, d: dict) -> "MuFieldSpec":
        _reject_unknown(d, {"variant", "value", "mu_in", "tau_out", "omega_radius",
                            "table"}, "mu")
        return cls(variant=d.get("variant", "constant"),
                   value=float(d.get("value", 1.0)),
                   mu_in=float(d.get("mu_in", 0.0)),
                   tau_out=float(d.get("tau_out", 0.0)),
                   omega_radius=float(d.get("omega_radius", 0.0)),
                   table=_opt_table(d, "table", "mu"))


def eval_mu(mu: MuFieldSpec, rho):
    rho = np.asarray(rho, dtype=float)
    if mu.variant == "constant":
        out = np.full_like(rho, mu.value)
    elif mu.variant == "radial-table":
        out = np.asarray(mu.table(rho), dtype=float)
    else:
        out = np.where(rho < mu.omega_radius, mu.mu_in, mu.tau_out)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# gradient coefficient g


G_VARIANTS = ("zero", "model-singular", "constant-over-s", "table")
G_CONDITIONS = ("g_star", "g_infty", "g_zero", "g_zero_uniform", "g_majorant",
                "g_one", "g_monotone", "g_outer", "g_nonneg")


@dataclass(frozen=True)
class GradientCoefSpec:
    """Coefficient g(x, s) of |grad u|^2.

    Variants:
      zero              g identically 0 (semilinear problems)
      model-singular    mu(x) / (s + delta)^gamma
      constant-over-s   sigma / s  (so s*g is the constant sigma)
      table             mu(x) * A(s) + B(s) with tabulated A, B

    sigma and tau are the declared upper/lower bounds of (s+delta)*g when
    the sandwich condition g_star is claimed, the constant for
    constant-over-s, and the outer-region lower bound for g_outer.
    majorant is the integrable bound of condition g_majorant, defined on
    (0, s0] with s0 = its last knot.
    """

    variant: str
    gamma: float = 1.0
    delta: float = 0.0
    mu: MuFieldSpec = field(default_factory=MuFieldSpec)
    sigma: Optional[float] = None
    tau: Optional[float] = None
    majorant: Optional[TableFunction] = None
    table_a: Optional[TableFunction] = None
    table_b: Optional[TableFunction] = None
    declared: tuple = ()

    def __post_init__(self):
        if self.variant not in G_VARIANTS:
            raise SpecError(f"unknown g variant {self.variant!r}")
        if self.variant == "model-singular":
            if not (self.gamma > 0 and math.isfinite(self.gamma)):
                raise SpecError("model-singular requires gamma > 0")
            if self.delta < 0:
                raise SpecError("delta must be >= 0")
        if self.variant == "constant-over-s" and self.sigma is None:
            raise SpecError("constant-over-s requires sigma")
        if self.variant == "table" and self.table_a is None:
            raise SpecError("table variant requires table_a")
        bad = set(self.declared) - set(G_CONDITIONS)
        if bad:
            raise SpecError(f"unknown declared g condition(s): {sorted(bad)}")
        if "g_outer" in self.declared:
            if self.mu.variant != "piecewise":
                raise SpecError("g_outer needs a piecewise mu field")
            if self.tau is None:
                raise SpecError("g_outer needs a declared tau")

    @property
    def is_singular_at_zero(self) -> bool:
        """True when g cannot be evaluated at s = 0."""
        if self.variant == "constant-over-s":
            return True
        if self.variant == "model-singular":
            return self.delta == 0.0
        if self.variant == "table":
            return self.table_a.lo > 0.0
        return False

    def to_dict(self) -> dict:
        return {"variant": self.variant, "gamma": self.gamma, "delta": self.delta,
                "mu": self.mu.to_dict(), "sigma": self.sigma, "tau": self.tau,
                "majorant": self.majorant.to_dict() if self.majorant else None,
                "table_a": self.table_a.to_dict() if self.table_a else None,
                "table_b": self.table_b.to_dict() if self.table_b else None,
                "declared": list(self.declared)}

    @classmethod
    def from_dict(cls, d: dict) -> "GradientCoefSpec":
        _reject_unknown(d, {"variant", "gamma", "delta", "mu", "sigma", "tau",
                            "majorant", "table_a", "table_b", "declared"}, "g")
        if "variant" not in d:
            raise SpecError("g requires 'variant'")
        mu = d.get("mu")
        sig = d.get("sigma")
        tau = d.get("tau")
        return cls(variant=d["variant"], gamma=float(d.get("gamma", 1.0)),
                   delta=float(d.get("delta", 0.0)),
                   mu=MuFieldSpec.from_dict(mu) if mu is not None else MuFieldSpec(),
                   sigma=float(sig) if sig is not None else None,
                   tau=float(tau) if tau is not None else None,
                   majorant=_opt_table(d, "majorant", "g"),
                   table_a=_opt_table(d, "table_a", "g"),
                   table_b=_opt_table(d, "table_b", "g"),
                   declared=tuple(d.get("declared", ())))


def _require_positive(g: GradientCoefSpec, s: np.ndarray) -> None:
    if g.is_singular_at_zero and np.any(s <= 0):
        idx = int(np.argmax(np.asarray(s) <= 0))
        raise DomainError(f"singular coefficient evaluated at s <= 0 (position {idx})")


def eval_g(g: GradientCoefSpec, rho, s):
    """g(x, s) with x given through the radial coordinate rho."""
    s = np.asarray(s, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if g.variant == "zero":
        out = np.zeros(np.broadcast(rho, s).shape)
    elif g.variant == "model-singular":
        _require_positive(g, s)
        out = eval_mu(g.mu, rho) / np.power(s + g.delta, g.gamma)
    elif g.variant == "constant-over-s":
        _require_positive(g, s)
        out = np.broadcast_to(g.sigma / s, np.broadcast(rho, s).shape).copy()
    else:
        _require_positive(g, s)
        out = eval_mu(g.mu, rho) * np.asarray(g.table_a(s), dtype=float)
        if g.table_b is not None:
            out = out + np.asarray(g.table_b(s), dtype=float)
    return out if out.ndim else float(out)


def eval_g_s(g: GradientCoefSpec, rho, s):
    """Partial derivative of g with respect to s (for Jacobians)."""
    s = np.asarray(s, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if g.variant == "zero":
        out = np.zeros(np.broadcast(rho, s).shape)
    elif g.variant == "model-singular":
        _require_positive(g, s)
        out = -g.gamma * eval_mu(g.mu, rho) / np.power(s + g.delta, g.gamma + 1.0)
    elif g.variant == "constant-over-s":
        _require_positive(g, s)
        out = np.broadcast_to(-g.sigma / (s * s), np.broadcast(rho, s).shape).copy()
    else:
        _require_positive(g, s)
        out = eval_mu(g.mu, rho) * np.asarray(g.table_a.deriv(s), dtype=float)
        if g.table_b is not None:
            out = out + np.asarray(g.table_b.deriv(s), dtype=float)
    return out if out.ndim else float(out)


def eval_sg(g: GradientCoefSpec, rho, s):
    """s * g(x, s), evaluated so that s = 0 takes its limiting value."""
    s = np.asarray(s, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if g.variant == "zero":
        out = np.zeros(np.broadcast(rho, s).shape)
    elif g.variant == "constant-over-s":
        out = np.broadcast_to(float(g.sigma), np.broadcast(rho, s).shape).copy()
    elif g.variant == "model-singular":
        muv = eval_mu(g.mu, rho)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = muv * s / np.power(s + g.delta, g.gamma)
        if g.delta == 0.0:
            # limits of s^(1-gamma) as s -> 0+
            if g.gamma == 1.0:
                lim = muv
            elif g.gamma < 1.0:
                lim = np.zeros(np.broadcast(rho, s).shape)
            else:
                lim = np.where(np.broadcast_to(muv, np.broadcast(rho, s).shape) == 0,
                               0.0, np.inf)
            out = np.where(s == 0.0, lim, out)
    else:
        out = s * eval_g(g, rho, s)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# fixed source term (right sides that do not depend on u)


SOURCE_VARIANTS = ("constant", "radial-bump", "radial-table")


@dataclass(frozen=True)
class SourceSpec:
    """Fixed right-hand side h(x), again radial through rho.

    "radial-bump" is the smooth compactly supported bump
    amplitude * exp(1 - 1/(1 - (rho/radius)^2)) on {rho < radius}, zero
    outside; it is the standard compact source of the degeneration runs.
    """

    variant: str
    amplitude: float = 1.0
    radius: float = 0.25
    table: Optional[TableFunction] = None

    def __post_init__(self):
        if self.variant not in SOURCE_VARIANTS:
            raise SpecError(f"unknown source variant {self.variant!r}")
        if self.variant == "radial-bump" and not (self.radius > 0):
            raise SpecError("radial-bump requires radius > 0")
        if self.variant == "radial-table" and self.table is None:
            raise SpecError("radial-table source requires a table")

    def to_dict(self) -> dict:
        return {"variant": self.variant, "amplitude": self.amplitude,
                "radius": self.radius,
                "table": self.table.to_dict() if self.table else None}

    @classmethod
    def from_dict(cls, d: dict) -> "SourceSpec":
        _reject_unknown(d, {"variant", "amplitude", "radius", "table"}, "source")
        if "variant" not in d:
            raise SpecError("source requires 'variant'")
        return cls(variant=d["variant"], amplitude=float(d.get("amplitude", 1.0)),
                   radius=float(d.get("radius", 0.25)),
                   table=_opt_table(d, "table", "source"))


def eval_source(h: SourceSpec, rho):
    rho = np.asarray(rho, dtype=float)
    if h.variant == "constant":
        out = np.full_like(rho, h.amplitude)
    elif h.variant == "radial-bump":
        z = rho / h.radius
        out = np.zeros_like(rho)
        inside = z < 1.0
        zi = z[inside] if out.ndim else (z if inside else None)
        if out.ndim:
            out[inside] = h.amplitude * np.exp(1.0 - 1.0 / (1.0 - zi * zi))
        elif inside:
            out = h.amplitude * math.exp(1.0 - 1.0 / (1.0 - float(z) ** 2))
    else:
        out = np.asarray(h.table(rho), dtype=float)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# the full problem


@dataclass(frozen=True)
class ProblemSpec:
    """One boundary value problem instance.

    t and sigma_t describe the auxiliary concave forcing t * u^sigma_t
    used by the t-sweeps; t = 0 is the plain problem.  When t > 0 and g
    declares a sigma bound, sigma_t must equal it, mirroring how the
    auxiliary exponent is tied to the coefficient bound.
    """

    domain: DomainSpec
    lam: float
    f: NonlinearitySpec
    g: GradientCoefSpec
    t: float = 0.0
    sigma_t: float = 0.5

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise SpecError("lambda must be finite and >= 0")
        if not (math.isfinite(self.t) and self.t >= 0):
            raise SpecError("t must be finite and >= 0")
        if not (0.0 < self.sigma_t < 1.0):
            raise SpecError("sigma_t must lie in (0, 1)")
        if self.t > 0 and self.g.sigma is not None and self.sigma_t != self.g.sigma:
            raise SpecError("sigma_t must match g's declared sigma when t > 0")

    def to_dict(self) -> dict:
        return {"domain": self.domain.to_dict(), "lambda": self.lam,
                "f": self.f.to_dict(), "g": self.g.to_dict(),
                "t": self.t, "sigma_t": self.sigma_t}

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        _reject_unknown(d, {"domain", "lambda", "f", "g", "t", "sigma_t"}, "problem")
        for key in ("domain", "lambda", "f", "g"):
            if key not in d:
                raise SpecError(f"problem requires '{key}'")
        return cls(domain=DomainSpec.from_dict(d["domain"]), lam=float(d["lambda"]),
                   f=NonlinearitySpec.from_dict(d["f"]),
                   g=GradientCoefSpec.from_dict(d["g"]),
                   t=float(d.get("t", 0.0)), sigma_t=float(d.get("sigma_t", 0.5)))

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ProblemSpec":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise SpecError(f"invalid problem JSON: {e}") from e
        if not isinstance(d, dict):
            raise SpecError("problem JSON must be an object")
        return cls.from_dict(d)

    def with_lambda(self, lam: float) -> "ProblemSpec":
        return ProblemSpec(self.domain, lam, self.f, self.g, self.t, self.sigma_t)

    def with_t(self, t: float) -> "ProblemSpec":
        return ProblemSpec(self.domain, self.lam, self.f, self.g, t, self.sigma_t)


# ---------------------------------------------------------------------------
# condition validation


@dataclass(frozen=True)
class ConditionCheck:
    """Outcome of one sampled condition: verdict, worst margin, witness."""

    name: str
    ok: bool
    margin: float
    witness_s: Optional[float] = None
    witness_rho: Optional[float] = None
    note: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "ok": self.ok, "margin": self.margin,
                "witness_s": self.witness_s, "witness_rho": self.witness_rho,
                "note": self.note}


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple
    thresholds: Optional[Thresholds]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def failed(self) -> list:
        return [c for c in self.checks if not c.ok]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checks": [c.to_dict() for c in self.checks],
                "thresholds": self.thresholds.to_dict() if self.thresholds else None}


_REL_SLACK = 1e-9  # float slack for sampled inequalities that can be tight


def _default_rho_samples(domain: DomainSpec) -> np.ndarray:
    if domain.kind in RADIAL_KINDS:
        return np.linspace(domain.inner_radius, domain.outer_radius, 65)
    half = math.hypot(domain.side_lengths[0], domain.side_lengths[1]) / 2.0
    return np.linspace(0.0, half, 65)


def _worst(values: np.ndarray, rho: np.ndarray, s: np.ndarray):
    """Index of the most negative entry of a margin array (rho x s)."""
    k = int(np.argmin(values))
    i, j = np.unravel_index(k, values.shape)
    return float(values[i, j]), float(rho[i]), float(s[j])


def validate_spec(spec: ProblemSpec, rho_samples=None) -> ValidationReport:
    """Sample every declared condition of f and g on the fixed grid.

    Checks are heuristics by construction: limits are probed at the grid
    edges and monotonicity across consecutive grid points.  Each check
    reports its worst margin and, on failure, the witnessing (rho, s).
    """
    s = condition_sample_grid()
    rho = np.asarray(rho_samples if rho_samples is not None
                     else _default_rho_samples(spec.domain), dtype=float)
    checks = []

    thr = None
    try:
        thr = thresholds(spec.domain.dimension, spec.f.p)
    except SpecError:
        pass

    checks.extend(_check_f(spec.f, spec.g, s))
    checks.extend(_check_g(spec, rho, s, thr))
    return ValidationReport(checks=tuple(checks), thresholds=thr)


def _check_f(f: NonlinearitySpec, g: GradientCoefSpec, s: np.ndarray):
    out = []
    if "f_star" in f.declared:
        # power sandwich s^p <= f(s) <= a*(s+delta)^p with the problem delta
        try:
            fv = eval_f(f, s)
            lo = np.power(s, f.p)
            hi = f.a * np.power(s + g.delta, f.p)
            scale = np.maximum(lo, 1e-300)
            low_margin = (fv - lo) / scale
            high_margin = (hi - fv) / np.maximum(np.abs(hi), 1e-300)
            margins = np.minimum(low_margin, high_margin)
            k = int(np.argmin(margins))
            ok = margins[k] >= -_REL_SLACK
            out.append(ConditionCheck("f_star", bool(ok), float(margins[k]),
                                      witness_s=float(s[k])))
        except TableRangeError:
            out.append(ConditionCheck("f_star", False, -math.inf,
                                      note="table does not cover the sample grid"))
    if "f_zero" in f.declared:
        try:
            f0 = eval_f(f, 0.0)
            q = eval_f(f, s[0]) / s[0]
            ok = abs(f0) <= 1e-300 and q <= 1e-4
            out.append(ConditionCheck("f_zero", bool(ok), float(1e-4 - q),
                                      witness_s=float(s[0]),
                                      note=f"f(0)={f0:.3g}, f(s)/s={q:.3g} at s={s[0]:.1e}"))
        except TableRangeError:
            out.append(ConditionCheck("f_zero", False, -math.inf,
                                      note="table does not cover s=0"))
    if "f_infty" in f.declared:
        L = f.limit_at_infinity
        if L is None:
            L = f.a if f.variant == "shifted-power" else 1.0
        try:
            q = eval_f(f, s[-1]) / np.power(s[-1], f.p)
            err = abs(q - L) / max(abs(L), 1e-300)
            ok = err <= 1e-3
            out.append(ConditionCheck("f_infty", bool(ok), float(1e-3 - err),
                                      witness_s=float(s[-1]),
                                      note=f"f(s)/s^p={q:.6g} vs limit {L:.6g}"))
        except TableRangeError:
            out.append(ConditionCheck("f_infty", False, -math.inf,
                                      note="table does not cover the far grid"))
    return out


def _sg_grid(g: GradientCoefSpec, rho: np.ndarray, s: np.ndarray) -> np.ndarray:
    return np.asarray(eval_sg(g, rho[:, None], s[None, :]), dtype=float)


def _check_g(spec: ProblemSpec, rho: np.ndarray, s: np.ndarray,
             thr: Optional[Thresholds]):
    g = spec.g
    out = []
    if not g.declared:
        return out
    try:
        sg = _sg_grid(g, rho, s)
    except TableRangeError:
        return [ConditionCheck(name, False, -math.inf,
                               note="table does not cover the sample grid")
                for name in g.declared]

    sdg = None  # (s+delta)*g, for the sandwich
    if "g_star" in g.declared:
        if g.sigma is None or g.tau is None:
            out.append(ConditionCheck("g_star", False, -math.inf,
                                      note="g_star needs declared tau and sigma"))
        else:
            arith_ok = (2.0 * g.sigma - 1.0 < g.tau <= g.sigma < 1.0)
            gv = np.asarray(eval_g(g, rho[:, None], s[None, :]), dtype=float)
            sdg = (s[None, :] + g.delta) * gv
            lo_m = sdg - g.tau
            hi_m = g.sigma - sdg
            margins = np.minimum(lo_m, hi_m)
            worst, wr, ws = _worst(margins, rho, s)
            ok = arith_ok and worst >= -_REL_SLACK * max(1.0, abs(g.sigma))
            note = "" if arith_ok else "need 2*sigma-1 < tau <= sigma < 1"
            out.append(ConditionCheck("g_star", bool(ok), worst, witness_s=ws,
                                      witness_rho=wr, note=note))
    if "g_infty" in g.declared:
        if thr is None:
            out.append(ConditionCheck("g_infty", False, -math.inf,
                                      note="needs 1 < p < 2*-1 for sigma1"))
        else:
            tail, prev = sg[:, -1], sg[:, -COND_GRID_PER_DECADE - 1]
            drift = np.max(np.abs(tail - prev) / np.maximum(1.0, np.abs(tail)))
            mu_inf = float(np.max(tail))
            margin = thr.sigma1 - mu_inf
            ok = np.all(np.isfinite(tail)) and drift <= 1e-3 and margin > 0
            k = int(np.argmax(tail))
            note = f"limit {mu_inf:.6g} vs sigma1 {thr.sigma1:.6g}, drift {drift:.2e}"
            out.append(ConditionCheck("g_infty", bool(ok), float(margin),
                                      witness_s=float(s[-1]), witness_rho=float(rho[k]),
                                      note=note))
    if "g_zero" in g.declared or "g_zero_uniform" in g.declared:
        head, nxt = sg[:, 0], sg[:, COND_GRID_PER_DECADE]
        drift = np.max(np.abs(head - nxt) / np.maximum(1.0, np.abs(head)))
        exists = bool(np.all(np.isfinite(head)) and drift <= 1e-3)
        mu0 = float(np.max(head)) if np.all(np.isfinite(head)) else math.inf
        if "g_zero" in g.declared:
            out.append(ConditionCheck("g_zero", exists and mu0 < 1.0,
                                      float(1.0 - mu0), witness_s=float(s[0]),
                                      note=f"limit {mu0:.6g}, drift {drift:.2e}"))
        if "g_zero_uniform" in g.declared:
            if thr is None:
                out.append(ConditionCheck("g_zero_uniform", False, -math.inf,
                                          note="needs 1 < p < 2*-1 for sigma1"))
            else:
                margin = thr.sigma1 - mu0
                out.append(ConditionCheck("g_zero_uniform", exists and margin > 0,
                                          float(margin), witness_s=float(s[0]),
                                          note=f"limit {mu0:.6g} vs sigma1 {thr.sigma1:.6g}"))
    if "g_majorant" in g.declared:
        if g.majorant is None:
            out.append(ConditionCheck("g_majorant", False, -math.inf,
                                      note="no majorant table declared"))
        else:
            s0 = g.majorant.hi
            ss = s[(s >= g.majorant.lo) & (s <= s0)]
            gv = np.asarray(eval_g(g, rho[:, None], ss[None, :]), dtype=float)
            Gv = np.asarray(g.majorant(ss), dtype=float)[None, :]
            margins = np.minimum(Gv - gv, gv)  # g <= G and g >= 0 near zero
            worst, wr, ws = _worst(margins, rho, ss)
            # integrability proxy: s*G(s) must decay toward 0
            tail0 = g.majorant.lo * float(g.majorant(g.majorant.lo))
            tail1 = (10 * g.majorant.lo) * float(g.majorant(10 * g.majorant.lo))
            integrable = tail0 <= 0.9 * tail1 + 1e-300
            ok = worst >= -_REL_SLACK and integrable
            note = "" if integrable else "s*G(s) does not decay at 0: integral may diverge"
            out.append(ConditionCheck("g_majorant", bool(ok), worst,
                                      witness_s=ws, witness_rho=wr, note=note))
    if "g_one" in g.declared:
        mx = float(np.max(sg[np.isfinite(sg)])) if np.any(np.isfinite(sg)) else math.inf
        margin = 1.0 - mx
        out.append(ConditionCheck("g_one", margin > 0, float(margin),
                                  note=f"sup s*g = {mx:.6g}"))
    if "g_monotone" in g.declared:
        steps = np.diff(sg, axis=1)
        scale = np.maximum(1.0, np.max(np.abs(sg[np.isfinite(sg)]), initial=1.0))
        worst = float(np.min(steps)) if steps.size else 0.0
        k = int(np.argmin(steps)) if steps.size else 0
        i, j = np.unravel_index(k, steps.shape) if steps.size else (0, 0)
        ok = worst >= -_REL_SLACK * scale
        out.append(ConditionCheck("g_monotone", bool(ok), worst,
                                  witness_s=float(s[j]), witness_rho=float(rho[i])))
    if "g_outer" in g.declared:
        outer = rho >= g.mu.omega_radius
        if not np.any(outer):
            out.append(ConditionCheck("g_outer", False, -math.inf,
                                      note="no sample points outside omega"))
        else:
            margins = sg[outer, :] - g.tau
            worst, wr, ws = _worst(margins, rho[outer], s)
            out.append(ConditionCheck("g_outer", worst >= -_REL_SLACK, worst,
                                      witness_s=ws, witness_rho=wr))
    if "g_nonneg" in g.declared:
        gv = np.asarray(eval_g(g, rho[:, None], s[None, :]), dtype=float)
        worst, wr, ws = _worst(gv, rho, s)
        out.append(ConditionCheck("g_nonneg", worst >= -_REL_SLACK * max(1.0, abs(worst)),
                                  worst, witness_s=ws, witness_rho=wr))
    return out
