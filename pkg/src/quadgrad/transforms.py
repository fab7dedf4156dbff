"""Changes of unknown, truncations, and the blow-up rescaling.

Each transform returns a TransformedProblem: a new ProblemSpec plus the
node-wise monotone forward/inverse maps and a metadata block.  Closed
forms are used wherever the coefficient allows (the gamma = 1 kernel
integrates in elementary terms); everything else goes through adaptive
Simpson quadrature and dense monotone tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .model import (ProblemSpec, NonlinearitySpec, GradientCoefSpec,
                    TableFunction, SpecError, DomainError, TableRangeError,
                    eval_f, eval_g, eval_mu, two_star, condition_sample_grid)
from .mesh import RadialMesh, DiscreteField, radial_laplacian


# ---------------------------------------------------------------------------
# quadrature


def adaptive_simpson(fun: Callable[[float], float], a: float, b: float,
                     tol: float = 1e-12, max_depth: int = 40) -> float:
    """Adaptive Simpson with Richardson correction; absolute tolerance."""
    if b <= a:
        return 0.0

    def rec(x0, f0, x2, f2, x4, f4, whole, tol, depth):
        x1, x3 = 0.5 * (x0 + x2), 0.5 * (x2 + x4)
        f1, f3 = fun(x1), fun(x3)
        left = (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)
        right = (x4 - x2) / 6.0 * (f2 + 4.0 * f3 + f4)
        if depth >= max_depth or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (rec(x0, f0, x1, f1, x2, f2, left, 0.5 * tol, depth + 1)
                + rec(x2, f2, x3, f3, x4, f4, right, 0.5 * tol, depth + 1))

    m = 0.5 * (a + b)
    fa, fm, fb = fun(a), fun(m), fun(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return rec(a, fa, m, fm, b, fb, whole, tol, 0)


# ---------------------------------------------------------------------------
# the psi change of unknown (scalar coefficient mu/(s+delta)^gamma)


def _psi_guard(mu: float, delta: float, gamma: float, anchor: float) -> None:
    if mu < 0 or delta < 0 or anchor < 0 or gamma <= 0:
        raise DomainError("psi needs mu >= 0, delta >= 0, anchor >= 0, gamma > 0")
    if mu == 0.0 or delta > 0.0 or gamma < 1.0:
        return
    if gamma > 1.0:
        raise DomainError("the outer integral diverges for gamma > 1 with "
                          "delta = 0; no change of unknown exists")
    if anchor == 0.0:
        raise DomainError("kernel not integrable at zero; pass a positive anchor")
    if mu >= 1.0:
        raise DomainError("the outer integral diverges for mu >= 1 with delta = 0")


def _kernel_integral(mu, delta, gamma, anchor, t):
    """Closed form of the inner integral from anchor to t."""
    t = np.asarray(t, dtype=float)
    if gamma == 1.0:
        return mu * (np.log(t + delta) - math.log(anchor + delta))
    return mu * (np.power(t + delta, 1.0 - gamma)
                 - (anchor + delta) ** (1.0 - gamma)) / (1.0 - gamma)


def psi_derivative(mu: float, delta: float, gamma: float, s, *,
                   anchor: float = 0.0):
    """psi'(s) = exp(-inner integral); closed form for every admissible
    parameter combination."""
    _psi_guard(mu, delta, gamma, anchor)
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise DomainError("psi is defined for s >= 0")
    if mu == 0.0:
        out = np.ones_like(s_arr)
    else:
        with np.errstate(divide="ignore"):
            out = np.exp(-_kernel_integral(mu, delta, gamma, anchor, s_arr))
    return out if out.ndim else float(out)


def psi_forward(mu: float, delta: float, gamma: float, s, *,
                anchor: float = 0.0):
    """psi(s): the primitive of psi' vanishing at zero.

    gamma = 1 evaluates in closed form; other gamma integrate psi' by
    adaptive Simpson to 1e-12 absolute per call.
    """
    _psi_guard(mu, delta, gamma, anchor)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    scalar = np.ndim(s) == 0
    if np.any(s_arr < 0):
        raise DomainError("psi is defined for s >= 0")
    if mu == 0.0:
        out = s_arr.astype(float).copy()
    elif gamma == 1.0:
        a0 = (anchor + delta) ** mu
        if mu == 1.0:
            out = a0 * (np.log(s_arr + delta) - math.log(delta))
        else:
            q = 1.0 - mu
            out = a0 * (np.power(s_arr + delta, q) - delta ** q) / q
    else:
        kern = lambda t: math.exp(-float(_kernel_integral(mu, delta, gamma,
                                                          anchor, t)))
        order = np.argsort(s_arr, kind="stable")
        out = np.empty_like(s_arr)
        pos, acc = 0.0, 0.0
        for idx in order:
            si = s_arr[idx]
            if si > pos:
                acc += adaptive_simpson(kern, pos, si, tol=1e-13)
                pos = si
            out[idx] = acc
    return float(out[0]) if scalar else out


def psi_inverse(mu: float, delta: float, gamma: float, y, *,
                anchor: float = 0.0):
    """Inverse of psi: closed form at gamma = 1, else safeguarded Newton."""
    _psi_guard(mu, delta, gamma, anchor)
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    scalar = np.ndim(y) == 0
    if np.any(y_arr < 0):
        raise DomainError("psi_inverse needs y >= 0")
    if mu == 0.0:
        out = y_arr.astype(float).copy()
    elif gamma == 1.0:
        a0 = (anchor + delta) ** mu
        if mu == 1.0:
            out = delta * np.expm1(y_arr / (anchor + delta))
        else:
            q = 1.0 - mu
            out = np.power(delta ** q + q * y_arr / a0, 1.0 / q) - delta
    else:
        out = np.empty_like(y_arr)
        for i, yi in enumerate(y_arr):
            out[i] = _psi_inverse_scalar(mu, delta, gamma, anchor, yi)
    return float(out[0]) if scalar else out


def _psi_inverse_scalar(mu, delta, gamma, anchor, y):
    if y == 0.0:
        return 0.0
    hi = max(anchor, 1.0)
    while psi_forward(mu, delta, gamma, hi, anchor=anchor) < y:
        hi *= 2.0
        if hi > 1e14:
            raise DomainError("y beyond the computable range of psi")
    lo = 0.0
    s = min(hi, max(y, 1e-300))  # psi(s) <= s when psi' <= 1; rough start
    for _ in range(200):
        val = psi_forward(mu, delta, gamma, s, anchor=anchor) - y
        if val > 0:
            hi = s
        else:
            lo = s
        der = psi_derivative(mu, delta, gamma, s, anchor=anchor)
        step_ok = der > 0 and np.isfinite(der)
        s_new = s - val / der if step_ok else 0.5 * (lo + hi)
        if not (lo < s_new < hi):
            s_new = 0.5 * (lo + hi)
        # a converged value means s itself is the preimage; s_new may
        # already have been bisected away from it by the bracket guard
        if abs(val) <= 1e-12 * max(1.0, abs(y)):
            return s
        if abs(s_new - s) <= 1e-15 * max(1.0, s):
            return s_new
        s = s_new
    return s


def g_antiderivative(g: GradientCoefSpec, rho: float, a: float, t):
    """Integral of s -> g(rho, s) from a to t, per coefficient variant."""
    t_arr = np.asarray(t, dtype=float)
    if g.variant == "zero":
        out = np.zeros_like(t_arr)
    elif g.variant == "model-singular":
        mu0 = float(eval_mu(g.mu, np.asarray(rho, dtype=float)))
        if g.delta == 0.0 and a <= 0.0 and g.gamma >= 1.0:
            raise DomainError("kernel not integrable from zero")
        out = _kernel_integral(mu0, g.delta, g.gamma, a, t_arr)
    elif g.variant == "constant-over-s":
        if a <= 0.0 or np.any(t_arr <= 0.0):
            raise DomainError("kernel not integrable from zero")
        out = g.sigma * (np.log(t_arr) - math.log(a))
    else:
        mu0 = float(eval_mu(g.mu, np.asarray(rho, dtype=float)))
        out = mu0 * np.asarray(g.table_a.antiderivative_from(a, t_arr))
        if g.table_b is not None:
            out = out + np.asarray(g.table_b.antiderivative_from(a, t_arr))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# transformed problems


def _identity(x):
    return np.asarray(x, dtype=float).copy()


class _MonotoneMap:
    """Strictly increasing interpolant with an exact functional inverse.

    The forward map is the monotone cubic through the sample points; the
    inverse is root-finding against that same interpolant, so the round
    trip closes to solver precision independently of sample density.
    """

    def __init__(self, xs: np.ndarray, ys: np.ndarray):
        from scipy.interpolate import PchipInterpolator
        self.xs, self.ys = xs, ys
        self._p = PchipInterpolator(xs, ys, extrapolate=False)

    def __call__(self, x):
        x_arr = np.asarray(x, dtype=float)
        out = self._p(np.clip(x_arr, self.xs[0], self.xs[-1]))
        if np.any(x_arr < self.xs[0] - 1e-12) or np.any(x_arr > self.xs[-1] * (1 + 1e-12)):
            raise TableRangeError("value outside the transform's sampled range")
        return out if out.ndim else float(out)

    def inverse(self, y):
        y_arr = np.atleast_1d(np.asarray(y, dtype=float))
        scalar = np.ndim(y) == 0
        out = np.empty_like(y_arr)
        for i, yi in enumerate(y_arr):
            if yi <= self.ys[0]:
                out[i] = self.xs[0]
                continue
            if yi >= self.ys[-1]:
                if yi > self.ys[-1] * (1 + 1e-12):
                    raise TableRangeError("value outside the transform's sampled range")
                out[i] = self.xs[-1]
                continue
            j = int(np.searchsorted(self.ys, yi)) - 1
            out[i] = brentq(lambda x: float(self._p(x)) - yi,
                            self.xs[j], self.xs[j + 1], xtol=1e-15, rtol=8.9e-16)
        return float(out[0]) if scalar else out


@dataclass(eq=False)
class TransformedProblem:
    """A rewritten problem plus the node-wise change of unknown."""

    problem: ProblemSpec
    forward: Callable
    inverse: Callable
    metadata: dict

    def map_field(self, field: DiscreteField) -> DiscreteField:
        return DiscreteField(field.mesh, np.asarray(self.forward(field.values),
                                                    dtype=float))

    def unmap_field(self, field: DiscreteField) -> DiscreteField:
        return DiscreteField(field.mesh, np.asarray(self.inverse(field.values),
                                                    dtype=float))

    def roundtrip_error(self, grid) -> float:
        grid = np.asarray(grid, dtype=float)
        back = np.asarray(self.inverse(self.forward(grid)), dtype=float)
        return float(np.max(np.abs(back - grid)))

    def to_dict(self) -> dict:
        return {"problem": self.problem.to_dict(), "metadata": self.metadata}


def _strict_prefix(*arrays):
    """Trim parallel arrays to the longest prefix on which the first is
    strictly increasing (guards against quadrature saturation)."""
    ref = arrays[0]
    d = np.diff(ref)
    bad = np.nonzero(d <= 0)[0]
    if bad.size == 0:
        return arrays
    cut = int(bad[0]) + 1
    return tuple(a[:cut] for a in arrays)


def _tail_slope(xs: np.ndarray, ys: np.ndarray) -> float:
    """Log-log slope over the last decade of positive samples."""
    mask = (xs > 0) & (ys > 0)
    xs, ys = xs[mask], ys[mask]
    if xs.size < 4:
        return math.nan
    sel = xs >= xs[-1] / 10.0
    if np.count_nonzero(sel) < 4:
        sel = slice(-4, None)
    lx, ly = np.log(xs[sel]), np.log(ys[sel])
    return float(np.polyfit(lx, ly, 1)[0])


def semilinearize(spec: ProblemSpec, *, anchor: Optional[float] = None,
                  s_hi: float = 1e6, knots_per_decade: int = 512) -> TransformedProblem:
    """Rewrite the quasilinear problem with a zero gradient coefficient.

    Only an x-independent coefficient admits a single change of unknown;
    a spatially varying mu is rejected.  The reaction becomes
    phi(v) = psi'(s) * lambda * f(s) at s = psi^{-1}(v), with the new
    lambda equal to one.  For the gamma = 1 model with a pure power f
    the composition stays in closed form; otherwise phi is materialized
    as a dense monotone table.
    """
    if spec.t != 0.0:
        raise SpecError("semilinearize applies to the unforced problem (t = 0)")
    if spec.lam <= 0.0:
        raise SpecError("semilinearize requires lambda > 0")
    g = spec.g
    if g.variant == "zero":
        gamma, delta, mu0 = 1.0, 0.0, 0.0
    elif g.variant == "constant-over-s":
        gamma, delta, mu0 = 1.0, 0.0, float(g.sigma)
    elif g.variant == "model-singular":
        if g.mu.variant != "constant":
            raise SpecError("unsupported transform: a spatially varying "
                            "coefficient admits no single change of unknown")
        gamma, delta, mu0 = float(g.gamma), float(g.delta), float(g.mu.value)
    else:
        raise SpecError("semilinearize supports zero, constant-over-s, and "
                        "model-singular coefficients")
    if anchor is None:
        anchor = 0.0 if (mu0 == 0.0 or delta > 0.0 or gamma < 1.0) else 1.0
    _psi_guard(mu0, delta, gamma, anchor)

    zero_g = GradientCoefSpec(variant="zero")
    meta = {"transform": "semilinearize", "mu": mu0, "delta": delta,
            "gamma": gamma, "anchor": anchor, "lambda_folded": spec.lam}

    if mu0 == 0.0:
        if spec.lam == 1.0:
            new_f = spec.f
        elif spec.f.variant == "pure-power":
            new_f = NonlinearitySpec(variant="psi-power", p=spec.f.p,
                                     base_p=spec.f.p, scale=spec.lam)
        elif spec.f.variant == "psi-power":
            new_f = NonlinearitySpec(variant="psi-power", p=spec.f.p,
                                     mu=spec.f.mu, delta=spec.f.delta,
                                     anchor=spec.f.anchor, base_p=spec.f.base_p,
                                     scale=spec.f.scale * spec.lam)
        else:
            grid = np.concatenate(([0.0], np.geomspace(1e-8, s_hi, 8 * 1024)))
            if spec.f.variant == "table":
                grid = grid[(grid >= spec.f.table.lo) & (grid <= spec.f.table.hi)]
            vals = spec.lam * np.asarray(eval_f(spec.f, grid), dtype=float)
            new_f = NonlinearitySpec(variant="table", p=spec.f.p,
                                     table=TableFunction(grid, vals))
        meta["p_effective"] = spec.f.p
        prob = ProblemSpec(domain=spec.domain, lam=1.0, f=new_f, g=zero_g)
        return TransformedProblem(prob, _identity, _identity, meta)

    if gamma == 1.0 and spec.f.variant == "pure-power":
        p_eff = (spec.f.p - mu0) / (1.0 - mu0)
        new_f = NonlinearitySpec(variant="psi-power", p=p_eff, mu=mu0,
                                 delta=delta, anchor=anchor,
                                 base_p=spec.f.p, scale=spec.lam)
        meta["p_effective"] = p_eff
        fwd = lambda s: psi_forward(mu0, delta, 1.0, s, anchor=anchor)
        inv = lambda y: psi_inverse(mu0, delta, 1.0, y, anchor=anchor)
        prob = ProblemSpec(domain=spec.domain, lam=1.0, f=new_f, g=zero_g)
        return TransformedProblem(prob, fwd, inv, meta)

    # general case: dense table of the composed reaction
    s_lo = 1e-8 if delta == 0.0 else min(1e-8, delta * 1e-2)
    hi = s_hi
    if spec.f.variant == "table":
        s_lo = max(s_lo, spec.f.table.lo if spec.f.table.lo > 0 else s_lo)
        hi = min(hi, spec.f.table.hi)
    n = max(64, int(math.ceil(math.log10(hi / s_lo) * knots_per_decade)))
    s_grid = np.geomspace(s_lo, hi, n)
    f_at_zero = spec.f.variant != "table" or spec.f.table.lo <= 0.0
    if f_at_zero:
        s_grid = np.concatenate(([0.0], s_grid))
    y = psi_forward(mu0, delta, gamma, s_grid, anchor=anchor)
    phi = (np.asarray(psi_derivative(mu0, delta, gamma, s_grid, anchor=anchor))
           * spec.lam * np.asarray(eval_f(spec.f, s_grid), dtype=float))
    y, s_grid, phi = _strict_prefix(y, s_grid, phi)
    if gamma == 1.0:
        p_label = (spec.f.p - mu0) / (1.0 - mu0) if mu0 < 1.0 else math.nan
    else:
        p_label = _tail_slope(y, phi)
    meta["p_fitted"] = p_label
    p_use = p_label if math.isfinite(p_label) and p_label > 1.0 else 1.0 + 1e-6
    meta["p_effective"] = p_use
    new_f = NonlinearitySpec(variant="table", p=p_use,
                             table=TableFunction(y, phi))
    if gamma == 1.0:
        fwd = lambda s: psi_forward(mu0, delta, 1.0, s, anchor=anchor)
        inv = lambda t: psi_inverse(mu0, delta, 1.0, t, anchor=anchor)
    else:
        mono = _MonotoneMap(s_grid, y)
        fwd, inv = mono, mono.inverse
    prob = ProblemSpec(domain=spec.domain, lam=1.0, f=new_f, g=zero_g)
    return TransformedProblem(prob, fwd, inv, meta)


# ---------------------------------------------------------------------------
# pure-power defect check


@dataclass(frozen=True)
class PowerDefectReport:
    """Defect of the closed-form power substitution on a solved field."""

    c: float
    exponent: float
    defect_sup: float
    supercritical: bool
    sigma1: float

    def to_dict(self) -> dict:
        return {"c": self.c, "exponent": self.exponent,
                "defect_sup": self.defect_sup,
                "supercritical": self.supercritical, "sigma1": self.sigma1}


def power_transform_check(field: DiscreteField, mu: float, lam: float,
                          p: float) -> PowerDefectReport:
    """Substitute v = c u^{1-mu} and measure sup |-lap_h v - v^q|.

    q = (p - mu)/(1 - mu) and c = ((1-mu) lambda)^{(1-mu)/(p-1)}; for a
    converged solution of the gamma = 1, delta = 0, constant-mu model
    the defect vanishes with the mesh.  The report also says whether q
    reaches the critical power, which happens exactly at mu = sigma1.
    """
    if not (0.0 <= mu < 1.0):
        raise SpecError("power substitution needs 0 <= mu < 1")
    if lam <= 0.0 or p <= 1.0:
        raise SpecError("power substitution needs lambda > 0 and p > 1")
    if not isinstance(field.mesh, RadialMesh):
        raise SpecError("power substitution check runs on radial fields")
    q = (p - mu) / (1.0 - mu)
    c = ((1.0 - mu) * lam) ** ((1.0 - mu) / (p - 1.0))
    v = DiscreteField(field.mesh, c * np.power(field.values, 1.0 - mu))
    lap = radial_laplacian(v)
    defect = float(np.max(np.abs(-lap - np.power(v.interior, q))))
    ts = two_star(field.mesh.domain.dimension)
    sigma1 = (ts - 1.0 - p) / (ts - 2.0)
    return PowerDefectReport(c=c, exponent=q, defect_sup=defect,
                             supercritical=bool(q >= ts - 1.0 - 1e-12),
                             sigma1=sigma1)


# ---------------------------------------------------------------------------
# strong-singularity rewrite (gamma > 1)


def gamma_transform(spec: ProblemSpec, gamma: Optional[float] = None,
                    b: Optional[float] = None, *, knots_per_decade: int = 1024,
                    s_hi: float = 1e8) -> TransformedProblem:
    """Rewrite a gamma > 1 model-singular problem with unknown
    v = (u+delta)^gamma - delta^gamma.

    The new coefficient splits as mu(x) A(v) + B(v) with
    A(v) = (v+delta^gamma)^{1/gamma-2}/gamma and
    B(v) = (gamma-1)/(gamma (v+delta^gamma)); both are tabulated.  The
    new reaction is f_g(v) = b (v+delta^gamma)^{(gamma-1)/gamma}
    f((v+delta^gamma)^{1/gamma} - delta) with growth label
    p_g = (gamma-1+p)/gamma, and the normalizer b is chosen as the grid
    supremum making f_g(v) >= v^{p_g}, with one percent slack; lambda
    absorbs the leftover factor gamma/b.  Spatial variation of mu passes
    through untouched.
    """
    g = spec.g
    if g.variant != "model-singular":
        raise SpecError("the rewrite applies to model-singular coefficients")
    if gamma is None:
        gamma = float(g.gamma)
    elif abs(gamma - g.gamma) > 1e-12:
        raise SpecError("explicit gamma disagrees with the coefficient")
    if gamma <= 1.0:
        raise SpecError("the rewrite needs gamma > 1")
    if spec.t != 0.0:
        raise SpecError("the rewrite applies to the unforced problem (t = 0)")
    delta = float(g.delta)
    p = spec.f.p
    p_g = (gamma - 1.0 + p) / gamma
    dg = delta ** gamma

    def u_of(v):
        return np.power(v + dg, 1.0 / gamma) - delta

    def f_raw(v):
        return np.power(v + dg, (gamma - 1.0) / gamma) * np.asarray(
            eval_f(spec.f, u_of(v)), dtype=float)

    if b is None:
        samp = condition_sample_grid()
        if spec.f.variant == "table":
            samp = samp[u_of(samp) <= spec.f.table.hi]
        vals = f_raw(samp)
        ok = vals > 0
        if not np.any(ok):
            raise SpecError("cannot normalize: transformed reaction vanishes "
                            "on the sample grid")
        b = 1.01 * float(np.max(np.power(samp[ok], p_g) / vals[ok]))
    if b <= 0:
        raise SpecError("normalizer b must be positive")

    lo = 1e-16
    hi = s_hi
    if spec.f.variant == "table":
        while u_of(hi) > spec.f.table.hi and hi > lo * 10:
            hi /= 10.0
    n = max(256, int(math.ceil(math.log10(hi / lo) * knots_per_decade)))
    grid = np.geomspace(lo, hi, n)
    a_vals = np.power(grid + dg, 1.0 / gamma - 2.0) / gamma
    b_vals = (gamma - 1.0) / (gamma * (grid + dg))
    f_vals = b * f_raw(grid)
    f_grid = grid
    if delta > 0.0:
        grid0 = np.concatenate(([0.0], grid))
        a_vals = np.concatenate(([dg ** (1.0 / gamma - 2.0) / gamma], a_vals))
        b_vals = np.concatenate(([(gamma - 1.0) / (gamma * dg)], b_vals))
        f_grid = grid0
        f_vals = np.concatenate(([0.0], f_vals))
        grid = grid0
    new_g = GradientCoefSpec(variant="table", mu=g.mu,
                             table_a=TableFunction(grid, a_vals),
                             table_b=TableFunction(grid, b_vals))
    new_f = NonlinearitySpec(variant="table", p=p_g,
                             table=TableFunction(f_grid, f_vals))
    lam_new = spec.lam * gamma / b
    prob = ProblemSpec(domain=spec.domain, lam=lam_new, f=new_f, g=new_g)

    def fwd(u):
        return np.power(np.asarray(u, dtype=float) + delta, gamma) - dg

    meta = {"transform": "gamma-map", "gamma": gamma, "delta": delta, "b": b,
            "p_gamma": p_g, "lambda_out": lam_new}
    return TransformedProblem(prob, fwd, u_of, meta)


# ---------------------------------------------------------------------------
# truncations


_TRUNC_LO, _TRUNC_HI = 1e-16, 1e8


def _truncated_table(fun: Callable, breakpoint: float, tail: Callable,
                     lo: float, hi: float, knots_per_decade: int) -> TableFunction:
    """Sample fun below the breakpoint and tail above it, with the
    breakpoint itself a knot (the two sides agree there by construction)."""
    n = max(256, int(math.ceil(math.log10(hi / lo) * knots_per_decade)))
    grid = np.unique(np.concatenate((np.geomspace(lo, hi, n), [breakpoint])))
    below = grid < breakpoint
    vals = np.where(below, fun(grid), tail(grid))
    return TableFunction(grid, vals)


def _truncate_g(g: GradientCoefSpec, s0: float,
                knots_per_decade: int) -> GradientCoefSpec:
    """Coefficient with the tail s0 g(x, s0)/s beyond s0; exact variants
    that already have that form come back unchanged."""
    if g.variant == "zero" or g.variant == "constant-over-s":
        return g
    if g.variant == "model-singular" and g.gamma == 1.0 and g.delta == 0.0:
        return g
    if g.variant == "model-singular":
        base = lambda s: np.power(s + g.delta, -g.gamma)
        a0 = float(base(np.asarray(s0)))
        table_a = _truncated_table(base, s0, lambda s: s0 * a0 / s,
                                   _TRUNC_LO, _TRUNC_HI, knots_per_decade)
        return GradientCoefSpec(variant="table", mu=g.mu, table_a=table_a)
    a0 = float(g.table_a(np.asarray(s0)))
    lo = max(_TRUNC_LO, g.table_a.lo if g.table_a.lo > 0 else _TRUNC_LO)
    hi = min(_TRUNC_HI, g.table_a.hi)
    table_a = _truncated_table(lambda s: np.asarray(g.table_a(s)), s0,
                               lambda s: s0 * a0 / s, lo, hi, knots_per_decade)
    table_b = None
    if g.table_b is not None:
        b0 = float(g.table_b(np.asarray(s0)))
        table_b = _truncated_table(lambda s: np.asarray(g.table_b(s)), s0,
                                   lambda s: s0 * b0 / s, lo, hi, knots_per_decade)
    return GradientCoefSpec(variant="table", mu=g.mu, table_a=table_a,
                            table_b=table_b)


def truncate_at_s0(spec: ProblemSpec, s0: float, *,
                   knots_per_decade: int = 1024) -> TransformedProblem:
    """Replace both nonlinearities beyond s0 by their scale-matched
    power/inverse-power tails.  Solutions staying below s0 solve the
    original problem, so the node-wise map is the identity."""
    if not (0.0 < s0 < 1.0):
        raise SpecError("truncation level s0 must lie in (0, 1)")
    new_g = _truncate_g(spec.g, s0, knots_per_decade)
    f = spec.f
    if f.variant == "pure-power":
        new_f = f
    else:
        f0 = float(eval_f(f, s0)) / s0 ** f.p
        lo, hi = _TRUNC_LO, _TRUNC_HI
        if f.variant == "table":
            lo = max(lo, f.table.lo if f.table.lo > 0 else lo)
            hi = min(hi, f.table.hi)
        new_f = NonlinearitySpec(
            variant="table", p=f.p,
            table=_truncated_table(lambda s: np.asarray(eval_f(f, s), dtype=float),
                                   s0, lambda s: f0 * np.power(s, f.p),
                                   lo, hi, knots_per_decade))
    prob = ProblemSpec(domain=spec.domain, lam=spec.lam, f=new_f, g=new_g,
                       t=spec.t, sigma_t=spec.sigma_t)
    meta = {"transform": "truncate-above", "s0": s0,
            "f_changed": new_f is not f, "g_changed": new_g is not spec.g}
    return TransformedProblem(prob, _identity, _identity, meta)


def truncate_at_delta(spec: ProblemSpec, delta_trunc: float, *,
                      knots_per_decade: int = 1024) -> TransformedProblem:
    """Flatten only the coefficient beyond delta_trunc (the reaction is
    kept); used when taming a bounded-at-zero coefficient's tail."""
    if delta_trunc <= 0.0:
        raise SpecError("truncation level must be positive")
    new_g = _truncate_g(spec.g, delta_trunc, knots_per_decade)
    prob = ProblemSpec(domain=spec.domain, lam=spec.lam, f=spec.f, g=new_g,
                       t=spec.t, sigma_t=spec.sigma_t)
    meta = {"transform": "truncate-tail", "delta": delta_trunc,
            "g_changed": new_g is not spec.g}
    return TransformedProblem(prob, _identity, _identity, meta)


# ---------------------------------------------------------------------------
# blow-up rescaling


@dataclass(eq=False)
class BlowupProfile:
    """Solution rescaled around its maximum: v(y) = u(r* + eta y)/sup u,
    with eta = sup^{-(p-1)/2}; v(0) = 1 exactly."""

    y: np.ndarray
    values: np.ndarray
    eta: float
    center: float
    clipped: bool
    window: float

    def sup_difference(self, other: "BlowupProfile") -> float:
        lo = max(self.y[0], other.y[0])
        hi = min(self.y[-1], other.y[-1])
        if hi <= lo:
            raise DomainError("profiles share no window")
        mask = (self.y >= lo) & (self.y <= hi)
        theirs = np.interp(self.y[mask], other.y, other.values)
        return float(np.max(np.abs(self.values[mask] - theirs)))


def blowup_rescale(field: DiscreteField, p: float, *, window: float = 10.0,
                   samples: int = 401) -> BlowupProfile:
    """Sample the normalized blow-up profile of a radial field.

    The window is fixed in the stretched variable y = (r - r*)/eta and
    clipped (and flagged) where it leaves the domain.  A ball-centered
    maximum is extended by even symmetry instead of clipping left.
    """
    if p <= 1.0:
        raise SpecError("rescaling needs p > 1")
    mesh = field.mesh
    if not isinstance(mesh, RadialMesh):
        raise SpecError("rescaling runs on radial fields")
    interior = field.interior
    k = int(np.argmax(interior))
    sup = float(interior[k])
    if sup <= 0.0:
        raise SpecError("rescaling needs a positive field")
    r_star = float(mesh.interior_nodes[k])
    eta = sup ** (-(p - 1.0) / 2.0)
    a, R = mesh.nodes[0], mesh.nodes[-1]
    ball_center = mesh.i0 == 0 and k == 0

    y_lo_free = -window
    y_hi_free = window
    clipped = False
    if not ball_center:
        r_lo = r_star + eta * y_lo_free
        if r_lo < a:
            y_lo_free = (a - r_star) / eta
            clipped = True
    r_hi = r_star + eta * y_hi_free
    if r_hi > R:
        y_hi_free = (R - r_star) / eta
        clipped = True

    total = y_hi_free - y_lo_free
    n_neg = int(round((0.0 - y_lo_free) / total * (samples - 1)))
    n_neg = min(max(n_neg, 0), samples - 1)
    y = np.concatenate((np.linspace(y_lo_free, 0.0, n_neg + 1),
                        np.linspace(0.0, y_hi_free, samples - n_neg)[1:]))
    interp = field.interpolant()
    r_eval = r_star + eta * y
    if ball_center:
        r_eval = np.abs(r_eval)
    vals = np.asarray(interp(r_eval), dtype=float) / sup
    return BlowupProfile(y=y, values=vals, eta=eta, center=r_star,
                         clipped=clipped, window=window)
