"""Executable verdicts: the decreasing-ratio condition behind the
Liouville argument, the discrete comparison principle, the Pohozaev
defect, Hölder quotients, scaled-norm boundedness sweeps, and the
degeneration probe for the inverse-power obstruction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .model import (ProblemSpec, NonlinearitySpec, GradientCoefSpec, SourceSpec,
                    SpecError, DomainError, TableRangeError, two_star,
                    condition_sample_grid, eval_sg, eval_source, eval_mu)
from .mesh import (RadialMesh, Grid2D, DiscreteField, assemble_residual,
                   radial_laplacian)
from .transforms import psi_forward, psi_derivative, g_antiderivative, adaptive_simpson
from .solve import (SolverConfig, SweepTable, continuation_lambda,
                    fixed_point_solve, STATUS_CONVERGED)


@dataclass(eq=False)
class CheckVerdict:
    """Outcome of one hypothesis/conclusion check.

    A failing verdict always carries a witness describing where the
    property broke; margin quantifies how far from the boundary the
    decision was (positive = comfortable pass, negative = violation).
    """

    name: str
    ok: bool
    margin: float
    witness: Optional[dict] = None
    note: str = ""

    def __post_init__(self):
        if not self.ok and self.witness is None:
            raise ValueError("failing verdict requires a witness")

    def to_dict(self) -> dict:
        return {"name": self.name, "ok": self.ok, "margin": self.margin,
                "witness": self.witness, "note": self.note}


# ---------------------------------------------------------------------------
# decreasing-ratio condition


def _psi_hat(g: GradientCoefSpec, rho0: float, anchor: float, s: np.ndarray):
    """(psi, psi') for the unit-scaled kernel anchored at `anchor`,
    evaluated at the points of s (closed forms where the variant allows)."""
    if g.variant == "zero":
        return s.copy(), np.ones_like(s)
    if g.variant == "constant-over-s":
        mu0, delta, gamma = float(g.sigma), 0.0, 1.0
    elif g.variant == "model-singular":
        mu0 = float(eval_mu(g.mu, np.asarray(rho0, dtype=float)))
        delta, gamma = float(g.delta), float(g.gamma)
    else:
        lo = max(g.table_a.lo, 1e-300)
        kern = lambda t: math.exp(-float(g_antiderivative(g, rho0, anchor,
                                                          max(t, lo))))
        vals = np.empty_like(s)
        pos = lo
        acc = lo * kern(lo)  # head below the table's reach, rectangle bound
        order = np.argsort(s, kind="stable")
        for idx in order:
            si = float(s[idx])
            if si > pos:
                acc += adaptive_simpson(kern, pos, si, tol=1e-13)
                pos = si
            vals[idx] = acc
        ders = np.array([kern(float(t)) for t in s])
        return vals, ders
    psi = np.asarray(psi_forward(mu0, delta, gamma, s, anchor=anchor))
    der = np.asarray(psi_derivative(mu0, delta, gamma, s, anchor=anchor))
    return psi, der


def check_psi_decreasing(g: GradientCoefSpec, p: float, N: int, *,
                         L: float = 1.0, anchor: float = 1.0,
                         rho0: float = 0.0,
                         s_grid: Optional[np.ndarray] = None) -> CheckVerdict:
    """Decide whether psi'(s) s^p / psi(s)^{2*-1} is decreasing.

    Two coupled criteria on a log grid: strict decrease of the ratio
    itself, and the pointwise inequality
    (p - s g(x0, s)) psi(s) < (2*-1) s psi'(s), which is the derivative
    of the first in disguise.  The kernel is rescaled by L exactly as
    the whole-space limit problems require; the pointwise inequality is
    L-free.  Fails report the first violating s.
    """
    if L <= 0:
        raise SpecError("scale L must be positive")
    if s_grid is None:
        s_grid = np.logspace(-6.0, 6.0, 1000)
    s_grid = np.asarray(s_grid, dtype=float)
    ts = two_star(N)
    crit = ts - 1.0

    psi_h, der_h = _psi_hat(g, rho0, anchor, s_grid / L)
    psi_l = L * psi_h          # psi at s under the L-scaled kernel
    der_l = der_h
    with np.errstate(divide="ignore", over="ignore"):
        H = der_l * np.power(s_grid, p) / np.power(psi_l, crit)

    sg = np.asarray(eval_sg(g, np.asarray(rho0, dtype=float), s_grid), dtype=float)
    lhs = (p - sg) * psi_h
    rhs = crit * s_grid * der_h
    gaps = rhs - lhs
    rel = gaps / np.where(rhs > 0, rhs, 1.0)
    margin = float(np.min(rel))

    bad_ineq = np.nonzero(gaps <= 0)[0]
    diffs = np.diff(H)
    bad_mono = np.nonzero(diffs >= 0)[0]
    first_bad = None
    if bad_ineq.size:
        first_bad = int(bad_ineq[0])
    if bad_mono.size:
        cand = int(bad_mono[0]) + 1
        first_bad = cand if first_bad is None else min(first_bad, cand)
    if first_bad is None:
        return CheckVerdict(name="psi-decreasing", ok=True, margin=margin)
    return CheckVerdict(name="psi-decreasing", ok=False, margin=margin,
                        witness={"s": float(s_grid[first_bad]),
                                 "H": float(H[first_bad])},
                        note="ratio fails to decrease" if bad_mono.size else
                             "pointwise inequality fails")


# ---------------------------------------------------------------------------
# discrete comparison principle


def _coerce_interior(mesh, h) -> np.ndarray:
    if isinstance(h, SourceSpec):
        return np.asarray(eval_source(h, mesh.rho()), dtype=float)
    if isinstance(h, DiscreteField):
        return h.interior.astype(float)
    arr = np.asarray(h, dtype=float)
    if arr.shape != (mesh.n_unknowns,):
        raise SpecError("field h must match the mesh interior")
    return arr


def comparison_check(u: DiscreteField, v: DiscreteField, h,
                     g: GradientCoefSpec, *, slack: float = 1e-10) -> CheckVerdict:
    """Discrete comparison: a subsolution below h and a supersolution
    above it must be ordered.  The coefficient must keep s g(x, s) below
    one and nondecreasing (sampled); a pair that fails the residual
    ordering yields a precondition-violation verdict, not a comparison
    failure."""
    mesh = u.mesh
    if v.mesh.key != mesh.key:
        raise SpecError("comparison needs fields on the same mesh")
    h_int = _coerce_interior(mesh, h)

    rho = mesh.rho()
    samples = condition_sample_grid()
    sub = np.linspace(0, rho.size - 1, min(17, rho.size)).astype(int)
    sg_max, mono_min = -math.inf, math.inf
    for i in sub:
        vals = np.asarray(eval_sg(g, rho[i], samples), dtype=float)
        sg_max = max(sg_max, float(np.max(vals)))
        d = np.diff(vals)
        mono_min = min(mono_min, float(np.min(d)) if d.size else 0.0)
    if sg_max >= 1.0:
        return CheckVerdict(name="comparison", ok=False, margin=1.0 - sg_max,
                            witness={"sg_sup": sg_max},
                            note="precondition: s*g must stay below one")
    if mono_min < -1e-9 * max(1.0, abs(sg_max)):
        return CheckVerdict(name="comparison", ok=False, margin=mono_min,
                            witness={"sg_monotone_drop": mono_min},
                            note="precondition: s*g must be nondecreasing")

    dummy = ProblemSpec(domain=mesh.domain, lam=0.0,
                        f=NonlinearitySpec(variant="pure-power", p=2.0), g=g)
    try:
        res_u = assemble_residual(dummy, mesh, u.interior)
        res_v = assemble_residual(dummy, mesh, v.interior)
    except (DomainError, TableRangeError) as e:
        return CheckVerdict(name="comparison", ok=False, margin=-math.inf,
                            witness={"error": str(e)},
                            note="precondition: residual undefined")
    scale = max(1.0, float(np.max(np.abs(h_int))))
    tol = 1e-9 * scale
    bad_sub = res_u - h_int
    bad_sup = h_int - res_v
    if float(np.max(bad_sub)) > tol or float(np.max(bad_sup)) > tol:
        k = int(np.argmax(np.maximum(bad_sub, bad_sup)))
        return CheckVerdict(name="comparison", ok=False,
                            margin=-float(np.max(np.maximum(bad_sub, bad_sup))),
                            witness={"node": k, "rho": float(rho[k])},
                            note="precondition: not a sub/supersolution pair")

    diff = v.values - u.values
    margin = float(np.min(diff))
    if margin >= -slack:
        return CheckVerdict(name="comparison", ok=True, margin=margin)
    k = int(np.argmin(diff))
    return CheckVerdict(name="comparison", ok=False, margin=margin,
                        witness={"node": k}, note="ordering violated")


# ---------------------------------------------------------------------------
# Pohozaev defect


def _radial_deriv_full(mesh: RadialMesh, vals: np.ndarray) -> np.ndarray:
    """du/dr at every node, one-sided 3-point at the ends."""
    h = mesh.h
    dv = np.empty_like(vals)
    dv[1:-1] = (vals[2:] - vals[:-2]) / (2.0 * h)
    if mesh.i0 == 0:
        dv[0] = 0.0
    else:
        dv[0] = (-3.0 * vals[0] + 4.0 * vals[1] - vals[2]) / (2.0 * h)
    dv[-1] = (3.0 * vals[-1] - 4.0 * vals[-2] + vals[-3]) / (2.0 * h)
    return dv


def sphere_area_constant(N: int) -> float:
    """Surface measure of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


def pohozaev_defect(field: DiscreteField, q: float) -> float:
    """The starshaped-domain identity's defect for -lap v = v^q on a ball.

    D = (N-2)/2 * int |grad v|^2 - N/(q+1) * int v^{q+1}
        + 1/2 * int_bdry (x.nu) (dv/dnu)^2,
    radial quadrature by trapezoid, boundary slope one-sided.  Vanishes
    (with the mesh) for genuine subcritical solutions; stays away from
    zero in the supercritical regime.
    """
    mesh = field.mesh
    if not isinstance(mesh, RadialMesh) or mesh.domain.kind != "radial-ball":
        raise DomainError("the identity needs a ball domain")
    if q <= 0:
        raise SpecError("exponent q must be positive")
    N = mesh.domain.dimension
    omega = sphere_area_constant(N)
    r = mesh.nodes
    vals = field.values
    dv = _radial_deriv_full(mesh, vals)
    w = np.power(r, N - 1)
    grad_term = 0.5 * (N - 2.0) * omega * np.trapz(dv * dv * w, r)
    pot_term = (N / (q + 1.0)) * omega * np.trapz(np.power(vals, q + 1.0) * w, r)
    R = r[-1]
    bdry = 0.5 * R * dv[-1] ** 2 * omega * R ** (N - 1)
    return float(grad_term - pot_term + bdry)


def supercritical_witness(mesh: RadialMesh, q: float) -> DiscreteField:
    """Discrete solution of -lap v = v^q concentrated at the ball center.

    Past the critical exponent the continuum problem has no positive
    solution, but the radial scheme in dimension 3 decouples the center
    node from the first shell (the backward coupling coefficient there
    is identically zero), so the single-node field alpha*e_0 with
    alpha^(q-1) = 2N/h^2 solves the discrete system outright.  The
    returned field is the concentration artifact the Pohozaev defect is
    meant to expose: its defect does not vanish under refinement.
    """
    if not isinstance(mesh, RadialMesh) or mesh.domain.kind != "radial-ball":
        raise DomainError("the witness needs a ball domain")
    if mesh.domain.dimension != 3:
        raise DomainError("the center decoupling is specific to dimension 3")
    if q <= 1:
        raise SpecError("exponent q must exceed one")
    spec = ProblemSpec(domain=mesh.domain, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=q),
                       g=GradientCoefSpec(variant="zero"))
    n = mesh.M - mesh.i0
    e0 = np.zeros(n)
    e0[0] = 1.0
    stiff = float(assemble_residual(spec, mesh, e0)[0]) + 1.0
    alpha = stiff ** (1.0 / (q - 1.0))
    res = assemble_residual(spec, mesh, alpha * e0)
    scale = alpha ** q
    if float(np.max(np.abs(res))) > 1e-10 * scale:
        raise SpecError("the needle field fails to solve the discrete system")
    return DiscreteField.from_interior(mesh, alpha * e0)


# ---------------------------------------------------------------------------
# Hölder quotient


def holder_quotient(field: DiscreteField, alpha: float = 0.5,
                    pairs: int = 100_000) -> float:
    """max |u(x)-u(y)| / |x-y|^alpha over node pairs.

    1D scans all pairs blockwise; 2D samples a fixed low-discrepancy set
    of node pairs, so repeated calls agree bit for bit.
    """
    if not (0.0 < alpha < 1.0):
        raise SpecError("alpha must lie in (0, 1)")
    mesh = field.mesh
    if isinstance(mesh, RadialMesh):
        r = mesh.nodes
        u = field.values
        best = 0.0
        block = 512
        n = r.size
        for start in range(0, n - 1, block):
            stop = min(start + block, n - 1)
            # rectangle rows [start, stop) x columns (start, n); the
            # diagonal drops out through the positive-distance mask
            dist = np.abs(r[None, start + 1:] - r[start:stop, None])
            dval = np.abs(u[None, start + 1:] - u[start:stop, None])
            mask = dist > 0
            if np.any(mask):
                best = max(best, float(np.max(dval[mask] /
                                              np.power(dist[mask], alpha))))
        return best
    assert isinstance(mesh, Grid2D)
    from scipy.stats import qmc
    xs, ys = np.meshgrid(mesh.xs, mesh.ys, indexing="ij")
    xs, ys, u = xs.ravel(), ys.ravel(), field.values.ravel()
    n = u.size
    m = max(1, math.ceil(math.log2(pairs)))
    pts = qmc.Sobol(d=4, scramble=False).random_base2(m)[:pairs]
    i = np.minimum((pts[:, 0] * n).astype(int), n - 1)
    j = np.minimum((pts[:, 1] * n).astype(int), n - 1)
    # spread the second index with the remaining dims to avoid ties
    j = (j + (pts[:, 2] * (n - 1)).astype(int) + 1) % n
    dist = np.hypot(xs[i] - xs[j], ys[i] - ys[j])
    mask = dist > 0
    if not np.any(mask):
        return 0.0
    dval = np.abs(u[i][mask] - u[j][mask])
    return float(np.max(dval / np.power(dist[mask], alpha)))


# ---------------------------------------------------------------------------
# scaled-norm boundedness sweep


def apriori_scaled_sweep(spec: ProblemSpec, mesh, grid,
                         config: Optional[SolverConfig] = None,
                         ratio_bound: float = 1.05):
    """Sweep lambda and test boundedness of lambda^{1/(p-1)} sup u.

    Returns (SweepTable, CheckVerdict); the verdict passes when every
    solve converged and the max scaled norm stays within the bound
    (default 5 percent) of the median.
    """
    table = continuation_lambda(spec, mesh, grid, config)
    scaled = table.scaled_norms()
    statuses = table.statuses()
    conv = np.array([s == STATUS_CONVERGED for s in statuses])
    if not np.any(conv):
        return table, CheckVerdict(name="scaled-bounded", ok=False,
                                   margin=-math.inf,
                                   witness={"lambda": float(table.rows[0].param)},
                                   note="no converged solves")
    med = float(np.median(scaled[conv]))
    top = float(np.max(scaled[conv]))
    ratio = top / med if med > 0 else math.inf
    ok = bool(np.all(conv)) and ratio <= ratio_bound
    if ok:
        return table, CheckVerdict(name="scaled-bounded", ok=True,
                                   margin=ratio_bound - ratio,
                                   note=f"max/median = {ratio:.6g}")
    if not np.all(conv):
        k = int(np.argmin(conv))
        wit = {"lambda": float(table.rows[k].param), "status": statuses[k]}
        note = "solve failed inside the sweep"
    else:
        k = int(np.argmax(scaled))
        wit = {"lambda": float(table.rows[k].param), "scaled_norm": float(scaled[k])}
        note = f"max/median = {ratio:.6g} exceeds {ratio_bound}"
    return table, CheckVerdict(name="scaled-bounded", ok=False,
                               margin=ratio_bound - ratio, witness=wit, note=note)


# ---------------------------------------------------------------------------
# degeneration probe


@dataclass(frozen=True)
class ProbeLevel:
    M: int
    status: str
    i_h: float
    min_outer: float


@dataclass(eq=False)
class ProbeReport:
    """Per-level outcomes of the inverse-power degeneration probe."""

    levels: list = dc_field(default_factory=list)
    verdict: bool = False
    trivial: bool = False
    growth_factor: float = 1.5

    CSV_HEADER = "level,M,status,i_h,min_outer"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for k, row in enumerate(self.levels):
            lines.append(f"{k},{row.M},{row.status},{row.i_h:.17g},"
                         f"{row.min_outer:.17g}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        from dataclasses import asdict
        return {"verdict": self.verdict, "trivial": self.trivial,
                "growth_factor": self.growth_factor,
                "levels": [asdict(r) for r in self.levels]}


def _i_h(mesh: RadialMesh, h_int: np.ndarray, u_int: np.ndarray) -> float:
    """Quadrature of |h|/u over the domain (radial)."""
    N = mesh.domain.dimension
    omega = sphere_area_constant(N)
    r = mesh.rho()
    w = np.power(r, N - 1)
    integrand = np.where(h_int != 0.0, np.abs(h_int) / np.maximum(u_int, 1e-300), 0.0)
    # trapezoid over interior nodes; h vanishes near the boundary by assumption
    return float(omega * np.trapz(integrand * w, r))


def nonexistence_probe(spec: ProblemSpec, source: SourceSpec, mesh: RadialMesh,
                       levels: int = 3,
                       config: Optional[SolverConfig] = None,
                       growth_factor: float = 1.5) -> ProbeReport:
    """Refinement probe for degeneration of the fixed-source problem.

    Runs the frozen-coefficient iteration at `levels` nested meshes and
    inspects two signatures of the continuum obstruction: outright
    non-convergence, and growth of I_h = int |h|/u under mesh halving
    (the discrete shadow of I_h = +infinity).  Each level needs one of
    the two; the report never raises on failure, failure is the data.
    """
    if levels < 1:
        raise SpecError("the probe needs at least one level")
    report = ProbeReport(growth_factor=growth_factor)
    h0 = np.asarray(eval_source(source, mesh.rho()), dtype=float)
    if float(np.max(np.abs(h0))) == 0.0:
        report.trivial = True
        return report

    config = config or SolverConfig()
    cur = mesh
    signals = []
    prev_ih = None
    omega_edge = None
    if spec.g.mu is not None and getattr(spec.g.mu, "variant", "") == "piecewise":
        omega_edge = float(spec.g.mu.omega_radius)
    for _ in range(levels):
        h_int = np.asarray(eval_source(source, cur.rho()), dtype=float)
        rep = fixed_point_solve(spec, cur, config, source=source)
        u_int = rep.field.interior
        ih = _i_h(cur, h_int, u_int)
        rho = cur.rho()
        edge = omega_edge if omega_edge else 0.5 * (rho[0] + rho[-1])
        outer = u_int[rho > edge]
        min_outer = float(np.min(outer)) if outer.size else math.nan
        report.levels.append(ProbeLevel(M=cur.M, status=rep.status, i_h=ih,
                                        min_outer=min_outer))
        failed = rep.status != STATUS_CONVERGED
        grew = prev_ih is not None and ih >= growth_factor * prev_ih
        signals.append((failed, grew))
        prev_ih = ih
        cur = cur.refine()
    # the first level has no growth history, so it only counts through
    # its status; every later level needs one of the two signals
    if len(signals) == 1:
        report.verdict = signals[0][0]
    else:
        report.verdict = all(f or g for f, g in signals[1:])
    return report
