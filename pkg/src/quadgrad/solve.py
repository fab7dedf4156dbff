"""Nonlinear solvers: damped Newton, the frozen-coefficient fixed point
iteration, and parameter continuation in lambda and t.

Newton runs on the full quasilinear residual (or on the frozen inner
problem when a freeze field is supplied) with Armijo backtracking on
0.5*||F||_2^2 and a positivity floor: after every step the iterate is
clipped to eps * phi1 node-wise, phi1 the principal Dirichlet
eigenfunction.  A run that terminates with at least a configured share
of interior nodes sitting on that floor is labeled floor-degenerate, the
numerical signature of degeneration toward the excluded trivial state.

The initial iterate is c * phi1 with c picked by a 16 point logarithmic
line search on ||F||_2; small-amplitude states are poor starting points
for the superlinear reaction terms, and the line search reliably jumps
past them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .model import (ProblemSpec, SourceSpec, DomainError, TableRangeError,
                    SpecError, eval_f, eval_source)
from .mesh import RadialMesh, DiscreteField, assemble_residual, assemble_jacobian
from .linalg import (banded_solve, krylov_solve, levenberg_direction,
                     principal_eigenpair, BandedMatrix, SingularSystemError,
                     KrylovError)

STATUS_CONVERGED = "converged"
STATUS_DIVERGED = "diverged"
STATUS_MAX_ITER = "max-iterations"
STATUS_FLOOR = "floor-degenerate"


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the nonlinear solvers; defaults suit desk-scale meshes."""

    residual_rtol: float = 1e-10      # sup tolerance relative to the right-side scale
    residual_atol: float = 1e-14      # absolute floor when the right side vanishes
    step_tol: float = 1e-12           # sup norm of an accepted step / outer update
    max_newton: int = 200
    max_outer: int = 500
    relaxation: float = 1.0           # theta of the outer fixed point update
    positivity_floor: float = 1e-12   # clip iterates to this multiple of phi1
    floor_fraction: float = 0.01      # floored share that flags degeneration
    max_backtracks: int = 30
    line_search_points: int = 16
    guess_scale: Optional[float] = None  # center of the log line search
    divergence_sup: float = 1e10      # iterate explosion guard

    def __post_init__(self):
        if not (0.0 < self.relaxation <= 1.0):
            raise SpecError("relaxation must lie in (0, 1]")
        if self.positivity_floor <= 0:
            raise SpecError("positivity_floor must be positive")


@dataclass(eq=False)
class SolveReport:
    """Outcome of one nonlinear solve.

    The final iterate is always attached (diagnostics want it even on
    failure); for status converged it is the solution.  positivity_margin
    is min(u_i / phi1_i) over the interior, holder_half the sampled
    C^{0,1/2} quotient of the final field.
    """

    status: str
    field: DiscreteField
    iterations: int
    residual_sup: float
    sup_norm: float
    positivity_margin: float
    holder_half: float
    floor_share: float
    message: str = ""
    history: Optional[list] = None

    @property
    def converged(self) -> bool:
        return self.status == STATUS_CONVERGED

    def to_dict(self) -> dict:
        return {"status": self.status, "iterations": self.iterations,
                "residual_sup": self.residual_sup, "sup_norm": self.sup_norm,
                "positivity_margin": self.positivity_margin,
                "holder_half": self.holder_half, "floor_share": self.floor_share,
                "message": self.message, "history": self.history}


_EIGEN_CACHE: dict = {}


def principal_eigen_cached(mesh):
    """(lambda1, phi1 interior values), cached per mesh identity."""
    key = mesh.key
    if key not in _EIGEN_CACHE:
        pair = principal_eigenpair(mesh)
        _EIGEN_CACHE[key] = (pair.value, pair.field.interior)
    lam1, phi = _EIGEN_CACHE[key]
    return lam1, phi.copy()


def _safe_residual(spec, mesh, u, frozen_at, src):
    try:
        r = assemble_residual(spec, mesh, u, frozen_at=frozen_at, source=src)
    except (DomainError, TableRangeError):
        return None
    if not np.all(np.isfinite(r)):
        return None
    return r


def _rhs_scale(spec: ProblemSpec, base: np.ndarray, src) -> float:
    try:
        scale = spec.lam * float(np.max(np.abs(eval_f(spec.f, base))))
    except (DomainError, TableRangeError):
        scale = 0.0
    if spec.t > 0:
        scale += spec.t * float(np.max(np.power(base, spec.sigma_t)))
    if src is not None:
        scale += float(np.max(np.abs(src)))
    return scale


def _rounding_floor(mesh, u: np.ndarray) -> float:
    # the second difference quotient cannot be evaluated below
    # eps*|u|/h^2; demanding less than that spins forever at machine
    # precision, so the floor joins the convergence tolerance
    h = getattr(mesh, "h", None)
    if h is None:
        h = min(mesh.hx, mesh.hy)
    sup = float(np.max(np.abs(u))) if u.size else 0.0
    return 32.0 * np.finfo(float).eps * sup / (h * h)


def _residual_tol(spec: ProblemSpec, mesh, u: np.ndarray,
                  base: np.ndarray, src, config: SolverConfig) -> float:
    return max(config.residual_rtol * _rhs_scale(spec, base, src),
               config.residual_atol, _rounding_floor(mesh, u))


def initial_guess(spec: ProblemSpec, mesh, config: SolverConfig, *,
                  phi1: Optional[np.ndarray] = None, lam1: Optional[float] = None,
                  frozen_at: Optional[np.ndarray] = None, src=None):
    """Line-searched starting iterate c * phi1.

    Returns (interior array, c).  The search center balances the
    principal eigenvalue against the reaction scale, then 16
    logarithmically spaced candidates over three decades either side
    compete on ||F||_2 / c.  The division matters: u = 0 solves the
    homogeneous problem whenever f(0) = 0, so the raw residual norm
    always decays as c -> 0 and would steer every superlinear solve
    into the trivial branch; the amplitude-normalized residual is
    bounded away from zero there and dips at the nontrivial balance.
    """
    if phi1 is None or lam1 is None:
        lam1, phi1 = principal_eigen_cached(mesh)
    if config.guess_scale is not None:
        center = config.guess_scale
    else:
        p = spec.f.p
        if spec.lam > 0:
            center = (lam1 / spec.lam) ** (1.0 / (p - 1.0))
        elif spec.t > 0:
            center = (spec.t / lam1) ** (1.0 / (1.0 - spec.sigma_t))
        elif src is not None and np.max(np.abs(src)) > 0:
            center = float(np.max(np.abs(src))) / lam1
        else:
            center = 1.0
    cands = center * np.logspace(-3.0, 3.0, config.line_search_points)
    best_c, best_norm = None, math.inf
    for c in cands:
        r = _safe_residual(spec, mesh, c * phi1, frozen_at, src)
        if r is None:
            continue
        nrm = float(np.linalg.norm(r)) / c
        if nrm < best_norm:
            best_c, best_norm = c, nrm
    c = best_c if best_c is not None else center
    floor = config.positivity_floor * phi1
    return np.maximum(c * phi1, floor), float(c)


def _finish(mesh, u, status, iterations, res_sup, phi1, config, message=""):
    floor = config.positivity_floor * phi1
    # twice the clip level still sits twelve orders below solution scale;
    # iterates that halve their way down stall just above the exact floor
    on_floor = u <= floor * 2.0
    share = float(np.mean(on_floor))
    if share >= config.floor_fraction:
        status = STATUS_FLOOR
    fld = DiscreteField.from_interior(mesh, u)
    margin = float(np.min(u / phi1))
    if status == STATUS_CONVERGED:
        from .checks import holder_quotient
        holder = holder_quotient(fld, alpha=0.5)
    else:
        holder = math.nan
    return SolveReport(status=status, field=fld, iterations=iterations,
                       residual_sup=res_sup, sup_norm=fld.sup_norm(),
                       positivity_margin=margin, holder_half=holder,
                       floor_share=share, message=message)


# jump in the share of floored nodes above which a line-search trial is
# treated as invalid rather than accepted: u = 0 solves the homogeneous
# problem, so a wildly negative Newton direction would otherwise
# "descend" straight to the floor field and fake convergence to the
# trivial branch; keying on the jump rather than the level lets a
# genuine gradual collapse run to its floor-degenerate label
_CLIP_REJECT_SHARE = 0.25

# residual norms along a Newton path are not monotone even inside the
# convergence basin (the linearization is indefinite near a mountain
# pass solution), so when backtracking fails outright the solver walks
# up to this many speculative full Newton steps and keeps them only if
# the merit drops below its value at the point of failure
_WATCHDOG_STEPS = 4

# iterates this far below their starting amplitude are collapsing onto
# the trivial branch and cannot recover (the problem scales superlinearly)
_COLLAPSE_DROP = 1e-8

# cold-start amplitude ladder around the line-search optimum, tried in
# order until a solve converges; superlinear reactions have a trivial
# basin below the mountain pass and an explosive one far above it, and
# the convergent band between them can be narrow, so the rungs step by
# factors of sqrt(2) upward before falling back below the optimum
_COLD_LADDER = tuple(2.0 ** (k / 2.0) for k in range(7)) + (2.0 ** -0.5, 0.5)


def newton_solve(spec: ProblemSpec, mesh, config: Optional[SolverConfig] = None,
                 u0: Optional[np.ndarray] = None,
                 frozen_at: Optional[np.ndarray] = None,
                 source: Optional[SourceSpec] = None) -> SolveReport:
    """Damped Newton on the quasilinear (or frozen) residual.

    With an explicit u0 this is a single Newton run.  Without one, the
    starting amplitude comes from the line-searched eigenfunction ray,
    and a short deterministic ladder of amplitudes around that optimum
    is tried until one run converges; the first ladder report is
    returned when none does.
    """
    config = config or SolverConfig()
    lam1, phi1 = principal_eigen_cached(mesh)
    src = eval_source(source, mesh.rho()) if source is not None else None
    first = None
    if u0 is not None:
        rep = _newton_core(spec, mesh, config, np.asarray(u0, dtype=float),
                           frozen_at, src, phi1)
        if rep.converged:
            return rep
        # superlinear reactions pull starts below the mountain pass onto
        # the trivial branch; rescue with the amplitude ladder instead of
        # returning the collapse
        first = rep
    _, c_opt = initial_guess(spec, mesh, config, phi1=phi1, lam1=lam1,
                             frozen_at=frozen_at, src=src)
    for factor in _COLD_LADDER:
        rep = _newton_core(spec, mesh, config, factor * c_opt * phi1,
                           frozen_at, src, phi1)
        if rep.converged:
            return rep
        if first is None:
            first = rep
    return first


def _newton_core(spec: ProblemSpec, mesh, config: SolverConfig,
                 u0: np.ndarray, frozen_at, src, phi1) -> SolveReport:
    floor = config.positivity_floor * phi1
    u = np.maximum(u0.copy(), floor)

    F = _safe_residual(spec, mesh, u, frozen_at, src)
    if F is None:
        return _finish(mesh, u, STATUS_DIVERGED, 0, math.inf, phi1, config,
                       "residual undefined at the starting iterate")
    sup0 = max(1.0, float(np.max(u)))

    def _floor_share(w):
        return float(np.mean(w <= floor * (1.0 + 1e-6)))

    def _newton_trial(u_cur, F_cur):
        """One full undamped step from u_cur, or None if it is unusable."""
        Jw = assemble_jacobian(spec, mesh, u_cur, frozen_at=frozen_at)
        try:
            if isinstance(Jw, BandedMatrix):
                sw = banded_solve(Jw, -F_cur)
            else:
                sw = krylov_solve(Jw, -F_cur, tol=1e-12)
        except (SingularSystemError, KrylovError):
            return None
        tw = np.maximum(u_cur + sw, floor)
        if _floor_share(tw) - _floor_share(u_cur) >= _CLIP_REJECT_SHARE:
            return None
        Fw = _safe_residual(spec, mesh, tw, frozen_at, src)
        if Fw is None:
            return None
        return tw, Fw

    def _watchdog(u_cur, step0, phi_anchor):
        """Speculative full-step excursion after a line-search failure.

        The quasilinear residual is not monotone along the Newton path
        even inside the convergence basin, so the full step is taken
        anyway and the iteration gets a few undamped steps to dive back
        below the anchor merit.  The whole excursion is discarded when
        it does not."""
        tw = np.maximum(u_cur + step0, floor)
        if _floor_share(tw) - _floor_share(u_cur) >= _CLIP_REJECT_SHARE:
            return None
        Fw = _safe_residual(spec, mesh, tw, frozen_at, src)
        if Fw is None:
            return None
        for _ in range(_WATCHDOG_STEPS):
            if 0.5 * float(Fw @ Fw) <= phi_anchor * (1.0 - 2e-4):
                return tw, Fw
            if float(np.max(tw)) > config.divergence_sup * sup0:
                return None
            nxt = _newton_trial(tw, Fw)
            if nxt is None:
                return None
            tw, Fw = nxt
        if 0.5 * float(Fw @ Fw) <= phi_anchor * (1.0 - 2e-4):
            return tw, Fw
        return None

    for it in range(1, config.max_newton + 1):
        base = u if frozen_at is None else frozen_at
        tol = _residual_tol(spec, mesh, u, base, src, config)
        res_sup = float(np.max(np.abs(F)))
        if res_sup <= tol:
            return _finish(mesh, u, STATUS_CONVERGED, it - 1, res_sup, phi1, config)

        J = assemble_jacobian(spec, mesh, u, frozen_at=frozen_at)
        try:
            if isinstance(J, BandedMatrix):
                step = banded_solve(J, -F)
            else:
                step = krylov_solve(J, -F, tol=1e-12)
        except (SingularSystemError, KrylovError) as e:
            return _finish(mesh, u, STATUS_DIVERGED, it, res_sup, phi1, config,
                           f"linear solve failed: {e}")

        phi_val = 0.5 * float(F @ F)
        share_cur = _floor_share(u)
        alpha = 1.0
        accepted = False
        for _ in range(config.max_backtracks + 1):
            trial = np.maximum(u + alpha * step, floor)
            if _floor_share(trial) - share_cur >= _CLIP_REJECT_SHARE:
                alpha *= 0.5
                continue
            Ft = _safe_residual(spec, mesh, trial, frozen_at, src)
            if Ft is not None:
                phi_t = 0.5 * float(Ft @ Ft)
                if phi_t <= phi_val * (1.0 - 2e-4 * alpha):
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            wd = _watchdog(u, step, phi_val)
            if wd is not None:
                trial, Ft = wd
                accepted = True
        if not accepted and isinstance(J, BandedMatrix):
            # the singular gradient term flips the sign of the Jacobian
            # diagonal at nodes where the iterate vanishes superlinearly,
            # so near the boundary the Newton direction can blow up even
            # with the root close by; a damped least-squares direction
            # stays bounded and still descends the merit
            damping = 1e-4
            while damping <= 1e12:
                try:
                    d = levenberg_direction(J, F, damping)
                except SingularSystemError:
                    damping *= 10.0
                    continue
                trial = np.maximum(u + d, floor)
                if _floor_share(trial) - share_cur < _CLIP_REJECT_SHARE:
                    Ft = _safe_residual(spec, mesh, trial, frozen_at, src)
                    if Ft is not None and \
                            0.5 * float(Ft @ Ft) <= phi_val * (1.0 - 1e-6):
                        accepted = True
                        break
                damping *= 10.0
        if not accepted:
            return _finish(mesh, u, STATUS_DIVERGED, it, res_sup, phi1, config,
                           "line search stalled before reaching tolerance")
        moved = float(np.max(np.abs(trial - u)))
        u, F = trial, Ft
        if float(np.max(u)) < _COLLAPSE_DROP * sup0:
            # the trivial basin: report the limit itself, which is the
            # floor field, rather than a point still sliding toward it
            u = floor.copy()
            Fl = _safe_residual(spec, mesh, u, frozen_at, src)
            res = float(np.max(np.abs(Fl))) if Fl is not None else math.inf
            return _finish(mesh, u, STATUS_FLOOR, it, res, phi1, config,
                           "iterates collapsed to the positivity floor")
        if float(np.max(u)) > config.divergence_sup * sup0:
            return _finish(mesh, u, STATUS_DIVERGED, it, float(np.max(np.abs(F))),
                           phi1, config, "iterates exploded")
        if moved < config.step_tol:
            res_sup = float(np.max(np.abs(F)))
            base = u if frozen_at is None else frozen_at
            tol = _residual_tol(spec, mesh, u, base, src, config)
            if res_sup <= tol:
                return _finish(mesh, u, STATUS_CONVERGED, it, res_sup, phi1, config)
            return _finish(mesh, u, STATUS_DIVERGED, it, res_sup, phi1, config,
                           "step collapsed before reaching tolerance")

    res_sup = float(np.max(np.abs(F)))
    return _finish(mesh, u, STATUS_MAX_ITER, config.max_newton, res_sup, phi1, config)


def freeze_solve(spec: ProblemSpec, mesh, v: np.ndarray,
                 config: Optional[SolverConfig] = None,
                 source: Optional[SourceSpec] = None,
                 u0: Optional[np.ndarray] = None) -> SolveReport:
    """One application of the frozen-coefficient map: solve the inner
    problem with coefficient and right side frozen at v.  The zero field
    maps to the zero field by definition."""
    config = config or SolverConfig()
    v = np.asarray(v, dtype=float)
    if float(np.max(np.abs(v))) == 0.0 and source is None:
        zero = np.zeros_like(v)
        lam1, phi1 = principal_eigen_cached(mesh)
        return SolveReport(status=STATUS_CONVERGED,
                           field=DiscreteField.from_interior(mesh, zero),
                           iterations=0, residual_sup=0.0, sup_norm=0.0,
                           positivity_margin=0.0, holder_half=0.0,
                           floor_share=1.0, message="zero maps to zero")
    return newton_solve(spec, mesh, config, u0=v if u0 is None else u0,
                        frozen_at=v, source=source)


def fixed_point_solve(spec: ProblemSpec, mesh,
                      config: Optional[SolverConfig] = None,
                      u0: Optional[np.ndarray] = None,
                      source: Optional[SourceSpec] = None) -> SolveReport:
    """Relaxed outer iteration u <- (1-theta) u + theta K(u).

    Terminates when the outer update drops below the step tolerance and
    the unfrozen quasilinear residual confirms the limit (within ten
    times the residual tolerance).  A period-2 cycle in the iterates is
    reported as divergence with the cycle amplitude; so is an inner
    solve failure.  The report carries the outer iterate history, one
    record per iteration, for cycle and degeneration diagnostics.
    """
    config = config or SolverConfig()
    lam1, phi1 = principal_eigen_cached(mesh)
    src = eval_source(source, mesh.rho()) if source is not None else None
    if u0 is None:
        u, _ = initial_guess(spec, mesh, config, phi1=phi1, lam1=lam1, src=src)
    else:
        u = np.asarray(u0, dtype=float).copy()
    sup0 = max(1.0, float(np.max(u)))
    theta = config.relaxation
    prev = None
    hist: list = []

    def _done(rep: SolveReport) -> SolveReport:
        rep.history = hist
        return rep

    for k in range(1, config.max_outer + 1):
        inner = freeze_solve(spec, mesh, u, config, source=source)
        hist.append({"outer": k, "inner_status": inner.status,
                     "inner_iterations": inner.iterations,
                     "sup": inner.sup_norm})
        if inner.status != STATUS_CONVERGED:
            rep = _finish(mesh, inner.field.interior, inner.status, k,
                          inner.residual_sup, phi1, config,
                          f"inner solve failed at outer iteration {k}: "
                          f"{inner.status} {inner.message}".strip())
            if rep.status == STATUS_CONVERGED:  # floor relabel cannot rescue
                rep.status = STATUS_DIVERGED
            return _done(rep)
        new = (1.0 - theta) * u + theta * inner.field.interior
        step = float(np.max(np.abs(new - u)))
        hist[-1]["step"] = step
        if step < config.step_tol:
            res = _safe_residual(spec, mesh, new, None, src)
            res_sup = math.inf if res is None else float(np.max(np.abs(res)))
            tol = _residual_tol(spec, mesh, new, new, src, config)
            if res_sup <= 10.0 * tol:
                return _done(_finish(mesh, new, STATUS_CONVERGED, k, res_sup,
                                     phi1, config))
            return _done(_finish(mesh, new, STATUS_DIVERGED, k, res_sup, phi1,
                                 config,
                                 "stationary outer iterate fails the "
                                 "quasilinear residual"))
        if prev is not None:
            cycle = float(np.max(np.abs(new - prev)))
            if cycle < max(config.step_tol, 1e-9 * step) and step >= config.step_tol:
                return _done(_finish(mesh, new, STATUS_DIVERGED, k,
                                     math.inf, phi1, config,
                                     f"period-2 cycle of amplitude {step:.3e}"))
        if float(np.max(np.abs(new))) > config.divergence_sup * sup0:
            return _done(_finish(mesh, new, STATUS_DIVERGED, k, math.inf, phi1,
                                 config, "outer iterates exploded"))
        prev, u = u, new

    res = _safe_residual(spec, mesh, u, None, src)
    res_sup = math.inf if res is None else float(np.max(np.abs(res)))
    return _done(_finish(mesh, u, STATUS_MAX_ITER, config.max_outer, res_sup,
                         phi1, config))


# ---------------------------------------------------------------------------
# parameter sweeps


@dataclass(frozen=True)
class SweepRow:
    param: float
    sup_norm: float
    scaled_norm: float
    status: str
    iterations: int
    residual: float


@dataclass(eq=False)
class SweepTable:
    """Rows of a parameter sweep; serializes with a fixed CSV header."""

    kind: str                       # "lambda" or "t"
    rows: list = dc_field(default_factory=list)
    t_fail: Optional[float] = None

    CSV_HEADER = "param,sup_norm,scaled_norm,status,iterations,residual"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for r in self.rows:
            lines.append(f"{r.param:.17g},{r.sup_norm:.17g},{r.scaled_norm:.17g},"
                         f"{r.status},{r.iterations},{r.residual:.17g}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "t_fail": self.t_fail,
                "rows": [vars(r) | {} for r in self.rows]}

    def scaled_norms(self) -> np.ndarray:
        return np.array([r.scaled_norm for r in self.rows])

    def statuses(self) -> list:
        return [r.status for r in self.rows]


def _scaled_norm(lam: float, p: float, sup: float) -> float:
    if lam <= 0:
        return sup
    return lam ** (1.0 / (p - 1.0)) * sup


def _row_from_report(param: float, lam: float, p: float, rep: SolveReport) -> SweepRow:
    return SweepRow(param=param, sup_norm=rep.sup_norm,
                    scaled_norm=_scaled_norm(lam, p, rep.sup_norm),
                    status=rep.status, iterations=rep.iterations,
                    residual=rep.residual_sup)


def continuation_lambda(spec: ProblemSpec, mesh, grid,
                        config: Optional[SolverConfig] = None) -> SweepTable:
    """Solve along an ascending lambda grid, warm starting each point
    from the previous converged solution.  Failures are recorded and the
    sweep continues from a fresh line-searched guess.

    The warm start is amplitude-corrected by (lam_prev/lam)^{1/(p-1)},
    the exact covariance of the pure-power family; without it a decade
    step overshoots the Newton basin by the same factor.
    """
    config = config or SolverConfig()
    table = SweepTable(kind="lambda")
    warm = None
    warm_lam = None
    for lam in grid:
        lam = float(lam)
        spc = spec.with_lambda(lam)
        u0 = None
        if warm is not None and lam > 0 and warm_lam is not None and warm_lam > 0:
            u0 = (warm_lam / lam) ** (1.0 / (spec.f.p - 1.0)) * warm
        rep = newton_solve(spc, mesh, config, u0=u0)
        if not rep.converged and u0 is not None:
            rep = newton_solve(spc, mesh, config)
        if rep.converged:
            warm, warm_lam = rep.field.interior, lam
        table.rows.append(_row_from_report(lam, lam, spec.f.p, rep))
    return table


def continuation_t(spec: ProblemSpec, mesh, grid,
                   config: Optional[SolverConfig] = None,
                   workers: int = 1) -> SweepTable:
    """Sweep the auxiliary forcing upward from t = 0.

    Every grid value is attempted from three fresh initial guesses
    c * phi1, c in {0.1, 1, 10} times the line-search optimum; the first
    grid value where all three fail is recorded as t_fail.  The sweep
    itself continues: failure is data.

    Unlike the lambda sweep there is no warm starting, so the grid
    points are independent; workers > 1 runs them on a thread pool with
    results ordered by grid index either way.
    """
    config = config or SolverConfig()
    lam1, phi1 = principal_eigen_cached(mesh)
    table = SweepTable(kind="t")

    def attempt(t: float) -> SolveReport:
        spc = spec.with_t(t)
        _, c_opt = initial_guess(spc, mesh, config, phi1=phi1, lam1=lam1)
        best = None
        for c in (c_opt, 0.1 * c_opt, 10.0 * c_opt):
            guess = np.maximum(c * phi1, config.positivity_floor * phi1)
            rep = newton_solve(spc, mesh, config, u0=guess)
            if best is None or (rep.converged and not best.converged):
                best = rep
            if rep.converged:
                break
        return best

    ts = [float(t) for t in grid]
    if workers > 1 and len(ts) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(attempt, ts))
    else:
        reports = [attempt(t) for t in ts]
    for t, best in zip(ts, reports):
        if not best.converged and table.t_fail is None:
            table.t_fail = t
        table.rows.append(_row_from_report(t, spec.lam, spec.f.p, best))
    return table
