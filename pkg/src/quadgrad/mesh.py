"""Uniform meshes, discrete fields, and the finite difference operators.

Radial problems live on the node set r_i = a + i*h, i = 0..M; the ball
keeps the center r = 0 as an unknown with the symmetric stencil
2N(u_1 - u_0)/h^2, the annulus and the outer rim are Dirichlet nodes.
The rectangle uses an interior nx-by-ny grid with a zero boundary ring.

The standalone squared-gradient field uses central differences except
at nodes adjacent to a Dirichlet boundary, where a second order
one-sided stencil pointing into the domain is used instead; solutions
have nonzero normal derivative there and the one-sided form keeps the
formal order without leaning on the boundary value.

Inside the residual, |grad u|^2 is instead the product of the forward
and backward difference quotients.  The two forms agree to second
order on smooth fields, but the product is linear in each neighboring
unknown, and that linearity is what keeps the nonlinear systems with
singular gradient coefficients solvable: solutions of those problems
leave the boundary superlinearly, and with a squared quotient the
boundary-adjacent equations lose their real roots well inside the
parameter range where the continuum problem is solvable.

Residuals and Jacobians are assembled over the unknown (interior)
nodes.  The 1-d Jacobian is tridiagonal, the 2-d one is sparse with
the five point pattern.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.sparse import coo_matrix

from .model import (DomainSpec, ProblemSpec, SourceSpec, DomainError, SpecError,
                    RADIAL_KINDS, eval_f, eval_f_prime, eval_g, eval_g_s,
                    eval_source)

MIN_RADIAL_INTERVALS = 16
MIN_GRID_INTERIOR = 8


class RadialMesh:
    """Uniform radial mesh with M intervals over [a, R]."""

    def __init__(self, domain: DomainSpec, M: int):
        if domain.kind not in RADIAL_KINDS + ("interval",):
            raise SpecError("RadialMesh needs a radial or interval domain")
        if M < MIN_RADIAL_INTERVALS:
            raise SpecError(f"radial mesh needs at least {MIN_RADIAL_INTERVALS} intervals")
        self.domain = domain
        self.M = int(M)
        a, R = domain.inner_radius, domain.outer_radius
        self.h = (R - a) / M
        self.nodes = a + self.h * np.arange(M + 1)
        self.nodes[-1] = R  # exact endpoint
        # first unknown node index: the ball center is an unknown
        self.i0 = 0 if domain.kind == "radial-ball" else 1
        self.n_unknowns = M - self.i0
        self.key = (domain.kind, domain.dimension, a, R, self.M)

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[self.i0:self.M]

    def rho(self) -> np.ndarray:
        """Distance-from-center coordinate of the unknown nodes."""
        return self.interior_nodes

    def refine(self) -> "RadialMesh":
        return RadialMesh(self.domain, 2 * self.M)

    def full(self, interior: np.ndarray) -> np.ndarray:
        out = np.zeros(self.M + 1)
        out[self.i0:self.M] = interior
        return out

    def interior_of(self, full: np.ndarray) -> np.ndarray:
        return np.asarray(full, dtype=float)[self.i0:self.M].copy()


class Grid2D:
    """Interior nx-by-ny grid on a rectangle, zero Dirichlet ring."""

    def __init__(self, domain: DomainSpec, nx: int, ny: int):
        if domain.kind != "rectangle":
            raise SpecError("Grid2D needs a rectangle domain")
        if nx < MIN_GRID_INTERIOR or ny < MIN_GRID_INTERIOR:
            raise SpecError(f"grid needs at least {MIN_GRID_INTERIOR} interior nodes per side")
        self.domain = domain
        self.nx, self.ny = int(nx), int(ny)
        Lx, Ly = domain.side_lengths
        self.hx = Lx / (nx + 1)
        self.hy = Ly / (ny + 1)
        self.xs = self.hx * np.arange(nx + 2)  # full coordinates, 0..Lx
        self.ys = self.hy * np.arange(ny + 2)
        self.n_unknowns = nx * ny
        self.key = ("rectangle", 2, Lx, Ly, self.nx, self.ny)

    def rho(self) -> np.ndarray:
        """Distance from the rectangle center at the unknown nodes (flattened)."""
        Lx, Ly = self.domain.side_lengths
        X, Y = np.meshgrid(self.xs[1:-1], self.ys[1:-1], indexing="ij")
        return np.hypot(X - Lx / 2.0, Y - Ly / 2.0).ravel()

    def refine(self) -> "Grid2D":
        return Grid2D(self.domain, 2 * self.nx + 1, 2 * self.ny + 1)

    def full(self, interior: np.ndarray) -> np.ndarray:
        out = np.zeros((self.nx + 2, self.ny + 2))
        out[1:-1, 1:-1] = np.asarray(interior).reshape(self.nx, self.ny)
        return out

    def interior_of(self, full: np.ndarray) -> np.ndarray:
        return np.asarray(full, dtype=float)[1:-1, 1:-1].ravel().copy()


def make_mesh(domain: DomainSpec, M: Optional[int] = None,
              nx: Optional[int] = None, ny: Optional[int] = None):
    if domain.kind in RADIAL_KINDS + ("interval",):
        if M is None:
            raise SpecError("radial mesh needs M")
        return RadialMesh(domain, M)
    if nx is None or ny is None:
        raise SpecError("rectangle mesh needs nx and ny")
    return Grid2D(domain, nx, ny)


@dataclass(eq=False)
class DiscreteField:
    """Values on every node of a mesh (boundary nodes included)."""

    mesh: object
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = ((self.mesh.M + 1,) if isinstance(self.mesh, RadialMesh)
                    else (self.mesh.nx + 2, self.mesh.ny + 2))
        if self.values.shape != expected:
            raise SpecError(f"field shape {self.values.shape} != mesh shape {expected}")
        if not np.all(np.isfinite(self.values)):
            raise SpecError("field values must be finite")

    @classmethod
    def from_interior(cls, mesh, interior: np.ndarray) -> "DiscreteField":
        return cls(mesh, mesh.full(np.asarray(interior, dtype=float)))

    @property
    def interior(self) -> np.ndarray:
        return self.mesh.interior_of(self.values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def interpolant(self):
        """Monotone-cubic interpolant in r (radial meshes only)."""
        if not isinstance(self.mesh, RadialMesh):
            raise SpecError("interpolant is for radial fields")
        return PchipInterpolator(self.mesh.nodes, self.values, extrapolate=False)

    def dump(self) -> str:
        """Two-column (r, u) text for radial fields, (x, y, u) CSV for grids."""
        if isinstance(self.mesh, RadialMesh):
            lines = [f"{r:.17g} {v:.17g}" for r, v in zip(self.mesh.nodes, self.values)]
            return "\n".join(lines) + "\n"
        g = self.mesh
        lines = ["x,y,u"]
        for i, x in enumerate(g.xs):
            for j, y in enumerate(g.ys):
                lines.append(f"{x:.17g},{y:.17g},{self.values[i, j]:.17g}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# radial operators


def _radial_lap_interior(mesh: RadialMesh, u: np.ndarray) -> np.ndarray:
    """Discrete Laplacian of a full node array, over the unknown nodes."""
    h, N = mesh.h, mesh.domain.dimension
    r = mesh.nodes
    i = np.arange(1, mesh.M)
    lap = ((u[i + 1] - 2.0 * u[i] + u[i - 1]) / h ** 2
           + (N - 1) / r[i] * (u[i + 1] - u[i - 1]) / (2.0 * h))
    if mesh.i0 == 0:
        center = 2.0 * N * (u[1] - u[0]) / h ** 2
        return np.concatenate(([center], lap))
    return lap


def _radial_deriv_interior(mesh: RadialMesh, u: np.ndarray) -> np.ndarray:
    """du/dr over the unknown nodes: central, one-sided next to Dirichlet
    nodes, zero at the ball center."""
    h = mesh.h
    M = mesh.M
    i = np.arange(1, M)
    du = (u[i + 1] - u[i - 1]) / (2.0 * h)
    du[-1] = (3.0 * u[M - 1] - 4.0 * u[M - 2] + u[M - 3]) / (2.0 * h)
    if mesh.i0 == 1:
        du[0] = (-3.0 * u[1] + 4.0 * u[2] - u[3]) / (2.0 * h)
        return du
    return np.concatenate(([0.0], du))


def radial_laplacian(field: DiscreteField) -> DiscreteField:
    mesh = field.mesh
    return DiscreteField.from_interior(mesh, _radial_lap_interior(mesh, field.values))


def gradient_sq(field: DiscreteField) -> DiscreteField:
    mesh = field.mesh
    if isinstance(mesh, RadialMesh):
        du = _radial_deriv_interior(mesh, field.values)
        return DiscreteField.from_interior(mesh, du * du)
    gx, gy = _grid_deriv_interior(mesh, field.values)
    return DiscreteField.from_interior(mesh, (gx * gx + gy * gy).ravel())


def _radial_updown_interior(mesh: RadialMesh, u: np.ndarray):
    """Forward and backward difference quotients over the unknown nodes.

    Their product is the |grad u|^2 discretization used in the residual:
    still second order for smooth fields, but linear in each neighbor,
    which keeps the nonlinear system solvable when the solution leaves
    the boundary at superlinear rates (the squared central or one-sided
    quotient makes the boundary-adjacent equations lose their roots for
    strong singular coefficients).  At the ball center the derivative
    vanishes by symmetry, so the product is pinned to zero there.
    """
    h = mesh.h
    i = np.arange(mesh.i0, mesh.M)
    dp = (u[i + 1] - u[i]) / h
    dm = (u[i] - u[i - 1]) / h
    if mesh.i0 == 0:
        dp[0] = 0.0
        dm[0] = 0.0
    return dp, dm


def _grid_updown_interior(g: Grid2D, u: np.ndarray):
    """Axis-wise forward/backward difference quotients at interior nodes."""
    dxp = (u[2:, 1:-1] - u[1:-1, 1:-1]) / g.hx
    dxm = (u[1:-1, 1:-1] - u[:-2, 1:-1]) / g.hx
    dyp = (u[1:-1, 2:] - u[1:-1, 1:-1]) / g.hy
    dym = (u[1:-1, 1:-1] - u[1:-1, :-2]) / g.hy
    return dxp, dxm, dyp, dym


# ---------------------------------------------------------------------------
# rectangle operators


def _grid_lap_interior(g: Grid2D, u: np.ndarray) -> np.ndarray:
    c = u[1:-1, 1:-1]
    return ((u[2:, 1:-1] - 2 * c + u[:-2, 1:-1]) / g.hx ** 2
            + (u[1:-1, 2:] - 2 * c + u[1:-1, :-2]) / g.hy ** 2)


def _axis_deriv(u: np.ndarray, h: float) -> np.ndarray:
    """d/dx along axis 0 of a full array, at interior rows 1..n."""
    d = (u[2:, :] - u[:-2, :]) / (2.0 * h)
    d[0, :] = (-3.0 * u[1, :] + 4.0 * u[2, :] - u[3, :]) / (2.0 * h)
    d[-1, :] = (3.0 * u[-2, :] - 4.0 * u[-3, :] + u[-4, :]) / (2.0 * h)
    return d


def _grid_deriv_interior(g: Grid2D, u: np.ndarray):
    gx = _axis_deriv(u, g.hx)[:, 1:-1]
    gy = _axis_deriv(u.T, g.hy)[:, 1:-1].T
    return gx, gy


# ---------------------------------------------------------------------------
# residuals


def _coef_terms(spec: ProblemSpec, rho: np.ndarray, u_int: np.ndarray,
                frozen_at: Optional[np.ndarray]):
    """Gradient-term coefficient at the unknown nodes.

    Plain form: g(x, u).  Frozen form: (v+delta)*g(x, v)/(u+delta) with v
    the freeze field; only the model delta enters the shift.
    """
    g = spec.g
    if g.variant == "zero":
        return np.zeros_like(u_int)
    if frozen_at is None:
        return np.asarray(eval_g(g, rho, u_int), dtype=float)
    v = frozen_at
    num = (v + g.delta) * np.asarray(eval_g(g, rho, v), dtype=float)
    return num / (u_int + g.delta)


def _rhs_terms(spec: ProblemSpec, u_or_v: np.ndarray) -> np.ndarray:
    rhs = spec.lam * np.asarray(eval_f(spec.f, u_or_v), dtype=float)
    if spec.t > 0:
        rhs = rhs + spec.t * np.power(u_or_v, spec.sigma_t)
    return rhs


def assemble_residual(spec: ProblemSpec, mesh, u_int: np.ndarray, *,
                      frozen_at: Optional[np.ndarray] = None,
                      source: Optional[np.ndarray] = None) -> np.ndarray:
    """Residual -Lap(u) + coef*|grad u|^2 - rhs over the unknown nodes.

    frozen_at freezes the coefficient and the reaction right side at the
    given interior field (the inner problem of the fixed point map);
    source adds a fixed right side h evaluated at the unknown nodes.
    """
    u_int = np.asarray(u_int, dtype=float)
    rho = mesh.rho()
    if isinstance(mesh, RadialMesh):
        full = mesh.full(u_int)
        lap = _radial_lap_interior(mesh, full)
        dp, dm = _radial_updown_interior(mesh, full)
        gsq = dp * dm
    else:
        full = mesh.full(u_int)
        lap = _grid_lap_interior(mesh, full).ravel()
        dxp, dxm, dyp, dym = _grid_updown_interior(mesh, full)
        gsq = (dxp * dxm + dyp * dym).ravel()
    coef = _coef_terms(spec, rho, u_int, frozen_at)
    rhs = _rhs_terms(spec, u_int if frozen_at is None else frozen_at)
    res = -lap + coef * gsq - rhs
    if source is not None:
        res = res - source
    return res


def residual_quasilinear(spec: ProblemSpec, field: DiscreteField,
                         source: Optional[SourceSpec] = None) -> DiscreteField:
    mesh = field.mesh
    src = eval_source(source, mesh.rho()) if source is not None else None
    res = assemble_residual(spec, mesh, field.interior, source=src)
    return DiscreteField.from_interior(mesh, res)


def residual_frozen(spec: ProblemSpec, field: DiscreteField, frozen: DiscreteField,
                    source: Optional[SourceSpec] = None) -> DiscreteField:
    mesh = field.mesh
    if mesh.key != frozen.mesh.key:
        raise SpecError("field and freeze field live on different meshes")
    src = eval_source(source, mesh.rho()) if source is not None else None
    res = assemble_residual(spec, mesh, field.interior,
                            frozen_at=frozen.interior, source=src)
    return DiscreteField.from_interior(mesh, res)


# ---------------------------------------------------------------------------
# Jacobians


def assemble_jacobian_1d(spec: ProblemSpec, mesh: RadialMesh, u_int: np.ndarray, *,
                         frozen_at: Optional[np.ndarray] = None):
    """Analytic Jacobian of assemble_residual, tridiagonal."""
    from .linalg import BandedMatrix

    u_int = np.asarray(u_int, dtype=float)
    n = mesh.n_unknowns
    h, N = mesh.h, mesh.domain.dimension
    rho = mesh.rho()
    kl = ku = 1
    ab = np.zeros((kl + ku + 1, n))

    # -Laplacian part
    r_int = mesh.nodes[mesh.i0:mesh.M]
    r_safe = r_int.copy()
    diag = np.full(n, 2.0 / h ** 2)
    if mesh.i0 == 0:
        r_safe[0] = 1.0
    cm = 1.0 / h ** 2 - (N - 1) / (2.0 * h * r_safe)
    cp = 1.0 / h ** 2 + (N - 1) / (2.0 * h * r_safe)
    if mesh.i0 == 0:
        diag[0] = 2.0 * N / h ** 2
        cp[0] = 2.0 * N / h ** 2
    ab[ku, :] += diag
    cols = np.arange(n)
    ab[ku + 1, cols[1:] - 1] += -cm[1:]
    ab[ku - 1, cols[:-1] + 1] += -cp[:-1]

    full = mesh.full(u_int)
    dp, dm = _radial_updown_interior(mesh, full)
    gsq = dp * dm
    coef = _coef_terms(spec, rho, u_int, frozen_at)

    # d(coef)/du_i * gsq  (diagonal)
    g = spec.g
    if g.variant != "zero":
        if frozen_at is None:
            dcoef = np.asarray(eval_g_s(g, rho, u_int), dtype=float)
        else:
            dcoef = -coef / (u_int + g.delta)
        ab[ku, :] += dcoef * gsq
        # coef * d(dp*dm)/du_j: dm/h toward the upper neighbor, -dp/h
        # toward the lower one, (dp - dm)/h on the diagonal
        ab[ku, :] += coef * (dp - dm) / h
        ab[ku - 1, cols[:-1] + 1] += (coef * dm / h)[:-1]
        ab[ku + 1, cols[1:] - 1] += (-coef * dp / h)[1:]

    # reaction terms (diagonal), absent in the frozen form
    if frozen_at is None:
        rdiag = spec.lam * np.asarray(eval_f_prime(spec.f, u_int), dtype=float)
        if spec.t > 0:
            rdiag = rdiag + spec.t * spec.sigma_t * np.power(u_int, spec.sigma_t - 1.0)
        ab[ku, :] += -rdiag

    return BandedMatrix(kl=kl, ku=ku, ab=ab)


def assemble_jacobian_2d(spec: ProblemSpec, mesh: Grid2D, u_int: np.ndarray, *,
                         frozen_at: Optional[np.ndarray] = None):
    """Analytic Jacobian on the rectangle, scipy CSR."""
    u_int = np.asarray(u_int, dtype=float)
    nx, ny, hx, hy = mesh.nx, mesh.ny, mesh.hx, mesh.hy
    n = nx * ny
    rho = mesh.rho()
    full = mesh.full(u_int)
    dxp, dxm, dyp, dym = _grid_updown_interior(mesh, full)
    coef = _coef_terms(spec, rho, u_int, frozen_at)

    rows, cols, vals = [], [], []

    def idx(i, j):  # full-array (i, j), both 1..nx / 1..ny
        return (i - 1) * ny + (j - 1)

    def add(rw, cl, v):
        rows.append(rw)
        cols.append(cl)
        vals.append(v)

    g = spec.g
    dxpf, dxmf = dxp.ravel(), dxm.ravel()
    dypf, dymf = dyp.ravel(), dym.ravel()
    if g.variant != "zero":
        if frozen_at is None:
            dcoef = np.asarray(eval_g_s(g, rho, u_int), dtype=float)
        else:
            dcoef = -coef / (u_int + g.delta)
    for i in range(1, nx + 1):
        for j in range(1, ny + 1):
            k = idx(i, j)
            add(k, k, 2.0 / hx ** 2 + 2.0 / hy ** 2)
            for ii in (i - 1, i + 1):
                if 1 <= ii <= nx:
                    add(k, idx(ii, j), -1.0 / hx ** 2)
            for jj in (j - 1, j + 1):
                if 1 <= jj <= ny:
                    add(k, idx(i, jj), -1.0 / hy ** 2)
            if g.variant == "zero":
                continue
            gsq_k = dxpf[k] * dxmf[k] + dypf[k] * dymf[k]
            add(k, k, dcoef[k] * gsq_k)
            # derivative of the forward/backward products, per axis
            add(k, k, coef[k] * ((dxpf[k] - dxmf[k]) / hx
                                 + (dypf[k] - dymf[k]) / hy))
            if i + 1 <= nx:
                add(k, idx(i + 1, j), coef[k] * dxmf[k] / hx)
            if i - 1 >= 1:
                add(k, idx(i - 1, j), -coef[k] * dxpf[k] / hx)
            if j + 1 <= ny:
                add(k, idx(i, j + 1), coef[k] * dymf[k] / hy)
            if j - 1 >= 1:
                add(k, idx(i, j - 1), -coef[k] * dypf[k] / hy)

    if frozen_at is None:
        diag = spec.lam * np.asarray(eval_f_prime(spec.f, u_int), dtype=float)
        if spec.t > 0:
            diag = diag + spec.t * spec.sigma_t * np.power(u_int, spec.sigma_t - 1.0)
        for k in range(n):
            add(k, k, -diag[k])

    return coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def assemble_jacobian(spec: ProblemSpec, mesh, u_int: np.ndarray, *,
                      frozen_at: Optional[np.ndarray] = None):
    if isinstance(mesh, RadialMesh):
        return assemble_jacobian_1d(spec, mesh, u_int, frozen_at=frozen_at)
    return assemble_jacobian_2d(spec, mesh, u_int, frozen_at=frozen_at)
