"""Discrete operators and assembly: exactness on quadratics, the
product-form gradient square inside the residual, scaling identities,
and finite-difference verification of both Jacobians.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadgrad import (ProblemSpec, DomainSpec, NonlinearitySpec,
                      GradientCoefSpec, make_mesh)
from quadgrad.model import MuFieldSpec, DomainError
from quadgrad.mesh import (RadialMesh, Grid2D, DiscreteField, radial_laplacian,
                           gradient_sq, assemble_residual, assemble_jacobian,
                           residual_quasilinear, residual_frozen)
from quadgrad.linalg import BandedMatrix


def _field(mesh, fn):
    r = mesh.nodes[mesh.i0:mesh.M]
    return DiscreteField.from_interior(mesh, fn(r))


def test_mesh_uniform_spacing(ball3):
    m = make_mesh(ball3, M=64)
    gaps = np.diff(m.nodes)
    assert np.all(np.abs(gaps - m.h) <= np.finfo(float).eps * 2)
    assert m.M >= 16


def test_mesh_minimum_size(ball3):
    with pytest.raises(Exception):
        make_mesh(ball3, M=8)


def test_laplacian_exact_on_quadratic(ball3):
    m = make_mesh(ball3, M=50)
    f = _field(m, lambda r: 1.0 - r ** 2)
    lap = radial_laplacian(f)
    assert np.allclose(lap.interior, -6.0, atol=1e-10 * 50 * 50)


def test_laplacian_exact_on_annulus_quadratic(annulus3):
    # quadratic vanishing at both shells; both central differences are
    # exact on quadratics, so the discrete values match the continuum
    # Laplacian -6 + 6/r node for node
    m = make_mesh(annulus3, M=50)
    r = m.nodes[m.i0:m.M]
    f = _field(m, lambda r: (r - 1.0) * (2.0 - r))
    lap = radial_laplacian(f)
    assert np.allclose(lap.interior, -6.0 + 6.0 / r, atol=1e-9 * 50 * 50)


def test_laplacian_of_constant_vanishes(ball3):
    m = make_mesh(ball3, M=40)
    u = DiscreteField.from_interior(m, np.ones(m.M - m.i0))
    # boundary is pinned to zero, so only nodes away from it see a constant
    lap = radial_laplacian(u).interior
    assert np.allclose(lap[:-1], 0.0, atol=1e-9)


def test_laplacian_center_limit_n5():
    dom = DomainSpec(kind="radial-ball", dimension=5, outer_radius=1.0)
    m = make_mesh(dom, M=40)
    f = _field(m, lambda r: r ** 2)
    lap = radial_laplacian(f)
    assert lap.interior[0] == pytest.approx(10.0, rel=1e-12)


def test_gradient_sq_linear_field(interval):
    m = make_mesh(interval, M=50)
    f = _field(m, lambda r: r)
    gsq = gradient_sq(f).interior
    # one-sided stencil at the last node sees the boundary kink
    assert np.allclose(gsq[:-1], 1.0, atol=1e-10)


def test_gradient_sq_constant_is_zero(ball3):
    m = make_mesh(ball3, M=40)
    u = DiscreteField.from_interior(m, np.full(m.M - m.i0, 3.0))
    gsq = gradient_sq(u).interior
    assert np.allclose(gsq[1:-1], 0.0, atol=1e-9)


def test_gradient_sq_quadratic_accuracy(ball3):
    errs = []
    for M in (50, 100, 200):
        m = make_mesh(ball3, M=M)
        r = m.nodes[m.i0:m.M]
        f = _field(m, lambda r: 1.0 - r ** 2)
        gsq = gradient_sq(f).interior
        errs.append(float(np.max(np.abs(gsq - 4.0 * r ** 2))))
    # exact for the central stencil on quadratics up to rounding
    assert errs[-1] <= 1e-9


def test_residual_reduces_to_laplacian(ball3):
    m = make_mesh(ball3, M=60)
    rng = np.random.default_rng(3)
    u = 0.5 + rng.random(m.M - m.i0)
    spec = ProblemSpec(domain=ball3, lam=0.0,
                       f=NonlinearitySpec(variant="pure-power", p=2.0),
                       g=GradientCoefSpec(variant="zero"))
    res = assemble_residual(spec, m, u)
    lap = radial_laplacian(DiscreteField.from_interior(m, u)).interior
    assert np.allclose(res, -lap, rtol=0, atol=1e-12)


def test_product_gradient_second_order(ball3):
    # the up/down product inside the residual must keep the scheme at
    # order two on smooth positive fields
    spec = ProblemSpec(domain=ball3, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=2.0),
                       g=GradientCoefSpec(variant="constant-over-s", sigma=0.4))
    errs = []
    for M in (100, 200, 400):
        m = make_mesh(ball3, M=M)
        r = m.nodes[m.i0:m.M]
        u = np.cos(0.5 * np.pi * r)
        du = -0.5 * np.pi * np.sin(0.5 * np.pi * r)
        d2u = -0.25 * np.pi ** 2 * np.cos(0.5 * np.pi * r)
        with np.errstate(divide="ignore", invalid="ignore"):
            lap = np.where(r > 0, d2u + 2.0 * du / r, 3.0 * d2u)
        cont = -lap + 0.4 * du ** 2 / u - u ** 2
        disc = assemble_residual(spec, m, u)
        # truncation is local, so measure it away from the boundary
        # where u stays bounded below
        mask = r <= 0.5
        errs.append(float(np.max(np.abs(disc[mask] - cont[mask]))))
    orders = [np.log2(errs[k] / errs[k + 1]) for k in range(len(errs) - 1)]
    assert min(orders) >= 1.8


def test_residual_scaling_identity(ball3):
    # for f=s^p, g=sigma/s, delta=0 the discrete operator is exactly
    # covariant: residual(lam, c*u) = c * residual(1, u) node-wise when
    # c = lam^(-1/(p-1))
    m = make_mesh(ball3, M=80)
    rng = np.random.default_rng(11)
    u = 0.2 + rng.random(m.M - m.i0)
    p, lam = 3.0, 7.3
    g = GradientCoefSpec(variant="constant-over-s", sigma=0.4)
    f = NonlinearitySpec(variant="pure-power", p=p)
    base = ProblemSpec(domain=ball3, lam=1.0, f=f, g=g)
    scaled = ProblemSpec(domain=ball3, lam=lam, f=f, g=g)
    c = lam ** (-1.0 / (p - 1.0))
    r1 = assemble_residual(base, m, u)
    r2 = assemble_residual(scaled, m, c * u)
    assert np.allclose(r2, c * r1, rtol=1e-13, atol=1e-13)


@given(sigma=st.floats(min_value=0.05, max_value=0.95),
       c=st.floats(min_value=0.05, max_value=20.0))
@settings(max_examples=60, deadline=None)
def test_residual_gradient_term_homogeneous(sigma, c):
    # the pure gradient operator (lam=0) with g=sigma/s is 1-homogeneous
    dom = DomainSpec(kind="radial-ball", dimension=3, outer_radius=1.0)
    m = make_mesh(dom, M=40)
    rng = np.random.default_rng(5)
    u = 0.3 + rng.random(m.M - m.i0)
    spec = ProblemSpec(domain=dom, lam=0.0,
                       f=NonlinearitySpec(variant="pure-power", p=2.0),
                       g=GradientCoefSpec(variant="constant-over-s", sigma=sigma))
    r1 = assemble_residual(spec, m, u)
    r2 = assemble_residual(spec, m, c * u)
    assert np.allclose(r2, c * r1, rtol=1e-12, atol=1e-12)


def test_frozen_residual_linear_in_u(ball3):
    # freezing the coefficient at v makes the u-dependence affine up to
    # the product gradient, which is quadratic; superposition in the
    # Laplacian part still holds exactly for g=0
    m = make_mesh(ball3, M=40)
    rng = np.random.default_rng(17)
    v = 0.5 + rng.random(m.M - m.i0)
    spec = ProblemSpec(domain=ball3, lam=2.0,
                       f=NonlinearitySpec(variant="pure-power", p=3.0),
                       g=GradientCoefSpec(variant="zero"))
    u1 = 0.1 + rng.random(m.M - m.i0)
    u2 = 0.1 + rng.random(m.M - m.i0)
    f1 = assemble_residual(spec, m, u1, frozen_at=v)
    f2 = assemble_residual(spec, m, u2, frozen_at=v)
    f12 = assemble_residual(spec, m, u1 + u2, frozen_at=v)
    rhs = assemble_residual(spec, m, np.zeros_like(v), frozen_at=v)
    assert np.allclose(f12, f1 + f2 - rhs, rtol=1e-11, atol=1e-11)


def test_jacobian_1d_is_tridiagonal(ball3):
    m = make_mesh(ball3, M=50)
    rng = np.random.default_rng(23)
    u = 0.5 + rng.random(m.M - m.i0)
    mu = MuFieldSpec(variant="constant", value=0.4)
    spec = ProblemSpec(domain=ball3, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=3.0),
                       g=GradientCoefSpec(variant="model-singular", gamma=1.0,
                                          delta=0.5, mu=mu))
    J = assemble_jacobian(spec, m, u)
    assert isinstance(J, BandedMatrix)
    assert J.kl == 1 and J.ku == 1


@pytest.mark.parametrize("gspec", [
    GradientCoefSpec(variant="zero"),
    GradientCoefSpec(variant="constant-over-s", sigma=0.4),
    GradientCoefSpec(variant="model-singular", gamma=1.0, delta=0.5,
                     mu=MuFieldSpec(variant="constant", value=0.4)),
])
def test_jacobian_matches_finite_difference(ball3, gspec):
    m = make_mesh(ball3, M=40)
    rng = np.random.default_rng(31)
    spec = ProblemSpec(domain=ball3, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=2.0), g=gspec)
    eps = 1e-7
    for _ in range(6):
        u = 0.5 + rng.random(m.M - m.i0)
        d = rng.standard_normal(m.M - m.i0)
        F0 = assemble_residual(spec, m, u)
        F1 = assemble_residual(spec, m, u + eps * d)
        Jd = assemble_jacobian(spec, m, u).matvec(d)
        err = np.max(np.abs((F1 - F0) / eps - Jd))
        assert err / max(1.0, np.max(np.abs(Jd))) <= 1e-6


def test_jacobian_frozen_matches_finite_difference(ball3):
    m = make_mesh(ball3, M=40)
    rng = np.random.default_rng(37)
    mu = MuFieldSpec(variant="constant", value=0.4)
    spec = ProblemSpec(domain=ball3, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=3.0),
                       g=GradientCoefSpec(variant="model-singular", gamma=1.0,
                                          delta=0.0, mu=mu))
    v = 0.5 + rng.random(m.M - m.i0)
    u = 0.5 + rng.random(m.M - m.i0)
    d = rng.standard_normal(m.M - m.i0)
    eps = 1e-7
    F0 = assemble_residual(spec, m, u, frozen_at=v)
    F1 = assemble_residual(spec, m, u + eps * d, frozen_at=v)
    Jd = assemble_jacobian(spec, m, u, frozen_at=v).matvec(d)
    assert np.max(np.abs((F1 - F0) / eps - Jd)) <= 1e-6 * max(1.0, np.max(np.abs(Jd)))


def test_grid2d_five_point_pattern():
    dom = DomainSpec(kind="rectangle", dimension=2, side_lengths=(1.0, 1.0))
    m = make_mesh(dom, nx=12, ny=12)
    assert isinstance(m, Grid2D)
    rng = np.random.default_rng(41)
    n = m.nx * m.ny
    u = 0.5 + rng.random(n)
    spec = ProblemSpec(domain=dom, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=2.0),
                       g=GradientCoefSpec(variant="constant-over-s", sigma=0.3))
    J = assemble_jacobian(spec, m, u)
    # touching a single node can move residuals only at itself and its
    # four axis neighbors
    k = (m.ny * (m.nx // 2)) + m.ny // 2
    e = np.zeros(n)
    e[k] = 1.0
    col = J @ e
    touched = set(np.nonzero(np.abs(col) > 0)[0])
    allowed = {k, k - 1, k + 1, k - m.ny, k + m.ny}
    assert touched <= allowed


def test_jacobian_2d_matches_finite_difference():
    dom = DomainSpec(kind="rectangle", dimension=2, side_lengths=(1.0, 1.5))
    m = make_mesh(dom, nx=10, ny=9)
    rng = np.random.default_rng(43)
    n = m.nx * m.ny
    spec = ProblemSpec(domain=dom, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=2.0),
                       g=GradientCoefSpec(variant="constant-over-s", sigma=0.4))
    u = 0.5 + rng.random(n)
    d = rng.standard_normal(n)
    eps = 1e-7
    F0 = assemble_residual(spec, m, u)
    F1 = assemble_residual(spec, m, u + eps * d)
    Jd = assemble_jacobian(spec, m, u) @ d
    assert np.max(np.abs((F1 - F0) / eps - Jd)) <= 1e-6 * max(1.0, np.max(np.abs(Jd)))


def test_discrete_field_boundary_zero(ball3):
    m = make_mesh(ball3, M=30)
    u = DiscreteField.from_interior(m, np.ones(m.M - m.i0))
    assert u.values[-1] == 0.0
    assert u.sup_norm() == 1.0


def test_discrete_field_dump_round_trip(ball3):
    m = make_mesh(ball3, M=24)
    r = m.nodes[m.i0:m.M]
    u = DiscreteField.from_interior(m, np.sin(np.pi * r) + 1.0)
    text = u.dump()
    rows = np.loadtxt(text.splitlines())
    assert rows.shape[1] == 2
    assert np.allclose(rows[:, 0], m.nodes)
    assert np.allclose(rows[m.i0:m.M, 1], u.interior)


def test_field_mesh_mismatch_raises(ball3):
    m1 = make_mesh(ball3, M=30)
    with pytest.raises(Exception):
        DiscreteField.from_interior(m1, np.ones(7))


def test_residual_quasilinear_wrapper(ball3):
    m = make_mesh(ball3, M=40)
    rng = np.random.default_rng(47)
    u = 0.5 + rng.random(m.M - m.i0)
    spec = ProblemSpec(domain=ball3, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=3.0),
                       g=GradientCoefSpec(variant="constant-over-s", sigma=0.3))
    fld = DiscreteField.from_interior(m, u)
    res = residual_quasilinear(spec, fld)
    assert np.allclose(res.interior, assemble_residual(spec, m, u))


def test_residual_frozen_formula(ball3):
    # frozen coefficient is (v+delta)*g(v)/(u+delta) and the reaction
    # side is evaluated at the freeze field, not at u
    m = make_mesh(ball3, M=40)
    mu = MuFieldSpec(variant="constant", value=0.5)
    spec = ProblemSpec(domain=ball3, lam=0.0,
                       f=NonlinearitySpec(variant="pure-power", p=3.0),
                       g=GradientCoefSpec(variant="model-singular", gamma=1.0,
                                          delta=0.5, mu=mu))
    rng = np.random.default_rng(53)
    u = 0.5 + rng.random(m.M - m.i0)
    v = np.zeros_like(u)
    res = assemble_residual(spec, m, u, frozen_at=v)
    fld = DiscreteField.from_interior(m, u)
    lap = radial_laplacian(fld).interior
    gsq_prod = assemble_residual(
        ProblemSpec(domain=ball3, lam=0.0,
                    f=NonlinearitySpec(variant="pure-power", p=2.0),
                    g=GradientCoefSpec(variant="constant-over-s", sigma=1.0)),
        m, u) + lap
    # g(0) = mu/delta^gamma = 1, so the factor is 0.5/(u+0.5) and the
    # product-form gradient is u * (sigma/u form above)
    want = -lap + (0.5 / (u + 0.5)) * (gsq_prod * u)
    assert np.allclose(res, want, rtol=1e-12, atol=1e-12)


def test_residual_frozen_refuses_zero_for_singular_g(ball3):
    m = make_mesh(ball3, M=40)
    mu = MuFieldSpec(variant="constant", value=0.5)
    spec = ProblemSpec(domain=ball3, lam=0.0,
                       f=NonlinearitySpec(variant="pure-power", p=3.0),
                       g=GradientCoefSpec(variant="model-singular", gamma=1.0,
                                          delta=0.0, mu=mu))
    u = np.full(m.M - m.i0, 0.7)
    with pytest.raises(DomainError):
        assemble_residual(spec, m, u, frozen_at=np.zeros_like(u))
