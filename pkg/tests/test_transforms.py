"""Changes of unknown: the scalar kernel map, the semilinear rewrite,
the strong-singularity rewrite, truncations, and the blow-up window.
Closed forms at gamma = 1 serve as oracles for the quadrature path.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadgrad import (ProblemSpec, DomainSpec, NonlinearitySpec,
                      GradientCoefSpec, make_mesh)
from quadgrad.model import MuFieldSpec, SpecError, DomainError, eval_f, two_star
from quadgrad.mesh import DiscreteField, assemble_residual
from quadgrad.solve import newton_solve
from quadgrad.transforms import (adaptive_simpson, psi_forward, psi_inverse,
                                 psi_derivative, semilinearize,
                                 power_transform_check, gamma_transform,
                                 truncate_at_s0, truncate_at_delta,
                                 blowup_rescale)


def test_simpson_exact_on_cubic():
    val = adaptive_simpson(lambda x: x ** 3 - 2 * x, 0.0, 2.0)
    assert val == pytest.approx(4.0 - 4.0, abs=1e-13)


def test_simpson_smooth_oracle():
    val = adaptive_simpson(math.exp, 0.0, 1.0, tol=1e-13)
    assert val == pytest.approx(math.e - 1.0, abs=1e-12)


def test_psi_closed_form_value():
    # gamma=1, delta=1, mu=1/2: psi(s) = 2 (sqrt(s+1) - 1), so psi(3)=2
    assert psi_forward(0.5, 1.0, 1.0, 3.0) == pytest.approx(2.0, abs=1e-14)
    assert psi_inverse(0.5, 1.0, 1.0, 2.0) == pytest.approx(3.0, abs=1e-12)


def test_psi_mu_zero_is_identity():
    s = np.linspace(0.0, 5.0, 11)
    assert np.array_equal(psi_forward(0.0, 0.0, 1.0, s), s)
    assert np.array_equal(psi_inverse(0.0, 0.0, 1.0, s), s)
    assert np.all(psi_derivative(0.0, 0.0, 1.0, s) == 1.0)


def test_psi_derivative_is_exp_kernel():
    # gamma=1, delta=0, anchor=1: psi'(s) = s^-mu
    s = np.array([0.25, 1.0, 4.0])
    got = psi_derivative(0.5, 0.0, 1.0, s, anchor=1.0)
    assert np.allclose(got, s ** -0.5, rtol=1e-13)


@given(mu=st.floats(min_value=0.05, max_value=0.95),
       delta=st.floats(min_value=0.0, max_value=2.0),
       gamma=st.floats(min_value=0.5, max_value=3.0),
       s=st.floats(min_value=0.0, max_value=50.0))
@settings(max_examples=80, deadline=None)
def test_psi_round_trip(mu, delta, gamma, s):
    if delta == 0.0 and gamma > 1.0:
        return  # no change of unknown exists there
    anchor = 1.0 if (delta == 0.0 and gamma >= 1.0) else 0.0
    y = psi_forward(mu, delta, gamma, s, anchor=anchor)
    back = psi_inverse(mu, delta, gamma, y, anchor=anchor)
    # the inverse closes in value space unconditionally; in argument
    # space only where the derivative has not collapsed (the map can be
    # flat to machine precision when the kernel mass is large)
    y2 = psi_forward(mu, delta, gamma, back, anchor=anchor)
    assert y2 == pytest.approx(y, rel=1e-9, abs=1e-12)
    der = psi_derivative(mu, delta, gamma, max(s, back), anchor=anchor)
    if der >= 1e-5:
        assert back == pytest.approx(s, rel=1e-7, abs=1e-7)


def test_psi_quadrature_matches_closed_form():
    # run the gamma != 1 quadrature branch at gamma very close to 1 and
    # compare with the exact gamma = 1 values
    s = np.linspace(0.0, 8.0, 9)
    exact = psi_forward(0.4, 0.7, 1.0, s)
    near = psi_forward(0.4, 0.7, 1.0 + 1e-12, s)
    assert np.allclose(near, exact, rtol=1e-8, atol=1e-10)


def test_psi_guard_rejects_divergent_kernels():
    with pytest.raises(DomainError):
        psi_forward(1.0, 0.0, 1.0, 2.0, anchor=1.0)   # mu >= 1, delta = 0
    with pytest.raises(DomainError):
        psi_forward(0.5, 0.0, 2.0, 2.0, anchor=1.0)   # gamma > 1, delta = 0
    with pytest.raises(DomainError):
        psi_forward(0.5, 0.0, 1.0, 2.0, anchor=0.0)   # anchor needed


def test_semilinearize_exponent_map(ball3):
    mu = MuFieldSpec(variant="constant", value=0.5)
    spec = ProblemSpec(domain=ball3, lam=4.0,
                       f=NonlinearitySpec(variant="pure-power", p=3.0),
                       g=GradientCoefSpec(variant="model-singular", gamma=1.0,
                                          delta=0.0, mu=mu))
    tr = semilinearize(spec)
    assert tr.problem.g.variant == "zero"
    assert tr.problem.lam == 1.0
    assert tr.metadata["p_effective"] == pytest.approx((3.0 - 0.5) / 0.5)
    # composed reaction phi(v) = psi'(s) lam s^p at s = psi^{-1}(v)
    for v in (0.3, 1.0, 2.5):
        s = tr.inverse(v)
        want = psi_derivative(0.5, 0.0, 1.0, s, anchor=1.0) * 4.0 * s ** 3
        assert eval_f(tr.problem.f, v) == pytest.approx(want, rel=1e-10)


def test_semilinearize_round_trip_error(ball3):
    mu = MuFieldSpec(variant="constant", value=0.4)
    spec = ProblemSpec(domain=ball3, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=2.0),
                       g=GradientCoefSpec(variant="model-singular", gamma=1.0,
                                          delta=0.5, mu=mu))
    tr = semilinearize(spec)
    assert tr.roundtrip_error(np.linspace(0.0, 10.0, 101)) <= 1e-12


def test_semilinearize_solution_transport(ball3):
    # solving the rewritten problem and mapping back must agree with the
    # direct quasilinear solution to discretization accuracy
    mu = MuFieldSpec(variant="constant", value=0.4)
    spec = ProblemSpec(domain=ball3, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=2.0),
                       g=GradientCoefSpec(variant="model-singular", gamma=1.0,
                                          delta=0.5, mu=mu))
    tr = semilinearize(spec)
    errs = []
    for M in (100, 200):
        m = make_mesh(ball3, M=M)
        direct = newton_solve(spec, m)
        lifted = newton_solve(tr.problem, m)
        assert direct.converged and lifted.converged
        back = tr.unmap_field(lifted.field)
        errs.append(float(np.max(np.abs(back.values - direct.field.values))))
    assert errs[1] <= errs[0] / 3.0
    assert errs[1] <= 1e-4


def test_semilinearize_quadrature_branch_table(ball3):
    # gamma < 1 has no closed form; the dense-table reaction must agree
    # with direct evaluation of psi' lam f at mapped points
    mu = MuFieldSpec(variant="constant", value=0.5)
    spec = ProblemSpec(domain=ball3, lam=2.0,
                       f=NonlinearitySpec(variant="pure-power", p=2.0),
                       g=GradientCoefSpec(variant="model-singular", gamma=0.5,
                                          delta=0.0, mu=mu))
    tr = semilinearize(spec)
    assert tr.problem.f.variant == "table"
    for s in (0.1, 1.0, 3.0):
        v = tr.forward(s)
        want = psi_derivative(0.5, 0.0, 0.5, s) * 2.0 * s ** 2
        assert eval_f(tr.problem.f, v) == pytest.approx(want, rel=1e-6)


def test_semilinearize_rejections(ball3):
    f = NonlinearitySpec(variant="pure-power", p=2.0)
    gc = GradientCoefSpec(variant="constant-over-s", sigma=0.4)
    with pytest.raises(SpecError):
        semilinearize(ProblemSpec(domain=ball3, lam=1.0, f=f, g=gc,
                                  t=0.5, sigma_t=0.4))
    with pytest.raises(SpecError):
        semilinearize(ProblemSpec(domain=ball3, lam=0.0, f=f, g=gc))
    varying = MuFieldSpec(variant="piecewise", mu_in=0.3, mu_out=0.6,
                          omega_radius=0.5)
    with pytest.raises(SpecError):
        semilinearize(ProblemSpec(
            domain=ball3, lam=1.0, f=f,
            g=GradientCoefSpec(variant="model-singular", gamma=1.0,
                               delta=0.0, mu=varying)))
    one = MuFieldSpec(variant="constant", value=1.0)
    with pytest.raises(DomainError):
        semilinearize(ProblemSpec(
            domain=ball3, lam=1.0, f=f,
            g=GradientCoefSpec(variant="model-singular", gamma=1.0,
                               delta=0.0, mu=one)))


def test_power_check_threshold_flag(ball3):
    m = make_mesh(ball3, M=60)
    r = m.nodes[m.i0:m.M]
    field = DiscreteField.from_interior(m, 1.0 - r ** 2)
    p = 3.0
    ts = two_star(3)
    sigma1 = (ts - 1.0 - p) / (ts - 2.0)
    below = power_transform_check(field, sigma1 - 1e-3, 1.0, p)
    above = power_transform_check(field, sigma1 + 1e-3, 1.0, p)
    at = power_transform_check(field, sigma1, 1.0, p)
    assert not below.supercritical
    assert above.supercritical
    assert at.supercritical
    assert below.sigma1 == pytest.approx(sigma1)
    assert above.exponent > ts - 1.0 > below.exponent


def test_power_check_defect_vanishes_on_solution(ball3):
    # for the gamma=1 delta=0 model the substitution v = c u^(1-mu) is
    # exact in the continuum, so the defect must shrink like h^2
    mu0 = 0.3
    mu = MuFieldSpec(variant="constant", value=mu0)
    spec = ProblemSpec(domain=ball3, lam=2.0,
                       f=NonlinearitySpec(variant="pure-power", p=2.0),
                       g=GradientCoefSpec(variant="model-singular", gamma=1.0,
                                          delta=0.0, mu=mu))
    defects = []
    for M in (100, 200):
        rep = newton_solve(spec, make_mesh(ball3, M=M))
        assert rep.converged
        defects.append(power_transform_check(rep.field, mu0, 2.0, 2.0).defect_sup)
    assert defects[1] <= defects[0] / 3.0


def test_power_check_rejections(ball3):
    m = make_mesh(ball3, M=40)
    r = m.nodes[m.i0:m.M]
    field = DiscreteField.from_interior(m, 1.0 - r ** 2)
    with pytest.raises(SpecError):
        power_transform_check(field, 1.0, 1.0, 2.0)
    with pytest.raises(SpecError):
        power_transform_check(field, 0.3, 0.0, 2.0)
    with pytest.raises(SpecError):
        power_transform_check(field, 0.3, 1.0, 1.0)


def test_gamma_transform_exponent_and_map(ball3):
    gamma, delta, p = 2.0, 0.5, 3.0
    mu = MuFieldSpec(variant="constant", value=0.2)
    spec = ProblemSpec(domain=ball3, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=p),
                       g=GradientCoefSpec(variant="model-singular", gamma=gamma,
                                          delta=delta, mu=mu))
    tr = gamma_transform(spec)
    assert tr.metadata["p_gamma"] == pytest.approx((gamma - 1.0 + p) / gamma)
    u = np.array([0.0, 0.3, 1.7])
    v = tr.forward(u)
    assert np.allclose(v, (u + delta) ** gamma - delta ** gamma, rtol=1e-13)
    assert np.allclose(tr.inverse(v), u, atol=1e-10)
    # the normalized reaction dominates the power with its growth label
    vs = np.geomspace(1e-3, 1e3, 50)
    fv = np.asarray(eval_f(tr.problem.f, vs), dtype=float)
    assert np.all(fv >= vs ** tr.metadata["p_gamma"] * (1.0 - 1e-9))


def test_gamma_transform_residual_transport(ball3):
    # a converged solution of the original problem, pushed through the
    # map, nearly solves the rewritten problem; the defect is O(h^2)
    gamma, delta = 2.0, 0.5
    mu = MuFieldSpec(variant="constant", value=0.2)
    spec = ProblemSpec(domain=ball3, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=3.0),
                       g=GradientCoefSpec(variant="model-singular", gamma=gamma,
                                          delta=delta, mu=mu))
    tr = gamma_transform(spec)
    defects = []
    for M in (100, 200):
        m = make_mesh(ball3, M=M)
        rep = newton_solve(spec, m)
        assert rep.converged
        v = tr.forward(rep.field.interior)
        res = assemble_residual(tr.problem, m, v)
        defects.append(float(np.max(np.abs(res))))
    assert defects[1] <= defects[0] / 3.0


def test_gamma_transform_rejections(ball3):
    f = NonlinearitySpec(variant="pure-power", p=2.0)
    mu = MuFieldSpec(variant="constant", value=0.2)
    flat = ProblemSpec(domain=ball3, lam=1.0, f=f,
                       g=GradientCoefSpec(variant="constant-over-s", sigma=0.4))
    with pytest.raises(SpecError):
        gamma_transform(flat)
    weak = ProblemSpec(domain=ball3, lam=1.0, f=f,
                       g=GradientCoefSpec(variant="model-singular", gamma=1.0,
                                          delta=0.5, mu=mu))
    with pytest.raises(SpecError):
        gamma_transform(weak)
    forced = ProblemSpec(domain=ball3, lam=1.0, f=f,
                         g=GradientCoefSpec(variant="model-singular", gamma=2.0,
                                            delta=0.5, mu=mu),
                         t=1.0, sigma_t=0.4)
    with pytest.raises(SpecError):
        gamma_transform(forced)


def test_truncate_above_keeps_small_solutions(ball3):
    from quadgrad.model import eval_g
    mu = MuFieldSpec(variant="constant", value=0.3)
    spec = ProblemSpec(domain=ball3, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=2.0),
                       g=GradientCoefSpec(variant="model-singular", gamma=2.0,
                                          delta=0.5, mu=mu))
    s0 = 0.5
    tr = truncate_at_s0(spec, s0)
    assert tr.metadata["g_changed"]
    assert not tr.metadata["f_changed"]
    rho = np.zeros(3)
    below = np.array([0.05, 0.2, 0.4])
    orig = np.asarray(eval_g(spec.g, rho, below))
    trunc = np.asarray(eval_g(tr.problem.g, rho, below))
    assert np.allclose(trunc, orig, rtol=1e-4)
    # beyond s0 the tail is the scale-matched 1/s decay
    above = np.array([1.0, 4.0, 20.0])
    g0 = float(np.asarray(eval_g(spec.g, np.zeros(1), np.array([s0]))))
    want = s0 * g0 / above
    got = np.asarray(eval_g(tr.problem.g, rho, above))
    assert np.allclose(got, want, rtol=1e-4)


def test_truncate_above_identity_map_and_guards(ball3):
    spec = ProblemSpec(domain=ball3, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=2.0),
                       g=GradientCoefSpec(variant="constant-over-s", sigma=0.4))
    tr = truncate_at_s0(spec, 0.5)
    x = np.linspace(0, 3, 7)
    assert np.array_equal(tr.forward(x), x)
    assert tr.problem.g is spec.g  # already in tail form
    with pytest.raises(SpecError):
        truncate_at_s0(spec, 1.5)
    with pytest.raises(SpecError):
        truncate_at_s0(spec, 0.0)


def test_truncate_tail_only_touches_g(ball3):
    mu = MuFieldSpec(variant="constant", value=0.3)
    spec = ProblemSpec(domain=ball3, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=3.0),
                       g=GradientCoefSpec(variant="model-singular", gamma=2.0,
                                          delta=0.5, mu=mu))
    tr = truncate_at_delta(spec, 2.0)
    assert tr.problem.f is spec.f
    assert tr.metadata["g_changed"]
    with pytest.raises(SpecError):
        truncate_at_delta(spec, 0.0)


def test_blowup_profile_normalization(ball3):
    m = make_mesh(ball3, M=200)
    spec = ProblemSpec(domain=ball3, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=3.0),
                       g=GradientCoefSpec(variant="zero"))
    rep = newton_solve(spec, m)
    prof = blowup_rescale(rep.field, 3.0)
    assert prof.values[np.searchsorted(prof.y, 0.0)] == pytest.approx(1.0)
    assert prof.eta == pytest.approx(rep.sup_norm ** -1.0, rel=1e-12)
    assert prof.sup_difference(prof) == 0.0
    assert np.max(prof.values) <= 1.0 + 1e-12


def test_blowup_profiles_converge_under_lambda(ball3):
    # along the scaling family the normalized profiles at different
    # lambda coincide exactly up to mesh error
    m = make_mesh(ball3, M=300)
    f = NonlinearitySpec(variant="pure-power", p=3.0)
    g = GradientCoefSpec(variant="zero")
    rep1 = newton_solve(ProblemSpec(domain=ball3, lam=1.0, f=f, g=g), m)
    rep2 = newton_solve(ProblemSpec(domain=ball3, lam=16.0, f=f, g=g), m)
    p1 = blowup_rescale(rep1.field, 3.0, window=2.0)
    p2 = blowup_rescale(rep2.field, 3.0, window=2.0)
    assert p1.sup_difference(p2) <= 5e-4


def test_blowup_rejections(ball3):
    m = make_mesh(ball3, M=50)
    r = m.nodes[m.i0:m.M]
    field = DiscreteField.from_interior(m, 1.0 - r ** 2)
    with pytest.raises(SpecError):
        blowup_rescale(field, 1.0)
    zero = DiscreteField.from_interior(m, np.zeros(m.M - m.i0))
    with pytest.raises(SpecError):
        blowup_rescale(zero, 2.0)
