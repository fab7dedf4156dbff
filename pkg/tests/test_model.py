"""Problem descriptions: critical thresholds, coefficient evaluation,
declared-condition validation, and the JSON round trip.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadgrad import (ProblemSpec, DomainSpec, NonlinearitySpec,
                      GradientCoefSpec, SourceSpec, SpecError)
from quadgrad.model import (two_star, thresholds, validate_spec, eval_f,
                            eval_f_prime, eval_g, eval_g_s, eval_sg,
                            MuFieldSpec, TableFunction)


def test_two_star_low_dimensions():
    assert two_star(3) == 6.0
    assert two_star(4) == 4.0
    assert two_star(6) == 3.0


def test_two_star_rejects_bad_dimension():
    with pytest.raises(SpecError):
        two_star(2)
    with pytest.raises(SpecError):
        two_star(3.5)


def test_thresholds_n3_p3():
    t = thresholds(3, 3.0)
    assert t.sigma1 == pytest.approx(0.5, abs=1e-15)
    assert t.sigma2 == pytest.approx(0.0, abs=1e-15)
    assert t.sigma3 == pytest.approx(-1.0, abs=1e-15)


def test_thresholds_n4_p2():
    t = thresholds(4, 2.0)
    assert t.sigma1 == pytest.approx(0.5, abs=1e-15)
    assert t.sigma2 == pytest.approx(0.0, abs=1e-15)
    assert t.sigma3 == pytest.approx(-0.5, abs=1e-15)


def test_thresholds_reject_supercritical_p():
    with pytest.raises(SpecError):
        thresholds(3, 6.0)


@given(N=st.integers(min_value=3, max_value=10),
       frac=st.floats(min_value=1e-6, max_value=1.0 - 1e-6))
@settings(max_examples=300, deadline=None)
def test_threshold_ordering_property(N, frac):
    # p anywhere strictly inside (1, 2*-1)
    p = 1.0 + frac * (two_star(N) - 2.0)
    t = thresholds(N, p)
    assert t.sigma3 < t.sigma2 < t.sigma1 < 1.0


def test_eval_f_pure_power():
    f = NonlinearitySpec(variant="pure-power", p=3.0)
    assert eval_f(f, 2.0) == 8.0
    assert eval_f_prime(f, 2.0) == 12.0


def test_eval_g_constant_over_s():
    g = GradientCoefSpec(variant="constant-over-s", sigma=0.4)
    assert eval_g(g, 0.3, 10.0) == pytest.approx(0.04, rel=1e-15)
    assert eval_sg(g, 0.3, 10.0) == pytest.approx(0.4, rel=1e-15)


def test_eval_g_model_singular_matches_formula():
    mu = MuFieldSpec(variant="constant", value=0.5)
    g = GradientCoefSpec(variant="model-singular", gamma=1.5, delta=0.25, mu=mu)
    s = np.array([0.1, 1.0, 7.0])
    want = 0.5 / (s + 0.25) ** 1.5
    assert np.allclose(eval_g(g, 0.0, s), want, rtol=1e-14)
    # analytic s-derivative against a centered difference
    eps = 1e-6
    fd = (eval_g(g, 0.0, s + eps) - eval_g(g, 0.0, s - eps)) / (2 * eps)
    assert np.allclose(eval_g_s(g, 0.0, s), fd, rtol=1e-7)


def test_eval_sg_zero_variant():
    g = GradientCoefSpec(variant="zero")
    s = np.linspace(0.01, 5.0, 11)
    assert np.all(eval_g(g, 0.5, s) == 0.0)
    assert np.all(eval_sg(g, 0.5, s) == 0.0)


def test_mu_field_piecewise():
    mu = MuFieldSpec(variant="piecewise", mu_in=0.2, tau_out=2.0,
                     omega_radius=0.5)
    from quadgrad.model import eval_mu
    rho = np.array([0.1, 0.49, 0.51, 0.9])
    vals = eval_mu(mu, rho)
    assert np.allclose(vals, [0.2, 0.2, 2.0, 2.0])


def test_table_function_shape_preserving():
    s = np.linspace(0.0, 4.0, 9)
    tf = TableFunction(s, s ** 2)
    # monotone data must stay monotone between knots
    q = np.linspace(0.0, 4.0, 101)
    v = tf(q)
    assert np.all(np.diff(v) >= -1e-14)
    with pytest.raises(Exception):
        tf(5.0)


def test_validate_spec_g_star_smallness(ball3):
    # the constant-over-s coefficient at sigma=0.3 sits inside the window
    g = GradientCoefSpec(variant="constant-over-s", sigma=0.3, tau=0.3,
                         declared=("g_star",))
    spec = ProblemSpec(domain=ball3, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=3.0), g=g)
    rep = validate_spec(spec)
    byname = {c.name: c for c in rep.checks}
    assert byname["g_star"].ok
    # 2*0.3 - 1 = -0.4 < 0.3, so the arithmetic window has margin 0.7
    assert byname["g_star"].margin >= 0.0


def test_validate_spec_bounded_quotient(ball3):
    mu = MuFieldSpec(variant="constant", value=0.6)
    g = GradientCoefSpec(variant="model-singular", gamma=1.0, delta=1.0,
                         mu=mu, sigma=0.6, tau=0.2, declared=("g_star",))
    spec = ProblemSpec(domain=ball3, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=3.0), g=g)
    rep = validate_spec(spec)
    byname = {c.name: c for c in rep.checks}
    # (s+1)*0.6/(s+1) = 0.6 exactly: inside [0.2, 0.6] everywhere
    assert byname["g_star"].ok


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
def test_validate_spec_catches_false_growth_claim(ball3):
    # s*exp(-s) decays, so claiming power growth p=2 must fail with a witness
    s = np.geomspace(1e-8, 1e8, 400)
    tf = TableFunction(s, s * np.exp(-np.minimum(s, 700.0)))
    f = NonlinearitySpec(variant="table", p=2.0, table=tf,
                         declared=("f_star",))
    spec = ProblemSpec(domain=ball3, lam=1.0, f=f,
                       g=GradientCoefSpec(variant="zero"))
    rep = validate_spec(spec)
    byname = {c.name: c for c in rep.checks}
    assert not byname["f_star"].ok
    assert byname["f_star"].witness_s is not None


def test_sigma_t_must_match_g_sigma(ball3):
    g = GradientCoefSpec(variant="constant-over-s", sigma=0.4)
    f = NonlinearitySpec(variant="pure-power", p=3.0)
    with pytest.raises(SpecError):
        ProblemSpec(domain=ball3, lam=1.0, f=f, g=g, t=1.0, sigma_t=0.5)
    spec = ProblemSpec(domain=ball3, lam=1.0, f=f, g=g, sigma_t=0.4)
    assert spec.with_t(2.0).t == 2.0


def test_domain_spec_validation():
    with pytest.raises(SpecError):
        DomainSpec(kind="radial-ball", dimension=2, outer_radius=1.0)
    with pytest.raises(SpecError):
        DomainSpec(kind="radial-annulus", dimension=3,
                   inner_radius=2.0, outer_radius=1.0)
    with pytest.raises(SpecError):
        DomainSpec(kind="no-such-kind", dimension=3)


def test_source_bump_support():
    src = SourceSpec(variant="radial-bump", amplitude=1.0, radius=0.25)
    from quadgrad.model import eval_source
    rho = np.array([0.0, 0.1, 0.24, 0.26, 0.8])
    vals = eval_source(src, rho)
    assert vals[0] > 0 and vals[2] > 0
    assert vals[3] == 0.0 and vals[4] == 0.0


# --- JSON round trip -------------------------------------------------------

_ball = {"kind": "radial-ball", "dimension": 3,
         "outer_radius": 1.0, "inner_radius": 0.0}


@given(lam=st.floats(min_value=0.0, max_value=1e3),
       p=st.floats(min_value=1.01, max_value=4.9),
       sigma=st.floats(min_value=0.01, max_value=0.99),
       t=st.floats(min_value=0.0, max_value=10.0))
@settings(max_examples=100, deadline=None)
def test_problem_json_round_trip(lam, p, sigma, t):
    dom = DomainSpec(**_ball, side_lengths=None)
    spec = ProblemSpec(domain=dom, lam=lam,
                       f=NonlinearitySpec(variant="pure-power", p=p),
                       g=GradientCoefSpec(variant="constant-over-s", sigma=sigma),
                       t=t, sigma_t=sigma)
    back = ProblemSpec.from_json(spec.to_json())
    assert back == spec


def test_problem_json_rejects_unknown_fields():
    dom = DomainSpec(**_ball, side_lengths=None)
    spec = ProblemSpec(domain=dom, lam=1.0,
                       f=NonlinearitySpec(variant="pure-power", p=3.0),
                       g=GradientCoefSpec(variant="zero"))
    doc = spec.to_dict()
    doc["surprise"] = 1
    with pytest.raises(SpecError):
        ProblemSpec.from_dict(doc)


def test_model_singular_json_round_trip():
    mu = MuFieldSpec(variant="piecewise", mu_in=0.0, tau_out=2.0,
                     omega_radius=0.5)
    g = GradientCoefSpec(variant="model-singular", gamma=1.0, delta=0.0,
                         mu=mu, tau=2.0, declared=("g_outer",))
    back = GradientCoefSpec.from_dict(g.to_dict())
    assert back == g
