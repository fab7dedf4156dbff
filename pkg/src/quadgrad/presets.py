"""Named experiment presets.

Each preset is a complete run configuration for one regime of the
quadratic-gradient family, keyed by the theorem it exercises, plus the
qualitative outcome the theory asserts there.  The two "open-" presets
sit in regimes where no statement is available in either direction;
their expected outcome is deliberately "no asserted outcome".

Configurations are desk-scale: meshes are chosen so any preset runs in
seconds.  `get_preset` returns deep copies, so callers may mutate.
"""

from __future__ import annotations

import copy

from .model import SpecError

_BALL3 = {"kind": "radial-ball", "dimension": 3, "outer_radius": 1.0}


def _problem(lam, p, g, t=0.0, f_extra=None):
    f = {"variant": "pure-power", "p": p}
    if f_extra:
        f.update(f_extra)
    return {"domain": dict(_BALL3), "lambda": lam, "f": f, "g": g, "t": t}


def _model_g(gamma, delta, mu, **extra):
    g = {"variant": "model-singular", "gamma": gamma, "delta": delta,
         "mu": {"variant": "constant", "value": mu}}
    g.update(extra)
    return g


def _piecewise_g(gamma, delta, mu_in, tau_out, omega_radius, **extra):
    g = {"variant": "model-singular", "gamma": gamma, "delta": delta,
         "mu": {"variant": "piecewise", "mu_in": mu_in, "tau_out": tau_out,
                "omega_radius": omega_radius}}
    g.update(extra)
    return g


_BUMP = {"variant": "radial-bump", "amplitude": 1.0, "radius": 0.25}

PRESETS = {
    # fixed-source problem, weight below the contraction threshold
    "thm1.1-exist": {
        "expected": "existence: the fixed-source solve converges to the "
                    "unique positive solution",
        "config": {
            "problem": _problem(0.0, 3.0,
                                _model_g(1.0, 0.0, 0.3, sigma=0.3, tau=0.3,
                                         declared=["g_star", "g_one"])),
            "source": dict(_BUMP),
            "mesh": {"M": 800},
        },
    },
    # fixed-source problem, weight above 1 where the source vanishes
    "thm1.1-nonexist": {
        "expected": "nonexistence: the iteration degenerates or the mass "
                    "integral of h/u blows up under refinement",
        "config": {
            "problem": _problem(0.0, 3.0,
                                _piecewise_g(1.0, 0.0, 0.0, 2.0, 0.5,
                                             tau=2.0, declared=["g_outer"])),
            "source": dict(_BUMP),
            "mesh": {"M": 200},
            "probe": {"levels": 3},
        },
    },
    # gamma = 1, sign-changing weight inside the small-sigma window
    "thm1.2-gamma1": {
        "expected": "existence for every lambda: converged positive solution",
        "config": {
            "problem": _problem(1.0, 3.0,
                                _piecewise_g(1.0, 0.0, -0.2, 0.3, 0.5,
                                             sigma=0.3, tau=-0.2,
                                             declared=["g_star"])),
            "mesh": {"M": 800},
        },
    },
    # gamma = 1, weight above 1 outside a compact subdomain
    "thm1.2-nonexist": {
        "expected": "nonexistence for every lambda: no converged solve at "
                    "any level",
        "config": {
            "problem": _problem(1.0, 3.0,
                                _piecewise_g(1.0, 0.0, 0.0, 2.0, 0.5,
                                             tau=2.0, declared=["g_outer"])),
            "mesh": {"M": 200},
            "probe": {"levels": 3},
        },
    },
    # gamma > 1 with delta > 0 and the smallness condition mu < delta^{gamma-1}/2
    "thm1.3-gamma-big": {
        "expected": "existence for every lambda: converged positive solution",
        "config": {
            "problem": _problem(1.0, 3.0, _model_g(2.0, 0.5, 0.2)),
            "mesh": {"M": 800},
        },
    },
    # gamma > 1, delta = 0, weight positive near the boundary
    "thm1.3-nonexist": {
        "expected": "nonexistence for every lambda: the strong singularity "
                    "makes any positive outer weight an obstruction",
        "config": {
            "problem": _problem(1.0, 3.0,
                                _piecewise_g(2.0, 0.0, 0.0, 0.5, 0.5)),
            "mesh": {"M": 200},
            "probe": {"levels": 3},
        },
    },
    # weak singularity gamma < 1: solutions exist for large lambda and shrink
    "thm1.4-lambda-large-a": {
        "expected": "existence for large lambda with sup norms decreasing "
                    "toward zero along the sweep",
        "config": {
            "problem": _problem(1000.0, 2.0, _model_g(0.5, 0.0, 0.5)),
            "mesh": {"M": 600},
            "sweep": {"kind": "lambda", "grid": [10.0, 100.0, 1000.0]},
        },
    },
    # gamma >= 1 with delta > 0 and a weight of arbitrary size
    "thm1.4-lambda-large-b": {
        "expected": "existence for large lambda despite the large weight, "
                    "sup norms decreasing along the sweep",
        "config": {
            "problem": _problem(1000.0, 1.8, _model_g(1.0, 0.5, 1.5)),
            "mesh": {"M": 600},
            "sweep": {"kind": "lambda", "grid": [10.0, 100.0, 1000.0]},
        },
    },
    # borderline weight mu = 1 at delta = 0: genuinely open regime
    "open-mu-one": {
        "expected": "no asserted outcome",
        "config": {
            "problem": _problem(1.0, 3.0, _model_g(1.0, 0.0, 1.0)),
            "mesh": {"M": 400},
        },
    },
    # delta > 0 with the weight between the smallness threshold and 1
    "open-intermediate-mu": {
        "expected": "no asserted outcome",
        "config": {
            "problem": _problem(1.0, 3.0, _model_g(1.0, 0.5, 0.75)),
            "mesh": {"M": 400},
        },
    },
}


def preset_names() -> tuple:
    return tuple(sorted(PRESETS))


def get_preset(name: str) -> dict:
    """Deep copy of {expected, config} for the named preset."""
    if name not in PRESETS:
        known = ", ".join(preset_names())
        raise SpecError(f"unknown preset {name!r}; known presets: {known}")
    return copy.deepcopy(PRESETS[name])
