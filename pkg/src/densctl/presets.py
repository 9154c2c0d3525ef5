"""Built-in benchmark scenarios exercised by the `testcase` command.

All three run advection-diffusion density control on [-1, 1]^2 with
mu = 1, alpha = 1, beta = 1e-3, beta_g = 1e-5, dt = 0.03 s, T = 3 s:

1. circular obstacle at the origin; indicator target hugging the obstacle;
   stabilization is checked from two Gaussian bumps and the uniform density.
2. rectangular wall splitting the domain into two chambers connected by two
   narrow gaps; two-chamber indicator target; the time-varying control moves
   mass through the gaps orders of magnitude faster than the static field.
3. two circular obstacles plus the analytic swirl drift field; adjacent
   two-blob indicator target; initial mass parked in the bottom-left corner.

Obstacle shapes, targets, and initial conditions are desk-scale choices.
The desk resolution targets roughly 1000-1300 nodes; `paper_scale=True`
refines the mesh to roughly 2600-3800 nodes.
"""

from __future__ import annotations

import copy

DESK_H = {1: 0.07, 2: 0.06, 3: 0.07}
PAPER_H = {1: 0.042, 2: 0.0415, 3: 0.035}

_BASE_OCP = {
    "alpha": 1.0,
    "beta": 1e-3,
    "beta_g": 1e-5,
    "tol": 1e-6,
    "max_iter": 800,
    "armijo": {"c1": 1e-4, "shrink": 0.5, "max_backtracks": 30},
    "theta": 0.5,
    "lumped": False,
    "dt": 0.03,
    "T": 3.0,
}

_PRESETS = {
    1: {
        "mesh": {
            "generate": {
                "bounds": [-1.0, -1.0, 1.0, 1.0],
                "target_h": DESK_H[1],
                "holes": [{"type": "circle", "center": [0.0, 0.0], "radius": 0.2}],
            }
        },
        "mu": 1.0,
        "drift": None,
        "target": {"type": "indicator", "regions": [
            {"type": "rect", "bounds": [0.15, 0.15, 0.75, 0.75]},
        ]},
        "initial": {"type": "gaussian", "center": [-0.5, -0.5], "sigma": 0.09},
        "extra_initials": [
            {"type": "gaussian", "center": [-0.5, 0.5], "sigma": 0.09},
            {"type": "uniform"},
        ],
        "ocp": dict(_BASE_OCP),
        "dynamic": {"max_iter": 25, "tol": 1e-6},
        "series_T": 3.0,
        "seed": 0,
    },
    2: {
        "mesh": {
            "generate": {
                "bounds": [-1.0, -1.0, 1.0, 1.0],
                "target_h": DESK_H[2],
                "holes": [{"type": "rect", "bounds": [-0.08, -0.84, 0.08, 0.84]}],
            }
        },
        "mu": 1.0,
        "drift": None,
        "target": {"type": "indicator", "regions": [
            {"type": "rect", "bounds": [-0.75, -0.2, -0.35, 0.2]},
            {"type": "rect", "bounds": [0.35, -0.2, 0.75, 0.2]},
        ]},
        "initial": {"type": "gaussian", "center": [-0.55, 0.0], "sigma": 0.12},
        "extra_initials": [],
        "ocp": dict(_BASE_OCP, tol=2e-6),
        "dynamic": {"max_iter": 15, "tol": 1e-6},
        "series_T": 3.0,
        "long_T": 99.99,
        "seed": 0,
    },
    3: {
        "mesh": {
            "generate": {
                "bounds": [-1.0, -1.0, 1.0, 1.0],
                "target_h": DESK_H[3],
                "holes": [
                    {"type": "circle", "center": [-0.45, 0.35], "radius": 0.16},
                    {"type": "circle", "center": [0.45, -0.35], "radius": 0.16},
                ],
            }
        },
        "mu": 1.0,
        "drift": "swirl",
        "target": {"type": "indicator", "regions": [
            {"type": "rect", "bounds": [-0.65, 0.25, -0.15, 0.75]},
            {"type": "rect", "bounds": [0.15, 0.25, 0.65, 0.75]},
        ]},
        "initial": {"type": "indicator", "regions": [
            {"type": "rect", "bounds": [-0.85, -0.85, -0.45, -0.45]},
        ]},
        "extra_initials": [],
        "ocp": dict(_BASE_OCP, tol=5e-6),
        "dynamic": {"max_iter": 25, "tol": 1e-6},
        "series_T": 6.0,
        "seed": 0,
    },
}


def testcase_config(number: int, paper_scale: bool = False) -> dict:
    """Deep copy of the scenario configuration, optionally at paper scale."""
    if number not in _PRESETS:
        raise ValueError(f"unknown test case {number}; choose 1, 2, or 3")
    cfg = copy.deepcopy(_PRESETS[number])
    if paper_scale:
        cfg["mesh"]["generate"]["target_h"] = PAPER_H[number]
    return cfg
