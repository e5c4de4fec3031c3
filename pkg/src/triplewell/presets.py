"""Figure presets as data.

Each preset names a CLI command and a list of runs.  A run carries the model
parameters and the command options; seeds that must sit on an energy shell are
described by the shell anchor, the frozen chart coordinates and the root to
pick along the free coordinate, and are resolved at run time.

All presets use N = 30 and Omega = -1.
"""
from __future__ import annotations

import copy
import math
from typing import Dict, List

N_FIG = 30
OMEGA_FIG = -1.0
_SQ5 = math.sqrt(5.0)
_SQ15 = math.sqrt(N_FIG / 2.0)


def _params(chi: float, mu: float) -> Dict[str, float]:
    return {"omega": OMEGA_FIG, "n": N_FIG, "chi": chi, "mu": mu}


def _lin(lo: float, hi: float, k: int) -> List[float]:
    return [lo + (hi - lo) * i / (k - 1) for i in range(k)]


_MAP = {"chi_range": [-10.0, 10.0, 101], "mu_range": [-0.5, 1.5, 41]}

# twin-surface seeds for the sphere portraits: a meridian of theta values at
# two opposite azimuths covers both sides of every twin fixed point
_SPHERE = {
    "theta": [0.15, 0.45, 0.75, 1.05, 1.35, 1.65, 1.95, 2.25, 2.55, 2.85],
    "phi": [0.0, math.pi],
    "t_end": 30.0,
    "sample_dt": 0.05,
}

_SDW_GRID = {
    "shell": "sdw",
    "chart": "canonical",
    "frozen": {
        "phi2": 0.0,
        "K1": [9.0, 11.0, 13.0, 14.0, 16.0, 17.0, 19.0, 21.0],
        "phi1": [math.pi - 0.6, math.pi, math.pi + 0.6],
    },
    "nearest": None,
}
_SDW_SECTION = {"chart": "canonical", "condition": ["phi2", 0.0], "direction": "both",
                "plane_axes": ["K1", "phi1"], "t_max": 150.0}

_VORTEX_GRID = {
    "shell": "vortex",
    "chart": "cartesian",
    "frozen": {
        "p2": -_SQ15,
        "q1": [-_SQ5 - 1.0, -_SQ5 - 0.5, -_SQ5 + 0.5, -_SQ5 + 1.0],
        "p1": [_SQ15 - 1.0, _SQ15, _SQ15 + 1.0],
    },
    "nearest": {"q2": -_SQ5},
}
_VORTEX_SECTION = {"chart": "cartesian", "condition": ["p2", -_SQ15], "direction": "both",
                   "plane_axes": ["q1", "p1"], "t_max": 150.0}


def _sdw_point(k1: float) -> dict:
    return {"shell": "sdw", "chart": "canonical", "frozen": {"K1": k1, "phi1": math.pi, "phi2": 0.0},
            "nearest": {"K2": 0.0}}


_VORTEX_POINT = {"shell": "vortex", "chart": "cartesian",
                 "frozen": {"q1": -_SQ5 + 0.5, "p1": _SQ15, "p2": -_SQ15}, "nearest": {"q2": -_SQ5}}


def _evolve(label, chi, mu, mode, initial, t_end=50.0):
    return {"label": label, "params": _params(chi, mu),
            "options": {"mode": mode, "initial": initial, "t_end": t_end, "sample_dt": 0.1}}


PRESETS: Dict[str, dict] = {
    "fig1": {"command": "stability-map", "runs": [{"label": "map", "params": _params(0.0, 0.0), "options": _MAP}]},
    "fig2": {"command": "stability-map", "runs": [{"label": "map", "params": _params(0.0, 0.0), "options": _MAP}]},
    "fig3a": {"command": "sphere-portrait", "runs": [{"label": "chi1.5", "params": _params(1.5, 0.0), "options": _SPHERE}]},
    "fig3b": {"command": "sphere-portrait", "runs": [{"label": "chi1.98", "params": _params(1.98, 0.0), "options": _SPHERE}]},
    "fig3c": {"command": "sphere-portrait", "runs": [{"label": "chi3", "params": _params(3.0, 0.0), "options": _SPHERE}]},
    "fig4": {"command": "evolve", "runs": [
        _evolve("mu_chi_over_100", 4.0, 0.04, "both", {"w": [0.0, 0.0]}),
        _evolve("mu_chi_over_10", 4.0, 0.4, "both", {"w": [0.0, 0.0]}),
    ]},
    "fig5": {"command": "evolve", "runs": [
        _evolve("mu_chi_over_100", 4.0, 0.04, "quantum", {"w": [0.0, 0.0]}),
        _evolve("mu_chi_over_10", 4.0, 0.4, "quantum", {"w": [0.0, 0.0]}),
    ]},
    "fig6a": {"command": "poincare", "runs": [{"label": "chi5", "params": _params(5.0, 0.05),
                                               "options": {"seeding": _SDW_GRID, "section": _SDW_SECTION}}]},
    "fig6b": {"command": "poincare", "runs": [{"label": "chi-5", "params": _params(-5.0, -0.05),
                                               "options": {"seeding": _SDW_GRID, "section": _SDW_SECTION}}]},
    "fig7": {"command": "evolve", "runs": [
        _evolve("regular", 5.0, 0.05, "classical", {"seed": _sdw_point(17.0)}),
        _evolve("chaotic", -5.0, -0.05, "classical", {"seed": _sdw_point(15.5)}),
    ]},
    "fig8": {"command": "evolve", "runs": [
        _evolve("regular", 5.0, 0.05, "quantum", {"seed": _sdw_point(17.0)}),
        _evolve("chaotic", -5.0, -0.05, "quantum", {"seed": _sdw_point(15.5)}),
    ]},
    "fig9a": {"command": "poincare", "runs": [{"label": "chi-1", "params": _params(-1.0, -0.01),
                                               "options": {"seeding": _VORTEX_GRID, "section": _VORTEX_SECTION}}]},
    "fig9b": {"command": "poincare", "runs": [{"label": "chi-5", "params": _params(-5.0, -0.05),
                                               "options": {"seeding": _VORTEX_GRID, "section": _VORTEX_SECTION}}]},
    "fig10-regular": {"command": "evolve", "runs": [
        _evolve("regular", -1.0, -0.01, "both", {"seed": _VORTEX_POINT}),
    ]},
    "fig10-chaotic": {"command": "evolve", "runs": [
        _evolve("chaotic", -5.0, -0.05, "both", {"seed": _VORTEX_POINT}),
    ]},
}
PRESETS["fig10"] = {"command": "evolve",
                    "runs": PRESETS["fig10-regular"]["runs"] + PRESETS["fig10-chaotic"]["runs"]}


def get_preset(name: str) -> dict:
    """Deep copy of a preset entry (callers may mutate it freely)."""
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None
