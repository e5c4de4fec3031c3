"""Poincare sections of the classical flow on fixed-energy shells.

Coordinates are addressed by name: ``K1, K2, phi1, phi2`` in the canonical
chart and ``q1, p1, q2, p2`` in the Cartesian chart.  Phase conditions are
evaluated on the circle: the residual of ``phi_j = v`` is ``-Im(w_j e^{iv})``
(proportional to ``sin(phi_j - v)``), and a crossing only counts when
``cos(phi_j - v) > 0`` so passages through ``v + pi`` are ignored.
"""
from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .classical import (
    CanonicalState,
    CartesianState,
    ClassicalState,
    _energy,
    _overflow_event,
    _rhs_real,
    classical_energy,
    from_canonical,
    from_cartesian,
)
from .model import ChartError, ModelParams

CANONICAL, CARTESIAN = "canonical", "cartesian"
POSITIVE, NEGATIVE, BOTH = "positive", "negative", "both"
CHART_COORDS = {CANONICAL: ("K1", "K2", "phi1", "phi2"), CARTESIAN: ("q1", "p1", "q2", "p2")}

SHELL_TOL = 1e-10
POLISH_TOL = 1e-10


@dataclass(frozen=True)
class SectionSpec:
    chart: str
    condition: Tuple[str, float]
    direction: str = BOTH
    plane_axes: Tuple[str, str] = ("K1", "phi1")

    def __post_init__(self):
        if self.chart not in CHART_COORDS:
            raise ValueError(f"unknown chart {self.chart!r}")
        names = CHART_COORDS[self.chart]
        name = self.condition[0]
        if name not in names or any(a not in names for a in self.plane_axes):
            raise ValueError(f"coordinates must be among {names}")
        if name in self.plane_axes:
            raise ValueError(f"section coordinate {name!r} cannot also be a plane axis")
        if self.direction not in (POSITIVE, NEGATIVE, BOTH):
            raise ValueError(f"direction must be one of positive/negative/both, got {self.direction!r}")


@dataclass(frozen=True)
class SectionPoint:
    axis1: float
    axis2: float
    t: float
    trajectory_id: int
    energy: float


@dataclass
class SeedResult:
    seeds: List[ClassicalState]
    skipped_cells: int
    energy_range: Tuple[float, float]
    in_range: bool


@dataclass
class SectionResult:
    points: List[SectionPoint]
    spec: SectionSpec
    shell_energy: float
    truncated: List[int] = field(default_factory=list)
    max_residual: float = 0.0

    def by_trajectory(self) -> Dict[int, List[SectionPoint]]:
        out: Dict[int, List[SectionPoint]] = {}
        for p in self.points:
            out.setdefault(p.trajectory_id, []).append(p)
        return out

    def to_csv(self, path, params: Optional[ModelParams] = None, metadata_path=None) -> None:
        with open(path, "w") as fh:
            fh.write("trajectory_id,t,axis1,axis2,energy\n")
            for p in self.points:
                fh.write(f"{p.trajectory_id},{float(p.t)!r},{float(p.axis1)!r},{float(p.axis2)!r},{float(p.energy)!r}\n")
        if metadata_path is not None:
            meta = {"spec": asdict(self.spec), "shell_energy": self.shell_energy,
                    "truncated_trajectories": self.truncated}
            if params is not None:
                meta["params"] = {"omega": params.omega, "n": params.n_particles,
                                  "chi": params.chi, "mu": params.mu}
            with open(metadata_path, "w") as fh:
                json.dump(meta, fh, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# coordinates


def _wrap2pi(phi: float) -> float:
    return phi % (2.0 * math.pi)


def coordinate(y: Sequence[float], name: str, n: int) -> float:
    """Value of a named chart coordinate for the real state vector ``y``.

    Phases are reported in [0, 2 pi).
    """
    w1, w2 = complex(y[0], y[1]), complex(y[2], y[3])
    s = 1.0 + abs(w1) ** 2 + abs(w2) ** 2
    w = w1 if name.endswith("1") else w2
    if name.startswith("K"):
        return n * abs(w) ** 2 / s
    if name.startswith("phi"):
        return _wrap2pi(-math.atan2(w.imag, w.real)) if w != 0 else 0.0
    z = w * math.sqrt(2.0 * n / s)
    return z.real if name.startswith("q") else z.imag


def _residual_fn(name: str, value: float, n: int) -> Tuple[Callable, Callable]:
    """(residual g(y), gate(y) -> bool) for the condition ``name == value``."""
    idx = 0 if name.endswith("1") else 2
    if name.startswith("phi"):
        rot = complex(math.cos(value), math.sin(value))

        def g(y):
            return -(complex(y[idx], y[idx + 1]) * rot).imag

        def gate(y):
            return (complex(y[idx], y[idx + 1]) * rot).real > 0.0

        return g, gate

    def g(y):
        return coordinate(y, name, n) - value

    return g, lambda y: True


def state_from_coords(chart: str, coords: Mapping[str, float], n: int) -> ClassicalState:
    if chart == CANONICAL:
        return from_canonical(CanonicalState(coords["K1"], coords["K2"], coords["phi1"], coords["phi2"], n))
    return from_cartesian(CartesianState(coords["q1"], coords["p1"], coords["q2"], coords["p2"], n))


def _unfrozen_interval(chart: str, name: str, coords: Mapping[str, float], n: int) -> Optional[Tuple[float, float]]:
    if name.startswith("phi"):
        return (0.0, 2.0 * math.pi)
    if chart == CANONICAL:
        other = coords["K2" if name == "K1" else "K1"]
        top = n - other
        return (0.0, top) if top > 0 else None
    rest = 2.0 * n - sum(v * v for k, v in coords.items() if k != name)
    return (-math.sqrt(rest), math.sqrt(rest)) if rest > 0 else None


# ---------------------------------------------------------------------------
# seeding


def energy_range(params: ModelParams, n_samples: int = 20000, seed: int = 0) -> Tuple[float, float]:
    """Sampled range of the energy per particle over the coherent-state manifold."""
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n_samples, 3)) + 1j * rng.normal(size=(n_samples, 3))
    w = z[:, :2] / z[:, 2:3]
    e = [_energy(a, b, params.chi, params.mu, params.omega) for a, b in w]
    return float(min(e)), float(max(e))


def energy_shell_seed(
    params: ModelParams,
    e_target: float,
    chart: str,
    frozen: Mapping[str, Union[float, Sequence[float]]],
    n_seeds: Optional[int] = None,
    n_scan: int = 400,
) -> SeedResult:
    """Seeds on the shell ``H/N = e_target`` by 1-D root solving in the unfrozen coordinate.

    ``frozen`` fixes three of the four chart coordinates; sequence values are
    expanded into a grid.  Every root found along the free coordinate is kept.
    """
    n = params.n_particles
    names = CHART_COORDS[chart]
    free = [c for c in names if c not in frozen]
    if len(free) != 1:
        raise ValueError(f"exactly one coordinate must be left free, got {free}")
    free = free[0]
    lo, hi = energy_range(params)
    span = hi - lo
    in_range = lo - 1e-3 * span <= e_target <= hi + 1e-3 * span
    if not in_range:
        return SeedResult([], 0, (lo, hi), False)

    grid_axes = [(k, np.atleast_1d(np.asarray(v, dtype=float))) for k, v in frozen.items()]
    cells = list(itertools.product(*[vals for _, vals in grid_axes]))
    tol = SHELL_TOL * abs(params.omega)
    seeds: List[ClassicalState] = []
    skipped = 0
    for cell in cells:
        coords = {k: float(v) for (k, _), v in zip(grid_axes, cell)}
        interval = _unfrozen_interval(chart, free, coords, n)
        found = []
        if interval is not None:
            def f(x):
                c = dict(coords)
                c[free] = x
                try:
                    return classical_energy(state_from_coords(chart, c, n), params) - e_target
                except ChartError:
                    return math.nan

            xs = np.linspace(interval[0], interval[1], n_scan + 1)
            # keep chart boundaries out of the scan (third mode empty / constraint equality)
            if not free.startswith("phi"):
                xs = xs[:-1] if chart == CANONICAL else xs[1:-1]
            fs = np.array([f(x) for x in xs])
            for a, b, fa, fb in zip(xs[:-1], xs[1:], fs[:-1], fs[1:]):
                if not (np.isfinite(fa) and np.isfinite(fb)):
                    continue
                if abs(fa) <= tol:
                    found.append(a)
                elif fa * fb < 0:
                    found.append(brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
            if np.isfinite(fs[-1]) and abs(fs[-1]) <= tol:
                found.append(xs[-1])
        accepted = 0
        for x in found:
            c = dict(coords)
            c[free] = float(x)
            st = state_from_coords(chart, c, n)
            if abs(classical_energy(st, params) - e_target) < tol:
                seeds.append(st)
                accepted += 1
        if accepted == 0:
            skipped += 1
    if n_seeds is not None and len(seeds) > n_seeds:
        pick = np.unique(np.linspace(0, len(seeds) - 1, n_seeds).round().astype(int))
        seeds = [seeds[i] for i in pick]
    return SeedResult(seeds, skipped, (lo, hi), True)


# ---------------------------------------------------------------------------
# sections


def flow(y0: Sequence[float], params: ModelParams, dt: float, rel_tol: float = 1e-12) -> np.ndarray:
    """Advance the real state vector by ``dt`` (negative allowed)."""
    if dt == 0:
        return np.asarray(y0, dtype=float)
    sol = solve_ivp(_rhs_real, (0.0, dt), np.asarray(y0, dtype=float), method="DOP853",
                    rtol=rel_tol, atol=rel_tol * 1e-2, args=(params.chi, params.mu, params.omega))
    return sol.y[:, -1]


def _polish_crossing(y, t, g, params, rel_tol):
    args = (params.chi, params.mu, params.omega)
    for _ in range(6):
        r = g(y)
        if abs(r) < POLISH_TOL:
            break
        f = np.array(_rhs_real(t, y, *args))
        h = 1e-7
        gdot = (g(y + h * f) - g(y - h * f)) / (2 * h)
        if gdot == 0:
            break
        dt = -r / gdot
        y = flow(y, params, dt, rel_tol=min(rel_tol, 1e-12))
        t += dt
    return y, t


def _section_one(job):
    tid, y0, params, spec, t_max, rel_tol, atol = job
    n = params.n_particles
    g, gate = _residual_fn(spec.condition[0], spec.condition[1], n)

    def event(t, y, *args):
        return g(y)

    event.direction = {POSITIVE: 1, NEGATIVE: -1, BOTH: 0}[spec.direction]
    args = (params.chi, params.mu, params.omega)
    sol = solve_ivp(_rhs_real, (0.0, t_max), y0, method="DOP853",
                    events=[event, _overflow_event], rtol=rel_tol, atol=atol, args=args)
    truncated = sol.status != 0
    points = []
    worst = 0.0
    for t_e, y_e in zip(sol.t_events[0], sol.y_events[0]):
        if t_e == 0.0:
            continue
        y_p, t_p = _polish_crossing(np.array(y_e), float(t_e), g, params, rel_tol)
        if not gate(y_p):
            continue
        worst = max(worst, abs(g(y_p)))
        points.append(SectionPoint(
            coordinate(y_p, spec.plane_axes[0], n), coordinate(y_p, spec.plane_axes[1], n),
            t_p, tid, _energy(complex(y_p[0], y_p[1]), complex(y_p[2], y_p[3]), *args),
        ))
    return tid, points, truncated, worst


def poincare_section(
    seeds: Sequence[ClassicalState],
    params: ModelParams,
    spec: SectionSpec,
    t_max: float,
    rel_tol: float = 1e-11,
    abs_tol: Optional[float] = None,
    workers: int = 1,
) -> SectionResult:
    """Event-detected crossings of the section condition for each seed trajectory.

    Trajectories that leave the chart are truncated; their crossings so far are
    kept and their ids listed in ``truncated``.  Points are ordered by
    ``(trajectory_id, t)`` regardless of ``workers``.
    """
    if not seeds:
        return SectionResult([], spec, math.nan)
    energies = [classical_energy(s, params) for s in seeds]
    e_shell = energies[0]
    if max(abs(e - e_shell) for e in energies) > 1e-8 * abs(params.omega):
        raise ValueError("seeds are not on a common energy shell")
    atol = rel_tol * 1e-2 if abs_tol is None else abs_tol
    jobs = [(tid, seed.as_array(), params, spec, t_max, rel_tol, atol) for tid, seed in enumerate(seeds)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_section_one, jobs))
    else:
        results = [_section_one(job) for job in jobs]
    points: List[SectionPoint] = []
    truncated: List[int] = []
    worst = 0.0
    for tid, pts, trunc, res in results:
        points.extend(pts)
        if trunc:
            truncated.append(tid)
        worst = max(worst, res)
    points.sort(key=lambda p: (p.trajectory_id, p.t))
    return SectionResult(points, spec, e_shell, truncated, worst)
