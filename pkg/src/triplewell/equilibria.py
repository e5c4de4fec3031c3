"""Fixed points of the classical flow, their linear stability and (chi, mu) maps.

Fixed-point classes
-------------------
``S1``      w1 = w2 = 1 (all wells equal, equal phases), always present.
``S2``      twin point from the real root of the deflated cubic that persists
            across the region where the cubic has a single real root.
``S3/S4``   the saddle-node pair born where the cubic discriminant vanishes;
            S3 is the branch born as the in-surface saddle.
``SDW_1/2`` single depleted well states (w_j, w_k) = (-1, 0).
``VORTEX_PLUS/MINUS`` w1 = exp(+-2 pi i/3) = conj(w2), <J_S>/N = +-sqrt(3).
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .classical import ClassicalState, eom_rhs, jacobian
from .model import ModelParams

S1, S2, S3, S4 = "S1", "S2", "S3", "S4"
SDW_1, SDW_2 = "SDW_1", "SDW_2"
VORTEX_PLUS, VORTEX_MINUS = "VORTEX_PLUS", "VORTEX_MINUS"
ALL_CLASSES = (S1, S2, S3, S4, SDW_1, SDW_2, VORTEX_PLUS, VORTEX_MINUS)

STABLE, UNSTABLE, MARGINAL = "stable", "unstable", "marginal"

RESIDUAL_TOL = 1e-10
REAL_ROOT_TOL = 1e-9
MARGINAL_TOL = 1e-9

_VORTEX = complex(math.cos(2 * math.pi / 3), math.sin(2 * math.pi / 3))


class NotAFixedPointError(ValueError):
    pass


# ---------------------------------------------------------------------------
# polynomials


def twin_quartic_coeffs(chi: float, mu: float) -> np.ndarray:
    """Coefficients (highest degree first) of the real twin fixed-point quartic."""
    return np.array([
        4.0 * (1.0 + mu),
        -2.0 * (1.0 + chi + 4.0 * mu),
        6.0 * mu,
        2.0 * chi - 1.0,
        -1.0 - 2.0 * mu,
    ])


def twin_cubic_coeffs(chi: float, mu: float) -> np.ndarray:
    """Quartic deflated by (w - 1), normalized to a monic cubic.

    Raises ``ZeroDivisionError`` for ``mu == -1`` where the quartic loses its
    leading term; use :func:`_deflated` then.
    """
    lead = 2.0 * (1.0 + mu)
    return np.array([1.0, (1.0 - chi - 2.0 * mu) / lead, (1.0 - chi + mu) / lead,
                     (1.0 + 2.0 * mu) / (2.0 * lead)])


def _deflated(chi: float, mu: float) -> np.ndarray:
    return np.array([4.0 * (1.0 + mu), 2.0 - 2.0 * chi - 4.0 * mu, 2.0 - 2.0 * chi + 2.0 * mu,
                     1.0 + 2.0 * mu])


def discriminant(chi: float, mu: float) -> float:
    """Sign-carrying discriminant: positive where the cubic has one real root."""
    return (
        -chi ** 4
        - 2.0 * (3.0 + 7.0 * mu) * chi ** 3
        + 3.0 * (2.0 - 11.0 * mu ** 2) * chi ** 2
        + 2.0 * (5.0 + 12.0 * mu - 18.0 * mu ** 2 - 52.0 * mu ** 3) * chi
        + 2.0 * (9.0 + 76.0 * mu + 228.0 * mu ** 2 + 264.0 * mu ** 3 + 76.0 * mu ** 4)
    )


def _discriminant_chi_coeffs(mu: float) -> np.ndarray:
    return np.array([
        -1.0,
        -2.0 * (3.0 + 7.0 * mu),
        3.0 * (2.0 - 11.0 * mu ** 2),
        2.0 * (5.0 + 12.0 * mu - 18.0 * mu ** 2 - 52.0 * mu ** 3),
        2.0 * (9.0 + 76.0 * mu + 228.0 * mu ** 2 + 264.0 * mu ** 3 + 76.0 * mu ** 4),
    ])


def _discriminant_real_roots(mu: float, n_scan: int = 4001) -> Tuple[List[float], Tuple[float, float]]:
    coeffs = _discriminant_chi_coeffs(mu)
    bound = 1.0 + np.max(np.abs(coeffs[1:]))  # Cauchy bound on |chi|
    grid = np.linspace(-bound, bound, n_scan)
    vals = np.polyval(coeffs, grid)
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            roots.append(float(a))
        elif fa * fb < 0:
            roots.append(brentq(discriminant, a, b, args=(mu,), xtol=1e-14, rtol=1e-15))
    # tangential roots between grid points are invisible to sign scans; catch them from the companion matrix
    for r in np.roots(coeffs):
        if abs(r.imag) < 1e-7 and all(abs(r.real - x) > 1e-6 for x in roots):
            if abs(discriminant(r.real, mu)) < 1e-8 * max(1.0, abs(r.real)) ** 4:
                roots.append(float(r.real))
    return sorted(roots), (-bound, bound)


def discriminant_roots(mu: float) -> Tuple[float, float]:
    """``(chi_minus, chi_plus)``: the two real roots of the discriminant in chi."""
    roots, interval = _discriminant_real_roots(mu)
    if len(roots) != 2:
        raise ValueError(
            f"expected two real discriminant roots for mu={mu}, found {len(roots)} "
            f"({roots}) scanning chi in [{interval[0]:.6g}, {interval[1]:.6g}]"
        )
    return roots[0], roots[1]


def _polish(coeffs: np.ndarray, x: float, iters: int = 8) -> float:
    deriv = np.polyder(coeffs)
    best, best_res = x, abs(np.polyval(coeffs, x))
    for _ in range(iters):
        d = np.polyval(deriv, x)
        if d == 0:
            break
        x = x - np.polyval(coeffs, x) / d
        res = abs(np.polyval(coeffs, x))
        if res < best_res:
            best, best_res = x, res
        if res == 0:
            break
    return float(best)


def real_cubic_roots(chi: float, mu: float) -> List[float]:
    """Real roots of the deflated cubic, ascending.

    The root count follows the sign of :func:`discriminant` (three real roots
    iff it is <= 0); values come from companion-matrix eigenvalues polished by
    Newton iterations.
    """
    coeffs = _deflated(chi, mu)
    roots = np.roots(coeffs)
    if len(roots) < 3:
        return sorted(_polish(coeffs, r.real) for r in roots if abs(r.imag) < REAL_ROOT_TOL)
    if discriminant(chi, mu) > 0:
        r = roots[np.argmin(np.abs(roots.imag))]
        return [_polish(coeffs, r.real)]
    return sorted(_polish(coeffs, r.real) for r in roots)


def count_real_quartic_roots(chi: float, mu: float, tol: float = 1e-7) -> Tuple[int, bool]:
    """Number of distinct real roots of the twin quartic and whether any coincide."""
    roots = [1.0] + real_cubic_roots(chi, mu)
    distinct: List[float] = []
    for r in sorted(roots):
        if not distinct or abs(r - distinct[-1]) > tol * max(1.0, abs(r)):
            distinct.append(r)
    return len(distinct), len(distinct) < len(roots)


# ---------------------------------------------------------------------------
# stability


def stability_closed_form(kind: str, chi: float, mu: float, omega: float) -> List[complex]:
    """Closed-form squared linearization frequencies for S1, SDW and vortex points.

    Negative real values mean oscillation (stable); positive or complex values
    mean instability.
    """
    w2 = abs(omega) ** 2
    if kind == S1:
        return [complex(w2 / 3.0 * (3.0 + 4.0 * mu) * (4.0 * chi - 9.0 - 4.0 * mu))]
    if kind in (SDW_1, SDW_2, "SDW"):
        base = -(9.0 + 4.0 * mu * (10.0 + 11.0 * mu) + chi * (2.0 + chi))
        disc = (9.0 + 16.0 * mu - chi) * (
            9.0 + 128.0 * mu ** 3 - 8.0 * mu ** 2 * (chi - 19.0) + chi * (5.0 + 3.0 * chi - chi ** 2)
            + 16.0 * mu * (4.0 + chi + chi ** 2)
        )
        root = np.sqrt(complex(disc))
        return [w2 / 2.0 * (base + root), w2 / 2.0 * (base - root)]
    if kind in (VORTEX_PLUS, VORTEX_MINUS, "VORTEX"):
        base = -104.0 * mu ** 2 - 16.0 * mu * (6.0 + chi) - 3.0 * (9.0 + 4.0 * chi)
        root = np.sqrt(complex(3.0 * (3.0 + 4.0 * mu) * (3.0 + 8.0 * mu) ** 2 * (9.0 + 4.0 * mu + 8.0 * chi)))
        return [w2 / 6.0 * (base + root), w2 / 6.0 * (base - root)]
    raise NotImplementedError(f"no closed-form stability for class {kind!r}; use stability_numeric")


def stability_numeric(fp: ClassicalState, params: ModelParams) -> np.ndarray:
    """Eigenvalues of the 4x4 Jacobian at a fixed point."""
    d1, d2 = eom_rhs(fp, params)
    res = math.hypot(abs(d1), abs(d2))
    if res > RESIDUAL_TOL * abs(params.omega):
        raise NotAFixedPointError(f"|dw/dt| = {res:.3g} at {fp}; not a fixed point")
    return np.linalg.eigvals(jacobian(fp, params))


def verdict(eigenvalues: Sequence[complex], omega: float) -> str:
    eig = np.asarray(eigenvalues, dtype=complex)
    if np.any(np.abs(eig ** 2) < MARGINAL_TOL * omega ** 2):
        return MARGINAL
    on_axis = np.abs(eig.real) < 1e-7 * np.maximum(1.0, np.abs(eig)) * abs(omega)
    return STABLE if np.all(on_axis) else UNSTABLE


def _in_surface_saddle(w: float, params: ModelParams) -> bool:
    e = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]]) / math.sqrt(2.0)
    reduced = e.T @ jacobian(ClassicalState(w, w), params) @ e
    return float(np.linalg.det(reduced)) < 0.0


def _match(prev: Sequence[float], new: Sequence[float]) -> List[float]:
    best = min(itertools.permutations(new), key=lambda p: sum(abs(a - b) for a, b in zip(prev, p)))
    return list(best)


def label_twin_roots(params: ModelParams) -> Dict[str, float]:
    """Assign S2/S3/S4 labels to the real cubic roots by continuation from the fold."""
    chi, mu = params.chi, params.mu
    roots = real_cubic_roots(chi, mu)
    if len(roots) == 1:
        return {S2: roots[0]}
    if len(roots) != 3:
        return {lab: r for lab, r in zip((S2, S3, S4), roots)}
    folds, _ = _discriminant_real_roots(mu)
    if not folds:
        return dict(zip((S2, S3, S4), roots))
    fold = min(folds, key=lambda f: abs(f - chi))
    dist = abs(chi - fold)
    side = 1.0 if chi >= fold else -1.0
    start = min(dist, 1e-4 * max(1.0, abs(fold)))
    path = [start]
    while path[-1] < dist:
        path.append(min(dist, path[-1] * 1.25 + 1e-6))

    cur = real_cubic_roots(fold + side * start, mu)
    if len(cur) != 3:
        cur = roots
        path = [dist]
    # newborn pair = closest two roots
    pairs = [(abs(cur[a] - cur[b]), a, b) for a, b in ((0, 1), (0, 2), (1, 2))]
    _, a, b = min(pairs)
    other = ({0, 1, 2} - {a, b}).pop()
    p0 = params.replace(chi=fold + side * start)
    if _in_surface_saddle(cur[a], p0) and not _in_surface_saddle(cur[b], p0):
        ordered = [cur[other], cur[a], cur[b]]
    elif _in_surface_saddle(cur[b], p0) and not _in_surface_saddle(cur[a], p0):
        ordered = [cur[other], cur[b], cur[a]]
    else:
        ordered = [cur[other], cur[a], cur[b]]
    for d in path[1:]:
        nxt = real_cubic_roots(fold + side * d, mu)
        if len(nxt) == 3:
            ordered = _match(ordered, nxt)
    ordered = _match(ordered, roots)
    return dict(zip((S2, S3, S4), ordered))


# ---------------------------------------------------------------------------
# catalog


@dataclass
class FixedPointRecord:
    kind: str
    state: ClassicalState
    eigenvalues: np.ndarray
    verdict: str
    params: ModelParams
    lambda_squared: Optional[List[complex]] = None
    notes: List[str] = field(default_factory=list)

    @property
    def stable(self) -> bool:
        return self.verdict == STABLE


def _record(kind: str, state: ClassicalState, params: ModelParams) -> FixedPointRecord:
    eig = stability_numeric(state, params)
    closed = None
    if kind in (S1, SDW_1, SDW_2, VORTEX_PLUS, VORTEX_MINUS):
        closed = stability_closed_form(kind, params.chi, params.mu, params.omega)
    rec = FixedPointRecord(kind, state, eig, verdict(eig, params.omega), params, closed)
    if not params.physical:
        rec.notes.append("unphysical: chi and mu have opposite signs")
    return rec


def find_fixed_points(params: ModelParams) -> List[FixedPointRecord]:
    """All chart-representable fixed points for the given collision parameters."""
    recs = [_record(S1, ClassicalState(1.0, 1.0), params)]
    for label, w in sorted(label_twin_roots(params).items()):
        rec = _record(label, ClassicalState(w, w), params)
        if abs(w - 1.0) < 1e-7:
            rec.notes.append("degenerate with S1")
        recs.append(rec)
    recs.append(_record(SDW_1, ClassicalState(-1.0, 0.0), params))
    recs.append(_record(SDW_2, ClassicalState(0.0, -1.0), params))
    recs.append(_record(VORTEX_PLUS, ClassicalState(_VORTEX, _VORTEX.conjugate()), params))
    recs.append(_record(VORTEX_MINUS, ClassicalState(_VORTEX.conjugate(), _VORTEX), params))
    return recs


# ---------------------------------------------------------------------------
# parameter-space maps

_CODES = {STABLE: 1, UNSTABLE: 0, MARGINAL: 2}
MAP_COLUMNS = ("chi", "mu", "n_real_roots", "s1_stable", "s2_stable", "s3_exists", "s3_stable",
               "s4_exists", "s4_stable", "sdw_stable", "vortex_stable")


@dataclass
class StabilityMap:
    chi_grid: np.ndarray
    mu_grid: np.ndarray
    cells: List[Dict[str, float]]

    def column(self, name: str) -> np.ndarray:
        """Values of one column reshaped to (len(mu_grid), len(chi_grid))."""
        return np.array([c[name] for c in self.cells]).reshape(len(self.mu_grid), len(self.chi_grid))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(MAP_COLUMNS) + "\n")
            for c in self.cells:
                fh.write(",".join(repr(float(c[k])) if k in ("chi", "mu") else str(int(c[k]))
                                  for k in MAP_COLUMNS) + "\n")


def map_cell(chi: float, mu: float, omega: float = -1.0) -> Dict[str, float]:
    params = ModelParams(omega, 30, chi, mu)
    recs = {r.kind: r for r in find_fixed_points(params)}
    n_real, degenerate = count_real_quartic_roots(chi, mu)

    def code(kind):
        return _CODES[recs[kind].verdict] if kind in recs else -1

    return {
        "chi": chi, "mu": mu, "n_real_roots": n_real, "degenerate": int(degenerate),
        "physical": int(chi * mu >= 0),
        "s1_stable": code(S1), "s2_stable": code(S2),
        "s3_exists": int(S3 in recs), "s3_stable": code(S3),
        "s4_exists": int(S4 in recs), "s4_stable": code(S4),
        "sdw_stable": code(SDW_1), "vortex_stable": code(VORTEX_PLUS),
    }


def _cell_star(args):
    return map_cell(*args)


def stability_map(chi_values: Sequence[float], mu_values: Sequence[float], omega: float = -1.0,
                  workers: int = 1) -> StabilityMap:
    """Evaluate every (chi, mu) cell; rows are ordered mu-major, chi-minor."""
    chi_grid = np.asarray(chi_values, dtype=float)
    mu_grid = np.asarray(mu_values, dtype=float)
    if chi_grid.size < 2 or mu_grid.size < 2:
        raise ValueError("stability map needs at least two grid points per axis")
    jobs = [(float(c), float(m), omega) for m in mu_grid for c in chi_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_cell_star, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        cells = [map_cell(*j) for j in jobs]
    return StabilityMap(chi_grid, mu_grid, cells)
