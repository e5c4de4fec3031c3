"""Classical (coherent-state variational) dynamics of the three-mode condensate.

The phase space is parametrized by two complex numbers ``(w1, w2)``: the
coherent state has single-particle amplitudes ``alpha (w1, w2, 1)`` with
``alpha = (1 + |w1|^2 + |w2|^2)^(-1/2)``.  The equations of motion and the
energy per particle do not depend on N; N only enters the charts that convert
``w`` to mean occupations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from .model import ChartError, ModelParams

# |w1|^2 + |w2|^2 beyond this aborts integration (third mode ~ empty).
CHART_LIMIT = 1e8
TWIN_TOL = 1e-9


class ChartOverflowError(ChartError):
    """Integration left the w-chart (third-mode population went to zero)."""

    def __init__(self, time: float, norm2: float):
        super().__init__(
            f"chart overflow at t={time:.6g}: |w1|^2+|w2|^2={norm2:.3g} exceeds {CHART_LIMIT:g}; "
            "relabel modes (relabel_modes) to move the state into the chart"
        )
        self.time = time


@dataclass(frozen=True)
class ClassicalState:
    w1: complex
    w2: complex

    def __post_init__(self):
        object.__setattr__(self, "w1", complex(self.w1))
        object.__setattr__(self, "w2", complex(self.w2))
        if not (np.isfinite(self.w1) and np.isfinite(self.w2)):
            raise ChartError(f"non-finite coherent-state coordinates ({self.w1}, {self.w2})")

    @property
    def norm2(self) -> float:
        return abs(self.w1) ** 2 + abs(self.w2) ** 2

    @property
    def alpha(self) -> float:
        return (1.0 + self.norm2) ** -0.5

    @property
    def amplitudes(self) -> np.ndarray:
        """Normalized single-particle amplitudes ``(z1, z2, z3)``."""
        return self.alpha * np.array([self.w1, self.w2, 1.0], dtype=complex)

    def as_array(self) -> np.ndarray:
        return np.array([self.w1.real, self.w1.imag, self.w2.real, self.w2.imag])

    @classmethod
    def from_array(cls, y: Sequence[float]) -> "ClassicalState":
        return cls(complex(y[0], y[1]), complex(y[2], y[3]))

    @classmethod
    def from_amplitudes(cls, z: Sequence[complex]) -> "ClassicalState":
        z = np.asarray(z, dtype=complex)
        if abs(z[2]) < 1e-300 or (abs(z[0]) ** 2 + abs(z[1]) ** 2) / abs(z[2]) ** 2 > 1e300:
            raise ChartError("third-mode amplitude vanishes; state is outside the w-chart")
        return cls(z[0] / z[2], z[1] / z[2])


@dataclass(frozen=True)
class CanonicalState:
    K1: float
    K2: float
    phi1: float
    phi2: float
    n_particles: int

    @property
    def K3(self) -> float:
        return self.n_particles - self.K1 - self.K2


@dataclass(frozen=True)
class CartesianState:
    q1: float
    p1: float
    q2: float
    p2: float
    n_particles: int


@dataclass(frozen=True)
class SpherePoint:
    theta: float
    phi: float
    I: Tuple[float, float, float]


def relabel_modes(state: ClassicalState, perm: Tuple[int, int, int]) -> ClassicalState:
    """Move the population of mode ``j`` to mode ``perm[j]`` (zero based)."""
    z = np.array([state.w1, state.w2, 1.0], dtype=complex)
    out = np.empty(3, dtype=complex)
    for j in range(3):
        out[perm[j]] = z[j]
    return ClassicalState.from_amplitudes(out)


# ---------------------------------------------------------------------------
# energy and equations of motion

def classical_energy(state: ClassicalState, params: ModelParams) -> float:
    """Coherent-state average of H divided by N."""
    return _energy(state.w1, state.w2, params.chi, params.mu, params.omega)


def _energy(w1, w2, chi, mu, omega):
    a1, a2 = abs(w1) ** 2, abs(w2) ** 2
    s = 1.0 + a1 + a2
    tunnel = 2.0 * ((w1.conjugate() * w2).real + w1.real + w2.real)
    cross = 2.0 * (a1 * w2.real + a2 * w1.real + (w1.conjugate() * w2).real)
    return omega * (
        (1.0 + 2.0 * mu) * tunnel / s + chi * (a1 * a1 + a2 * a2 + 1.0) / s ** 2 - 2.0 * mu * cross / s ** 2
    )


def _force(wj, wk, chi, mu):
    """Bracket of ``i dw_j/dt = omega * F_j``."""
    aj = abs(wj) ** 2
    s = 1.0 + aj + abs(wk) ** 2
    wkc = wk.conjugate()
    return (
        (1.0 + 2.0 * mu) * (1.0 - wj) * (wj + wk + 1.0)
        + 2.0 * chi * wj * (aj - 1.0) / s
        - 2.0 * mu * ((1.0 - wj) * wkc * (wj + wk + wj * wk) - (1.0 + wj) * wk * (aj - 1.0)) / s
    )


def eom_rhs(state: ClassicalState, params: ModelParams) -> Tuple[complex, complex]:
    """Time derivatives ``(dw1/dt, dw2/dt)``."""
    w1, w2 = state.w1, state.w2
    f1 = _force(w1, w2, params.chi, params.mu)
    f2 = _force(w2, w1, params.chi, params.mu)
    return -1j * params.omega * f1, -1j * params.omega * f2


def _rhs_real(t, y, chi, mu, omega):
    w1 = complex(y[0], y[1])
    w2 = complex(y[2], y[3])
    d1 = -1j * omega * _force(w1, w2, chi, mu)
    d2 = -1j * omega * _force(w2, w1, chi, mu)
    return [d1.real, d1.imag, d2.real, d2.imag]


def _force_partials(wj, wk, chi, mu):
    """Partial derivatives of F_j w.r.t. (wj, wj*, wk, wk*), treated as independent."""
    wjc, wkc = wj.conjugate(), wk.conjugate()
    aj = wj * wjc
    s = 1.0 + aj + wk * wkc
    ds = (wjc, wj, wkc, wk)

    dA = (-2.0 * wj - wk, 0.0, 1.0 - wj, 0.0)

    B = wj * (aj - 1.0)
    dB = (2.0 * aj - 1.0, wj * wj, 0.0, 0.0)

    g = wj + wk + wj * wk
    C = (1.0 - wj) * wkc * g - (1.0 + wj) * wk * (aj - 1.0)
    dC = (
        -wkc * g + (1.0 - wj) * wkc * (1.0 + wk) - wk * (aj - 1.0) - (1.0 + wj) * wk * wjc,
        -(1.0 + wj) * wk * wj,
        (1.0 - wj) * wkc * (1.0 + wj) - (1.0 + wj) * (aj - 1.0),
        (1.0 - wj) * g,
    )
    return [
        (1.0 + 2.0 * mu) * dA[i]
        + 2.0 * chi * (dB[i] / s - B * ds[i] / s ** 2)
        - 2.0 * mu * (dC[i] / s - C * ds[i] / s ** 2)
        for i in range(4)
    ]


def jacobian(state: ClassicalState, params: ModelParams) -> np.ndarray:
    """Analytic 4x4 real Jacobian of the flow in (Re w1, Im w1, Re w2, Im w2)."""
    w1, w2 = state.w1, state.w2
    jac = np.empty((4, 4))
    for row, (wj, wk) in enumerate(((w1, w2), (w2, w1))):
        d_wj, d_wjc, d_wk, d_wkc = _force_partials(wj, wk, params.chi, params.mu)
        # column order: own mode (x, y), then the other mode (x, y)
        own = (d_wj + d_wjc, 1j * (d_wj - d_wjc))
        other = (d_wk + d_wkc, 1j * (d_wk - d_wkc))
        cols = own + other if row == 0 else other + own
        for c, dfdx in enumerate(cols):
            dw = -1j * params.omega * dfdx
            jac[2 * row, c] = dw.real
            jac[2 * row + 1, c] = dw.imag
    return jac


# ---------------------------------------------------------------------------
# observables

def classical_js(state: ClassicalState) -> float:
    """<J_S>/N in the coherent state."""
    w1, w2 = state.w1, state.w2
    return 2.0 * (w1 - w2 + w1.conjugate() * w2).imag / (1.0 + state.norm2)


def generator_expectations(state: ClassicalState, n: int) -> Dict[str, float]:
    """Coherent-state averages of the su(3) generators for N = n."""
    z = state.amplitudes
    p = np.abs(z) ** 2
    out = {
        "Q1": n * (p[0] - p[1]) / 2.0,
        "Q2": n * (p[0] + p[1] - 2.0 * p[2]) / 3.0,
    }
    for k, (a, b) in {1: (0, 2), 2: (1, 0), 3: (2, 1)}.items():
        c = z[a].conjugate() * z[b]
        out[f"P{k}"] = 2.0 * n * c.real
        out[f"J{k}"] = -2.0 * n * c.imag
    out["JS"] = out["J1"] + out["J2"] + out["J3"]
    return out


def populations(state: ClassicalState, n: int) -> np.ndarray:
    return n * np.abs(state.amplitudes) ** 2


# ---------------------------------------------------------------------------
# charts

def _wrap(phi: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    out = math.remainder(phi, 2 * math.pi)
    return math.pi if out == -math.pi else out + 0.0


def to_canonical(state: ClassicalState, n: int) -> CanonicalState:
    k1, k2, _ = populations(state, n)
    phi1 = _wrap(-math.atan2(state.w1.imag, state.w1.real)) if state.w1 != 0 else 0.0
    phi2 = _wrap(-math.atan2(state.w2.imag, state.w2.real)) if state.w2 != 0 else 0.0
    return CanonicalState(float(k1), float(k2), phi1, phi2, n)


def from_canonical(cs: CanonicalState) -> ClassicalState:
    k3 = cs.n_particles - cs.K1 - cs.K2
    if cs.K1 < 0 or cs.K2 < 0:
        raise ChartError(f"negative occupation K1={cs.K1}, K2={cs.K2}")
    if k3 <= 0:
        raise ChartError(f"third-well occupation N - K1 - K2 = {k3} must be positive")
    return ClassicalState(
        math.sqrt(cs.K1 / k3) * complex(math.cos(cs.phi1), -math.sin(cs.phi1)),
        math.sqrt(cs.K2 / k3) * complex(math.cos(cs.phi2), -math.sin(cs.phi2)),
    )


def to_cartesian(state: ClassicalState, n: int) -> CartesianState:
    scale = math.sqrt(2.0 * n / (1.0 + state.norm2))
    z1, z2 = scale * state.w1, scale * state.w2
    return CartesianState(z1.real, z1.imag, z2.real, z2.imag, n)


def from_cartesian(cs: CartesianState) -> ClassicalState:
    rest = 2.0 * cs.n_particles - (cs.q1 ** 2 + cs.p1 ** 2 + cs.q2 ** 2 + cs.p2 ** 2)
    if rest <= 0:
        raise ChartError(f"q1^2+p1^2+q2^2+p2^2 must stay below 2N (slack {rest:.3g})")
    r = math.sqrt(rest)
    return ClassicalState(complex(cs.q1, cs.p1) / r, complex(cs.q2, cs.p2) / r)


def sphere_coords(state: ClassicalState, twin_tol: float = TWIN_TOL) -> SpherePoint:
    """Map a twin state (w1 = w2) to the unit sphere; theta is measured from -z."""
    if abs(state.w1 - state.w2) >= twin_tol:
        raise ValueError(
            f"state is not on the twin surface: |w1 - w2| = {abs(state.w1 - state.w2):.3g} "
            f">= {twin_tol:g}"
        )
    w = 0.5 * (state.w1 + state.w2)
    theta = 2.0 * math.atan(math.sqrt(2.0) * abs(w))
    phi = _wrap(-math.atan2(w.imag, w.real)) if w != 0 else 0.0
    st = math.sin(theta)
    return SpherePoint(theta, phi, (st * math.cos(phi), st * math.sin(phi), -math.cos(theta)))


def from_sphere(theta: float, phi: float) -> ClassicalState:
    """Twin state with sqrt(2) w1 = exp(-i phi) tan(theta/2)."""
    if not 0.0 <= theta < math.pi:
        raise ChartError(f"theta={theta} outside [0, pi) (theta = pi is the chart boundary)")
    w = math.tan(theta / 2.0) / math.sqrt(2.0) * complex(math.cos(phi), -math.sin(phi))
    return ClassicalState(w, w)


# ---------------------------------------------------------------------------
# integration

@dataclass
class Trajectory:
    times: np.ndarray
    w: np.ndarray  # shape (len(times), 2), complex
    energy_per_particle: np.ndarray
    max_energy_drift: float
    converged: bool
    params: ModelParams

    @property
    def states(self) -> List[ClassicalState]:
        return [ClassicalState(a, b) for a, b in self.w]

    def generator_series(self, n: Optional[int] = None) -> Dict[str, np.ndarray]:
        n = self.params.n_particles if n is None else n
        rows = [generator_expectations(s, n) for s in self.states]
        return {k: np.array([r[k] for r in rows]) for k in rows[0]}

    def iz(self) -> np.ndarray:
        """Twin/solitary population imbalance (|z1|^2 + |z2|^2 - |z3|^2) on the twin surface."""
        s = 1.0 + np.abs(self.w[:, 0]) ** 2 + np.abs(self.w[:, 1]) ** 2
        return (np.abs(self.w[:, 0]) ** 2 + np.abs(self.w[:, 1]) ** 2 - 1.0) / s

    def to_csv(self, path, n: Optional[int] = None) -> None:
        n = self.params.n_particles if n is None else n
        with open(path, "w") as fh:
            fh.write("t,re_w1,im_w1,re_w2,im_w2,K1,K2,K3,phi1,phi2,energy,js\n")
            for t, (w1, w2), e in zip(self.times, self.w, self.energy_per_particle):
                st = ClassicalState(w1, w2)
                cs = to_canonical(st, n)
                fh.write(
                    ",".join(
                        repr(float(v))
                        for v in (t, w1.real, w1.imag, w2.real, w2.imag, cs.K1, cs.K2, cs.K3,
                                  cs.phi1, cs.phi2, e, classical_js(st))
                    )
                    + "\n"
                )


def _overflow_event(t, y, *args):
    return CHART_LIMIT - (y[0] ** 2 + y[1] ** 2 + y[2] ** 2 + y[3] ** 2)


_overflow_event.terminal = True


def integrate(
    state0: ClassicalState,
    params: ModelParams,
    t_end: float,
    rel_tol: float = 1e-10,
    abs_tol: Optional[float] = None,
    sample_dt: float = 0.1,
) -> Trajectory:
    """Integrate the classical equations of motion with an adaptive 8(5,3) Runge-Kutta.

    The relative energy drift is audited; trajectories with drift above
    ``100 * rel_tol`` come back with ``converged = False``.

    Raises
    ------
    ChartOverflowError
        If ``|w1|^2 + |w2|^2`` exceeds :data:`CHART_LIMIT`.
    """
    if rel_tol <= 0 or (abs_tol is not None and abs_tol <= 0):
        raise ValueError("tolerances must be positive")
    if t_end <= 0 or sample_dt <= 0:
        raise ValueError("t_end and sample_dt must be positive")
    atol = rel_tol * 1e-2 if abs_tol is None else abs_tol
    n_samples = int(math.floor(t_end / sample_dt + 1e-9)) + 1
    t_eval = np.arange(n_samples) * sample_dt
    args = (params.chi, params.mu, params.omega)
    sol = solve_ivp(
        _rhs_real, (0.0, float(t_eval[-1]) if n_samples > 1 else t_end), state0.as_array(),
        method="DOP853", t_eval=t_eval, events=_overflow_event, rtol=rel_tol, atol=atol, args=args,
    )
    if sol.status == 1:
        y = sol.y_events[0][0]
        raise ChartOverflowError(float(sol.t_events[0][0]), float(np.dot(y, y)))
    if sol.status < 0:
        raise ChartOverflowError(float(sol.t[-1]) if sol.t.size else 0.0, float("nan"))
    w = np.stack([sol.y[0] + 1j * sol.y[1], sol.y[2] + 1j * sol.y[3]], axis=1)
    energy = np.array([_energy(a, b, *args) for a, b in w])
    e0 = energy[0]
    scale = abs(e0) if e0 != 0 else abs(params.omega)
    drift = float(np.max(np.abs(energy - e0)) / scale)
    return Trajectory(sol.t, w, energy, drift, drift < 100 * rel_tol, params)
