"""Exact N-boson dynamics in the three-mode Fock space.

States are complex amplitude vectors over :class:`~triplewell.model.FockBasis`.
The twin-condensate ("b") modes are

    b1^+ = (a1^+ + a2^+)/sqrt(2),   b2^+ = a3^+,   b3^+ = (a1^+ - a2^+)/sqrt(2),

and their occupation basis ``(m1, m2, m3)`` reuses the same enumeration order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.special import gammaln

from .model import FockBasis, ModelParams, build_hamiltonian, fock_basis, generator_matrices


class ConvergenceError(RuntimeError):
    """Numerical propagation failed or drifted beyond its audit bounds."""


@dataclass
class QuantumState:
    basis: FockBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.basis.dim,):
            raise ValueError(
                f"amplitude vector has shape {self.amplitudes.shape}, basis dimension is {self.basis.dim}"
            )

    @property
    def n_particles(self) -> int:
        return self.basis.n_particles

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "QuantumState":
        return QuantumState(self.basis, self.amplitudes / self.norm)

    def expect(self, op) -> float:
        """Real part of <psi|op|psi> (all operators used here are Hermitian)."""
        v = self.amplitudes
        return float(np.vdot(v, op @ v).real)

    def write_snapshot(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("index,n1,n2,n3,re,im\n")
            for i, (occ, c) in enumerate(zip(self.basis.states, self.amplitudes)):
                fh.write(f"{i},{occ[0]},{occ[1]},{occ[2]},{float(c.real)!r},{float(c.imag)!r}\n")


def fock_state(basis: FockBasis, occupations: Tuple[int, int, int]) -> QuantumState:
    occ = tuple(int(n) for n in occupations)
    if occ not in basis.index:
        raise ValueError(f"occupations {occ} do not sum to N={basis.n_particles}")
    amps = np.zeros(basis.dim, dtype=complex)
    amps[basis.index[occ]] = 1.0
    return QuantumState(basis, amps)


def coherent_state(n: int, w1: complex, w2: complex) -> QuantumState:
    """SU(3) coherent state |N; w1, w2>, built from log-factorials."""
    if n < 1:
        raise ValueError("n must be >= 1")
    w = np.array([w1, w2, 1.0], dtype=complex)
    if not np.all(np.isfinite(w)):
        raise ValueError("coherent-state coordinates must be finite")
    basis = fock_basis(n)
    z = w / np.linalg.norm(w)
    occ = basis.states
    log_mag = 0.5 * (gammaln(n + 1) - gammaln(occ + 1).sum(axis=1))
    phase = np.zeros(basis.dim)
    for j in range(3):
        r = abs(z[j])
        if r == 0:
            log_mag = np.where(occ[:, j] > 0, -np.inf, log_mag)
        else:
            log_mag = log_mag + occ[:, j] * math.log(r)
            phase = phase + occ[:, j] * np.angle(z[j])
    amps = np.exp(log_mag) * np.exp(1j * phase)
    return QuantumState(basis, amps / np.linalg.norm(amps))


# ---------------------------------------------------------------------------
# operator set and expectation values

@dataclass
class OperatorSet:
    basis: FockBasis
    ops: Dict[str, sp.csr_matrix]
    hamiltonian: Optional[sp.csr_matrix] = None

    def __getitem__(self, name: str) -> sp.csr_matrix:
        return self.ops[name]


@lru_cache(maxsize=16)
def _static_ops(n: int) -> Dict[str, sp.csr_matrix]:
    basis = fock_basis(n)
    ops = dict(generator_matrices(basis))
    for j in range(3):
        ops[f"n{j + 1}"] = basis.number(j).astype(complex)
    n1, n2, n3 = ops["n1"], ops["n2"], ops["n3"]
    a12 = basis.hop(0, 1)
    b1b2 = (basis.hop(0, 2) + basis.hop(1, 2)) / math.sqrt(2.0)  # b1^+ b2
    ops["Sx"] = (0.5 * (b1b2 + b1b2.T)).astype(complex)
    ops["Sy"] = (0.5j * (b1b2.T - b1b2)).tocsr()
    # b1^+ b1 = (n1 + n2 + a1^+a2 + a2^+a1)/2, b2^+ b2 = n3
    ops["Sz"] = (0.5 * (0.5 * (n1 + n2 + a12 + a12.T) - n3)).tocsr()
    ops["b3"] = (0.5 * (n1 + n2 - a12 - a12.T)).tocsr()
    return ops


def operator_set(basis: FockBasis, params: Optional[ModelParams] = None) -> OperatorSet:
    h = build_hamiltonian(params, basis) if params is not None else None
    return OperatorSet(basis, _static_ops(basis.n_particles), h)


@dataclass
class ExpectationSet:
    time: float
    populations: Tuple[float, float, float]
    generators: Dict[str, float]
    js: float
    iz: float
    b3_occupation: float
    purity: float
    energy: Optional[float] = None
    iz_su2: Optional[float] = None


def _purity_from(gen: Dict[str, float], n: int) -> float:
    total = gen["Q1"] ** 2 / 3.0 + gen["Q2"] ** 2 / 4.0
    total += sum(gen[f"P{j}"] ** 2 + gen[f"J{j}"] ** 2 for j in (1, 2, 3)) / 12.0
    return 9.0 * total / n ** 2


def expectations(state: QuantumState, ops: OperatorSet, time: float = 0.0) -> ExpectationSet:
    """Expectation values of one state.

    ``iz`` is the twin/solitary population imbalance ``<n1 + n2 - n3>/N``;
    ``iz_su2`` is ``(2/N)<S_z>`` built from the b modes.  The two coincide
    whenever the opposite-phase mode b3 is empty and differ by
    ``<b3^+ b3>/N`` otherwise.
    """
    n = state.n_particles
    gen = {name: state.expect(ops[name]) for name in ("Q1", "Q2", "P1", "P2", "P3", "J1", "J2", "J3")}
    pops = tuple(state.expect(ops[f"n{j}"]) for j in (1, 2, 3))
    return ExpectationSet(
        time=time,
        populations=pops,
        generators=gen,
        js=gen["J1"] + gen["J2"] + gen["J3"],
        iz=(pops[0] + pops[1] - pops[2]) / n,
        iz_su2=2.0 * state.expect(ops["Sz"]) / n,
        b3_occupation=state.expect(ops["b3"]),
        purity=_purity_from(gen, n),
        energy=state.expect(ops.hamiltonian) if ops.hamiltonian is not None else None,
    )


def purity(state: QuantumState) -> float:
    """Generalized su(3) purity; 1 exactly on coherent states."""
    ops = _static_ops(state.n_particles)
    gen = {name: state.expect(ops[name]) for name in ("Q1", "Q2", "P1", "P2", "P3", "J1", "J2", "J3")}
    return _purity_from(gen, state.n_particles)


def b3_occupation(state: QuantumState) -> float:
    """Occupation of the opposite-phase mode b3."""
    return state.expect(_static_ops(state.n_particles)["b3"])


# ---------------------------------------------------------------------------
# twin-condensate basis

@lru_cache(maxsize=8)
def twin_basis_matrix(n: int) -> sp.csr_matrix:
    """Fock-space matrix taking a-basis amplitudes to b-basis amplitudes."""
    basis = fock_basis(n)
    rows, cols, vals = [], [], []
    lg = gammaln(np.arange(n + 2))
    for col, (n1, n2, n3) in enumerate(basis.states):
        i = np.arange(n1 + 1)
        log_ci = lg[n1 + 1] - lg[i + 1] - lg[n1 - i + 1]
        for k in range(n2 + 1):
            m1 = i + k
            m3 = n1 + n2 - m1
            log_mag = (
                log_ci + lg[n2 + 1] - lg[k + 1] - lg[n2 - k + 1]
                + 0.5 * (lg[m1 + 1] + lg[m3 + 1] - lg[n1 + 1] - lg[n2 + 1])
                - 0.5 * (n1 + n2) * math.log(2.0)
            )
            sign = -1.0 if (n2 - k) % 2 else 1.0
            rows.extend(basis.index[(int(a), int(n3), int(b))] for a, b in zip(m1, m3))
            cols.extend([col] * len(i))
            vals.extend(sign * np.exp(log_mag))
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim))
    mat.sum_duplicates()
    return mat


def twin_transform(state: QuantumState) -> np.ndarray:
    """Amplitudes of ``state`` over the b-mode occupations (m1, m2, m3)."""
    return twin_basis_matrix(state.n_particles) @ state.amplitudes


# ---------------------------------------------------------------------------
# propagation

@dataclass
class Propagation:
    times: np.ndarray
    amplitudes: np.ndarray  # shape (len(times), dim)
    basis: FockBasis
    max_norm_drift: float
    max_energy_drift: float
    converged: bool

    def __iter__(self) -> Iterator[Tuple[float, QuantumState]]:
        for t, v in zip(self.times, self.amplitudes):
            yield float(t), QuantumState(self.basis, v)

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> QuantumState:
        return QuantumState(self.basis, self.amplitudes[i])


def propagate(
    state: QuantumState,
    h,
    t_end: float,
    rel_tol: float = 1e-11,
    sample_dt: float = 0.1,
    abs_tol: Optional[float] = None,
) -> Propagation:
    """Solve i d|psi>/dt = H |psi> with an adaptive Runge-Kutta (DOP853).

    Samples are renormalized when the norm drift is below 1e-8; beyond that, or
    when <H> drifts by more than 1e-8 relative, ``converged`` is False.
    """
    h = sp.csr_matrix(h)
    if h.shape != (state.basis.dim, state.basis.dim):
        raise ValueError(f"Hamiltonian shape {h.shape} does not match basis dimension {state.basis.dim}")
    if t_end <= 0 or sample_dt <= 0 or rel_tol <= 0:
        raise ValueError("t_end, sample_dt and rel_tol must be positive")
    atol = rel_tol * 1e-2 if abs_tol is None else abs_tol
    n_samples = int(math.floor(t_end / sample_dt + 1e-9)) + 1
    t_eval = np.arange(n_samples) * sample_dt
    minus_ih = (-1j * h).tocsr()

    def rhs(t, y):
        return minus_ih @ y

    psi0 = state.amplitudes / state.norm
    if n_samples == 1:
        amps = psi0[None, :]
        times = t_eval
    else:
        sol = solve_ivp(rhs, (0.0, float(t_eval[-1])), psi0, method="DOP853", t_eval=t_eval,
                        rtol=rel_tol, atol=atol)
        if sol.status != 0:
            raise ConvergenceError(f"Schrodinger propagation failed: {sol.message}")
        amps = sol.y.T.copy()
        times = sol.t
    norms = np.linalg.norm(amps, axis=1)
    norm_drift = float(np.max(np.abs(norms - 1.0)))
    if norm_drift < 1e-8:
        amps /= norms[:, None]
    energies = np.einsum("ij,ij->i", amps.conj(), (h @ amps.T).T).real
    e0 = energies[0]
    scale = abs(e0) if e0 != 0 else 1.0
    energy_drift = float(np.max(np.abs(energies - e0)) / scale)
    converged = norm_drift < 1e-8 and energy_drift < 1e-8
    return Propagation(times, amps, state.basis, norm_drift, energy_drift, converged)


def time_series(prop: Propagation, ops: OperatorSet) -> List[ExpectationSet]:
    return [expectations(st, ops, t) for t, st in prop]


def write_time_series(series: List[ExpectationSet], path) -> None:
    with open(path, "w") as fh:
        fh.write("t,n1,n2,n3,iz,js,purity,b3,energy\n")
        for e in series:
            energy = float("nan") if e.energy is None else e.energy
            vals = (e.time, *e.populations, e.iz, e.js, e.purity, e.b3_occupation, energy)
            fh.write(",".join(repr(float(v)) for v in vals) + "\n")
