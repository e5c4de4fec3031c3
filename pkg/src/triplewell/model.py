"""Three-mode model: parameters, fixed-N Fock basis, Hamiltonian and su(3) generators.

Conventions
-----------
* hbar = 1; times are in units of 1/|omega|.
* Fock states are triples ``(n1, n2, n3)`` with ``n1 + n2 + n3 = N`` ordered
  lexicographically in ``(n1, n2)``.
* Generator index convention: ``P_k``/``J_k`` couple mode ``k`` with mode
  ``j = (k + 1) mod 3 + 1``, i.e. ``P1 ~ (1, 3)``, ``P2 ~ (2, 1)``, ``P3 ~ (3, 2)``.
* :func:`build_hamiltonian` is the bosonic form with all number-only constants
  dropped; the generator form differs from it by ``kappa (N**2/3 - N)`` times
  the identity.  Spectra are therefore defined up to that shift.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations
from typing import Dict, Iterator, Optional, Tuple

import numpy as np
import scipy.sparse as sp

GENERATOR_NAMES = ("Q1", "Q2", "P1", "P2", "P3", "J1", "J2", "J3")

# (k, j) mode pairs of P_k / J_k, zero based.
_GEN_PAIRS = {1: (0, 2), 2: (1, 0), 3: (2, 1)}


class ChartError(ValueError):
    """Raised when a state falls on (or beyond) the boundary of a coordinate chart."""


@dataclass(frozen=True)
class TrapGeometry:
    """Geometry of the triple-well trap, in units with hbar = 1.

    Either ``V0`` or the pair ``(scattering_length, mass)`` must be given;
    when both are present they have to agree (``V0 = 4 pi hbar^2 a / m``).
    """

    q0: float
    d: float
    V0: Optional[float] = None
    omega_trap: Optional[float] = None
    mass: Optional[float] = None
    scattering_length: Optional[float] = None
    hbar: float = 1.0

    def __post_init__(self):
        if not (self.q0 > 0 and self.d > 0):
            raise ValueError(f"q0 and d must be positive (got q0={self.q0}, d={self.d})")
        if self.q0 < 3 * self.d:
            warnings.warn(
                f"q0/d = {self.q0 / self.d:.3g} < 3: localized modes overlap strongly, "
                "three-mode truncation is questionable",
                stacklevel=3,
            )
        v0_from_a = None
        if self.scattering_length is not None and self.mass is not None:
            v0_from_a = 4 * math.pi * self.hbar ** 2 * self.scattering_length / self.mass
        if self.V0 is None:
            if v0_from_a is None:
                raise ValueError("TrapGeometry needs V0 or (scattering_length, mass)")
            object.__setattr__(self, "V0", v0_from_a)
        elif v0_from_a is not None:
            scale = max(abs(self.V0), abs(v0_from_a))
            if scale > 0 and abs(self.V0 - v0_from_a) > 1e-12 * scale:
                raise ValueError(
                    f"V0={self.V0!r} inconsistent with 4 pi hbar^2 a / m = {v0_from_a!r}"
                )

    @property
    def epsilon(self) -> float:
        """Overlap of neighbouring localized modes, exp(-3 q0^2 / 4 d^2)."""
        return math.exp(-3.0 * self.q0 ** 2 / (4.0 * self.d ** 2))


def derive_collision_rates(geometry: TrapGeometry) -> Tuple[float, float, float]:
    """Return ``(epsilon, kappa, lambda)`` for a trap geometry."""
    eps = geometry.epsilon
    kappa = geometry.V0 / (2 ** 2.5 * math.pi ** 1.5 * geometry.d ** 3)
    lam = kappa * eps ** 1.5
    return eps, kappa, lam


@dataclass(frozen=True)
class ModelParams:
    """Dynamical parameters of the three-mode condensate.

    ``chi`` and ``mu`` are the N-rescaled self- and cross-collision rates;
    ``kappa``, ``lam`` and the effective tunneling ``omega_eff`` are derived.
    For ``n_particles == 1`` the collision terms vanish and chi, mu are forced
    to zero (``collisionless`` is set).
    """

    omega: float
    n_particles: int
    chi: float = 0.0
    mu: float = 0.0
    collisionless: bool = field(default=False, compare=False)

    def __post_init__(self):
        if int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise ValueError(f"n_particles must be a positive integer, got {self.n_particles!r}")
        object.__setattr__(self, "n_particles", int(self.n_particles))
        if self.omega == 0:
            raise ValueError("omega must be nonzero (chi and mu are scaled by it)")
        if self.n_particles == 1:
            object.__setattr__(self, "chi", 0.0)
            object.__setattr__(self, "mu", 0.0)
            object.__setattr__(self, "collisionless", True)

    @property
    def kappa(self) -> float:
        n = self.n_particles
        return 0.0 if n == 1 else self.chi * self.omega / (n - 1)

    @property
    def lam(self) -> float:
        n = self.n_particles
        return 0.0 if n == 1 else self.mu * self.omega / (n - 1)

    @property
    def omega_eff(self) -> float:
        """Effective tunneling rate Omega + 2 Lambda (N - 1) = Omega (1 + 2 mu)."""
        return self.omega * (1.0 + 2.0 * self.mu)

    @property
    def physical(self) -> bool:
        """False when chi and mu have opposite signs (not reachable from a real trap)."""
        return self.chi * self.mu >= 0

    def replace(self, **changes) -> "ModelParams":
        kw = dict(omega=self.omega, n_particles=self.n_particles, chi=self.chi, mu=self.mu)
        kw.update(changes)
        return ModelParams(**kw)

    def to_config(self, geometry: Optional[TrapGeometry] = None) -> str:
        """Serialize to flat ``key = value`` lines."""
        lines = [
            f"omega = {float(self.omega)!r}",
            f"n = {self.n_particles}",
            f"chi = {float(self.chi)!r}",
            f"mu = {float(self.mu)!r}",
        ]
        if geometry is not None:
            for name in ("q0", "d", "V0", "omega_trap", "mass", "scattering_length", "hbar"):
                value = getattr(geometry, name)
                if value is not None:
                    lines.append(f"geometry.{name} = {float(value)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_config(cls, text: str) -> Tuple["ModelParams", Optional[TrapGeometry]]:
        values: Dict[str, str] = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"malformed config line: {raw!r}")
            values[key.strip()] = value.strip()
        params = cls(
            omega=float(values["omega"]),
            n_particles=int(values["n"]),
            chi=float(values.get("chi", 0.0)),
            mu=float(values.get("mu", 0.0)),
        )
        geo = {k[len("geometry."):]: float(v) for k, v in values.items() if k.startswith("geometry.")}
        return params, (TrapGeometry(**geo) if geo else None)


def params_from_rates(omega: float, kappa: float, lam: float, n: int) -> ModelParams:
    """Build :class:`ModelParams` from the bare rates (kappa, Lambda)."""
    if omega == 0:
        raise ValueError("omega must be nonzero: chi and mu are undefined")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n == 1:
        return ModelParams(omega, 1)
    return ModelParams(omega, n, chi=kappa * (n - 1) / omega, mu=lam * (n - 1) / omega)


class FockBasis:
    """Occupation-number basis of N bosons in three modes."""

    def __init__(self, n_particles: int):
        if n_particles < 0:
            raise ValueError("n_particles must be non-negative")
        self.n_particles = int(n_particles)
        n = self.n_particles
        self.states = np.array(
            [(n1, n2, n - n1 - n2) for n1 in range(n + 1) for n2 in range(n - n1 + 1)],
            dtype=np.int64,
        )
        self.index = {tuple(map(int, s)): i for i, s in enumerate(self.states)}

    @property
    def dim(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return self.dim

    def __iter__(self) -> Iterator[Tuple[int, int, int]]:
        return iter(self.index)

    def __repr__(self) -> str:
        return f"FockBasis(n_particles={self.n_particles}, dim={self.dim})"

    def hop(self, j: int, k: int) -> sp.csr_matrix:
        """Matrix of ``a_j^dagger a_k`` (zero-based mode labels)."""
        if j == k:
            return sp.diags(self.states[:, j].astype(float), format="csr")
        rows, cols, vals = [], [], []
        for col, occ in enumerate(self.states):
            if occ[k] == 0:
                continue
            new = occ.copy()
            new[k] -= 1
            new[j] += 1
            rows.append(self.index[tuple(map(int, new))])
            cols.append(col)
            vals.append(math.sqrt((occ[j] + 1) * occ[k]))
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.dim, self.dim))

    def number(self, j: int) -> sp.csr_matrix:
        return self.hop(j, j)


@lru_cache(maxsize=32)
def fock_basis(n_particles: int) -> FockBasis:
    """Cached :class:`FockBasis` constructor."""
    return FockBasis(n_particles)


def _clean(mat) -> sp.csr_matrix:
    out = sp.csr_matrix(mat, dtype=complex)
    out.sum_duplicates()
    out.eliminate_zeros()
    out.sort_indices()
    return out


def build_hamiltonian(params: ModelParams, basis: FockBasis) -> sp.csr_matrix:
    """Sparse matrix of the bosonic three-mode Hamiltonian.

    ``H = W' sum_{j!=k} a_j^+ a_k + kappa sum_j a_j^+2 a_j^2
    - 2 Lambda sum_{j,k,m distinct} a_j^+ a_j a_k^+ a_m``.
    """
    if basis.n_particles != params.n_particles:
        raise ValueError(
            f"basis built for N={basis.n_particles}, params have N={params.n_particles}"
        )
    occ = basis.states.astype(float)
    h = sp.csr_matrix((basis.dim, basis.dim))
    for j in range(3):
        for k in range(3):
            if j != k:
                h = h + params.omega_eff * basis.hop(j, k)
    h = h + params.kappa * sp.diags((occ * (occ - 1)).sum(axis=1))
    if params.lam != 0.0:
        for j, k, m in permutations(range(3)):
            h = h - 2.0 * params.lam * (sp.diags(occ[:, j]) @ basis.hop(k, m))
    return _clean(h)


def generator_matrices(basis: FockBasis) -> Dict[str, sp.csr_matrix]:
    """The eight su(3) generators plus ``JS = J1 + J2 + J3``."""
    n = [basis.number(j) for j in range(3)]
    gens = {
        "Q1": 0.5 * (n[0] - n[1]),
        "Q2": (n[0] + n[1] - 2 * n[2]) / 3.0,
    }
    for k, (a, b) in _GEN_PAIRS.items():
        fwd, back = basis.hop(a, b), basis.hop(b, a)
        gens[f"P{k}"] = fwd + back
        gens[f"J{k}"] = 1j * (fwd - back)
    gens["JS"] = gens["J1"] + gens["J2"] + gens["J3"]
    return {name: _clean(m) for name, m in gens.items()}


def generator_hamiltonian(params: ModelParams, basis: FockBasis) -> sp.csr_matrix:
    """The Hamiltonian assembled from su(3) generators (generator form).

    Equal to :func:`build_hamiltonian` minus ``kappa (N^2/3 - N)`` times identity.
    """
    g = generator_matrices(basis)
    n = params.n_particles
    lam = params.lam
    ptot = g["P1"] + g["P2"] + g["P3"]
    h = (params.omega_eff - 2 * lam * n / 3) * ptot
    h = h + 0.5 * params.kappa * (4 * g["Q1"] @ g["Q1"] + 3 * g["Q2"] @ g["Q2"])
    h = h + lam * (2 * g["Q1"] @ (g["P1"] - g["P3"]) + g["Q2"] @ (2 * g["P2"] - g["P1"] - g["P3"]))
    return _clean(h)


def observable_matrices(basis: FockBasis, geometry: TrapGeometry, epsilon: Optional[float] = None):
    """Position, momentum and angular-momentum operators to first order in epsilon.

    Wells sit at ``r1 = (-q0/2, sqrt(3) q0/2)``, ``r2 = (-q0/2, -sqrt(3) q0/2)``,
    ``r3 = (q0, 0)``.  ``epsilon`` defaults to the geometry's overlap.
    """
    eps = geometry.epsilon if epsilon is None else epsilon
    q0, d = geometry.q0, geometry.d
    g = generator_matrices(basis)
    s3 = math.sqrt(3.0)
    ops = {
        "x": -1.5 * q0 * g["Q2"] + 0.5 * eps * q0 * (0.5 * (g["P1"] + g["P3"]) - g["P2"]),
        "y": s3 * q0 * g["Q1"] + 0.25 * s3 * eps * q0 * (g["P1"] - g["P3"]),
        "px": 0.75 * eps * q0 / d ** 2 * (g["J3"] - g["J1"]),
        "py": 0.25 * s3 * eps * q0 / d ** 2 * (g["J1"] + g["J3"] - 2 * g["J2"]),
        "Lz": 0.25 * s3 * eps * q0 ** 2 / d ** 2 * g["JS"],
    }
    return {name: _clean(m) for name, m in ops.items()}


def mode_permutation_matrix(basis: FockBasis, perm: Tuple[int, int, int]) -> sp.csr_matrix:
    """Unitary relabeling mode ``j -> perm[j]`` lifted to Fock space (zero based)."""
    rows, cols = [], []
    for col, occ in enumerate(basis.states):
        new = [0, 0, 0]
        for j in range(3):
            new[perm[j]] = int(occ[j])
        rows.append(basis.index[tuple(new)])
        cols.append(col)
    return sp.csr_matrix((np.ones(basis.dim), (rows, cols)), shape=(basis.dim, basis.dim))


def write_coo(matrix, path) -> None:
    """Write a matrix as ``row col re im`` lines (deterministic row-major order)."""
    m = sp.coo_matrix(sp.csr_matrix(matrix))
    order = np.lexsort((m.col, m.row))
    with open(path, "w") as fh:
        for r, c, v in zip(m.row[order], m.col[order], np.asarray(m.data, dtype=complex)[order]):
            fh.write(f"{r} {c} {float(v.real)!r} {float(v.imag)!r}\n")


def read_coo(path, dim: int) -> sp.csr_matrix:
    data = np.loadtxt(path, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix((dim, dim), dtype=complex)
    return sp.csr_matrix(
        (data[:, 2] + 1j * data[:, 3], (data[:, 0].astype(int), data[:, 1].astype(int))),
        shape=(dim, dim),
    )
