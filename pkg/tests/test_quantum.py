import math

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings, strategies as st

from triplewell.classical import ClassicalState, classical_js, generator_expectations, integrate
from triplewell.model import ModelParams, build_hamiltonian, fock_basis, mode_permutation_matrix
from triplewell.quantum import (
    QuantumState,
    b3_occupation,
    coherent_state,
    expectations,
    fock_state,
    operator_set,
    propagate,
    purity,
    time_series,
    twin_transform,
    write_time_series,
)

VORTEX = complex(-0.5, math.sqrt(3) / 2)


def _purity_oracle(v, basis):
    """Generalized purity from explicit dense ladder operators."""
    n = basis.n_particles
    idx = basis.index
    dim = basis.dim

    def hop(j, k):
        m = np.zeros((dim, dim))
        for col, occ in enumerate(basis.states):
            occ = list(occ)
            if occ[k] == 0:
                continue
            amp = math.sqrt(occ[k])
            occ[k] -= 1
            amp *= math.sqrt(occ[j] + 1)
            occ[j] += 1
            m[idx[tuple(occ)], col] = amp
        return m

    e = {(j, k): np.vdot(v, hop(j, k) @ v) for j in range(3) for k in range(3)}
    # one-body density matrix rho_jk = <a_k^+ a_j>/N
    rho = np.array([[e[(k, j)] for k in range(3)] for j in range(3)]) / n
    return (3 * np.trace(rho @ rho).real - 1) / 2


def test_coherent_state_properties():
    s = coherent_state(12, 0.3 + 0.4j, -0.7)
    assert s.norm == pytest.approx(1.0, abs=1e-14)
    z = np.array([0.3 + 0.4j, -0.7, 1.0])
    z /= np.linalg.norm(z)
    ops = operator_set(s.basis)
    e = expectations(s, ops)
    assert np.allclose(e.populations, 12 * np.abs(z) ** 2, atol=1e-12)
    assert e.purity == pytest.approx(1.0, abs=1e-12)
    gen = generator_expectations(ClassicalState(0.3 + 0.4j, -0.7), 12)
    for k, v in e.generators.items():
        assert v == pytest.approx(gen[k], abs=1e-11)
    assert e.js == pytest.approx(gen["JS"], abs=1e-11)


def test_coherent_state_single_particle_and_fock_limit():
    s = coherent_state(1, 1.0, -1.0)
    b = s.basis
    assert np.allclose(s.amplitudes[[b.index[(1, 0, 0)], b.index[(0, 1, 0)], b.index[(0, 0, 1)]]],
                       np.array([1, -1, 1]) / math.sqrt(3))
    s = coherent_state(7, 0.0, 0.0)
    assert abs(s.amplitudes[s.basis.index[(0, 0, 7)]]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        coherent_state(0, 0.1, 0.2)


def test_vortex_angular_momentum():
    n = 30
    s = coherent_state(n, VORTEX, VORTEX.conjugate())
    e = expectations(s, operator_set(s.basis))
    assert abs(e.js / n - math.sqrt(3)) < 1e-10
    assert abs(classical_js(ClassicalState(VORTEX, VORTEX.conjugate())) - math.sqrt(3)) < 1e-12


def test_twin_coherent_state_in_b_basis():
    s = coherent_state(9, 0.6 - 0.2j, 0.6 - 0.2j)
    ops = operator_set(s.basis)
    assert abs(expectations(s, ops).generators["Q1"]) < 1e-12
    b = twin_transform(s)
    m3 = s.basis.states[:, 2]
    assert np.abs(b[m3 > 0]).max() < 1e-12
    assert np.linalg.norm(b) == pytest.approx(1.0, abs=1e-12)
    assert b3_occupation(s) < 1e-12


def test_twin_transform_examples():
    basis = fock_basis(5)
    b = twin_transform(fock_state(basis, (0, 0, 5)))
    assert abs(b[basis.index[(0, 5, 0)]]) == pytest.approx(1.0)
    one = fock_basis(1)
    b = twin_transform(fock_state(one, (1, 0, 0)))
    assert np.allclose(np.abs(b[[one.index[(1, 0, 0)], one.index[(0, 0, 1)]]]), [1 / math.sqrt(2)] * 2)
    rng = np.random.default_rng(2)
    v = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    v /= np.linalg.norm(v)
    assert np.linalg.norm(twin_transform(QuantumState(basis, v))) == pytest.approx(1.0, abs=1e-12)


def test_cat_state_purity():
    for n in (2, 5, 30):
        basis = fock_basis(n)
        v = np.zeros(basis.dim, dtype=complex)
        v[basis.index[(n, 0, 0)]] = v[basis.index[(0, n, 0)]] = 1 / math.sqrt(2)
        assert abs(purity(QuantumState(basis, v)) - 0.25) < 1e-12
        if n <= 5:
            assert abs(_purity_oracle(v, basis) - 0.25) < 1e-12


def test_purity_matches_oracle_and_bounds():
    basis = fock_basis(5)
    rng = np.random.default_rng(4)
    swap = mode_permutation_matrix(basis, (1, 0, 2))
    for _ in range(1000):
        v = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
        v /= np.linalg.norm(v)
        p = purity(QuantumState(basis, v))
        assert -1e-12 <= p <= 1 + 1e-12
        assert purity(QuantumState(basis, swap @ v)) == pytest.approx(p, abs=1e-12)
    for v in rng.normal(size=(10, basis.dim)):
        v = v / np.linalg.norm(v)
        assert purity(QuantumState(basis, v)) == pytest.approx(_purity_oracle(v, basis), abs=1e-12)


def test_fock_state_errors():
    with pytest.raises(ValueError):
        fock_state(fock_basis(3), (1, 1, 0))
    with pytest.raises(ValueError):
        QuantumState(fock_basis(3), np.zeros(4))


def test_eigenstate_is_stationary():
    p = ModelParams(-1.0, 6, 2.0, 0.1)
    h = build_hamiltonian(p, fock_basis(6))
    vals, vecs = np.linalg.eigh(h.toarray())
    prop = propagate(QuantumState(fock_basis(6), vecs[:, 3]), h, t_end=5.0, sample_dt=0.5)
    overlaps = np.abs(prop.amplitudes @ vecs[:, 3].conj())
    assert np.allclose(overlaps, 1.0, atol=1e-9)
    assert prop.converged


@pytest.mark.parametrize("n", [2, 4, 6])
def test_propagation_matches_dense_eigendecomposition(n):
    rng = np.random.default_rng(n)
    p = ModelParams(-1.0, n, rng.uniform(-5, 5), rng.uniform(-0.5, 1))
    basis = fock_basis(n)
    h = build_hamiltonian(p, basis).toarray()
    v = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    v /= np.linalg.norm(v)
    prop = propagate(QuantumState(basis, v), h, t_end=10.0, sample_dt=1.0)
    vals, vecs = np.linalg.eigh(h)
    for t, amps in zip(prop.times, prop.amplitudes):
        exact = vecs @ (np.exp(-1j * vals * t) * (vecs.conj().T @ v))
        assert np.linalg.norm(amps - exact) < 1e-9
    assert np.allclose(prop.amplitudes[-1], la.expm(-1j * h * 10.0) @ v, atol=1e-9)


def test_linear_case_matches_classical():
    n = 30
    p = ModelParams(-1.0, n, 0.0, 0.0)
    w0 = (0.4 - 0.3j, -1.2 + 0.5j)
    s = coherent_state(n, *w0)
    ops = operator_set(s.basis, p)
    series = time_series(propagate(s, ops.hamiltonian, t_end=10.0, sample_dt=0.5), ops)
    traj = integrate(ClassicalState(*w0), p, t_end=10.0, sample_dt=0.5)
    gen = traj.generator_series(n)
    for i, e in enumerate(series):
        for k, v in e.generators.items():
            assert abs(v - gen[k][i]) < 1e-6
        assert abs(e.purity - 1) < 1e-8


def test_twin_subspace_keeps_q1_zero():
    n = 12
    p = ModelParams(-1.0, n, 4.0, 0.04)
    s = coherent_state(n, 0.3, 0.3)
    ops = operator_set(s.basis, p)
    series = time_series(propagate(s, ops.hamiltonian, t_end=20.0, sample_dt=1.0), ops)
    assert max(abs(e.generators["Q1"]) for e in series) < 1e-9 * n


def test_b3_activation_and_iz_forms():
    n = 12
    p = ModelParams(-1.0, n, 4.0, 0.4)
    s = coherent_state(n, 0.0, 0.0)
    ops = operator_set(s.basis, p)
    series = time_series(propagate(s, ops.hamiltonian, t_end=20.0, sample_dt=0.5), ops)
    assert series[0].b3_occupation < 1e-10
    assert max(e.b3_occupation for e in series) > 0.01 * n
    for e in series:
        assert e.iz - e.iz_su2 == pytest.approx(e.b3_occupation / n, abs=1e-10)
        assert e.energy == pytest.approx(series[0].energy, rel=1e-8)


def test_no_b3_activation_in_linear_case():
    n = 10
    p = ModelParams(-1.0, n, 0.0, 0.0)
    s = coherent_state(n, 0.0, 0.0)
    ops = operator_set(s.basis, p)
    series = time_series(propagate(s, ops.hamiltonian, t_end=10.0, sample_dt=1.0), ops)
    assert max(e.b3_occupation for e in series) < 1e-9


def test_propagate_validation():
    basis = fock_basis(3)
    h = build_hamiltonian(ModelParams(-1.0, 3), basis)
    s = fock_state(basis, (3, 0, 0))
    with pytest.raises(ValueError):
        propagate(s, build_hamiltonian(ModelParams(-1.0, 4), fock_basis(4)), 1.0)
    with pytest.raises(ValueError):
        propagate(s, h, -1.0)


def test_time_series_csv(tmp_path):
    basis = fock_basis(4)
    p = ModelParams(-1.0, 4, 1.0, 0.0)
    ops = operator_set(basis, p)
    series = time_series(propagate(fock_state(basis, (4, 0, 0)), ops.hamiltonian, 1.0, sample_dt=0.5), ops)
    path = tmp_path / "q.csv"
    write_time_series(series, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,n1,n2,n3,iz,js,purity,b3,energy"
    assert len(lines) == 4
    assert float(lines[1].split(",")[1]) == 4.0


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 8), st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3))
def test_coherent_states_have_unit_purity(n, w1, w2):
    s = coherent_state(n, w1, w2)
    assert purity(s) == pytest.approx(1.0, abs=1e-10)
    assert s.norm == pytest.approx(1.0, abs=1e-12)
