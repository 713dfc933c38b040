from __future__ import annotations

import math

import numpy as np
import pytest

from oracles import hubbard_matrix, lowest_eigenvalue
from pect.models import HubbardSpec, build_hubbard, build_tfim
from pect.oracle import apply_hamiltonian, ground_state, lanczos
from pect.pauli import PauliSum
from pect.simulator import DimensionError, Statevector, compile_sum, expectation


def test_single_z():
    res = ground_state(PauliSum.from_dict(1, {"Z0": 1.0}))
    assert res.ground_energy == pytest.approx(-1.0)
    assert abs(res.ground_state.amplitudes[1]) == pytest.approx(1.0)


def test_tfim_two_qubits():
    assert ground_state(build_tfim(2, 1.0)).ground_energy == pytest.approx(-math.sqrt(5), abs=1e-12)


def test_two_site_hubbard():
    assert ground_state(build_hubbard(HubbardSpec(2))).ground_energy == pytest.approx(1 - math.sqrt(5), abs=1e-12)


@pytest.mark.parametrize("h", [build_tfim(8, 0.9, "periodic"), build_hubbard(HubbardSpec(4, 1.0, 3.0))])
def test_iterative_matches_dense(h):
    dense = ground_state(h, method="dense")
    it = ground_state(h, method="iterative")
    assert it.ground_energy == pytest.approx(dense.ground_energy, abs=1e-9)
    assert it.residual <= 1e-8
    assert dense.residual < 1e-8


def test_iterative_residual_bound_twelve_qubits():
    h = build_tfim(12, 1.0)
    res = ground_state(h, method="iterative")
    v = res.ground_state.amplitudes
    assert np.linalg.norm(apply_hamiltonian(h, v) - res.ground_energy * v) <= 1e-8


def test_hubbard_three_sites_against_fermion_matrices():
    h = build_hubbard(HubbardSpec(3, 1.0, 4.0))
    assert ground_state(h).ground_energy == pytest.approx(lowest_eigenvalue(hubbard_matrix(3, 1.0, 4.0)), abs=1e-10)


def test_apply_hamiltonian_examples():
    x = PauliSum.from_dict(1, {"X0": 1.0})
    np.testing.assert_allclose(apply_hamiltonian(x, np.array([1, 0], dtype=complex)), [0, 1])
    z2 = PauliSum.from_dict(1, {"Z0": 2.0})
    np.testing.assert_allclose(apply_hamiltonian(z2, np.array([1, 0], dtype=complex)), [2, 0])


def test_apply_hamiltonian_matches_dense():
    rng = np.random.default_rng(0)
    h = build_hubbard(HubbardSpec(3, 0.8, 1.7))
    v = rng.normal(size=64) + 1j * rng.normal(size=64)
    np.testing.assert_allclose(apply_hamiltonian(h, v), h.to_matrix() @ v, atol=1e-12)
    v /= np.linalg.norm(v)
    assert np.vdot(v, apply_hamiltonian(h, v)).real == pytest.approx(expectation(h, Statevector(6, v)), abs=1e-12)


def test_dense_limit():
    with pytest.raises(DimensionError):
        ground_state(PauliSum.from_dict(13, {"Z0": 1.0}), method="dense")
    with pytest.raises(DimensionError):
        ground_state(PauliSum.from_dict(21, {"Z0": 1.0}), method="iterative")


def test_lanczos_is_seeded():
    op = compile_sum(build_tfim(6, 0.5))
    a = lanczos(op, seed=3)
    b = lanczos(op, seed=3)
    assert a[0] == b[0]


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        apply_hamiltonian(PauliSum.from_dict(2, {"Z0": 1.0}), np.ones(2))
