from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import annihilation, hubbard_matrix, lowest_eigenvalue, sum_matrix
from pect.fermion import add, excitation_generator, jordan_wigner, to_pauli_sum
from pect.models import HubbardSpec, build_hubbard, build_tfim
from pect.pauli import PauliString, number_operator


def test_two_site_hubbard_closed_form():
    h = build_hubbard(HubbardSpec(2, 1.0, 2.0))
    u, t = 2.0, 1.0
    assert lowest_eigenvalue(h.to_matrix()) == pytest.approx((u - math.sqrt(u * u + 16 * t * t)) / 2, abs=1e-12)
    assert lowest_eigenvalue(h.to_matrix()) == pytest.approx(1 - math.sqrt(5), abs=1e-12)


def test_decoupled_hubbard_is_constant():
    h = build_hubbard(HubbardSpec(2, 0.0, 0.0))
    assert h.is_constant()
    assert lowest_eigenvalue(h.to_matrix()) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("sites, t, u, boundary", [(2, 1.0, 2.0, "open"), (3, 1.0, 4.0, "open"), (3, 0.7, 1.5, "periodic")])
def test_hubbard_matches_matrix_construction(sites, t, u, boundary):
    h = build_hubbard(HubbardSpec(sites, t, u, boundary))
    ref = hubbard_matrix(sites, t, u, periodic=boundary == "periodic")
    np.testing.assert_allclose(h.to_matrix(), ref, atol=1e-12)
    assert lowest_eigenvalue(h.to_matrix()) == pytest.approx(lowest_eigenvalue(ref), abs=1e-10)


def test_hubbard_conserves_particle_number():
    h = build_hubbard(HubbardSpec(3, 1.0, 4.0)).to_matrix()
    n_op = number_operator(6).to_matrix()
    assert np.abs(h @ n_op - n_op @ h).max() < 1e-12


def test_half_filling_reference():
    spec = HubbardSpec(4)
    bits = spec.half_filling_state()
    assert bits.count("1") == 4
    assert bits[: spec.sites].count("1") == 2


def test_tfim_classical_limit():
    h = build_tfim(2, 0.0)
    assert h.terms == ((-1.0, PauliString.from_label(2, "Z0 Z1")),)
    assert lowest_eigenvalue(h.to_matrix()) == pytest.approx(-1.0)


def test_tfim_two_qubits_analytic():
    # one ZZ bond plus two X fields: the symmetric sector is [[-1, -2h], [-2h, 1]]
    for hx in (0.3, 1.0, 2.5):
        h = build_tfim(2, hx)
        assert lowest_eigenvalue(h.to_matrix()) == pytest.approx(-math.sqrt(1 + 4 * hx * hx), abs=1e-12)


def test_tfim_periodic_matches_matrix():
    h = build_tfim(4, 1.0, "periodic")
    terms = {f"Z{i} Z{(i + 1) % 4}": -1.0 for i in range(4)}
    terms.update({f"X{i}": -1.0 for i in range(4)})
    ref = sum_matrix(4, terms)
    np.testing.assert_allclose(h.to_matrix(), ref, atol=1e-12)


@pytest.mark.parametrize("bad", [dict(sites=1), dict(sites=2, boundary="twisted")])
def test_hubbard_rejects_bad_spec(bad):
    with pytest.raises(ValueError):
        HubbardSpec(**bad)


@settings(max_examples=30)
@given(st.integers(2, 4), st.data())
def test_jordan_wigner_ladder_matches_matrices(n, data):
    j = data.draw(st.integers(0, n - 1))
    k = data.draw(st.integers(0, n - 1))
    op = jordan_wigner(n, [(j, True), (k, False)], 1.0)
    if j != k:
        op = add(op, jordan_wigner(n, [(k, True), (j, False)], 1.0))
    op = to_pauli_sum(n, op)
    a = [annihilation(n, q) for q in range(n)]
    ref = a[j].conj().T @ a[k]
    if j != k:
        ref = ref + a[k].conj().T @ a[j]
    np.testing.assert_allclose(op.to_matrix(), ref, atol=1e-12)


def test_excitation_generator_is_hermitian_and_number_conserving():
    g = excitation_generator(4, [[(2, True), (3, True), (1, False), (0, False)]]).to_matrix()
    assert np.abs(g - g.conj().T).max() < 1e-12
    n_op = number_operator(4).to_matrix()
    assert np.abs(g @ n_op - n_op @ g).max() < 1e-12
