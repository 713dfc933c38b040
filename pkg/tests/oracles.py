"""Independent reference implementations used as test oracles."""

from __future__ import annotations

from functools import reduce

import numpy as np

I2 = np.eye(2, dtype=complex)
PAULI = {
    "I": I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_matrix(n: int, ops: dict[int, str]) -> np.ndarray:
    """Kronecker product with qubit 0 as the leftmost (most significant) factor."""
    return reduce(np.kron, [PAULI[ops.get(q, "I")] for q in range(n)])


def sum_matrix(n: int, terms: dict[str, float]) -> np.ndarray:
    out = np.zeros((2**n, 2**n), dtype=complex)
    for label, c in terms.items():
        out += c * pauli_matrix(n, parse_label(label))
    return out


def parse_label(label: str) -> dict[int, str]:
    if label.strip() == "I":
        return {}
    return {int(tok[1:]): tok[0] for tok in label.split()}


def rotation_matrix(n: int, ops: dict[int, str], angle: float) -> np.ndarray:
    """exp(-i angle P) via cos/sin since P squares to identity."""
    p = pauli_matrix(n, ops)
    return np.cos(angle) * np.eye(2**n) - 1j * np.sin(angle) * p


def basis(bits: str) -> np.ndarray:
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


def circuit_unitary_state(concrete) -> np.ndarray:
    """Apply a ConcreteCircuit by dense matrix products."""
    v = basis(concrete.initial_state)
    for g in concrete.gates:
        v = rotation_matrix(concrete.n_qubits, g.generator.as_dict(), g.angle) @ v
    return v


def annihilation(n: int, j: int) -> np.ndarray:
    """a_j = Z_0...Z_{j-1} (X_j + i Y_j)/2 built from matrices."""
    ops = [PAULI["Z"]] * j + [(PAULI["X"] + 1j * PAULI["Y"]) / 2] + [I2] * (n - j - 1)
    return reduce(np.kron, ops)


def hubbard_matrix(sites: int, t: float, u: float, periodic: bool = False) -> np.ndarray:
    n = 2 * sites
    a = [annihilation(n, j) for j in range(n)]
    ad = [m.conj().T for m in a]
    h = np.zeros((2**n, 2**n), dtype=complex)
    bonds = [(i, i + 1) for i in range(sites - 1)]
    if periodic and sites > 2:
        bonds.append((sites - 1, 0))
    for i, j in bonds:
        for off in (0, sites):
            p, q = i + off, j + off
            h += -t * (ad[p] @ a[q] + ad[q] @ a[p])
    for i in range(sites):
        h += u * (ad[i] @ a[i]) @ (ad[i + sites] @ a[i + sites])
    return h


def lowest_eigenvalue(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(m)[0])


def threshold_update(k: int, h: float, n_p: int, delta: float) -> float:
    if k > (1 + delta) * n_p:
        return h / 2
    if k < (1 - delta) * n_p:
        return h * 2
    return h
