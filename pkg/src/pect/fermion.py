"""Jordan-Wigner images of fermionic ladder-operator products.

Operators are kept as ``{PauliString: complex}`` dictionaries while they are
being expanded; the callers turn Hermitian results into :class:`PauliSum`.
Spin orbital ``j`` lives on qubit ``j`` and occupation 1 means bit 1, so the
number operator maps to ``(1 - Z_j) / 2``.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from .pauli import DROP_TOL, PauliString, PauliSum

LadderOp = tuple[int, bool]  # (spin orbital, is_creation)
QubitOp = dict[PauliString, complex]


def ladder(n_qubits: int, index: int, creation: bool) -> QubitOp:
    zs = tuple((k, "Z") for k in range(index))
    x = PauliString(n_qubits, zs + ((index, "X"),))
    y = PauliString(n_qubits, zs + ((index, "Y"),))
    return {x: 0.5, y: (-0.5j if creation else 0.5j)}


def multiply(a: QubitOp, b: QubitOp) -> QubitOp:
    out: QubitOp = {}
    for pa, ca in a.items():
        for pb, cb in b.items():
            phase, p = pa * pb
            out[p] = out.get(p, 0.0) + ca * cb * phase
    return {p: c for p, c in out.items() if abs(c) > DROP_TOL}


def add(a: QubitOp, b: QubitOp, scale: complex = 1.0) -> QubitOp:
    out = dict(a)
    for p, c in b.items():
        out[p] = out.get(p, 0.0) + scale * c
    return {p: c for p, c in out.items() if abs(c) > DROP_TOL}


def jordan_wigner(n_qubits: int, ops: Sequence[LadderOp], coeff: complex = 1.0) -> QubitOp:
    """Map ``coeff * op_0 op_1 ...`` (leftmost acts last) to Pauli strings."""
    out: QubitOp = {PauliString(n_qubits): complex(coeff)}
    for index, creation in ops:
        out = multiply(out, ladder(n_qubits, index, creation))
    return out


def adjoint_ops(ops: Sequence[LadderOp]) -> list[LadderOp]:
    return [(i, not c) for i, c in reversed(ops)]


def to_pauli_sum(n_qubits: int, op: QubitOp) -> PauliSum:
    """Convert a Hermitian qubit operator; raises if an imaginary part survives."""
    return PauliSum.from_terms(n_qubits, ((c, p) for p, c in op.items()))


def excitation_generator(n_qubits: int, excitations: Iterable[Sequence[LadderOp]]) -> PauliSum:
    """Hermitian generator ``G = i (T - T^dagger)`` with ``T`` the summed excitations.

    ``exp(theta (T - T^dagger)) == exp(-i theta G)``.
    """
    anti: QubitOp = {}
    for ops in excitations:
        anti = add(anti, jordan_wigner(n_qubits, ops))
        anti = add(anti, jordan_wigner(n_qubits, adjoint_ops(ops)), scale=-1.0)
    return to_pauli_sum(n_qubits, {p: 1j * c for p, c in anti.items()})
