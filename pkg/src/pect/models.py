"""Built-in model Hamiltonians: 1D Fermi-Hubbard (Jordan-Wigner) and the transverse-field Ising chain."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

from .fermion import QubitOp, add, jordan_wigner, to_pauli_sum
from .pauli import PauliString, PauliSum

Boundary = Literal["open", "periodic"]


@dataclass(frozen=True)
class HubbardSpec:
    sites: int
    t_hop: float = 1.0
    u_int: float = 2.0
    boundary: Boundary = "open"

    def __post_init__(self):
        if self.sites < 2:
            raise ValueError("Hubbard chain needs at least 2 sites")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def n_qubits(self) -> int:
        return 2 * self.sites

    def up(self, site: int) -> int:
        return site

    def down(self, site: int) -> int:
        return self.sites + site

    def half_filling_state(self) -> str:
        """Neel-like reference: up electrons on even sites, down on odd sites."""
        bits = ["0"] * self.n_qubits
        for i in range(self.sites):
            if i % 2 == 0:
                bits[self.up(i)] = "1"
            else:
                bits[self.down(i)] = "1"
        n_up = (self.sites + 1) // 2
        n_down = self.sites // 2
        assert bits.count("1") == n_up + n_down == self.sites
        return "".join(bits)


def _bonds(sites: int, boundary: Boundary) -> list[tuple[int, int]]:
    bonds = [(i, i + 1) for i in range(sites - 1)]
    # two sites share a single bond even with periodic wrapping
    if boundary == "periodic" and sites > 2:
        bonds.append((sites - 1, 0))
    return bonds


def build_hubbard(spec: HubbardSpec) -> PauliSum:
    """Qubit Hamiltonian of ``-t sum (c+_i c_j + h.c.) + U sum n_up n_down``.

    Spin-up orbitals occupy qubits ``0..sites-1``, spin-down ``sites..2*sites-1``.
    """
    n = spec.n_qubits
    op: QubitOp = {}
    for i, j in _bonds(spec.sites, spec.boundary):
        for orb in (spec.up, spec.down):
            p, q = orb(i), orb(j)
            op = add(op, jordan_wigner(n, [(p, True), (q, False)], -spec.t_hop))
            op = add(op, jordan_wigner(n, [(q, True), (p, False)], -spec.t_hop))
    for i in range(spec.sites):
        a, b = spec.up(i), spec.down(i)
        op = add(op, jordan_wigner(n, [(a, True), (a, False), (b, True), (b, False)], spec.u_int))
    return to_pauli_sum(n, op)


def build_tfim(n: int, h: float, boundary: Boundary = "open", coupling: float = 1.0) -> PauliSum:
    """``-J sum Z_i Z_{i+1} - h sum X_i``."""
    if n < 2:
        raise ValueError("TFIM chain needs at least 2 qubits")
    if boundary not in ("open", "periodic"):
        raise ValueError(f"unknown boundary {boundary!r}")
    terms = []
    for i, j in _bonds(n, boundary):
        terms.append((-coupling, PauliString(n, ((i, "Z"), (j, "Z")))))
    for i in range(n):
        terms.append((-h, PauliString(n, ((i, "X"),))))
    return PauliSum.from_terms(n, terms)
