"""Ansatz builders: LDCA, UCC-style generator pools and a hardware-efficient brick circuit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

from .circuit import Gate, LayeredCircuit, ParamSlot
from .fermion import LadderOp, excitation_generator
from .pauli import PauliString, PauliSum

# uniform initialization ranges per ansatz family
DEFAULT_INIT = {
    "ldca": (0.0, 4 * math.pi),
    "upccgsd": (-0.1, 0.1),
    "uccsd": (-0.1, 0.1),
    "brick": (0.0, 2 * math.pi),
}

LDCA_BLOCK = (
    # (Pauli pair, slot within block, sign)
    ("XX", 0, 1),
    ("YY", 0, 1),
    ("ZZ", 2, 1),
    ("XY", 1, 1),
    ("YX", 1, -1),
)


def _pair(n: int, i: int, j: int, labels: str) -> PauliString:
    return PauliString(n, ((i, labels[0]), (j, labels[1])))


@dataclass(frozen=True)
class LdcaSpec:
    n_qubits: int
    superlayers: int = 1
    initial_occupation: str | None = None
    phase_layer: bool = True

    def __post_init__(self):
        if self.n_qubits < 2 or self.n_qubits % 2:
            raise ValueError("LDCA needs an even number of qubits >= 2")
        if self.superlayers < 1:
            raise ValueError("LDCA needs at least one superlayer")
        if self.initial_occupation is not None and len(self.initial_occupation) != self.n_qubits:
            raise ValueError("initial_occupation length must equal n_qubits")

    @property
    def n_blocks(self) -> int:
        n = self.n_qubits
        return self.superlayers * (n // 2) * (n - 1)

    @property
    def n_block_params(self) -> int:
        return 3 * self.n_blocks

    @property
    def n_params(self) -> int:
        return self.n_block_params + (self.n_qubits if self.phase_layer else 0)


def ldca_blocks(n: int, superlayers: int) -> list[tuple[int, int]]:
    """Qubit pairs of every two-qubit block, in circuit order."""
    blocks = []
    for _ in range(superlayers):
        for _ in range(math.ceil(n / 2)):
            for start in (0, 1):
                blocks.extend((q, q + 1) for q in range(start, n - 1, 2))
    return blocks


def build_ldca(spec: LdcaSpec) -> LayeredCircuit:
    """Particle-conserving LDCA; one PECT layer per two-qubit block.

    Each block applies ``exp(-i theta/2 P)`` for ``P`` in XX, YY, ZZ, XY, YX
    with XX/YY sharing one slot and XY/YX sharing another with opposite
    signs. With ``phase_layer`` a final layer of single-qubit Z rotations
    (one slot per qubit) is appended.
    """
    n = spec.n_qubits
    layers, sizes = [], []
    for l, (i, j) in enumerate(ldca_blocks(n, spec.superlayers)):
        gates = tuple(
            Gate(_pair(n, i, j, labels), 0.5, ParamSlot(l, slot, sign)) for labels, slot, sign in LDCA_BLOCK
        )
        layers.append(gates)
        sizes.append(3)
    if spec.phase_layer:
        l = len(layers)
        layers.append(tuple(Gate(PauliString(n, ((q, "Z"),)), 0.5, ParamSlot(l, q)) for q in range(n)))
        sizes.append(n)
    occ = spec.initial_occupation or "1" * (n // 2) + "0" * (n // 2)
    return LayeredCircuit(n, tuple(layers), tuple(sizes), occ, name="ldca")


def build_brick_ansatz(
    n_qubits: int, layers: int, initial_state: str | None = None, rotation_axes: str = "YX"
) -> LayeredCircuit:
    """Single-qubit rotations on every qubit, then nearest-neighbour ZZ rotations (even bonds, odd bonds).

    Layer ``l`` rotates about ``rotation_axes[l % len(rotation_axes)]``. The
    default alternates Ry and Rx; with ``"Y"`` alone the circuit is a
    free-fermion (matchgate) family and cannot prepare interacting ground states.
    """
    if n_qubits < 2 or layers < 1:
        raise ValueError("brick ansatz needs n_qubits >= 2 and layers >= 1")
    if not rotation_axes or set(rotation_axes) - set("XYZ"):
        raise ValueError("rotation_axes must be a non-empty string over X, Y, Z")
    n = n_qubits
    bonds = [(q, q + 1) for q in range(0, n - 1, 2)] + [(q, q + 1) for q in range(1, n - 1, 2)]
    out = []
    for l in range(layers):
        axis = rotation_axes[l % len(rotation_axes)]
        gates = [Gate(PauliString(n, ((q, axis),)), 0.5, ParamSlot(l, q)) for q in range(n)]
        gates += [Gate(_pair(n, i, j, "ZZ"), 0.5, ParamSlot(l, n + b)) for b, (i, j) in enumerate(bonds)]
        out.append(tuple(gates))
    return LayeredCircuit(n, tuple(out), (n + len(bonds),) * layers, initial_state or "0" * n, name="brick")


# --------------------------------------------------------------------------- generator pools


@dataclass(frozen=True)
class PoolEntry:
    label: str
    generator: PauliSum  # Hermitian G; the gate is exp(-i theta G)
    layer: int


@dataclass(frozen=True)
class GeneratorPool:
    n_qubits: int
    entries: tuple[PoolEntry, ...]
    initial_state: str
    repetitions: int = 1
    name: str = "pool"

    @property
    def n_params(self) -> int:
        return len(self.entries)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        n_layers = max(e.layer for e in self.entries) + 1
        return tuple(sum(1 for e in self.entries if e.layer == l) for l in range(n_layers))


def _alpha(p: int) -> int:
    return p


def _beta(p: int, n_spatial: int) -> int:
    return n_spatial + p


def _single(p: int, q: int) -> list[LadderOp]:
    return [(p, True), (q, False)]


def build_upccgsd_pool(n_spatial: int, k: int, initial_state: str | None = None) -> GeneratorPool:
    """``k`` repetitions of generalized singles and paired doubles.

    Singles ``p > q`` act on both spins through one shared slot; paired
    doubles move an up/down pair from spatial orbital ``q`` to ``p``.
    Spin-up orbitals sit on qubits ``0..n_spatial-1``, spin-down after them.
    """
    if n_spatial < 2 or k < 1:
        raise ValueError("UpCCGSD needs n_spatial >= 2 and k >= 1")
    n = 2 * n_spatial
    b = lambda p: _beta(p, n_spatial)  # noqa: E731
    entries = []
    for r in range(k):
        for p, q in _descending_pairs(n_spatial):
            gen = excitation_generator(n, [_single(p, q), _single(b(p), b(q))])
            entries.append(PoolEntry(f"k{r}:s{p}{q}", gen, r))
        for p, q in _descending_pairs(n_spatial):
            ops = [(p, True), (b(p), True), (b(q), False), (q, False)]
            entries.append(PoolEntry(f"k{r}:d{p}{q}", excitation_generator(n, [ops]), r))
    occ = initial_state or _closed_shell(n_spatial, n_spatial // 2)
    return GeneratorPool(n, tuple(entries), occ, repetitions=k, name="upccgsd")


def _descending_pairs(n: int):
    return [(p, q) for q, p in combinations(range(n), 2)]


def _closed_shell(n_spatial: int, n_occ_spatial: int) -> str:
    block = "1" * n_occ_spatial + "0" * (n_spatial - n_occ_spatial)
    return block + block


def uccsd_doubles(n_occ_spatial: int, n_virt_spatial: int) -> list[tuple[int, int, int, int]]:
    """Double-excitation amplitude keys ``(i, j, a, b)``: ``i <= j`` occupied, ``(a, b)`` ordered virtual."""
    occ = range(n_occ_spatial)
    virt = range(n_occ_spatial, n_occ_spatial + n_virt_spatial)
    return [(i, j, a, b) for i in occ for j in occ if i <= j for a in virt for b in virt]


def build_uccsd_pool(n_occupied: int, n_virtual: int) -> GeneratorPool:
    """Single-layer UCCSD pool over closed-shell occupied/virtual spin orbitals.

    Singles ``i -> a`` share one slot across both spins. Each double
    ``(i, j, a, b)`` excites ``i_up j_down -> a_up b_down``; for ``i != j`` the
    spin-flipped partner ``j_up i_down -> b_up a_down`` joins the same slot.
    Terms are ordered singles first, then doubles, lexicographically.
    """
    if n_occupied < 1 or n_virtual < 1:
        raise ValueError("UCCSD needs at least one occupied and one virtual spin orbital")
    if n_occupied % 2 or n_virtual % 2:
        raise ValueError("closed-shell UCCSD needs even spin-orbital counts")
    o, v = n_occupied // 2, n_virtual // 2
    ns = o + v
    n = 2 * ns
    b = lambda p: _beta(p, ns)  # noqa: E731
    entries = []
    for i in range(o):
        for a in range(o, ns):
            gen = excitation_generator(n, [_single(a, i), _single(b(a), b(i))])
            entries.append(PoolEntry(f"s{i}->{a}", gen, 0))
    for i, j, a, bb in uccsd_doubles(o, v):
        exc = [[(a, True), (b(bb), True), (b(j), False), (i, False)]]
        if i != j:
            exc.append([(bb, True), (b(a), True), (b(i), False), (j, False)])
        entries.append(PoolEntry(f"d{i}{j}->{a}{bb}", excitation_generator(n, exc), 0))
    return GeneratorPool(n, tuple(entries), _closed_shell(ns, o), name="uccsd")


def pool_to_circuit(pool: GeneratorPool) -> LayeredCircuit:
    """Trotterized circuit: each Pauli component of an entry is a gate bound to the entry's slot."""
    n_layers = len(pool.layer_sizes)
    layers: list[list[Gate]] = [[] for _ in range(n_layers)]
    next_slot = [0] * n_layers
    for e in pool.entries:
        slot = next_slot[e.layer]
        next_slot[e.layer] += 1
        for c, ps in e.generator.terms:
            sign = 1 if c > 0 else -1
            layers[e.layer].append(Gate(ps, abs(c), ParamSlot(e.layer, slot, sign)))
    return LayeredCircuit(
        pool.n_qubits, tuple(tuple(l) for l in layers), pool.layer_sizes, pool.initial_state, name=pool.name
    )
