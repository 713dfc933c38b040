"""Layered parameterized circuits, sparse parameter subsets and resource metrics.

Every gate is a Pauli rotation ``exp(-i * a * theta * P)``. Free angles come
from parameter slots grouped by layer; a slot may drive several gates, each
with its own sign. :func:`realize` binds a :class:`SparseParamState` to a
circuit and drops gates whose slot is inactive or exactly zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .pauli import PauliString


@dataclass(frozen=True)
class ParamSlot:
    layer: int
    index: int
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("slot sign must be +1 or -1")


@dataclass(frozen=True)
class Gate:
    """``exp(-i * angle_scale * theta * generator)``; ``theta = sign * value`` or ``fixed_angle``."""

    generator: PauliString
    angle_scale: float = 0.5
    slot: ParamSlot | None = None
    fixed_angle: float = 0.0
    kind: str = "pauli_rotation"

    def __post_init__(self):
        if self.generator.is_identity():
            raise ValueError("rotation generator must act on at least one qubit")


@dataclass(frozen=True)
class BoundGate:
    """Gate with a numeric rotation angle: ``exp(-i * angle * generator)``.

    ``scale`` is ``a * sign`` and ``slot`` the originating parameter, kept so
    gradients can be mapped back onto slots.
    """

    generator: PauliString
    angle: float
    slot: ParamSlot | None = None
    scale: float = 0.0

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.generator.support


@dataclass(frozen=True)
class ConcreteCircuit:
    n_qubits: int
    gates: tuple[BoundGate, ...]
    initial_state: str

    def __len__(self) -> int:
        return len(self.gates)

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_qubits": self.n_qubits,
                "initial_state": self.initial_state,
                "gates": [{"generator": g.generator.label(), "angle": g.angle} for g in self.gates],
            }
        )


@dataclass(frozen=True)
class LayeredCircuit:
    n_qubits: int
    layers: tuple[tuple[Gate, ...], ...]
    layer_sizes: tuple[int, ...]
    initial_state: str
    name: str = "circuit"

    def __post_init__(self):
        if len(self.initial_state) != self.n_qubits or set(self.initial_state) - {"0", "1"}:
            raise ValueError("initial_state must be a bitstring of length n_qubits")
        if len(self.layer_sizes) != len(self.layers):
            raise ValueError("one parameter count per layer required")
        used = [set() for _ in self.layers]
        for l, layer in enumerate(self.layers):
            for g in layer:
                if g.generator.n_qubits != self.n_qubits:
                    raise ValueError("gate register size differs from circuit")
                if g.slot is None:
                    continue
                if g.slot.layer != l:
                    raise ValueError(f"gate in layer {l} bound to slot of layer {g.slot.layer}")
                if not 0 <= g.slot.index < self.layer_sizes[l]:
                    raise ValueError(f"slot index {g.slot.index} outside layer {l}")
                used[l].add(g.slot.index)
        for l, n_l in enumerate(self.layer_sizes):
            if used[l] != set(range(n_l)):
                raise ValueError(f"layer {l}: slots must be exactly 0..{n_l - 1}")

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def n_params(self) -> int:
        return int(sum(self.layer_sizes))

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.layer_sizes)]).astype(int)

    def flat_index(self, slot: ParamSlot) -> int:
        return int(self.offsets[slot.layer]) + slot.index

    def gates(self) -> Iterable[Gate]:
        for layer in self.layers:
            yield from layer

    @property
    def n_gates(self) -> int:
        return sum(len(layer) for layer in self.layers)

    def select_layers(self, keep: Iterable[int]) -> "LayeredCircuit":
        """Circuit truncated to the given layers (others emptied, sizes kept)."""
        keep = set(keep)
        layers = tuple(layer if l in keep else () for l, layer in enumerate(self.layers))
        sizes = tuple(n if l in keep else 0 for l, n in enumerate(self.layer_sizes))
        return LayeredCircuit(self.n_qubits, layers, sizes, self.initial_state, self.name)


class SparseParamState:
    """Per-layer active slot indices (``psi``) and values (``phi``)."""

    def __init__(self, layer_sizes: Sequence[int], psi: Sequence[Sequence[int]], phi: Sequence[Sequence[float]]):
        self.layer_sizes = tuple(int(n) for n in layer_sizes)
        self.psi = [np.asarray(p, dtype=np.int64).copy() for p in psi]
        self.phi = [np.asarray(v, dtype=float).copy() for v in phi]
        self.check()

    @classmethod
    def dense(cls, layer_sizes: Sequence[int], values: Sequence[float] | None = None) -> "SparseParamState":
        sizes = list(layer_sizes)
        if values is None:
            values = np.zeros(sum(sizes))
        values = np.asarray(values, dtype=float)
        offs = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        psi = [np.arange(n) for n in sizes]
        phi = [values[offs[l] : offs[l + 1]] for l in range(len(sizes))]
        return cls(sizes, psi, phi)

    @classmethod
    def empty(cls, layer_sizes: Sequence[int]) -> "SparseParamState":
        return cls(layer_sizes, [[] for _ in layer_sizes], [[] for _ in layer_sizes])

    def check(self) -> None:
        if len(self.psi) != len(self.layer_sizes) or len(self.phi) != len(self.layer_sizes):
            raise ValueError("psi/phi must have one entry per layer")
        for l, (idx, val) in enumerate(zip(self.psi, self.phi)):
            if len(idx) != len(val):
                raise ValueError(f"layer {l}: psi and phi lengths differ")
            if len(idx) and (idx[0] < 0 or idx[-1] >= self.layer_sizes[l]):
                raise IndexError(f"layer {l}: slot index out of range")
            if np.any(np.diff(idx) <= 0):
                raise ValueError(f"layer {l}: psi must be strictly increasing")

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes)

    @property
    def n_total(self) -> int:
        return sum(self.layer_sizes)

    @property
    def counts(self) -> list[int]:
        return [len(p) for p in self.psi]

    @property
    def n_active(self) -> int:
        return sum(self.counts)

    @property
    def sparsity(self) -> float:
        return 1.0 - self.n_active / self.n_total

    @property
    def local_sparsity(self) -> list[float]:
        return [1.0 - m / n if n else 0.0 for m, n in zip(self.counts, self.layer_sizes)]

    def copy(self) -> "SparseParamState":
        return SparseParamState(self.layer_sizes, self.psi, self.phi)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.n_total)
        off = 0
        for l, n in enumerate(self.layer_sizes):
            out[off + self.psi[l]] = self.phi[l]
            off += n
        return out

    def active_flat_indices(self) -> np.ndarray:
        off = 0
        out = []
        for l, n in enumerate(self.layer_sizes):
            out.append(off + self.psi[l])
            off += n
        return np.concatenate(out).astype(np.int64) if out else np.zeros(0, dtype=np.int64)

    def active_values(self) -> np.ndarray:
        return np.concatenate(self.phi) if self.phi else np.zeros(0)

    def set_active_values(self, values: Sequence[float]) -> None:
        values = np.asarray(values, dtype=float)
        if len(values) != self.n_active:
            raise ValueError("value vector length differs from active count")
        pos = 0
        for l in range(self.n_layers):
            m = len(self.psi[l])
            self.phi[l] = values[pos : pos + m].copy()
            pos += m

    def active_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_total, dtype=bool)
        mask[self.active_flat_indices()] = True
        return mask

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseParamState):
            return NotImplemented
        return (
            self.layer_sizes == other.layer_sizes
            and all(np.array_equal(a, b) for a, b in zip(self.psi, other.psi))
            and all(np.array_equal(a, b) for a, b in zip(self.phi, other.phi))
        )

    def to_json(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "psi": [p.tolist() for p in self.psi],
            "phi": [v.tolist() for v in self.phi],
        }

    @classmethod
    def from_json(cls, data: dict) -> "SparseParamState":
        return cls(data["layer_sizes"], data["psi"], data["phi"])


def realize(circuit: LayeredCircuit, state: SparseParamState, keep_zero: bool = False) -> ConcreteCircuit:
    """Bind active values to gates; inactive or zero-valued slots become identities.

    ``keep_zero=True`` keeps active slots whose value is exactly 0 (as
    zero-angle gates), which gradient code needs to differentiate them.
    """
    if tuple(state.layer_sizes) != tuple(circuit.layer_sizes):
        raise ValueError("state layout does not match circuit")
    state.check()
    theta = state.to_dense()
    active = state.active_mask()
    gates = []
    for g in circuit.gates():
        if g.slot is None:
            if g.fixed_angle != 0.0:
                gates.append(BoundGate(g.generator, g.angle_scale * g.fixed_angle))
            continue
        k = circuit.flat_index(g.slot)
        if not active[k]:
            continue
        if theta[k] == 0.0 and not keep_zero:
            continue
        scale = g.angle_scale * g.slot.sign
        gates.append(BoundGate(g.generator, scale * theta[k], g.slot, scale))
    return ConcreteCircuit(circuit.n_qubits, tuple(gates), circuit.initial_state)


def dense_realize(circuit: LayeredCircuit) -> ConcreteCircuit:
    """Realization with every slot active and nonzero (structure only)."""
    return realize(circuit, SparseParamState.dense(circuit.layer_sizes, np.ones(circuit.n_params)))


# --------------------------------------------------------------------------- primitives


@dataclass(frozen=True)
class Primitive:
    """Native gate: ``H``, ``RX``/``RZ`` (``exp(-i angle/2 P)``) or ``CNOT`` (control, target)."""

    name: str
    qubits: tuple[int, ...]
    angle: float = 0.0


def decompose_rotation(gate: BoundGate | Gate, theta: float | None = None) -> list[Primitive]:
    """Basis change + CNOT ladder + RZ + inverse ladder for ``exp(-i angle P)``."""
    if isinstance(gate, Gate):
        if gate.kind != "pauli_rotation":
            raise ValueError(f"cannot decompose gate kind {gate.kind!r}")
        value = gate.fixed_angle if theta is None else theta
        sign = gate.slot.sign if gate.slot else 1
        angle = gate.angle_scale * sign * value
        gen = gate.generator
    else:
        angle, gen = gate.angle, gate.generator
    if gen.is_identity():
        raise ValueError("empty generator")
    pre, post = [], []
    for q, p in gen.factors:
        if p == "X":
            pre.append(Primitive("H", (q,)))
            post.append(Primitive("H", (q,)))
        elif p == "Y":
            pre.append(Primitive("RX", (q,), math.pi / 2))
            post.append(Primitive("RX", (q,), -math.pi / 2))
    qs = gen.support
    ladder = [Primitive("CNOT", (qs[i], qs[i + 1])) for i in range(len(qs) - 1)]
    return pre + ladder + [Primitive("RZ", (qs[-1],), 2.0 * angle)] + ladder[::-1] + post[::-1]


def _native_ops(c: ConcreteCircuit) -> Iterable[tuple[int, ...]]:
    """Qubit sets of native operations: 1- and 2-qubit rotations are native, wider ones decompose."""
    for g in c.gates:
        if g.generator.weight <= 2:
            yield g.qubits
        else:
            for prim in decompose_rotation(g):
                yield prim.qubits


def depth(c: ConcreteCircuit) -> int:
    """Moments under greedy left alignment."""
    frontier = [0] * c.n_qubits
    for qs in _native_ops(c):
        moment = max(frontier[q] for q in qs) + 1
        for q in qs:
            frontier[q] = moment
    return max(frontier, default=0)


def two_qubit_gate_count(c: ConcreteCircuit) -> int:
    return sum(1 for qs in _native_ops(c) if len(qs) == 2)


def gate_count(c: ConcreteCircuit) -> int:
    return sum(1 for _ in _native_ops(c))
