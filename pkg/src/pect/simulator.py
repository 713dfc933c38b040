"""Exact statevector simulation, Pauli-sum expectation values and gradients.

Pauli rotations are applied matrix-free: ``exp(-i a P) v = cos(a) v - i sin(a) P v``
with ``P v`` computed from the X/Z bit masks of ``P``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .circuit import (
    BoundGate,
    ConcreteCircuit,
    LayeredCircuit,
    Primitive,
    SparseParamState,
    decompose_rotation,
    depth,
    realize,
)
from .pauli import PauliString, PauliSum

MAX_QUBITS = 20
NORM_TOL = 1e-10


class DimensionError(ValueError):
    pass


class GradientError(ValueError):
    pass


@dataclass
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @classmethod
    def basis(cls, bitstring: str) -> "Statevector":
        return cls(len(bitstring), basis_vector(bitstring))


def basis_vector(bitstring: str) -> np.ndarray:
    n = len(bitstring)
    if n > MAX_QUBITS:
        raise DimensionError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit limit")
    v = np.zeros(2**n, dtype=complex)
    v[int(bitstring, 2) if bitstring else 0] = 1.0
    return v


class EvalCounter:
    """Thread-safe objective-evaluation tally with per-local-optimization blocks."""

    def __init__(self):
        self._lock = threading.Lock()
        self.total = 0
        self.blocks: list[int] = []
        self.block_depths: list[int] = []

    def add(self, n: int = 1) -> None:
        with self._lock:
            self.total += n
            if self.blocks:
                self.blocks[-1] += n

    def start_block(self, depth: int = 0) -> None:
        with self._lock:
            self.blocks.append(0)
            self.block_depths.append(depth)

    def set_block_depth(self, depth: int) -> None:
        with self._lock:
            self.block_depths[-1] = depth


# --------------------------------------------------------------------------- kernels


@lru_cache(maxsize=4096)
def _pauli_action(n: int, x_mask: int, z_mask: int, n_y: int) -> tuple[np.ndarray, np.ndarray]:
    """Index map and phases with ``(P v)[c] = phase[c] * v[c ^ x_mask]``."""
    idx = np.arange(2**n, dtype=np.int64)
    src = idx ^ x_mask
    parity = _popcount(src & z_mask) & 1
    phase = (1j**n_y) * (1 - 2 * parity).astype(complex)
    return src, phase


def _popcount(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    count = np.zeros_like(a)
    while np.any(a):
        count += a & 1
        a >>= 1
    return count


def pauli_action(ps: PauliString) -> tuple[np.ndarray, np.ndarray]:
    return _pauli_action(ps.n_qubits, ps.x_mask, ps.z_mask, ps.n_y)


def apply_pauli(ps: PauliString, v: np.ndarray) -> np.ndarray:
    src, phase = pauli_action(ps)
    return phase * v[src]


def apply_rotation(ps: PauliString, angle: float, v: np.ndarray) -> np.ndarray:
    """``exp(-i * angle * P) v``."""
    if angle == 0.0:
        return v
    src, phase = pauli_action(ps)
    return math.cos(angle) * v - 1j * math.sin(angle) * (phase * v[src])


class CompiledSum:
    """Pauli sum grouped by X mask: ``H v = sum_x d_x * v[i ^ x]``."""

    def __init__(self, h: PauliSum):
        n = h.n_qubits
        if n > MAX_QUBITS:
            raise DimensionError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit limit")
        self.n_qubits = n
        groups: dict[int, np.ndarray] = {}
        for c, ps in h.terms:
            src, phase = pauli_action(ps)
            x = ps.x_mask
            # phase is indexed by output; store as function of output index
            groups[x] = groups.get(x, 0) + c * phase
        idx = np.arange(2**n, dtype=np.int64)
        self._groups = [(idx ^ x if x else None, d) for x, d in sorted(groups.items())]

    def apply(self, v: np.ndarray) -> np.ndarray:
        if len(v) != 2**self.n_qubits:
            raise ValueError("vector dimension does not match operator")
        out = np.zeros_like(v, dtype=complex)
        for src, d in self._groups:
            out += d * (v if src is None else v[src])
        return out

    def expectation(self, v: np.ndarray) -> float:
        val = np.vdot(v, self.apply(v))
        if abs(val.imag) > 1e-10:
            raise ArithmeticError(f"expectation has imaginary part {val.imag:g}")
        return float(val.real)


_compiled_cache: dict[int, tuple[PauliSum, CompiledSum]] = {}


def compile_sum(h: PauliSum) -> CompiledSum:
    hit = _compiled_cache.get(id(h))
    if hit is not None and hit[0] is h:
        return hit[1]
    comp = CompiledSum(h)
    if len(_compiled_cache) > 32:
        _compiled_cache.clear()
    _compiled_cache[id(h)] = (h, comp)
    return comp


# --------------------------------------------------------------------------- primitives


_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def _rx(a: float) -> np.ndarray:
    c, s = math.cos(a / 2), math.sin(a / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def _rz(a: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])


def primitive_matrix(p: Primitive) -> np.ndarray:
    if p.name == "H":
        return _H
    if p.name == "RX":
        return _rx(p.angle)
    if p.name == "RZ":
        return _rz(p.angle)
    if p.name == "CNOT":
        return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    raise ValueError(f"unknown primitive {p.name!r}")


def apply_primitive(p: Primitive, v: np.ndarray, n: int) -> np.ndarray:
    mat = primitive_matrix(p)
    k = len(p.qubits)
    t = v.reshape([2] * n)
    t = np.moveaxis(t, p.qubits, range(k))
    shape = t.shape
    t = (mat @ t.reshape(2**k, -1)).reshape(shape)
    return np.moveaxis(t, range(k), p.qubits).reshape(-1)


# --------------------------------------------------------------------------- circuits


def apply(circuit: ConcreteCircuit, initial: str | None = None, method: str = "direct", check_norm: bool = True) -> Statevector:
    """Run ``circuit`` on a computational basis state.

    ``method="direct"`` rotates about each Pauli axis matrix-free;
    ``"decomposed"`` runs the CNOT-ladder decomposition gate by gate.
    """
    bits = circuit.initial_state if initial is None else initial
    if len(bits) != circuit.n_qubits:
        raise ValueError("initial bitstring length differs from circuit width")
    v = basis_vector(bits)
    n = circuit.n_qubits
    for g in circuit.gates:
        if method == "direct":
            v = apply_rotation(g.generator, g.angle, v)
        elif method == "decomposed":
            for p in decompose_rotation(g):
                v = apply_primitive(p, v, n)
        else:
            raise ValueError(f"unknown method {method!r}")
        if check_norm and abs(np.linalg.norm(v) - 1.0) > NORM_TOL:
            raise ArithmeticError("state norm drifted beyond tolerance")
    return Statevector(n, v)


def expectation(h: PauliSum, psi: Statevector, counter: EvalCounter | None = None) -> float:
    if h.n_qubits != psi.n_qubits:
        raise ValueError("observable and state sizes differ")
    val = compile_sum(h).expectation(psi.amplitudes)
    if counter is not None:
        counter.add(1)
    return val


class CircuitEnergy:
    """Energy and gradient of a layered circuit as a function of its active values.

    The active set is fixed at construction (taken from ``state``); gates of
    active slots are kept even at value 0 so they can be differentiated.
    ``frozen`` supplies fixed values for the inactive slots (layerwise
    training); otherwise inactive slots are identities.
    """

    def __init__(
        self,
        circuit: LayeredCircuit,
        h: PauliSum,
        state: SparseParamState,
        counter: EvalCounter | None = None,
        frozen: np.ndarray | None = None,
    ):
        if circuit.n_qubits != h.n_qubits:
            raise ValueError("circuit and Hamiltonian widths differ")
        self.circuit = circuit
        self.h = h
        self.op = compile_sum(h)
        self.counter = counter
        self.active = state.active_flat_indices()
        self.template = state.copy()
        self.frozen = np.zeros(circuit.n_params) if frozen is None else np.asarray(frozen, dtype=float).copy()
        self.frozen[self.active] = 0.0
        pos = {int(k): i for i, k in enumerate(self.active)}
        # per-gate: generator action, scale, index into the active vector (-1 if fixed)
        self._gates = []
        for g in circuit.gates():
            if g.slot is None:
                self._gates.append((g.generator, g.angle_scale * g.fixed_angle, 0.0, -1))
                continue
            k = circuit.flat_index(g.slot)
            scale = g.angle_scale * g.slot.sign
            if k in pos:
                self._gates.append((g.generator, 0.0, scale, pos[k]))
            elif self.frozen[k] != 0.0:
                self._gates.append((g.generator, scale * self.frozen[k], 0.0, -1))
        self.n_occurrences = sum(1 for *_, i in self._gates if i >= 0)
        self.init_vec = basis_vector(circuit.initial_state)

    @property
    def dim(self) -> int:
        return len(self.active)

    def angles(self, x: np.ndarray) -> list[float]:
        return [fixed if i < 0 else scale * x[i] for _, fixed, scale, i in self._gates]

    def state(self, x: np.ndarray) -> np.ndarray:
        v = self.init_vec
        for (ps, *_), a in zip(self._gates, self.angles(x)):
            v = apply_rotation(ps, a, v)
        return v

    def _state_from_angles(self, angles: Sequence[float]) -> np.ndarray:
        v = self.init_vec
        for (ps, *_), a in zip(self._gates, angles):
            v = apply_rotation(ps, a, v)
        return v

    def __call__(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        val = self.op.expectation(self.state(x))
        if self.counter is not None:
            self.counter.add(1)
        return val

    def gradient_cost(self, method: str = "parameter_shift") -> int:
        """Objective evaluations charged for one gradient."""
        if method in ("parameter_shift", "adjoint"):
            return 2 * self.n_occurrences
        if method == "central_diff":
            return 2 * self.dim
        raise ValueError(f"unknown gradient method {method!r}")

    def gradient(self, x: np.ndarray, method: str = "parameter_shift", step: float = 1e-6) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if method == "parameter_shift":
            g = self._shift_gradient(x)
        elif method == "adjoint":
            g = self._adjoint_gradient(x)
        elif method == "central_diff":
            g = self._central_diff(x, step)
        else:
            raise ValueError(f"unknown gradient method {method!r}")
        if self.counter is not None:
            self.counter.add(self.gradient_cost(method))
        return g

    def _shift_gradient(self, x: np.ndarray) -> np.ndarray:
        # exp(-i a P) has E(a) = A + B cos 2a + C sin 2a, so dE/da = E(a + pi/4) - E(a - pi/4)
        angles = self.angles(x)
        grad = np.zeros(self.dim)
        for k, (_, _, scale, i) in enumerate(self._gates):
            if i < 0:
                continue
            shifted = list(angles)
            shifted[k] = angles[k] + math.pi / 4
            e_plus = self.op.expectation(self._state_from_angles(shifted))
            shifted[k] = angles[k] - math.pi / 4
            e_minus = self.op.expectation(self._state_from_angles(shifted))
            grad[i] += scale * (e_plus - e_minus)
        return grad

    def _adjoint_gradient(self, x: np.ndarray) -> np.ndarray:
        """Same values as the shift rule from one forward and one backward sweep."""
        angles = self.angles(x)
        psi = self._state_from_angles(angles)
        lam = self.op.apply(psi)
        grad = np.zeros(self.dim)
        for k in range(len(self._gates) - 1, -1, -1):
            ps, _, scale, i = self._gates[k]
            if i >= 0:
                # dE/da = 2 Re <lam| -i P |psi>
                grad[i] += scale * 2.0 * float(np.vdot(lam, apply_pauli(ps, psi)).imag)
            psi = apply_rotation(ps, -angles[k], psi)
            lam = apply_rotation(ps, -angles[k], lam)
        return grad

    def _central_diff(self, x: np.ndarray, step: float) -> np.ndarray:
        grad = np.zeros(self.dim)
        for i in range(self.dim):
            xp, xm = x.copy(), x.copy()
            xp[i] += step
            xm[i] -= step
            grad[i] = (self.op.expectation(self.state(xp)) - self.op.expectation(self.state(xm))) / (2 * step)
        return grad


def gradient(
    circuit: LayeredCircuit,
    state: SparseParamState,
    h: PauliSum,
    method: str = "parameter_shift",
    step: float = 1e-6,
    counter: EvalCounter | None = None,
) -> np.ndarray:
    """Gradient of the energy over the active values of ``state`` (length ``M``)."""
    for g in circuit.gates():
        if g.kind != "pauli_rotation":
            raise GradientError(f"{method} does not support gate kind {g.kind!r}")
    f = CircuitEnergy(circuit, h, state, counter)
    return f.gradient(state.active_values(), method, step)


def energy(circuit: LayeredCircuit, state: SparseParamState, h: PauliSum, counter: EvalCounter | None = None) -> float:
    return CircuitEnergy(circuit, h, state, counter)(state.active_values())


def realized_depth(circuit: LayeredCircuit, state: SparseParamState) -> int:
    return depth(realize(circuit, state))
