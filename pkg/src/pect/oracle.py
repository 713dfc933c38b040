"""Exact-diagonalization reference energies (dense and Lanczos)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pauli import PauliSum
from .simulator import MAX_QUBITS, CompiledSum, DimensionError, Statevector, compile_sum

DENSE_MAX_QUBITS = 12


class ConvergenceError(RuntimeError):
    pass


@dataclass
class EdResult:
    ground_energy: float
    ground_state: Statevector | None
    method: str
    residual: float


def apply_hamiltonian(h: PauliSum, v: Statevector | np.ndarray) -> np.ndarray:
    """``H v`` term group by term group; no ``2**n x 2**n`` matrix is formed."""
    amps = v.amplitudes if isinstance(v, Statevector) else np.asarray(v, dtype=complex)
    if len(amps) != 2**h.n_qubits:
        raise ValueError("vector dimension does not match Hamiltonian")
    return compile_sum(h).apply(amps)


def ground_state(h: PauliSum, method: str = "auto", **lanczos_kw) -> EdResult:
    """Lowest eigenvalue of ``h``. ``method`` is ``dense``, ``iterative`` or ``auto``."""
    n = h.n_qubits
    if method == "auto":
        method = "dense" if n <= 10 else "iterative"
    if method == "dense":
        if n > DENSE_MAX_QUBITS:
            raise DimensionError(f"dense diagonalization limited to {DENSE_MAX_QUBITS} qubits")
        evals, evecs = np.linalg.eigh(h.to_matrix())
        vec = evecs[:, 0]
        res = float(np.linalg.norm(apply_hamiltonian(h, vec) - evals[0] * vec))
        return EdResult(float(evals[0]), Statevector(n, vec), "dense", res)
    if method == "iterative":
        if n > MAX_QUBITS:
            raise DimensionError(f"iterative diagonalization limited to {MAX_QUBITS} qubits")
        e, vec, res = lanczos(compile_sum(h), **lanczos_kw)
        return EdResult(e, Statevector(n, vec), "iterative", res)
    raise ValueError(f"unknown method {method!r}")


def lanczos(
    op: CompiledSum,
    krylov_dim: int = 200,
    tol: float = 1e-8,
    max_restarts: int = 50,
    seed: int = 1234,
) -> tuple[float, np.ndarray, float]:
    """Lowest eigenpair by restarted Lanczos with full reorthogonalization.

    Each cycle builds a Krylov basis of at most ``krylov_dim`` vectors and
    restarts from the lowest Ritz vector until the eigen-residual
    ``||H v - E v||`` drops below ``tol``.
    """
    dim = 2**op.n_qubits
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    # cap the basis near 256 MB for wide registers
    m = min(krylov_dim, dim, max(20, (1 << 28) // (16 * dim)))
    energy, residual = np.inf, np.inf
    for _ in range(max_restarts + 1):
        basis = np.zeros((m, dim), dtype=complex)
        alpha, beta = [], []
        basis[0] = v
        k = 0
        for k in range(m):
            w = op.apply(basis[k])
            a = float(np.vdot(basis[k], w).real)
            alpha.append(a)
            # full reorthogonalization (twice for stability)
            for _ in range(2):
                w -= basis[: k + 1].T @ (basis[: k + 1].conj() @ w)
            b = float(np.linalg.norm(w))
            if k == m - 1 or b < 1e-12:
                break
            beta.append(b)
            basis[k + 1] = w / b
        size = len(alpha)
        tri = np.diag(alpha) + np.diag(beta[: size - 1], 1) + np.diag(beta[: size - 1], -1)
        evals, evecs = np.linalg.eigh(tri)
        energy = float(evals[0])
        v = evecs[:, 0] @ basis[:size]
        v /= np.linalg.norm(v)
        residual = float(np.linalg.norm(op.apply(v) - energy * v))
        if residual <= tol:
            return energy, v, residual
    raise ConvergenceError(f"Lanczos did not converge (residual {residual:.3g})")
