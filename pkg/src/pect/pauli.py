"""Pauli strings, real-weighted Pauli sums and their text format.

Qubit ``q`` of an ``n``-qubit register is bit ``n - 1 - q`` of a basis index,
so the basis state written as the bitstring ``"0110"`` has index ``0b0110``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

PAULI_LABELS = ("X", "Y", "Z")
DROP_TOL = 1e-12

# single-qubit products: (a, b) -> (phase, result); "I" is the identity
_PRODUCT = {
    ("X", "Y"): (1j, "Z"),
    ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"),
    ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"),
    ("X", "Z"): (-1j, "Y"),
}


class PauliParseError(ValueError):
    """Malformed Pauli-sum text. ``lineno`` is 1-based."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        prefix = f"line {lineno}: " if lineno is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True, order=True)
class PauliString:
    """Tensor product of X/Y/Z factors; identity on absent qubits."""

    n_qubits: int
    factors: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        canon = tuple(sorted(self.factors))
        seen = set()
        for q, p in canon:
            if p not in PAULI_LABELS:
                raise ValueError(f"unknown Pauli label {p!r}")
            if not 0 <= q < self.n_qubits:
                raise ValueError(f"qubit index {q} outside [0, {self.n_qubits})")
            if q in seen:
                raise ValueError(f"duplicate qubit index {q}")
            seen.add(q)
        object.__setattr__(self, "factors", canon)

    @classmethod
    def from_label(cls, n_qubits: int, label: str) -> "PauliString":
        """Build from a space-separated label such as ``"X0 Z2"`` or ``"I"``."""
        label = label.strip()
        if label in ("", "I"):
            return cls(n_qubits)
        factors = []
        for tok in label.split():
            factors.append((int(tok[1:]), tok[0]))
        return cls(n_qubits, tuple(factors))

    @classmethod
    def from_dict(cls, n_qubits: int, ops: Mapping[int, str]) -> "PauliString":
        return cls(n_qubits, tuple(ops.items()))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.factors)

    @property
    def weight(self) -> int:
        return len(self.factors)

    def is_identity(self) -> bool:
        return not self.factors

    def bit(self, q: int) -> int:
        return 1 << (self.n_qubits - 1 - q)

    @property
    def x_mask(self) -> int:
        return sum(self.bit(q) for q, p in self.factors if p in "XY")

    @property
    def z_mask(self) -> int:
        return sum(self.bit(q) for q, p in self.factors if p in "ZY")

    @property
    def n_y(self) -> int:
        return sum(1 for _, p in self.factors if p == "Y")

    def as_dict(self) -> dict[int, str]:
        return dict(self.factors)

    def to_matrix(self) -> np.ndarray:
        """Dense ``2**n x 2**n`` matrix (small registers only)."""
        single = {
            "I": np.eye(2, dtype=complex),
            "X": np.array([[0, 1], [1, 0]], dtype=complex),
            "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
            "Z": np.array([[1, 0], [0, -1]], dtype=complex),
        }
        ops = self.as_dict()
        out = np.ones((1, 1), dtype=complex)
        for q in range(self.n_qubits):
            out = np.kron(out, single[ops.get(q, "I")])
        return out

    def __mul__(self, other: "PauliString") -> tuple[complex, "PauliString"]:
        """Return ``(phase, P)`` such that ``self @ other == phase * P``."""
        if self.n_qubits != other.n_qubits:
            raise ValueError("qubit count mismatch")
        a, b = self.as_dict(), other.as_dict()
        phase = 1 + 0j
        out = {}
        for q in sorted(set(a) | set(b)):
            pa, pb = a.get(q), b.get(q)
            if pa is None:
                out[q] = pb
            elif pb is None:
                out[q] = pa
            elif pa == pb:
                continue
            else:
                ph, r = _PRODUCT[(pa, pb)]
                phase *= ph
                out[q] = r
        return phase, PauliString.from_dict(self.n_qubits, out)

    def commutes_with(self, other: "PauliString") -> bool:
        a, b = self.as_dict(), other.as_dict()
        anti = sum(1 for q in set(a) & set(b) if a[q] != b[q])
        return anti % 2 == 0

    def label(self) -> str:
        if not self.factors:
            return "I"
        return " ".join(f"{p}{q}" for q, p in self.factors)

    def __str__(self) -> str:
        return self.label()


def _sort_key(ps: PauliString):
    return ps.factors


@dataclass(frozen=True)
class PauliSum:
    """Real linear combination of Pauli strings (a Hermitian observable).

    Construct through :meth:`from_terms`, which merges duplicates, drops
    coefficients below ``1e-12`` and orders terms canonically.
    """

    n_qubits: int
    terms: tuple[tuple[float, PauliString], ...] = field(default=())

    def __post_init__(self):
        for c, ps in self.terms:
            if ps.n_qubits != self.n_qubits:
                raise ValueError("term qubit count differs from the sum")
            if not isinstance(c, float) or not math.isfinite(c):
                raise ValueError(f"coefficient {c!r} is not a finite real")

    @classmethod
    def from_terms(
        cls,
        n_qubits: int,
        terms: Iterable[tuple[complex | float, PauliString]],
        imag_tol: float = 1e-10,
    ) -> "PauliSum":
        acc: dict[PauliString, complex] = {}
        for c, ps in terms:
            if ps.n_qubits != n_qubits:
                raise ValueError("term qubit count differs from the sum")
            acc[ps] = acc.get(ps, 0.0) + c
        out = []
        for ps in sorted(acc, key=_sort_key):
            c = complex(acc[ps])
            if abs(c.imag) > imag_tol:
                raise ValueError(f"non-Hermitian term {ps}: coefficient {c}")
            if abs(c.real) >= DROP_TOL:
                out.append((float(c.real), ps))
        return cls(n_qubits, tuple(out))

    @classmethod
    def from_dict(cls, n_qubits: int, terms: Mapping[str, float]) -> "PauliSum":
        """Build from ``{"X0 Z1": 0.5, "I": -1.0}``-style mappings."""
        return cls.from_terms(
            n_qubits, ((c, PauliString.from_label(n_qubits, k)) for k, c in terms.items())
        )

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if self.n_qubits != other.n_qubits:
            raise ValueError("qubit count mismatch")
        return PauliSum.from_terms(self.n_qubits, list(self.terms) + list(other.terms))

    def __mul__(self, scalar: float) -> "PauliSum":
        return PauliSum.from_terms(self.n_qubits, [(scalar * c, p) for c, p in self.terms])

    __rmul__ = __mul__

    def coefficient(self, ps: PauliString | str) -> float:
        if isinstance(ps, str):
            ps = PauliString.from_label(self.n_qubits, ps)
        for c, p in self.terms:
            if p == ps:
                return c
        return 0.0

    def one_norm(self) -> float:
        """Sum of absolute coefficients."""
        return float(sum(abs(c) for c, _ in self.terms))

    def is_constant(self) -> bool:
        return all(ps.is_identity() for _, ps in self.terms)

    def to_matrix(self) -> np.ndarray:
        dim = 2**self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for c, ps in self.terms:
            out += c * ps.to_matrix()
        return out

    def fingerprint(self) -> str:
        """Stable hash of the canonical text form."""
        import hashlib

        return hashlib.sha256(serialize_pauli_sum(self).encode()).hexdigest()[:16]


def number_operator(n_qubits: int, qubits: Iterable[int] | None = None) -> PauliSum:
    """Jordan-Wigner particle number ``sum_q (1 - Z_q) / 2``."""
    qubits = range(n_qubits) if qubits is None else list(qubits)
    terms = []
    for q in qubits:
        terms.append((0.5, PauliString(n_qubits)))
        terms.append((-0.5, PauliString(n_qubits, ((q, "Z"),))))
    return PauliSum.from_terms(n_qubits, terms)


# --------------------------------------------------------------------------- text format


def parse_pauli_sum(text: str | io.TextIOBase) -> PauliSum:
    """Parse the ``qubits <n>`` + one-term-per-line format.

    Raises:
        PauliParseError: on a malformed header or term, carrying the line number.
    """
    if not isinstance(text, str):
        text = text.read()
    n_qubits = None
    terms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if n_qubits is None:
            if len(toks) != 2 or toks[0] != "qubits":
                raise PauliParseError("expected header 'qubits <n>'", lineno)
            try:
                n_qubits = int(toks[1])
            except ValueError:
                raise PauliParseError(f"bad qubit count {toks[1]!r}", lineno) from None
            if n_qubits < 1:
                raise PauliParseError("qubit count must be positive", lineno)
            continue
        try:
            coeff = float(toks[0])
        except ValueError:
            raise PauliParseError(f"coefficient {toks[0]!r} is not a real number", lineno) from None
        if not math.isfinite(coeff):
            raise PauliParseError(f"coefficient {toks[0]!r} is not finite", lineno)
        ops = toks[1:]
        if not ops:
            raise PauliParseError("term has no Pauli factors (use 'I' for identity)", lineno)
        if ops == ["I"]:
            terms.append((coeff, PauliString(n_qubits)))
            continue
        factors = {}
        for tok in ops:
            label, idx = tok[:1], tok[1:]
            if label not in PAULI_LABELS or not idx.isdigit():
                raise PauliParseError(f"malformed Pauli token {tok!r}", lineno)
            q = int(idx)
            if q >= n_qubits:
                raise PauliParseError(f"qubit index {q} >= {n_qubits}", lineno)
            if q in factors:
                raise PauliParseError(f"qubit {q} repeated in one term", lineno)
            factors[q] = label
        terms.append((coeff, PauliString.from_dict(n_qubits, factors)))
    if n_qubits is None:
        raise PauliParseError("missing 'qubits <n>' header")
    return PauliSum.from_terms(n_qubits, terms)


def serialize_pauli_sum(h: PauliSum) -> str:
    lines = [f"qubits {h.n_qubits}"]
    for c, ps in h.terms:
        lines.append(f"{c:.17g} {ps.label()}")
    return "\n".join(lines) + "\n"


def load_pauli_sum(path) -> PauliSum:
    with open(path) as fh:
        return parse_pauli_sum(fh.read())


def save_pauli_sum(h: PauliSum, path) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_pauli_sum(h))
