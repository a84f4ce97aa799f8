"""Pauli strings in symplectic form and weighted sums of them.

Qubit 0 is the leftmost tensor factor. Bit ``k`` of ``x`` / ``z`` refers to
qubit ``k``; in a dense matrix of size ``2**n`` qubit 0 is the most
significant bit of the row index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

PRUNE_TOL = 1e-12
MAX_DENSE_QUBITS = 10

_CHAR_TO_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_PHASE_PREFIX = {"": 0, "+": 0, "i": 1, "+i": 1, "-": 2, "-i": 3}
_PHASE_TEXT = {0: "+", 1: "+i", 2: "-", 3: "-i"}


def reverse_bits(mask: int, n: int) -> int:
    """Map a qubit mask (bit k = qubit k) to a basis-index mask."""
    out = 0
    for k in range(n):
        if mask >> k & 1:
            out |= 1 << (n - 1 - k)
    return out


@dataclass(frozen=True)
class PauliString:
    """``i**phase`` times a tensor product of I, X, Y, Z.

    Y is stored as x = z = 1 and means the Pauli Y matrix itself.
    """

    n: int
    x: int = 0
    z: int = 0
    phase: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("qubit count must be non-negative")
        lim = 1 << self.n
        if not (0 <= self.x < lim and 0 <= self.z < lim):
            raise ValueError("mask has bits beyond n qubits")
        object.__setattr__(self, "phase", self.phase % 4)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse e.g. ``"IXYZ"`` or ``"-iXZ"``."""
        label = label.strip()
        body = label.lstrip("+-i")
        prefix = label[: len(label) - len(body)]
        if prefix not in _PHASE_PREFIX:
            raise ValueError(f"bad phase prefix {prefix!r}")
        x = z = 0
        for k, ch in enumerate(body):
            try:
                bx, bz = _CHAR_TO_BITS[ch]
            except KeyError:
                raise ValueError(f"bad Pauli character {ch!r}") from None
            x |= bx << k
            z |= bz << k
        return cls(len(body), x, z, _PHASE_PREFIX[prefix])

    @classmethod
    def single(cls, n: int, qubit: int, kind: str) -> "PauliString":
        bx, bz = _CHAR_TO_BITS[kind]
        return cls(n, bx << qubit, bz << qubit)

    @classmethod
    def on(cls, n: int, ops: Mapping[int, str]) -> "PauliString":
        """Build from a ``{qubit: 'X'|'Y'|'Z'}`` mapping."""
        x = z = 0
        for q, kind in ops.items():
            if not 0 <= q < n:
                raise ValueError(f"qubit {q} out of range")
            bx, bz = _CHAR_TO_BITS[kind]
            x |= bx << q
            z |= bz << q
        return cls(n, x, z)

    @property
    def label(self) -> str:
        chars = []
        for k in range(self.n):
            chars.append("IXZY"[(self.x >> k & 1) | (self.z >> k & 1) << 1])
        return "".join(chars)

    def __str__(self) -> str:
        return ("" if self.phase == 0 else _PHASE_TEXT[self.phase]) + self.label

    @property
    def support_mask(self) -> int:
        return self.x | self.z

    @property
    def support(self) -> tuple[int, ...]:
        m = self.support_mask
        return tuple(k for k in range(self.n) if m >> k & 1)

    @property
    def locality(self) -> int:
        return self.support_mask.bit_count()

    @property
    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def phase_free(self) -> "PauliString":
        return PauliString(self.n, self.x, self.z, 0)

    def __mul__(self, other: "PauliString") -> "PauliString":
        return mul(self, other)

    def to_dense(self) -> np.ndarray:
        return to_dense(PauliSum(self.n, {self.phase_free(): 1j**self.phase}))


def _check_n(a: PauliString, b: PauliString) -> None:
    if a.n != b.n:
        raise ValueError(f"size mismatch: {a.n} vs {b.n} qubits")


def product_phase(ax: int, az: int, bx: int, bz: int) -> int:
    """Power of i picked up when multiplying the phase-free strings a*b."""
    a_x, a_y, a_z = ax & ~az, ax & az, az & ~ax
    b_x, b_y, b_z = bx & ~bz, bx & bz, bz & ~bx
    plus = (a_x & b_y).bit_count() + (a_y & b_z).bit_count() + (a_z & b_x).bit_count()
    minus = (a_y & b_x).bit_count() + (a_z & b_y).bit_count() + (a_x & b_z).bit_count()
    return (plus - minus) % 4


def mul(a: PauliString, b: PauliString) -> PauliString:
    """Product ``a * b`` including its phase."""
    _check_n(a, b)
    ph = a.phase + b.phase + product_phase(a.x, a.z, b.x, b.z)
    return PauliString(a.n, a.x ^ b.x, a.z ^ b.z, ph)


def commutes(a: PauliString, b: PauliString) -> bool:
    _check_n(a, b)
    return ((a.x & b.z).bit_count() + (a.z & b.x).bit_count()) % 2 == 0


def _as_key(s: PauliString) -> tuple[PauliString, complex]:
    return s.phase_free(), 1j**s.phase


@dataclass(frozen=True)
class PauliSum:
    """Linear combination of phase-free Pauli strings.

    Coefficients are real for Hermitian operators; complex coefficients
    are kept for intermediate (e.g. ladder operator) images.
    """

    n: int
    terms: Mapping[PauliString, complex] = field(default_factory=dict)

    def __post_init__(self):
        clean: dict[PauliString, complex] = {}
        for s, c in self.terms.items():
            if s.n != self.n:
                raise ValueError("term size mismatch")
            key, ph = _as_key(s)
            clean[key] = clean.get(key, 0) + c * ph
        pruned = {}
        for s, c in clean.items():
            c = complex(c)
            if abs(c) < PRUNE_TOL:
                continue
            pruned[s] = c.real if abs(c.imag) < PRUNE_TOL else c
        object.__setattr__(self, "terms", pruned)

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[tuple[float, str | PauliString]]) -> "PauliSum":
        out: dict[PauliString, complex] = {}
        for c, s in pairs:
            if isinstance(s, str):
                s = PauliString.from_label(s)
            key, ph = _as_key(s)
            out[key] = out.get(key, 0) + c * ph
        return cls(n, out)

    @classmethod
    def identity(cls, n: int, c: float = 1.0) -> "PauliSum":
        return cls(n, {PauliString(n): c})

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[tuple[PauliString, complex]]:
        return iter(self.terms.items())

    @property
    def locality(self) -> int:
        return max((s.locality for s in self.terms), default=0)

    @property
    def is_hermitian(self) -> bool:
        return all(isinstance(c, float) for c in self.terms.values())

    def coefficient(self, s: PauliString | str) -> complex:
        if isinstance(s, str):
            s = PauliString.from_label(s)
        return self.terms.get(s.phase_free(), 0.0)

    def norm(self, p: float = 2) -> float:
        """p-norm of the coefficient vector."""
        if not self.terms:
            return 0.0
        return float(np.linalg.norm(np.abs(list(self.terms.values())), p))

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if self.n != other.n:
            raise ValueError("size mismatch")
        out = dict(self.terms)
        for s, c in other.terms.items():
            out[s] = out.get(s, 0) + c
        return PauliSum(self.n, out)

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + other * -1.0

    def __mul__(self, other):
        if isinstance(other, PauliSum):
            if self.n != other.n:
                raise ValueError("size mismatch")
            out: dict[PauliString, complex] = {}
            for a, ca in self.terms.items():
                for b, cb in other.terms.items():
                    ph = product_phase(a.x, a.z, b.x, b.z)
                    key = PauliString(self.n, a.x ^ b.x, a.z ^ b.z)
                    out[key] = out.get(key, 0) + ca * cb * 1j**ph
            return PauliSum(self.n, out)
        return PauliSum(self.n, {s: c * other for s, c in self.terms.items()})

    __rmul__ = __mul__

    def adjoint(self) -> "PauliSum":
        return PauliSum(self.n, {s: np.conj(c) for s, c in self.terms.items()})

    def to_text(self) -> str:
        lines = []
        for s, c in sorted(self.terms.items(), key=lambda kv: kv[0].label):
            if isinstance(c, complex):
                lines.append(f"{c.real!r}{c.imag:+}j\t{s.label}")
            else:
                lines.append(f"{c!r}\t{s.label}")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "PauliSum":
        pairs = []
        n = None
        for line in text.splitlines():
            if not line.strip():
                continue
            coeff, label = line.split("\t")
            c = complex(coeff)
            pairs.append((c.real if c.imag == 0 else c, label.strip()))
            n = len(label.strip())
        if n is None:
            raise ValueError("empty PauliSum text")
        return cls.from_pairs(n, pairs)


def pauli_index_arrays(s: PauliString) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(perm, phase)`` with ``(s @ v)[i] = phase[i] * v[perm[i]]``.

    The string phase is not included.
    """
    n = s.n
    idx = np.arange(1 << n)
    xi = reverse_bits(s.x, n)
    zi = reverse_bits(s.z, n)
    perm = idx ^ xi
    # <i|P|i^x> = (-i)^{#Y} (-1)^{popcount((i^x) & z)}... evaluated on the input index
    parity = np.zeros(1 << n, dtype=np.int64)
    src = perm & zi
    for k in range(n):
        parity ^= (src >> k) & 1
    ny = (s.x & s.z).bit_count()
    phase = (1j) ** ny * (1 - 2 * parity)
    return perm, phase.astype(complex)


def to_dense(s: PauliSum) -> np.ndarray:
    """Dense ``2**n x 2**n`` matrix of a PauliSum."""
    n = s.n
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"to_dense limited to {MAX_DENSE_QUBITS} qubits")
    dim = 1 << n
    m = np.zeros((dim, dim), dtype=complex)
    rows = np.arange(dim)
    for p, c in s.terms.items():
        perm, phase = pauli_index_arrays(p)
        m[rows, perm] += c * phase
    return m


def check_hermitian(m: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    dim = m.shape[0]
    if dim & (dim - 1):
        raise ValueError("dimension must be a power of two")
    if np.max(np.abs(m - m.conj().T), initial=0.0) > tol * max(1.0, np.abs(m).max()):
        raise ValueError("matrix is not Hermitian")
    return m


def hs_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Normalized Hilbert-Schmidt product ``Tr(a^dag b) / dim``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    val = np.vdot(a, b) / a.shape[0]
    if abs(val.imag) > 1e-10:
        return complex(val)
    return float(val.real)


def _walsh_hadamard(v: np.ndarray) -> np.ndarray:
    """Unnormalized transform along the last axis: out[z] = sum_i (-1)^{i.z} v[i]."""
    v = v.copy()
    dim = v.shape[-1]
    h = 1
    while h < dim:
        v = v.reshape(v.shape[:-1] + (dim // (2 * h), 2, h))
        a = v[..., 0, :].copy()
        b = v[..., 1, :]
        v[..., 0, :] = a + b
        v[..., 1, :] = a - b
        v = v.reshape(v.shape[:-3] + (dim,))
        h *= 2
    return v


def decompose(m: np.ndarray, hermitian: bool = True) -> PauliSum:
    """Pauli coefficients ``c = Tr(P m) / 2**n`` of a dense matrix."""
    m = check_hermitian(m) if hermitian else np.asarray(m, dtype=complex)
    dim = m.shape[0]
    n = dim.bit_length() - 1
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"decompose limited to {MAX_DENSE_QUBITS} qubits")
    idx = np.arange(dim)
    # Row x of v holds m[i ^ x, i]; P[i, i^x] = (-i)^{#Y} (-1)^{popcount(i & z)}.
    v = m[idx[:, None] ^ idx[None, :], idx[None, :]]
    sums = _walsh_hadamard(v) / dim
    terms: dict[PauliString, complex] = {}
    rev = [reverse_bits(k, n) for k in range(dim)]
    for xi in range(dim):
        row = sums[xi]
        nz = np.nonzero(np.abs(row) >= PRUNE_TOL)[0]
        for zi in nz:
            x, z = rev[xi], rev[int(zi)]
            ny = (x & z).bit_count()
            c = row[zi] * (-1j) ** ny
            terms[PauliString(n, x, z)] = c
    out = PauliSum(n, terms)
    if hermitian:
        return PauliSum(n, {s: float(np.real(c)) for s, c in out.terms.items()})
    return out


def all_strings(n: int, support: Iterable[int] | None = None) -> Iterator[PauliString]:
    """Every Pauli string on ``support`` (default: all qubits), identity first."""
    qubits = list(range(n)) if support is None else list(support)
    k = len(qubits)
    for code in range(4**k):
        x = z = 0
        for j, q in enumerate(qubits):
            d = code >> (2 * j) & 3
            x |= (d & 1) << q
            z |= (d >> 1) << q
        yield PauliString(n, x, z)
