"""Exact statevector and density-matrix simulation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .pauli import PauliString, PauliSum, pauli_index_arrays, reverse_bits, to_dense

MAX_DENSITY_QUBITS = 10

_SQ2 = 1 / np.sqrt(2)
FIXED_GATES = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "P": np.diag([1, 1j]).astype(complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
}


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator used for every random draw in the package."""
    return np.random.Generator(np.random.Philox(int(seed) % (1 << 64)))


@dataclass(frozen=True, eq=False)
class Gate:
    """One circuit operation.

    kind is ``"fixed"`` (named gate), ``"rot"`` (``exp(-i t G / 2)`` with
    ``t = theta[slot]``) or ``"matrix"`` (explicit unitary built from the
    parameters in ``slots`` by ``fn``; ``dfn`` returns its derivatives).
    """

    kind: str
    qubits: tuple[int, ...]
    name: str = ""
    matrix_: np.ndarray | None = None
    generator: PauliString | None = None
    slots: tuple[int, ...] = ()
    fn: Callable[[np.ndarray], np.ndarray] | None = None
    dfn: Callable[[np.ndarray], list[np.ndarray]] | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def fixed(cls, name: str, *qubits: int) -> "Gate":
        m = FIXED_GATES[name]
        if m.shape[0] != 1 << len(qubits):
            raise ValueError(f"{name} acts on {m.shape[0].bit_length() - 1} qubits")
        return cls("fixed", tuple(qubits), name, matrix_=m)

    @classmethod
    def unitary(cls, matrix: np.ndarray, *qubits: int, name: str = "U") -> "Gate":
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (1 << len(qubits),) * 2:
            raise ValueError("matrix size does not match support")
        if not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=1e-10):
            raise ValueError("explicit gate matrix is not unitary")
        return cls("fixed", tuple(qubits), name, matrix_=m)

    @classmethod
    def rotation(cls, generator: PauliString, slot: int, name: str = "") -> "Gate":
        if generator.phase != 0 or generator.is_identity:
            raise ValueError("generator must be a nontrivial phase-free Pauli string")
        return cls("rot", generator.support, name or "R" + generator.label.replace("I", ""),
                   generator=generator, slots=(slot,))

    @classmethod
    def parametrized(cls, fn, dfn, qubits: Sequence[int], slots: Sequence[int], name: str) -> "Gate":
        return cls("matrix", tuple(qubits), name, slots=tuple(slots), fn=fn, dfn=dfn)

    @property
    def parametrized_(self) -> bool:
        return self.kind != "fixed"

    def local_matrix(self, params: np.ndarray | None = None) -> np.ndarray:
        """Unitary on ``self.qubits`` (first listed qubit = leftmost factor)."""
        if self.kind == "fixed":
            return self.matrix_
        if params is None:
            raise ValueError(f"gate {self.name} needs parameters")
        if self.kind == "rot":
            t = params[self.slots[0]]
            p = self._local_generator()
            return np.cos(t / 2) * np.eye(p.shape[0]) - 1j * np.sin(t / 2) * p
        return self.fn(np.asarray([params[s] for s in self.slots]))

    def _local_generator(self) -> np.ndarray:
        if "gen" not in self._cache:
            g = self.generator
            k = len(self.qubits)
            x = z = 0
            for j, q in enumerate(self.qubits):
                x |= (g.x >> q & 1) << j
                z |= (g.z >> q & 1) << j
            self._cache["gen"] = to_dense(PauliSum(k, {PauliString(k, x, z): 1.0}))
        return self._cache["gen"]

    def pauli_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if "arr" not in self._cache:
            self._cache["arr"] = pauli_index_arrays(self.generator)
        return self._cache["arr"]


@dataclass
class Circuit:
    """Ordered gate list on ``n`` qubits with ``num_params`` parameter slots."""

    n: int
    gates: list[Gate] = field(default_factory=list)
    num_params: int = 0

    def add(self, gate: Gate) -> "Circuit":
        if any(not 0 <= q < self.n for q in gate.qubits):
            raise ValueError(f"gate support {gate.qubits} out of range for n={self.n}")
        if len(set(gate.qubits)) != len(gate.qubits):
            raise ValueError("repeated qubit in gate support")
        if gate.generator is not None and gate.generator.n != self.n:
            raise ValueError("generator size mismatch")
        self.gates.append(gate)
        if gate.slots:
            self.num_params = max(self.num_params, max(gate.slots) + 1)
        return self

    def extend(self, gates: Sequence[Gate]) -> "Circuit":
        for g in gates:
            self.add(g)
        return self

    @property
    def pauli_only(self) -> bool:
        return all(g.kind != "matrix" for g in self.gates)

    def run(self, params=None, state: np.ndarray | None = None) -> np.ndarray:
        psi = basis_state(self.n, 0) if state is None else np.array(state, dtype=complex)
        p = None if params is None else np.asarray(params, dtype=float)
        if p is not None and len(p) != self.num_params:
            raise ValueError(f"expected {self.num_params} parameters, got {len(p)}")
        for g in self.gates:
            psi = apply_gate(psi, g, p, self.n)
        return psi

    def unitary(self, params=None) -> np.ndarray:
        dim = 1 << self.n
        cols = [self.run(params, basis_state(self.n, i)) for i in range(dim)]
        return np.array(cols).T

    def inverse(self) -> "Circuit":
        """Adjoint circuit for parameter-free circuits."""
        out = Circuit(self.n)
        for g in reversed(self.gates):
            if g.kind != "fixed":
                raise ValueError("inverse only supported for fixed gates")
            out.add(Gate("fixed", g.qubits, g.name + "^dag", matrix_=g.matrix_.conj().T))
        return out


@dataclass
class StateVector:
    n: int
    amps: np.ndarray

    def __post_init__(self):
        self.amps = np.asarray(self.amps, dtype=complex)
        if self.amps.shape != (1 << self.n,):
            raise ValueError("amplitude count must be 2**n")
        if abs(np.vdot(self.amps, self.amps).real - 1) > 1e-10:
            raise ValueError("state is not normalized")


def basis_state(n: int, index: int | str = 0) -> np.ndarray:
    """``|b>`` for an integer index or a bitstring (leftmost char = qubit 0)."""
    if isinstance(index, str):
        if len(index) != n:
            raise ValueError("bitstring length must equal n")
        index = int(index, 2) if index else 0
    psi = np.zeros(1 << n, dtype=complex)
    psi[index] = 1.0
    return psi


def apply_matrix(vec: np.ndarray, n: int, m: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Apply a ``2**k`` matrix to ``qubits`` of an n-qubit vector."""
    k = len(qubits)
    if k == 1:
        q = qubits[0]
        v = vec.reshape(1 << q, 2, -1)
        a, b = v[:, 0, :], v[:, 1, :]
        out = np.empty_like(v)
        out[:, 0, :] = m[0, 0] * a + m[0, 1] * b
        out[:, 1, :] = m[1, 0] * a + m[1, 1] * b
        return out.reshape(-1)
    t = vec.reshape((2,) * n)
    t = np.tensordot(m.reshape((2,) * (2 * k)), t, axes=(list(range(k, 2 * k)), list(qubits)))
    return np.moveaxis(t, list(range(k)), list(qubits)).reshape(-1)


def apply_pauli(vec: np.ndarray, s: PauliString) -> np.ndarray:
    """``s @ vec`` including the string phase."""
    perm, phase = pauli_index_arrays(s)
    return (1j**s.phase) * phase * vec[perm]


def apply_gate(vec: np.ndarray, g: Gate, params=None, n: int | None = None) -> np.ndarray:
    n = vec.shape[0].bit_length() - 1 if n is None else n
    if any(not 0 <= q < n for q in g.qubits):
        raise ValueError("gate support out of range")
    if g.kind == "rot":
        if params is None:
            raise ValueError(f"gate {g.name} needs a parameter")
        t = params[g.slots[0]]
        perm, phase = g.pauli_arrays()
        return np.cos(t / 2) * vec - 1j * np.sin(t / 2) * phase * vec[perm]
    return apply_matrix(vec, n, g.local_matrix(params), g.qubits)


def apply_gate_inverse(vec: np.ndarray, g: Gate, params, n: int) -> np.ndarray:
    if g.kind == "rot":
        t = params[g.slots[0]]
        perm, phase = g.pauli_arrays()
        return np.cos(t / 2) * vec + 1j * np.sin(t / 2) * phase * vec[perm]
    return apply_matrix(vec, n, g.local_matrix(params).conj().T, g.qubits)


class Observable:
    """PauliSum compiled into x-mask groups for fast ``H @ psi``."""

    def __init__(self, h: PauliSum):
        self.n = h.n
        self.hamiltonian = h
        dim = 1 << h.n
        groups: dict[int, np.ndarray] = {}
        for s, c in h.terms.items():
            perm, phase = pauli_index_arrays(s)
            xi = reverse_bits(s.x, h.n)
            groups.setdefault(xi, np.zeros(dim, dtype=complex))
            groups[xi] += c * phase
        idx = np.arange(dim)
        self._diag = groups.pop(0, None)
        self._groups = [(idx ^ xi, d) for xi, d in groups.items()]
        self.hermitian = h.is_hermitian

    def apply(self, psi: np.ndarray) -> np.ndarray:
        out = self._diag * psi if self._diag is not None else np.zeros_like(psi)
        for perm, d in self._groups:
            out += d * psi[perm]
        return out

    def expectation(self, psi: np.ndarray) -> float:
        val = np.vdot(psi, self.apply(psi))
        return float(val.real) if self.hermitian else complex(val)


def expectation(state, h: PauliSum) -> float:
    psi = state.amps if isinstance(state, StateVector) else np.asarray(state)
    if psi.shape[0] != 1 << h.n:
        raise ValueError("size mismatch between state and observable")
    return Observable(h).expectation(psi)


def adjoint_gradient(circuit: Circuit, obs: Observable, params) -> tuple[float, np.ndarray]:
    """Energy and exact gradient by reverse-mode sweep over the gate list."""
    p = np.asarray(params, dtype=float)
    n = circuit.n
    psi = circuit.run(p)
    lam = obs.apply(psi)
    energy = float(np.vdot(psi, lam).real)
    grad = np.zeros(circuit.num_params)
    for g in reversed(circuit.gates):
        if g.kind == "rot":
            perm, phase = g.pauli_arrays()
            grad[g.slots[0]] += float(np.vdot(lam, phase * psi[perm]).imag)
            psi = apply_gate_inverse(psi, g, p, n)
        elif g.kind == "matrix":
            prev = apply_gate_inverse(psi, g, p, n)
            local = np.asarray([p[s] for s in g.slots])
            for s, dm in zip(g.slots, g.dfn(local)):
                grad[s] += 2 * float(np.vdot(lam, apply_matrix(prev, n, dm, g.qubits)).real)
            psi = prev
        else:
            psi = apply_gate_inverse(psi, g, p, n)
        lam = apply_gate_inverse(lam, g, p, n)
    return energy, grad


def sample_counts(state, rotations: Circuit | None, shots: int, seed: int) -> dict[str, int]:
    """Multinomial measurement histogram after optional basis rotations."""
    if shots < 1:
        raise ValueError("shots must be positive")
    psi = state.amps if isinstance(state, StateVector) else np.asarray(state)
    n = psi.shape[0].bit_length() - 1
    if rotations is not None:
        psi = rotations.run(None, psi)
    probs = np.abs(psi) ** 2
    return counts_from_probs(probs, n, shots, make_rng(seed))


def counts_from_probs(probs: np.ndarray, n: int, shots: int, rng: np.random.Generator) -> dict[str, int]:
    probs = np.clip(np.real(probs), 0, None)
    counts = rng.multinomial(shots, probs / probs.sum())
    return {format(i, f"0{n}b"): int(c) for i, c in enumerate(counts) if c}


def histogram_csv(counts: dict[str, int]) -> str:
    lines = ["bitstring,count"] + [f"{b},{c}" for b, c in sorted(counts.items())]
    return "\n".join(lines) + "\n"


@dataclass
class NoiseModel:
    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        for p in (self.p1, self.p2):
            if not 0 <= p <= 1:
                raise ValueError("depolarizing probability must lie in [0, 1]")


@dataclass
class DensityMatrix:
    n: int
    rho: np.ndarray

    def __post_init__(self):
        if self.n > MAX_DENSITY_QUBITS:
            raise ValueError(f"density matrices limited to {MAX_DENSITY_QUBITS} qubits")
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.rho.shape != (1 << self.n,) * 2:
            raise ValueError("density matrix must be 2**n square")

    @classmethod
    def pure(cls, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        return cls(psi.shape[0].bit_length() - 1, np.outer(psi, psi.conj()))

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def fidelity(self, psi: np.ndarray) -> float:
        return float(np.vdot(psi, self.rho @ psi).real)

    def expectation(self, h: PauliSum) -> float:
        return float(np.real(np.trace(to_dense(h) @ self.rho)))

    def probabilities(self) -> np.ndarray:
        return np.clip(np.real(np.diag(self.rho)), 0, None)

    def check(self, tol: float = 1e-10) -> None:
        """Debug check of Hermiticity, trace and positivity."""
        if np.abs(self.rho - self.rho.conj().T).max() > tol:
            raise ValueError("density matrix not Hermitian")
        if abs(self.trace - 1) > tol:
            raise ValueError("density matrix trace differs from 1")
        if np.linalg.eigvalsh(self.rho).min() < -tol:
            raise ValueError("density matrix has a negative eigenvalue")


def conjugate_dm(dm: DensityMatrix, m: np.ndarray, qubits: Sequence[int]) -> DensityMatrix:
    """``rho -> U rho U^dag`` for a local unitary on ``qubits``."""
    n = dm.n
    v = dm.rho.reshape(-1)
    v = apply_matrix(v, 2 * n, m, list(qubits))
    v = apply_matrix(v, 2 * n, m.conj(), [q + n for q in qubits])
    return DensityMatrix(n, v.reshape(dm.rho.shape))


def apply_depolarizing(dm: DensityMatrix, p: float, support: Sequence[int]) -> DensityMatrix:
    """``(1-p) rho + p * Tr_Y(rho) (x) 1_Y / 2**|Y|`` on the qubit set Y."""
    if not 0 <= p <= 1:
        raise ValueError("depolarizing probability must lie in [0, 1]")
    support = sorted(set(support))
    if p == 0 or not support:
        return DensityMatrix(dm.n, dm.rho.copy())
    n = dm.n
    letters = [chr(ord("a") + i) for i in range(2 * n)] if 2 * n <= 26 else None
    if letters is None:
        letters = [chr(c) for c in list(range(ord("a"), ord("z") + 1)) + list(range(ord("A"), ord("Z") + 1))][: 2 * n]
    t = dm.rho.reshape((2,) * (2 * n))
    ins = list(letters)
    for q in support:
        ins[n + q] = ins[q]
    keep = [letters[i] for i in range(2 * n) if (i % n) not in support]
    reduced = np.einsum("".join(ins) + "->" + "".join(keep), t)
    operands = [reduced]
    subs = ["".join(keep)]
    eye = np.eye(2) / 2
    for q in support:
        operands.append(eye)
        subs.append(letters[q] + letters[n + q])
    mixed = np.einsum(",".join(subs) + "->" + "".join(letters), *operands)
    rho = (1 - p) * dm.rho + p * mixed.reshape(dm.rho.shape)
    return DensityMatrix(n, rho)


def evolve_noisy(circuit: Circuit, params, noise: NoiseModel | None, dm: DensityMatrix) -> DensityMatrix:
    """Conjugate by each gate, then depolarize its support (p1 or p2)."""
    if dm.n != circuit.n:
        raise ValueError("size mismatch")
    p = None if params is None else np.asarray(params, dtype=float)
    for g in circuit.gates:
        dm = conjugate_dm(dm, g.local_matrix(p), g.qubits)
        if noise is not None:
            prob = noise.p1 if len(g.qubits) == 1 else noise.p2
            if prob:
                dm = apply_depolarizing(dm, prob, g.qubits)
    return dm


def ghz_state(n: int) -> np.ndarray:
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = psi[-1] = _SQ2
    return psi


def ghz_circuit(n: int) -> Circuit:
    """Hadamard on qubit 0 followed by a CNOT ladder."""
    c = Circuit(n)
    c.add(Gate.fixed("H", 0))
    for i in range(n - 1):
        c.add(Gate.fixed("CNOT", i, i + 1))
    return c


def global_depol_state(n: int, alpha: float) -> DensityMatrix:
    """``(1 - alpha)|GHZ><GHZ| + alpha / 2**n``."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    psi = ghz_state(n)
    dim = 1 << n
    rho = (1 - alpha) * np.outer(psi, psi.conj()) + alpha / dim * np.eye(dim)
    return DensityMatrix(n, rho)
