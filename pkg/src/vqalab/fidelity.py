"""Stabilizer tableaux, telescope Hamiltonians and GHZ fidelity estimators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .pauli import PauliString, PauliSum, reverse_bits, to_dense
from .simulator import (
    FIXED_GATES,
    Circuit,
    DensityMatrix,
    Gate,
    NoiseModel,
    apply_depolarizing,
    conjugate_dm,
    evolve_noisy,
    ghz_circuit,
    global_depol_state,
    make_rng,
)

CLIFFORD_GATES = ("H", "P", "X", "Z", "CNOT", "CZ")


@dataclass(frozen=True)
class StabilizerTableau:
    """Signed generators; the state is their common +1 eigenvector."""

    n: int
    generators: tuple[PauliString, ...]

    def __post_init__(self):
        if len(self.generators) != self.n:
            raise ValueError("a tableau holds exactly n generators")
        for g in self.generators:
            if g.n != self.n or g.phase not in (0, 2):
                raise ValueError("generators must be signed Hermitian strings on n qubits")

    @classmethod
    def zero_state(cls, n: int) -> "StabilizerTableau":
        return cls(n, tuple(PauliString.single(n, q, "Z") for q in range(n)))

    def check(self) -> None:
        """Raise if generators fail to commute or are dependent."""
        gens = self.generators
        for i, a in enumerate(gens):
            for b in gens[i + 1 :]:
                if ((a.x & b.z).bit_count() + (a.z & b.x).bit_count()) % 2:
                    raise ValueError("generators do not commute")
        rows = [g.x | g.z << self.n for g in gens]
        rank = 0
        for bit in range(2 * self.n):
            pivot = next((r for r in rows[rank:] if r >> bit & 1), None)
            if pivot is None:
                continue
            i = rows.index(pivot, rank)
            rows[rank], rows[i] = rows[i], rows[rank]
            rows = [r ^ pivot if j != rank and r >> bit & 1 else r for j, r in enumerate(rows)]
            rank += 1
        if rank != self.n:
            raise ValueError("generators are not independent")


def _bit(m: int, q: int) -> int:
    return m >> q & 1


def _conj_one(p: PauliString, gate: str, qubits: Sequence[int]) -> PauliString:
    x, z, sign = p.x, p.z, p.phase // 2
    if gate == "H":
        (a,) = qubits
        xa, za = _bit(x, a), _bit(z, a)
        sign ^= xa & za
        x = x & ~(1 << a) | za << a
        z = z & ~(1 << a) | xa << a
    elif gate == "P":
        (a,) = qubits
        xa, za = _bit(x, a), _bit(z, a)
        sign ^= xa & za
        z ^= xa << a
    elif gate == "X":
        sign ^= _bit(z, qubits[0])
    elif gate == "Z":
        sign ^= _bit(x, qubits[0])
    elif gate == "CNOT":
        a, b = qubits
        xa, za, xb, zb = _bit(x, a), _bit(z, a), _bit(x, b), _bit(z, b)
        sign ^= xa & zb & (xb ^ za ^ 1)
        x ^= xa << b
        z ^= zb << a
    elif gate == "CZ":
        a, b = qubits
        for g, qs in (("H", (b,)), ("CNOT", (a, b)), ("H", (b,))):
            p = _conj_one(PauliString(p.n, x, z, 2 * sign), g, qs)
            x, z, sign = p.x, p.z, p.phase // 2
    else:
        raise ValueError(f"{gate} is not a Clifford generator")
    return PauliString(p.n, x, z, 2 * sign)


def clifford_conjugate(t: StabilizerTableau, gate: str, qubits: Sequence[int]) -> StabilizerTableau:
    """``g -> G g G^dag`` for every generator."""
    if gate not in CLIFFORD_GATES:
        raise ValueError(f"{gate} is not a Clifford generator")
    arity = 2 if gate in ("CNOT", "CZ") else 1
    if len(qubits) != arity or any(not 0 <= q < t.n for q in qubits) or len(set(qubits)) != arity:
        raise ValueError("bad qubits for gate")
    return StabilizerTableau(t.n, tuple(_conj_one(g, gate, qubits) for g in t.generators))


def _require_clifford(circuit: Circuit) -> None:
    for g in circuit.gates:
        if g.kind != "fixed" or g.name not in CLIFFORD_GATES:
            raise ValueError(f"gate {g.name or g.kind} is not Clifford")


def circuit_tableau(circuit: Circuit) -> StabilizerTableau:
    _require_clifford(circuit)
    t = StabilizerTableau.zero_state(circuit.n)
    for g in circuit.gates:
        t = clifford_conjugate(t, g.name, g.qubits)
    return t


def telescope(circuit: Circuit) -> PauliSum:
    """``n - sum_i U Z_i U^dag``: zero energy exactly on the circuit output."""
    t = circuit_tableau(circuit)
    terms: dict[PauliString, float] = {PauliString(circuit.n): float(circuit.n)}
    for g in t.generators:
        terms[g.phase_free()] = -1.0 if g.phase == 0 else 1.0
    return PauliSum(circuit.n, terms)


def random_clifford_circuit(n: int, depth: int, rng: np.random.Generator) -> Circuit:
    c = Circuit(n)
    for _ in range(depth):
        name = CLIFFORD_GATES[rng.integers(len(CLIFFORD_GATES) if n > 1 else 4)]
        if name in ("CNOT", "CZ"):
            a, b = rng.choice(n, 2, replace=False)
            c.add(Gate.fixed(name, int(a), int(b)))
        else:
            c.add(Gate.fixed(name, int(rng.integers(n))))
    return c


# ---------------------------------------------------------------- stability bounds


@dataclass(frozen=True)
class FidelityBounds:
    lower: float
    upper: float
    energy: float
    gap: float
    lam_max: float
    applies: bool


def stability_bounds(energy: float, gap: float, lam_max: float) -> FidelityBounds:
    """``1 - E/gap <= F <= 1 - E/lam_max``; ``applies`` is False when E exceeds the gap."""
    if gap <= 0:
        raise ValueError("gap must be positive")
    if lam_max < gap:
        raise ValueError("largest eigenvalue must be at least the gap")
    if energy < 0:
        raise ValueError("energy of a zero-ground-energy Hamiltonian is non-negative")
    lower = min(max(1 - energy / gap, 0.0), 1.0)
    upper = min(max(1 - energy / lam_max, 0.0), 1.0)
    return FidelityBounds(lower, upper, energy, gap, lam_max, energy <= gap)


def telescope_gap_and_max(h: PauliSum, dense: bool = False) -> tuple[float, float]:
    """Gap and top eigenvalue of a telescope: ``(2, 2n)``.

    The n generators commute and are independent, so the spectrum is ``2k``
    for ``k = 0..n``.  ``dense=True`` diagonalizes instead.
    """
    if dense:
        ev = np.linalg.eigvalsh(to_dense(h))
        nonzero = ev[ev > 1e-9]
        return float(nonzero.min()), float(ev.max())
    n_gen = sum(1 for s in h.terms if not s.is_identity)
    return 2.0, 2.0 * n_gen


# ---------------------------------------------------------------- noisy GHZ sources


def noisy_ghz(n: int, noise: NoiseModel | None) -> DensityMatrix:
    """GHZ circuit under per-gate local depolarizing noise."""
    return evolve_noisy(ghz_circuit(n), None, noise, DensityMatrix.pure(np.eye(1 << n)[0]))


def global_family(n: int, alpha: float) -> DensityMatrix:
    return global_depol_state(n, alpha)


def ghz_fidelity(dm: DensityMatrix) -> float:
    dim = 1 << dm.n
    return float(0.5 * (dm.rho[0, 0] + dm.rho[-1, -1]).real + np.abs(dm.rho[0, dim - 1]))


# ---------------------------------------------------------------- shot statistics


def bootstrap_se(
    probs: Sequence[float], shots: int, estimator: Callable[[np.ndarray], float], boots: int = 100, seed: int = 0
) -> float:
    """Parametric bootstrap: resample every entry as Binomial(shots, p) / shots."""
    if boots < 2:
        raise ValueError("need at least two bootstrap resamples")
    p = np.clip(np.asarray(probs, dtype=float), 0, 1)
    rng = make_rng(seed)
    vals = [estimator(rng.binomial(shots, p) / shots) for _ in range(boots)]
    return float(np.std(vals, ddof=1))


def _rotate_all(dm: DensityMatrix, m: np.ndarray, noise: NoiseModel | None = None) -> DensityMatrix:
    for q in range(dm.n):
        dm = conjugate_dm(dm, m, [q])
        if noise is not None and noise.p1:
            dm = apply_depolarizing(dm, noise.p1, [q])
    return dm


def parity_grid(n: int) -> np.ndarray:
    return 2 * np.pi * np.arange(2 * n + 2) / (2 * n + 2)


def parity_rotation(phi: float) -> np.ndarray:
    """``exp(-i pi/4 (cos(phi) X + sin(phi) Y))``."""
    g = np.cos(phi) * FIXED_GATES["X"] + np.sin(phi) * np.array([[0, -1j], [1j, 0]])
    return np.cos(np.pi / 4) * np.eye(2) - 1j * np.sin(np.pi / 4) * g


def _weights(n: int) -> np.ndarray:
    return np.array([bin(i).count("1") for i in range(1 << n)])


@dataclass(frozen=True)
class CoherenceEstimate:
    method: str
    populations: float
    coherence: float
    fidelity: float
    se: float
    flagged: bool = False


def parity_signal(dm: DensityMatrix, phis: Sequence[float] | None = None, noise: NoiseModel | None = None):
    """Exact GHZ populations and even-parity probabilities after each analysis rotation."""
    n = dm.n
    phis = parity_grid(n) if phis is None else np.asarray(phis)
    if len(phis) < 2 * n + 2:
        raise ValueError("parity grid needs at least 2n + 2 points")
    probs = dm.probabilities()
    pop = float(probs[0] + probs[-1])
    even = _weights(n) % 2 == 0
    q = np.array([_rotate_all(dm, parity_rotation(p), noise).probabilities()[even].sum() for p in phis])
    return pop, np.clip(q, 0, 1), phis


def _fit_parity(parity: np.ndarray, phis: np.ndarray, n: int) -> float:
    design = np.column_stack([np.cos(n * phis), np.sin(n * phis)])
    coef, *_ = np.linalg.lstsq(design, parity, rcond=None)
    return float(np.hypot(*coef))


def parity_estimate(pop: float, q: np.ndarray, phis: np.ndarray, n: int, shots: int, seed: int, boots: int = 100) -> CoherenceEstimate:
    """Sample shots, fit ``C cos(n phi - gamma)`` to the parity and bootstrap the SE of ``(P + C)/2``."""
    rng = make_rng(seed)
    p_hat = rng.binomial(shots, pop) / shots
    q_hat = rng.binomial(shots, q) / shots

    def fid(vec):
        return 0.5 * (vec[0] + _fit_parity(2 * vec[1:] - 1, phis, n))

    c = _fit_parity(2 * q_hat - 1, phis, n)
    se = bootstrap_se(np.concatenate([[p_hat], q_hat]), shots, fid, boots, seed + 1)
    flagged = c < 1e-12
    return CoherenceEstimate("parity", float(p_hat), c, 0.5 * (p_hat + c), se, flagged)


def parity_oscillations(dm: DensityMatrix, shots: int, seed: int = 0, phis=None, boots: int = 100, noise=None) -> CoherenceEstimate:
    pop, q, phis = parity_signal(dm, phis, noise)
    return parity_estimate(pop, q, phis, dm.n, shots, seed, boots)


def mqc_grid(n: int) -> np.ndarray:
    return np.pi * np.arange(2 * n + 2) / (n + 1)


def mqc_signal(dm: DensityMatrix, noise: NoiseModel | None = None):
    """Exact populations and return probabilities ``P(0...0)`` after phase, then unprepare."""
    n = dm.n
    phis = mqc_grid(n)
    probs = dm.probabilities()
    pop = float(probs[0] + probs[-1])
    unprep = ghz_circuit(n).inverse()
    s = []
    for phi in phis:
        rz = np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)])
        rotated = _rotate_all(dm, rz)
        s.append(evolve_noisy(unprep, None, noise, rotated).probabilities()[0])
    return pop, np.clip(np.array(s), 0, 1), phis


def _mqc_coherence(s: np.ndarray, phis: np.ndarray, n: int) -> tuple[float, bool]:
    i_n = np.abs(np.mean(s * np.exp(-1j * n * phis)))
    return 2 * float(np.sqrt(max(i_n, 0.0))), False


def mqc_estimate(pop: float, s: np.ndarray, phis: np.ndarray, n: int, shots: int, seed: int, boots: int = 100) -> CoherenceEstimate:
    rng = make_rng(seed)
    p_hat = rng.binomial(shots, pop) / shots
    s_hat = rng.binomial(shots, s) / shots

    def fid(vec):
        return 0.5 * (vec[0] + _mqc_coherence(vec[1:], phis, n)[0])

    c, flagged = _mqc_coherence(s_hat, phis, n)
    se = bootstrap_se(np.concatenate([[p_hat], s_hat]), shots, fid, boots, seed + 1)
    return CoherenceEstimate("mqc", float(p_hat), c, 0.5 * (p_hat + c), se, flagged)


def mqc(dm: DensityMatrix, shots: int, seed: int = 0, boots: int = 100, noise=None) -> CoherenceEstimate:
    pop, s, phis = mqc_signal(dm, noise)
    return mqc_estimate(pop, s, phis, dm.n, shots, seed, boots)


# ---------------------------------------------------------------- telescope energy

_TO_Z = {
    "X": FIXED_GATES["H"],
    "Y": FIXED_GATES["H"] @ FIXED_GATES["P"].conj().T,
}


def measurement_groups(h: PauliSum) -> list[list[tuple[PauliString, float]]]:
    """Greedy grouping of non-identity terms into qubit-wise commuting series."""
    groups: list[tuple[dict[int, str], list]] = []
    for s, c in sorted(h.terms.items(), key=lambda kv: kv[0].label):
        if s.is_identity:
            continue
        ops = {q: s.label[q] for q in s.support}
        for basis, members in groups:
            if all(basis.get(q, o) == o for q, o in ops.items()):
                basis.update(ops)
                members.append((s, float(np.real(c))))
                break
        else:
            groups.append((dict(ops), [(s, float(np.real(c)))]))
    return [members for _, members in groups]


@dataclass(frozen=True)
class SeriesDistribution:
    probs: np.ndarray
    values: np.ndarray


def telescope_distributions(dm: DensityMatrix, h: PauliSum, noise: NoiseModel | None = None) -> tuple[float, list[SeriesDistribution]]:
    """Constant offset and, per series, outcome probabilities with per-outcome energies."""
    n = dm.n
    offset = float(np.real(h.coefficient(PauliString(n))))
    idx = np.arange(1 << n)
    out = []
    for members in measurement_groups(h):
        basis: dict[int, str] = {}
        for s, _ in members:
            basis.update({q: s.label[q] for q in s.support})
        rotated = dm
        for q, o in basis.items():
            if o != "Z":
                rotated = conjugate_dm(rotated, _TO_Z[o], [q])
                if noise is not None and noise.p1:
                    rotated = apply_depolarizing(rotated, noise.p1, [q])
        values = np.zeros(1 << n)
        for s, c in members:
            mask = reverse_bits(s.support_mask, n)
            parity = np.array([bin(i & mask).count("1") & 1 for i in idx])
            values += c * (1 - 2 * parity)
        out.append(SeriesDistribution(rotated.probabilities(), values))
    return offset, out


@dataclass(frozen=True)
class EnergyEstimate:
    energy: float
    se: float
    series: int


def telescope_energy_estimate(offset: float, series: Sequence[SeriesDistribution], shots: int, seed: int) -> EnergyEstimate:
    """Per series: mean and SE of the per-shot energy; series combined in quadrature."""
    if shots < 2:
        raise ValueError("need at least two shots per series")
    rng = make_rng(seed)
    energy, var = offset, 0.0
    for sd in series:
        counts = rng.multinomial(shots, sd.probs / sd.probs.sum())
        mean = counts @ sd.values / shots
        second = counts @ sd.values**2 / shots
        energy += mean
        var += max(second - mean**2, 0.0) * shots / (shots - 1) / shots
    return EnergyEstimate(float(energy), float(np.sqrt(var)), len(series))


def measure_telescope_energy(dm: DensityMatrix, h: PauliSum, shots: int, seed: int = 0, noise=None) -> EnergyEstimate:
    offset, series = telescope_distributions(dm, h, noise)
    return telescope_energy_estimate(offset, series, shots, seed)


def telescope_bounds(dm: DensityMatrix, h: PauliSum) -> FidelityBounds:
    """Stability bounds from the exact telescope energy."""
    gap, top = telescope_gap_and_max(h)
    return stability_bounds(max(dm.expectation(h), 0.0), gap, top)
