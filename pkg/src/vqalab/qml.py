"""Quantum classifier over VQE-prepared states with a majority-vote readout."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .ansatz import AnsatzLayout, build_checkerboard
from .pauli import PauliSum, decompose
from .simulator import Circuit, basis_state, make_rng
from .vqe import OptimizerConfig, aavqe_sweep, best_of_two

LOSS_CLIP = 1e-9


def vote_diagonal(n: int) -> np.ndarray:
    """1 above half weight, 1/2 at exactly half, 0 below."""
    if n < 1:
        raise ValueError("n must be positive")
    weights = np.array([bin(i).count("1") for i in range(1 << n)])
    return np.where(2 * weights > n, 1.0, np.where(2 * weights == n, 0.5, 0.0))


@dataclass(frozen=True)
class VoteObservable:
    """Diagonal majority-vote observable evaluated from amplitudes or histograms."""

    n: int

    @property
    def diagonal(self) -> np.ndarray:
        return vote_diagonal(self.n)

    def expectation(self, psi: np.ndarray) -> float:
        return float(np.abs(psi) ** 2 @ self.diagonal)

    def from_counts(self, counts: dict[str, int]) -> float:
        total = sum(counts.values())
        if total == 0:
            raise ValueError("empty histogram")
        acc = 0.0
        for bits, c in counts.items():
            w = bits.count("1")
            acc += c * (1.0 if 2 * w > self.n else 0.5 if 2 * w == self.n else 0.0)
        return acc / total

    def to_pauli_sum(self) -> PauliSum:
        if self.n > 8:
            raise ValueError("dense Pauli expansion limited to 8 qubits")
        return decompose(np.diag(self.diagonal))


def vote_hamiltonian(n: int) -> VoteObservable:
    return VoteObservable(n)


@dataclass
class LabeledStatePrep:
    prep: np.ndarray
    label: int
    meta: float

    def __post_init__(self):
        self.prep = np.asarray(self.prep, dtype=float)
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")


@dataclass
class ClassifierModel:
    """Data circuit, classifier circuit and classifier parameters."""

    data_circuit: Circuit
    layout: AnsatzLayout
    circuit: Circuit
    phi: np.ndarray
    vote: VoteObservable = field(init=False)

    def __post_init__(self):
        if self.data_circuit.n != self.circuit.n:
            raise ValueError("data and classifier circuits differ in size")
        self.phi = np.asarray(self.phi, dtype=float)
        if self.phi.shape != (self.circuit.num_params,):
            raise ValueError("parameter vector does not match the classifier")
        self.vote = VoteObservable(self.circuit.n)

    @classmethod
    def checkerboard(cls, data_circuit: Circuit, layers: int, seed: int = 0, boundary: str = "ring") -> "ClassifierModel":
        layout, circ = build_checkerboard(data_circuit.n, layers, "Entangler", boundary)
        phi = make_rng(seed).uniform(-np.pi, np.pi, circ.num_params)
        return cls(data_circuit, layout, circ, phi)

    def input_state(self, datum: LabeledStatePrep) -> np.ndarray:
        if datum.prep.shape != (self.data_circuit.num_params,):
            raise ValueError("prep length does not match the data circuit")
        return self.data_circuit.run(datum.prep, basis_state(self.data_circuit.n, 0))

    def probability(self, psi: np.ndarray, phi: np.ndarray | None = None) -> float:
        out = self.circuit.run(self.phi if phi is None else phi, psi)
        return min(max(self.vote.expectation(out), 0.0), 1.0)


def predict(model: ClassifierModel, datum: LabeledStatePrep) -> float:
    return model.probability(model.input_state(datum))


def _loss(p: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(p, LOSS_CLIP, 1 - LOSS_CLIP)
    return float(-np.sum(y * np.log(p) + (1 - y) * np.log(1 - p)))


def log_loss(model: ClassifierModel, data: Sequence[LabeledStatePrep]) -> float:
    p = np.array([predict(model, d) for d in data])
    return _loss(p, np.array([d.label for d in data], dtype=float))


def accuracy(model: ClassifierModel, data: Sequence[LabeledStatePrep], threshold: float = 0.5) -> float:
    """Share of correct labels; ``p >= threshold`` votes for label 1."""
    if not data:
        raise ValueError("no data")
    hits = [(predict(model, d) >= threshold) == bool(d.label) for d in data]
    return float(np.mean(hits))


@dataclass
class TrainConfig:
    """SPSA on the mean log loss; gains decay as ``1/sqrt(epoch)``."""

    epochs: int = 300
    a: float = 1.0
    c: float = 0.5
    seed: int = 0


@dataclass
class TrainResult:
    model: ClassifierModel
    losses: list[float]
    train_accuracy: float


def train(model: ClassifierModel, data: Sequence[LabeledStatePrep], config: TrainConfig = TrainConfig()) -> TrainResult:
    """Return a trained copy of ``model``; the trace holds the full log loss per epoch."""
    if not data:
        raise ValueError("no training data")
    states = [model.input_state(d) for d in data]
    y = np.array([d.label for d in data], dtype=float)

    def mean_loss(phi):
        p = np.array([model.probability(s, phi) for s in states])
        return _loss(p, y) / len(states)

    rng = make_rng(config.seed)
    phi = model.phi.copy()
    losses = []
    for epoch in range(1, config.epochs + 1):
        ak = config.a / np.sqrt(epoch)
        ck = config.c / np.sqrt(epoch)
        delta = rng.choice([-1.0, 1.0], size=phi.shape)
        diff = mean_loss(phi + ck * delta) - mean_loss(phi - ck * delta)
        if not np.isfinite(diff):
            raise FloatingPointError("loss became NaN during training")
        phi = phi - ak * diff / (2 * ck) * delta
        losses.append(mean_loss(phi) * len(states))
    trained = ClassifierModel(model.data_circuit, model.layout, model.circuit, phi)
    acc = float(np.mean([(trained.probability(s) >= 0.5) == bool(t) for s, t in zip(states, y)]))
    return TrainResult(trained, losses, acc)


def train_best_of(
    data_circuit: Circuit,
    layers: int,
    data: Sequence[LabeledStatePrep],
    seeds: Sequence[int],
    config: TrainConfig = TrainConfig(),
) -> TrainResult:
    """Train from several seeds and keep the run with the lowest final training loss."""
    best = None
    for s in seeds:
        model = ClassifierModel.checkerboard(data_circuit, layers, seed=s)
        res = train(model, data, TrainConfig(config.epochs, config.a, config.c, s))
        if best is None or res.losses[-1] < best.losses[-1]:
            best = res
    return best


def split(data: Sequence[LabeledStatePrep], train_share: float = 0.7, seed: int = 0):
    """Seeded shuffle then a ``train_share`` / rest split."""
    if not 0 < train_share < 1:
        raise ValueError("train share must lie in (0, 1)")
    idx = make_rng(seed).permutation(len(data))
    cut = int(round(train_share * len(data)))
    return [data[i] for i in idx[:cut]], [data[i] for i in idx[cut:]]


# ---------------------------------------------------------------- augmentation


def _last_blocks(layout: AnsatzLayout) -> dict[int, object]:
    last = {}
    for b in layout.blocks:
        for q in b.qubits:
            last[q] = b
    return last


def augment_xxz(layout: AnsatzLayout, prep, phi: float = 0.0, flip: bool = False) -> np.ndarray:
    """Parameters of ``X^n (flip) exp(-i phi/2 sum Z) U(prep)|0>`` within the same ansatz.

    Works on entangler blocks whose slot order is Rx a, Rx b, Rzz, Rz b, Rz a.
    The Z rotation adds ``phi`` to each qubit's final Rz angle.  The flip
    negates the final Rz angles, adds pi to the final Rx angles, and negates the
    Rzz angle of a final block that is final for only one of its qubits.
    """
    if any(b.kind not in ("Entangler", "XZZZ") for b in layout.blocks):
        raise ValueError("augmentation needs entangler blocks")
    out = np.array(prep, dtype=float)
    if out.shape != (layout.num_params,):
        raise ValueError("parameter vector does not match the layout")
    last = _last_blocks(layout)
    if len(last) != layout.n:
        raise ValueError("every qubit must be touched by a block")

    def slots_for(b, q):
        rx = b.slots[0] if q == b.qubits[0] else b.slots[1]
        rz = b.slots[4] if q == b.qubits[0] else b.slots[3]
        return rx, rz

    for q, b in last.items():
        out[slots_for(b, q)[1]] += phi
    if flip:
        for q, b in last.items():
            rx, rz = slots_for(b, q)
            out[rz] = -out[rz]
            out[rx] += np.pi
        for b in {id(b): b for b in last.values()}.values():
            finals = sum(last[q] is b for q in b.qubits)
            if finals == 1:
                out[b.slots[2]] = -out[b.slots[2]]
    return out


def augment_dataset(
    layout: AnsatzLayout, data: Sequence[LabeledStatePrep], copies: int, seed: int
) -> list[LabeledStatePrep]:
    """Each datum plus ``copies`` images under random Z rotations and random flips."""
    rng = make_rng(seed)
    out = list(data)
    for d in data:
        for _ in range(copies):
            prep = augment_xxz(layout, d.prep, rng.uniform(0, 2 * np.pi), bool(rng.integers(2)))
            out.append(LabeledStatePrep(prep, d.label, d.meta))
    return out


# ---------------------------------------------------------------- datasets


def sweep_dataset(
    grid: Sequence[float],
    hamiltonian_at: Callable[[float], PauliSum],
    circuit: Circuit,
    config: OptimizerConfig,
    threshold: float,
    restarts: int = 1,
) -> list[LabeledStatePrep]:
    """Best-of-two AAVQE solutions labelled 1 above ``threshold``."""
    up = aavqe_sweep(grid, hamiltonian_at, circuit, config, "up", restarts=restarts, with_exact=False)
    down = aavqe_sweep(grid, hamiltonian_at, circuit, config, "down", restarts=restarts, with_exact=False)
    return [LabeledStatePrep(p.theta, int(p.value > threshold), p.value) for p in best_of_two(up, down)]


def relabel(data: Sequence[LabeledStatePrep], threshold: float) -> list[LabeledStatePrep]:
    return [LabeledStatePrep(d.prep, int(d.meta > threshold), d.meta) for d in data]


@dataclass
class ConfusionPoint:
    threshold: float
    train_accuracy: float
    test_accuracy: float


def confusion_scan(
    data_circuit: Circuit,
    data: Sequence[LabeledStatePrep],
    thresholds: Sequence[float],
    layers: int,
    config: TrainConfig = TrainConfig(),
    train_share: float = 0.7,
    split_seed: int = 0,
) -> list[ConfusionPoint]:
    """Relabel at every trial threshold, train afresh and record accuracies."""
    if not data or not thresholds:
        raise ValueError("grids must be nonempty")
    tr, te = split(data, train_share, split_seed)
    out = []
    for t in thresholds:
        tr_t, te_t = relabel(tr, t), relabel(te, t)
        model = ClassifierModel.checkerboard(data_circuit, layers, seed=config.seed)
        res = train(model, tr_t, config)
        test_acc = accuracy(res.model, te_t) if te_t else res.train_accuracy
        out.append(ConfusionPoint(float(t), res.train_accuracy, test_acc))
    return out


def dataset_csv(data: Sequence[LabeledStatePrep]) -> str:
    rows = ["grid_value,label,params"]
    for d in data:
        rows.append(f"{d.meta:.12g},{d.label}," + " ".join(f"{x:.17g}" for x in d.prep))
    return "\n".join(rows) + "\n"
