"""Parametrized two-qubit blocks, circuit layouts and causal cones.

Rotations follow ``R_P(t) = exp(-i t P / 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .pauli import PauliString
from .simulator import Circuit, Gate


def particle_conserving_matrix(t1: float, t2: float) -> np.ndarray:
    """Two-parameter gate acting within the Hamming-weight sectors."""
    c, s = np.cos(t1), np.sin(t1)
    return np.array(
        [
            [1, 0, 0, 0],
            [0, c, np.exp(1j * t2) * s, 0],
            [0, np.exp(-1j * t2) * s, -c, 0],
            [0, 0, 0, 1],
        ],
        dtype=complex,
    )


def _pc_derivatives(p: np.ndarray) -> list[np.ndarray]:
    t1, t2 = p
    c, s = np.cos(t1), np.sin(t1)
    e, ec = np.exp(1j * t2), np.exp(-1j * t2)
    d1 = np.zeros((4, 4), dtype=complex)
    d1[1, 1], d1[1, 2], d1[2, 1], d1[2, 2] = -s, e * c, ec * c, s
    d2 = np.zeros((4, 4), dtype=complex)
    d2[1, 2], d2[2, 1] = 1j * e * s, -1j * ec * s
    return [d1, d2]


def _rot(n: int, ops: dict[int, str], slot: int) -> Gate:
    return Gate.rotation(PauliString.on(n, ops), slot)


def _universal(n: int, q: int, slots: Sequence[int], axes: str) -> list[Gate]:
    # applied right to left as a product R_a R_b R_a
    a, b = axes
    return [_rot(n, {q: a}, slots[0]), _rot(n, {q: b}, slots[1]), _rot(n, {q: a}, slots[2])]


@dataclass(frozen=True)
class BlockKind:
    name: str
    param_count: int
    arity: int = 2

    def gates(self, n: int, qubits: Sequence[int], slots: Sequence[int]) -> list[Gate]:
        if len(slots) != self.param_count:
            raise ValueError(f"{self.name} needs {self.param_count} slots")
        if len(qubits) != self.arity:
            raise ValueError(f"{self.name} acts on {self.arity} qubits")
        return _EXPANSIONS[self.name](n, tuple(qubits), tuple(slots))


def _entangler(n, q, s):
    a, b = q
    return [
        _rot(n, {a: "X"}, s[0]),
        _rot(n, {b: "X"}, s[1]),
        _rot(n, {a: "Z", b: "Z"}, s[2]),
        _rot(n, {b: "Z"}, s[3]),
        _rot(n, {a: "Z"}, s[4]),
    ]


def _particle_conserving(n, q, s):
    fn = lambda p: particle_conserving_matrix(p[0], p[1])
    return [Gate.parametrized(fn, _pc_derivatives, q, s, "PC")]


def _yrot_cz(n, q, s):
    a, b = q
    return [
        _rot(n, {a: "Y"}, s[0]),
        _rot(n, {b: "Y"}, s[1]),
        Gate.fixed("CZ", a, b),
        _rot(n, {a: "Y"}, s[2]),
        _rot(n, {b: "Y"}, s[3]),
    ]


def _cartan(n, q, s):
    a, b = q
    return (
        _universal(n, a, s[0:3], "ZY")
        + _universal(n, b, s[3:6], "ZY")
        + [
            _rot(n, {a: "X", b: "X"}, s[6]),
            _rot(n, {a: "Y", b: "Y"}, s[7]),
            _rot(n, {a: "Z", b: "Z"}, s[8]),
        ]
        + _universal(n, a, s[9:12], "ZY")
        + _universal(n, b, s[12:15], "ZY")
    )


def _universal_cnot(n, q, s):
    a, b = q
    return (
        _universal(n, a, s[0:3], "ZX")
        + _universal(n, b, s[3:6], "ZX")
        + [Gate.fixed("CNOT", a, b)]
        + _universal(n, a, s[6:9], "ZX")
        + _universal(n, b, s[9:12], "ZX")
    )


def _rank1(n, q, s):
    (a,) = q
    return [_rot(n, {a: "Y"}, s[0]), _rot(n, {a: "Z"}, s[1])]


_EXPANSIONS = {
    "Entangler": _entangler,
    "XZZZ": _entangler,
    "ParticleConserving": _particle_conserving,
    "YRotCZ": _yrot_cz,
    "Cartan": _cartan,
    "UniversalCNOT": _universal_cnot,
    "Rank1": _rank1,
}

BLOCK_KINDS = {
    "Entangler": BlockKind("Entangler", 5),
    "XZZZ": BlockKind("XZZZ", 5),
    "ParticleConserving": BlockKind("ParticleConserving", 2),
    "YRotCZ": BlockKind("YRotCZ", 4),
    "Cartan": BlockKind("Cartan", 15),
    "UniversalCNOT": BlockKind("UniversalCNOT", 12),
    "Rank1": BlockKind("Rank1", 2, arity=1),
}


def block_kind(name: str | BlockKind) -> BlockKind:
    if isinstance(name, BlockKind):
        return name
    try:
        return BLOCK_KINDS[name]
    except KeyError:
        raise ValueError(f"unknown block kind {name!r}") from None


def block_unitary(kind: str | BlockKind, params) -> np.ndarray:
    """Dense matrix of one block on qubits (0, 1) (or 0 for one-qubit kinds)."""
    k = block_kind(kind)
    c = Circuit(k.arity)
    c.extend(k.gates(k.arity, tuple(range(k.arity)), tuple(range(k.param_count))))
    return c.unitary(np.asarray(params, dtype=float))


def entangler_block(*thetas: float) -> np.ndarray:
    if len(thetas) != 5:
        raise ValueError("entangler block takes 5 parameters")
    return block_unitary("Entangler", thetas)


def particle_conserving_block(t1: float, t2: float) -> np.ndarray:
    return particle_conserving_matrix(t1, t2)


@dataclass(frozen=True)
class Block:
    block_id: int
    qubits: tuple[int, ...]
    layer: int
    kind: str
    slots: tuple[int, ...]


@dataclass
class AnsatzLayout:
    n: int
    blocks: list[Block] = field(default_factory=list)
    topology: str = "ring"

    def __post_init__(self):
        layers = [b.layer for b in self.blocks]
        if layers != sorted(layers):
            raise ValueError("layer indices must be nondecreasing")
        slots = [s for b in self.blocks for s in b.slots]
        if len(slots) != len(set(slots)):
            raise ValueError("parameter slots must be unique")
        for b in self.blocks:
            if any(not 0 <= q < self.n for q in b.qubits):
                raise ValueError("block support out of range")

    @property
    def num_params(self) -> int:
        return sum(len(b.slots) for b in self.blocks)

    @property
    def num_layers(self) -> int:
        return max((b.layer for b in self.blocks), default=-1) + 1

    def block(self, block_id: int) -> Block:
        for b in self.blocks:
            if b.block_id == block_id:
                return b
        raise KeyError(f"no block {block_id}")

    def circuit(self) -> Circuit:
        c = Circuit(self.n)
        for b in self.blocks:
            c.extend(block_kind(b.kind).gates(self.n, b.qubits, b.slots))
        c.num_params = self.num_params
        return c

    def dump(self) -> str:
        lines = ["block_id\tlayer\tsupport\tkind\tslots"]
        for b in self.blocks:
            lines.append(
                f"{b.block_id}\t{b.layer}\t{','.join(map(str, b.qubits))}\t{b.kind}\t"
                f"{','.join(map(str, b.slots))}"
            )
        return "\n".join(lines) + "\n"


def _layout_from_pairs(n: int, layers: list[list[tuple[int, ...]]], kind: str, topology: str) -> tuple[AnsatzLayout, Circuit]:
    k = block_kind(kind)
    blocks = []
    slot = 0
    for layer, pairs in enumerate(layers):
        for pair in pairs:
            blocks.append(Block(len(blocks) + 1, tuple(pair), layer, k.name, tuple(range(slot, slot + k.param_count))))
            slot += k.param_count
    layout = AnsatzLayout(n, blocks, topology)
    return layout, layout.circuit()


def checkerboard_pairs(n: int, layer: int, boundary: str) -> list[tuple[int, int]]:
    """Pairs of one brickwork sublayer; even layers start at qubit 0, odd at 1."""
    if boundary == "ring" and n > 2:
        if n % 2:
            raise ValueError("ring brickwork needs an even qubit count")
        start = layer % n
        return [((start + 2 * i) % n, (start + 2 * i + 1) % n) for i in range(n // 2)]
    if boundary not in ("ring", "line"):
        raise ValueError(f"unknown boundary {boundary!r}")
    return [(j, j + 1) for j in range(layer % 2, n - 1, 2)]


def build_checkerboard(n: int, layers: int, kind: str = "Entangler", boundary: str = "ring") -> tuple[AnsatzLayout, Circuit]:
    """Brickwork of two-qubit blocks, alternating (2i, 2i+1) and (2i-1, 2i) pairs.

    On a ring, sublayer ``l`` lists its pairs starting from qubit ``l mod n``.
    """
    if n < 2 or layers < 1:
        raise ValueError("need n >= 2 and layers >= 1")
    return _layout_from_pairs(n, [checkerboard_pairs(n, l, boundary) for l in range(layers)], kind, boundary)


def build_rank1(n: int) -> tuple[AnsatzLayout, Circuit]:
    """R_Y then R_Z on every qubit; prepares product states only."""
    return _layout_from_pairs(n, [[(q,) for q in range(n)]], "Rank1", "line")


def build_tree(n: int, kind: str = "Entangler") -> tuple[AnsatzLayout, Circuit]:
    """Binary tree: the root block joins the two middle qubits, leaves join neighbours.

    Level ``k`` acts on the two central qubits of every aligned group of
    ``2**k`` qubits; the circuit applies the root level first.
    """
    if n < 2 or n & (n - 1):
        raise ValueError("tree ansatz requires n to be a power of two")
    depth = n.bit_length() - 1
    layers = []
    for k in range(depth, 0, -1):
        size = 1 << k
        half = size // 2
        layers.append([(g + half - 1, g + half) for g in range(0, n, size)])
    return _layout_from_pairs(n, layers, kind, "tree")


_LATTICE_BASE = [((0, 0), (0, 1)), ((1, 0), (1, 1)), ((2, 0), (2, 1)), ((0, 2), (1, 2))]


def build_lattice2d(rows: int = 3, cols: int = 3, layers: int = 4, kind: str = "Entangler") -> tuple[AnsatzLayout, Circuit]:
    """3x3 lattice; layer l uses the base pairing rotated by 90 degrees l times.

    The base pairing holds three horizontal dominoes in the left two columns
    and one vertical domino in the right column.
    """
    if (rows, cols) != (3, 3):
        raise ValueError("only the 3x3 lattice is supported")

    def rot(site, times):
        r, c = site
        for _ in range(times % 4):
            r, c = c, 2 - r
        return r, c

    out = []
    for l in range(layers):
        pairs = []
        for a, b in _LATTICE_BASE:
            ra, rb = rot(a, l), rot(b, l)
            qa, qb = 3 * ra[0] + ra[1], 3 * rb[0] + rb[1]
            pairs.append((min(qa, qb), max(qa, qb)))
        out.append(sorted(pairs))
    return _layout_from_pairs(9, out, kind, "lattice2d")


def causal_cone(layout: AnsatzLayout, h: PauliString) -> tuple[set[int], int]:
    """Blocks that can act nontrivially on ``U^dag h U`` and the final support size."""
    if h.n != layout.n:
        raise ValueError("size mismatch")
    support = set(h.support)
    if not support:
        return set(), 0
    cone = set()
    for b in reversed(layout.blocks):
        if support.intersection(b.qubits):
            cone.add(b.block_id)
            support.update(b.qubits)
    return cone, len(support)
