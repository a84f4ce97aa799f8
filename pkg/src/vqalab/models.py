"""Model Hamiltonians, fermion encodings and exact-diagonalization oracles."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .pauli import MAX_DENSE_QUBITS, PauliString, PauliSum, decompose, to_dense
from .simulator import make_rng

Term = tuple[tuple[int, int], ...]  # ((mode, dagger), ...)


def _bonds(n: int, boundary: str, distance: int = 1) -> list[tuple[int, int]]:
    if n < 2:
        raise ValueError("n must be at least 2")
    if boundary not in ("ring", "line"):
        raise ValueError(f"unknown boundary {boundary!r}")
    out = []
    seen = set()
    last = n if boundary == "ring" else n - distance
    for i in range(last):
        j = (i + distance) % n
        if i == j:
            continue
        key = (min(i, j), max(i, j))
        if key in seen:
            continue
        seen.add(key)
        out.append((i, j))
    return out


def build_tfi(n: int, J: float, h: float, boundary: str = "ring") -> PauliSum:
    """``J sum Z_i Z_{i+1} + h sum X_i``; a ring on two sites has one bond."""
    terms: dict[PauliString, float] = {}
    for i, j in _bonds(n, boundary):
        s = PauliString.on(n, {i: "Z", j: "Z"})
        terms[s] = terms.get(s, 0.0) + J
    for i in range(n):
        terms[PauliString.single(n, i, "X")] = h
    return PauliSum(n, terms)


def build_xxz(n: int, j_perp: float, jz: float, boundary: str = "ring") -> PauliSum:
    """``sum J_perp (XX + YY) + Jz ZZ`` over neighbouring pairs."""
    terms: dict[PauliString, float] = {}
    for i, j in _bonds(n, boundary):
        for kind, c in (("X", j_perp), ("Y", j_perp), ("Z", jz)):
            s = PauliString.on(n, {i: kind, j: kind})
            terms[s] = terms.get(s, 0.0) + c
    return PauliSum(n, terms)


def tfi_free_fermion_energy(n: int, J: float, h: float) -> float:
    """Ground energy of the even-n TFI ring from its free-fermion spectrum.

    The ground state lies in the even-parity sector, which carries
    antiperiodic fermion momenta ``k = pi (2m + 1) / n``.
    """
    if n % 2:
        raise ValueError("closed form implemented for even rings")
    k = np.pi * (2 * np.arange(n) + 1) / n
    return float(-np.sum(np.sqrt(J * J + h * h - 2 * abs(J) * abs(h) * np.cos(k))))


# ---------------------------------------------------------------- fermions


def _normal_order_term(ops: Term) -> list[tuple[complex, Term]]:
    """Normal order one product: creators left (descending), then annihilators (descending)."""
    ops = list(ops)
    for i in range(len(ops) - 1):
        (a, da), (b, db) = ops[i], ops[i + 1]
        swap = False
        if da == 0 and db == 1:
            swap = True
        elif da == db:
            if a == b:
                return []
            swap = a < b
        if not swap:
            continue
        swapped = ops[:i] + [ops[i + 1], ops[i]] + ops[i + 2 :]
        out = [(-c, t) for c, t in _normal_order_term(tuple(swapped))]
        if da == 0 and db == 1 and a == b:
            out += _normal_order_term(tuple(ops[:i] + ops[i + 2 :]))
        return out
    return [(1.0, tuple(ops))]


@dataclass(frozen=True)
class FermionOperator:
    """Sum of normal-ordered products of ladder operators."""

    modes: int
    terms: Mapping[Term, complex] = field(default_factory=dict)

    def __post_init__(self):
        acc: dict[Term, complex] = {}
        for ops, c in self.terms.items():
            for m, _ in ops:
                if not 0 <= m < self.modes:
                    raise ValueError(f"mode {m} out of range")
            for sign, t in _normal_order_term(tuple(ops)):
                acc[t] = acc.get(t, 0) + sign * c
        object.__setattr__(self, "terms", {t: c for t, c in acc.items() if abs(c) > 1e-14})

    @classmethod
    def ladder(cls, modes: int, mode: int, dagger: bool) -> "FermionOperator":
        return cls(modes, {((mode, int(dagger)),): 1.0})

    @classmethod
    def number(cls, modes: int, mode: int) -> "FermionOperator":
        return cls(modes, {((mode, 1), (mode, 0)): 1.0})

    def __add__(self, other: "FermionOperator") -> "FermionOperator":
        out = dict(self.terms)
        for t, c in other.terms.items():
            out[t] = out.get(t, 0) + c
        return FermionOperator(max(self.modes, other.modes), out)

    def __mul__(self, other):
        if isinstance(other, FermionOperator):
            out: dict[Term, complex] = {}
            for ta, ca in self.terms.items():
                for tb, cb in other.terms.items():
                    out[ta + tb] = out.get(ta + tb, 0) + ca * cb
            return FermionOperator(max(self.modes, other.modes), out)
        return FermionOperator(self.modes, {t: c * other for t, c in self.terms.items()})

    __rmul__ = __mul__

    def adjoint(self) -> "FermionOperator":
        return FermionOperator(
            self.modes,
            {tuple((m, 1 - d) for m, d in reversed(t)): np.conj(c) for t, c in self.terms.items()},
        )

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        adj = self.adjoint().terms
        keys = set(adj) | set(self.terms)
        return all(abs(self.terms.get(k, 0) - adj.get(k, 0)) < tol for k in keys)

    def to_text(self) -> str:
        lines = []
        for t, c in sorted(self.terms.items()):
            ops = " ".join(("a^ " if d else "a ") + str(m) for m, d in t)
            cc = complex(c)
            coef = f"{cc.real:+}" if cc.imag == 0 else f"{cc:+}"
            lines.append(f"{coef} {ops}".rstrip())
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str, modes: int) -> "FermionOperator":
        terms: dict[Term, complex] = {}
        for line in text.splitlines():
            tok = line.split()
            if not tok:
                continue
            c = complex(tok[0])
            ops = []
            i = 1
            while i < len(tok):
                if tok[i] not in ("a", "a^"):
                    raise ValueError(f"bad token {tok[i]!r}")
                ops.append((int(tok[i + 1]), int(tok[i] == "a^")))
                i += 2
            terms[tuple(ops)] = terms.get(tuple(ops), 0) + c
        return cls(modes, terms)


def build_hubbard_spinless(n: int, t: float, v1: float, v2: float, boundary: str = "line") -> FermionOperator:
    """``-t sum (a_i^ a_j + h.c.) + V1 sum n_i n_{i+1} + V2 sum n_i n_{i+2}``."""
    terms: dict[Term, complex] = {}

    def add(key, c):
        terms[key] = terms.get(key, 0) + c

    for i, j in _bonds(n, boundary):
        add(((i, 1), (j, 0)), -t)
        add(((j, 1), (i, 0)), -t)
    for dist, v in ((1, v1), (2, v2)):
        if v == 0 or n <= dist:
            continue
        for i, j in _bonds(n, boundary, dist):
            add(((i, 1), (i, 0), (j, 1), (j, 0)), v)
    return FermionOperator(n, terms)


def _encode(f: FermionOperator, images) -> PauliSum:
    n = f.modes
    total = PauliSum(n, {})
    cache: dict[tuple[int, int], PauliSum] = {}
    for ops, c in f.terms.items():
        prod = PauliSum.identity(n, c)
        for m, d in ops:
            if (m, d) not in cache:
                cache[(m, d)] = images(m, d)
            prod = prod * cache[(m, d)]
        total = total + prod
    if f.is_hermitian() and not total.is_hermitian:
        raise ValueError("encoding of a Hermitian operator produced complex coefficients")
    return total


def jordan_wigner(f: FermionOperator) -> PauliSum:
    n = f.modes

    def image(m: int, dagger: int) -> PauliSum:
        trail = {q: "Z" for q in range(m)}
        xs = PauliString.on(n, {**trail, m: "X"})
        ys = PauliString.on(n, {**trail, m: "Y"})
        sign = -1 if dagger else 1
        return PauliSum(n, {xs: 0.5, ys: 0.5j * sign})

    return _encode(f, image)


def bk_precedes(a: int, b: int) -> bool:
    """Strict partial order of the binary-prefix rule: a < b in the Fenwick tree."""
    if a >= b:
        return False
    l0 = 1
    while (1 << l0) <= 2 * max(a, b) + 2:
        low = (1 << l0) - 1
        if (b & low) == low and (a >> l0) == (b >> l0):
            return True
        l0 += 1
    return False


def bk_matrix(m: int) -> np.ndarray:
    """Encoding matrix over GF(2): ``x = B n`` with x_j = n_j + sum_{s prec j} n_s."""
    b = np.eye(m, dtype=np.int64)
    for j in range(m):
        for s in range(j):
            if bk_precedes(s, j):
                b[j, s] = 1
    return b


def _gf2_inverse(b: np.ndarray) -> np.ndarray:
    m = b.shape[0]
    a = np.concatenate([b % 2, np.eye(m, dtype=np.int64)], axis=1)
    for col in range(m):
        piv = next(r for r in range(col, m) if a[r, col])
        a[[col, piv]] = a[[piv, col]]
        for r in range(m):
            if r != col and a[r, col]:
                a[r] ^= a[col]
    return a[:, m:]


def bk_sets(m: int) -> dict[str, list[set[int]]]:
    """Parity, update and flip sets for each mode."""
    b = bk_matrix(m)
    inv = _gf2_inverse(b)
    parity, update, flip = [], [], []
    for j in range(m):
        row = inv[:j].sum(axis=0) % 2 if j else np.zeros(m, dtype=np.int64)
        parity.append({int(k) for k in np.nonzero(row)[0]})
        update.append({k for k in range(m) if k != j and b[k, j]})
        flip.append({int(k) for k in np.nonzero(inv[j])[0] if k != j})
    return {"parity": parity, "update": update, "flip": flip}


def bravyi_kitaev(f: FermionOperator) -> PauliSum:
    n = f.modes
    sets = bk_sets(n)

    def image(j: int, dagger: int) -> PauliSum:
        p, u, fl = sets["parity"][j], sets["update"][j], sets["flip"][j]
        base = {q: "Z" for q in p - fl}
        base.update({q: "X" for q in u})
        # Z_{P\F} X_U (X_j Z_F + i Y_j) / 2, adjoint flips the sign of the Y part
        xs = PauliString.on(n, {**base, **{q: "Z" for q in fl}, j: "X"})
        ys = PauliString.on(n, {**base, j: "Y"})
        sign = -1 if dagger else 1
        return PauliSum(n, {xs: 0.5, ys: 0.5j * sign})

    return _encode(f, image)


def number_operator(n: int, encoding: str = "jw") -> PauliSum:
    f = FermionOperator(n, {((i, 1), (i, 0)): 1.0 for i in range(n)})
    return encode(f, encoding)


def encode(f: FermionOperator, encoding: str = "jw") -> PauliSum:
    if encoding == "jw":
        return jordan_wigner(f)
    if encoding == "bk":
        return bravyi_kitaev(f)
    raise ValueError(f"unknown encoding {encoding!r}")


def add_number_penalty(h: PauliSum, m: int, weight: float, encoding: str = "jw") -> PauliSum:
    """``H + M (N - m)**2`` with N the encoded particle number."""
    if weight <= 0:
        raise ValueError("penalty weight must be positive")
    shifted = number_operator(h.n, encoding) - PauliSum.identity(h.n, float(m))
    return h + (shifted * shifted) * weight


# ---------------------------------------------------------------- oracles


@dataclass
class GroundState:
    energy: float
    state: np.ndarray
    degenerate: bool
    degeneracy: int


def exact_ground(h: PauliSum | np.ndarray, tol: float = 1e-8) -> GroundState:
    """Lowest eigenpair of the dense matrix with a degeneracy flag."""
    m = to_dense(h) if isinstance(h, PauliSum) else np.asarray(h)
    if m.shape[0] > 1 << MAX_DENSE_QUBITS:
        raise ValueError("exact_ground limited to 10 qubits")
    w, v = np.linalg.eigh(m)
    deg = int(np.sum(w < w[0] + tol))
    return GroundState(float(w[0]), v[:, 0], deg > 1, deg)


def hamming_sector(n: int, m: int) -> np.ndarray:
    """Basis indices with exactly m ones."""
    idx = np.arange(1 << n)
    weights = np.array([bin(i).count("1") for i in idx])
    return idx[weights == m]


def sector_ground(h: PauliSum, m: int) -> GroundState:
    """Ground state restricted to the Hamming-weight-m sector (JW particle number)."""
    sec = hamming_sector(h.n, m)
    dense = to_dense(h)[np.ix_(sec, sec)]
    w, v = np.linalg.eigh(dense)
    psi = np.zeros(1 << h.n, dtype=complex)
    psi[sec] = v[:, 0]
    deg = int(np.sum(w < w[0] + 1e-8))
    return GroundState(float(w[0]), psi, deg > 1, deg)


def ground_projector_overlap(h: PauliSum, psi: np.ndarray, tol: float = 1e-8) -> float:
    """Weight of psi inside the (possibly degenerate) ground space."""
    w, v = np.linalg.eigh(to_dense(h))
    vecs = v[:, w < w[0] + tol]
    return float(np.sum(np.abs(vecs.conj().T @ psi) ** 2))


def density_correlation(state, m: int) -> float:
    """``<n_0 n_m> - <n_0><n_m>`` with ``n_i = (1 - Z_i) / 2``."""
    psi = getattr(state, "amps", state)
    psi = np.asarray(psi)
    n = psi.shape[0].bit_length() - 1
    if not 0 <= m < n:
        raise ValueError("separation out of range")
    probs = np.abs(psi) ** 2
    idx = np.arange(1 << n)
    occ0 = (idx >> (n - 1)) & 1
    occm = (idx >> (n - 1 - m)) & 1
    return float(probs @ (occ0 * occm) - (probs @ occ0) * (probs @ occm))


def gue_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Hermitian ``(A + A^dag)/2`` scaled to unit diagonal variance."""
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


def build_random_interpolated(n: int, alpha: float, seed: int) -> PauliSum:
    """``decompose((1 - alpha) H1 + alpha H2)`` for two seeded GUE draws."""
    if n > 6:
        raise ValueError("random interpolated family limited to 6 qubits")
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    rng = make_rng(seed)
    h1 = gue_matrix(1 << n, rng)
    h2 = gue_matrix(1 << n, rng)
    return decompose((1 - alpha) * h1 + alpha * h2)


@dataclass
class ModelSpec:
    """Serializable description of one Hamiltonian family member."""

    family: str
    n: int
    couplings: dict = field(default_factory=dict)
    boundary: str = "ring"

    FAMILIES = ("tfi", "xxz", "hubbard", "random")

    def __post_init__(self):
        self.family = self.family.lower()
        if self.family not in self.FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        for k, v in self.couplings.items():
            if not isinstance(v, str) and not np.isfinite(v):
                raise ValueError(f"coupling {k} is not finite")

    def with_value(self, key: str, value: float) -> "ModelSpec":
        return ModelSpec(self.family, self.n, {**self.couplings, key: value}, self.boundary)

    def hamiltonian(self) -> PauliSum:
        c = self.couplings
        if self.family == "tfi":
            return build_tfi(self.n, c.get("J", 1.0), c.get("h", 1.0), self.boundary)
        if self.family == "xxz":
            return build_xxz(self.n, c.get("J_perp", 1.0), c.get("Jz", 1.0), self.boundary)
        if self.family == "hubbard":
            f = build_hubbard_spinless(self.n, c.get("t", 1.0), c.get("V1", 2.0), c.get("V2", 1.0), self.boundary)
            h = encode(f, c.get("encoding", "jw"))
            if c.get("penalty", 0):
                h = add_number_penalty(h, int(c.get("filling", self.n // 2)), c["penalty"], c.get("encoding", "jw"))
            return h
        return build_random_interpolated(self.n, c.get("alpha", 0.0), int(c.get("seed", 0)))


def product_state_tfi_energy(n: int, J: float, h: float, thetas: Iterable[float]) -> float:
    """TFI ring energy of a product of real single-qubit states ``cos(t/2)|0> + sin(t/2)|1>``."""
    t = np.asarray(list(thetas))
    zs, xs = np.cos(t), np.sin(t)
    e = h * xs.sum()
    for i, j in _bonds(n, "ring"):
        e += J * zs[i] * zs[j]
    return float(e)
