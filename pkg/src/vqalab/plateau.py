"""Gradient-variance analysis: Haar moments, mixers, lower bounds, design distances."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ansatz import AnsatzLayout, block_kind, causal_cone
from .pauli import PauliString, PauliSum, to_dense
from .simulator import make_rng

# ---------------------------------------------------------------- Haar moments


def haar_moment_t1(a: np.ndarray) -> np.ndarray:
    """``E[U^dag A U] = Tr(A)/d * 1``."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    d = a.shape[0]
    return np.trace(a) / d * np.eye(d)


def swap_operator(d: int) -> np.ndarray:
    s = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            s[i * d + j, j * d + i] = 1
    return s


def haar_twirl_t2(t: np.ndarray) -> np.ndarray:
    """``E[(U^dag)^{x2} T U^{x2}]`` for any operator T on the doubled space."""
    t = np.asarray(t)
    d = int(round(np.sqrt(t.shape[0])))
    if d * d != t.shape[0] or d < 2:
        raise ValueError("operator must live on a doubled space of dimension d >= 2")
    s = swap_operator(d)
    tr, trs = np.trace(t), np.trace(t @ s)
    return ((tr - trs / d) * np.eye(d * d) + (trs - tr / d) * s) / (d * d - 1)


def haar_moment_t2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``E[(U^dag x U^dag)(A x B)(U x U)]`` in closed form."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("A and B must have equal dimensions")
    d = a.shape[0]
    if d < 2:
        raise ValueError("dimension must be at least 2")
    ta, tb, tab = np.trace(a), np.trace(b), np.trace(a @ b)
    return ((ta * tb - tab / d) * np.eye(d * d) + (tab - ta * tb / d) * swap_operator(d)) / (d * d - 1)


def haar_random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """QR of a complex Gaussian matrix with the R-diagonal phases removed."""
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def haar_unitaries(d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(count, d, d)) + 1j * rng.normal(size=(count, d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=1, axis2=2)
    return q * (diag / np.abs(diag))[:, None, :]


def haar_moment_operator(d: int, t: int) -> np.ndarray:
    """Exact ``E_Haar[U^{(x)t} (x) conj(U)^{(x)t}]`` built from the closed forms.

    Uses ``E[U_br conj(U_ap)] = T1(E_ab)[p, r]`` and the analogous t = 2
    identity with matrix units ``E_ab``.
    """
    if t == 1:
        m = np.zeros((d * d, d * d), dtype=complex)
        for a in range(d):
            for b in range(d):
                e = np.zeros((d, d))
                e[a, b] = 1
                tw = haar_moment_t1(e)
                for p in range(d):
                    for r in range(d):
                        m[b * d + a, r * d + p] = tw[p, r]
        return m
    if t == 2:
        m = np.zeros((d,) * 8, dtype=complex)
        units = []
        for a in range(d):
            for b in range(d):
                e = np.zeros((d, d))
                e[a, b] = 1
                units.append((a, b, e))
        for a, b, ea in units:
            for c, e, ec in units:
                tw = haar_moment_t2(ea, ec).reshape(d, d, d, d)  # [p, q, r, s]
                m[b, e, a, c] = tw.transpose(2, 3, 0, 1)
        return m.reshape(d**4, d**4)
    raise ValueError("only t in {1, 2} supported")


def empirical_moment_operator(us: np.ndarray, t: int, batch: int = 4096) -> np.ndarray:
    """Sample mean of ``U^{(x)t} (x) conj(U)^{(x)t}``."""
    count, d, _ = us.shape
    if t == 1:
        flat = us.reshape(count, d * d)
        m = np.einsum("bi,bj->ij", flat, flat.conj()) / count
        return m.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    if t != 2:
        raise ValueError("only t in {1, 2} supported")
    acc = np.zeros((d**4, d**4), dtype=complex)
    for start in range(0, count, batch):
        u = us[start : start + batch]
        uu = np.einsum("bij,bkl->bikjl", u, u).reshape(len(u), d**4)
        acc += uu.T @ uu.conj()
    m = acc / count
    # rows (i k)(j l) x (i' k')(j' l') -> (i k i' k') x (j l j' l')
    return m.reshape((d,) * 8).transpose(0, 1, 4, 5, 2, 3, 6, 7).reshape(d**4, d**4)


# ---------------------------------------------------------------- design distance


def block_unitaries(kind: str, params: np.ndarray) -> np.ndarray:
    """Batch of two-qubit block matrices, one per parameter row."""
    k = block_kind(kind)
    gates = k.gates(2, (0, 1), tuple(range(k.param_count)))
    count = params.shape[0]
    out = np.broadcast_to(np.eye(4, dtype=complex), (count, 4, 4)).copy()
    for g in gates:
        if g.kind == "fixed":
            mats = np.broadcast_to(_embed(g.local_matrix(), g.qubits), (count, 4, 4))
        elif g.kind == "rot":
            p = to_dense(PauliSum(2, {g.generator: 1.0}))
            t = params[:, g.slots[0]][:, None, None]
            mats = np.cos(t / 2) * np.eye(4) - 1j * np.sin(t / 2) * p
        else:
            mats = np.array([_embed(g.fn(row[list(g.slots)]), g.qubits) for row in params])
        out = mats @ out
    return out


def _embed(m: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    if len(qubits) == 2:
        if tuple(qubits) == (0, 1):
            return m
        swap = swap_operator(2)
        return swap @ m @ swap
    return np.kron(m, np.eye(2)) if qubits[0] == 0 else np.kron(np.eye(2), m)


TPE_FAMILIES = ("Haar", "XZZZ", "UniversalCNOT", "YRotCZ", "ParticleConserving", "Cartan")


@dataclass
class TpeEstimate:
    family: str
    t: int
    samples: int
    lam1: float
    lam2: float
    lam_inf: float
    se1: float = 0.0
    se2: float = 0.0
    se_inf: float = 0.0


def _norms(d: np.ndarray) -> tuple[float, float, float]:
    return (float(np.linalg.norm(d, 1)), float(np.linalg.norm(d, 2)), float(np.linalg.norm(d, np.inf)))


def tpe_distance(family: str, t: int = 2, samples: int = 100_000, seed: int = 0, batches: int = 10) -> TpeEstimate:
    """Induced 1-, 2- (spectral) and inf-norm distance of the family moment operator from Haar.

    Standard-error proxies come from the spread of the norms over ``batches``
    disjoint sub-samples, scaled by ``sqrt(1 / batches)``.
    """
    if family not in TPE_FAMILIES:
        raise ValueError(f"unsupported family {family!r}")
    if t not in (1, 2):
        raise ValueError("t must be 1 or 2")
    rng = make_rng(seed)
    if family == "Haar":
        us = haar_unitaries(4, samples, rng)
    else:
        k = block_kind(family)
        us = block_unitaries(family, rng.uniform(-np.pi, np.pi, size=(samples, k.param_count)))
    exact = haar_moment_operator(4, t)
    lam = _norms(empirical_moment_operator(us, t) - exact)
    per = []
    size = samples // batches
    if batches > 1 and size > 0:
        for b in range(batches):
            per.append(_norms(empirical_moment_operator(us[b * size : (b + 1) * size], t) - exact))
    se = np.std(per, axis=0, ddof=1) / np.sqrt(batches) if per else np.zeros(3)
    return TpeEstimate(family, t, samples, lam[0], lam[1], lam[2], float(se[0]), float(se[1]), float(se[2]))


# ---------------------------------------------------------------- super Pauli ensembles

Key = tuple[int, int]


@dataclass
class SuperPauliEnsemble:
    """``sum_h w_h h (x) h`` with phase-free strings keyed by ``(x, z)`` masks."""

    n: int
    entries: dict[Key, float] = field(default_factory=dict)

    @classmethod
    def from_sum(cls, h: PauliSum) -> "SuperPauliEnsemble":
        return cls(h.n, {(s.x, s.z): float(abs(c) ** 2) for s, c in h.terms.items()})

    @classmethod
    def single(cls, s: PauliString, weight: float = 1.0) -> "SuperPauliEnsemble":
        return cls(s.n, {(s.x, s.z): weight})

    def strings(self) -> dict[PauliString, float]:
        return {PauliString(self.n, x, z): w for (x, z), w in self.entries.items()}

    @property
    def total_weight(self) -> float:
        return float(sum(self.entries.values()))

    def __len__(self) -> int:
        return len(self.entries)


def _support_mask(support: Sequence[int]) -> int:
    m = 0
    for q in support:
        m |= 1 << q
    return m


def _local_patterns(support: Sequence[int]) -> list[Key]:
    """All nontrivial (x, z) masks supported inside ``support``."""
    out = []
    qs = list(support)
    for code in range(1, 4 ** len(qs)):
        x = z = 0
        for j, q in enumerate(qs):
            d = code >> (2 * j) & 3
            x |= (d & 1) << q
            z |= (d >> 1) << q
        out.append((x, z))
    return out


def mixer_apply(e: SuperPauliEnsemble, support: Sequence[int]) -> SuperPauliEnsemble:
    """Local 2-design twirl on ``support``: nontrivial restrictions spread uniformly."""
    if not support or any(not 0 <= q < e.n for q in support):
        raise ValueError("mixer support out of range")
    mask = _support_mask(support)
    patterns = _local_patterns(support)
    share = 1.0 / len(patterns)
    out: dict[Key, float] = {}
    for (x, z), w in e.entries.items():
        if not (x | z) & mask:
            out[(x, z)] = out.get((x, z), 0.0) + w
            continue
        bx, bz = x & ~mask, z & ~mask
        for px, pz in patterns:
            key = (bx | px, bz | pz)
            out[key] = out.get(key, 0.0) + w * share
    return SuperPauliEnsemble(e.n, out)


def commutator_superop(e: SuperPauliEnsemble, f: PauliString) -> SuperPauliEnsemble:
    """``[iF, .]^{(x)2}``: commuting strings vanish, anticommuting ones map to ``4 (F s)^{(x)2}``."""
    if f.is_identity:
        raise ValueError("F must be nontrivial")
    out: dict[Key, float] = {}
    for (x, z), w in e.entries.items():
        if ((x & f.z).bit_count() + (z & f.x).bit_count()) % 2 == 0:
            continue
        key = (x ^ f.x, z ^ f.z)
        out[key] = out.get(key, 0.0) + 4 * w
    return SuperPauliEnsemble(e.n, out)


def zero_ket_average(e: SuperPauliEnsemble) -> float:
    """``<00| . |00>``: only strings made of 1 and Z survive."""
    return float(sum(w for (x, _), w in e.entries.items() if x == 0))


def pipeline_variance(layout: AnsatzLayout, h: PauliSum, block_id: int, generator: PauliString) -> float:
    """Variance of the derivative for ``exp(-i t F)`` inside block ``block_id``.

    Every block is replaced by its mixer; the differentiated block is split as
    mixer, commutator, mixer.  Strings contribute independently.
    """
    blocks = layout.blocks
    target = layout.block(block_id)
    if not set(generator.support) <= set(target.qubits):
        raise ValueError("generator must act inside the differentiated block")
    e = SuperPauliEnsemble.from_sum(PauliSum(h.n, {s: c for s, c in h.terms.items() if not s.is_identity}))
    for b in reversed(blocks):
        if b.block_id == block_id:
            e = mixer_apply(e, b.qubits)
            e = commutator_superop(e, generator)
        e = mixer_apply(e, b.qubits)
    return zero_ket_average(e)


def variance_lower_bound(layout: AnsatzLayout, h: PauliSum, block_id: int, generator_scale: float = 1.0) -> float:
    """Lower bound on the derivative variance for a parameter of block ``block_id``.

    Written for gates ``exp(-i t F)``; for ``exp(-i s t F)`` pass
    ``generator_scale = s`` (the bound scales by ``s**2``).
    """
    block = layout.block(block_id)
    size = len(block.qubits)
    prefactor = 2 * 4**size / (4**size - 1)
    depth_factor = 0.75 ** (layout.num_layers - 1 - block.layer)
    total = 0.0
    for s, c in h.terms.items():
        if s.is_identity:
            continue
        cone, width = causal_cone(layout, s)
        if block_id in cone:
            total += abs(c) ** 2 * 3.0 ** (-width)
    return generator_scale**2 * prefactor * depth_factor * total


# ---------------------------------------------------------------- empirical variances


@dataclass
class VarianceEstimate:
    variance: np.ndarray
    se: np.ndarray
    mean: np.ndarray
    bootstrap_se: np.ndarray | None
    samples: int


def gradient_samples(problem, samples: int, seed: int, method: str = "adjoint") -> np.ndarray:
    """Gradient vectors at ``samples`` parameter points drawn uniformly from [-pi, pi)."""
    rng = make_rng(seed)
    out = np.zeros((samples, problem.num_params))
    for i in range(samples):
        theta = rng.uniform(-np.pi, np.pi, problem.num_params)
        out[i] = problem.gradient(theta, method)
    return out


def variance_from_samples(grads: np.ndarray, bootstrap: int = 200, seed: int = 0) -> VarianceEstimate:
    """Per-column sample variance with the normal-theory SE and a bootstrap SE."""
    count = grads.shape[0]
    if count < 2:
        raise ValueError("need at least two samples")
    var = grads.var(axis=0, ddof=1)
    se = var * np.sqrt(2.0 / (count - 1))
    boot = None
    if bootstrap:
        rng = make_rng(seed)
        reps = np.empty((bootstrap, grads.shape[1]))
        for b in range(bootstrap):
            idx = rng.integers(0, count, count)
            reps[b] = grads[idx].var(axis=0, ddof=1)
        boot = reps.std(axis=0, ddof=1)
    return VarianceEstimate(var, se, grads.mean(axis=0), boot, count)


def empirical_variance(problem, slot: int, samples: int, seed: int) -> tuple[float, float]:
    """Variance of the parameter-shift derivative for one slot and its normal-theory SE."""
    if samples < 2:
        raise ValueError("need at least two samples")
    rng = make_rng(seed)
    vals = np.empty(samples)
    for i in range(samples):
        theta = rng.uniform(-np.pi, np.pi, problem.num_params)
        vals[i] = problem.grad_param_shift(theta, [slot])[0]
    var = float(vals.var(ddof=1))
    return var, var * float(np.sqrt(2.0 / (samples - 1)))


def empirical_variances(problem, samples: int, seed: int, method: str = "adjoint", bootstrap: int = 200) -> VarianceEstimate:
    """All per-slot variances from one set of parameter draws."""
    return variance_from_samples(gradient_samples(problem, samples, seed, method), bootstrap, seed + 1)


def block_average(layout: AnsatzLayout, values: np.ndarray) -> dict[int, float]:
    return {b.block_id: float(np.mean(values[list(b.slots)])) for b in layout.blocks}


def block_average_se(layout: AnsatzLayout, se: np.ndarray) -> dict[int, float]:
    """SE of a block mean, treating slot SEs as fully correlated (conservative)."""
    return {b.block_id: float(np.mean(se[list(b.slots)])) for b in layout.blocks}


# ---------------------------------------------------------------- global 2-design chain


def haar_chain_variance(h: PauliSum, f: PauliString) -> float:
    """Dense evaluation of the derivative variance when U_A and U_B are Haar on all qubits.

    Gate convention ``exp(-i t F)``; uses the exact t = 2 twirl twice.
    """
    hd = to_dense(h)
    d = hd.shape[0]
    fd = to_dense(PauliSum(f.n, {f: 1.0}))
    t = haar_twirl_t2(np.kron(hd, hd))
    eye = np.eye(d)
    f1, f2 = np.kron(fd, eye), np.kron(eye, fd)
    # apply [iF, .] on each copy
    t = 1j * (f1 @ t - t @ f1)
    t = 1j * (f2 @ t - t @ f2)
    t = haar_twirl_t2(t)
    zero = np.zeros(d * d)
    zero[0] = 1
    return float(np.real(zero @ t @ zero))


def haar_circuit_gradients(h: PauliSum, f: PauliString, samples: int, seed: int) -> np.ndarray:
    """Derivatives of ``<0|U_B^dag e^{itF} U_A^dag H U_A e^{-itF} U_B|0>`` at Haar U_A, U_B and uniform t."""
    hd = to_dense(h)
    d = hd.shape[0]
    fd = to_dense(PauliSum(f.n, {f: 1.0}))
    rng = make_rng(seed)
    out = np.empty(samples)
    for i in range(samples):
        ua = haar_random_unitary(d, rng)
        ub = haar_random_unitary(d, rng)
        t = rng.uniform(-np.pi, np.pi)
        rot = np.cos(t) * np.eye(d) - 1j * np.sin(t) * fd
        psi = rot @ ub[:, 0]
        ht = ua.conj().T @ hd @ ua
        k = 1j * (fd @ ht - ht @ fd)
        out[i] = float(np.real(np.vdot(psi, k @ psi)))
    return out
