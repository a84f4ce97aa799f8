import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vqalab.ansatz import BLOCK_KINDS, AnsatzLayout, Block, build_checkerboard
from vqalab.models import build_tfi
from vqalab.pauli import PauliString, PauliSum
from vqalab.plateau import (
    SuperPauliEnsemble,
    block_average,
    block_unitaries,
    commutator_superop,
    empirical_moment_operator,
    empirical_variance,
    empirical_variances,
    gradient_samples,
    haar_chain_variance,
    haar_circuit_gradients,
    haar_moment_operator,
    haar_moment_t1,
    haar_moment_t2,
    haar_twirl_t2,
    haar_unitaries,
    mixer_apply,
    pipeline_variance,
    tpe_distance,
    variance_from_samples,
    variance_lower_bound,
    zero_ket_average,
)
from vqalab.simulator import make_rng
from vqalab.vqe import VqeProblem

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)


def key(label):
    s = PauliString.from_label(label)
    return (s.x, s.z)


def test_t1_closed_form_examples():
    np.testing.assert_allclose(haar_moment_t1(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(haar_moment_t1(X), 0)


def test_t2_closed_form_examples():
    np.testing.assert_allclose(haar_moment_t2(np.eye(2), np.eye(2)), np.eye(4), atol=1e-12)
    expected = (np.kron(X, X) + np.kron(Y, Y) + np.kron(Z, Z)) / 3
    np.testing.assert_allclose(haar_moment_t2(Z, Z), expected, atol=1e-12)
    with pytest.raises(ValueError):
        haar_moment_t2(np.eye(1), np.eye(1))


@pytest.mark.parametrize("d", [2, 4])
def test_haar_moments_monte_carlo(d):
    n = 20_000
    rng = make_rng(d)
    us = haar_unitaries(d, n, rng)
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    a = a + a.conj().T
    b = np.diag(rng.normal(size=d))
    mc1 = np.einsum("bji,jk,bkl->il", us.conj(), a, us) / n
    assert np.max(np.abs(mc1 - haar_moment_t1(a))) <= 5 * np.linalg.norm(a, 2) / np.sqrt(n)
    uu = np.einsum("bij,bkl->bikjl", us, us).reshape(n, d * d, d * d)
    mc2 = np.einsum("bji,jk,bkl->il", uu.conj(), np.kron(a, b), uu) / n
    scale = np.linalg.norm(a, 2) * np.linalg.norm(b, 2)
    assert np.max(np.abs(mc2 - haar_moment_t2(a, b))) <= 5 * scale / np.sqrt(n)


@pytest.mark.parametrize("t", [1, 2])
def test_moment_operator_is_projector(t):
    m = haar_moment_operator(2, t)
    np.testing.assert_allclose(m @ m, m, atol=1e-12)
    np.testing.assert_allclose(m, m.conj().T, atol=1e-12)
    # rank equals the number of permutations of t objects for d >= t
    assert round(np.trace(m).real) == {1: 1, 2: 2}[t]


def test_empirical_moment_of_haar_converges():
    us = haar_unitaries(2, 20_000, make_rng(1))
    for t in (1, 2):
        assert np.max(np.abs(empirical_moment_operator(us, t) - haar_moment_operator(2, t))) < 0.05


def test_two_qubit_mixer_spreads_uniformly():
    e = mixer_apply(SuperPauliEnsemble.single(PauliString.from_label("XX")), [0, 1])
    assert len(e) == 15 and all(w == pytest.approx(1 / 15) for w in e.entries.values())
    assert zero_ket_average(e) == pytest.approx(1 / 5)


def test_mixer_passes_trivial_restriction():
    e = SuperPauliEnsemble.single(PauliString.from_label("XII"))
    assert mixer_apply(e, [2]).entries == e.entries
    with pytest.raises(ValueError):
        mixer_apply(e, [3])


@settings(max_examples=40)
@given(st.dictionaries(st.tuples(st.integers(0, 7), st.integers(0, 7)), st.floats(0, 5), max_size=6),
       st.sampled_from([[0], [1, 2], [0, 2], [0, 1, 2]]))
def test_mixer_conserves_weight(entries, support):
    e = SuperPauliEnsemble(3, entries)
    assert mixer_apply(e, support).total_weight == pytest.approx(e.total_weight)


@pytest.mark.parametrize("label", ["XI", "ZZ", "YX", "IZ"])
def test_full_support_mixer_matches_dense_twirl(label):
    s = PauliString.from_label(label)
    dense = haar_twirl_t2(np.kron(s.to_dense(), s.to_dense()))
    e = mixer_apply(SuperPauliEnsemble.single(s), [0, 1])
    expected = sum(w * np.kron(p.to_dense(), p.to_dense()) for p, w in e.strings().items())
    np.testing.assert_allclose(dense, expected, atol=1e-12)


@pytest.mark.parametrize("a,b", [("XI", "ZI"), ("XZ", "YY"), ("IX", "XX")])
def test_off_diagonal_pairs_annihilate(a, b):
    sa, sb = PauliString.from_label(a).to_dense(), PauliString.from_label(b).to_dense()
    np.testing.assert_allclose(haar_twirl_t2(np.kron(sa, sb)), 0, atol=1e-12)


def test_commutator_examples():
    z = PauliString.from_label("Z")
    out = commutator_superop(SuperPauliEnsemble.single(z), PauliString.from_label("X"))
    assert out.entries == {key("Y"): 4.0}
    ident = SuperPauliEnsemble.single(PauliString(1))
    assert commutator_superop(ident, PauliString.from_label("X")).entries == {}
    with pytest.raises(ValueError):
        commutator_superop(ident, PauliString(1))


def test_mixer_commutator_mixer_composite():
    uniform = mixer_apply(SuperPauliEnsemble.single(PauliString.from_label("X")), [0])
    after = commutator_superop(uniform, PauliString.from_label("Z"))
    assert after.entries == pytest.approx({key("X"): 4 / 3, key("Y"): 4 / 3})
    assert mixer_apply(after, [0]).total_weight == pytest.approx(8 / 3)


def test_zero_ket_average_examples():
    assert zero_ket_average(SuperPauliEnsemble(2, {key("ZZ"): 0.7})) == pytest.approx(0.7)
    assert zero_ket_average(SuperPauliEnsemble(2, {key("ZX"): 0.7})) == 0.0


def test_bound_single_block_example():
    layout, _ = build_checkerboard(2, 1, "Cartan", "line")
    h = PauliSum.from_pairs(2, [(1.0, "ZI")])
    assert variance_lower_bound(layout, h, 1) == pytest.approx(32 / 15 / 9)
    assert variance_lower_bound(layout, h, 1, generator_scale=0.5) == pytest.approx(32 / 15 / 9 / 4)


def test_bound_zero_outside_cone():
    layout, _ = build_checkerboard(6, 1, "Cartan", "line")
    h = PauliSum.from_pairs(6, [(1.0, "ZIIIII")])
    assert variance_lower_bound(layout, h, 3) == 0.0


def _full_layout(n):
    return AnsatzLayout(n, [Block(1, tuple(range(n)), 0, "Cartan", (0,))], "line")


@pytest.mark.parametrize("n", [2, 3])
def test_full_mixer_pipeline_matches_dense_chain(n):
    h = build_tfi(n, 1.0, 0.8, "line")
    f = PauliString.single(n, 0, "Y")
    assert pipeline_variance(_full_layout(n), h, 1, f) == pytest.approx(haar_chain_variance(h, f), rel=1e-10)


def test_dense_chain_matches_haar_sampling():
    n = 2
    h = build_tfi(n, 1.0, 0.8, "line")
    f = PauliString.single(n, 1, "X")
    grads = haar_circuit_gradients(h, f, 4000, 3)
    est = variance_from_samples(grads[:, None], bootstrap=200)
    var, se = est.variance[0], max(est.se[0], est.bootstrap_se[0])
    assert abs(var - haar_chain_variance(h, f)) <= 3 * se
    assert abs(grads.mean()) <= 3 * np.sqrt(var / len(grads))


def test_variance_from_samples():
    rng = make_rng(0)
    g = rng.normal(scale=[1.0, 2.0], size=(5000, 2))
    est = variance_from_samples(g, bootstrap=50)
    np.testing.assert_allclose(est.variance, [1.0, 4.0], rtol=0.06)
    np.testing.assert_allclose(est.se, est.variance * np.sqrt(2 / 4999))
    np.testing.assert_allclose(est.bootstrap_se, est.se, rtol=0.4)
    with pytest.raises(ValueError):
        variance_from_samples(g[:1])


def test_empirical_variance_outside_cone_and_mean_zero():
    n = 6
    layout, c = build_checkerboard(n, 2, "Cartan", "line")
    p = VqeProblem(PauliSum.from_pairs(n, [(1.0, "XIIIII")]), c, layout)
    var, se = empirical_variance(p, layout.block(3).slots[0], 20, 0)
    assert var < 1e-28
    grads = gradient_samples(p, 60, 1)
    est = variance_from_samples(grads, bootstrap=0)
    inside = list(layout.block(1).slots)
    assert np.all(np.abs(est.mean[inside]) <= 3 * np.sqrt(est.variance[inside] / 60) + 1e-12)


def test_nonlocal_observable_has_smaller_variance():
    n = 8
    layout, c = build_checkerboard(n, 2, "Cartan", "ring")
    local = VqeProblem(PauliSum.from_pairs(n, [(1.0, "IIIIXIII")]), c, layout)
    glob = VqeProblem(PauliSum.from_pairs(n, [(1.0, "X" * n)]), c, layout)
    v_local = empirical_variances(local, 60, 2, bootstrap=0).variance
    v_glob = empirical_variances(glob, 60, 2, bootstrap=0).variance
    blk = layout.block(1).slots
    assert np.mean(v_glob) < np.mean(v_local) / 5
    assert block_average(layout, v_glob)[1] == pytest.approx(np.mean(v_glob[list(blk)]))


def test_bound_holds_for_small_cartan_circuit():
    n = 4
    layout, c = build_checkerboard(n, 2, "Cartan", "ring")
    h = PauliSum.from_pairs(n, [(1.0, "IXII")])
    est = empirical_variances(VqeProblem(h, c, layout), 300, 5, bootstrap=0)
    means = block_average(layout, est.variance)
    ses = block_average(layout, est.se)
    for b in layout.blocks:
        assert variance_lower_bound(layout, h, b.block_id, 0.5) <= means[b.block_id] + 3 * ses[b.block_id]


def test_tpe_small_sample_sanity():
    pc1 = tpe_distance("ParticleConserving", t=1, samples=4000, seed=0)
    cartan1 = tpe_distance("Cartan", t=1, samples=4000, seed=0)
    assert pc1.lam2 > 0.5 and cartan1.lam2 < 0.1
    pc2 = tpe_distance("ParticleConserving", t=2, samples=20_000, seed=0)
    assert pc2.lam1 == pytest.approx(2.4, abs=0.1) and pc2.lam2 == pytest.approx(1.0, abs=0.05)
    assert pc2.se1 > 0
    with pytest.raises(ValueError):
        tpe_distance("Toffoli")
    with pytest.raises(ValueError):
        tpe_distance("Cartan", t=3)


@pytest.mark.parametrize("family", ["XZZZ", "YRotCZ", "UniversalCNOT", "Cartan", "ParticleConserving"])
def test_block_families_are_unitary(family):
    us = block_unitaries(family, make_rng(2).uniform(-np.pi, np.pi, (20, BLOCK_KINDS[family].param_count)))
    np.testing.assert_allclose(np.einsum("bji,bjk->bik", us.conj(), us), np.broadcast_to(np.eye(4), (20, 4, 4)), atol=1e-12)
