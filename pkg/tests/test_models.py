import itertools

import numpy as np
import pytest
from scipy.optimize import minimize
from hypothesis import given, settings
from hypothesis import strategies as st

from vqalab.models import (
    FermionOperator,
    ModelSpec,
    add_number_penalty,
    bk_matrix,
    bk_sets,
    bravyi_kitaev,
    build_hubbard_spinless,
    build_random_interpolated,
    build_tfi,
    build_xxz,
    density_correlation,
    encode,
    exact_ground,
    hamming_sector,
    jordan_wigner,
    number_operator,
    product_state_tfi_energy,
    sector_ground,
    tfi_free_fermion_energy,
)
from vqalab.pauli import PauliString, PauliSum, to_dense
from vqalab.simulator import basis_state, expectation, ghz_circuit, ghz_state
from vqalab.fidelity import telescope


def test_two_site_ring_counts_bond_once():
    h = build_tfi(2, 1.0, 0.0, "ring")
    assert h.terms == {PauliString.from_label("ZZ"): 1.0}


def test_tfi_term_count():
    h = build_tfi(3, 1.0, 1.0)
    assert len(h.terms) == 6 and h.locality == 2


@pytest.mark.parametrize("h", [0.0, 0.5, 1.0, 1.5, 2.0])
def test_tfi_ring_matches_free_fermions(h):
    assert exact_ground(build_tfi(10, 1.0, h)).energy == pytest.approx(tfi_free_fermion_energy(10, 1.0, h), abs=1e-8)


@pytest.mark.parametrize("n", [3, 4, 6])
def test_ferromagnetic_tfi_ground(n):
    g = exact_ground(build_tfi(n, -1.0, 0.0))
    assert g.energy == pytest.approx(-n)
    assert g.degenerate


def test_degenerate_two_site_ground_space():
    g = exact_ground(build_tfi(2, -1.0, 0.0, "line"))
    assert g.energy == pytest.approx(-1.0) and g.degeneracy == 2
    assert abs(g.state[1]) < 1e-12 and abs(g.state[2]) < 1e-12


def test_single_qubit_x_ground_is_minus():
    g = exact_ground(PauliSum.from_pairs(1, [(1.0, "X")]))
    assert g.energy == pytest.approx(-1.0)
    assert abs(np.vdot(g.state, [2**-0.5, -(2**-0.5)])) == pytest.approx(1.0)


def test_telescope_ground_is_ghz():
    g = exact_ground(telescope(ghz_circuit(4)))
    assert g.energy == pytest.approx(0.0, abs=1e-12) and not g.degenerate
    assert abs(np.vdot(g.state, ghz_state(4))) == pytest.approx(1.0)


def test_xxz_two_site():
    h = build_xxz(2, 1.0, 0.0, "line")
    assert h.terms == {PauliString.from_label("XX"): 1.0, PauliString.from_label("YY"): 1.0}
    assert exact_ground(h).energy == pytest.approx(-2.0)


def test_xxz_symmetries():
    n = 5
    m = to_dense(build_xxz(n, 1.0, 0.7))
    for label in ("X" * n, "Z" * n):
        p = PauliString.from_label(label).to_dense()
        np.testing.assert_allclose(m @ p, p @ m, atol=1e-12)
    zsum = to_dense(PauliSum(n, {PauliString.single(n, i, "Z"): 1.0 for i in range(n)}))
    m0 = to_dense(build_xxz(n, 1.0, 0.0))
    np.testing.assert_allclose(m0 @ zsum, zsum @ m0, atol=1e-12)


def test_xxz_energy_invariant_under_global_z_rotation():
    n = 4
    h = build_xxz(n, 1.0, 1.3)
    psi = exact_ground(h).state
    phases = np.exp(-0.5j * 0.8 * np.array([n - 2 * bin(i).count("1") for i in range(1 << n)]))
    assert expectation(phases * psi, h) == pytest.approx(expectation(psi, h), abs=1e-12)


def test_jw_images():
    a0 = jordan_wigner(FermionOperator.ladder(1, 0, False))
    assert a0.terms == {PauliString.from_label("X"): 0.5, PauliString.from_label("Y"): 0.5j}
    a2 = jordan_wigner(FermionOperator.ladder(3, 2, False))
    assert a2.terms == {PauliString.from_label("ZZX"): 0.5, PauliString.from_label("ZZY"): 0.5j}
    num = jordan_wigner(FermionOperator.number(1, 0))
    np.testing.assert_allclose(to_dense(num), np.diag([0.0, 1.0]), atol=1e-12)


@pytest.mark.parametrize("encoder", [jordan_wigner, bravyi_kitaev])
def test_canonical_anticommutation(encoder):
    n = 4
    lower = [to_dense(encoder(FermionOperator.ladder(n, i, False))) for i in range(n)]
    for i, j in itertools.product(range(n), repeat=2):
        anti = lower[i] @ lower[j].conj().T + lower[j].conj().T @ lower[i]
        np.testing.assert_allclose(anti, np.eye(16) * (i == j), atol=1e-12)
        np.testing.assert_allclose(lower[i] @ lower[j] + lower[j] @ lower[i], 0, atol=1e-12)


def test_bk_matrix_for_eight_modes():
    expected = np.array(
        [
            [1, 0, 0, 0, 0, 0, 0, 0],
            [1, 1, 0, 0, 0, 0, 0, 0],
            [0, 0, 1, 0, 0, 0, 0, 0],
            [1, 1, 1, 1, 0, 0, 0, 0],
            [0, 0, 0, 0, 1, 0, 0, 0],
            [0, 0, 0, 0, 1, 1, 0, 0],
            [0, 0, 0, 0, 0, 0, 1, 0],
            [1, 1, 1, 1, 1, 1, 1, 1],
        ]
    )
    np.testing.assert_array_equal(bk_matrix(8), expected)


def test_bk_parity_sets():
    parity = bk_sets(8)["parity"]
    assert parity[7] == {6, 5, 3}
    assert parity[6] == {5, 3}
    # each parity set recovers n_0 + ... + n_{j-1} from the stored bits
    b = bk_matrix(8)
    for occ in itertools.product([0, 1], repeat=8):
        x = b @ np.array(occ) % 2
        for j in range(8):
            assert sum(x[k] for k in parity[j]) % 2 == sum(occ[:j]) % 2


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_jw_and_bk_are_isospectral(n):
    f = build_hubbard_spinless(n, 1.0, 2.0, 1.0, "line")
    wj = np.linalg.eigvalsh(to_dense(jordan_wigner(f)))
    wb = np.linalg.eigvalsh(to_dense(bravyi_kitaev(f)))
    np.testing.assert_allclose(wj, wb, atol=1e-10)


def test_hopping_chain_single_particle_spectrum():
    n = 6
    h = encode(build_hubbard_spinless(n, 1.0, 0.0, 0.0, "ring"))
    sec = hamming_sector(n, 1)
    w = np.linalg.eigvalsh(to_dense(h)[np.ix_(sec, sec)])
    k = 2 * np.pi * np.arange(n) / n
    np.testing.assert_allclose(w, np.sort(-2 * np.cos(k)), atol=1e-12)


def test_hubbard_conserves_particle_number():
    n = 5
    h = to_dense(encode(build_hubbard_spinless(n, 1.0, 2.0, 1.0, "ring")))
    num = to_dense(number_operator(n))
    np.testing.assert_allclose(h @ num, num @ h, atol=1e-12)


def test_hubbard_four_site_half_filling_against_dense_sector():
    h = encode(build_hubbard_spinless(4, 1.0, 2.0, 1.0, "line"))
    sec = hamming_sector(4, 2)
    expected = np.linalg.eigvalsh(to_dense(h)[np.ix_(sec, sec)])[0]
    assert sector_ground(h, 2).energy == pytest.approx(expected)


def test_number_penalty():
    n, m, weight = 4, 2, 10.0
    h = encode(build_hubbard_spinless(n, 1.0, 2.0, 1.0, "line"))
    hp = add_number_penalty(h, m, weight)
    zero = basis_state(n)
    assert expectation(zero, hp) - expectation(zero, h) == pytest.approx(weight * m * m)
    two = basis_state(n, "0110")
    assert expectation(two, hp) == pytest.approx(expectation(two, h))
    g = exact_ground(hp)
    weights = np.array([bin(i).count("1") for i in range(16)])
    assert np.sum(np.abs(g.state[weights == m]) ** 2) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        add_number_penalty(h, m, 0.0)


def test_density_correlation():
    psi = basis_state(4, "1010")
    assert all(density_correlation(psi, m) == pytest.approx(0.0) for m in range(4))
    with pytest.raises(ValueError):
        density_correlation(psi, 4)


def test_density_correlation_matches_dense_expectation():
    n = 8
    psi = sector_ground(encode(build_hubbard_spinless(n, 1.0, 2.0, 1.0, "ring")), n // 2).state
    occ = lambda i: (np.eye(1 << n) - to_dense(PauliSum(n, {PauliString.single(n, i, "Z"): 1.0}))) / 2
    n0 = occ(0)
    for m in range(n):
        nm = occ(m)
        ev = lambda a: np.vdot(psi, a @ psi).real
        assert density_correlation(psi, m) == pytest.approx(ev(n0 @ nm) - ev(n0) * ev(nm), abs=1e-12)
    assert density_correlation(psi, 0) >= 0


def test_random_interpolated_family():
    a = build_random_interpolated(3, 0.4, 7)
    assert a.terms == build_random_interpolated(3, 0.4, 7).terms
    with pytest.raises(ValueError):
        build_random_interpolated(7, 0.5, 0)
    with pytest.raises(ValueError):
        build_random_interpolated(3, 1.5, 0)


def test_random_interpolated_spectrum_continuity():
    h0, h1 = to_dense(build_random_interpolated(3, 0.0, 1)), to_dense(build_random_interpolated(3, 1.0, 1))
    bound = np.linalg.norm(h1 - h0, 2) * 0.01
    for alpha in np.linspace(0, 0.99, 12):
        w0 = np.linalg.eigvalsh(to_dense(build_random_interpolated(3, alpha, 1)))
        w1 = np.linalg.eigvalsh(to_dense(build_random_interpolated(3, alpha + 0.01, 1)))
        assert np.max(np.abs(w1 - w0)) <= bound + 1e-12


def test_model_spec_builds_families():
    assert ModelSpec("TFI", 4, {"h": 0.5}).hamiltonian().terms == build_tfi(4, 1.0, 0.5).terms
    spec = ModelSpec("hubbard", 4, {"encoding": "bk"}, "line").with_value("V1", 0.0)
    assert spec.couplings["V1"] == 0.0 and spec.hamiltonian().n == 4
    with pytest.raises(ValueError):
        ModelSpec("ising3d", 4)
    with pytest.raises(ValueError):
        ModelSpec("tfi", 4, {"h": float("nan")})


def test_fermion_text_roundtrip():
    f = build_hubbard_spinless(3, 1.0, 2.0, 0.0, "line")
    assert FermionOperator.from_text(f.to_text(), 3).terms == f.terms


def product_minimum(n, J, h):
    # minimize n (-|J| cos^2 t + h sin t) over t, the staggered/uniform reduction on an even ring
    if J == 0 or abs(h) >= 2 * abs(J):
        return -n * abs(h)
    return -n * (abs(J) + h * h / (4 * abs(J)))


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2).filter(lambda v: abs(v) > 0.05), st.floats(-2, 2))
def test_product_state_minimum(J, h):
    n = 4
    rng = np.random.default_rng(0)
    f = lambda t: product_state_tfi_energy(n, J, h, t)
    best = min(minimize(f, rng.uniform(-np.pi, np.pi, n)).fun for _ in range(8))
    assert best == pytest.approx(product_minimum(n, J, h), abs=1e-6)
    assert best <= -n * max(abs(J), abs(h)) + 1e-6
