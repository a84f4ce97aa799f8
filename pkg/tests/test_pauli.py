import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vqalab.ansatz import particle_conserving_matrix
from vqalab.models import build_tfi
from vqalab.pauli import (
    PauliString,
    PauliSum,
    all_strings,
    commutes,
    decompose,
    hs_inner,
    mul,
    to_dense,
)
from vqalab.simulator import make_rng

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)


def strings(n):
    return st.builds(
        lambda x, z: PauliString(n, x, z),
        st.integers(0, (1 << n) - 1),
        st.integers(0, (1 << n) - 1),
    )


def test_single_qubit_product():
    p = mul(PauliString.from_label("X"), PauliString.from_label("Y"))
    assert p.label == "Z" and p.phase == 1


def test_identity_product_keeps_phase():
    h = PauliString.from_label("-XZY")
    assert mul(PauliString(3), h) == h


def test_two_qubit_product_against_dense():
    a, b = PauliString.from_label("XZ"), PauliString.from_label("ZX")
    p = mul(a, b)
    assert p.label == "YY" and p.phase == 0
    np.testing.assert_allclose(a.to_dense() @ b.to_dense(), p.to_dense())


def test_size_mismatch_rejected():
    with pytest.raises(ValueError):
        mul(PauliString(1, 1, 0), PauliString(2, 1, 0))
    with pytest.raises(ValueError):
        commutes(PauliString(1, 1, 0), PauliString(2, 1, 0))


@pytest.mark.parametrize("a,b,expected", [("X", "Z", False), ("XX", "ZZ", True), ("XI", "IZ", True), ("Y", "Y", True)])
def test_commutes_examples(a, b, expected):
    assert commutes(PauliString.from_label(a), PauliString.from_label(b)) is expected


@pytest.mark.parametrize("k", [1, 2, 3])
def test_half_of_support_strings_anticommute(k):
    for f in all_strings(k):
        if f.is_identity:
            continue
        anti = sum(not commutes(f, s) for s in all_strings(k))
        assert anti == 4**k // 2


@given(strings(3), strings(3), strings(3))
def test_mul_associative_and_dense(a, b, c):
    assert mul(mul(a, b), c) == mul(a, mul(b, c))
    np.testing.assert_allclose(mul(a, b).to_dense(), a.to_dense() @ b.to_dense(), atol=1e-12)


@given(strings(4))
def test_square_is_identity(a):
    sq = mul(a, a)
    assert sq.is_identity and sq.phase == 0


@given(strings(3), strings(3))
def test_commutes_symmetric_and_matches_dense(a, b):
    assert commutes(a, b) == commutes(b, a)
    assert commutes(a, PauliString(3))
    da, db = a.to_dense(), b.to_dense()
    assert commutes(a, b) == np.allclose(da @ db, db @ da)


def test_label_roundtrip_and_phase_prefix():
    s = PauliString.from_label("-iXYZ")
    assert s.label == "XYZ" and s.phase == 3
    assert str(PauliString.from_label("ZIX")) == "ZIX"
    with pytest.raises(ValueError):
        PauliString.from_label("XQ")


@pytest.mark.parametrize(
    "a,b,expected",
    [(X, X, 1.0), (X, Z, 0.0), (Y, Y, 1.0)],
)
def test_hs_inner_single_qubit(a, b, expected):
    assert hs_inner(a, b) == pytest.approx(expected)


def test_hs_inner_tfi_norm():
    h = to_dense(build_tfi(2, 1.0, 1.0, "line"))
    assert hs_inner(h, h) == pytest.approx(3.0)


def test_hs_inner_dimension_mismatch():
    with pytest.raises(ValueError):
        hs_inner(np.eye(2), np.eye(4))


def test_decompose_simple_cases():
    assert decompose(Z).terms == {PauliString.from_label("Z"): 1.0}
    assert decompose(np.eye(4)).terms == {PauliString(2): 1.0}


def test_decompose_rejects_non_hermitian():
    with pytest.raises(ValueError):
        decompose(np.array([[0, 1], [0, 0]], dtype=complex))


def test_particle_conserving_roundtrip():
    m = particle_conserving_matrix(np.pi / 2, 0.0)
    np.testing.assert_allclose(to_dense(decompose(m)), m, atol=1e-12)


@pytest.mark.parametrize("s,diag", [("Z", [-1, 1]), ("ZZ", [1, -1, -1, 1])])
def test_to_dense_examples(s, diag):
    coeff = -1.0 if s == "Z" else 1.0
    m = to_dense(PauliSum(len(s), {PauliString.from_label(s): coeff}))
    np.testing.assert_allclose(m, np.diag(diag))


def test_to_dense_size_limit():
    with pytest.raises(ValueError):
        to_dense(PauliSum(11, {PauliString(11, 1, 0): 1.0}))


def test_qubit_zero_is_leftmost_factor():
    m = to_dense(PauliSum(2, {PauliString.from_label("XI"): 1.0}))
    np.testing.assert_allclose(m, np.kron(X, np.eye(2)))


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_roundtrip_random_sums(seed):
    rng = make_rng(seed)
    terms = {}
    for _ in range(5):
        s = PauliString(3, int(rng.integers(8)), int(rng.integers(8)))
        terms[s] = terms.get(s, 0.0) + float(rng.normal())
    s = PauliSum(3, terms)
    back = decompose(to_dense(s))
    for key in set(s.terms) | set(back.terms):
        assert back.coefficient(key) == pytest.approx(s.coefficient(key), abs=1e-10)


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1))
def test_unitary_conjugation_preserves_coefficient_norm(seed):
    rng = make_rng(seed)
    z = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    u, _ = np.linalg.qr(z)
    h = build_tfi(2, 0.7, 1.3, "line")
    rotated = decompose(u @ to_dense(h) @ u.conj().T)
    assert rotated.norm(2) == pytest.approx(h.norm(2), rel=1e-10)


def test_sum_algebra_and_text_roundtrip():
    a = PauliSum.from_pairs(2, [(1.0, "XX"), (0.5, "ZI")])
    b = PauliSum.from_pairs(2, [(-1.0, "XX"), (2.0, "IZ")])
    c = a + b
    assert c.coefficient("XX") == 0 and PauliString.from_label("XX") not in c.terms
    assert (a - a).terms == {}
    np.testing.assert_allclose(to_dense(a * b), to_dense(a) @ to_dense(b), atol=1e-12)
    assert PauliSum.from_text(a.to_text()).terms == a.terms
    assert a.is_hermitian and a.locality == 2


def test_all_strings_count():
    assert len(list(all_strings(2))) == 16
    assert {s.support for s in all_strings(3, [1]) if not s.is_identity} == {(1,)}


def test_products_of_basis_cover_group():
    labels = ["".join(p) for p in itertools.product("IXYZ", repeat=2)]
    prods = {mul(PauliString.from_label(a), PauliString.from_label(b)).label for a in labels for b in labels}
    assert len(prods) == 16
