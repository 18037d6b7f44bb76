import json
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from praa.autf import NielsenGen, PhiElement, ak_identity, generators, nielsen, phi_act, phi_elements
from praa.blackbox import make_cyclic, make_permutation
from praa.groupring import (
    TERM_NAMES,
    CertificateInput,
    RingElement,
    ToyGroup,
    certificate_from_json,
    certificate_to_json,
    certify,
    certify_element,
    decomposition_identities,
    decomposition_term,
    gram,
    induction_target,
    laplacian,
    laplacian_C,
    laplacian_N,
    load_certificate,
    named_target,
    one,
    partial_laplacian,
    residual,
    sos_eval,
    symmetrization_identities,
    symmetrize,
)

K2 = 2


def gen(side, i, j, s=1, k=K2):
    return nielsen(NielsenGen(side, i, j, s), k)


def test_basic_expansion():
    e = ak_identity(2)
    g = gen("L", 1, 2)
    x = one(e) - RingElement.basis(g)
    y = one(e) - RingElement.basis(g.inverse())
    prod = x * y
    assert prod == RingElement({e: 2, g: -1, g.inverse(): -1})


def test_laplacian_shape():
    d = laplacian(2)
    assert d.coefficient(ak_identity(2)) == 16
    assert len(d) == 17
    assert d.l1_norm() == 32
    assert d.augmentation() == 0
    assert d.is_star_invariant()
    assert laplacian_C(3) + laplacian_N(3) == laplacian(3)
    assert laplacian(3).l1_norm() == 72


def test_partial_laplacian():
    assert not partial_laplacian(1, 1, 3)
    d = partial_laplacian(1, 2, 3)
    assert d.coefficient(ak_identity(3)) == 4
    assert d.star() == d
    with pytest.raises(IndexError):
        partial_laplacian(0, 4, 3)
    la = partial_laplacian(0, 1, 3, "LA")
    assert la.coefficient(ak_identity(3)) == 2


@pytest.mark.parametrize("k", [2, 3, 4])
def test_laplacian_phi_invariant(k):
    d = laplacian(k)
    rnd = random.Random(k)
    phis = list(phi_elements(k))
    for phi in rnd.sample(phis, min(len(phis), 12)):
        moved = RingElement({phi_act(phi, g): c for g, c in d.terms.items()})
        assert moved == d


@pytest.mark.parametrize("k", [2, 3])
def test_decomposition(k):
    assert all(decomposition_identities(k).values())
    for name in TERM_NAMES:
        assert decomposition_term(name, k).is_star_invariant()


def test_decomposition_small_cases():
    assert not decomposition_term("OppN", 2)
    assert not decomposition_term("OppCN", 2)
    dc = laplacian_C(2)
    assert dc * dc == decomposition_term("SqC", 2) + decomposition_term("AdjC", 2)
    with pytest.raises(ValueError):
        decomposition_term("Nope", 2)


def test_symmetrize_examples():
    assert symmetrize(laplacian_C(2), 2, 3) == laplacian_C(3).scale(4)
    assert symmetrize(laplacian_N(2), 2, 3) == laplacian_N(3).scale(2)
    assert symmetrize(one(ak_identity(2)), 2, 3) == one(ak_identity(3)).scale(6)
    with pytest.raises(RuntimeError):
        symmetrize(laplacian_C(2), 2, 7)


def test_symmetrization_identities_2_3():
    assert all(symmetrization_identities(2, 3).values())


def test_symmetrization_identities_3_4():
    assert all(symmetrization_identities(3, 4).values())


def _random_element(rnd, k=2, size=6, length=3):
    gens = generators(k)
    terms = {}
    for _ in range(size):
        g = ak_identity(k)
        for _ in range(rnd.randrange(length + 1)):
            g = g * nielsen(rnd.choice(gens), k)
        terms[g] = terms.get(g, 0) + Fraction(rnd.randint(-5, 5), rnd.randint(1, 4))
    return RingElement(terms)


@given(st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_ring_properties(seed):
    rnd = random.Random(seed)
    a, b, c = (_random_element(rnd) for _ in range(3))
    assert a.star().star() == a
    assert a.star().l1_norm() == a.l1_norm()
    assert (a * b).l1_norm() <= a.l1_norm() * b.l1_norm()
    assert (a * b).star() == b.star() * a.star()
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert (a * b).augmentation() == a.augmentation() * b.augmentation()


def _toy_basis(k=2, n=4):
    gens = [nielsen(g, k) for g in generators(k)[:n]]
    return [ak_identity(k)] + gens


@given(st.lists(st.integers(-3, 3), min_size=16, max_size=16))
@settings(max_examples=40, deadline=None)
def test_sos_eval_star_invariant(entries):
    E = _toy_basis()
    Q = [[Fraction(v, 2) for v in entries[4 * r : 4 * r + 4]] for r in range(4)]
    s = sos_eval(E, Q)
    assert s.is_star_invariant()
    assert s.augmentation() == 0


def test_sos_eval_identity_row():
    E = _toy_basis()
    Q = [[Fraction(1), Fraction(2), 0, 0], [0, 1, 0, 3], [0, 0, 0, 0], [1, 0, 1, 0]]
    Q5 = [[Fraction(7)] + [Fraction(0)] * 4] + [[Fraction(0)] + row for row in Q]
    assert sos_eval(E, Q5, includes_identity=True) == sos_eval(E, Q)
    with pytest.raises(ValueError):
        sos_eval(E, Q5)


def test_gram_exact():
    Q = [[Fraction(1, 3), Fraction(1, 2)], [Fraction(2), Fraction(-1, 7)]]
    M = gram(Q)
    for i in range(2):
        for j in range(2):
            assert M[i][j] == sum(Q[r][i] * Q[r][j] for r in range(2))


def test_zero_residual_certifies_lambda0():
    E = _toy_basis()
    Q = [[Fraction(1), 0, Fraction(-1, 2), 0], [0, 0, 1, 1], [0, 0, 0, 0], [0, 0, 0, 0]]
    d = laplacian(2)
    lam0 = Fraction(1, 3)
    xi = sos_eval(E, Q) + d.scale(lam0)
    assert not residual(xi, lam0, Q, E, d)
    res = certify_element(xi, d, lam0, Q, E)
    assert res.success and res.lam == lam0 and res.residual_l1 == 0


def test_netzer_thom_arithmetic():
    # |r|_1 = 1/1000 on an element of word length 4
    E = _toy_basis()
    Q = [[Fraction(0)] * 4 for _ in range(4)]
    d = laplacian(2)
    lam0 = Fraction(1, 2)
    w = gen("L", 1, 2) * gen("R", 2, 1) * gen("L", 0, 1) * gen("R", 0, 2)
    assert w.length == 4
    r = RingElement({ak_identity(2): Fraction(1, 1000), w: Fraction(-1, 2000), w.inverse(): Fraction(-1, 2000)})
    res = certify_element(d.scale(lam0) + r, d, lam0, Q, E)
    assert res.residual_l1 == Fraction(2, 1000)
    assert res.wordlength == 4
    assert res.correction == 16 * Fraction(2, 1000)
    assert res.lam == lam0 - Fraction(32, 1000)
    r2 = RingElement({ak_identity(2): Fraction(1, 2000), w: Fraction(-1, 4000), w.inverse(): Fraction(-1, 4000)})
    res2 = certify_element(d.scale(lam0) + r2, d, lam0, Q, E)
    assert res2.residual_l1 == Fraction(1, 1000) and res2.lam == lam0 - Fraction(16, 1000)


def test_certify_failure_and_errors():
    E = _toy_basis()
    Q = [[Fraction(0)] * 4 for _ in range(4)]
    d = laplacian(2)
    res = certify_element(d * d, d, Fraction(100), Q, E)
    assert not res.success and res.lam <= 0
    with pytest.raises(ValueError):
        certify_element(RingElement.basis(gen("L", 1, 2)) - one(ak_identity(2)), d, 1, Q, E)
    with pytest.raises(ValueError):
        sos_eval(E, [[1, 2], [3, 4]])


def test_induction_target():
    xi = induction_target(5)
    assert xi.is_star_invariant()
    assert xi.augmentation() == 0
    with pytest.raises(ValueError):
        induction_target(4)


def test_certificate_json_roundtrip(tmp_path):
    E = _toy_basis()
    Q = [[Fraction(1, 4), 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]]
    cert = CertificateInput(2, E, Fraction("0.5"), Q, "delta_squared")
    data = certificate_to_json(cert)
    p = tmp_path / "cert.json"
    p.write_text(json.dumps(data))
    back = load_certificate(p)
    assert back.basis == E and back.Q == Q and back.lambda0 == Fraction(1, 2)
    direct = certificate_from_json({**data, "lambda0": "0.1"})
    assert direct.lambda0 == Fraction(1, 10)
    res = certify(back)
    d = laplacian(2)
    assert res.lam == Fraction(1, 2) - res.correction
    assert named_target("delta_squared", 2) == d * d


# --- finite-group mode ---


def test_toy_z3_exact():
    toy = ToyGroup(make_cyclic(3), [1])
    lap = toy.laplacian()
    assert lap == RingElement({toy.element(0): 2, toy.element(1): -1, toy.element(2): -1})
    assert not (lap * lap - lap.scale(3))
    E, Q = toy.oracle_certificate(3)
    res = certify_element(lap * lap, lap, 3, Q, E)
    assert res.success and res.lam == 3


def _toy_groups():
    out = [ToyGroup(make_cyclic(n), [1]) for n in (2, 4, 5, 7, 9, 12)]
    s3 = make_permutation(3, [[2, 1, 3], [2, 3, 1]])
    out.append(ToyGroup(s3, s3.generators))
    out.append(ToyGroup(make_cyclic(6), [1, 2]))
    return out


@pytest.mark.parametrize("toy", _toy_groups(), ids=lambda t: repr(t.handle))
def test_oracle_certificate_near_optimal(toy):
    lap = toy.laplacian()
    opt = toy.optimal_lambda()
    lam0 = Fraction(opt) - Fraction(1, 10**9)
    E, Q = toy.oracle_certificate(lam0)
    res = certify_element(lap * lap, lap, lam0, Q, E)
    assert res.success
    assert 0 < res.lam <= opt
    assert opt - float(res.lam) < 1e-6
    assert toy.is_nonnegative(lap * lap - lap.scale(res.lam))


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_certifier_soundness(seed):
    # random certificates never certify more than the spectral optimum allows
    rnd = random.Random(seed)
    toy = rnd.choice(_toy_groups())
    lap = toy.laplacian()
    opt = toy.optimal_lambda()
    lam0 = Fraction(opt) * Fraction(rnd.randint(50, 150), 100)
    E, Q = toy.oracle_certificate(min(lam0, Fraction(opt) - Fraction(1, 10**6)))
    noise = [[q + Fraction(rnd.randint(-3, 3), 10**rnd.randint(2, 6)) for q in row] for row in Q]
    res = certify_element(lap * lap, lap, lam0, noise, E)
    if res.success:
        assert res.lam <= opt + 1e-12
        assert toy.is_nonnegative(lap * lap - lap.scale(res.lam))


def test_toy_word_lengths():
    toy = ToyGroup(make_cyclic(12), [1])
    assert max(toy.element(x).length for x in range(12)) == 6
    with pytest.raises(ValueError):
        ToyGroup(make_cyclic(4), [2])
    assert np.allclose(toy.regular_matrix(toy.laplacian()).sum(axis=0), 0)
