import random
from math import factorial

import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from lovelock_fg.double_forms import (
    DoubleForm, MetricForm, bianchi1, contract, elem_sym, form_power, full_norm,
    kn_product, metric_power, raise_first, trace_contract,
)
from lovelock_fg.randomgen import random_form
from oracles import lemma_rhs, naive_contract, naive_full_norm, naive_kn, scalar_metric


def ident(m):
    return MetricForm([[mpq(int(i == j)) for j in range(m)] for i in range(m)])


def test_gg_entry():
    g = ident(4)
    assert metric_power(g, 2).get((1, 2), (1, 2)) == 2
    assert metric_power(g, 2).get((2, 1), (1, 2)) == -2


def test_contracting_pure_degree_is_zero():
    rng = random.Random(0)
    w = random_form(rng, 4, (0, 2))
    assert contract(ident(4), w).is_zero()
    assert contract(ident(4), w).bideg == (0, 1)


@pytest.mark.parametrize("m", range(1, 8))
def test_full_contraction_of_metric_powers(m):
    g = ident(m)
    for k in range(0, m + 1):
        c = contract(g, metric_power(g, k), k)
        assert c.scalar_value() == factorial(k) * factorial(m) // factorial(m - k)


def test_metric_power_edges():
    g = ident(3)
    assert metric_power(g, 0).scalar_value() == 1
    assert metric_power(g, 4).is_zero()
    assert metric_power(g, 4).bideg == (4, 4)


bidegs = st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2), st.integers(0, 2))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 5), bidegs)
def test_kn_matches_naive(seed, m, bd):
    rng = random.Random(seed)
    a, b, c, d = bd
    w = random_form(rng, m, (a, b), density=0.7)
    t = random_form(rng, m, (c, d), density=0.7)
    assert kn_product(w, t) == naive_kn(w, t)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 6), bidegs)
def test_graded_commutativity(seed, m, bd):
    rng = random.Random(seed)
    p, q, r, s = bd
    w = random_form(rng, m, (p, q), density=0.6)
    t = random_form(rng, m, (r, s), density=0.6)
    sign = -1 if (p * r + q * s) % 2 else 1
    wt, tw = w * t, t * w
    assert wt == (tw if sign > 0 else -tw)


def test_square_shortcut_matches_general_product():
    rng = random.Random(5)
    w = random_form(rng, 5, (2, 2), symmetric=True)
    w_copy = DoubleForm(w.dim, w.bideg, dict(w.comps))
    assert kn_product(w, w) == kn_product(w, w_copy)
    keys = list(kn_product(w, w).comps)[:20]
    assert kn_product(w, w, keys=keys) == DoubleForm(5, (4, 4), {k: kn_product(w, w).comps[k] for k in keys})


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 5), st.integers(0, 3), st.integers(0, 3))
def test_contract_matches_naive(seed, m, a, b):
    rng = random.Random(seed)
    g = scalar_metric(rng, m)
    w = random_form(rng, m, (a, b), density=0.7)
    assert contract(g, w) == naive_contract(g.inv, w)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 6), st.integers(1, 2))
def test_lemma_part0(seed, m, ell):
    rng = random.Random(seed)
    g = scalar_metric(rng, m)
    w = random_form(rng, m, (ell, ell), density=0.6)
    lhs = contract(g, w * g.form)
    rhs = g.form * contract(g, w) + w.scale(m - 2 * ell)
    assert lhs == rhs


@pytest.mark.parametrize("m,ell,k", [(4, 1, 1), (4, 1, 2), (5, 1, 3), (5, 2, 1), (6, 2, 2), (6, 1, 4), (3, 1, 2)])
def test_lemma_part1(m, ell, k):
    rng = random.Random(m * 100 + ell * 10 + k)
    g = scalar_metric(rng, m)
    w = random_form(rng, m, (ell, ell), density=0.7)
    gk = metric_power(g, k)
    lhs = contract(g, gk * w)
    rhs = gk * contract(g, w) + (metric_power(g, k - 1) * w).scale(k * (m - 2 * ell - k + 1))
    assert lhs == rhs


@pytest.mark.parametrize("m,ell,k,p", [(4, 1, 1, 2), (4, 1, 2, 2), (5, 1, 2, 3), (5, 2, 1, 2),
                                       (6, 1, 3, 2), (6, 2, 2, 3), (4, 2, 1, 3), (5, 1, 1, 2)])
def test_lemma_part2(m, ell, k, p):
    rng = random.Random(7 * m + 3 * k + p + ell)
    g = scalar_metric(rng, m)
    w = random_form(rng, m, (ell, ell), density=0.7)
    assert contract(g, metric_power(g, k) * w, p) == lemma_rhs(g, w, k, p)


@pytest.mark.parametrize("m,a,b,k,p", [(4, 1, 2, 1, 1), (5, 2, 1, 2, 2), (5, 0, 2, 2, 2), (6, 1, 3, 1, 2),
                                       (5, 3, 1, 1, 2), (4, 2, 0, 1, 1)])
def test_general_bidegree_contraction(m, a, b, k, p):
    rng = random.Random(m + a + 10 * b + 100 * k + p)
    g = scalar_metric(rng, m)
    w = random_form(rng, m, (a, b), density=0.7)
    assert contract(g, metric_power(g, k) * w, p) == lemma_rhs(g, w, k, p)


def test_full_norm_values():
    assert full_norm(ident(4), ident(4).form) == 4
    g3 = ident(3)
    gg = metric_power(g3, 2)
    assert full_norm(g3, gg) == naive_full_norm(g3.inv, gg) == 48


@pytest.mark.parametrize("seed", range(4))
def test_full_norm_matches_naive(seed):
    rng = random.Random(seed)
    g = scalar_metric(rng, 3)
    w = random_form(rng, 3, (2, 2), symmetric=True)
    assert full_norm(g, w) == naive_full_norm(g.inv, w)


def test_bianchi_of_metric_and_square():
    rng = random.Random(2)
    g = scalar_metric(rng, 5)
    assert bianchi1(g.form).is_zero()
    assert bianchi1(metric_power(g, 2)).is_zero()
    with pytest.raises(ValueError):
        bianchi1(DoubleForm.zero(3, (1, 0)))


def _bianchi_form(rng, m):
    """Symmetric first-Bianchi (2,2) forms: sums of products of symmetric (1,1) forms."""
    out = DoubleForm.zero(m, (2, 2))
    for _ in range(2):
        u = random_form(rng, m, (1, 1), symmetric=True)
        v = random_form(rng, m, (1, 1), symmetric=True)
        out = out + u * v
    return out


@pytest.mark.parametrize("seed", range(5))
def test_bianchi_kernel_closed_under_product_and_contraction(seed):
    rng = random.Random(seed)
    m = 5
    g = scalar_metric(rng, m)
    w, t = _bianchi_form(rng, m), _bianchi_form(rng, m)
    assert bianchi1(w).is_zero() and bianchi1(t).is_zero()
    assert bianchi1(w * t).is_zero()
    c = contract(g, w * t)
    assert bianchi1(c).is_zero()
    assert c.is_symmetric()
    assert w * t == t * w


def test_bianchi_detects_nonkernel():
    w = DoubleForm.from_components(4, (2, 2), {((0, 1), (2, 3)): mpq(1)})
    assert not bianchi1(w).is_zero()


def test_elem_sym_basics():
    g = ident(3)
    w = DoubleForm.from_matrix([[mpq(1), 0, 0], [0, mpq(2), 0], [0, 0, mpq(3)]])
    assert elem_sym(g, w, 3) == 6
    assert elem_sym(g, w, 1) == contract(g, w).scalar_value() == 6
    assert elem_sym(g, w, 2) == 11


@pytest.mark.parametrize("m", [2, 3, 4])
def test_sigma_k_normalization(m):
    """Brute force pins C^k(w^k) = (k!)^2 sigma_k(g^{-1} w)."""
    rng = random.Random(m)
    g = scalar_metric(rng, m)
    w = random_form(rng, m, (1, 1), symmetric=True)
    for k in range(1, m + 1):
        full = contract(g, form_power(w, k), k).scalar_value()
        assert full == factorial(k) ** 2 * elem_sym(g, w, k)


@pytest.mark.parametrize("seed", range(3))
def test_raised_trace_contraction_agrees(seed):
    rng = random.Random(seed)
    m = 5
    g = scalar_metric(rng, m)
    w = random_form(rng, m, (3, 2), density=0.8)
    lhs = raise_first(g.inv, contract(g, w, 2))
    assert trace_contract(raise_first(g.inv, w), 2) == lhs
    keys = list(lhs.comps)[:5]
    assert trace_contract(raise_first(g.inv, w), 2, keys=keys) == DoubleForm(m, lhs.bideg, {k: lhs.comps[k] for k in keys})
    # raising commutes with the product
    t = random_form(rng, m, (1, 1))
    assert raise_first(g.inv, w * t) == raise_first(g.inv, w) * raise_first(g.inv, t)


def test_json_roundtrip():
    rng = random.Random(1)
    w = random_form(rng, 4, (2, 1))
    doc = w.to_json(str)
    assert DoubleForm.from_json(doc, mpq) == w
    assert all(list(e["I"]) == sorted(e["I"]) for e in doc["entries"])
