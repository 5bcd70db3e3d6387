import random
from math import comb, factorial

import pytest
from gmpy2 import mpq

from lovelock_fg.couplings import lambda_coeffs
from lovelock_fg.curvature import (
    OneForm, SymTensor2, christoffel, div_star, divergence, gravitation, hessian, laplacian,
    lichnerowicz, lovelock_family, ric_dot, ricci, riemann, schouten_weyl, trace,
)
from lovelock_fg.double_forms import MetricForm, bianchi1, contract, elem_sym, form_power, full_norm, metric_power
from lovelock_fg.models import (
    conformally_flat_matrix, constant_curvature_matrix, flat_matrix, hyperbolic_ball_matrix,
    linear_phi, product_matrix,
)
from lovelock_fg.randomgen import random_jet, random_metric, random_metric_matrix, random_symmetric_matrix
from lovelock_fg.ring_jets import DegreeError, Jet, Q


def test_flat_is_flat():
    assert riemann(MetricForm(flat_matrix(4, 2))).is_zero()


def test_poincare_ball_at_origin():
    g = MetricForm(hyperbolic_ball_matrix(4, 2))
    R = riemann(g)
    assert R == metric_power(g, 2).scale(mpq(-1, 2))


@pytest.mark.parametrize("K", [1, 3, mpq(-1, 2)])
def test_constant_curvature(K):
    g = MetricForm(constant_curvature_matrix(3, 3, K))
    R = riemann(g)
    assert R.truncate_y(1) == metric_power(g, 2).scale(Q(K) / 2).truncate_y(1)
    _, scal, _ = lovelock_family(g, 1, R)
    assert scal.truncate(1) == 6 * Q(K)


def test_degree_guard():
    with pytest.raises(DegreeError):
        riemann(MetricForm(flat_matrix(3, 1)))


@pytest.mark.parametrize("seed,m", [(0, 3), (1, 4), (2, 5)])
def test_first_bianchi_and_symmetry(seed, m):
    g = random_metric(random.Random(seed), m, 3)
    R = riemann(g)
    assert bianchi1(R).is_zero()
    assert R.is_symmetric()


def test_dimensional_vanishing():
    g = random_metric(random.Random(4), 4, 2)
    R = riemann(g)
    assert form_power(R, 3).is_zero()
    ric, scal, E = lovelock_family(g, 3, R)
    assert ric.is_zero() and scal == 0


def test_ell4_identity_small():
    g = random_metric(random.Random(9), 5, 2)
    R = riemann(g)
    _, s4, _ = lovelock_family(g, 2, R)
    ric = ricci(g, R)
    sc = trace(g, ric)
    assert s4 == 6 * (full_norm(g, R) - 4 * full_norm(g, ric.to_form()) + sc * sc)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_hyperbolic_lovelock_eigenvalues(n):
    g = MetricForm(hyperbolic_ball_matrix(n + 1, 2))
    R = riemann(g)
    lam = lambda_coeffs(n)
    gs = SymTensor2(g.mat)
    for q, lq in enumerate(lam, start=1):
        ric, scal, E = lovelock_family(g, q, R)
        assert ric == gs.scale(lq)
        assert scal == (n + 1) * lq
        assert E == gs.scale((1 - mpq(n + 1, 2 * q)) * lq)
        assert gravitation(g, q, ric) == E


def test_torus_product_lovelock_vanishing():
    rng = random.Random(3)
    n = 2
    h = random_metric_matrix(rng, n, 2, nv=n)
    g = MetricForm(product_matrix(h, 2))
    R = riemann(g)
    _, _, E = lovelock_family(g, 2, R)
    assert E.is_zero()


def test_gravitation_trivia():
    g = MetricForm(flat_matrix(3, 1))
    gs = SymTensor2(g.mat)
    assert gravitation(g, 1, gs) == gs.scale(mpq(1) - mpq(3, 2))
    assert gravitation(g, 2, SymTensor2.zero(3)).is_zero()


def test_schouten_weyl():
    K = mpq(2)
    g = MetricForm(constant_curvature_matrix(4, 2, K))
    P, W = schouten_weyl(g)
    assert P == SymTensor2(g.mat).scale(K / 2)
    assert W.is_zero()
    rng = random.Random(1)
    g = random_metric(rng, 4, 2)
    R = riemann(g)
    P, W = schouten_weyl(g, R)
    assert R == W + g.form * P.to_form()
    assert contract(g, W).is_zero()


def test_conformally_flat_weyl():
    rng = random.Random(8)
    phi = random_jet(rng, 4, 4, const=0)
    g = MetricForm(conformally_flat_matrix(phi, 4))
    _, W = schouten_weyl(g)
    assert W.is_zero()


def test_divergence_conventions():
    g = MetricForm(flat_matrix(2, 3))
    y1 = Jet.var(2, 3, 0)
    t = SymTensor2([[y1 * y1, Jet.zero(2, 3)], [Jet.zero(2, 3), Jet.zero(2, 3)]])
    assert divergence(g, t)[0] == -2 * y1
    g = random_metric(random.Random(2), 3, 3)
    assert divergence(g, SymTensor2(g.mat)).is_zero()


@pytest.mark.parametrize("seed", [0, 1])
def test_second_bianchi(seed):
    g = random_metric(random.Random(seed), 4, 3)
    R = riemann(g)
    for q in (1, 2):
        _, _, E = lovelock_family(g, q, R)
        assert divergence(g, E).is_zero()


def test_rough_laplacian_on_functions_is_minus_trace_hessian():
    g = random_metric(random.Random(6), 3, 3)
    f = random_jet(random.Random(7), 3, 3)
    assert laplacian(g, f) == -trace(g, hessian(g, f))
    # flat sign check: -sum d^2 f
    gf = MetricForm(flat_matrix(2, 2))
    y = Jet.var(2, 2, 0)
    assert laplacian(gf, y * y) == -2


@pytest.mark.parametrize("seed", [0, 3])
def test_ric_dot_matches_besse_formula(seed):
    rng = random.Random(seed)
    m = 3
    h0 = random_metric(rng, m, 4)
    k = SymTensor2(random_symmetric_matrix(rng, m, m, 4))
    dric, dscal = ric_dot(h0, k)
    lhs = lichnerowicz(h0, k).scale(mpq(1, 2)) - div_star(h0, divergence(h0, k)) \
        - hessian(h0, trace(h0, k)).scale(mpq(1, 2))
    assert dric == lhs
    ric = ricci(h0)
    scal = trace(h0, ric)
    rhs = trace(h0, dric) + contract(h0, ric.to_form() * k.to_form(), 2).scalar_value() * mpq(1, 2) \
        - trace(h0, k) * scal
    assert dscal == rhs.truncate(dscal.deg)


def test_ric_dot_trivial_cases():
    m = 3
    h0 = MetricForm(flat_matrix(m, 4))
    dric, dscal = ric_dot(h0, SymTensor2.zero(m))
    assert dric.is_zero() and dscal == 0
    dric, dscal = ric_dot(h0, SymTensor2(h0.mat).scale(3))
    assert dric.is_zero() and dscal == 0


@pytest.mark.parametrize("m", [4, 5, 6])
def test_conformally_flat_lovelock_scalar_is_sigma_of_schouten(m):
    # R = g P there, so scal^(2q) = C^{2q}(g^q P^q); the lemma gives binom(m-q, q)(2q)!(q!)^2 sigma_q
    phi = random_jet(random.Random(m), m, 3, density=0.3, const=0)
    g = MetricForm(conformally_flat_matrix(phi, m))
    R = riemann(g)
    P, _ = schouten_weyl(g, R)
    for q in range(1, m // 2 + 1):
        _, s, _ = lovelock_family(g, q, R)
        assert s == comb(m - q, q) * factorial(2 * q) * factorial(q) ** 2 * elem_sym(g, P.to_form(), q)


@pytest.mark.parametrize("deg", [2, 3, 4])
def test_riemann_keeps_degree_of_zero_second_derivatives(deg):
    # odd-degree hyperbolic jets have vanishing top second derivatives in some slots
    g = MetricForm(hyperbolic_ball_matrix(4, deg))
    R = riemann(g)
    assert {v.deg for v in R.comps.values()} == {deg - 2}
    assert R == metric_power(g, 2).scale(mpq(-1, 2)).truncate_y(deg - 2)
