import dataclasses
import random

import pytest
from gmpy2 import mpq

from lovelock_fg.couplings import CouplingError, Couplings
from lovelock_fg.curvature import SymTensor2, divergence, trace
from lovelock_fg.double_forms import MetricForm
from lovelock_fg.fg_expansion import ProductMetric, expand, residual_F
from lovelock_fg.models import flat_matrix, hyperbolic_ball_matrix, round_sphere_matrix
from lovelock_fg.randomgen import random_metric, random_metric_matrix, random_symmetric_matrix
from lovelock_fg.ring_jets import Jet, XSeries
from lovelock_fg.verify import (
    LIN_VARIANTS, _rhs, claimed_orders, divergence_identity, gauge_q_phi, generic_cross_check,
    lin_check, lovelock_residual, obstruction_divergence, residual_report, split_trace,
)


def random_pm(rng, n, N, deg, kappa=1):
    coeffs = [SymTensor2(random_metric_matrix(rng, n, deg))]
    coeffs += [SymTensor2(random_symmetric_matrix(rng, n, n, deg - k)) for k in range(1, N + 1)]
    return ProductMetric.from_coeffs(coeffs, kappa, N)


def ball_pm(n, N, deg):
    s = SymTensor2(round_sphere_matrix(n, deg))
    coeffs = [s, SymTensor2.zero(n), s.scale(mpq(-1, 2)), SymTensor2.zero(n), s.scale(mpq(1, 16))]
    return ProductMetric.from_coeffs(coeffs[:N + 1], 1, N)


# ---------------------------------------------------------- residual report

def test_report_ball_all_zero():
    e = expand(MetricForm(round_sphere_matrix(3, 6)), Couplings.einstein(3), 1, 6)
    rep = residual_report(e)
    assert rep.passed
    assert [b.observed for b in rep.blocks] == [None, None, None]
    doc = rep.to_json()
    assert doc["schema"] == "lovelock-fg/1" and doc["status"] == "pass"


def test_report_lovelock_random_n3():
    e = expand(random_metric(random.Random(0), 3, 5), Couplings.make(3, [1, mpq(1, 5)], "lovelock"), 1, 5)
    rep = residual_report(e)
    assert rep.passed
    assert all(b.observed is None for b in rep.blocks)
    assert claimed_orders(e) == {"dxdx": 4, "mixed": 4, "tangential": 4}


def test_claimed_orders_even_n():
    e = expand(random_metric(random.Random(3), 4, 5), Couplings.make(4, [1], "lovelock"), 1, 4)
    assert claimed_orders(e) == {"dxdx": 3, "mixed": 3, "tangential": 2}
    rep = residual_report(e)
    assert rep.passed
    assert rep["tangential"].observed == 3  # the obstruction


def test_claims_dropped_for_inconsistent_couplings():
    c = Couplings.make(3, [1, mpq(1, 5)], [mpq(1, 3), 0])
    e = expand(random_metric(random.Random(1), 3, 3), c, 1, 3)
    assert claimed_orders(e) == {"dxdx": None, "mixed": None, "tangential": None}


@pytest.mark.parametrize("alpha,beta,dxdx_order", [
    ([1, mpq(1, 5)], "lovelock", 1),
    ([1], [], 3),   # Einstein: the dx dx response to h2 vanishes (c0 = 0 at step 1)
])
def test_corrupted_h2_negative_control(alpha, beta, dxdx_order):
    n = 3
    h0 = random_metric(random.Random(1), n, 4)
    e = expand(h0, Couplings.make(n, alpha, beta), 1, 4)
    e.h_coeffs[2] = e.h_coeffs[2] + SymTensor2(h0.mat).scale(mpq(1, 3)).truncate_y(2)
    rep = residual_report(e)
    assert not rep.passed
    assert rep["dxdx"].observed == dxdx_order
    assert rep["tangential"].observed == 1


# ---------------------------------------------------------- cross-check

def test_cross_check_flat():
    pm = ProductMetric.from_coeffs([SymTensor2(flat_matrix(3, 4))], 1, 2)
    assert generic_cross_check(pm, mpq(1, 2))


def test_cross_check_ball():
    n = 3
    pm = ball_pm(n, 4, 4)
    res = generic_cross_check(pm, mpq(1, 3), couplings=Couplings.einstein(n))
    assert res.equal and res.residual_equal


@pytest.mark.parametrize("seed,n", [(0, 3), (1, 3), (2, 4)])
def test_cross_check_random(seed, n):
    pm = random_pm(random.Random(seed), n, 2, 4)
    res = generic_cross_check(pm, mpq(1, 2))
    assert res.equal and res.mismatches == 0


def test_cross_check_kappa_and_residual():
    pm = random_pm(random.Random(9), 3, 3, 5, kappa=mpq(3, 2))
    res = generic_cross_check(pm, mpq(2, 5), couplings=Couplings.make(3, [1, mpq(1, 4)], "lovelock"))
    assert res


def test_cross_check_rejects_boundary():
    with pytest.raises(ValueError):
        generic_cross_check(random_pm(random.Random(0), 3, 2, 4), 0)


# ------------------------------------------------------ gauge operators

def test_phi_vanishes_at_t_equal_g():
    n = 3
    g = random_metric(random.Random(4), n + 1, 3)
    c = Couplings.make(n, [1, mpq(1, 3)], [mpq(1, 5), 0])
    Phi, Q = gauge_q_phi(g, g, c)
    assert Phi.is_zero()
    assert Q == lovelock_residual(g, c)


@pytest.mark.parametrize("alpha,beta", [([1], []), ([1, mpq(1, 3)], "lovelock"), ([2, -1], [mpq(1, 7)])])
def test_q_vanishes_on_hyperbolic(alpha, beta):
    n = 3
    g = MetricForm(hyperbolic_ball_matrix(n + 1, 3))
    _, Q = gauge_q_phi(g, g, Couplings.make(n, alpha, beta))
    assert Q.is_zero()


def test_bianchi_bookkeeping_for_q():
    # Lovelock F is divergence free, so div Q = -div Phi
    n = 3
    rng = random.Random(8)
    g = random_metric(rng, n + 1, 4)
    t = random_metric(rng, n + 1, 4)
    c = Couplings.make(n, [1, mpq(1, 3)], "lovelock")
    Phi, Q = gauge_q_phi(g, t, c)
    dQ, dPhi = divergence(g, Q), divergence(g, Phi)
    assert not dPhi.is_zero()
    assert all(a == -b for a, b in zip(dQ, dPhi))


def test_split_trace():
    rng = random.Random(2)
    g0 = random_metric(rng, 4, 2)
    u, r0 = split_trace(g0, SymTensor2(g0.mat))
    assert u == 1 and r0.is_zero()
    r = SymTensor2(random_symmetric_matrix(rng, 4, 4, 2))
    u, r0 = split_trace(g0, r)
    assert trace(g0, r0) == 0
    assert SymTensor2(g0.mat).scale(u) + r0 == r
    u2, r1 = split_trace(g0, r0)
    assert u2 == 0 and r1 == r0


# ------------------------------------------------------- linearization

def _battery(n, q):
    e = [0] * q
    e[q - 1] = 1
    if n == 5 and q == 3:
        e[0] = 1   # pure top Lovelock is degenerate at n = 5
    return [("ric", Couplings.make(n, e, [])), ("scal", Couplings.make(n, e, [])),
            ("einstein", Couplings.make(n, e, [])), ("q_pure", Couplings.make(n, e, [mpq(1, 3)] * q)),
            ("q_mixed", Couplings.make(n, e, "lovelock"))]


@pytest.mark.parametrize("q", [1, 2])
def test_lin_check_n4(q):
    n = 4
    g0 = MetricForm(hyperbolic_ball_matrix(n + 1, 4))
    r = SymTensor2(random_symmetric_matrix(random.Random(q), n + 1, n + 1, 4))
    for which, c in _battery(n, q):
        res = lin_check(g0, r, c, which)
        assert res.passed, (which, res.diagnostic)


def test_lin_check_zero_direction():
    n = 4
    g0 = MetricForm(hyperbolic_ball_matrix(n + 1, 4))
    res = lin_check(g0, SymTensor2.zero(n + 1), Couplings.einstein(n), "einstein")
    assert res.passed and res.lhs.is_zero() and res.rhs.is_zero()


def test_lin_check_pure_trace_direction():
    # u g0 with a degree-2 jet u: only the (Delta + 2n)(u g0) part survives
    n = 4
    g0 = MetricForm(hyperbolic_ball_matrix(n + 1, 4))
    u = Jet.from_terms(n + 1, 4, {(2, 0, 0, 0, 0): 1, (1, 1, 0, 0, 0): mpq(1, 2), (0, 0, 0, 0, 0): 3})
    r = SymTensor2(g0.mat).scale(u)
    assert lin_check(g0, r, Couplings.make(n, [1, mpq(1, 7)], "lovelock"), "q_mixed").passed


def test_laplacian_sign_is_visible():
    # constant u: no Laplacian, so both sign conventions agree; a non-constant direction separates them
    n = 4
    g0 = MetricForm(hyperbolic_ball_matrix(n + 1, 4))
    c = Couplings.make(n, [1, mpq(1, 7)], "lovelock")
    r = SymTensor2(g0.mat).scale(mpq(2))
    assert _rhs(g0, r, c, "q_mixed") == _rhs(g0, r, c, "q_mixed", lap_sign=-1)
    r = SymTensor2(random_symmetric_matrix(random.Random(3), n + 1, n + 1, 4))
    assert _rhs(g0, r, c, "q_mixed") != _rhs(g0, r, c, "q_mixed", lap_sign=-1)


def test_lin_check_refuses_non_hyperbolic():
    n = 4
    g0 = random_metric(random.Random(0), n + 1, 4)
    with pytest.raises(ValueError, match="constant-curvature"):
        lin_check(g0, SymTensor2(g0.mat), Couplings.einstein(n), "ric")
    sphere = MetricForm(round_sphere_matrix(n + 1, 4))
    with pytest.raises(ValueError):
        lin_check(sphere, SymTensor2(sphere.mat), Couplings.einstein(n), "ric")


def test_lin_check_argument_errors():
    n = 4
    g0 = MetricForm(hyperbolic_ball_matrix(n + 1, 4))
    r = SymTensor2(g0.mat)
    with pytest.raises(ValueError, match="variant"):
        lin_check(g0, r, Couplings.einstein(n), "bogus")
    with pytest.raises(CouplingError):
        lin_check(g0, r, Couplings.einstein(n), "q_mixed")
    assert set(LIN_VARIANTS) == {"ric", "scal", "einstein", "q_pure", "q_mixed"}


# --------------------------------------------------- divergence identity

def test_divergence_identity_ball():
    ok, comps = divergence_identity(ball_pm(3, 4, 3), Couplings.make(3, [1, mpq(1, 3)], "lovelock"))
    assert ok and set(comps) == {"u=0", "u=1", "u=2", "u=3"}


@pytest.mark.parametrize("seed,n,alpha", [(0, 3, [1, mpq(1, 5)]), (1, 3, [1]), (2, 4, [1, mpq(-1, 4)])])
def test_divergence_identity_random_non_solution(seed, n, alpha):
    pm = random_pm(random.Random(seed), n, 3, 5)
    c = Couplings.make(n, alpha, "lovelock")
    G = residual_F(pm, c)
    assert not G.tangential.is_zero()   # genuinely not a solution
    ok, _ = divergence_identity(pm, c, G)
    assert ok


def test_divergence_identity_negative_control():
    n = 3
    pm = random_pm(random.Random(5), n, 3, 5)
    c = Couplings.make(n, [1], "lovelock")
    G = residual_F(pm, c)
    bumped = dataclasses.replace(G, dxdx=G.dxdx + XSeries.monomial(Jet.const(n, 2), 2, G.dxdx.trunc))
    ok, comps = divergence_identity(pm, c, bumped)
    assert not ok
    assert not comps["u=0"].is_zero()


def test_divergence_identity_needs_lovelock():
    with pytest.raises(CouplingError):
        divergence_identity(random_pm(random.Random(0), 3, 2, 4), Couplings.einstein(3))


def test_obstruction_divergence_n4():
    e = expand(random_metric(random.Random(3), 4, 5), Couplings.make(4, [1], "lovelock"), 1, 4)
    dO, B = obstruction_divergence(e)
    assert dO.is_zero()
    assert all(v == 0 for v in B)


def test_obstruction_divergence_needs_obstruction():
    e = expand(random_metric(random.Random(0), 3, 3), Couplings.einstein(3), 1, 3)
    with pytest.raises(ValueError):
        obstruction_divergence(e)
