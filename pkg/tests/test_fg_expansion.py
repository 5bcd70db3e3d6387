import json
import random

import pytest
from gmpy2 import mpq

from lovelock_fg.couplings import Couplings
from lovelock_fg.curvature import SymTensor2, schouten_weyl, trace
from lovelock_fg.double_forms import MetricForm
from lovelock_fg.fg_expansion import (
    MIXED_SIGN, Expansion, ProductMetric, UnsupportedRegime, closed_forms, expand,
    expected_linear_coeffs, linear_map, obstruction, residual_F,
)
from lovelock_fg.models import conformally_flat_matrix, flat_matrix, round_sphere_matrix
from lovelock_fg.randomgen import random_jet, random_metric, random_symmetric_matrix
from lovelock_fg.ring_jets import DegreeError, Jet, XSeries


def _zero_series(v):
    return (isinstance(v, int) and v == 0) or v.is_zero()


def _blocks_zero(G):
    parts = [G.dxdx, *G.mixed, *(v for r in G.tangential.mat for v in r)]
    return all(_zero_series(v) for v in parts)


def _square(P, g):
    m = g.dim
    return SymTensor2([[sum((P.mat[i][k] * g.inv[k][l] * P.mat[l][j] for k in range(m) for l in range(m)),
                            Jet.zero(P.mat[0][0].nv, P.mat[0][0].deg))
                        for j in range(m)] for i in range(m)])


# ----------------------------------------------------------- probe maps

@pytest.mark.parametrize("n", [3, 4])
@pytest.mark.parametrize("alpha", [[1], [1, mpq(1, 5)], [1, mpq(-2, 3)]])
def test_probe_full_basis(n, alpha):
    c = Couplings.make(n, alpha, "lovelock")
    for k in range(n - 1):
        lm = linear_map(c, 1, k, full_basis=True)
        assert lm.matches_closed_form()
        assert lm.lowest_order == k + 1


@pytest.mark.parametrize("kappa", [1, 3])
def test_probe_gb_family_n5(kappa):
    c = Couplings.gb_family(5, 2)
    for k in range(4):
        lm = linear_map(c, kappa, k)
        assert (lm.a, lm.b, lm.c0) == expected_linear_coeffs(c, kappa, k)


def test_probe_tensor_coefficient_vanishes_at_order_n():
    c = Couplings.make(4, [1, mpq(1, 3)], "lovelock")
    assert linear_map(c, 1, 3).a == 0


def test_trace_coefficient_never_zero():
    # (a + n b) - n kappa c0 = (kappa/2) A1 (n-1) (k+1)^2
    c = Couplings.gb_family(5, 2)
    for kappa in (1, 3):
        A1 = 6 * 3 * 2 * (2 - kappa)
        for k in range(6):
            lm = linear_map(c, kappa, k)
            assert lm.trace_coefficient(5, kappa) == mpq(kappa, 2) * A1 * 4 * (k + 1) ** 2


# ------------------------------------------------------ exact models

def test_round_sphere_is_hyperbolic_ball():
    n, N = 3, 6
    h0 = MetricForm(round_sphere_matrix(n, N))
    e = expand(h0, Couplings.einstein(n), 1, N)
    s = SymTensor2(h0.mat)
    # (1 - x^2/4)^2 h0
    want = {0: s, 2: s.scale(mpq(-1, 2)), 4: s.scale(mpq(1, 16))}
    for k, hk in enumerate(e.h_coeffs):
        if k in want:
            assert hk.truncate_y(N - k) == want[k].truncate_y(N - k)
        else:
            assert hk.is_zero()
    assert e.trace_hn == 0


@pytest.mark.parametrize("n", [3, 4])
def test_flat_boundary_gives_flat_expansion(n):
    e = expand(MetricForm(flat_matrix(n, 4)), Couplings.make(n, [1, mpq(1, 4)], "lovelock"), 1, 4)
    assert all(hk.is_zero() for hk in e.h_coeffs[1:])


@pytest.mark.parametrize("n,alpha,beta", [
    (3, [1], []),
    (3, [1, mpq(-1, 3)], "lovelock"),
    (3, [2, mpq(1, 5)], [mpq(-1, 7), mpq(1, 2)]),
    (5, [1, mpq(-1, 10), mpq(1, 100)], "lovelock"),
])
def test_hyperbolic_model_residual_vanishes(n, alpha, beta):
    N = 4
    s = SymTensor2(round_sphere_matrix(n, 2))
    coeffs = [s, SymTensor2.zero(n), s.scale(mpq(-1, 2)), SymTensor2.zero(n), s.scale(mpq(1, 16))]
    pm = ProductMetric.from_coeffs(coeffs, 1, N)
    G = residual_F(pm, Couplings.make(n, alpha, beta), xtrunc=N, ydeg=0)
    assert _blocks_zero(G)


def test_residual_detects_wrong_model():
    n, N = 3, 4
    s = SymTensor2(round_sphere_matrix(n, 2))
    coeffs = [s, SymTensor2.zero(n), s.scale(mpq(-1, 3)), SymTensor2.zero(n), s.scale(mpq(1, 16))]
    G = residual_F(ProductMetric.from_coeffs(coeffs, 1, N), Couplings.einstein(n), xtrunc=N, ydeg=0)
    assert not _blocks_zero(G)


def test_mixed_sign_pinned():
    assert MIXED_SIGN == -1


# ---------------------------------------------------- structure

@pytest.mark.parametrize("seed,n", [(0, 3), (1, 4), (2, 5)])
def test_parity(seed, n):
    h0 = random_metric(random.Random(seed), n, 4)
    e = expand(h0, Couplings.make(n, [1, mpq(1, 6)], "lovelock"), 1, 4 if n != 4 else 3)
    for k in range(1, min(n, e.N + 1), 2):
        assert e.h_coeffs[k].is_zero()


def test_conformally_flat_h4_is_quarter_P_squared():
    n = 5
    phi = random_jet(random.Random(11), n, 4, density=0.3, const=0)
    h0 = MetricForm(conformally_flat_matrix(phi, n))
    e = expand(h0, Couplings.einstein(n), 1, 4)
    P, _ = schouten_weyl(h0)
    assert e.h_coeffs[2] == P.scale(-1)
    g0 = MetricForm([[v.truncate(0) for v in r] for r in h0.mat])
    assert e.h_coeffs[4] == _square(P.truncate_y(0), g0).scale(mpq(1, 4))


@pytest.mark.parametrize("seed", [3, 4])
def test_closed_forms_match_recursion_n5(seed):
    n = 5
    h0 = random_metric(random.Random(seed), n, 4)
    c = Couplings.make(n, [1, mpq(1, 10)], "lovelock")
    e = expand(h0, c, 1, 4)
    cf = closed_forms(h0, c, 1, with_display=True)
    assert e.h_coeffs[2] == cf["h2"]
    assert e.h_coeffs[4] == cf["h4"]
    assert cf["h4_display"] == cf["h4"]
    assert cf["trace_h2"] == cf["trace_h2_formula"]
    g0 = MetricForm([[v.truncate(0) for v in r] for r in h0.mat])
    assert trace(g0, cf["h4"]) == cf["trace_h4"]


def test_closed_forms_h2_only_for_small_n():
    cf = closed_forms(random_metric(random.Random(0), 3, 2), Couplings.einstein(3), 1)
    assert "h4" not in cf and cf["trace_h2"] == cf["trace_h2_formula"]


def test_n3_trace_forced_and_free_data():
    n, N = 3, 5
    h0 = random_metric(random.Random(5), n, N)
    c = Couplings.make(n, [1, mpq(1, 5)], "lovelock")
    e0 = expand(h0, c, 1, N)
    assert e0.trace_hn == 0 and e0.h_coeffs[3].is_zero()
    # random tensor made pointwise trace-free with respect to h0
    rng = random.Random(6)
    T = random_symmetric_matrix(rng, n, n, N - 3)
    t = SymTensor2(T)
    g = MetricForm([[v.truncate(N - 3) for v in r] for r in h0.mat])
    tr = trace(g, t)
    tf = t - SymTensor2(g.mat).scale(tr * mpq(1, n))
    e1 = expand(h0, c, 1, N, hn_tf=tf)
    for k in range(3):
        assert e1.h_coeffs[k] == e0.h_coeffs[k]
    assert e1.h_coeffs[3] == tf
    assert e1.h_coeffs[5] != e0.h_coeffs[5]
    assert e1.free_data is tf


def test_n4_obstruction():
    n = 4
    h0 = random_metric(random.Random(3), n, 5)
    res = obstruction(h0, Couplings.make(n, [1], "lovelock"), 1)
    O = res["obstruction"]
    assert not O.is_zero() and res["expansion"].log_present
    g0 = MetricForm([[v.truncate(1) for v in r] for r in h0.mat])
    assert trace(g0, O) == 0


def test_n4_obstruction_vanishes_conformally_flat():
    n = 4
    phi = random_jet(random.Random(2), n, 5, density=0.3, const=0)
    h0 = MetricForm(conformally_flat_matrix(phi, n))
    res = obstruction(h0, Couplings.make(n, [1], "lovelock"), 1)
    assert res["obstruction"].is_zero() and not res["expansion"].log_present


# ------------------------------------------------------------ gates

def test_A1_zero_refused():
    with pytest.raises(UnsupportedRegime, match="A1"):
        expand(random_metric(random.Random(0), 5, 2), Couplings.gb_family(5, 1), 1, 2)


def test_non_root_refused():
    with pytest.raises(UnsupportedRegime, match="root"):
        expand(random_metric(random.Random(0), 3, 2), Couplings.einstein(3), 2, 2)


def test_hn_tf_only_for_odd_n():
    with pytest.raises(UnsupportedRegime):
        expand(random_metric(random.Random(0), 4, 4), Couplings.einstein(4), 1, 4, hn_tf=SymTensor2.zero(4))


def test_hn_tf_must_be_trace_free():
    h0 = random_metric(random.Random(0), 3, 4)
    with pytest.raises(ValueError, match="trace-free"):
        expand(h0, Couplings.einstein(3), 1, 4, hn_tf=SymTensor2(h0.mat).truncate_y(1))


def test_degree_gate():
    with pytest.raises(DegreeError, match="degree"):
        expand(random_metric(random.Random(0), 3, 3), Couplings.einstein(3), 1, 4)


def test_log_term_refused_past_n():
    with pytest.raises(UnsupportedRegime, match="log"):
        expand(random_metric(random.Random(3), 4, 5), Couplings.make(4, [1], "lovelock"), 1, 5)


def test_obstruction_needs_even_n():
    with pytest.raises(UnsupportedRegime):
        obstruction(random_metric(random.Random(0), 3, 3), Couplings.make(3, [1], "lovelock"), 1)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        expand(random_metric(random.Random(0), 3, 2), Couplings.einstein(4), 1, 2)


# ---------------------------------------------------- serialization

def test_expansion_json_roundtrip():
    h0 = random_metric(random.Random(1), 3, 4)
    e = expand(h0, Couplings.make(3, [1, mpq(1, 5)], "lovelock"), 1, 4)
    doc = json.loads(json.dumps(e.to_json()))
    assert doc["schema"] == "lovelock-fg/1"
    assert [c["order"] for c in doc["coeffs"]] == list(range(5))
    e2 = Expansion.from_json(doc)
    assert all(a == b for a, b in zip(e.h_coeffs, e2.h_coeffs))
    assert e2.to_json() == doc


def test_from_json_rejects_other_schema():
    with pytest.raises(ValueError):
        Expansion.from_json({"schema": "other"})


def test_product_metric_recenter_constant_term():
    h = [SymTensor2(round_sphere_matrix(3, 2)), SymTensor2.zero(3),
         SymTensor2(random_symmetric_matrix(random.Random(0), 3, 3, 0))]
    pm = ProductMetric.from_coeffs(h, 1, 2)
    x0 = mpq(1, 3)
    rc = pm.recenter(x0, 2)
    for i in range(3):
        for j in range(3):
            direct = pm.h[i][j]
            val = direct.evaluate(x0) if isinstance(direct, XSeries) else direct
            got = rc.h[i][j][0] if isinstance(rc.h[i][j], XSeries) else rc.h[i][j]
            assert got == val


# ------------------------------------------------------- float mode

def test_float_mode_irrational_root():
    n = 6
    c = Couplings.make(n, [1, mpq(-3, 10), mpq(-3, 1000)], "lovelock")
    from lovelock_fg.couplings import limsec
    root = limsec(c)[1]
    assert not root.is_rational
    h0 = random_metric(random.Random(0), n, 4)
    e = expand(h0, c, root, 2)
    cf = closed_forms(h0, c, root)
    diff = e.h_coeffs[2] - cf["h2"].truncate_y(2)
    assert max(float(v.max_abs()) for r in diff.mat for v in r if isinstance(v, Jet)) < 1e-12
    assert isinstance(e.kappa, float)
