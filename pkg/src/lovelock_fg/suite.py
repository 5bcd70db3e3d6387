"""Seeded desk-scale invariant suite behind ``lovelock-fg identities``.

Every check is small enough to run in seconds; results come back in a fixed
order so reports are byte-identical for a given seed.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from math import factorial
from typing import Any, Callable

from .couplings import Couplings, lambda_coeffs, limsec
from .curvature import SymTensor2, divergence, lovelock_family, ricci, riemann, trace
from .double_forms import MetricForm, contract, form_power, full_norm, metric_power
from .fg_expansion import ProductMetric, closed_forms, expand, linear_map, residual_F
from .models import hyperbolic_ball_matrix, product_matrix, round_sphere_matrix
from .randomgen import random_form, random_metric, random_metric_matrix, random_symmetric_matrix
from .ring_jets import Jet, XSeries, mpq
from .verify import (
    divergence_identity, generic_cross_check, lin_check, obstruction_divergence, residual_report,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def to_json(self) -> dict:
        return {"name": self.name, "status": "pass" if self.passed else "fail", "detail": self.detail}


def _scalar_metric(rng: random.Random, m: int) -> MetricForm:
    # constant metric, diagonally dominant
    M = [[mpq(0)] * m for _ in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            M[i][j] = M[j][i] = mpq(rng.randint(-2, 2), 3)
        M[i][i] = mpq(m + rng.randint(1, 3))
    return MetricForm(M)


def contraction_lemma(rng: random.Random) -> tuple[bool, str]:
    for _ in range(4):
        m = rng.randint(3, 5)
        g = _scalar_metric(rng, m)
        ell = rng.randint(1, 2) if m > 3 else 1
        w = random_form(rng, m, (ell, ell), density=0.6)
        if contract(g, w * g.form) != g.form * contract(g, w) + w.scale(m - 2 * ell):
            return False, f"part (0) at m={m}"
        k = rng.randint(1, 2)
        lhs = contract(g, metric_power(g, k) * w)
        rhs = metric_power(g, k) * contract(g, w) + (metric_power(g, k - 1) * w).scale(k * (m - 2 * ell - k + 1))
        if lhs != rhs:
            return False, f"part (1) at m={m}, k={k}"
    return True, "parts (0) and (1) on random forms"


def metric_power_traces(rng: random.Random) -> tuple[bool, str]:
    for m in range(1, 7):
        g = MetricForm([[mpq(int(i == j)) for j in range(m)] for i in range(m)])
        for k in range(m + 1):
            v = contract(g, metric_power(g, k), k).scalar_value() if k else mpq(1)
            if v != factorial(k) * factorial(m) // factorial(m - k):
                return False, f"C^k(g^k) at k={k}, m={m}"
    return True, "C^k(g^k) = k! m!/(m-k)! for k <= m <= 6"


def constant_curvature(rng: random.Random) -> tuple[bool, str]:
    for n in (3, 4):
        g = MetricForm(hyperbolic_ball_matrix(n + 1, 2))
        R = riemann(g)
        if R != metric_power(g, 2).scale(mpq(-1, 2)):
            return False, f"R != -g^2/2 at n={n}"
        gs = SymTensor2(g.mat)
        for q, lq in enumerate(lambda_coeffs(n), start=1):
            ric, scal, E = lovelock_family(g, q, R)
            if ric != gs.scale(lq) or scal != (n + 1) * lq or E != gs.scale((1 - mpq(n + 1, 2 * q)) * lq):
                return False, f"Lovelock eigenvalues at n={n}, q={q}"
    return True, "hyperbolic jets, n = 3, 4"


def ell4_identity(rng: random.Random) -> tuple[bool, str]:
    g = random_metric(rng, 5, 2)
    R = riemann(g)
    _, s4, _ = lovelock_family(g, 2, R)
    ric = ricci(g, R)
    sc = trace(g, ric)
    ok = s4 == 6 * (full_norm(g, R) - 4 * full_norm(g, ric.to_form()) + sc * sc)
    return ok, "m = 5"


def dimensional_vanishing(rng: random.Random) -> tuple[bool, str]:
    g = random_metric(rng, 4, 2)
    R = riemann(g)
    if not form_power(R, 3).is_zero():
        return False, "R^3 in dimension 4"
    h = random_metric_matrix(rng, 2, 2, nv=2)
    gp = MetricForm(product_matrix(h, 2))
    _, _, E = lovelock_family(gp, 2, riemann(gp))
    return E.is_zero(), "R^3 = 0 at m = 4; E^(4) of surface x flat T^2"


def second_bianchi(rng: random.Random) -> tuple[bool, str]:
    g = random_metric(rng, 4, 3)
    R = riemann(g)
    for q in (1, 2):
        _, _, E = lovelock_family(g, q, R)
        if not divergence(g, E).is_zero():
            return False, f"div E^(2q) at q={q}"
    return True, "m = 4, q = 1, 2"


def limsec_gb_family(rng: random.Random) -> tuple[bool, str]:
    want = {mpq(2): [1, 3], mpq(3, 2): [1, 2], mpq(1): [], mpq(1, 4): [1]}
    for a, roots in want.items():
        got = [r.exact for r in limsec(Couplings.gb_family(5, a))]
        if got != [mpq(v) for v in roots]:
            return False, f"a={a}: {got}"
    return [r.exact for r in limsec(Couplings.einstein(5))] == [1], "a in {2, 3/2, 1, 1/4}; Einstein"


def hyperbolic_ball(rng: random.Random) -> tuple[bool, str]:
    n, N = 3, 6
    h0 = MetricForm(round_sphere_matrix(n, N))
    e = expand(h0, Couplings.einstein(n), 1, N)
    s = SymTensor2(h0.mat)
    want = [s, None, s.scale(mpq(-1, 2)), None, s.scale(mpq(1, 16)), None, None]
    for k, (got, w) in enumerate(zip(e.h_coeffs, want)):
        if (w is None and not got.is_zero()) or (w is not None and got.truncate_y(N - k) != w.truncate_y(N - k)):
            return False, f"h_{k}"
    return residual_report(e).passed, "round sphere, n = 3, N = 6"


def h2_h4_equivalence(rng: random.Random) -> tuple[bool, str]:
    n = 5
    h0 = random_metric(rng, n, 4)
    c = Couplings.gb_family(n, 2)
    e = expand(h0, c, 1, 4)
    cf = closed_forms(h0, c, 1)
    ok = e.h_coeffs[2] == cf["h2"] and e.h_coeffs[4] == cf["h4"] and cf["trace_h2"] == cf["trace_h2_formula"]
    return ok and e.h_coeffs[1].is_zero() and e.h_coeffs[3].is_zero(), "n = 5, Gauss-Bonnet family a = 2"


def probe_maps(rng: random.Random) -> tuple[bool, str]:
    for n in (3, 4):
        c = Couplings.make(n, [1, mpq(rng.randint(1, 9), 10)], "lovelock")
        for k in range(n - 1):
            if not linear_map(c, 1, k, full_basis=True).matches_closed_form():
                return False, f"n={n}, k+1={k + 1}"
    return True, "full symmetric basis, n = 3, 4"


def obstruction_n4(rng: random.Random) -> tuple[bool, str]:
    n = 4
    h0 = random_metric(rng, n, 5)
    e = expand(h0, Couplings.make(n, [1], "lovelock"), 1, 4)
    O = e.obstruction
    tr = trace(MetricForm([[v.truncate(1) for v in r] for r in h0.mat]), O)
    dO, B = obstruction_divergence(e)
    ok = tr == 0 and not O.is_zero() and dO.is_zero() and all(v == 0 for v in B)
    return ok, "trace-free, divergence matches the log coefficient"


def cross_check(rng: random.Random) -> tuple[bool, str]:
    n = 3
    coeffs = [SymTensor2(random_metric_matrix(rng, n, 4))] + \
        [SymTensor2(random_symmetric_matrix(rng, n, n, 4 - k)) for k in range(1, 3)]
    pm = ProductMetric.from_coeffs(coeffs, 1, 2)
    res = generic_cross_check(pm, mpq(1, 2))
    return res.equal, f"n = 3, {res.mismatches} mismatches"


def divergence_identity_check(rng: random.Random) -> tuple[bool, str]:
    n = 3
    coeffs = [SymTensor2(random_metric_matrix(rng, n, 5))] + \
        [SymTensor2(random_symmetric_matrix(rng, n, n, 5 - k)) for k in range(1, 4)]
    pm = ProductMetric.from_coeffs(coeffs, 1, 3)
    ok, _ = divergence_identity(pm, Couplings.make(n, [1, mpq(1, 5)], "lovelock"))
    return ok, "random non-solution, n = 3"


def linearization(rng: random.Random) -> tuple[bool, str]:
    n = 4
    g0 = MetricForm(hyperbolic_ball_matrix(n + 1, 4))
    r = SymTensor2(random_symmetric_matrix(rng, n + 1, n + 1, 4))
    cases = [("ric", Couplings.make(n, [1], [])), ("scal", Couplings.make(n, [1], [])),
             ("einstein", Couplings.make(n, [1], [])), ("q_pure", Couplings.make(n, [1], [mpq(1, 3)])),
             ("q_mixed", Couplings.make(n, [1, mpq(1, 7)], "lovelock"))]
    for which, c in cases:
        res = lin_check(g0, r, c, which)
        if not res.passed:
            return False, f"{which}: {res.diagnostic or 'mismatch'}"
    return True, "all five variants, n = 4"


def hyperbolic_residual(rng: random.Random) -> tuple[bool, str]:
    n, N = 3, 4
    h0 = SymTensor2(round_sphere_matrix(n, N))
    coeffs = [h0, SymTensor2.zero(n), h0.scale(mpq(-1, 2)), SymTensor2.zero(n), h0.scale(mpq(1, 16))]
    pm = ProductMetric.from_coeffs(coeffs, 1, N)
    for c in (Couplings.einstein(n), Couplings.make(n, [1, mpq(1, 3)], "lovelock"),
              Couplings.make(n, [1, mpq(-2, 5)], [mpq(1, 7), mpq(-1, 9)])):
        G = residual_F(pm, c, xtrunc=N, ydeg=0)
        parts = [G.dxdx] + list(G.mixed) + [v for r in G.tangential.mat for v in r]
        if not all(isinstance(v, int) and v == 0 or (isinstance(v, XSeries) and v.is_zero())
                   or (isinstance(v, Jet) and v.is_zero()) for v in parts):
            return False, f"alpha={c.alpha}"
    return True, "x-series residual of the hyperbolic model, 3 coupling vectors"


CHECKS: list[tuple[str, Callable[[random.Random], tuple[bool, str]]]] = [
    ("double_forms.contraction_lemma", contraction_lemma),
    ("double_forms.metric_power_traces", metric_power_traces),
    ("curvature.constant_curvature", constant_curvature),
    ("curvature.ell4_identity", ell4_identity),
    ("curvature.dimensional_vanishing", dimensional_vanishing),
    ("curvature.second_bianchi", second_bianchi),
    ("couplings.limsec_gb_family", limsec_gb_family),
    ("fg_expansion.hyperbolic_ball", hyperbolic_ball),
    ("fg_expansion.hyperbolic_residual", hyperbolic_residual),
    ("fg_expansion.h2_h4_closed_forms", h2_h4_equivalence),
    ("fg_expansion.probe_maps", probe_maps),
    ("fg_expansion.obstruction_n4", obstruction_n4),
    ("verify.generic_cross_check", cross_check),
    ("verify.divergence_identity", divergence_identity_check),
    ("verify.lin_check", linearization),
]


def run_suite(seed: int = 0, only: list[str] | None = None) -> list[CheckResult]:
    """Run the checks in order; each gets its own RNG derived from ``seed`` and its name."""
    out = []
    for name, fn in CHECKS:
        if only and name not in only:
            continue
        rng = random.Random(f"{seed}:{name}")
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail))
    return out


__all__ = ["CheckResult", "CHECKS", "run_suite"]
