"""Independent checks: residual orders, generic-curvature oracles, gauge terms, linearizations.

Nothing here feeds back into the solver; every check recomputes what it needs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .couplings import CouplingError, Couplings, coeff_functions, lambda_coeffs
from .curvature import _add, _mul, _neg, _part  # zero-aware ring helpers
from .curvature import (
    OneForm, SymTensor2, christoffel, div_star, divergence, gravitation, laplacian,
    lovelock_contractions, riemann, trace,
)
from .double_forms import MetricForm, lower_first, mat_inverse, metric_power, raise_first
from .fg_expansion import (
    Expansion, ProductMetric, ResidualBlocks, product_curvature_blocks, residual_F,
)
from .ring_jets import FLOAT, Dual, Jet, Q, XSeries, eps_part, format_rational, is_zero, mpq

__all__ = [
    "BlockOrder", "ResidualReport", "residual_report", "generic_cross_check", "CrossCheck",
    "lovelock_residual", "gauge_q_phi", "split_trace", "lin_check", "LinCheck",
    "divergence_identity", "obstruction_divergence", "one_form_divergence",
]


def _z(v: Any) -> bool:
    return isinstance(v, int) and v == 0


def _max_abs(v: Any) -> Any:
    if _z(v):
        return mpq(0)
    if isinstance(v, Jet):
        return v.max_abs()
    if isinstance(v, XSeries):
        return max((_max_abs(c) for c in v.coeffs), default=mpq(0))
    return abs(v)


def _small(v: Any, tol: float | None) -> bool:
    if tol is None:
        return is_zero(v)
    return float(_max_abs(v)) <= tol


# ------------------------------------------------------------ residual report

@dataclass
class BlockOrder:
    """Vanishing data of one residual block of ``x F_g`` (normalized orders)."""

    block: str
    observed: int | None        # lowest nonvanishing normalized order; None = zero through ``through``
    through: int
    claimed: int | None         # claimed: zero through this normalized order
    max_abs: Any

    @property
    def ok(self) -> bool:
        if self.claimed is None:
            return True
        return self.observed is None or self.observed > self.claimed

    def to_json(self) -> dict:
        return {
            "name": f"residual.{self.block}",
            "status": "pass" if self.ok else "fail",
            "observed_order": self.observed,
            "through": self.through,
            "expected_order": self.claimed,
            "max_abs": float(self.max_abs) if isinstance(self.max_abs, FLOAT) else format_rational(self.max_abs),
        }


@dataclass
class ResidualReport:
    blocks: list[BlockOrder]
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(b.ok for b in self.blocks)

    def __getitem__(self, name: str) -> BlockOrder:
        for b in self.blocks:
            if b.block == name:
                return b
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"schema": "lovelock-fg/1", "kind": "residual_report",
                "status": "pass" if self.passed else "fail",
                "checks": [b.to_json() for b in self.blocks], "notes": list(self.notes)}


def _series_orders(slots: list[list[Any]], tol: float | None) -> tuple[int | None, Any]:
    """``slots[s]`` lists the entries at G-slot s; returns (lowest nonzero normalized order, max abs)."""
    first = None
    biggest: Any = mpq(0)
    for s, vals in enumerate(slots):
        bad = [v for v in vals if not _small(v, tol)]
        if bad and first is None:
            first = s - 1
            biggest = max(_max_abs(v) for v in bad)
    return first, biggest


def claimed_orders(e: Expansion) -> dict[str, int | None]:
    """Normalized orders through which each block is claimed to vanish.

    Only consistent systems carry claims: Lovelock beta, or the pure q = 1 case.
    """
    n, c = e.n, e.couplings
    top = e.N - 1
    if not (c.lovelock or c.active() == [1]):
        return {"dxdx": None, "mixed": None, "tangential": None}
    mixed = top if c.lovelock else None
    if n % 2 == 0 and e.N >= n:
        lim = min(top, n - 1)
        return {"dxdx": lim, "mixed": lim if c.lovelock else None, "tangential": n - 2}
    if e.free_data is not None and not e.free_data.is_zero() and mixed is not None:
        mixed = min(mixed, n - 1)
    return {"dxdx": top, "mixed": mixed, "tangential": top}


def residual_report(e: Expansion, tol: float | None = None, G: ResidualBlocks | None = None) -> ResidualReport:
    """Recompute ``x^2 F_g`` from the coefficients and tabulate the normalized orders."""
    if isinstance(e.kappa, FLOAT) and tol is None:
        tol = 1e-9
    pm = e.product_metric()
    G = residual_F(pm, e.couplings) if G is None else G
    N = G.trunc
    at = lambda s, k: s[k] if isinstance(s, XSeries) else 0  # noqa: E731
    blocks = {
        "dxdx": [[at(G.dxdx, k)] for k in range(N + 1)],
        "mixed": [[at(s, k) for s in G.mixed] for k in range(N + 1)],
        "tangential": [[at(v, k) for r in G.tangential.mat for v in r] for k in range(N + 1)],
    }
    claims = claimed_orders(e)
    out = []
    for name, slots in blocks.items():
        obs, big = _series_orders(slots, tol)
        out.append(BlockOrder(name, obs, N - 1, claims[name], big))
    notes = []
    if e.obstruction is not None and not e.obstruction.is_zero():
        notes.append(f"n even: trace-free residual at normalized order {e.n - 1} is the obstruction")
    return ResidualReport(out, notes)


# ------------------------------------------------------ generic curvature oracle

def _lift(j: Any, nv: int, deg: int) -> Any:
    """Boundary jet as a jet in (t, y), t first."""
    if _z(j):
        return Jet.zero(nv, deg)
    if not isinstance(j, Jet):
        return Jet.const(nv, deg).scale(Q(j))
    return Jet.from_terms(nv, deg, {(0,) + e: v for e, v in j.terms() if sum(e) <= deg})


def _restrict(j: Any, nv: int) -> Any:
    """The t-independent part of a (t, y)-jet, as a boundary jet."""
    if not isinstance(j, Jet):
        return j
    return Jet.from_terms(nv, j.deg, {e[1:]: v for e, v in j.terms() if e[0] == 0})


def full_metric_jet(pm: ProductMetric, x0: Any, deg: int) -> MetricForm:
    """``x^-2 (dx^2/kappa + h(x))`` as an (n+1)-variable jet around ``(x0, 0)``."""
    if pm.center is not None:
        raise ValueError("expects an x-series metric")
    x0 = Q(x0)
    if x0 == 0:
        raise ValueError("x0 = 0 is on the boundary, where the metric is singular")
    n, m = pm.n, pm.n + 1
    t = Jet.var(m, deg, 0)
    x = t + x0
    xinv2 = (x * x).inverse()
    xp = [Jet.const(m, deg)]
    for _ in range(pm.N):
        xp.append(xp[-1] * x)
    mat: list = [[Jet.zero(m, deg) for _ in range(m)] for _ in range(m)]
    mat[0][0] = xinv2.scale(mpq(1) / Q(pm.kappa))
    for i in range(n):
        for j in range(n):
            acc = Jet.zero(m, deg)
            for k, c in enumerate(pm.h[i][j].coeffs):
                if not _z(c):
                    acc = acc + _lift(c, m, deg) * xp[k]
            mat[i + 1][j + 1] = acc * xinv2
    return MetricForm(mat)


@dataclass
class CrossCheck:
    equal: bool
    mismatches: int
    max_diff: Any
    residual_equal: bool | None = None

    def __bool__(self) -> bool:
        return self.equal and self.residual_equal is not False

    def to_json(self) -> dict:
        return {"name": "generic_cross_check", "status": "pass" if bool(self) else "fail",
                "mismatches": self.mismatches, "max_diff": format_rational(self.max_diff),
                "residual_equal": self.residual_equal}


def generic_cross_check(pm: ProductMetric, x0: Any = mpq(1, 2), deg: int | None = None,
                        couplings: Couplings | None = None) -> CrossCheck:
    """Product-gauge curvature vs generic ``riemann`` of the full metric jet at ``x = x0``.

    The product-gauge side runs the same block code on the Taylor series of ``h``
    in ``x - x0``; only its constant term is used, and that term is exact.
    With ``couplings`` the residual ``F_g`` is compared as well.
    """
    x0 = Q(x0)
    if x0 == 0:
        raise ValueError("x0 = 0 is on the boundary, where the metric is singular")
    n, m = pm.n, pm.n + 1
    if deg is None:
        deg = min(c.deg for r in pm.h for s in r for c in s.coeffs if isinstance(c, Jet))
    if deg < 2:
        raise ValueError("the cross-check needs boundary jets of degree >= 2")
    g = full_metric_jet(pm, x0, deg)
    R = riemann(g)
    local = pm.recenter(x0, 2)
    blocks = product_curvature_blocks(local)
    Rt = blocks.assemble()
    scale = mpq(1) / x0 ** 4
    d = deg - 2
    mism, big = 0, mpq(0)
    keys = set(R.comps) | set(Rt.comps)
    for k in keys:
        a = _restrict(R.comps.get(k, 0), n)
        b = Rt.comps.get(k, 0)
        b = b[0] * scale if isinstance(b, XSeries) else 0
        a = a.truncate(d) if isinstance(a, Jet) else a
        b = b.truncate(d) if isinstance(b, Jet) else b
        diff = (a - b) if not _z(b) else a
        if not is_zero(diff):
            mism += 1
            big = max(big, _max_abs(diff))
    res_eq = None
    if couplings is not None:
        F = lovelock_residual(g, couplings, R)
        G = residual_F(local, couplings)
        s2 = mpq(1) / x0 ** 2
        full = [[G.dxdx] + list(G.mixed)] + [[G.mixed[i]] + list(G.tangential.mat[i]) for i in range(n)]
        res_eq = True
        for i in range(m):
            for j in range(m):
                a = _restrict(F.mat[i][j], n)
                a = a.truncate(d) if isinstance(a, Jet) else a
                b = full[i][j]
                b = b[0] * s2 if isinstance(b, XSeries) else 0
                b = b.truncate(d) if isinstance(b, Jet) else b
                if not is_zero(a - b if not _z(b) else a):
                    res_eq = False
    return CrossCheck(mism == 0, mism, big, res_eq)


# ------------------------------------------------------------- generic residual

def lovelock_residual(g: MetricForm, c: Couplings, R: Any = None) -> SymTensor2:
    """``F_g = sum alpha_q (Ric^(2q) - lambda g) + beta_q (scal^(2q) - (n+1) lambda) g``."""
    n = c.n
    if g.dim != n + 1:
        raise CouplingError(f"couplings for n={n} need an (n+1)={n + 1} dimensional metric")
    R = riemann(g) if R is None else R
    qs = c.active()
    lc = lovelock_contractions(raise_first(g.inv, R), qs)
    lam = lambda_coeffs(n)
    gs = SymTensor2(g.mat)
    out = SymTensor2.zero(n + 1)
    for q in qs:
        a, b = c.alpha[q - 1], c.beta[q - 1]
        ric_s, scal = lc[q]
        ric = SymTensor2.from_form(lower_first(g.mat, ric_s))
        coef = -a * lam[q - 1] - b * (n + 1) * lam[q - 1]
        if a != 0:
            out = out + ric.scale(a)
        s = coef if (b == 0 or _z(scal)) else scal * b + coef
        out = out + gs.scale(s)
    return out


def one_form_divergence(g: MetricForm, w: OneForm, gam: list | None = None) -> Any:
    """``delta w = -g^{jk} w_{j,k}``."""
    m = g.dim
    gam = christoffel(g) if gam is None else gam
    acc: Any = 0
    for j in range(m):
        for k in range(m):
            gjk = g.inv[j][k]
            if is_zero(gjk):
                continue
            v = _part(w[j], k)
            for l in range(m):
                v = _add(v, _neg(_mul(gam[l][k][j], w[l])))
            acc = _add(acc, _mul(gjk, v))
    return _neg(acc)


def _apply_inverse(g: MetricForm, t: MetricForm, w: OneForm) -> OneForm:
    m = g.dim
    tw = [sum((t.inv[j][k] * w[k] for k in range(m) if not (_z(w[k]) or is_zero(t.inv[j][k]))), 0)
          for j in range(m)]
    return OneForm([sum((g.mat[i][j] * tw[j] for j in range(m) if not (_z(tw[j]) or is_zero(g.mat[i][j]))), 0)
                    for i in range(m)])


def gauge_q_phi(g: MetricForm, t: MetricForm, c: Couplings, R: Any = None) -> tuple[SymTensor2, SymTensor2]:
    """``(Phi(g, t), Q(g, t) = F_g - Phi(g, t))``."""
    n, m = c.n, g.dim
    if m != n + 1:
        raise CouplingError(f"couplings for n={n} need an (n+1)={n + 1} dimensional metric")
    gam = christoffel(g)
    gt = gravitation(g, 1, SymTensor2(t.mat))
    w = _apply_inverse(g, t, divergence(g, gt, gam))
    lam = lambda_coeffs(n)
    dstar = div_star(g, w, gam)
    dw = one_form_divergence(g, w, gam)
    gs = SymTensor2(g.mat)
    Phi = SymTensor2.zero(m)
    for q in c.active():
        a, b = c.alpha[q - 1], c.beta[q - 1]
        f = -lam[q - 1] / (n * (n - 1))
        c1 = a * (n - 2 * q + 1)
        c2 = -(a * (q - 1) + b * (n - 1) * q)
        if c1 != 0:
            Phi = Phi + dstar.scale(f * c1)
        if c2 != 0 and not _z(dw):
            Phi = Phi + gs.scale(dw * (f * c2))
    F = lovelock_residual(g, c, R)
    return Phi, F - Phi


def split_trace(g0: MetricForm, r: SymTensor2) -> tuple[Any, SymTensor2]:
    """``r = u g0 + r0`` with ``C_g0(r0) = 0``."""
    u = trace(g0, r)
    if is_zero(u):
        return u, r
    u = u * mpq(1, g0.dim)
    return u, r - SymTensor2(g0.mat).scale(u)


# ------------------------------------------------------------- linearizations

@dataclass
class LinCheck:
    which: str
    passed: bool
    lhs: SymTensor2
    rhs: SymTensor2
    diagnostic: str | None = None

    def __bool__(self) -> bool:
        return self.passed

    def to_json(self) -> dict:
        return {"name": f"lin_check.{self.which}", "status": "pass" if self.passed else "fail",
                "diagnostic": self.diagnostic}


LIN_VARIANTS = ("ric", "scal", "einstein", "q_pure", "q_mixed")


def _require_hyperbolic(g0: MetricForm) -> Any:
    R = riemann(g0)
    if R != metric_power(g0, 2).scale(mpq(-1, 2)).truncate_y(_deg(R)):
        raise ValueError("lin_check needs a constant-curvature -1 jet (R = -g^2/2 exactly)")
    return R


def _deg(w: Any) -> int:
    ds = [v.deg for v in w.comps.values() if isinstance(v, Jet)]
    return min(ds) if ds else 0


def _family(t: SymTensor2, c: Couplings, which: str, g0: MetricForm) -> SymTensor2:
    """The map whose first variation is checked, evaluated at the metric ``t``."""
    n = c.n
    g = MetricForm(t.mat)
    R = riemann(g)
    lam = lambda_coeffs(n)
    gs = SymTensor2(g.mat)
    if which in ("q_pure", "q_mixed"):
        return gauge_q_phi(g, g0, c, R)[1]
    qs = c.active()
    lc = lovelock_contractions(raise_first(g.inv, R), qs)
    out = SymTensor2.zero(n + 1)
    for q in qs:
        a = c.alpha[q - 1]
        ric_s, scal = lc[q]
        lq = lam[q - 1]
        if which == "ric":
            val = SymTensor2.from_form(lower_first(g.mat, ric_s)) - gs.scale(lq)
        elif which == "scal":
            val = gs.scale(scal - (n + 1) * lq)
        else:
            ric = SymTensor2.from_form(lower_first(g.mat, ric_s))
            val = gravitation(g, q, ric) - gs.scale((1 - mpq(n + 1, 2 * q)) * lq)
        out = out + val.scale(a)
    return out


def _rhs(g0: MetricForm, r: SymTensor2, c: Couplings, which: str, lap_sign: int = 1) -> SymTensor2:
    n = c.n
    lam = lambda_coeffs(n)
    gam = christoffel(g0)
    gs = SymTensor2(g0.mat)

    def lap(v: Any) -> Any:
        out = laplacian(g0, v, gam)
        if lap_sign < 0:
            return -out
        return out

    Cr = trace(g0, r)
    dG = divergence(g0, gravitation(g0, 1, r), gam)
    ddG = one_form_divergence(g0, dG, gam)
    dsdG = div_star(g0, dG, gam)
    LC = lap(Cr)
    Lr = lap(r)
    scal_part = LC * mpq(1, 2) + ddG            # 1/2 Delta C(r) + delta delta G(r)
    ten_part = Lr.scale(mpq(1, 2)) - dsdG - r    # 1/2 Delta r - delta* delta G(r) - r
    out = SymTensor2.zero(n + 1)
    if which in ("ric", "scal", "einstein"):
        for q in c.active():
            a, lq = c.alpha[q - 1], lam[q - 1]
            if which == "ric":
                val = (gs.scale(Cr * (2 * q - n * q - 1) - scal_part * (q - 1))
                       - ten_part.scale(n - 2 * q + 1)).scale(lq / (n * (n - 1)))
            elif which == "scal":
                val = gs.scale(Cr * n + scal_part).scale(-q * lq / n)
            else:
                val = (gs.scale((scal_part + Cr * (n - 2)) * mpq(1, 2)) - ten_part).scale(
                    (n - 2 * q + 1) * lq / (n * (n - 1)))
            out = out + val.scale(a)
        return out
    u, r0 = split_trace(g0, r)
    ug = gs.scale(u) if not is_zero(u) else SymTensor2.zero(n + 1)
    pure = lap(ug) + ug.scale(2 * n)            # (Delta + 2n)(u g0)
    free = lap(r0) - r0.scale(2)                # (Delta - 2)(r0)
    if which == "q_mixed":
        A1 = coeff_functions(c, mpq(1)).A1()
        return (pure.scale(-(n - 1)) + free.scale(2)).scale(A1 / 4)
    for q in c.active():
        a, b, lq = c.alpha[q - 1], c.beta[q - 1], lam[q - 1]
        val = pure.scale(q * (n - 1) * (a + (n + 1) * b)) + free.scale((n - 2 * q + 1) * a)
        out = out + val.scale(-lq / (2 * n * (n - 1)))
    return out


def _common(a: SymTensor2, b: SymTensor2) -> tuple[SymTensor2, SymTensor2]:
    ds = [v.deg for t in (a, b) for r in t.mat for v in r if isinstance(v, Jet)]
    if not ds:
        return a, b
    d = min(ds)
    return a.truncate_y(d), b.truncate_y(d)


def lin_check(g0: MetricForm, r: SymTensor2, c: Couplings, which: str) -> LinCheck:
    """Probe derivative of the named map at the hyperbolic jet ``g0`` vs the printed formula."""
    if which not in LIN_VARIANTS:
        raise ValueError(f"unknown variant {which!r}; expected one of {LIN_VARIANTS}")
    if g0.dim != c.n + 1:
        raise CouplingError("g0 must have dimension n + 1")
    if which == "q_mixed" and not c.lovelock:
        raise CouplingError("q_mixed needs beta_q = -alpha_q/(2q)")
    _require_hyperbolic(g0)
    base = SymTensor2(g0.mat)
    lifted = SymTensor2([[Dual(base.mat[i][j], r.mat[i][j]) for j in range(base.dim)]
                         for i in range(base.dim)])
    val = _family(lifted, c, which, g0)
    lhs = val.map(lambda v: eps_part(v) if isinstance(v, Dual) else 0)
    rhs = _rhs(g0, r, c, which)
    lhs, rhs = _common(lhs, rhs)
    if lhs == rhs:
        return LinCheck(which, True, lhs, rhs)
    alt = _rhs(g0, r, c, which, lap_sign=-1)
    lhs2, alt = _common(lhs, alt)
    diag = "laplacian sign convention flipped" if lhs2 == alt else None
    return LinCheck(which, False, lhs, rhs, diag)


# ------------------------------------------------------------- divergence identity

def _xseries_metric(pm: ProductMetric) -> tuple[MetricForm, list, Any]:
    h = pm.h
    hinv = mat_inverse(h)
    gm = MetricForm(h, hinv)
    hp = [[s.derive_x() for s in r] for r in h]
    n = pm.n
    trp: Any = 0
    for i in range(n):
        for j in range(n):
            p = hinv[i][j] * hp[j][i]
            trp = p if _z(trp) else trp + p
    return gm, hp, trp


def divergence_identity(pm: ProductMetric, c: Couplings, G: ResidualBlocks | None = None
                        ) -> tuple[bool, dict]:
    """Both components of ``div_g F_g = 0`` written in product gauge, termwise in x.

    With ``G = x^2 F_g`` the tangential (u = l) component reads
    ``kappa (x G0l' - (n+1) G0l + x tr(h^-1 h') G0l / 2) + x h^{ij} G_{jl;i} = 0``
    and the u = 0 component
    ``kappa (x G00' - n G00 + x tr(h^-1 h') G00 / 2) - x h^ij h^kl h'_li G_jk / 2
    + h^jk G_jk - x delta_h(G_0.) = 0``.
    """
    if not c.lovelock:
        raise CouplingError("the divergence identity needs beta_q = -alpha_q/(2q)")
    n, kap = pm.n, pm.kappa
    G = residual_F(pm, c) if G is None else G
    gm, hp, trp = _xseries_metric(pm)
    gam = christoffel(gm)
    half = mpq(1, 2)

    def radial(s: Any, w: int) -> Any:
        if _z(s):
            return 0
        return (pm.xmul(s.derive_x(), 1) - s * w + pm.xmul(trp * s, 1) * half) * kap

    divT = divergence(gm, G.tangential, gam)
    comps: dict = {}
    for l in range(n):
        lhs = radial(G.mixed[l], n + 1)
        d = divT[l]
        term = pm.xmul(d, 1) * -1 if not _z(d) else 0
        comps[f"u={l + 1}"] = _sum0(lhs, term)
    hinv = gm.inv
    quad: Any = 0
    trG: Any = 0
    for j in range(n):
        for k in range(n):
            gjk = G.tangential.mat[j][k]
            if _z(gjk):
                continue
            trG = _sum0(trG, hinv[j][k] * gjk)
            acc: Any = 0
            for i in range(n):
                for l in range(n):
                    acc = _sum0(acc, hinv[i][j] * hinv[k][l] * hp[l][i])
            quad = _sum0(quad, acc * gjk)
    dw = one_form_divergence(gm, OneForm(G.mixed), gam)
    lhs0 = radial(G.dxdx, n)
    lhs0 = _sum0(lhs0, pm.xmul(quad, 1) * -half if not _z(quad) else 0)
    lhs0 = _sum0(lhs0, trG)
    lhs0 = _sum0(lhs0, pm.xmul(dw, 1) * -1 if not _z(dw) else 0)
    comps["u=0"] = lhs0
    ok = all(_z(v) or is_zero(v) for v in comps.values())
    return ok, comps


def _sum0(a: Any, b: Any) -> Any:
    if _z(a):
        return b
    if _z(b):
        return a
    return a + b


def obstruction_divergence(e: Expansion) -> tuple[OneForm, list]:
    """``delta_h0 O`` and the value ``B`` forced on it by the u = l divergence identity.

    At x-order n+1 the identity reads ``delta_h0 O = kappa (tr(h^-1 h') G0l / 2)_n``;
    the right side only involves the mixed block below order n+1.
    """
    if e.obstruction is None:
        raise ValueError("expansion carries no obstruction (needs n even and N >= n)")
    n = e.n
    h0 = MetricForm(e.h_coeffs[0].mat)
    dO = divergence(h0, e.obstruction)
    pm = e.product_metric()
    G = residual_F(pm, e.couplings)
    _, _, trp = _xseries_metric(pm)
    B = []
    for l in range(n):
        s = G.mixed[l]
        if _z(s):
            B.append(0)
            continue
        v = (trp * s)
        B.append(v[n] * (e.kappa / 2) if v.trunc >= n else None)
    return dO, B
