"""Fefferman-Graham expansions of the Lovelock residual in product gauge.

The metric is ``g = x^-2 (dx^2/kappa + h(x))`` on ``[0, eps) x R^n``; index 0 is
``x`` and indices ``1..n`` are the boundary variables.  Everything is computed
for the normalized curvature ``Rt = x^4 R_g``, which is regular at ``x = 0``:

    Rt = (dx (x) dx) A  +  x^2 S((dx (x) 1) Dh')  +  x^2 R_h - (kappa/2) (x h'/2 - h)^2
    A  = (x^2/2)(-h'' + h' h^-1 h'/2) + x h'/2 - h

and ``G = x^2 F_g(alpha, beta)`` is assembled from contractions against
``gbar^-1 = diag(kappa, h^-1)``.  Coefficients of ``h`` are stored so that
``h_j`` is a jet of degree ``D - j``, which is exactly the precision the
recursion can deliver from a degree-``D`` boundary metric.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Any, Sequence

from .couplings import Couplings, CouplingError, KappaRoot, coeff_functions, lambda_coeffs
from .curvature import (
    SymTensor2, covariant_derivative, ric_dot, riemann, schouten_weyl, trace,
)
from .double_forms import (
    DoubleForm, MetricForm, contract, kn_product, lower_first, mat_inverse, raise_first,
)
from .curvature import lovelock_contractions
from .ring_jets import (
    FLOAT, DegreeError, Dual, Jet, Q, XSeries, eps_part, format_rational, is_zero, mpq, parse_rational,
)

__all__ = [
    "UnsupportedRegime", "SolveError", "ProductMetric", "CurvatureBlocks", "ResidualBlocks",
    "Expansion", "LinearMap", "tensor_to_json", "tensor_from_json", "product_curvature_blocks", "residual_F", "expand",
    "closed_forms", "obstruction", "linear_map", "MIXED_SIGN",
]

# sign in front of the mixed block; pinned against generic curvature (see tests)
MIXED_SIGN = -1


class UnsupportedRegime(RuntimeError):
    """The request is outside what a smooth formal expansion can deliver."""


class SolveError(RuntimeError):
    """A linear solve in the recursion was singular where it must not be."""


def _z(v: Any) -> bool:
    return isinstance(v, int) and v == 0


def _add(a: Any, b: Any) -> Any:
    if _z(a):
        return b
    if _z(b):
        return a
    return a + b


def _mul(a: Any, b: Any) -> Any:
    if _z(a) or _z(b):
        return 0
    return a * b


def _ytrunc(c: Any, d: int | None) -> Any:
    if d is None or _z(c):
        return c
    if isinstance(c, Jet):
        return c.truncate(d)
    return c


def _kappa_value(kappa: Any) -> Any:
    if isinstance(kappa, KappaRoot):
        return kappa.value()
    if isinstance(kappa, FLOAT):
        return kappa
    return Q(kappa)


# ------------------------------------------------------------ the metric

@dataclass
class ProductMetric:
    """``x^-2 (dx^2/kappa + h)`` with ``h`` an n x n matrix of x-series."""

    n: int
    kappa: Any
    h: list
    N: int
    center: Any = None    # series are in t = x - center when set

    @classmethod
    def from_coeffs(cls, coeffs: Sequence[Any], kappa: Any, N: int | None = None) -> "ProductMetric":
        """``coeffs[j]`` is the x^j coefficient (SymTensor2, matrix or 0)."""
        mats = [_as_matrix(c) for c in coeffs]
        n = len(mats[0])
        N = len(mats) - 1 if N is None else N
        h = [[XSeries([(m[i][j] if m is not None else 0) for m in mats], N) for j in range(n)]
             for i in range(n)]
        return cls(n, _kappa_value(kappa), h, N)

    def coeff(self, k: int) -> SymTensor2:
        return SymTensor2([[self.h[i][j][k] for j in range(self.n)] for i in range(self.n)])

    def recenter(self, x0: Any, T: int = 2) -> "ProductMetric":
        """Taylor series of ``h`` in ``t = x - x0`` through ``t^T`` (``h`` read as a polynomial)."""
        if self.center is not None:
            raise ValueError("already recentered")
        x0 = Q(x0)

        def re(s: XSeries) -> XSeries:
            out: list = [0] * (T + 1)
            for j, c in enumerate(s.coeffs):
                if _z(c):
                    continue
                for k in range(min(j, T) + 1):
                    out[k] = _add(out[k], c * (comb(j, k) * x0 ** (j - k)))
            return XSeries(out, T)
        return ProductMetric(self.n, self.kappa, [[re(v) for v in r] for r in self.h], T, x0)

    def xpower(self, k: int, trunc: int) -> XSeries:
        """``x^k`` in the coordinate of the series."""
        if self.center is None:
            return XSeries.monomial(mpq(1), k, trunc)
        return XSeries([mpq(comb(k, j)) * self.center ** (k - j) if j <= k else 0
                        for j in range(trunc + 1)], trunc)

    def xmul(self, s: Any, k: int) -> Any:
        if _z(s):
            return s
        if self.center is None:
            return s.shift(k)
        return s * self.xpower(k, s.trunc)

    def cut(self, xtrunc: int, ydeg: int | None = None) -> list:
        if xtrunc > self.N:
            raise DegreeError(f"x-truncation {xtrunc} exceeds the available {self.N}")
        return _cut(self.h, xtrunc, ydeg)


def _as_matrix(c: Any) -> Any:
    if c is None or _z(c):
        return None
    if isinstance(c, SymTensor2):
        return c.mat
    if isinstance(c, MetricForm):
        return c.mat
    return c


def _cut(h: list, xtrunc: int, ydeg: int | None) -> list:
    return [[XSeries([_ytrunc(c, ydeg) for c in s.coeffs[: xtrunc + 1]], xtrunc) for s in row]
            for row in h]


def _dx(mat: list) -> list:
    return [[s.derive_x() for s in row] for row in mat]


def _shift(s: Any, k: int) -> Any:
    return s.shift(k) if isinstance(s, XSeries) else s


def _matmul(a: list, b: list) -> list:
    n = len(a)
    out = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            acc: Any = 0
            for k in range(n):
                acc = _add(acc, _mul(a[i][k], b[k][j]))
            out[i][j] = acc
    return out


# ------------------------------------------------------ curvature blocks

@dataclass
class CurvatureBlocks:
    """Pieces of the normalized curvature ``x^4 R_g``."""

    n: int
    kappa: Any
    xtrunc: int
    A: list                    # coefficient of dx (x) dx, boundary (1,1)
    T: DoubleForm              # tangential (2,2) block, n-dim
    Dh: dict                   # x^2 Dh'(u)(v,w) keyed by (u, v, w), v < w
    h: list                    # h truncated as used
    hinv: list

    def assemble(self) -> DoubleForm:
        """The (n+1)-dimensional (2,2) form."""
        n = self.n
        comps: dict = {}
        for (I, J), v in self.T.comps.items():
            comps[(I << 1, J << 1)] = v
        for u in range(n):
            for v in range(n):
                a = self.A[u][v]
                if not is_zero(a):
                    comps[(1 | (2 << u), 1 | (2 << v))] = a
        for (u, v, w), val in self.Dh.items():
            if is_zero(val):
                continue
            val = val if MIXED_SIGN > 0 else -val
            I, J = 1 | (2 << u), (2 << v) | (2 << w)
            comps[(I, J)] = _add(comps.get((I, J), 0), val)
            comps[(J, I)] = _add(comps.get((J, I), 0), val)
        return DoubleForm(n + 1, (2, 2), comps)

    def gbar_inv(self) -> list:
        n = self.n
        out = [[0] * (n + 1) for _ in range(n + 1)]
        out[0][0] = self.kappa
        for i in range(n):
            for j in range(n):
                out[i + 1][j + 1] = self.hinv[i][j]
        return out

    def gbar(self) -> list:
        n = self.n
        out = [[0] * (n + 1) for _ in range(n + 1)]
        out[0][0] = (1 / self.kappa) if isinstance(self.kappa, FLOAT) else mpq(1) / self.kappa
        for i in range(n):
            for j in range(n):
                out[i + 1][j + 1] = self.h[i][j]
        return out


def product_curvature_blocks(pm: ProductMetric, xtrunc: int | None = None, ydeg: int | None = None,
                             constant: bool = False) -> CurvatureBlocks:
    """Blocks of ``x^4 R_g`` through ``x^xtrunc``.

    With ``ydeg`` every block is truncated to that boundary degree (inputs that
    get differentiated are taken at the extra degrees they need).  ``constant``
    skips the boundary derivatives for x-series that do not depend on y.
    """
    n, kap = pm.n, pm.kappa
    X = pm.N if xtrunc is None else xtrunc
    if X < 0:
        raise DegreeError("negative x-truncation")
    half = mpq(1, 2)
    ha = pm.cut(X, ydeg)
    hinv = mat_inverse(ha)
    A = [[-ha[i][j] for j in range(n)] for i in range(n)]
    S = [[-ha[i][j] for j in range(n)] for i in range(n)]
    if X >= 1:
        hp = _dx(ha)
        for i in range(n):
            for j in range(n):
                t = pm.xmul(hp[i][j], 1) * half
                A[i][j] = A[i][j] + t
                S[i][j] = S[i][j] + t
    if X >= 2:
        hpp = _dx(hp)
        quad = _matmul(_matmul(hp, hinv), hp)
        for i in range(n):
            for j in range(n):
                t = _add(-hpp[i][j], _mul(quad[i][j], half))
                if not _z(t):
                    A[i][j] = A[i][j] + pm.xmul(t * half, 2)
    Sf = DoubleForm.from_matrix(S)
    T = kn_product(Sf, Sf).scale(-kap / 2)
    Dh: dict = {}
    if X >= 2 and not constant:
        hc = pm.cut(X - 2, None if ydeg is None else ydeg + 2)
        Rh = riemann(MetricForm(hc))
        T = T + Rh.map(lambda v: pm.xmul(v, 2))
        hm = pm.cut(X - 1, None if ydeg is None else ydeg + 1)
        hpm = _dx(hm)
        gm = MetricForm(_cut(hm, X - 2, None))
        D = covariant_derivative(gm, SymTensor2(hpm))
        for u in range(n):
            for v in range(n):
                for w in range(v + 1, n):
                    val = _add(D[v][u][w], -D[w][u][v] if not _z(D[w][u][v]) else 0)
                    if not _z(val) and not is_zero(val):
                        Dh[(u, v, w)] = pm.xmul(val * half, 2)
    return CurvatureBlocks(n, kap, X, A, T, Dh, ha, hinv)


# --------------------------------------------------------------- residual

@dataclass
class ResidualBlocks:
    """``G = x^2 F_g``: the dx dx component, the mixed row and the tangential block."""

    dxdx: Any
    mixed: list
    tangential: SymTensor2
    trunc: int

    def normalized(self) -> "ResidualBlocks":
        """``x F_g = G / x`` (valid because ``G`` vanishes at ``x = 0`` for kappa in LimSec)."""
        def sh(s: Any) -> Any:
            return s.shift(-1) if isinstance(s, XSeries) else s
        return ResidualBlocks(sh(self.dxdx), [sh(s) for s in self.mixed],
                              self.tangential.map(sh), self.trunc - 1)

    def slot(self, k: int) -> tuple[Any, list, SymTensor2]:
        return (_at(self.dxdx, k), [_at(s, k) for s in self.mixed],
                SymTensor2([[_at(s, k) for s in r] for r in self.tangential.mat]))


def residual_F(pm: ProductMetric, c: Couplings, xtrunc: int | None = None, ydeg: int | None = None,
               blocks: CurvatureBlocks | None = None, constant: bool = False) -> ResidualBlocks:
    """``x^2 F_g(alpha, beta)`` split along ``<d_x> + <d_x>^perp``."""
    if c.n != pm.n:
        raise CouplingError(f"couplings for n={c.n} used with n={pm.n}")
    if blocks is None:
        blocks = product_curvature_blocks(pm, xtrunc, ydeg, constant)
    n = pm.n
    m = n + 1
    R = blocks.assemble()
    Rs = raise_first(blocks.gbar_inv(), R)
    qs = c.active()
    lc = lovelock_contractions(Rs, qs)
    lam = lambda_coeffs(n)
    out: dict = {}
    diag: Any = mpq(0)
    for q in qs:
        a, b = c.alpha[q - 1], c.beta[q - 1]
        ric, scal = lc[q]
        if a != 0:
            for k, v in ric.comps.items():
                out[k] = _add(out.get(k, 0), v * a)
        diag = diag - a * lam[q - 1] - b * (m * lam[q - 1])
        if b != 0 and not _z(scal):
            diag = _add(diag, scal * b)
    for i in range(m):
        k = (1 << i, 1 << i)
        out[k] = _add(out.get(k, 0), diag)
    Fs = DoubleForm(m, (1, 1), out)
    G = lower_first(blocks.gbar(), Fs).matrix()
    return ResidualBlocks(G[0][0], [G[0][j + 1] for j in range(n)],
                          SymTensor2([[G[i + 1][j + 1] for j in range(n)] for i in range(n)]),
                          blocks.xtrunc)


# ------------------------------------------------- linearization probes

@dataclass(frozen=True)
class LinearMap:
    """``slot k+1`` response ``T = a U + b h0 C(U)``, ``G00 = c0 C(U)`` to ``U = h_{k+1}``."""

    k: int
    a: Any
    b: Any
    c0: Any
    expected: tuple
    lowest_order: int

    def matches_closed_form(self) -> bool:
        return all(_close(u, v) for u, v in zip((self.a, self.b, self.c0), self.expected))

    def trace_coefficient(self, n: int, kappa: Any) -> Any:
        return self.a + n * self.b - n * kappa * self.c0


def _close(u: Any, v: Any) -> bool:
    if isinstance(u, FLOAT) or isinstance(v, FLOAT):
        return abs(float(u) - float(v)) <= FLOAT_TOL * max(1.0, abs(float(u)), abs(float(v)))
    return u == v


def expected_linear_coeffs(c: Couplings, kappa: Any, k: int) -> tuple:
    d = coeff_functions(c, kappa)
    n = c.n
    A1, B12 = d.A_alpha[1], d.B[(1, 2)]
    return ((kappa / 2) * (n - 1 - k) * A1 * (k + 1),
            (kappa / 2) * (A1 + 2 * (n - k) * B12) * (k + 1),
            mpq(1, 2) * ((1 - k) * A1 + 2 * (n - k) * B12) * (k + 1))


def _probe_response(n: int, kappa: Any, c: Couplings, k: int, B: list) -> tuple[list, list]:
    """eps-part of every slot of G for ``h = 1 + eps x^(k+1) B`` (constant model)."""
    X = k + 1
    h = [[XSeries([mpq(int(i == j))] + [0] * k + [Dual(0, Q(B[i][j])) if B[i][j] else 0], X)
          for j in range(n)] for i in range(n)]
    pm = ProductMetric(n, kappa, h, X)
    G = residual_F(pm, c, constant=True)
    T = [[[_eps(_at(G.tangential.mat[i][j], s)) for j in range(n)] for i in range(n)] for s in range(X + 1)]
    D = [_eps(_at(G.dxdx, s)) for s in range(X + 1)]
    return T, D


def _at(s: Any, k: int) -> Any:
    return s[k] if isinstance(s, XSeries) else 0


def _eps(v: Any) -> Any:
    return eps_part(v) if isinstance(v, Dual) else 0


def _basis(n: int, p: int, q: int) -> list:
    B = [[0] * n for _ in range(n)]
    B[p][q] = B[q][p] = 1
    return B


@lru_cache(maxsize=None)
def _linear_map_cached(n: int, kappa: Any, alpha: tuple, beta: tuple, k: int, full: bool) -> LinearMap:
    c = Couplings(n, alpha, beta, False)
    zero = lambda v: _z(v) or _close(v, 0)  # noqa: E731
    pairs = [(p, q) for p in range(n) for q in range(p, n)] if full else [(0, 0), (0, 1)]
    a = b = c0 = None
    lowest = None
    for (p, q) in pairs:
        B = _basis(n, p, q)
        T, D = _probe_response(n, kappa, c, k, B)
        for s in range(k + 1):
            if not (zero(D[s]) and all(zero(T[s][i][j]) for i in range(n) for j in range(n))):
                raise SolveError(f"step {k}: residual depends on h_{k + 1} below order {k + 1}")
        lowest = k + 1
        Ts, Ds = T[k + 1], D[k + 1]
        val = lambda v: mpq(0) if _z(v) else v  # noqa: E731
        if (p, q) == (0, 0):
            b = val(Ts[1][1]) if n > 1 else mpq(0)
            a = val(Ts[0][0]) - b
            c0 = val(Ds)
        trB = 1 if p == q else 0
        for i in range(n):
            for j in range(n):
                want = a * (B[i][j]) + (b * trB if i == j else 0)
                if not _close(val(Ts[i][j]), want):
                    raise SolveError(f"step {k}: probe response is not of the form aU + b h0 C(U)")
        if not _close(val(Ds), c0 * trB):
            raise SolveError(f"step {k}: dx dx response is not proportional to C(U)")
    return LinearMap(k, a, b, c0, expected_linear_coeffs(c, kappa, k), lowest)


def linear_map(c: Couplings, kappa: Any, k: int, full_basis: bool = False) -> LinearMap:
    """Probe the response of the x^(k+1) residual to ``h_{k+1}`` at ``h0 = identity``.

    The response is pointwise and equivariant, so the identity model fixes the
    scalar coefficients for every ``h0``.
    """
    return _linear_map_cached(c.n, _kappa_value(kappa), c.alpha, c.beta, k, full_basis)


# --------------------------------------------------------------- expand

@dataclass
class Expansion:
    n: int
    kappa: Any
    couplings: Couplings
    h_coeffs: list              # SymTensor2 per order
    degree: int                 # boundary jet degree D of h0
    trace_hn: Any = None
    obstruction: SymTensor2 | None = None
    log_present: bool = False
    free_data: SymTensor2 | None = None
    maps: list = field(default_factory=list)
    residual_report: Any = None

    @property
    def N(self) -> int:
        return len(self.h_coeffs) - 1

    def product_metric(self) -> ProductMetric:
        return ProductMetric.from_coeffs(self.h_coeffs, self.kappa, self.N)

    def to_json(self) -> dict:
        doc = {
            "schema": "lovelock-fg/1",
            "n": self.n,
            "kappa": format_rational(self.kappa) if not isinstance(self.kappa, FLOAT) else self.kappa,
            "couplings": self.couplings.to_json(),
            "degree": self.degree,
            "coeffs": [{"order": k, "tensor": tensor_to_json(t)} for k, t in enumerate(self.h_coeffs)],
            "trace_hn": None if self.trace_hn is None else tensor_to_json(self.trace_hn),
            "log_present": self.log_present,
        }
        if self.obstruction is not None:
            doc["obstruction"] = tensor_to_json(self.obstruction)
        if self.free_data is not None:
            doc["free_data"] = tensor_to_json(self.free_data)
        doc["residual_report"] = None if self.residual_report is None else self.residual_report.to_json()
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "Expansion":
        if doc.get("schema") != "lovelock-fg/1":
            raise ValueError("not a lovelock-fg/1 expansion document")
        n = int(doc["n"])
        cj = doc["couplings"]
        c = Couplings.make(n, cj["alpha"], cj["beta"])
        k = doc["kappa"]
        kappa = float(k) if isinstance(k, FLOAT) else parse_rational(k)
        coeffs = [None] * len(doc["coeffs"])
        for item in doc["coeffs"]:
            coeffs[int(item["order"])] = tensor_from_json(item["tensor"])
        coeffs = [t if t is not None else SymTensor2.zero(n) for t in coeffs]
        e = cls(n, kappa, c, coeffs, int(doc.get("degree", 0)))
        if doc.get("trace_hn") is not None:
            e.trace_hn = tensor_from_json(doc["trace_hn"])
        if doc.get("obstruction") is not None:
            e.obstruction = tensor_from_json(doc["obstruction"])
            e.log_present = bool(doc.get("log_present", not e.obstruction.is_zero()))
        if doc.get("free_data") is not None:
            e.free_data = tensor_from_json(doc["free_data"])
        return e


def tensor_from_json(doc: Any) -> Any:
    if isinstance(doc, str):
        return parse_rational(doc)
    if "bidegree" in doc:
        w = DoubleForm.from_json(doc, _value_from_json)
        return SymTensor2.from_form(w) if tuple(w.bideg) == (1, 1) else w
    return Jet.from_json(doc)


def _value_from_json(doc: Any) -> Any:
    return parse_rational(doc) if isinstance(doc, str) else Jet.from_json(doc)


def tensor_to_json(t: Any) -> Any:
    """SymTensor2 as a DoubleForm document, scalars as jet documents."""
    if isinstance(t, SymTensor2):
        return t.to_form().to_json(_value_json)
    if isinstance(t, DoubleForm):
        return t.to_json(_value_json)
    return _value_json(t)


def _value_json(v: Any) -> Any:
    if isinstance(v, Jet):
        return v.to_json()
    return format_rational(v)


def _min_degree(mat: list) -> int:
    ds = [v.deg for r in mat for v in r if isinstance(v, Jet)]
    if not ds:
        raise DegreeError("boundary metric has no jet entries")
    return min(ds)


def _trace_free(h0inv: list, h0: list, t: SymTensor2) -> tuple[Any, SymTensor2]:
    n = len(h0)
    tr = trace(MetricForm(h0, h0inv), t)
    if is_zero(tr):
        return tr, t
    return tr, t - SymTensor2(h0).map(lambda v: v * tr * mpq(1, n))


def expand(h0: Any, c: Couplings, kappa: Any, N: int, hn_tf: SymTensor2 | None = None,
           record_maps: bool = True) -> Expansion:
    """Determine ``h_1..h_N`` order by order from ``h0``."""
    g0 = h0 if isinstance(h0, MetricForm) else MetricForm(_as_matrix(h0))
    n = g0.dim
    if c.n != n:
        raise CouplingError(f"couplings are for n={c.n} but h0 has dimension {n}")
    kap = _kappa_value(kappa)
    if isinstance(kap, FLOAT):
        g0 = _float_metric(g0)
    d = coeff_functions(c, kap)
    if d.A1() == 0:
        raise UnsupportedRegime("A1(alpha, kappa) = 0: the recursion is not solvable")
    p0 = sum(l * (a + (n + 1) * b) * (kap ** q - 1)
             for q, (l, a, b) in enumerate(zip(d.lam, c.alpha, c.beta), start=1))
    if not _negligible(p0, sum(abs(v) for v in c.alpha + c.beta)):
        raise UnsupportedRegime("kappa is not a root of the kappa polynomial")
    if hn_tf is not None and n % 2 == 0:
        raise UnsupportedRegime("free trace-free data at order n exists only for n odd")
    D = _min_degree(g0.mat)
    if N > D:
        raise DegreeError(f"order N={N} needs boundary jets of degree >= {N}, got {D} "
                          f"(h_j is exact to degree D - j)")
    coeffs: list = [SymTensor2(g0.mat)]
    exp = Expansion(n, kap, c, coeffs, D)
    for k in range(N):
        dk = D - k - 1
        trial = coeffs + [0]
        pm = ProductMetric.from_coeffs(trial, kap, k + 1)
        G = residual_F(pm, c, xtrunc=k + 1, ydeg=dk)
        Drest, _, Trest = G.slot(k + 1)
        lm = linear_map(c, kap, k)
        if record_maps:
            exp.maps.append(lm)
        h0m = [[_ytrunc(v, dk) for v in r] for r in g0.mat]
        h0inv = mat_inverse(h0m)
        Trest = Trest.map(lambda v: v)
        tr_T = trace(MetricForm(h0m, h0inv), Trest)
        E = _add(tr_T, -(Drest * (n * kap)) if not _z(Drest) else 0)
        coefE = lm.trace_coefficient(n, kap)
        if coefE == 0:
            raise SolveError(f"step {k}: trace equation is singular")
        CU = 0 if is_zero(E) else E * (-1 / coefE if isinstance(coefE, FLOAT) else mpq(-1) / coefE)
        g0s = SymTensor2(h0m)
        if lm.a != 0:
            rhs = Trest if _z(CU) else Trest + g0s.map(lambda v: v * CU * lm.b)
            U = rhs.map(lambda v: v * (mpq(-1) / lm.a if not isinstance(lm.a, FLOAT) else -1 / lm.a))
        elif k + 1 == n:
            _, tf = _trace_free(h0inv, h0m, Trest)
            exp.trace_hn = CU
            U = g0s.map(lambda v: v * CU * mpq(1, n)) if not _z(CU) else SymTensor2.zero(n)
            if n % 2 == 0:
                exp.obstruction = tf
                exp.log_present = not tf.is_zero()
                if exp.log_present and N > n:
                    raise UnsupportedRegime("n even with nonzero obstruction: a log term is needed "
                                            "beyond order n")
            else:
                if not all(_negligible(v) for r in tf.mat for v in r):
                    raise SolveError("n odd: trace-free residual at order n should vanish by parity")
                if hn_tf is not None:
                    tr_f, _ = _trace_free(h0inv, h0m, hn_tf.truncate_y(dk))
                    if not is_zero(tr_f):
                        raise ValueError("hn_tf must be trace-free with respect to h0")
                    U = U + hn_tf.truncate_y(dk)
                    exp.free_data = hn_tf
        else:
            raise SolveError(f"step {k}: tensor coefficient vanishes away from order n")
        coeffs.append(_mirror(U))
    return exp


def _mirror(t: SymTensor2) -> SymTensor2:
    """Copy the upper triangle down; a no-op in exact mode, removes float round-off asymmetry."""
    m = t.dim
    return SymTensor2([[t.mat[min(i, j)][max(i, j)] for j in range(m)] for i in range(m)])


def _float_metric(g: MetricForm) -> MetricForm:
    def f(v: Any) -> Any:
        if isinstance(v, Jet):
            return v if not v.exact else v.to_float()
        return float(v)
    return MetricForm([[f(v) for v in r] for r in g.mat])


def _negligible(v: Any, scale: Any = 1) -> bool:
    """Exact zero, or a float below FLOAT_TOL relative to ``scale``."""
    if isinstance(v, Jet):
        return v.is_zero() if v.exact else float(v.max_abs()) <= FLOAT_TOL * max(1.0, float(scale))
    if isinstance(v, FLOAT):
        return abs(v) <= FLOAT_TOL * max(1.0, float(scale))
    return is_zero(v)


FLOAT_TOL = 1e-9


# ----------------------------------------------------------- closed forms

def _sq_contractions(g: MetricForm, t: SymTensor2) -> tuple[SymTensor2, Any]:
    sq = kn_product(t.to_form(), t.to_form())
    c1 = contract(g, sq)
    return SymTensor2.from_form(c1), contract(g, c1).scalar_value()


def closed_forms(h0: Any, c: Couplings, kappa: Any, with_display: bool = False) -> dict:
    """``h2 = -P/kappa`` and ``h4`` solved from the order-4 tangential equation.

    The order-4 equations are in ``rho = x^2`` and determine ``d^2h/drho^2 = 2 h4``;
    the returned ``h4`` is the x^4 coefficient.

    Returns a dict with ``h2``, ``h4`` (needs n >= 5), the trace ``C(h4)`` and,
    optionally, ``h4_display``: the final printed formula evaluated verbatim.
    """
    g0 = h0 if isinstance(h0, MetricForm) else MetricForm(_as_matrix(h0))
    n = g0.dim
    kap = _kappa_value(kappa)
    if isinstance(kap, FLOAT):
        g0 = _float_metric(g0)
    D = _min_degree(g0.mat)
    P, W = schouten_weyl(g0)
    h2 = P.scale(-1 / kap if isinstance(kap, FLOAT) else mpq(-1) / kap)
    out: dict = {"h2": h2}
    R = riemann(g0)
    scal = contract(g0, contract(g0, R)).scalar_value()
    out["trace_h2"] = trace(g0, h2)
    out["trace_h2_formula"] = scal * (mpq(-1) / (2 * (n - 1) * kap))
    if n < 5:
        return out
    if D < 4:
        raise DegreeError("h4 needs boundary jets of degree >= 4")
    d4 = D - 4
    cf = coeff_functions(c, kap)
    A1, A3 = cf.A_alpha[1], cf.A_alpha[3]
    B12, B34 = cf.B[(1, 2)], cf.B[(3, 4)]
    # ric_dot needs two more degrees than its output
    g2 = MetricForm([[v.truncate(d4 + 2) for v in r] for r in g0.mat])
    dric, dscal = ric_dot(g2, h2.truncate_y(d4 + 2))
    g = MetricForm([[v.truncate(d4) for v in r] for r in g0.mat])
    h2t = h2.truncate_y(d4)
    Wt = W.truncate_y(d4)
    h0s = SymTensor2(g.mat)
    Ch2 = trace(g, h2t)
    C1sq, C2sq = _sq_contractions(g, h2t)
    W2 = kn_product(Wt, Wt)
    C3W = SymTensor2.from_form(contract(g, W2, 3))
    C4W = contract(g, W2, 4).scalar_value() if n >= 4 else 0
    CdRic = trace(g, dric)
    k4 = 4 * kap * (n - 1)
    Ch4 = -C2sq / 4 + Ch2 * Ch2 / 2 - CdRic / k4 - C4W * (A3 / (k4 * A1))
    rest = (h0s.scale(kap * (A1 + 2 * (n - 3) * B12) * Ch4)
            - C1sq.scale(kap * A1)
            + h0s.scale(C2sq * (kap / 2) * (A1 + (2 * n - 5) * B12))
            + h2t.scale(Ch2 * 2 * kap * A1)
            - h0s.scale(Ch2 * Ch2 * kap * (A1 + 2 * (n - 2) * B12))
            + C3W.scale(A3)
            + h0s.scale(C4W * B34)
            + dric.truncate_y(d4).scale(A1)
            + h0s.scale(dscal.truncate(d4) * B12))
    # the order-4 equations are written for d^2h/drho^2 at rho = 0, which is 2 h4
    hdd = rest.scale(mpq(-1) / ((n - 4) * kap * A1))
    half = mpq(1, 2)
    out.update({"h4": hdd.scale(half), "trace_h4": Ch4 * half, "dric": dric, "dscal": dscal, "weyl": W})
    if with_display:
        out["h4_display"] = _h4_display(n, kap, A1, A3, B12, B34, h0s, h2t, Ch2, C1sq, C2sq,
                                        C3W, C4W, dric.truncate_y(d4), dscal.truncate(d4),
                                        CdRic).scale(half)
    return out


def _h4_display(n, kap, A1, A3, B12, B34, h0s, h2, Ch2, C1sq, C2sq, C3W, C4W, dric, dscal, CdRic):
    """The final printed h4 formula, with the ``2(n-3)(...)`` line read inside the B12 bracket."""
    k4 = 4 * kap * (n - 1)
    first = (h0s.scale(-CdRic / k4) + h0s.scale(C2sq / 4 - Ch2 * Ch2 / 2) - C1sq
             + h2.scale(2 * Ch2) + dric.scale(mpq(1) / kap)).scale(mpq(-1, n - 4))
    trace_part = -C2sq / 4 + Ch2 * Ch2 / 2 - CdRic / k4 - C4W * (A3 / (k4 * A1))
    bracket = C2sq * mpq(2 * n - 5, 2) - 2 * (n - 2) * Ch2 * Ch2 + dscal / kap + trace_part * (2 * (n - 3))
    second = h0s.scale(bracket * (-B12 / ((n - 4) * A1)))
    weyl = (C3W.scale(4 * (n - 1) * A3) + h0s.scale(C4W * (4 * (n - 1) * B34 - A3))).scale(
        mpq(-1) / (k4 * (n - 4) * A1))
    return first + second + weyl


# ------------------------------------------------------------- obstruction

def obstruction(h0: Any, c: Couplings, kappa: Any) -> dict:
    """Trace-free order-n residual for n even with Lovelock beta, plus divergence data."""
    g0 = h0 if isinstance(h0, MetricForm) else MetricForm(_as_matrix(h0))
    n = g0.dim
    if n % 2:
        raise UnsupportedRegime("the obstruction tensor is defined for n even")
    if not c.lovelock:
        raise UnsupportedRegime("the divergence lemma needs beta_q = -alpha_q/(2q)")
    e = expand(g0, c, kappa, n)
    return {"expansion": e, "obstruction": e.obstruction}
