"""Riemannian curvature on metric jets, Lovelock tensors and the usual operators.

Sign convention: ``R((a,b),(c,d)) = R_abcd`` with
``R_abcd = K (g_ac g_bd - g_ad g_bc)`` on a space of constant curvature K,
so that ``R = (K/2) g**2``, ``Ric = C(R)`` and ``scal = C^2(R)``.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from typing import Any, Callable, Sequence

from .double_forms import (
    DoubleForm, MetricForm, _masks, kn_product, lower_first, mask_of, raise_first,
    trace_contract, tuple_of,
)
from .ring_jets import DegreeError, Dual, Jet, XSeries, is_zero, mpq, nilpotent_probe

__all__ = [
    "SymTensor2", "OneForm", "christoffel", "riemann", "ricci", "scalar_curvature",
    "lovelock_family", "lovelock_contractions", "gravitation", "schouten_weyl",
    "divergence", "div_star", "hessian", "laplacian", "lichnerowicz", "ric_dot",
    "diff_ops", "covariant_derivative",
]


def _add(a: Any, b: Any) -> Any:
    if isinstance(a, int) and a == 0:
        return b
    if isinstance(b, int) and b == 0:
        return a
    return a + b


def _mul(a: Any, b: Any) -> Any:
    if (isinstance(a, int) and a == 0) or (isinstance(b, int) and b == 0):
        return 0
    return a * b


def _neg(a: Any) -> Any:
    return 0 if (isinstance(a, int) and a == 0) else -a


def _part(a: Any, i: int) -> Any:
    if isinstance(a, (int, type(mpq(0)))):
        return 0
    return a.partial(i)


def _sum(items) -> Any:
    acc: Any = 0
    for t in items:
        acc = _add(acc, t)
    return acc


# -------------------------------------------------------------- tensors

class SymTensor2:
    """Symmetric 2-tensor with ring-valued components."""

    __slots__ = ("dim", "mat")

    def __init__(self, mat: Sequence[Sequence[Any]], check: bool = False):
        self.dim = len(mat)
        self.mat = [list(r) for r in mat]
        if check:
            for i in range(self.dim):
                for j in range(i):
                    a, b = self.mat[i][j], self.mat[j][i]
                    if not (is_zero(a) and is_zero(b)) and not a == b:
                        raise ValueError("tensor is not symmetric")

    @classmethod
    def zero(cls, m: int) -> "SymTensor2":
        return cls([[0] * m for _ in range(m)])

    @classmethod
    def from_form(cls, w: DoubleForm) -> "SymTensor2":
        return cls(w.matrix())

    def to_form(self) -> DoubleForm:
        return DoubleForm.from_matrix(self.mat)

    def __getitem__(self, ij: tuple[int, int]) -> Any:
        return self.mat[ij[0]][ij[1]]

    def map(self, fn: Callable[[Any], Any]) -> "SymTensor2":
        return SymTensor2([[0 if (isinstance(v, int) and v == 0) else fn(v) for v in r] for r in self.mat])

    _map_components = map

    def _dual_lift(self, direction: "SymTensor2") -> "SymTensor2":
        m = self.dim
        return SymTensor2([[Dual(self.mat[i][j], direction.mat[i][j]) for j in range(m)] for i in range(m)])

    def __add__(self, other: "SymTensor2") -> "SymTensor2":
        return SymTensor2([[_add(a, b) for a, b in zip(r, s)] for r, s in zip(self.mat, other.mat)])

    def __neg__(self) -> "SymTensor2":
        return self.map(lambda v: -v)

    def __sub__(self, other: "SymTensor2") -> "SymTensor2":
        return self + (-other)

    def scale(self, s: Any) -> "SymTensor2":
        return self.map(lambda v: v * s)

    def __mul__(self, s: Any) -> "SymTensor2":
        return self.scale(s)

    def __rmul__(self, s: Any) -> "SymTensor2":
        return self.map(lambda v: s * v)

    def truncate_y(self, d: int) -> "SymTensor2":
        return self.map(lambda v: v.truncate(d) if isinstance(v, Jet) else v.truncate_y(d))

    def is_zero(self) -> bool:
        return all(is_zero(v) for r in self.mat for v in r)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, int) and other == 0:
            return self.is_zero()
        if not isinstance(other, SymTensor2) or other.dim != self.dim:
            return NotImplemented
        for r, s in zip(self.mat, other.mat):
            for a, b in zip(r, s):
                if is_zero(a):
                    if not is_zero(b):
                        return False
                elif is_zero(b) or not a == b:
                    return False
        return True

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"SymTensor2(dim={self.dim})"


class OneForm:
    __slots__ = ("dim", "comps")

    def __init__(self, comps: Sequence[Any]):
        self.comps = list(comps)
        self.dim = len(self.comps)

    def __getitem__(self, i: int) -> Any:
        return self.comps[i]

    def map(self, fn: Callable[[Any], Any]) -> "OneForm":
        return OneForm([0 if (isinstance(v, int) and v == 0) else fn(v) for v in self.comps])

    _map_components = map

    def is_zero(self) -> bool:
        return all(is_zero(v) for v in self.comps)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, int) and other == 0:
            return self.is_zero()
        if not isinstance(other, OneForm):
            return NotImplemented
        return all((is_zero(a) and is_zero(b)) or (not is_zero(a) and a == b)
                   for a, b in zip(self.comps, other.comps))

    __hash__ = None  # type: ignore[assignment]

    def __add__(self, other: "OneForm") -> "OneForm":
        return OneForm([_add(a, b) for a, b in zip(self.comps, other.comps)])

    def __neg__(self) -> "OneForm":
        return self.map(lambda v: -v)

    def __sub__(self, other: "OneForm") -> "OneForm":
        return self + (-other)

    def scale(self, s: Any) -> "OneForm":
        return self.map(lambda v: v * s)


def _as_metric(g: Any) -> MetricForm:
    if isinstance(g, MetricForm):
        return g
    if isinstance(g, SymTensor2):
        return MetricForm(g.mat)
    return MetricForm(g)


def _check_degree(g: MetricForm, need: int) -> None:
    for r in g.mat:
        for v in r:
            d = _reliable_degree(v)
            if d is not None and d < need:
                raise DegreeError(f"metric jet degree {d} < {need} required")


def _reliable_degree(v: Any) -> int | None:
    if isinstance(v, Jet):
        return v.deg
    if isinstance(v, XSeries):
        ds = [_reliable_degree(c) for c in v.coeffs if not (isinstance(c, int) and c == 0)]
        ds = [d for d in ds if d is not None]
        return min(ds) if ds else None
    if isinstance(v, Dual):
        ds = [d for d in (_reliable_degree(v.a), _reliable_degree(v.b)) if d is not None]
        return min(ds) if ds else None
    return None


# ---------------------------------------------------------- Christoffel

def christoffel(g: MetricForm) -> list[list[list[Any]]]:
    """``Gamma[k][i][j]`` of the Levi-Civita connection."""
    m = g.dim
    dg = [[[_part(g.mat[i][j], k) for j in range(m)] for i in range(m)] for k in range(m)]
    first = [[[None] * m for _ in range(m)] for _ in range(m)]  # first[l][i][j]
    half = mpq(1, 2)
    for l in range(m):
        for i in range(m):
            for j in range(i, m):
                v = _add(_add(dg[i][j][l], dg[j][i][l]), _neg(dg[l][i][j]))
                v = 0 if is_zero(v) else v * half
                first[l][i][j] = first[l][j][i] = v
    gam = [[[0] * m for _ in range(m)] for _ in range(m)]
    for k in range(m):
        for i in range(m):
            for j in range(i, m):
                v = _sum(_mul(g.inv[k][l], first[l][i][j]) for l in range(m))
                gam[k][i][j] = gam[k][j][i] = v
    return gam


def riemann(g: Any, gamma: list | None = None, check_degree: bool = True) -> DoubleForm:
    """Curvature (2,2) form of a metric jet."""
    g = _as_metric(g)
    if check_degree:
        _check_degree(g, 2)
    m = g.dim
    gam = christoffel(g) if gamma is None else gamma
    # lowered Christoffel symbols Gamma_{e,ij}
    low = [[[_sum(_mul(g.mat[e][k], gam[k][i][j]) for k in range(m)) for j in range(m)]
            for i in range(m)] for e in range(m)]
    d2 = {}

    def dd(i, j, a, b):
        key = (min(i, j), max(i, j), min(a, b), max(a, b))
        if key not in d2:
            d2[key] = _part(_part(g.mat[key[0]][key[1]], key[2]), key[3])
        return d2[key]

    half = mpq(1, 2)
    comps: dict = {}
    pairs = list(combinations(range(m), 2))
    for n1, (a, b) in enumerate(pairs):
        for (c, d) in pairs[n1:]:
            second = _add(_add(dd(a, d, b, c), dd(b, c, a, d)), _neg(_add(dd(a, c, b, d), dd(b, d, a, c))))
            # a zero jet still carries the reliable degree, keep it
            second = 0 if isinstance(second, int) else second * half
            quad = _sum(_add(_mul(low[f][a][d], gam[f][b][c]), _neg(_mul(low[f][a][c], gam[f][b][d])))
                        for f in range(m))
            v = _add(second, quad)
            if not is_zero(v):
                I, J = mask_of((a, b)), mask_of((c, d))
                comps[(I, J)] = v
                comps[(J, I)] = v
    return DoubleForm(m, (2, 2), comps)


def ricci(g: Any, R: DoubleForm | None = None) -> SymTensor2:
    g = _as_metric(g)
    R = riemann(g) if R is None else R
    from .double_forms import contract
    return SymTensor2.from_form(contract(g, R))


def scalar_curvature(g: Any, R: DoubleForm | None = None) -> Any:
    g = _as_metric(g)
    return trace(g, ricci(g, R))


def trace(g: MetricForm, t: SymTensor2) -> Any:
    m = g.dim
    return _sum(_mul(g.inv[i][j], t.mat[j][i]) for i in range(m) for j in range(m))


# ------------------------------------------------------------- Lovelock

@lru_cache(maxsize=None)
def _near_diagonal_keys(m: int, q: int) -> tuple[tuple[int, int], ...]:
    """Masks (K+i, K+j) with |K| = 2q-1: all that C^{2q-1} of a (2q,2q) form reads."""
    keys = set()
    for K in _masks(m, 2 * q - 1):
        free = [i for i in range(m) if not K & (1 << i)]
        for i in free:
            for j in free:
                keys.add((K | (1 << i), K | (1 << j)))
    return tuple(sorted(keys))


def lovelock_contractions(R_sharp: DoubleForm, qs: Sequence[int]) -> dict[int, tuple[DoubleForm, Any]]:
    """For a first-factor-raised curvature form return, per q, the raised
    ``C^{2q-1}(R^q)`` as a (1,1) form and the scalar ``C^{2q}(R^q)``."""
    m = R_sharp.dim
    out: dict[int, tuple[DoubleForm, Any]] = {}
    qmax = max(qs) if qs else 0
    power = None  # R^(q-1), full
    for q in range(1, qmax + 1):
        if 2 * q > m:
            if q in qs:
                out[q] = (DoubleForm.zero(m, (1, 1)), 0)
            continue
        if q in qs:
            top = R_sharp if q == 1 else kn_product(power, R_sharp, keys=_near_diagonal_keys(m, q))
            ric = trace_contract(top, 2 * q - 1)
            scal = _sum(ric.comps.get((1 << i, 1 << i), 0) for i in range(m))
            out[q] = (ric, scal)
        if q < qmax:
            power = R_sharp if q == 1 else kn_product(power, R_sharp)
    return out


def lovelock_family(g: Any, q: int, R: DoubleForm | None = None
                    ) -> tuple[SymTensor2, Any, SymTensor2]:
    """(Ric^(2q), scal^(2q), E^(2q)) of a metric jet."""
    if q < 1:
        raise ValueError("q must be >= 1")
    g = _as_metric(g)
    R = riemann(g) if R is None else R
    ric_sharp, scal = lovelock_contractions(raise_first(g.inv, R), [q])[q]
    ric = SymTensor2.from_form(lower_first(g.mat, ric_sharp))
    E = ric if is_zero(scal) else ric + SymTensor2(g.mat).map(lambda v: v * scal * mpq(-1, 2 * q))
    return ric, scal, E


def gravitation(g: Any, q: int, phi: SymTensor2) -> SymTensor2:
    g = _as_metric(g)
    tr = trace(g, phi)
    if is_zero(tr):
        return phi
    return phi + SymTensor2(g.mat).map(lambda v: v * tr * mpq(-1, 2 * q))


def schouten_weyl(g: Any, R: DoubleForm | None = None) -> tuple[SymTensor2, DoubleForm]:
    g = _as_metric(g)
    m = g.dim
    if m < 3:
        raise ValueError("Schouten tensor needs dimension >= 3")
    R = riemann(g) if R is None else R
    ric = ricci(g, R)
    scal = trace(g, ric)
    P = ric.scale(mpq(1, m - 2))
    if not is_zero(scal):
        P = P + SymTensor2(g.mat).map(lambda v: v * scal * mpq(-1, 2 * (m - 1) * (m - 2)))
    W = R - g.form * P.to_form()
    return P, W


# ------------------------------------------------------------ operators

def covariant_derivative(g: MetricForm, t: SymTensor2, gam: list | None = None) -> list:
    """``D[k][i][j] = (nabla_k t)_ij``."""
    m = g.dim
    gam = christoffel(g) if gam is None else gam
    D = [[[0] * m for _ in range(m)] for _ in range(m)]
    for k in range(m):
        for i in range(m):
            for j in range(i, m):
                v = _part(t.mat[i][j], k)
                for l in range(m):
                    v = _add(v, _neg(_add(_mul(gam[l][k][i], t.mat[l][j]), _mul(gam[l][k][j], t.mat[i][l]))))
                D[k][i][j] = D[k][j][i] = v
    return D


def divergence(g: Any, t: SymTensor2, gam: list | None = None) -> OneForm:
    """``(delta t)_i = -g^{jk} (nabla_k t)_ij``."""
    g = _as_metric(g)
    m = g.dim
    D = covariant_derivative(g, t, gam)
    return OneForm([_neg(_sum(_mul(g.inv[j][k], D[k][i][j]) for j in range(m) for k in range(m)))
                    for i in range(m)])


def div_star(g: Any, w: OneForm, gam: list | None = None) -> SymTensor2:
    """``(delta* w)_ij = (w_{i,j} + w_{j,i}) / 2``."""
    g = _as_metric(g)
    m = g.dim
    gam = christoffel(g) if gam is None else gam
    half = mpq(1, 2)
    out = [[0] * m for _ in range(m)]
    for i in range(m):
        for j in range(i, m):
            v = _add(_part(w[i], j), _part(w[j], i))
            c = _sum(_mul(gam[l][i][j], w[l]) for l in range(m))
            if not is_zero(c):
                v = _add(v, c * -2)
            out[i][j] = out[j][i] = 0 if is_zero(v) else v * half
    return SymTensor2(out)


def gradient(f: Any, m: int) -> OneForm:
    return OneForm([_part(f, i) for i in range(m)])


def hessian(g: Any, f: Any, gam: list | None = None) -> SymTensor2:
    g = _as_metric(g)
    return div_star(g, gradient(f, g.dim), gam)


def laplacian(g: Any, t: Any, gam: list | None = None) -> Any:
    """Rough Laplacian ``nabla^* nabla`` on functions or symmetric 2-tensors."""
    g = _as_metric(g)
    m = g.dim
    gam = christoffel(g) if gam is None else gam
    if not isinstance(t, SymTensor2):
        H = hessian(g, t, gam)
        return _neg(trace(g, H))
    D = covariant_derivative(g, t, gam)
    out = [[0] * m for _ in range(m)]
    for i in range(m):
        for j in range(i, m):
            acc: Any = 0
            for l in range(m):
                for k in range(m):
                    gl = g.inv[l][k]
                    if is_zero(gl):
                        continue
                    # (nabla_l nabla t)_{k i j}
                    v = _part(D[k][i][j], l)
                    for p in range(m):
                        v = _add(v, _neg(_add(_add(_mul(gam[p][l][k], D[p][i][j]), _mul(gam[p][l][i], D[k][p][j])),
                                               _mul(gam[p][l][j], D[k][i][p]))))
                    acc = _add(acc, _mul(gl, v))
            out[i][j] = out[j][i] = _neg(acc)
    return SymTensor2(out)


def _raise_both(g: MetricForm, t: SymTensor2) -> list:
    m = g.dim
    tmp = [[_sum(_mul(g.inv[i][a], t.mat[a][j]) for a in range(m)) for j in range(m)] for i in range(m)]
    return [[_sum(_mul(tmp[i][b], g.inv[b][j]) for b in range(m)) for j in range(m)] for i in range(m)]


def lichnerowicz(g: Any, t: SymTensor2, R: DoubleForm | None = None, gam: list | None = None) -> SymTensor2:
    """``Delta_L t = nabla^* nabla t + Ric o t + t o Ric - 2 R(t)``."""
    g = _as_metric(g)
    m = g.dim
    gam = christoffel(g) if gam is None else gam
    R = riemann(g, gam) if R is None else R
    ric = ricci(g, R)
    rough = laplacian(g, t, gam)
    ric_up = [[_sum(_mul(g.inv[i][a], ric.mat[a][j]) for a in range(m)) for j in range(m)] for i in range(m)]
    t_up = _raise_both(g, t)
    out = [[0] * m for _ in range(m)]
    for i in range(m):
        for j in range(i, m):
            v = rough.mat[i][j]
            v = _add(v, _sum(_mul(ric.mat[i][k], _sum(_mul(g.inv[k][l], t.mat[l][j]) for l in range(m)))
                             for k in range(m)))
            v = _add(v, _sum(_mul(t.mat[i][k], ric_up[k][j]) for k in range(m)))
            ring = _sum(_mul(R.get((i, k), (j, l)), t_up[k][l]) for k in range(m) for l in range(m))
            if not is_zero(ring):
                v = _add(v, ring * -2)
            out[i][j] = out[j][i] = v
    return SymTensor2(out)


def diff_ops(g: Any, kind: str, arg: Any) -> Any:
    table = {
        "div": lambda: divergence(g, arg),
        "div_star": lambda: div_star(g, arg),
        "hess": lambda: hessian(g, arg),
        "laplacian": lambda: laplacian(g, arg),
        "lichnerowicz": lambda: lichnerowicz(g, arg),
    }
    if kind not in table:
        raise ValueError(f"unknown operator {kind!r}")
    if kind in ("div", "lichnerowicz") and not isinstance(arg, SymTensor2):
        raise TypeError(f"{kind} needs a symmetric 2-tensor")
    if kind == "div_star" and not isinstance(arg, OneForm):
        raise TypeError("div_star needs a one-form")
    return table[kind]()


def ric_dot(h0: Any, k: SymTensor2) -> tuple[SymTensor2, Any]:
    """First variation of (Ric, scal) at ``h0`` in direction ``k`` (probe based)."""
    h0 = _as_metric(h0)
    base = SymTensor2(h0.mat)

    def ric_of(t: SymTensor2) -> SymTensor2:
        return ricci(MetricForm(t.mat))

    def scal_of(t: SymTensor2) -> Any:
        return scalar_curvature(MetricForm(t.mat))

    if k.is_zero():
        m = h0.dim
        return SymTensor2.zero(m), 0
    dric = nilpotent_probe(ric_of, base, k)
    dscal = nilpotent_probe(scal_of, base, k)
    return dric, dscal
