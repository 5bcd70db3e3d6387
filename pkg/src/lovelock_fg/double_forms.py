"""Kulkarni-Nomizu double forms with ring-valued components.

A form of bidegree (a, b) on an m-dimensional space stores one component per
pair of strictly increasing index tuples.  Internally index sets are
bitmasks; the public accessors take and return tuples.

Contraction against a metric uses ``C(w)_{I,J} = g^{ab} w_{(a,I),(b,J)}``.
For heavy pipelines it is cheaper to raise the first factor once
(:func:`raise_first`): raising commutes with the product and turns every
contraction into a plain trace (:func:`trace_contract`).
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from math import factorial
from typing import Any, Callable, Iterable, Iterator, Sequence

from .ring_jets import FLOAT, Dual, _inv, is_zero, mpq

__all__ = [
    "DoubleForm", "MetricForm", "kn_product", "contract", "metric_power",
    "form_power", "full_norm", "bianchi1", "elem_sym", "raise_first",
    "lower_first", "trace_contract", "mat_inverse", "mask_of", "tuple_of",
]


# ------------------------------------------------------------ index masks

@lru_cache(maxsize=None)
def tuple_of(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def mask_of(idx: Iterable[int]) -> int:
    m = 0
    for i in idx:
        m |= 1 << i
    return m


@lru_cache(maxsize=None)
def _merge_sign(a: int, b: int) -> int:
    """Sign of the shuffle sorting the concatenation (A, B) of disjoint sets."""
    inv = 0
    for i in tuple_of(a):
        inv += (b & ((1 << i) - 1)).bit_count()
    return -1 if inv & 1 else 1


@lru_cache(maxsize=None)
def _submasks(mask: int, k: int) -> tuple[int, ...]:
    return tuple(mask_of(c) for c in combinations(tuple_of(mask), k))


@lru_cache(maxsize=None)
def _masks(m: int, k: int) -> tuple[int, ...]:
    return tuple(mask_of(c) for c in combinations(range(m), k))


def _sort_sign(idx: Sequence[int]) -> tuple[int, int]:
    """(sign, mask) of an arbitrary index sequence; sign 0 on repeats."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return 0, 0
    inv = 0
    for i in range(len(idx)):
        for j in range(i + 1, len(idx)):
            if idx[i] > idx[j]:
                inv += 1
    return (-1 if inv & 1 else 1), mask_of(idx)


def _acc(d: dict, key: Any, val: Any) -> None:
    cur = d.get(key)
    d[key] = val if cur is None else cur + val


def _signed(s: int, v: Any) -> Any:
    return v if s > 0 else -v


# ------------------------------------------------------------ DoubleForm

class DoubleForm:
    """Element of Omega^{a (x) b} in dimension ``dim``."""

    __slots__ = ("dim", "bideg", "comps")

    def __init__(self, dim: int, bideg: tuple[int, int], comps: dict | None = None,
                 _clean: bool = False):
        a, b = bideg
        if not (0 <= a and 0 <= b):
            raise ValueError(f"bad bidegree {bideg}")
        self.dim = dim
        self.bideg = (a, b)
        if _clean:
            self.comps = comps or {}
        else:
            self.comps = {k: v for k, v in (comps or {}).items() if not is_zero(v)}

    # construction --------------------------------------------------------
    @classmethod
    def zero(cls, dim: int, bideg: tuple[int, int]) -> "DoubleForm":
        return cls(dim, bideg, {}, _clean=True)

    @classmethod
    def scalar(cls, dim: int, value: Any) -> "DoubleForm":
        return cls(dim, (0, 0), {(0, 0): value})

    @classmethod
    def from_components(cls, dim: int, bideg: tuple[int, int],
                        entries: dict[tuple[tuple[int, ...], tuple[int, ...]], Any]) -> "DoubleForm":
        """Entries keyed by (I, J) tuples in any order; antisymmetry is applied.

        Each unordered index set must appear at most once.
        """
        comps: dict = {}
        for (I, J), v in entries.items():
            if len(I) != bideg[0] or len(J) != bideg[1]:
                raise ValueError(f"entry {(I, J)} does not match bidegree {bideg}")
            si, mi = _sort_sign(I)
            sj, mj = _sort_sign(J)
            if si == 0 or sj == 0 or is_zero(v):
                continue
            if any(i >= dim or i < 0 for i in (*I, *J)):
                raise ValueError(f"index out of range in {(I, J)}")
            _acc(comps, (mi, mj), _signed(si * sj, v))
        return cls(dim, bideg, comps)

    @classmethod
    def from_matrix(cls, mat: Sequence[Sequence[Any]]) -> "DoubleForm":
        m = len(mat)
        return cls(m, (1, 1), {(1 << i, 1 << j): mat[i][j] for i in range(m) for j in range(m)})

    # access -----------------------------------------------------------------
    def get(self, I: Sequence[int], J: Sequence[int]) -> Any:
        si, mi = _sort_sign(I)
        sj, mj = _sort_sign(J)
        if si == 0 or sj == 0:
            return 0
        v = self.comps.get((mi, mj), 0)
        return v if (si * sj) > 0 or is_zero(v) else -v

    def items(self) -> Iterator[tuple[tuple[int, ...], tuple[int, ...], Any]]:
        for (mi, mj) in sorted(self.comps, key=lambda k: (tuple_of(k[0]), tuple_of(k[1]))):
            yield tuple_of(mi), tuple_of(mj), self.comps[(mi, mj)]

    def matrix(self) -> list[list[Any]]:
        if self.bideg != (1, 1):
            raise ValueError("matrix() needs a (1,1) form")
        m = self.dim
        return [[self.comps.get((1 << i, 1 << j), 0) for j in range(m)] for i in range(m)]

    def scalar_value(self) -> Any:
        if self.bideg != (0, 0):
            raise ValueError("scalar_value() needs a (0,0) form")
        return self.comps.get((0, 0), 0)

    def __repr__(self) -> str:
        return f"DoubleForm(dim={self.dim}, bideg={self.bideg}, {len(self.comps)} comps)"

    # arithmetic -----------------------------------------------------------
    def _same(self, other: "DoubleForm") -> None:
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch {self.dim} vs {other.dim}")
        if other.bideg != self.bideg:
            raise ValueError(f"bidegree mismatch {self.bideg} vs {other.bideg}")

    def __add__(self, other: "DoubleForm") -> "DoubleForm":
        if not isinstance(other, DoubleForm):
            return NotImplemented
        self._same(other)
        out = dict(self.comps)
        for k, v in other.comps.items():
            _acc(out, k, v)
        return DoubleForm(self.dim, self.bideg, out)

    def __neg__(self) -> "DoubleForm":
        return DoubleForm(self.dim, self.bideg, {k: -v for k, v in self.comps.items()}, _clean=True)

    def __sub__(self, other: "DoubleForm") -> "DoubleForm":
        if not isinstance(other, DoubleForm):
            return NotImplemented
        return self + (-other)

    def scale(self, s: Any) -> "DoubleForm":
        return DoubleForm(self.dim, self.bideg, {k: v * s for k, v in self.comps.items()})

    def __mul__(self, other: Any) -> "DoubleForm":
        if isinstance(other, DoubleForm):
            return kn_product(self, other)
        return self.scale(other)

    def __rmul__(self, other: Any) -> "DoubleForm":
        return DoubleForm(self.dim, self.bideg, {k: other * v for k, v in self.comps.items()})

    def map(self, fn: Callable[[Any], Any]) -> "DoubleForm":
        return DoubleForm(self.dim, self.bideg, {k: fn(v) for k, v in self.comps.items()})

    _map_components = map

    def _dual_lift(self, direction: "DoubleForm") -> "DoubleForm":
        self._same(direction)
        keys = set(self.comps) | set(direction.comps)
        return DoubleForm(self.dim, self.bideg,
                          {k: Dual(self.comps.get(k, 0), direction.comps.get(k, 0)) for k in keys})

    def transpose(self) -> "DoubleForm":
        a, b = self.bideg
        return DoubleForm(self.dim, (b, a), {(j, i): v for (i, j), v in self.comps.items()}, _clean=True)

    def is_zero(self) -> bool:
        return all(is_zero(v) for v in self.comps.values())

    def is_symmetric(self) -> bool:
        return self.bideg[0] == self.bideg[1] and self == self.transpose()

    def truncate_y(self, d: int) -> "DoubleForm":
        return self.map(lambda v: v.truncate(d) if hasattr(v, "truncate") else v.truncate_y(d))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DoubleForm):
            if isinstance(other, int) and other == 0:
                return self.is_zero()
            return NotImplemented
        if other.dim != self.dim or other.bideg != self.bideg:
            return False
        for k in set(self.comps) | set(other.comps):
            a = self.comps.get(k, 0)
            b = other.comps.get(k, 0)
            if is_zero(a):
                if not is_zero(b):
                    return False
            elif is_zero(b):
                if not is_zero(a):
                    return False
            elif not (a == b):
                return False
        return True

    __hash__ = None  # type: ignore[assignment]

    def to_json(self, value_encoder: Callable[[Any], Any]) -> dict:
        return {
            "dim": self.dim,
            "bidegree": list(self.bideg),
            "entries": [{"I": list(I), "J": list(J), "value": value_encoder(v)} for I, J, v in self.items()],
        }

    @classmethod
    def from_json(cls, doc: dict, value_decoder: Callable[[Any], Any]) -> "DoubleForm":
        ents = {(tuple(e["I"]), tuple(e["J"])): value_decoder(e["value"]) for e in doc["entries"]}
        return cls.from_components(int(doc["dim"]), tuple(doc["bidegree"]), ents)


# -------------------------------------------------------------- matrices

def mat_inverse(mat: Sequence[Sequence[Any]]) -> list[list[Any]]:
    """Gauss-Jordan inverse over a ring whose diagonal pivots are units.

    Positive-definite inputs always qualify (leading minors have nonzero
    constant terms), so no pivoting is attempted.
    """
    n = len(mat)
    A = [list(row) for row in mat]
    inv: list[list[Any]] = [[mpq(1) if i == j else 0 for j in range(n)] for i in range(n)]
    for c in range(n):
        pinv = _inv(A[c][c])
        A[c] = [_m(pinv, v) for v in A[c]]
        inv[c] = [_m(pinv, v) for v in inv[c]]
        for r in range(n):
            if r == c:
                continue
            f = A[r][c]
            if is_zero(f):
                continue
            A[r] = [_s(v, _m(f, w)) for v, w in zip(A[r], A[c])]
            inv[r] = [_s(v, _m(f, w)) for v, w in zip(inv[r], inv[c])]
    return inv


def _m(a: Any, b: Any) -> Any:
    if (isinstance(a, int) and a == 0) or (isinstance(b, int) and b == 0):
        return 0
    return a * b


def _s(a: Any, b: Any) -> Any:
    if isinstance(b, int) and b == 0:
        return a
    if isinstance(a, int) and a == 0:
        return -b
    return a - b


def _float_close(a: Any, b: Any, tol: float = 1e-9) -> bool:
    """Float-mode round-off tolerance; exact entries never pass."""
    def size(v: Any) -> tuple[bool, float]:
        if isinstance(v, Dual):
            (e1, s1), (e2, s2) = size(v.a), size(v.b)
            return e1 and e2, max(s1, s2)
        if hasattr(v, "max_abs"):
            return v.exact, float(v.max_abs())
        return not isinstance(v, FLOAT), abs(float(v))
    exact, err = size(a - b)
    return not exact and err <= tol


class MetricForm:
    """Symmetric (1,1) form together with its inverse components ``g^{ij}``."""

    __slots__ = ("form", "mat", "inv", "dim")

    def __init__(self, mat: Sequence[Sequence[Any]], inv: Sequence[Sequence[Any]] | None = None):
        m = len(mat)
        mat = [list(r) for r in mat]
        for i in range(m):
            for j in range(i + 1, m):
                a, b = mat[i][j], mat[j][i]
                if not (is_zero(a) and is_zero(b)) and not (a == b):
                    if not _float_close(a, b):
                        raise ValueError("metric matrix is not symmetric")
                    mat[j][i] = a
        self.dim = m
        self.mat = mat
        self.form = DoubleForm.from_matrix(self.mat)
        self.inv = [list(r) for r in inv] if inv is not None else mat_inverse(self.mat)

    def _map_components(self, fn: Callable[[Any], Any]) -> "MetricForm":
        return MetricForm([[fn(v) for v in r] for r in self.mat],
                          [[fn(v) for v in r] for r in self.inv])

    def _dual_lift(self, direction: Any) -> "MetricForm":
        dm = direction.matrix() if isinstance(direction, DoubleForm) else direction
        m = self.dim
        return MetricForm([[Dual(self.mat[i][j], dm[i][j]) for j in range(m)] for i in range(m)])


# -------------------------------------------------------------- products

def kn_product(w: DoubleForm, t: DoubleForm, keys: Iterable[tuple[int, int]] | None = None) -> DoubleForm:
    """Kulkarni-Nomizu product; ``keys`` optionally restricts the output masks."""
    if w.dim != t.dim:
        raise ValueError(f"dimension mismatch {w.dim} vs {t.dim}")
    m = w.dim
    a = w.bideg[0] + t.bideg[0]
    b = w.bideg[1] + t.bideg[1]
    if a > m or b > m:
        return DoubleForm.zero(m, (a, b))
    out: dict = {}
    if keys is not None:
        ka, kb = w.bideg
        wc, tc = w.comps, t.comps
        for (I, J) in keys:
            acc = None
            for I1 in _submasks(I, ka):
                I2 = I ^ I1
                si = _merge_sign(I1, I2)
                for J1 in _submasks(J, kb):
                    x = wc.get((I1, J1))
                    if x is None:
                        continue
                    y = tc.get((I2, J ^ J1))
                    if y is None:
                        continue
                    p = x * y
                    if si * _merge_sign(J1, J ^ J1) < 0:
                        p = -p
                    acc = p if acc is None else acc + p
            if acc is not None:
                out[(I, J)] = acc
        return DoubleForm(m, (a, b), out)
    square = w is t and (w.bideg[0] * w.bideg[0] + w.bideg[1] * w.bideg[1]) % 2 == 0
    witems = list(w.comps.items())
    titems = witems if w is t else list(t.comps.items())
    for n1, ((I1, J1), x) in enumerate(witems):
        start = n1 if square else 0
        for (I2, J2), y in titems[start:]:
            if I1 & I2 or J1 & J2:
                continue
            p = x * y
            if square and (I2, J2) != (I1, J1):
                p = p + p
            if _merge_sign(I1, I2) * _merge_sign(J1, J2) < 0:
                p = -p
            _acc(out, (I1 | I2, J1 | J2), p)
    return DoubleForm(m, (a, b), out)


def form_power(w: DoubleForm, k: int) -> DoubleForm:
    m = w.dim
    if k == 0:
        return DoubleForm.scalar(m, mpq(1))
    out = w
    for _ in range(k - 1):
        out = kn_product(out, w)
    return out


def metric_power(g: MetricForm, k: int) -> DoubleForm:
    """``g**k``; the zero form of bidegree (k, k) once ``k > dim``."""
    if k < 0:
        raise ValueError("negative metric power")
    if k > g.dim:
        return DoubleForm.zero(g.dim, (k, k))
    return form_power(g.form, k)


def contract(g: MetricForm, w: DoubleForm, times: int = 1) -> DoubleForm:
    """``C_g^times(w)``; zero when either degree is exhausted."""
    out = w
    for _ in range(times):
        out = _contract_once(g.inv, out)
    return out


def _contract_once(ginv: Sequence[Sequence[Any]], w: DoubleForm) -> DoubleForm:
    a, b = w.bideg
    m = w.dim
    if a == 0 or b == 0:
        return DoubleForm.zero(m, (max(a - 1, 0), max(b - 1, 0)))
    out: dict = {}
    for (K, L), v in w.comps.items():
        for i in tuple_of(K):
            I = K ^ (1 << i)
            si = (I & ((1 << i) - 1)).bit_count() & 1
            for j in tuple_of(L):
                gij = ginv[i][j]
                if is_zero(gij):
                    continue
                J = L ^ (1 << j)
                sj = (J & ((1 << j) - 1)).bit_count() & 1
                p = gij * v
                _acc(out, (I, J), -p if si ^ sj else p)
    return DoubleForm(m, (a - 1, b - 1), out)


def trace_contract(w: DoubleForm, times: int = 1,
                   keys: Iterable[tuple[int, int]] | None = None) -> DoubleForm:
    """Contraction of a form whose first factor has been raised.

    ``C^p(w)_{I,J} = p! * sum_K sgn(K,I) sgn(K,J) w_{K+I, K+J}`` over p-sets K
    disjoint from I and J.  No ring multiplications are needed.
    """
    a, b = w.bideg
    m = w.dim
    if times == 0:
        return w
    if a < times or b < times:
        return DoubleForm.zero(m, (max(a - times, 0), max(b - times, 0)))
    f = factorial(times)
    full = (1 << m) - 1
    out: dict = {}
    if keys is None:
        for (KI, KJ), v in w.comps.items():
            common = KI & KJ
            for K in _submasks(common, times):
                I, J = KI ^ K, KJ ^ K
                s = _merge_sign(K, I) * _merge_sign(K, J)
                _acc(out, (I, J), v if s > 0 else -v)
    else:
        wc = w.comps
        for (I, J) in keys:
            acc = None
            for K in _submasks(full & ~(I | J), times):
                v = wc.get((K | I, K | J))
                if v is None:
                    continue
                if _merge_sign(K, I) * _merge_sign(K, J) < 0:
                    v = -v
                acc = v if acc is None else acc + v
            if acc is not None:
                out[(I, J)] = acc
    if f != 1:
        out = {k: v * f for k, v in out.items()}
    return DoubleForm(m, (a - times, b - times), out)


def _minors(G: Sequence[Sequence[Any]], k: int) -> dict[tuple[int, int], Any]:
    """All k x k minors ``det G[I, K]`` keyed by row/column masks."""
    m = len(G)
    cur: dict[tuple[int, int], Any] = {(1 << i, 1 << j): G[i][j] for i in range(m) for j in range(m)
                                       if not is_zero(G[i][j])}
    for size in range(2, k + 1):
        nxt: dict[tuple[int, int], Any] = {}
        for I in _masks(m, size):
            rows = tuple_of(I)
            r0, rest = rows[0], I ^ (1 << rows[0])
            for K in _masks(m, size):
                acc = None
                for pos, c in enumerate(tuple_of(K)):
                    x = G[r0][c]
                    if is_zero(x):
                        continue
                    sub = cur.get((rest, K ^ (1 << c)))
                    if sub is None:
                        continue
                    p = x * sub
                    if pos & 1:
                        p = -p
                    acc = p if acc is None else acc + p
                if acc is not None and not is_zero(acc):
                    nxt[(I, K)] = acc
        cur = nxt
    return cur


def raise_first(ginv: Sequence[Sequence[Any]], w: DoubleForm) -> DoubleForm:
    """Raise every index of the first factor with ``ginv``."""
    a = w.bideg[0]
    if a == 0:
        return w
    lam = _minors(ginv, a)
    by_row: dict[int, list[tuple[int, Any]]] = {}
    for (I, K), v in lam.items():
        by_row.setdefault(K, []).append((I, v))
    out: dict = {}
    for (K, J), v in w.comps.items():
        for I, c in by_row.get(K, ()):
            _acc(out, (I, J), c * v)
    return DoubleForm(w.dim, w.bideg, out)


def lower_first(gmat: Sequence[Sequence[Any]], w: DoubleForm) -> DoubleForm:
    return raise_first(gmat, w)


def full_norm(g: MetricForm, w: DoubleForm) -> Any:
    """``w_{IJ} w^{IJ}`` summed over all index tuples."""
    a, b = w.bideg
    if a != b:
        raise ValueError("full_norm needs a square bidegree")
    up = raise_first(g.inv, raise_first(g.inv, w).transpose()).transpose()
    acc: Any = 0
    for k, v in w.comps.items():
        u = up.comps.get(k)
        if u is not None:
            acc = acc + v * u
    f = factorial(a) ** 2
    return acc * f


def bianchi1(w: DoubleForm) -> DoubleForm:
    """First Bianchi operator Omega^{a,b} -> Omega^{a+1,b-1}."""
    a, b = w.bideg
    if b == 0:
        raise ValueError("bianchi1 needs b >= 1")
    m = w.dim
    if a + 1 > m:
        return DoubleForm.zero(m, (a + 1, b - 1))
    out: dict = {}
    for (K, L), v in w.comps.items():
        # contributes to V = K + {j} with j taken from L, W = L - {j}
        for j in tuple_of(L):
            if K & (1 << j):
                continue
            V = K | (1 << j)
            W = L ^ (1 << j)
            pos = (V & ((1 << j) - 1)).bit_count()  # 0-based slot of j in V
            # omega((V - V_j), (V_j, W)): reorder (j, W) into L
            s = -1 if ((pos + 1) & 1) else 1
            if (W & ((1 << j) - 1)).bit_count() & 1:
                s = -s
            _acc(out, (V, W), v if s > 0 else -v)
    return DoubleForm(m, (a + 1, b - 1), out)


def elem_sym(g: MetricForm, w: DoubleForm, k: int) -> Any:
    """``sigma_k`` of the endomorphism ``g^{-1} w`` via Newton's identities."""
    m = g.dim
    if w.bideg != (1, 1):
        raise ValueError("elem_sym needs a (1,1) form")
    if k < 0 or k > m:
        raise ValueError(f"k={k} outside 0..{m}")
    if k == 0:
        return mpq(1)
    wm = w.matrix()
    A = [[_dot([g.inv[i][c] for c in range(m)], [wm[c][j] for c in range(m)]) for j in range(m)]
         for i in range(m)]
    powers = [A]
    for _ in range(k - 1):
        P = powers[-1]
        powers.append([[_dot(P[i], [A[c][j] for c in range(m)]) for j in range(m)] for i in range(m)])
    p = [None] + [_trace(P) for P in powers]
    e: list[Any] = [mpq(1)]
    for r in range(1, k + 1):
        acc: Any = 0
        for i in range(1, r + 1):
            t = e[r - i] * p[i]
            acc = acc + t if i % 2 == 1 else acc - t
        e.append(acc * mpq(1, r))
    return e[k]


def _dot(u: Sequence[Any], v: Sequence[Any]) -> Any:
    acc: Any = 0
    for a, b in zip(u, v):
        if is_zero(a) or is_zero(b):
            continue
        acc = acc + a * b
    return acc


def _trace(P: Sequence[Sequence[Any]]) -> Any:
    acc: Any = 0
    for i in range(len(P)):
        acc = acc + P[i][i]
    return acc
