"""Exact coefficient rings.

* rationals are ``gmpy2.mpq``; float mode uses Python floats,
* :class:`Jet` is a truncated multivariate power series,
* :class:`XSeries` is a truncated power series in the boundary defining
  function ``x`` over any coefficient ring,
* :class:`Dual` adjoins an ``eps`` with ``eps**2 == 0`` to any ring.

The rings nest in a fixed order (number < Jet < XSeries < Dual).  Binary
operators handle operands at or below their own level and return
``NotImplemented`` otherwise, so mixed expressions always resolve to the
outermost ring.
"""
from __future__ import annotations

import threading
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Any, Callable, Iterable, Sequence

from gmpy2 import mpfr, mpq, mpz

__all__ = [
    "Q", "parse_rational", "format_rational", "is_exact_scalar", "is_zero",
    "Jet", "XSeries", "Dual", "nilpotent_probe", "dual_lift", "eps_part",
    "std_part", "JetError", "DimensionError", "NotAUnitError", "ModeError",
    "DegreeError", "mono_table", "FLOAT",
]

MPQ = type(mpq(0))
MPZ = type(mpz(0))
MPFR = type(mpfr(0))
FLOAT = (float, MPFR)


class JetError(ValueError):
    pass


class DimensionError(JetError):
    pass


class NotAUnitError(JetError, ZeroDivisionError):
    pass


class ModeError(TypeError):
    pass


class DegreeError(JetError):
    """Raised when an operation needs more reliable jet degree than available."""


# ---------------------------------------------------------------- scalars

def Q(value: Any) -> Any:
    """Coerce ints, Fractions, mpq and ``"p/q"`` strings to ``mpq``.

    Floats pass through unchanged (float mode).
    """
    if isinstance(value, MPQ):
        return value
    if isinstance(value, FLOAT):
        return float(value)
    if isinstance(value, (int, MPZ)):
        return mpq(value)
    if isinstance(value, Fraction):
        return mpq(value.numerator, value.denominator)
    if isinstance(value, str):
        return parse_rational(value)
    raise TypeError(f"cannot interpret {value!r} as a scalar")


def parse_rational(text: str) -> Any:
    s = text.strip()
    if not s:
        raise ValueError("empty rational")
    try:
        if "/" in s:
            p, q = s.split("/")
            den = int(q)
            if den == 0:
                raise ValueError(f"zero denominator in {text!r}")
            return mpq(int(p), den)
        return mpq(int(s))
    except ValueError as exc:
        raise ValueError(f"not a rational: {text!r}") from exc


def format_rational(value: Any) -> str:
    """Canonical ``"p/q"`` text; integers keep the ``/1`` denominator."""
    if isinstance(value, FLOAT):
        return repr(value)
    v = Q(value)
    return f"{v.numerator}/{v.denominator}"


def is_exact_scalar(v: Any) -> bool:
    return isinstance(v, (MPQ, int, MPZ, Fraction))


def is_zero(v: Any) -> bool:
    if isinstance(v, (int, float, MPFR, MPQ, MPZ, Fraction)):
        return v == 0
    return v.is_zero()


def _mode_of(v: Any) -> bool:
    """True for exact scalars."""
    return not isinstance(v, FLOAT)


# ------------------------------------------------------- monomial tables

class _MonoTable:
    """Graded-lex monomial indexing for a fixed number of variables.

    Monomials of degree <= d form a prefix of the index range, so truncating
    a jet reduces to an index bound.
    """

    def __init__(self, nv: int):
        self.nv = nv
        self.exps: list[tuple[int, ...]] = []
        self.index: dict[tuple[int, ...], int] = {}
        self.degs: list[int] = []
        self.count: list[int] = []
        self.dmax = -1
        self.mul: list[list[int]] = []
        self.part: list[list[tuple[int, int]]] = []
        self._lock = threading.Lock()

    def _monos_of_degree(self, d: int) -> list[tuple[int, ...]]:
        out = []
        for combo in combinations_with_replacement(range(self.nv), d):
            e = [0] * self.nv
            for v in combo:
                e[v] += 1
            out.append(tuple(e))
        # combinations_with_replacement yields descending-lex exponent order
        return out

    def ensure(self, d: int) -> None:
        if d <= self.dmax:
            return
        with self._lock:
            if d <= self.dmax:
                return
            for k in range(self.dmax + 1, d + 1):
                for e in self._monos_of_degree(k):
                    self.index[e] = len(self.exps)
                    self.exps.append(e)
                    self.degs.append(k)
                self.count.append(len(self.exps))
            nv, index, exps = self.nv, self.index, self.exps
            mul = []
            count = self.count
            for i, ei in enumerate(exps):
                lim = count[d - self.degs[i]]
                mul.append([index[tuple(a + b for a, b in zip(ei, exps[j]))]
                            for j in range(lim)])
            part = []
            for v in range(nv):
                row = []
                for ei in exps:
                    if ei[v] == 0:
                        row.append((-1, 0))
                    else:
                        e2 = list(ei)
                        e2[v] -= 1
                        row.append((index[tuple(e2)], ei[v]))
                part.append(row)
            self.mul, self.part = mul, part
            self.dmax = d


_TABLES: dict[int, _MonoTable] = {}
_TABLES_LOCK = threading.Lock()


def mono_table(nv: int, d: int) -> _MonoTable:
    t = _TABLES.get(nv)
    if t is None:
        with _TABLES_LOCK:
            t = _TABLES.setdefault(nv, _MonoTable(nv))
    t.ensure(d)
    return t


# ------------------------------------------------------------------ Jet

class Jet:
    """Truncated power series in ``nv`` variables with reliable degree ``deg``.

    Coefficients live in a sparse dict keyed by graded-lex monomial index.
    Equality compares coefficients up to the smaller of the two degrees.
    """

    __slots__ = ("nv", "deg", "c", "exact")

    def __init__(self, nv: int, deg: int, coeffs: dict[int, Any] | None = None,
                 exact: bool = True, _trusted: bool = False):
        if nv < 1:
            raise DimensionError("a jet needs at least one variable")
        if deg < 0:
            raise DegreeError(f"negative jet degree {deg}")
        self.nv = nv
        self.deg = deg
        self.exact = exact
        if _trusted:
            self.c = coeffs if coeffs is not None else {}
            return
        tab = mono_table(nv, deg)
        lim = tab.count[deg]
        c = {}
        for k, v in (coeffs or {}).items():
            if k < lim and v != 0:
                if _mode_of(v) != exact:
                    raise ModeError("scalar mode does not match jet mode")
                c[k] = Q(v) if exact else float(v)
        self.c = c

    # construction ---------------------------------------------------
    @classmethod
    def const(cls, nv: int, deg: int, value: Any = 1) -> "Jet":
        v = Q(value)
        return cls(nv, deg, {0: v} if v != 0 else {}, exact=_mode_of(v), _trusted=True)

    @classmethod
    def zero(cls, nv: int, deg: int, exact: bool = True) -> "Jet":
        return cls(nv, deg, {}, exact=exact, _trusted=True)

    @classmethod
    def var(cls, nv: int, deg: int, i: int, shift: Any = 0) -> "Jet":
        """The coordinate ``y_i`` (plus an optional constant)."""
        if not 0 <= i < nv:
            raise DimensionError(f"variable index {i} out of range for {nv} variables")
        c = {}
        if shift != 0:
            c[0] = Q(shift)
        if deg >= 1:
            tab = mono_table(nv, 1)
            e = [0] * nv
            e[i] = 1
            c[tab.index[tuple(e)]] = mpq(1)
        return cls(nv, deg, c, _trusted=True)

    @classmethod
    def from_terms(cls, nv: int, deg: int, terms: dict[tuple[int, ...], Any] | Iterable,
                   exact: bool = True) -> "Jet":
        """Build from ``{exponent tuple: coefficient}``; terms above ``deg`` are dropped."""
        items = terms.items() if isinstance(terms, dict) else terms
        tab = mono_table(nv, deg)
        c: dict[int, Any] = {}
        for e, v in items:
            e = tuple(e)
            if len(e) != nv:
                raise DimensionError(f"exponent {e} has wrong length for {nv} variables")
            if sum(e) > deg:
                continue
            k = tab.index[e]
            c[k] = c.get(k, 0) + (Q(v) if exact else float(v))
        return cls(nv, deg, {k: v for k, v in c.items() if v != 0}, exact=exact, _trusted=True)

    def terms(self) -> list[tuple[tuple[int, ...], Any]]:
        """Nonzero terms in graded-lex order."""
        tab = mono_table(self.nv, self.deg)
        return [(tab.exps[k], self.c[k]) for k in sorted(self.c)]

    # basic queries ---------------------------------------------------
    def is_zero(self) -> bool:
        return not self.c

    def constant(self) -> Any:
        return self.c.get(0, mpq(0) if self.exact else 0.0)

    def coeff(self, exponent: Sequence[int]) -> Any:
        tab = mono_table(self.nv, max(self.deg, sum(exponent)))
        return self.c.get(tab.index[tuple(exponent)], mpq(0) if self.exact else 0.0)

    def max_abs(self) -> Any:
        return max((abs(v) for v in self.c.values()), default=mpq(0))

    def __repr__(self) -> str:
        if not self.c:
            return f"Jet(0; nv={self.nv}, deg={self.deg})"
        parts = []
        for e, v in self.terms()[:8]:
            mono = "*".join(f"y{i}^{p}" if p > 1 else f"y{i}" for i, p in enumerate(e) if p)
            parts.append(f"{v}" + (f"*{mono}" if mono else ""))
        more = " + ..." if len(self.c) > 8 else ""
        return f"Jet({' + '.join(parts)}{more}; deg={self.deg})"

    # helpers -----------------------------------------------------------
    def _check(self, other: "Jet") -> None:
        if other.nv != self.nv:
            raise DimensionError(f"jets in {self.nv} and {other.nv} variables")
        if other.exact != self.exact:
            raise ModeError("cannot mix exact and float jets")

    def _coerce_scalar(self, s: Any) -> Any:
        if isinstance(s, FLOAT):
            if self.exact:
                raise ModeError("float scalar in an exact computation")
            return s
        if not self.exact:
            return float(s)
        return Q(s)

    def to_float(self) -> "Jet":
        return Jet(self.nv, self.deg, {k: float(v) for k, v in self.c.items()}, exact=False, _trusted=True)

    def truncate(self, d: int) -> "Jet":
        if d >= self.deg:
            return self
        if d < 0:
            raise DegreeError(f"cannot truncate to negative degree {d}")
        lim = mono_table(self.nv, d).count[d]
        return Jet(self.nv, d, {k: v for k, v in self.c.items() if k < lim},
                   exact=self.exact, _trusted=True)

    # arithmetic ----------------------------------------------------------
    def __add__(self, other: Any) -> "Jet":
        if isinstance(other, Jet):
            self._check(other)
            d = min(self.deg, other.deg)
            a, b = (self, other) if len(self.c) >= len(other.c) else (other, self)
            lim = mono_table(self.nv, d).count[d]
            out = {k: v for k, v in a.c.items() if k < lim} if a.deg > d else dict(a.c)
            for k, v in b.c.items():
                if k < lim:
                    s = out.get(k)
                    if s is None:
                        out[k] = v
                    else:
                        s = s + v
                        if s:
                            out[k] = s
                        else:
                            del out[k]
            return Jet(self.nv, d, out, exact=self.exact, _trusted=True)
        if isinstance(other, (int, float, MPFR, MPQ, MPZ, Fraction)):
            s = self._coerce_scalar(other)
            if s == 0:
                return self
            out = dict(self.c)
            v = out.get(0, 0) + s
            if v:
                out[0] = v
            else:
                out.pop(0, None)
            return Jet(self.nv, self.deg, out, exact=self.exact, _trusted=True)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self) -> "Jet":
        return Jet(self.nv, self.deg, {k: -v for k, v in self.c.items()},
                   exact=self.exact, _trusted=True)

    def __sub__(self, other: Any) -> "Jet":
        if isinstance(other, (Jet, int, float, MPQ, MPZ, Fraction)):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other: Any) -> "Jet":
        return (-self) + other

    def scale(self, s: Any) -> "Jet":
        s = self._coerce_scalar(s)
        if s == 0:
            return Jet(self.nv, self.deg, {}, exact=self.exact, _trusted=True)
        if s == 1:
            return self
        return Jet(self.nv, self.deg, {k: v * s for k, v in self.c.items()},
                   exact=self.exact, _trusted=True)

    def __mul__(self, other: Any) -> "Jet":
        if isinstance(other, Jet):
            return self.mul_to(other, min(self.deg, other.deg))
        if isinstance(other, (int, float, MPFR, MPQ, MPZ, Fraction)):
            return self.scale(other)
        return NotImplemented

    def mul_to(self, other: "Jet", d: int) -> "Jet":
        """Product truncated to degree ``d`` (at most the smaller input degree)."""
        self._check(other)
        d = min(d, self.deg, other.deg)
        a, b = self.c, other.c
        if not a or not b:
            return Jet(self.nv, d, {}, exact=self.exact, _trusted=True)
        if len(b) == 1 and 0 in b:
            return self.truncate(d).scale(b[0])
        if len(a) == 1 and 0 in a:
            return other.truncate(d).scale(a[0])
        tab = mono_table(self.nv, d)
        count, degs, mul = tab.count, tab.degs, tab.mul
        lim = count[d]
        if len(a) < len(b):
            a, b = b, a
        bitems = sorted((j, v) for j, v in b.items() if j < lim)
        out: dict[int, Any] = {}
        get = out.get
        for i, ai in a.items():
            if i >= lim:
                continue
            row = mul[i]
            L = count[d - degs[i]]
            for j, bj in bitems:
                if j >= L:
                    break
                k = row[j]
                out[k] = get(k, 0) + ai * bj
        return Jet(self.nv, d, {k: v for k, v in out.items() if v},
                   exact=self.exact, _trusted=True)

    __rmul__ = __mul__

    def __pow__(self, p: int) -> "Jet":
        if p < 0:
            return self.inverse() ** (-p)
        out = Jet.const(self.nv, self.deg, 1) if self.exact else Jet(self.nv, self.deg, {0: 1.0}, exact=False)
        base = self
        while p:
            if p & 1:
                out = out * base
            base = base * base
            p >>= 1
        return out

    def inverse(self) -> "Jet":
        """Two-sided inverse up to the truncation degree."""
        c0 = self.c.get(0)
        if c0 is None or c0 == 0:
            raise NotAUnitError("jet with zero constant term is not invertible")
        inv0 = (1 / c0) if not self.exact else mpq(1) / c0
        # 1/(c0(1+t)) = inv0 * sum (-t)^k, t nilpotent modulo degree
        t = self.scale(inv0) - 1
        acc = Jet.const(self.nv, self.deg, 1) if self.exact else Jet(self.nv, self.deg, {0: 1.0}, exact=False)
        for _ in range(self.deg):
            acc = 1 - t * acc
        return acc.scale(inv0)

    def __truediv__(self, other: Any) -> "Jet":
        if isinstance(other, Jet):
            return self * other.inverse()
        if isinstance(other, (int, float, MPFR, MPQ, MPZ, Fraction)):
            s = self._coerce_scalar(other)
            if s == 0:
                raise NotAUnitError("division by zero scalar")
            return self.scale((1 / s) if not self.exact else mpq(1) / s)
        return NotImplemented

    def __rtruediv__(self, other: Any) -> "Jet":
        return self.inverse() * other

    def exp(self) -> "Jet":
        """exp of a jet with zero constant term."""
        if self.c.get(0, 0) != 0:
            raise JetError("exp needs a zero constant term to stay exact")
        acc = Jet.const(self.nv, self.deg, 1)
        term = Jet.const(self.nv, self.deg, 1)
        for k in range(1, self.deg + 1):
            term = (term * self).scale(mpq(1, k))
            acc = acc + term
        return acc

    def partial(self, i: int) -> "Jet":
        """Formal partial derivative; the reliable degree drops by one."""
        if not 0 <= i < self.nv:
            raise DimensionError(f"variable index {i} out of range")
        if self.deg == 0:
            raise DegreeError("cannot differentiate a degree-0 jet")
        tab = mono_table(self.nv, self.deg)
        lim = tab.count[self.deg - 1]
        prow = tab.part[i]
        out = {}
        for k, v in self.c.items():
            t, f = prow[k]
            if t >= 0 and t < lim:
                out[t] = v * f
        return Jet(self.nv, self.deg - 1, out, exact=self.exact, _trusted=True)

    def truncate_y(self, d: int) -> "Jet":
        return self.truncate(d)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Jet):
            if other.nv != self.nv:
                return False
            d = min(self.deg, other.deg)
            return self.truncate(d).c == other.truncate(d).c
        if isinstance(other, (int, float, MPFR, MPQ, MPZ, Fraction)):
            if other == 0:
                return not self.c
            return len(self.c) == 1 and self.c.get(0) == other
        return NotImplemented

    __hash__ = None  # type: ignore[assignment]

    def to_json(self) -> dict:
        return {
            "num_vars": self.nv,
            "degree": self.deg,
            "terms": [{"exp": list(e), "coeff": format_rational(v)} for e, v in self.terms()],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Jet":
        nv, deg = int(doc["num_vars"]), int(doc["degree"])
        return cls.from_terms(nv, deg, {tuple(t["exp"]): parse_rational(t["coeff"]) for t in doc["terms"]})


# --------------------------------------------------------------- XSeries

def _is_num(v: Any) -> bool:
    return isinstance(v, (int, float, MPFR, MPQ, MPZ, Fraction))


class XSeries:
    """``sum_k coeffs[k] x^k`` truncated after ``x^trunc``.

    A coefficient equal to the Python integer ``0`` is a structural zero and is
    skipped by the arithmetic; any ring element is accepted otherwise.
    """

    __slots__ = ("trunc", "coeffs")

    def __init__(self, coeffs: Sequence[Any], trunc: int | None = None):
        cs = list(coeffs)
        if trunc is None:
            trunc = len(cs) - 1
        if trunc < 0:
            raise DegreeError("negative x-truncation")
        if len(cs) > trunc + 1:
            cs = cs[: trunc + 1]
        cs = [0 if _is_num(c) and c == 0 else c for c in cs]
        cs += [0] * (trunc + 1 - len(cs))
        self.trunc = trunc
        self.coeffs = cs

    @classmethod
    def monomial(cls, coeff: Any, power: int, trunc: int) -> "XSeries":
        cs = [0] * (trunc + 1)
        if power <= trunc:
            cs[power] = coeff
        return cls(cs, trunc)

    def __repr__(self) -> str:
        return f"XSeries(trunc={self.trunc}, {self.coeffs!r})"

    def __getitem__(self, k: int) -> Any:
        return self.coeffs[k] if 0 <= k <= self.trunc else 0

    def is_zero(self) -> bool:
        return all(c == 0 if _is_num(c) else c.is_zero() for c in self.coeffs)

    def lowest_order(self) -> int | None:
        for k, c in enumerate(self.coeffs):
            if not is_zero(c):
                return k
        return None

    def map(self, fn: Callable[[Any], Any]) -> "XSeries":
        return XSeries([0 if (_is_num(c) and c == 0) else fn(c) for c in self.coeffs], self.trunc)

    def with_trunc(self, n: int) -> "XSeries":
        if n > self.trunc:
            raise DegreeError(f"cannot extend truncation {self.trunc} to {n}")
        return XSeries(self.coeffs[: n + 1], n)

    def __add__(self, other: Any) -> "XSeries":
        if isinstance(other, XSeries):
            n = min(self.trunc, other.trunc)
            out = []
            for a, b in zip(self.coeffs[: n + 1], other.coeffs[: n + 1]):
                if _is_num(a) and a == 0:
                    out.append(b)
                elif _is_num(b) and b == 0:
                    out.append(a)
                else:
                    out.append(a + b)
            return XSeries(out, n)
        if isinstance(other, Dual):
            return NotImplemented
        cs = list(self.coeffs)
        cs[0] = other if (_is_num(cs[0]) and cs[0] == 0) else cs[0] + other
        return XSeries(cs, self.trunc)

    __radd__ = __add__

    def __neg__(self) -> "XSeries":
        return self.map(lambda c: -c)

    def __sub__(self, other: Any) -> "XSeries":
        if isinstance(other, Dual):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other: Any) -> "XSeries":
        return (-self) + other

    def __mul__(self, other: Any) -> "XSeries":
        if isinstance(other, XSeries):
            n = min(self.trunc, other.trunc)
            a = [(i, c) for i, c in enumerate(self.coeffs[: n + 1]) if not (_is_num(c) and c == 0)]
            b = [(j, c) for j, c in enumerate(other.coeffs[: n + 1]) if not (_is_num(c) and c == 0)]
            out: list[Any] = [0] * (n + 1)
            # reliable y-degree of each output slot: the min over contributing pairs
            tgt: list[Any] = [None] * (n + 1)
            for i, ai in a:
                da = ai.deg if isinstance(ai, Jet) else None
                for j, bj in b:
                    k = i + j
                    if k > n:
                        break
                    db = bj.deg if isinstance(bj, Jet) else None
                    d = da if db is None else (db if da is None else min(da, db))
                    if d is not None and (tgt[k] is None or d < tgt[k]):
                        tgt[k] = d
            for i, ai in a:
                ja = isinstance(ai, Jet)
                for j, bj in b:
                    k = i + j
                    if k > n:
                        break
                    if ja and isinstance(bj, Jet):
                        p = ai.mul_to(bj, tgt[k])
                    else:
                        p = ai * bj
                    out[k] = p if (_is_num(out[k]) and out[k] == 0) else out[k] + p
            return XSeries(out, n)
        if isinstance(other, Dual):
            return NotImplemented
        if _is_num(other) and other == 0:
            return XSeries([], self.trunc)
        return self.map(lambda c: c * other)

    def __rmul__(self, other: Any) -> "XSeries":
        if isinstance(other, Dual):
            return NotImplemented
        if _is_num(other) and other == 0:
            return XSeries([], self.trunc)
        return self.map(lambda c: other * c)

    def scale(self, s: Any) -> "XSeries":
        return self * s

    def inverse(self) -> "XSeries":
        a0 = self.coeffs[0]
        if _is_num(a0):
            if a0 == 0:
                raise NotAUnitError("x-series with zero leading coefficient")
            inv0 = Q(1) / Q(a0) if not isinstance(a0, FLOAT) else 1.0 / a0
        else:
            inv0 = a0.inverse()
        # b_k = -inv0 * sum_{j=1..k} a_j b_{k-j}
        b: list[Any] = [inv0]
        for k in range(1, self.trunc + 1):
            acc: Any = 0
            for j in range(1, k + 1):
                aj = self.coeffs[j]
                if _is_num(aj) and aj == 0:
                    continue
                bk = b[k - j]
                if _is_num(bk) and bk == 0:
                    continue
                t = aj * bk
                acc = t if (_is_num(acc) and acc == 0) else acc + t
            b.append(0 if (_is_num(acc) and acc == 0) else -(inv0 * acc))
        return XSeries(b, self.trunc)

    def __truediv__(self, other: Any) -> "XSeries":
        if isinstance(other, XSeries):
            return self * other.inverse()
        if _is_num(other):
            return self * (Q(1) / Q(other) if not isinstance(other, FLOAT) else 1.0 / other)
        if isinstance(other, Dual):
            return NotImplemented
        return self * other.inverse()

    def __pow__(self, p: int) -> "XSeries":
        out = XSeries([1], self.trunc)
        for _ in range(p):
            out = out * self
        return out

    def derive_x(self) -> "XSeries":
        """``sum k h_k x^(k-1)``; the truncation drops by one."""
        if self.trunc == 0:
            raise DegreeError("derive_x needs trunc >= 1")
        cs = []
        for k in range(1, self.trunc + 1):
            c = self.coeffs[k]
            cs.append(0 if (_is_num(c) and c == 0) else c * k)
        return XSeries(cs, self.trunc - 1)

    def shift(self, s: int) -> "XSeries":
        """Multiply by ``x**s``; negative ``s`` divides and needs vanishing low terms.

        The truncation moves with the shift, so no information is invented.
        """
        if s >= 0:
            return XSeries([0] * s + list(self.coeffs), self.trunc + s)
        for c in self.coeffs[: -s]:
            if not is_zero(c):
                raise JetError(f"x-series not divisible by x^{-s}")
        if self.trunc + s < 0:
            raise DegreeError("shift leaves no coefficients")
        return XSeries(self.coeffs[-s:], self.trunc + s)

    def partial(self, i: int) -> "XSeries":
        return self.map(lambda c: c.partial(i))

    def truncate_y(self, d: int) -> "XSeries":
        return self.map(lambda c: c.truncate(d) if isinstance(c, Jet) else c.truncate_y(d))

    def evaluate(self, x0: Any) -> Any:
        """Value of the polynomial ``sum_k c_k x0^k``."""
        acc: Any = 0
        p = Q(1) if not isinstance(x0, FLOAT) else 1.0
        for c in self.coeffs:
            if not (_is_num(c) and c == 0):
                acc = c * p if (_is_num(acc) and acc == 0) else acc + c * p
            p = p * x0
        return acc

    def __eq__(self, other: object) -> bool:
        if isinstance(other, XSeries):
            n = min(self.trunc, other.trunc)
            return all(_eq(a, b) for a, b in zip(self.coeffs[: n + 1], other.coeffs[: n + 1]))
        if _is_num(other) and other == 0:
            return self.is_zero()
        return NotImplemented

    __hash__ = None  # type: ignore[assignment]


def _eq(a: Any, b: Any) -> bool:
    if _is_num(a) and a == 0:
        return is_zero(b)
    if _is_num(b) and b == 0:
        return is_zero(a)
    return a == b


# ------------------------------------------------------------------- Dual

class Dual:
    """``a + eps*b`` with ``eps**2 == 0`` over an arbitrary base ring."""

    __slots__ = ("a", "b")

    def __init__(self, a: Any, b: Any = 0):
        self.a = a
        self.b = b

    def __repr__(self) -> str:
        return f"Dual({self.a!r}, eps*{self.b!r})"

    def is_zero(self) -> bool:
        return is_zero(self.a) and is_zero(self.b)

    def __add__(self, other: Any) -> "Dual":
        if isinstance(other, Dual):
            return Dual(_add(self.a, other.a), _add(self.b, other.b))
        return Dual(_add(self.a, other), self.b)

    __radd__ = __add__

    def __neg__(self) -> "Dual":
        return Dual(_neg(self.a), _neg(self.b))

    def __sub__(self, other: Any) -> "Dual":
        return self + (-other)

    def __rsub__(self, other: Any) -> "Dual":
        return (-self) + other

    def __mul__(self, other: Any) -> "Dual":
        if isinstance(other, Dual):
            return Dual(_mul(self.a, other.a), _add(_mul(self.a, other.b), _mul(self.b, other.a)))
        return Dual(_mul(self.a, other), _mul(self.b, other))

    def __rmul__(self, other: Any) -> "Dual":
        return Dual(_mul(other, self.a), _mul(other, self.b))

    def scale(self, s: Any) -> "Dual":
        return self * s

    def inverse(self) -> "Dual":
        ai = _inv(self.a)
        return Dual(ai, _neg(_mul(_mul(ai, self.b), ai)))

    def __truediv__(self, other: Any) -> "Dual":
        if isinstance(other, Dual):
            return self * other.inverse()
        return self * _inv(other)

    def __rtruediv__(self, other: Any) -> "Dual":
        return self.inverse() * other

    def partial(self, i: int) -> "Dual":
        return Dual(_partial(self.a, i), _partial(self.b, i))

    def truncate_y(self, d: int) -> "Dual":
        return Dual(_trunc_y(self.a, d), _trunc_y(self.b, d))

    def derive_x(self) -> "Dual":
        return Dual(self.a.derive_x(), 0 if (_is_num(self.b) and self.b == 0) else self.b.derive_x())

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Dual):
            return _eq(self.a, other.a) and _eq(self.b, other.b)
        return _eq(self.a, other) and is_zero(self.b)

    __hash__ = None  # type: ignore[assignment]


def _add(a: Any, b: Any) -> Any:
    if _is_num(a) and a == 0:
        return b
    if _is_num(b) and b == 0:
        return a
    return a + b


def _neg(a: Any) -> Any:
    return 0 if (_is_num(a) and a == 0) else -a


def _mul(a: Any, b: Any) -> Any:
    if (_is_num(a) and a == 0) or (_is_num(b) and b == 0):
        return 0
    return a * b


def _inv(a: Any) -> Any:
    if _is_num(a):
        if a == 0:
            raise NotAUnitError("zero is not invertible")
        return (1.0 / a) if isinstance(a, FLOAT) else mpq(1) / Q(a)
    return a.inverse()


def _partial(a: Any, i: int) -> Any:
    return 0 if _is_num(a) else a.partial(i)


def _trunc_y(a: Any, d: int) -> Any:
    if _is_num(a):
        return a
    if isinstance(a, Jet):
        return a.truncate(d)
    return a.truncate_y(d)


# -------------------------------------------------------- nilpotent probes

def dual_lift(base: Any, direction: Any) -> Any:
    """Lift ``base + eps*direction`` through containers and tensor objects."""
    if hasattr(base, "_dual_lift"):
        return base._dual_lift(direction)
    if isinstance(base, (list, tuple)):
        return type(base)(dual_lift(b, d) for b, d in zip(base, direction))
    return Dual(base, direction)


def eps_part(value: Any) -> Any:
    if isinstance(value, Dual):
        return value.b
    if hasattr(value, "_map_components"):
        return value._map_components(eps_part)
    if isinstance(value, (list, tuple)):
        return type(value)(eps_part(v) for v in value)
    return 0


def std_part(value: Any) -> Any:
    if isinstance(value, Dual):
        return value.a
    if hasattr(value, "_map_components"):
        return value._map_components(std_part)
    if isinstance(value, (list, tuple)):
        return type(value)(std_part(v) for v in value)
    return value


def nilpotent_probe(f: Callable[[Any], Any], base: Any, direction: Any) -> Any:
    """Exact directional derivative: eps-coefficient of ``f(base + eps*direction)``."""
    return eps_part(f(dual_lift(base, direction)))
