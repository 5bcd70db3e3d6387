"""Scalar coefficients of the Lovelock residual and the admissible limiting curvatures.

``lambda_coeffs`` gives the hyperbolic eigenvalues, ``coeff_functions`` the
A/B tables, and ``limsec`` isolates the positive roots of the kappa
polynomial with Sturm sequences, keeping those where ``A1`` is certified nonzero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Any, Sequence

import sympy as sp

from .ring_jets import FLOAT, Q, format_rational, mpq, parse_rational

__all__ = [
    "CouplingError", "Couplings", "DerivedCoeffs", "KappaRoot", "lambda_coeffs",
    "coeff_functions", "A_fun", "B_fun", "kappa_polynomial", "limsec", "qmax",
]

KAPPA = sp.Symbol("kappa")


class CouplingError(ValueError):
    pass


def qmax(n: int) -> int:
    return (n + 1) // 2


def _ratio_fact(a: int, b: int) -> Any:
    """``a!/b!`` with ``1/(negative)! = 0``."""
    if b < 0:
        return mpq(0)
    if a < 0:
        raise ValueError("factorial of a negative number in a numerator")
    return mpq(factorial(a), factorial(b))


def lambda_coeffs(n: int) -> list[Any]:
    """``lambda^(2q) = (-1/2)^q n! (2q)! / (n-2q+1)!``, q = 1..floor((n+1)/2)."""
    if n < 3:
        raise ValueError("boundary dimension must be >= 3")
    return [mpq(-1, 2) ** q * factorial(n) * _ratio_fact(2 * q, n - 2 * q + 1)
            for q in range(1, qmax(n) + 1)]


# ----------------------------------------------------------- couplings

def _scalars(vals: Sequence[Any], n: int, name: str) -> tuple:
    out = [parse_rational(v) if isinstance(v, str) else Q(v) for v in vals]
    L = qmax(n)
    if len(out) > L:
        if any(v != 0 for v in out[L:]):
            raise CouplingError(f"{name} has nonzero entries beyond q = {L}")
        out = out[:L]
    out += [mpq(0)] * (L - len(out))
    return tuple(out)


@dataclass(frozen=True)
class Couplings:
    """Coefficient vectors of ``F(alpha, beta)``; ``lovelock`` means ``beta_q = -alpha_q/(2q)``."""

    n: int
    alpha: tuple
    beta: tuple
    lovelock: bool = False

    @classmethod
    def make(cls, n: int, alpha: Sequence[Any], beta: Sequence[Any] | str | None = None) -> "Couplings":
        if n < 3:
            raise CouplingError("boundary dimension must be >= 3")
        a = _scalars(alpha, n, "alpha")
        if isinstance(beta, str):
            if beta != "lovelock":
                raise CouplingError(f"beta must be a list or 'lovelock', got {beta!r}")
            b = tuple(-v / (2 * q) for q, v in enumerate(a, start=1))
            lov = True
        else:
            b = _scalars(beta or [], n, "beta")
            lov = all(bv == -av / (2 * q) for q, (av, bv) in enumerate(zip(a, b), start=1))
        if all(av + (n + 1) * bv == 0 for av, bv in zip(a, b)):
            raise CouplingError("standing assumption violated: alpha = -(n+1) beta")
        return cls(n, a, b, lov)

    @classmethod
    def einstein(cls, n: int) -> "Couplings":
        return cls.make(n, [1], [])

    @classmethod
    def gb_family(cls, n: int, a: Any) -> "Couplings":
        """``alpha = (6(n-2)(n-3)a, 1, 0, ...)`` with Lovelock beta.

        This is the normalization for which ``A1 = 6(n-2)(n-3)(a - kappa)`` and
        the kappa polynomial is ``-(3/2) n(n-1)(n-2)(n-3)(kappa-1)(kappa+1-2a)``.
        """
        return cls.make(n, [6 * (n - 2) * (n - 3) * Q(a), 1], "lovelock")

    @classmethod
    def from_config(cls, n: int, alpha: Sequence[str], beta: Sequence[str] | str) -> "Couplings":
        return cls.make(n, list(alpha), beta if isinstance(beta, str) else list(beta))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "alpha": [format_rational(v) for v in self.alpha],
            "beta": "lovelock" if self.lovelock else [format_rational(v) for v in self.beta],
        }

    def active(self) -> list[int]:
        return [q for q, (a, b) in enumerate(zip(self.alpha, self.beta), start=1) if a != 0 or b != 0]


# ---------------------------------------------------- coefficient tables

def A_fun(i: int, coef: Sequence[Any], n: int, kappa: Any) -> Any:
    """The functions A1..A4 of a coefficient vector at ``kappa``."""
    k = Q(kappa) if not isinstance(kappa, FLOAT) else kappa
    acc: Any = mpq(0) if not isinstance(k, FLOAT) else 0.0
    for q, c in enumerate(coef, start=1):
        if c == 0:
            continue
        if i == 1:
            t = (-k / 2) ** (q - 1) * _ratio_fact(n - 2, n - 2 * q) * mpq(factorial(2 * q), 2)
        elif i == 2:
            t = (-k / 2) ** (q - 1) * _ratio_fact(n - 2, n - 2 * q + 1) * mpq(factorial(2 * q), 2) * (q - 1)
        elif i in (3, 4):
            if q < 2 or n < 4:
                continue
            top = n - 2 * q if i == 3 else n - 2 * q + 1
            w = (q - 1) if i == 3 else mpq((q - 1) * (q - 2), 2)
            t = (-k / 2) ** (q - 2) * _ratio_fact(n - 4, top) * mpq(factorial(2 * q), 24) * w
        else:
            raise ValueError(f"no coefficient function A{i}")
        acc = acc + c * t
    return acc


def B_fun(i: int, j: int, c: Couplings, kappa: Any) -> Any:
    """``B_{i,j} = A_j(alpha) + A_i(beta) + (n+1) A_j(beta)``."""
    n = c.n
    return A_fun(j, c.alpha, n, kappa) + A_fun(i, c.beta, n, kappa) + (n + 1) * A_fun(j, c.beta, n, kappa)


@dataclass
class DerivedCoeffs:
    kappa: Any
    lam: list
    lambda_alpha: Any
    A_alpha: dict
    A_beta: dict
    B: dict

    def A1(self) -> Any:
        return self.A_alpha[1]

    def to_json(self) -> dict:
        f = format_rational
        return {
            "kappa": f(self.kappa),
            "lambda": [f(v) for v in self.lam],
            "lambda_alpha": f(self.lambda_alpha),
            "A_alpha": {str(i): f(v) for i, v in self.A_alpha.items()},
            "A_beta": {str(i): f(v) for i, v in self.A_beta.items()},
            "B": {f"{i},{j}": f(v) for (i, j), v in self.B.items()},
        }


def coeff_functions(c: Couplings, kappa: Any) -> DerivedCoeffs:
    if not isinstance(kappa, FLOAT):
        kappa = Q(kappa)
    if kappa <= 0:
        raise CouplingError("kappa must be positive")
    lam = lambda_coeffs(c.n)
    Aa = {i: A_fun(i, c.alpha, c.n, kappa) for i in range(1, 5)}
    Ab = {i: A_fun(i, c.beta, c.n, kappa) for i in range(1, 5)}
    B = {(i, j): B_fun(i, j, c, kappa) for i in range(1, 5) for j in range(1, 5)}
    return DerivedCoeffs(kappa, lam, sum(a * l for a, l in zip(c.alpha, lam)), Aa, Ab, B)


# -------------------------------------------------------- kappa polynomial

def _to_sp(v: Any) -> sp.Rational:
    v = Q(v)
    return sp.Rational(int(v.numerator), int(v.denominator))


def _to_q(v: Any) -> Any:
    v = sp.Rational(v)
    return mpq(int(v.p), int(v.q))


def kappa_polynomial(c: Couplings) -> sp.Poly:
    """``sum_q lambda^(2q) (alpha_q + (n+1) beta_q) (kappa^q - 1)``."""
    lam = lambda_coeffs(c.n)
    expr = sum((_to_sp(l * (a + (c.n + 1) * b)) * (KAPPA ** q - 1)
                for q, (l, a, b) in enumerate(zip(lam, c.alpha, c.beta), start=1)), sp.Integer(0))
    p = sp.Poly(expr, KAPPA, domain="QQ")
    if p.is_zero:
        raise CouplingError("kappa polynomial vanishes identically (alpha = -(n+1) beta)")
    return p


def a1_polynomial(c: Couplings) -> sp.Poly:
    n = c.n
    expr = sp.Integer(0)
    for q, a in enumerate(c.alpha, start=1):
        w = _ratio_fact(n - 2, n - 2 * q) * mpq(factorial(2 * q), 2) * a
        expr += _to_sp(w) * (-KAPPA / 2) ** (q - 1)
    return sp.Poly(expr, KAPPA, domain="QQ")


# --------------------------------------------------------- root isolation

@dataclass
class KappaRoot:
    """A positive root of the kappa polynomial inside ``[lo, hi]``."""

    lo: Any
    hi: Any
    exact: Any = None
    A1: Any = None                 # exact value, or the certified sign when irrational
    multiplicity: int = 1
    _factor: Any = field(default=None, repr=False)

    @property
    def is_rational(self) -> bool:
        return self.exact is not None

    def value(self) -> Any:
        """Exact root, or a float accurate to double precision."""
        if self.exact is not None:
            return self.exact
        r = self
        while r.hi - r.lo > abs(r.hi) * mpq(1, 2 ** 60) + mpq(1, 2 ** 80):
            r = r.refine(8)
        return float((r.lo + r.hi) / 2)

    def refine(self, steps: int = 1) -> "KappaRoot":
        """Bisect the isolating interval; rational roots are already points."""
        if self.exact is not None:
            return self
        lo, hi = self.lo, self.hi
        seq = sp.sturm(self._factor)
        for _ in range(steps):
            mid = (lo + hi) / 2
            if _sturm_count(seq, lo, mid) == 1:
                hi = mid
            else:
                lo = mid
        return KappaRoot(lo, hi, None, self.A1, self.multiplicity, self._factor)

    def to_json(self) -> dict:
        f = format_rational
        a1 = f(self.A1) if self.exact is not None else ("positive" if self.A1 > 0 else "negative")
        return {"interval": [f(self.lo), f(self.hi)],
                "exact": f(self.exact) if self.exact is not None else None,
                "approx": float(self.value()),
                "A1": a1, "multiplicity": self.multiplicity}


def _sign_changes(vals: Sequence[Any]) -> int:
    s = [v for v in vals if v != 0]
    return sum(1 for a, b in zip(s, s[1:]) if (a > 0) != (b > 0))


def _eval(p: sp.Poly, x: Any) -> Any:
    acc = mpq(0)
    for c in p.all_coeffs():
        acc = acc * x + _to_q(c)
    return acc


def _sturm_count(seq: Sequence[sp.Poly], lo: Any, hi: Any) -> int:
    """Distinct roots in the half-open interval ``(lo, hi]``."""
    return _sign_changes([_eval(p, lo) for p in seq]) - _sign_changes([_eval(p, hi) for p in seq])


def _cauchy_bound(p: sp.Poly) -> Any:
    cs = [_to_q(c) for c in p.all_coeffs()]
    lead = cs[0]
    return 1 + max((abs(c / lead) for c in cs[1:]), default=mpq(0))


def _isolate(p: sp.Poly, lo: Any, hi: Any) -> list[tuple[Any, Any]]:
    """Isolating intervals ``(a, b]`` for the roots of square-free ``p`` in ``(lo, hi]``."""
    seq = sp.sturm(p)
    out = []
    stack = [(lo, hi)]
    while stack:
        a, b = stack.pop()
        k = _sturm_count(seq, a, b)
        if k == 0:
            continue
        if k == 1:
            out.append((a, b))
            continue
        mid = (a + b) / 2
        stack.append((mid, b))
        stack.append((a, mid))
    return sorted(out)


def _rational_roots(p: sp.Poly) -> list[Any]:
    """Candidates from the rational root theorem, checked exactly."""
    cs = [_to_q(c) for c in p.all_coeffs()]
    den = 1
    for c in cs:
        den = den * int(c.denominator) // _gcd(den, int(c.denominator))
    ints = [int(c * den) for c in cs]
    while ints and ints[-1] == 0:
        ints.pop()
    roots = []
    if len(ints) < len(cs):
        roots.append(mpq(0))
    if len(ints) <= 1:
        return roots
    lead, const = abs(ints[0]), abs(ints[-1])
    for d in sp.divisors(const):
        for e in sp.divisors(lead):
            r = mpq(int(d), int(e))
            for cand in (r, -r):
                if _eval(p, cand) == 0 and cand not in roots:
                    roots.append(cand)
    return sorted(roots)


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return abs(a)


def limsec(c: Couplings) -> list[KappaRoot]:
    """Positive roots of the kappa polynomial with ``A1(alpha, kappa) != 0``."""
    p = kappa_polynomial(c)
    a1 = a1_polynomial(c)
    roots: list[KappaRoot] = []
    for f, mult in p.sqf_list()[1]:
        for r in _rational_roots(f):
            if r <= 0:
                continue
            v = _eval(a1, r)
            if v != 0:
                roots.append(KappaRoot(r, r, r, v, mult, f))
            f = sp.Poly(sp.quo(f.as_expr(), KAPPA - _to_sp(r)), KAPPA, domain="QQ")
        if f.degree() <= 0:
            continue
        B = _cauchy_bound(f)
        for lo, hi in _isolate(f, mpq(0), B):
            root = KappaRoot(lo, hi, None, None, mult, f)
            # A1 must not share the root; then shrink until A1 has no root inside
            g = sp.gcd(f, a1)
            if g.degree() > 0 and _sturm_count(sp.sturm(g), lo, hi) > 0:
                continue
            if a1.degree() > 0:
                seq = sp.sturm(a1)
                while _sturm_count(seq, root.lo, root.hi) > 0 or _eval(a1, root.lo) == 0:
                    root = root.refine(1)
            root.A1 = _eval(a1, root.hi)
            if root.A1 == 0:
                continue
            roots.append(root.refine(20))
    return sorted(roots, key=lambda r: r.lo)
