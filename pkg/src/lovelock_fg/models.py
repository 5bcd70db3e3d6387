"""Explicit metric jets: flat, spheres, hyperbolic balls, conformally flat and products."""
from __future__ import annotations

from typing import Any

from .double_forms import MetricForm
from .ring_jets import Jet, Q, mpq


def radius_squared(nv: int, deg: int) -> Jet:
    acc = Jet.zero(nv, deg)
    for i in range(nv):
        y = Jet.var(nv, deg, i)
        acc = acc + y * y
    return acc


def _conformal(factor: Jet, m: int) -> list[list[Any]]:
    return [[factor if i == j else Jet.zero(factor.nv, factor.deg) for j in range(m)] for i in range(m)]


def flat_matrix(m: int, deg: int, nv: int | None = None) -> list[list[Jet]]:
    nv = m if nv is None else nv
    return _conformal(Jet.const(nv, deg), m)


def constant_curvature_matrix(m: int, deg: int, K: Any) -> list[list[Jet]]:
    """Stereographic chart ``4 delta / (1 + K|y|^2)^2`` of curvature K."""
    K = Q(K)
    f = (Jet.const(m, deg) + radius_squared(m, deg).scale(K)).inverse()
    return _conformal((f * f).scale(4), m)


def round_sphere_matrix(m: int, deg: int) -> list[list[Jet]]:
    return constant_curvature_matrix(m, deg, 1)


def hyperbolic_ball_matrix(m: int, deg: int) -> list[list[Jet]]:
    """Poincare ball ``4 delta / (1 - |y|^2)^2``."""
    return constant_curvature_matrix(m, deg, -1)


def conformally_flat_matrix(phi: Jet, m: int) -> list[list[Jet]]:
    """``exp(2 phi) delta`` for a jet ``phi`` with ``phi(0) = 0``."""
    return _conformal(phi.scale(2).exp(), m)


def product_matrix(h: list[list[Jet]], ell: int) -> list[list[Jet]]:
    """``h (+) flat`` in ``n + ell`` variables; ``h`` must not depend on the torus variables."""
    n = len(h)
    deg = h[0][0].deg
    m = n + ell
    emb = [[_embed(h[i][j], m) for j in range(n)] for i in range(n)]
    out = [[Jet.zero(m, deg) for _ in range(m)] for _ in range(m)]
    for i in range(n):
        for j in range(n):
            out[i][j] = emb[i][j]
    for k in range(n, m):
        out[k][k] = Jet.const(m, deg)
    return out


def _embed(a: Jet, nv: int) -> Jet:
    pad = nv - a.nv
    return Jet.from_terms(nv, a.deg, {e + (0,) * pad: v for e, v in a.terms()})


def metric(mat: list[list[Jet]]) -> MetricForm:
    return MetricForm(mat)


def linear_phi(nv: int, deg: int, coeffs: dict[tuple[int, ...], Any]) -> Jet:
    terms = {e: Q(v) for e, v in coeffs.items()}
    terms.pop((0,) * nv, None)
    return Jet.from_terms(nv, deg, terms)


__all__ = [
    "radius_squared", "flat_matrix", "constant_curvature_matrix", "round_sphere_matrix",
    "hyperbolic_ball_matrix", "conformally_flat_matrix", "product_matrix", "metric", "linear_phi",
    "mpq",
]
