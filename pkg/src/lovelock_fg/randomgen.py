"""Seeded random jets, forms and metrics for property checks."""
from __future__ import annotations

import random
from typing import Any

from .double_forms import DoubleForm, MetricForm, _masks
from .ring_jets import Jet, mono_table, mpq


def rand_rational(rng: random.Random, span: int = 3, den: int = 3) -> Any:
    return mpq(rng.randint(-span * den, span * den), rng.randint(1, den))


def random_jet(rng: random.Random, nv: int, deg: int, density: float = 0.6,
               span: int = 2, const: Any = None) -> Jet:
    tab = mono_table(nv, deg)
    c = {}
    for k in range(tab.count[deg]):
        if rng.random() < density:
            v = rand_rational(rng, span)
            if v:
                c[k] = v
    if const is not None:
        c[0] = mpq(const)
        if not c[0]:
            del c[0]
    return Jet(nv, deg, c)


def random_form(rng: random.Random, dim: int, bideg: tuple[int, int], nv: int = 1, deg: int = 0,
                density: float = 1.0, symmetric: bool = False) -> DoubleForm:
    """Random double form with jet entries (scalars when ``deg == 0``)."""
    a, b = bideg
    comps = {}
    ka, kb = _masks(dim, a), _masks(dim, b)
    for I in ka:
        for J in kb:
            if symmetric and (I, J) in comps:
                continue
            if rng.random() > density:
                continue
            comps[(I, J)] = random_jet(rng, nv, deg) if deg > 0 else rand_rational(rng)
            if symmetric:
                comps[(J, I)] = comps[(I, J)]
    return DoubleForm(dim, bideg, comps)


def random_symmetric_matrix(rng: random.Random, m: int, nv: int, deg: int, density: float = 0.6,
                            span: int = 1) -> list[list[Jet]]:
    M: list[list[Any]] = [[None] * m for _ in range(m)]
    for i in range(m):
        for j in range(i, m):
            M[i][j] = M[j][i] = random_jet(rng, nv, deg, density, span)
    return M


def random_metric_matrix(rng: random.Random, m: int, deg: int, nv: int | None = None,
                         density: float = 0.6, offdiag: bool = True) -> list[list[Jet]]:
    """Diagonally dominant at the origin so the constant term is positive definite."""
    nv = m if nv is None else nv
    M = random_symmetric_matrix(rng, m, nv, deg, density)
    for i in range(m):
        for j in range(m):
            c0 = M[i][j].constant()
            if i == j:
                target = mpq(rng.randint(2, 4) * m, 2)
            elif offdiag:
                target = mpq(rng.randint(-2, 2), 2)
            else:
                target = mpq(0)
            M[i][j] = M[i][j] + (target - c0)
    for i in range(m):
        for j in range(i):
            M[i][j] = M[j][i]
    return M


def random_metric(rng: random.Random, m: int, deg: int, **kw: Any) -> MetricForm:
    return MetricForm(random_metric_matrix(rng, m, deg, **kw))
