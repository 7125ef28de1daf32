"""Deterministic one-dimensional maximizers."""

from __future__ import annotations

import math
from typing import Callable

INV_PHI = (math.sqrt(5) - 1) / 2


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-6,
                       max_iter: int = 500) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on [lo, hi]; returns (argmax, max).

    Stops when the bracket is narrower than ``tol``. The endpoints are also
    evaluated so a maximum sitting on the boundary is returned exactly.
    """
    if hi < lo:
        lo, hi = hi, lo
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol and it < max_iter:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        it += 1
    x, fx = (c, fc) if fc >= fd else (d, fd)
    for edge in (lo, hi):
        fe = f(edge)
        if fe > fx:
            x, fx = edge, fe
    return x, fx


def log_golden_section_max(f: Callable[[float], float], lo: float, hi: float, rel_tol: float = 1e-9,
                           max_iter: int = 500) -> tuple[float, float]:
    """Golden section in log(x) for positive ranges spanning decades."""
    x, fx = golden_section_max(lambda u: f(math.exp(u)), math.log(lo), math.log(hi), rel_tol, max_iter)
    return math.exp(x), fx


def grid_argmax(f: Callable[[float], float], grid) -> tuple[float, float]:
    """First maximizer on a grid (ties go to the earlier point)."""
    best_x, best = None, -math.inf
    for x in grid:
        v = f(x)
        if v > best:
            best_x, best = x, v
    return best_x, best
