"""Bracketed scalar root finding: bisection followed by one Newton polish step."""

from __future__ import annotations

import math
from typing import Callable

Func = Callable[[float], float]


class BracketError(ValueError):
    pass


def bisect(f: Func, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 400,
           fprime: Func | None = None) -> float:
    """Root of ``f`` in ``[lo, hi]`` where ``f(lo)`` and ``f(hi)`` differ in sign.

    Bisection runs until the bracket is narrower than ``tol`` (relative to the
    magnitude of the endpoints when that is larger than one). A single Newton
    step is then tried from the midpoint and kept only if it stays inside the
    final bracket and does not increase ``|f|``.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if math.isnan(flo) or math.isnan(fhi) or (flo > 0) == (fhi > 0):
        raise BracketError(f"no sign change on [{lo!r}, {hi!r}]: f={flo!r}, {fhi!r}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol * max(1.0, abs(mid)) or mid in (lo, hi):
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    x = 0.5 * (lo + hi)
    return polish(f, x, lo, hi, fprime)


def polish(f: Func, x: float, lo: float, hi: float, fprime: Func | None = None) -> float:
    fx = f(x)
    if fx == 0.0:
        return x
    if fprime is None:
        h = 1e-7 * max(1.0, abs(x))
        h = min(h, 0.5 * (hi - lo)) if hi > lo else h
        if h <= 0:
            return x
        d = (f(x + h) - f(x - h)) / (2 * h)
    else:
        d = fprime(x)
    if d == 0.0 or not math.isfinite(d):
        return x
    x1 = x - fx / d
    if lo <= x1 <= hi:
        f1 = f(x1)
        if abs(f1) <= abs(fx):
            return x1
    return x


def expand_upper(f: Func, lo: float, hi: float, factor: float = 2.0, max_iter: int = 200) -> float:
    """Grow ``hi`` geometrically (away from ``lo``) until ``f`` changes sign on ``[lo, hi]``."""
    flo = f(lo)
    for _ in range(max_iter):
        fhi = f(hi)
        if (fhi > 0) != (flo > 0) or fhi == 0.0:
            return hi
        hi = lo + (hi - lo) * factor
    raise BracketError(f"could not bracket a root above {lo!r}")
