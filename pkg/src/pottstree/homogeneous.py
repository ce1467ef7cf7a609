"""Completely homogeneous solutions for the field (alpha, 0, ..., 0).

Unknowns are ``z_i = theta**(h_i / k)`` with ``h`` the reduced boundary field
on every vertex off the root. The positive solutions of the homogeneous
system come in three shapes: all ones, ``(u, 1, ..., 1)`` ("scalar"), and
``u`` in the first slot with ``v`` on ``m`` of the remaining slots ("pair").
This module computes the critical thresholds in the ``(theta, alpha)`` plane,
counts the solutions and checks the counts against a brute-force Newton
enumerator.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.stats import qmc

from .freetree import build_ball
from .model import GbcAssignment, compatibility_residual, f_jacobian, f_map
from .roots import bisect, expand_upper

TANGENCY_BAND = 1e-7
V_ONE_TOL = 1e-8
SCAN_POINTS = 2000
THETA_MIN = 1.0 + 1e-9


class DomainError(ValueError):
    pass


# polynomial helpers -------------------------------------------------------

def p_k(v: float, k: int) -> float:
    """``v^{k-1} + ... + v``."""
    # a plain power sum; the closed form (v^k - v)/(v - 1) cancels near v = 1
    acc = 0.0
    for _ in range(k - 1):
        acc = (acc + 1.0) * v
    return acc


def dp_k(v: float, k: int) -> float:
    return sum(i * v ** (i - 1) for i in range(1, k))


def _check_kq(k: int, q: int) -> None:
    if k < 2 or q < 2:
        raise DomainError(f"need k >= 2 and q >= 2, got k={k}, q={q}")


# scalar branch ------------------------------------------------------------

def theta_c(k: int, q: int) -> float:
    _check_kq(k, q)
    r = (k + 1) / (k - 1)
    return 0.5 * (math.sqrt((q - 2) ** 2 + 4 * (q - 1) * r * r) - (q - 2))


def b_func(theta: float, q: int) -> float:
    return theta * (theta + q - 2) / (q - 1)


def x_pm(k: int, q: int, theta: float) -> tuple[float, float]:
    """Roots ``x_- <= x_+`` of ``(b+x)(1+x) = k(b-1)x``."""
    b = b_func(theta, q)
    disc = (k * (b - 1) - (b + 1)) ** 2 - 4 * b
    if disc < 0:
        if disc > -1e-12 * b * b:
            disc = 0.0
        else:
            raise DomainError(f"theta={theta} is below theta_c={theta_c(k, q)}")
    xp = 0.5 * ((b - 1) * (k - 1) - 2 + math.sqrt(disc))
    # product of the roots is b; avoids cancellation in x_-
    return b / xp, xp


def log_a(k: int, b: float, x: float) -> float:
    """``ln a = -ln x + k ln((1+x)/(b+x))``."""
    return -math.log(x) + k * (math.log1p(x) - math.log(b + x))


def a_pm(k: int, q: int, theta: float) -> tuple[float, float]:
    b = b_func(theta, q)
    xm, xp = x_pm(k, q, theta)
    return math.exp(log_a(k, b, xm)), math.exp(log_a(k, b, xp))


def alpha_pm(k: int, q: int, theta: float) -> tuple[float, float]:
    """Critical fields ``(alpha_-, alpha_+)`` of the scalar equation, ``theta >= theta_c``."""
    tc = theta_c(k, q)
    if theta < tc * (1 - 1e-15):
        raise DomainError(f"alpha_pm needs theta >= theta_c = {tc}, got {theta}")
    b = b_func(theta, q)
    xm, xp = x_pm(k, q, max(theta, tc))
    lt = math.log(theta)
    lq = math.log(q - 1)
    am = -(k + 1) + (lq - log_a(k, b, xp)) / lt
    ap = -(k + 1) + (lq - log_a(k, b, xm)) / lt
    return am, ap


def count_scalar(k: int, q: int, theta: float, alpha: float, band: float = TANGENCY_BAND) -> int:
    """Number of positive roots of the scalar equation (1, 2 or 3)."""
    tc = theta_c(k, q)
    if theta <= tc:
        return 1
    am, ap = alpha_pm(k, q, theta)
    if abs(alpha - am) < band or abs(alpha - ap) < band:
        return 2
    return 3 if am < alpha < ap else 1


def scalar_roots(k: int, q: int, theta: float, alpha: float) -> list[float]:
    """Positive roots ``u`` of the scalar equation, found through ``a x = f(x)``."""
    b = b_func(theta, q)
    la = math.log(q - 1) - (k + 1 + alpha) * math.log(theta)

    def g(x: float) -> float:
        return log_a(k, b, x) - la

    # g is decreasing except on [x_-, x_+]
    pts = [1e-300]
    if theta > theta_c(k, q):
        pts += list(x_pm(k, q, theta))
    if g(pts[-1]) > 0:
        # g -> -inf as x -> inf, so one more root lies above the last point
        pts.append(expand_upper(g, pts[-1], 2 * pts[-1] + 1.0))
    xs = []
    for lo, hi in zip(pts[:-1], pts[1:]):
        glo, ghi = g(lo), g(hi)
        if glo == 0.0:
            xs.append(lo)
        elif (glo > 0) != (ghi > 0):
            xs.append(bisect(g, lo, hi, tol=1e-15))
    return [((q - 1) * x / theta ** (alpha + 1)) ** (1.0 / k) for x in xs]


# pair branch: L_m and K_m -------------------------------------------------

def l_func(m: float, v: float, theta: float, k: int, q: int) -> float:
    """``L_m(v) = (theta-1) p_k(v) - m v^k - (q-1-m)``."""
    if v <= 0:
        raise DomainError(f"L_m needs v > 0, got {v}")
    return (theta - 1.0) * p_k(v, k) - m * v**k - (q - 1 - m)


def dl_func(m: float, v: float, theta: float, k: int) -> float:
    return (theta - 1.0) * dp_k(v, k) - k * m * v ** (k - 1)


def k_func(m: float, v: float, theta: float, k: int, q: int) -> float:
    """``K_m(v) = L_m (p_k+1)^k / (p_k+L_m)^k``."""
    p = p_k(v, k)
    L = l_func(m, v, theta, k, q)
    if p + L <= 0:
        raise DomainError(f"K_m undefined at v={v}: p_k + L_m = {p + L} <= 0")
    return L * ((p + 1.0) / (p + L)) ** k


def log_k_func(m: float, v: float, theta: float, k: int, q: int) -> float:
    p = p_k(v, k)
    L = l_func(m, v, theta, k, q)
    if L <= 0:
        return -math.inf
    return math.log(L) + k * (math.log(p + 1.0) - math.log(p + L))


def k_slope_sign(m: float, v: float, theta: float, k: int, q: int) -> float:
    """A quantity with the sign of ``dK_m/dv`` on the set ``L_m > 0``."""
    p = p_k(v, k)
    L = l_func(m, v, theta, k, q)
    dL = dl_func(m, v, theta, k)
    return (p + 1.0) * (p - (k - 1) * L) * dL - k * L * (1.0 - L) * dp_k(v, k)


def v_m(k: int, m: float, theta: float) -> float:
    """Maximiser of ``v -> L_m(v)``: the zero of ``(theta-1) sum (k-i) v^{-i} - k m``."""
    if k == 2:
        return (theta - 1.0) / (2 * m)

    def g(v: float) -> float:
        return (theta - 1.0) * sum((k - i) * v ** (-i) for i in range(1, k)) - k * m

    lo = 1.0
    while g(lo) <= 0:
        lo *= 0.5
    hi = expand_upper(g, lo, 2 * lo)
    return bisect(g, lo, hi, tol=1e-15)


def l_star(k: int, q: int, m: float, theta: float) -> float:
    return l_func(m, v_m(k, m, theta), theta, k, q)


def level_roots(k: int, q: int, m: float, theta: float, level: float) -> tuple[float, ...]:
    """Roots of ``L_m(v) = level`` (zero, one or two, using unimodality)."""
    vm = v_m(k, m, theta)

    def g(v: float) -> float:
        return l_func(m, v, theta, k, q) - level

    top = g(vm)
    if top < 0:
        return ()
    if top == 0:
        return (vm,)
    out = []
    lo = vm
    g0 = -(q - 1 - m) - level
    if g0 < 0:
        while g(lo) > 0 and lo > 1e-300:
            lo *= 0.5
        out.append(bisect(g, lo, vm, tol=1e-15))
    hi = expand_upper(g, vm, 2 * vm + 1.0)
    out.append(bisect(g, vm, hi, tol=1e-15))
    return tuple(out)


@dataclass(frozen=True)
class KProfile:
    """Shape of ``v -> K_m(v)`` on the positivity interval ``(v_lo, v_hi)``."""

    v_lo: float
    v_hi: float
    extrema: tuple[tuple[float, float, bool], ...]  # (v, ln K, is_max), ascending v

    @property
    def log_max(self) -> float:
        return max(e[1] for e in self.extrema if e[2])

    @property
    def argmax(self) -> float:
        return max((e for e in self.extrema if e[2]), key=lambda e: e[1])[0]


@functools.lru_cache(maxsize=4096)
def k_profile(k: int, q: int, m: int, theta: float, n_grid: int = SCAN_POINTS) -> KProfile | None:
    """Positivity interval and local extrema of ``K_m``; ``None`` when ``theta <= theta_m``."""
    if l_star(k, q, m, theta) <= 0:
        return None
    v_lo, v_hi = level_roots(k, q, m, theta, 0.0)
    grid = np.geomspace(v_lo, v_hi, n_grid + 2)[1:-1]

    def s(v: float) -> float:
        return k_slope_sign(m, v, theta, k, q)

    sv = [s(float(v)) for v in grid]
    ext = []
    for a, b, sa, sb in zip(grid[:-1], grid[1:], sv[:-1], sv[1:]):
        if sa == 0.0:
            v = float(a)
        elif (sa > 0) != (sb > 0):
            v = bisect(s, float(a), float(b), tol=1e-14)
        else:
            continue
        ext.append((v, log_k_func(m, v, theta, k, q), sa > 0))
    if not ext:
        # should not happen (K vanishes at both ends); keep the best grid point
        i = int(np.argmax([log_k_func(m, float(v), theta, k, q) for v in grid]))
        v = float(grid[i])
        ext.append((v, log_k_func(m, v, theta, k, q), True))
    return KProfile(v_lo, v_hi, tuple(ext))


def theta_m(k: int, q: int, m: int) -> float:
    """Unique ``theta > 1`` with ``max_v L_m(v; theta) = 0``."""
    if not 1 <= m <= q - 2:
        raise DomainError(f"m must lie in 1..{q - 2}, got {m}")
    hi = 2.0 + (q - 1) / (k - 1)  # L_m(1; hi) > 0
    return bisect(lambda th: l_star(k, q, m, th), 1.0 + 1e-12, hi, tol=1e-14,
                  fprime=lambda th: p_k(v_m(k, m, th), k))


def _vy_root(k: int, m: float, mc: float) -> float:
    """Positive root of ``m sum i v^{k-i} - mc sum i v^{i-k} = 0`` (increasing in v)."""

    def g(v: float) -> float:
        return m * sum(i * v ** (k - i) for i in range(1, k)) - mc * sum(i * v ** (i - k) for i in range(1, k))

    lo, hi = 1.0, 1.0
    while g(lo) > 0:
        lo *= 0.5
    while g(hi) < 0:
        hi *= 2.0
    return bisect(g, lo, hi, tol=1e-15)


def theta_m_eliminated(k: int, q: int, m: int) -> float:
    """``theta_m`` through the root ``v*`` of the eliminated equation (a cross-check)."""
    mc = q - 1 - m
    v = _vy_root(k, m, mc)
    return 1.0 + (m * v**k + mc) / p_k(v, k)


def alpha_m(k: int, q: int, m: int, theta: float) -> float:
    """``ln max_v K_m(v; theta) / ln theta`` for ``theta > theta_m``."""
    if theta < THETA_MIN:
        raise DomainError("alpha curves need theta >= 1 + 1e-9")
    prof = k_profile(k, q, m, float(theta))
    if prof is None:
        raise DomainError(f"alpha_m needs theta > theta_m = {theta_m(k, q, m)}, got {theta}")
    return prof.log_max / math.log(theta)


def theta_m0(k: int, q: int, m: int) -> float:
    """Zero of ``alpha_m`` (``1 <= m <= floor((q-1)/2)``): ``max_v L_m = 1``."""
    mc = q - 1 - m
    v = _vy_root(k, m, mc + 1)
    return 1.0 + (m * v**k + mc + 1) / p_k(v, k)


def tilde_theta_1(k: int) -> float:
    return (5 - k + math.sqrt(49 * k * k + 62 * k + 49)) / (6 * (k - 1))


def theta_zero_constants(k: int, q: int) -> tuple[float, float, list[float]]:
    """``(theta_0^+, theta_0^-, [theta_m^0 for m = 1..floor((q-1)/2)])``."""
    if q == 2:
        tc = theta_c(k, q)
        return tc, tc, []
    m0 = (q - 1) // 2
    zeros = [theta_m0(k, q, m) for m in range(1, m0 + 1)]
    return 1.0 + q / (k - 1), zeros[0], zeros


# counting ---------------------------------------------------------------

@dataclass
class PairRoots:
    count: int
    roots: list[float]  # admissible v
    tangent: bool
    excluded_one: bool  # a root at v = 1 was dropped


def pair_roots(k: int, q: int, m: int, theta: float, alpha: float, band: float = TANGENCY_BAND) -> PairRoots:
    """Admissible roots ``v != 1`` of ``theta^alpha = K_m(v; theta)``."""
    prof = k_profile(k, q, m, float(theta))
    if prof is None:
        return PairRoots(0, [], False, False)
    lt = math.log(theta)
    c = alpha * lt

    def g(v: float) -> float:
        return log_k_func(m, v, theta, k, q) - c

    pts = [prof.v_lo] + [e[0] for e in prof.extrema] + [prof.v_hi]
    vals = [-math.inf] + [e[1] - c for e in prof.extrema] + [-math.inf]
    roots: list[float] = []
    tangent = False
    for i, e in enumerate(prof.extrema, start=1):
        if abs(vals[i]) < band * lt:
            vals[i] = 0.0
            roots.append(e[0])
            tangent = True
    for a, b, fa, fb in zip(pts[:-1], pts[1:], vals[:-1], vals[1:]):
        if fa != 0.0 and fb != 0.0 and (fa > 0) != (fb > 0):
            lo, hi = a, b
            # pull the endpoints in from where ln K = -inf
            if fa == -math.inf:
                lo = _inside(g, a, b, from_left=True)
            if fb == -math.inf:
                hi = _inside(g, a, b, from_left=False)
            roots.append(bisect(g, lo, hi, tol=1e-15))
    roots.sort()
    dedup: list[float] = []
    for v in roots:
        if not dedup or abs(v - dedup[-1]) > 1e-8 * max(1.0, v):
            dedup.append(v)
    keep = [v for v in dedup if abs(v - 1.0) >= V_ONE_TOL]
    return PairRoots(len(keep), keep, tangent, len(keep) < len(dedup))


def _inside(g, a: float, b: float, from_left: bool) -> float:
    # move from the end where g = -inf towards the other end until g is finite and negative
    t = 0.5
    for _ in range(200):
        x = a + t * (b - a) if from_left else b - t * (b - a)
        gx = g(x)
        if math.isfinite(gx) and gx < 0:
            return x
        t *= 0.5
    return a if from_left else b


def count_pair(k: int, q: int, m: int, theta: float, alpha: float, band: float = TANGENCY_BAND) -> int:
    return pair_roots(k, q, m, theta, alpha, band).count


def pair_solution(k: int, q: int, m: int, theta: float, v: float) -> tuple[float, float]:
    """``(u, v)`` from a root ``v``: ``u = (p_k + L_m) / (p_k + 1)``."""
    p = p_k(v, k)
    L = l_func(m, v, theta, k, q)
    return (p + L) / (p + 1.0), v


@dataclass
class CountReport:
    nu: int
    nu0: int
    r: dict[int, int]
    region: str  # "A_q or B_q" membership, see in_nonuniqueness_region
    in_region: bool
    tangent: bool
    caveat: str = ""

    def to_json(self) -> dict[str, Any]:
        return {
            "nu": self.nu,
            "nu0": self.nu0,
            "r": {str(m): c for m, c in self.r.items()},
            "region": self.region,
            "tangent_band": self.tangent,
            "caveat": self.caveat,
        }


def in_nonuniqueness_region(k: int, q: int, theta: float, alpha: float, band: float = TANGENCY_BAND) -> bool:
    """Membership of ``(theta, alpha)`` in ``A_q`` or ``B_q``."""
    tc = theta_c(k, q)
    if theta > tc:
        am, ap = alpha_pm(k, q, theta)
        if am - band <= alpha <= ap + band:
            return True
    if q == 2:
        return False
    t1 = theta_m(k, q, 1)
    if theta <= t1:
        return False
    a1 = alpha_m(k, q, 1, theta)
    if q == 3:
        if alpha < a1 - band:
            return True
        return abs(alpha - a1) < band and theta > tilde_theta_1(k)
    return alpha <= a1 + band


def count_total(k: int, q: int, theta: float, alpha: float, band: float = TANGENCY_BAND) -> CountReport:
    """Number of positive solutions for ``alpha != 0``: ``nu_0 + sum_m C(q-2, m) r_m``."""
    if alpha == 0:
        raise DomainError("alpha = 0: use count_zero_field")
    if theta <= 1.0:
        return CountReport(1, 1, {}, "outside", False, False)
    nu0 = count_scalar(k, q, theta, alpha, band)
    tangent = nu0 == 2
    r: dict[int, int] = {}
    caveat = ""
    for m in range(1, q - 1):
        pr = pair_roots(k, q, m, theta, alpha, band)
        r[m] = pr.count
        tangent = tangent or pr.tangent
    nu = nu0 + sum(math.comb(q - 2, m) * c for m, c in r.items())
    inside = in_nonuniqueness_region(k, q, theta, alpha, band)
    if q == 3 and k > 4 and theta > theta_m(k, q, 1) and abs(alpha - alpha_m(k, q, 1, theta)) < band \
            and theta <= tilde_theta_1(k):
        caveat = "conjecture-dependent for k > 4"
    return CountReport(nu, nu0, r, "inside" if inside else "outside", inside, tangent, caveat)


def count_zero_field(k: int, q: int, theta: float, band: float = TANGENCY_BAND) -> int:
    """``nu(theta, 0) = 1 + sum_m C(q-1, m) #{u > 0, u != 1 : L_m(u) = 1}``."""
    if theta <= 1.0:
        return 1
    total = 1
    for m in range(1, q):
        vm = v_m(k, m, theta)
        top = l_func(m, vm, theta, k, q) - 1.0
        if abs(top) < band:
            roots: tuple[float, ...] = (vm,)
        else:
            roots = level_roots(k, q, m, theta, 1.0)
        n = sum(1 for u in roots if abs(u - 1.0) >= V_ONE_TOL)
        total += math.comb(q - 1, m) * n
    return total


# critical constants and curves ---------------------------------------------

@dataclass
class CriticalConstants:
    theta_c: float
    theta_0: float
    theta_star: float
    theta_0_plus: float
    theta_0_minus: float
    theta_m: list[float]
    theta_m0: list[float]
    tilde_theta_1: float | None

    def to_json(self) -> dict[str, Any]:
        return {
            "theta_c": self.theta_c,
            "theta_0": self.theta_0,
            "theta_star": self.theta_star,
            "theta_0_plus": self.theta_0_plus,
            "theta_0_minus": self.theta_0_minus,
            "theta_m": self.theta_m,
            "theta_m0": self.theta_m0,
            "tilde_theta_1": self.tilde_theta_1,
        }


def critical_constants(k: int, q: int) -> CriticalConstants:
    from .uniqueness import theta_0, theta_star

    tp, tm, zeros = theta_zero_constants(k, q)
    return CriticalConstants(
        theta_c=theta_c(k, q),
        theta_0=theta_0(k, q),
        theta_star=theta_star(k, q),
        theta_0_plus=tp,
        theta_0_minus=tm,
        theta_m=[theta_m(k, q, m) for m in range(1, q - 1)],
        theta_m0=zeros,
        tilde_theta_1=tilde_theta_1(k) if q == 3 else None,
    )


@dataclass
class CurveSample:
    theta: np.ndarray
    alpha_minus: np.ndarray
    alpha_plus: np.ndarray
    alpha_m: np.ndarray  # shape (len(theta), q-2); nan where undefined
    warnings: list[str] = field(default_factory=list)


def curves(k: int, q: int, thetas: Sequence[float]) -> CurveSample:
    th = np.asarray(thetas, dtype=float)
    if np.any(np.diff(th) <= 0):
        raise ValueError("theta grid must be ascending")
    tc = theta_c(k, q)
    tms = [theta_m(k, q, m) for m in range(1, q - 1)]
    am = np.full(th.shape, np.nan)
    ap = np.full(th.shape, np.nan)
    a_m = np.full((th.size, max(q - 2, 0)), np.nan)
    warnings: list[str] = []
    for i, t in enumerate(th):
        if t < THETA_MIN:
            continue
        if t >= tc:
            am[i], ap[i] = alpha_pm(k, q, t)
        for m in range(1, q - 1):
            if t > tms[m - 1]:
                a_m[i, m - 1] = alpha_m(k, q, m, t)
        row = a_m[i]
        if q > 3 and np.all(np.isfinite(row)) and np.any(row > row[0] + 1e-12):
            warnings.append(f"theta={t!r}: alpha_1 is not the largest alpha_m")
        if np.isfinite(am[i]) and am[i] > ap[i] + 1e-12:
            warnings.append(f"theta={t!r}: alpha_- > alpha_+")
    return CurveSample(th, am, ap, a_m, warnings)


def critical_alphas(k: int, q: int, theta: float) -> list[float]:
    """Every alpha at which the count can change at this theta (for excluding bands)."""
    out = [0.0]
    if theta >= theta_c(k, q):
        out += list(alpha_pm(k, q, theta))
    lt = math.log(theta)
    for m in range(1, q - 1):
        prof = k_profile(k, q, m, float(theta))
        if prof is None:
            continue
        out += [e[1] / lt for e in prof.extrema]
        if prof.v_lo < 1.0 < prof.v_hi:
            out.append(log_k_func(m, 1.0, theta, k, q) / lt)
    return out


def critical_thetas(k: int, q: int) -> list[float]:
    out = [theta_c(k, q)]
    out += [theta_m(k, q, m) for m in range(1, q - 1)]
    if q == 3:
        out.append(tilde_theta_1(k))
    return out


# slope polynomials of K_1 (q = 3) ---------------------------------------------

def q3_slope_polys(k: int, v: float, t: float) -> tuple[float, float]:
    """``(R(v; t), R~(y; t))`` with ``y = v + 1/v``, for k = 2, 3, 4."""
    y = v + 1.0 / v
    if k == 2:
        R = t * t * v - t * (v * v - 3 * v + 1) - (4 * v * v + 2 * v + 4)
        Rt = -y * (t + 4) + t * t + 3 * t - 2
    elif k == 3:
        R = (v + 1) * (t + 3) * (2 * t * v**3 + 2 * t * v - 2 * v**4 - 2 + 5 * t * v * v - 4 * v**3 - 4 * v)
        Rt = (t + 3) * (2 * t * y - 2 * (y * y - 2) + 5 * t - 4 * y)
    elif k == 4:
        R = (t * t * (3 * v**7 + 11 * v**6 + 25 * v**5 + 30 * v**4 + 25 * v**3 + 11 * v**2 + 3 * v)
             - t * (3 * v**8 + v**7 - 13 * v**6 - 57 * v**5 - 72 * v**4 - 57 * v**3 - 13 * v**2 + v + 3)
             - (8 * v**8 + 24 * v**7 + 48 * v**6 + 36 * v**5 + 32 * v**4 + 36 * v**3 + 48 * v**2 + 24 * v + 8))
        Rt = (t * t * (3 * y**3 + 11 * y**2 + 16 * y + 8)
              - t * (3 * y**4 + y**3 - 25 * y**2 - 60 * y - 40)
              - (8 * y**4 + 24 * y**3 + 16 * y**2 - 36 * y - 48))
    else:
        raise DomainError(f"slope polynomials are available for k = 2, 3, 4 only, got {k}")
    return R, Rt


def q3_chi(k: int, v: float) -> float:
    """Positive factor with ``R(v; t) = chi(v) R~(y; t)``."""
    if k == 2:
        return v
    if k == 3:
        return v * v * (v + 1)
    if k == 4:
        return v**4
    raise DomainError(f"unsupported k={k}")


def q3_t_star(k: int) -> float:
    return (11 - 7 * k + math.sqrt(49 * k * k + 62 * k + 49)) / (6 * (k - 1))


def second_derivative_K1_at_1(k: int, theta: float) -> float:
    """Closed form of ``d^2 K_1 / dv^2`` at ``v = 1`` for q = 3."""
    t = theta - 1.0
    den = (k - 1) * (t + 1) - 2
    if den == 0:
        raise DomainError("second derivative formula is singular at theta = 1 + 2/(k-1)")
    quad = (k - 1) ** 2 / 2 * t * t + (k - 1) * (7 * k - 11) / 6 * t - 3 * k + 1
    return (k / den) ** (k + 1) * (k - 1) / 2 * quad


# brute-force oracle ---------------------------------------------------------

@dataclass
class HomSolution:
    z: np.ndarray
    kind: str  # trivial | scalar | pair | zero_field
    m: int = 0
    u: float = 1.0
    v: float = 1.0
    placement_count: int = 1
    residual: float = 0.0


def hom_residual(w: np.ndarray, k: int, theta: float, shift: np.ndarray) -> np.ndarray:
    """``w - F(k w + shift)`` in log coordinates ``w = ln z``."""
    return w - f_map(k * w + shift, theta)


def classify(z: np.ndarray, alpha: float, tol: float = 1e-6) -> HomSolution:
    z = np.asarray(z, dtype=float)
    ones = np.abs(z - 1.0) < tol
    if np.all(ones):
        return HomSolution(z, "trivial")
    q1 = z.size
    if alpha == 0:
        vals = z[~ones]
        if np.ptp(vals) < tol:
            m = int((~ones).sum())
            return HomSolution(z, "zero_field", m=m, u=float(vals.mean()), placement_count=math.comb(q1, m))
        return HomSolution(z, "unshaped")
    rest = z[1:]
    rest_ones = ones[1:]
    if np.all(rest_ones):
        return HomSolution(z, "scalar", u=float(z[0]))
    vals = rest[~rest_ones]
    if np.ptp(vals) < tol:
        m = int((~rest_ones).sum())
        return HomSolution(z, "pair", m=m, u=float(z[0]), v=float(vals.mean()), placement_count=math.comb(q1 - 1, m))
    return HomSolution(z, "unshaped")


def _structured_starts(q: int, lt: float, n1: int = 60, n2: int = 30) -> np.ndarray:
    q1 = q - 1
    lines = np.linspace(-lt, lt, n1)
    starts = [np.zeros((1, q1))]
    first = np.zeros((n1, q1))
    first[:, 0] = lines
    starts.append(first)
    grid = np.linspace(-lt, lt, n2)
    s, t = np.meshgrid(grid, grid, indexing="ij")
    s, t = s.ravel(), t.ravel()
    for size in range(1, q1 + 1):
        for subset in itertools.combinations(range(q1), size):
            blk = np.zeros((s.size, q1))
            blk[:, list(subset)] = t[:, None]
            if 0 not in subset:
                blk[:, 0] = s
            starts.append(blk)
    return np.concatenate(starts)


def _newton(w: np.ndarray, k: int, theta: float, shift: np.ndarray, max_iter: int = 80) -> tuple[np.ndarray, np.ndarray]:
    lt = math.log(theta)
    box = lt + 0.5
    q1 = w.shape[1]
    eye = np.eye(q1)
    active = np.ones(w.shape[0], dtype=bool)
    res = np.max(np.abs(hom_residual(w, k, theta, shift)), axis=1)
    for _ in range(max_iter):
        idx = np.flatnonzero(active & (res > 1e-13))
        if idx.size == 0:
            break
        wa = w[idx]
        r = hom_residual(wa, k, theta, shift)
        jac = eye - k * f_jacobian(k * wa + shift, theta)
        try:
            step = np.linalg.solve(jac, -r[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.empty_like(wa)
            for j in range(idx.size):
                try:
                    step[j] = np.linalg.solve(jac[j], -r[j])
                except np.linalg.LinAlgError:
                    step[j] = -r[j]
        step = np.where(np.isfinite(step), step, 0.0)
        cur = np.max(np.abs(r), axis=1)
        t = np.ones(idx.size)
        new = wa.copy()
        done = np.zeros(idx.size, dtype=bool)
        for _ in range(30):
            todo = np.flatnonzero(~done)
            if todo.size == 0:
                break
            trial = np.clip(wa[todo] + t[todo, None] * step[todo], -box, box)
            tr = np.max(np.abs(hom_residual(trial, k, theta, shift)), axis=1)
            ok = tr < cur[todo]
            acc = todo[ok]
            new[acc] = trial[ok]
            res[idx[acc]] = tr[ok]
            done[acc] = True
            t[todo[~ok]] *= 0.5
        w[idx] = new
        active[idx[~done]] = False
    return w, res


def oracle_enumerate(k: int, q: int, theta: float, alpha: float, n_sobol: int = 10_000,
                     seed: int = 0, dedup: float = 1e-6) -> list[HomSolution]:
    """All positive solutions of the homogeneous system by multi-start damped Newton.

    Starts: a scrambled Sobol set in the box ``|ln z_i| <= ln theta + 0.1``
    (every solution lies in ``|ln z_i| <= ln theta``) and dense grids on the
    planes where coordinates take at most two distinct values besides 1.
    """
    if q > 6:
        raise DomainError("the brute-force oracle supports q <= 6")
    q1 = q - 1
    shift = np.zeros(q1)
    shift[0] = alpha * math.log(theta)
    if theta <= 1.0:
        return [HomSolution(np.ones(q1), "trivial")]
    lt = math.log(theta)
    sob = qmc.Sobol(d=q1, scramble=True, seed=seed)
    m = int(math.ceil(math.log2(max(n_sobol, 2))))
    pts = sob.random_base2(m)[:n_sobol]
    w0 = np.concatenate([(2 * pts - 1) * (lt + 0.1), _structured_starts(q, lt)])
    w, res = _newton(w0, k, theta, shift)
    good = w[res < 1e-10]
    found: list[np.ndarray] = []
    # converged copies agree far below the dedup tolerance; collapse them cheaply first
    reps = np.unique(np.round(good, 9), axis=0) if good.size else good
    for x in reps:
        if not any(np.max(np.abs(x - y)) < dedup for y in found):
            found.append(x)
    if not found:
        raise RuntimeError("oracle found no solution; the system always has one")
    out = []
    for x in found:
        # polish once more for the reported residual
        x = x - np.linalg.solve(np.eye(q1) - k * f_jacobian(k * x + shift, theta), hom_residual(x, k, theta, shift))
        r = float(np.max(np.abs(hom_residual(x, k, theta, shift))))
        sol = classify(np.exp(x), alpha)
        sol.residual = r
        out.append(sol)
    return out


def solution_gbc(sol: HomSolution, k: int, depth: int) -> GbcAssignment:
    """Extension of a homogeneous solution to a ball: ``beta h(x) = k ln z`` off the root.

    The root has ``k+1`` successors, so its compatible value is ``(k+1) ln z``.
    """
    ball = build_ball(k, depth)
    h = np.broadcast_to(k * np.log(sol.z), (ball.size, sol.z.size)).copy()
    h[0] = (k + 1) * np.log(sol.z)
    return GbcAssignment(ball, h)


def solution_residual(sol: HomSolution, k: int, theta: float, alpha: float, depth: int = 2) -> float:
    gbc = solution_gbc(sol, k, depth)
    xi = np.zeros_like(gbc.h)
    xi[:, 0] = alpha
    return compatibility_residual(gbc, xi, theta).max_residual
