"""Uniqueness thresholds, the asymptotic field gap and the Psi fixed-point iteration."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.polynomial.legendre import leggauss

from .freetree import Ball, GroupWord
from .model import (
    ConstantField,
    DuplicatedRootField,
    FieldSpec,
    IidDiscreteField,
    IidUniformField,
    PerVertexField,
    children_sum,
    expand_vector,
    f_map,
)
from .roots import bisect, expand_upper

QUADRATURE_NODES = 256


class GapError(ValueError):
    """The asymptotic gap of the requested field is not a deterministic number."""


class ExchangeabilityError(ValueError):
    pass


# scalar functions ---------------------------------------------------------

def phi(t: float, theta: float) -> float:
    """``(sqrt(theta(t-1)) - sqrt(t-theta)) / (sqrt(theta(t-1)) + sqrt(t-theta))``, decreasing in ``t``."""
    if theta < 1.0:
        raise ValueError(f"theta must be >= 1, got {theta}")
    if t < theta:
        raise ValueError(f"phi needs t >= theta, got t={t}, theta={theta}")
    if math.isinf(t):
        r = math.sqrt(theta)
        return (r - 1.0) / (r + 1.0)
    a = math.sqrt(theta * (t - 1.0))
    b = math.sqrt(t - theta)
    if a + b == 0.0:
        return 0.0
    return (a - b) / (a + b)


def q_func(theta: float, q: int) -> float:
    r = math.sqrt(theta)
    return (q - 2) * (r - 1.0) / (r + 1.0)


def t_gamma(theta: float, q: int, gamma: float) -> float:
    """``theta + 1 + (q-2) theta**gamma``; ``gamma = -inf`` gives ``theta + 1``."""
    if q == 2 or gamma == -math.inf:
        return theta + 1.0
    return theta + 1.0 + (q - 2) * theta**gamma


def theta_star(k: int, q: int) -> float:
    return (k * (q - 1) + 1) / (k * (q - 1) - 1)


def _root_from_one(g, k: int, q: int) -> float:
    # g is increasing from g(1) = 0 < 1/k; the root lies below theta_*^2
    hi = expand_upper(g, 1.0, theta_star(k, q) ** 2 + 1.0)
    return bisect(g, 1.0, hi)


def theta_0(k: int, q: int) -> float:
    """Root of ``Q(theta) + (theta-1)/(theta+1) = 1/k``."""
    if q == 2:
        return (k + 1) / (k - 1)
    return _root_from_one(lambda th: q_func(th, q) + (th - 1.0) / (th + 1.0) - 1.0 / k, k, q)


def theta_star_gamma(k: int, q: int, gamma: float) -> float:
    """Root of ``Q(theta) + phi(t_gamma(theta); theta) = 1/k``."""
    if q == 2 or gamma == -math.inf:
        return theta_0(k, q)

    def g(th: float) -> float:
        return q_func(th, q) + phi(t_gamma(th, q, gamma), th) - 1.0 / k

    return _root_from_one(g, k, q)


def contraction_lambda(k: int, q: int, theta: float, gamma: float = -math.inf) -> float:
    """Upper bound ``k (Q + phi(t_gamma))`` on the contraction coefficient of Psi.

    ``gamma = -inf`` is the bound over all of R^{q-1}; finite ``gamma`` restricts
    the arguments of F to ``min_i u_i >= gamma ln theta``.
    """
    return k * (q_func(theta, q) + phi(t_gamma(theta, q, gamma), theta))


# the asymptotic gap -------------------------------------------------------

def _ell_min(full: np.ndarray) -> np.ndarray:
    """``min_{i != ell} (xi_i - xi_ell)`` for every ``ell``; shape ``(..., q)``."""
    q = full.shape[-1]
    out = np.empty(full.shape)
    for ell in range(q):
        diff = np.delete(full, ell, axis=-1) - full[..., ell:ell + 1]
        out[..., ell] = diff.min(axis=-1)
    return out


@dataclass(frozen=True)
class GapValue:
    value: float
    exact: bool  # False for finite-ball estimates
    depth: int | None = None


def gap_info(spec: FieldSpec, q: int) -> GapValue:
    if isinstance(spec, ConstantField):
        full = expand_vector(np.asarray(spec.xi_reduced, dtype=float))
        if full.shape[-1] != q:
            raise ValueError(f"constant field has {full.shape[-1]} coordinates, q = {q}")
        return GapValue(float(_ell_min(full).max()), True)
    if isinstance(spec, IidDiscreteField):
        full = np.array([a.xi for a in spec.atoms if a.p > 0], dtype=float)
        # every atom of positive mass recurs infinitely often, so the liminf
        # over vertices is the minimum over atoms
        return GapValue(float(_ell_min(full).min(axis=0).max()), True)
    if isinstance(spec, IidUniformField):
        return GapValue(-1.0, True)
    if isinstance(spec, DuplicatedRootField):
        raise GapError("gap is random; use per-realization estimate")
    if isinstance(spec, PerVertexField):
        vals = np.array([spec.values[s] for s in spec.values], dtype=float)
        depth = max(len(GroupWord.parse(s, 64)) for s in spec.values)
        full = expand_vector(vals)
        return GapValue(float(_ell_min(full).min(axis=0).max()), False, depth)
    raise TypeError(f"unsupported field spec {type(spec).__name__}")


def gap_delta_xi(spec: FieldSpec, q: int) -> float:
    """Asymptotic gap ``max_ell liminf_x min_{i != ell} (xi_i(x) - xi_ell(x))``.

    Exact for constant and i.i.d. fields. For an explicit per-vertex field the
    value is the finite-ball statistic (see :func:`gap_info` for the flag).
    """
    return gap_info(spec, q).value


def _aggregate(spec: IidDiscreteField) -> dict[tuple[float, ...], float]:
    out: dict[tuple[float, ...], float] = {}
    for a in spec.atoms:
        if a.p > 0:
            out[a.xi] = out.get(a.xi, 0.0) + a.p
    return out


def is_exchangeable(spec: FieldSpec, tol: float = 1e-12) -> bool:
    if isinstance(spec, IidUniformField):
        return True
    if not isinstance(spec, IidDiscreteField):
        return False
    law = _aggregate(spec)
    q = len(next(iter(law)))
    for i, j in itertools.combinations(range(q), 2):
        for xi, p in law.items():
            sw = list(xi)
            sw[i], sw[j] = sw[j], sw[i]
            if abs(law.get(tuple(sw), 0.0) - p) > tol:
                return False
    return True


def _min_gap_law(spec: FieldSpec, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the law of ``min_{i != q} (xi_i - xi_q)``."""
    if isinstance(spec, IidDiscreteField):
        law = _aggregate(spec)
        full = np.array(list(law), dtype=float)
        if full.shape[1] != q:
            raise ValueError(f"atoms have {full.shape[1]} coordinates, q = {q}")
        d = (full[:, :-1] - full[:, -1:]).min(axis=1)
        return d, np.array(list(law.values()))
    if isinstance(spec, IidUniformField):
        # density (1-d)^{q-1} on [0,1] and 1-|d|^{q-1} on [-1,0]
        x, w = leggauss(QUADRATURE_NODES)
        pos = 0.5 * (x + 1.0)
        neg = -pos
        nodes = np.concatenate([neg, pos])
        weights = 0.5 * np.concatenate([w * (1.0 - np.abs(neg) ** (q - 1)), w * (1.0 - pos) ** (q - 1)])
        return nodes, weights
    raise ExchangeabilityError("theta_dagger needs an i.i.d. exchangeable field")


def theta_dagger(k: int, q: int, spec: FieldSpec) -> float:
    """Root of ``Q(theta) + E phi(t_{D-k}(theta); theta) = 1/k`` with ``D = min_{i != q}(xi_i - xi_q)``."""
    if not is_exchangeable(spec):
        raise ExchangeabilityError("theta_dagger needs an i.i.d. field with exchangeable coordinates")
    nodes, weights = _min_gap_law(spec, q)

    def g(th: float) -> float:
        e = sum(w * phi(t_gamma(th, q, d - k), th) for d, w in zip(nodes, weights))
        return q_func(th, q) + e - 1.0 / k

    return _root_from_one(g, k, q)


# verdicts ----------------------------------------------------------------

@dataclass
class UniquenessVerdict:
    verdict: str  # unique_t2 | unique_t3 | unique_t4_as | unknown
    certificate: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {"verdict": self.verdict, "certificate": self.certificate}


def uniqueness_verdict(k: int, q: int, theta: float, spec: FieldSpec) -> UniquenessVerdict:
    """Strongest applicable sufficient condition for uniqueness; never claims non-uniqueness."""
    t0 = theta_0(k, q)
    cert: dict[str, Any] = {"theta": theta, "theta_0": t0}
    if theta < t0:
        return UniquenessVerdict("unique_t2", cert)
    try:
        gap = gap_info(spec, q)
    except GapError:
        gap = None
    if gap is not None and gap.exact:
        ts = theta_star_gamma(k, q, gap.value - k)
        cert.update(delta_xi=gap.value, theta_star_gap=ts)
        if theta < ts:
            return UniquenessVerdict("unique_t3", cert)
    if is_exchangeable(spec):
        td = theta_dagger(k, q, spec)
        cert["theta_dagger"] = td
        if theta < td:
            return UniquenessVerdict("unique_t4_as", cert)
    return UniquenessVerdict("unknown", cert)


# Psi iteration -----------------------------------------------------------

@dataclass
class IterationTrace:
    depth: int
    updates: list[float]
    sup_norms: list[float]
    g: np.ndarray
    converged: bool
    sweeps: int

    def to_json(self) -> dict[str, Any]:
        return {
            "depth": self.depth,
            "sweeps": self.sweeps,
            "converged": self.converged,
            "updates": self.updates,
            "sup_norms": self.sup_norms,
            "root_g": self.g[0].tolist(),
        }


def psi(ball: Ball, g: np.ndarray, bxi: np.ndarray, theta: float) -> np.ndarray:
    """``Psi g(x) = F(beta xi(x) + sum_{y in S(x)} g(y))`` at every vertex (leaves use an empty sum)."""
    return f_map(bxi + children_sum(ball, g), theta)


def iterate_psi(ball: Ball, xi: np.ndarray, theta: float, g0: np.ndarray, tol: float = 1e-12,
                max_sweeps: int = 1000, mode: str = "spheres") -> IterationTrace:
    """Iterate ``g <- Psi g`` on the interior of ``ball`` with leaf values held at ``g0``.

    ``mode="spheres"`` updates one sphere at a time from the leaves towards
    the root (Jacobi inside a sphere); ``mode="jacobi"`` updates the whole
    interior at once.
    """
    if ball.depth < 1:
        raise ValueError("iteration needs a ball of depth >= 1")
    if mode not in ("spheres", "jacobi"):
        raise ValueError(f"unknown sweep mode {mode!r}")
    bxi = math.log(theta) * np.asarray(xi, dtype=float)[:ball.size]
    g = np.array(g0, dtype=float, copy=True)
    n_int = ball.interior.stop
    updates: list[float] = []
    norms: list[float] = []
    converged = False
    for _ in range(max_sweeps):
        old = g[:n_int].copy()
        if mode == "jacobi":
            g[:n_int] = psi(ball, g, bxi, theta)[:n_int]
        else:
            for j in range(ball.depth - 1, -1, -1):
                sp = ball.sphere(j)
                kids = ball.children(sp.start)
                block = slice(kids.start, kids.start + ball.k * len(sp) + (1 if j == 0 else 0))
                s = g[block].reshape(len(sp), -1, g.shape[1]).sum(axis=1)
                g[sp.start:sp.stop] = f_map(bxi[sp.start:sp.stop] + s, theta)
        upd = float(np.max(np.abs(g[:n_int] - old)))
        updates.append(upd)
        norms.append(float(np.max(np.abs(g[:n_int]))))
        if upd < tol:
            converged = True
            break
    return IterationTrace(ball.depth, updates, norms, g, converged, len(updates))


def scalar_fixed_points(k: int, theta: float) -> list[float]:
    """Roots ``g`` of ``g = F(k g)`` for q = 2 and zero field, by bracketed bisection."""

    def r(x: float) -> float:
        return float(f_map(np.array([k * x]), theta)[0]) - x

    lnt = math.log(theta)
    grid = np.linspace(-lnt - 1e-9, lnt + 1e-9, 4001)
    vals = [r(x) for x in grid]
    out = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            out.append(float(a))
        elif fb != 0.0 and (fa > 0) != (fb > 0):
            out.append(bisect(r, float(a), float(b), tol=1e-15))
    return out
