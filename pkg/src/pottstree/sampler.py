"""Boundary laws, exact forward sampling of splitting Gibbs measures, and translation checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Iterator

import numpy as np

from .freetree import Ball, GroupWord, build_ball, multiply
from .model import (
    DuplicatedRootField,
    FieldSpec,
    GbcAssignment,
    _generator,
    compatibility_residual,
    expand_vector,
    f_map,
    realize_field,
    reduce_vector,
)
from .uniqueness import GapValue, _ell_min

COMPAT_TOL = 1e-9


class IncompatibleError(ValueError):
    """The boundary field does not satisfy the compatibility recursion."""


def _require_compatible(gbc: GbcAssignment, xi: np.ndarray, theta: float, tol: float) -> float:
    res = compatibility_residual(gbc, xi, theta).max_residual
    if not res < tol:
        raise IncompatibleError(f"boundary field is not compatible: residual {res:.3e} >= {tol:.1e}")
    return res


def _maxnorm(logz: np.ndarray) -> np.ndarray:
    return np.exp(logz - logz.max(axis=-1, keepdims=True))


@dataclass
class BoundaryLaw:
    """Positive q-vectors on directed edges, each scaled to maximum 1.

    ``inward[i]`` is ``z(i, parent(i))`` and ``outward[i]`` is ``z(parent(i), i)``
    for every non-root vertex ``i``; row 0 of both arrays is unused.
    """

    ball: Ball
    inward: np.ndarray
    outward: np.ndarray

    def law(self, x: int, y: int) -> np.ndarray:
        if x > 0 and self.ball.parent[x] == y:
            return self.inward[x]
        if y > 0 and self.ball.parent[y] == x:
            return self.outward[y]
        raise KeyError(f"({x}, {y}) is not an edge of the ball")

    def h_dagger(self, x: int, y: int) -> np.ndarray:
        """Reduced ``beta * h_dagger(x, y) = ln z(x, y)`` (last coordinate as reference)."""
        return reduce_vector(np.log(self.law(x, y)))

    def edges(self) -> Iterator[tuple[int, int]]:
        for i in range(1, self.ball.size):
            p = int(self.ball.parent[i])
            yield i, p
            yield p, i

    def to_json(self) -> dict[str, list[float]]:
        labels = self.ball.labels()
        return {f"{labels[x]}>{labels[y]}": self.law(x, y).tolist() for x, y in self.edges()}


def outward_law(gbc: GbcAssignment, xi: np.ndarray, theta: float, tol: float = COMPAT_TOL) -> BoundaryLaw:
    """Boundary law of a compatible field.

    Inward edges carry ``exp(beta h(x))``. Outward edges follow, root first,
    from ``z_i(x, y) ∝ prod_{v ~ x, v != y} sum_j theta^{delta_ij} exp(beta xi_j(v)) z_j(v, x)``.
    """
    _require_compatible(gbc, xi, theta, tol)
    return _build_law(gbc, xi, theta)


def _build_law(gbc: GbcAssignment, xi: np.ndarray, theta: float) -> BoundaryLaw:
    ball = gbc.ball
    beta = math.log(theta)
    q = gbc.q
    lbx = expand_vector(beta * np.asarray(xi, dtype=float)[:ball.size])
    lh = expand_vector(gbc.h)
    inward = np.ones((ball.size, q))
    outward = np.ones((ball.size, q))
    inward[1:] = _maxnorm(lh[1:])
    # log of sum_j theta^{delta_ij} exp(beta xi_j(v)) z_j(v, parent(v)) for every v
    up = np.log(_kernel(theta, lbx + np.log(inward)))
    up[0] = 0.0
    for j in range(ball.depth):
        sp = ball.sphere(j)
        for x in sp:
            kids = ball.children(x)
            tot = up[kids.start:kids.stop].sum(axis=0)
            if x > 0:
                tot = tot + np.log(_kernel(theta, lbx[ball.parent[x]] + np.log(outward[x])))
            for y in kids:
                outward[y] = _maxnorm(tot - up[y])
    return BoundaryLaw(ball, inward, outward)


def _kernel(theta: float, logw: np.ndarray) -> np.ndarray:
    """``sum_j theta^{delta_ij} e^{logw_j}`` for each ``i`` (last axis)."""
    s = logw.max(axis=-1, keepdims=True)
    e = np.exp(logw - s)
    return ((theta - 1.0) * e + e.sum(axis=-1, keepdims=True)) * np.exp(s)


def law_conditionals(law: BoundaryLaw, xi: np.ndarray, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Root distribution and per-child weight vectors derived from the inward law.

    Returns ``(root_probs, child_w)`` where the conditional law of the spin at
    ``y`` given spin ``s`` at its parent is ``child_w[y] * theta^{delta(s, .)}``
    normalized.
    """
    ball = law.ball
    beta = math.log(theta)
    lbx = expand_vector(beta * np.asarray(xi, dtype=float)[:ball.size])
    child_w = np.exp(lbx) * law.inward
    child_w[0] = 0.0
    root = np.log(_kernel(theta, np.log(child_w[1:ball.sphere(1).stop]))).sum(axis=0) + lbx[0]
    root_p = np.exp(root - root.max())
    return root_p / root_p.sum(), child_w


@dataclass
class SpinSample:
    spins: np.ndarray  # (count, |V_n|) with values 1..q
    seed: int
    depth: int

    def to_csv_rows(self, ball: Ball) -> Iterator[tuple[int, str, int]]:
        labels = ball.labels()
        for s, row in enumerate(self.spins):
            for i, v in enumerate(row):
                yield s, labels[i], int(v)


def sample_configuration(gbc: GbcAssignment, xi: np.ndarray, theta: float, n: int | None = None,
                         count: int = 1, seed: int = 0, chunk: int = 100_000,
                         law: BoundaryLaw | None = None) -> SpinSample:
    """Exact samples of the finite-ball measure of a compatible field, drawn root to leaves."""
    if law is None:
        law = outward_law(gbc, xi, theta)
    n = gbc.ball.depth if n is None else n
    ball = build_ball(gbc.ball.k, n)
    nv = ball.size
    root_p, child_w = law_conditionals(law, xi, theta)
    child_w = child_w[:nv]
    q = root_p.size
    rng = _generator(seed, "sample")
    out = np.empty((count, nv), dtype=np.int8)
    root_cdf = np.cumsum(root_p)
    for start in range(0, count, chunk):
        c = min(chunk, count - start)
        u = rng.random((c, nv))
        s = np.empty((c, nv), dtype=np.int64)
        s[:, 0] = np.minimum(np.searchsorted(root_cdf, u[:, 0] * root_cdf[-1], side="right"), q - 1)
        for j in range(1, n + 1):
            sp = ball.sphere(j)
            par = ball.parent[sp.start:sp.stop]
            w = np.broadcast_to(child_w[sp.start:sp.stop], (c, len(sp), q)).copy()
            ps = s[:, par]
            np.put_along_axis(w, ps[..., None], np.take_along_axis(w, ps[..., None], axis=2) * theta, axis=2)
            cdf = np.cumsum(w, axis=2)
            thresh = u[:, sp.start:sp.stop] * cdf[..., -1]
            s[:, sp.start:sp.stop] = np.minimum((cdf < thresh[..., None]).sum(axis=2), q - 1)
        out[start:start + c] = s + 1
    return SpinSample(out, seed, n)


def empirical_table(sample: SpinSample, q: int) -> np.ndarray:
    """Relative frequencies over Phi^{V_n}, same layout as the exact table."""
    nv = sample.spins.shape[1]
    codes = np.ravel_multi_index(tuple((sample.spins - 1).T.astype(np.int64)), (q,) * nv)
    counts = np.bincount(codes, minlength=q**nv)
    return (counts / counts.sum()).reshape((q,) * nv)


# translation invariance -------------------------------------------------------

@dataclass
class TIReport:
    field_dev: float
    symmetry_dev: float
    shift_dev: float
    shifts_tested: int
    compat_residual: float

    def certified(self, tol: float = 1e-9) -> bool:
        return self.compat_residual < COMPAT_TOL and max(self.field_dev, self.symmetry_dev, self.shift_dev) < tol


def check_translation_invariance(gbc: GbcAssignment, xi: np.ndarray, theta: float,
                                 max_shift_len: int | None = None) -> TIReport:
    """Finite-ball versions of the three conditions for shift invariance.

    Deviations are measured on the working scale (``beta`` times the field).
    Condition (iii) is checked for every shift ``z`` with ``|z| <= max_shift_len``
    (default ``depth - 1``) and every directed edge whose image stays in the ball.
    Nothing is raised for an incompatible field; its residual is reported and
    a certificate then means nothing.
    """
    ball = gbc.ball
    if ball.depth < 2:
        raise ValueError("translation checks need depth >= 2")
    xi = np.asarray(xi, dtype=float)[:ball.size]
    field_dev = float(np.max(np.abs(xi - xi[0])))
    resid = compatibility_residual(gbc, xi, theta).max_residual
    law = _build_law(gbc, xi, theta)
    hd_in = np.log(law.inward)
    hd_out = np.log(law.outward)
    red_in = reduce_vector(hd_in)
    red_out = reduce_vector(hd_out)
    sym = float(np.max(np.abs(red_in[1:] - red_out[1:]))) if ball.size > 1 else 0.0

    lmax = ball.depth - 1 if max_shift_len is None else max_shift_len
    words = list(ball.words())
    shift_dev = 0.0
    tested = 0
    for z in words:
        if len(z) == 0 or len(z) > lmax:
            continue
        tested += 1
        for y in range(1, ball.size):
            x = int(ball.parent[y])
            zx = multiply(z, words[x])
            zy = multiply(z, words[y])
            if len(zx) > ball.depth or len(zy) > ball.depth:
                continue
            ix, iy = ball.index(zx), ball.index(zy)
            for a, b, ia, ib in ((x, y, ix, iy), (y, x, iy, ix)):
                orig = reduce_vector(np.log(law.law(a, b)))
                img = reduce_vector(np.log(law.law(ia, ib)))
                shift_dev = max(shift_dev, float(np.max(np.abs(orig - img))))
    return TIReport(field_dev, sym, shift_dev, tested, resid)


def tiled_colours(k: int, q: int, theta: float, xi0: np.ndarray, start: np.ndarray,
                  tol: float = 1e-13, max_iter: int = 200) -> np.ndarray:
    """Colours ``c_1..c_{k+1}`` with ``c_a = sum_{b != a} F(c_b + beta xi0)``, by damped Newton."""
    beta = math.log(theta)
    bx = beta * np.asarray(xi0, dtype=float)
    c = np.array(start, dtype=float).reshape(k + 1, q - 1)

    def resid(flat: np.ndarray) -> np.ndarray:
        cc = flat.reshape(k + 1, q - 1)
        g = f_map(cc + bx, theta)
        return (cc - (g.sum(axis=0) - g)).ravel()

    x = c.ravel()
    for _ in range(max_iter):
        r = resid(x)
        if np.max(np.abs(r)) < tol:
            break
        h = 1e-7
        jac = np.empty((x.size, x.size))
        for i in range(x.size):
            e = np.zeros(x.size)
            e[i] = h
            jac[:, i] = (resid(x + e) - resid(x - e)) / (2 * h)
        step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        t = 1.0
        while t > 1e-8 and np.max(np.abs(resid(x + t * step))) >= np.max(np.abs(r)):
            t *= 0.5
        x = x + t * step
    return x.reshape(k + 1, q - 1)


def tiled_assignment(ball: Ball, colours: np.ndarray, xi0: np.ndarray, theta: float) -> GbcAssignment:
    """Chessboard field ``h(x) = colour[last letter of x]``; the root value from compatibility."""
    beta = math.log(theta)
    h = np.asarray(colours)[ball.last.astype(int) - 1].copy()
    g = f_map(np.asarray(colours) + beta * np.asarray(xi0), theta)
    h[0] = g.sum(axis=0)
    return GbcAssignment(ball, h)


# gap estimate ---------------------------------------------------------------

def estimate_gap(spec: FieldSpec, k: int, n: int, q: int, seed: int = 0) -> GapValue:
    """Finite-ball surrogate ``max_ell min_{x in V_n} min_{i != ell}(xi_i(x) - xi_ell(x))``."""
    ball = build_ball(k, n)
    red = realize_field(spec, ball, q, seed)
    full = expand_vector(red)
    if isinstance(spec, DuplicatedRootField):
        full = full[:1]
    return GapValue(float(_ell_min(full).min(axis=0).max()), False, n)
