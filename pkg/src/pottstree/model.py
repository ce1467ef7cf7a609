"""Potts model on a Cayley tree: parameters, external fields, the map F and exact ball measures.

Conventions. The coupling is fixed to J = 1 and the activity is
``theta = exp(beta)``, so ``beta = ln(theta)``. External fields are given in
raw units and enter the energy as ``beta * xi``. Boundary conditions are
stored directly as the scaled log vector ``beta * h`` (the "working
variable"), reduced against coordinate ``q`` unless stated otherwise.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .freetree import Ball, ResourceError, build_ball

EXACT_STATE_LIMIT = 10**7
RESIDUAL_TOL = 1e-12
TV_TOL = 1e-10


@dataclass(frozen=True)
class ModelParams:
    k: int
    q: int
    theta: float

    def __post_init__(self) -> None:
        if int(self.k) != self.k or self.k < 2:
            raise ValueError(f"k must be an integer >= 2, got {self.k}")
        if int(self.q) != self.q or self.q < 2:
            raise ValueError(f"q must be an integer >= 2, got {self.q}")
        if not math.isfinite(self.theta) or self.theta < 1.0:
            raise ValueError(f"theta must be finite and >= 1, got {self.theta}")

    @property
    def beta(self) -> float:
        return math.log(self.theta)


# reduced vectors ---------------------------------------------------------

def reduce_vector(full: np.ndarray, ell: int | None = None) -> np.ndarray:
    """Drop coordinate ``ell`` (1-based, default last) after subtracting it from the rest."""
    full = np.asarray(full, dtype=float)
    q = full.shape[-1]
    ell = q if ell is None else ell
    if not 1 <= ell <= q:
        raise ValueError(f"reduction index {ell} outside 1..{q}")
    diff = full - full[..., ell - 1:ell]
    return np.delete(diff, ell - 1, axis=-1)


def expand_vector(reduced: np.ndarray, ell: int | None = None) -> np.ndarray:
    """Insert the implicit zero at position ``ell`` (default last)."""
    reduced = np.asarray(reduced, dtype=float)
    q = reduced.shape[-1] + 1
    ell = q if ell is None else ell
    return np.insert(reduced, ell - 1, 0.0, axis=-1)


def min_gap(reduced: np.ndarray, ell: int) -> np.ndarray:
    """``min_{i != ell} (xi_i - xi_ell)`` for q-reduced vectors (any leading shape)."""
    full = expand_vector(reduced)
    diff = full - full[..., ell - 1:ell]
    return np.min(np.delete(diff, ell - 1, axis=-1), axis=-1)


# the map F ---------------------------------------------------------------

def f_map(u: np.ndarray, theta: float) -> np.ndarray:
    """``F_i(u) = ln[((theta-1) e^{u_i} + 1 + sum_j e^{u_j}) / (theta + sum_j e^{u_j})]``.

    Evaluated with a max-shift so entries of order +-700 stay finite.
    Works on arrays of shape ``(..., q-1)``.
    """
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("f_map needs finite input")
    if theta < 1.0:
        raise ValueError(f"theta must be >= 1, got {theta}")
    s = np.maximum(np.max(u, axis=-1, keepdims=True), 0.0)
    e = np.exp(u - s)
    tail = np.exp(-s) + np.sum(e, axis=-1, keepdims=True)
    num = (theta - 1.0) * e + tail
    den = theta * np.exp(-s) + np.sum(e, axis=-1, keepdims=True)
    return np.log(num) - np.log(den)


def f_jacobian(u: np.ndarray, theta: float) -> np.ndarray:
    """Jacobian ``dF_i/du_j``, shape ``(..., q-1, q-1)``."""
    u = np.asarray(u, dtype=float)
    s = np.maximum(np.max(u, axis=-1, keepdims=True), 0.0)
    e = np.exp(u - s)
    tot = np.sum(e, axis=-1, keepdims=True)
    num = (theta - 1.0) * e + np.exp(-s) + tot
    den = theta * np.exp(-s) + tot
    jac = e[..., None, :] / num[..., :, None] - (e / den)[..., None, :]
    diag = (theta - 1.0) * e / num
    idx = np.arange(u.shape[-1])
    jac[..., idx, idx] += diag
    return jac


# fields -------------------------------------------------------------------

class FieldSpec:
    """Base class of the declarative external-field descriptions."""

    kind: str = ""

    def to_json(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantField(FieldSpec):
    xi_reduced: tuple[float, ...]
    kind = "constant"

    def to_json(self) -> dict[str, Any]:
        return {"type": "constant", "xi_reduced": list(self.xi_reduced)}


@dataclass(frozen=True)
class PerVertexField(FieldSpec):
    values: Mapping[str, tuple[float, ...]]
    kind = "per_vertex"

    def to_json(self) -> dict[str, Any]:
        return {"type": "per_vertex", "values": {k: list(v) for k, v in self.values.items()}}


@dataclass(frozen=True)
class Atom:
    xi: tuple[float, ...]
    p: float


def _check_atoms(atoms: Sequence[Atom]) -> None:
    if not atoms:
        raise ValueError("at least one atom is required")
    q = len(atoms[0].xi)
    if any(len(a.xi) != q for a in atoms):
        raise ValueError("all atoms must have the same number of coordinates")
    if any(a.p < 0 for a in atoms):
        raise ValueError("atom probabilities must be non-negative")
    total = sum(a.p for a in atoms)
    if abs(total - 1.0) > 1e-12:
        raise ValueError(f"atom probabilities sum to {total!r}, not 1")


@dataclass(frozen=True)
class IidDiscreteField(FieldSpec):
    atoms: tuple[Atom, ...]
    kind = "iid_discrete"

    def __post_init__(self) -> None:
        _check_atoms(self.atoms)

    def to_json(self) -> dict[str, Any]:
        return {"type": "iid_discrete", "atoms": [{"xi": list(a.xi), "p": a.p} for a in self.atoms]}


@dataclass(frozen=True)
class IidUniformField(FieldSpec):
    kind = "iid_uniform01"

    def to_json(self) -> dict[str, Any]:
        return {"type": "iid_uniform01"}


@dataclass(frozen=True)
class DuplicatedRootField(FieldSpec):
    atoms: tuple[Atom, ...]
    kind = "duplicated_root"

    def __post_init__(self) -> None:
        _check_atoms(self.atoms)

    def to_json(self) -> dict[str, Any]:
        return {"type": "duplicated_root", "atoms": [{"xi": list(a.xi), "p": a.p} for a in self.atoms]}


def field_from_json(obj: Mapping[str, Any]) -> FieldSpec:
    kind = obj.get("type")
    if kind == "constant":
        return ConstantField(tuple(float(x) for x in obj["xi_reduced"]))
    if kind == "per_vertex":
        return PerVertexField({str(k): tuple(float(x) for x in v) for k, v in obj["values"].items()})
    if kind in ("iid_discrete", "duplicated_root"):
        atoms = tuple(Atom(tuple(float(x) for x in a["xi"]), float(a["p"])) for a in obj["atoms"])
        return IidDiscreteField(atoms) if kind == "iid_discrete" else DuplicatedRootField(atoms)
    if kind == "iid_uniform01":
        return IidUniformField()
    raise ValueError(f"unknown field type {kind!r}")


def pm_one_coordinates(q: int) -> IidDiscreteField:
    """I.i.d. coordinates, each +-1 with probability 1/2 (all 2^q vectors equally likely)."""
    atoms = tuple(Atom(tuple(float(s) for s in signs), 0.5**q)
                  for signs in itertools.product((1, -1), repeat=q))
    return IidDiscreteField(atoms)


def _generator(seed: int, tag: str) -> np.random.Generator:
    # Philox is counter based; row i of a draw belongs to vertex i in the
    # canonical (depth independent) enumeration.
    key = int.from_bytes(hashlib.sha256(f"{seed}:{tag}".encode()).digest()[:8], "little")
    return np.random.Generator(np.random.Philox(key=key))


def realize_field(spec: FieldSpec, ball: Ball, q: int, seed: int = 0) -> np.ndarray:
    """Per-vertex reduced field (raw units), shape ``(|V_n|, q-1)``.

    Deterministic in ``(spec, seed)``. Because the vertex numbering of a ball
    is a prefix of that of any larger ball, realizations at different depths
    agree on their common vertices.
    """
    n = ball.size
    if isinstance(spec, ConstantField):
        xi = np.asarray(spec.xi_reduced, dtype=float)
        if xi.shape != (q - 1,):
            raise ValueError(f"constant field needs {q - 1} reduced entries, got {xi.shape}")
        return np.broadcast_to(xi, (n, q - 1)).copy()
    if isinstance(spec, PerVertexField):
        out = np.empty((n, q - 1))
        labels = ball.labels()
        missing = [s for s in labels if s not in spec.values]
        if missing:
            raise ValueError(f"per_vertex field is missing {len(missing)} vertices, e.g. {missing[0]!r}")
        extra = set(spec.values) - set(labels)
        if extra:
            raise ValueError(f"per_vertex field has {len(extra)} vertices outside the ball")
        for i, s in enumerate(labels):
            v = np.asarray(spec.values[s], dtype=float)
            if v.shape != (q - 1,):
                raise ValueError(f"vertex {s}: expected {q - 1} reduced entries")
            out[i] = v
        return out
    if isinstance(spec, (IidDiscreteField, DuplicatedRootField)):
        full = np.array([a.xi for a in spec.atoms], dtype=float)
        if full.shape[1] != q:
            raise ValueError(f"atoms have {full.shape[1]} coordinates, q = {q}")
        cdf = np.cumsum([a.p for a in spec.atoms])
        cdf[-1] = 1.0
        rng = _generator(seed, spec.kind)
        draws = rng.random(1 if isinstance(spec, DuplicatedRootField) else n)
        pick = np.searchsorted(cdf, draws, side="right")
        red = reduce_vector(full[pick])
        if isinstance(spec, DuplicatedRootField):
            red = np.broadcast_to(red[0], (n, q - 1)).copy()
        return red
    if isinstance(spec, IidUniformField):
        rng = _generator(seed, spec.kind)
        return reduce_vector(rng.random((n, q)))
    raise TypeError(f"unsupported field spec {type(spec).__name__}")


# boundary conditions -----------------------------------------------------

@dataclass
class GbcAssignment:
    """Reduced boundary field ``beta * h`` on every vertex of a ball."""

    ball: Ball
    h: np.ndarray

    def __post_init__(self) -> None:
        self.h = np.asarray(self.h, dtype=float)
        if self.h.ndim != 2 or self.h.shape[0] != self.ball.size:
            raise ValueError(f"h must have shape (|V_n|, q-1) = ({self.ball.size}, ?), got {self.h.shape}")

    @property
    def q(self) -> int:
        return self.h.shape[1] + 1


def children_sum(ball: Ball, values: np.ndarray) -> np.ndarray:
    """Sum of ``values[y]`` over the direct successors ``y`` of every vertex."""
    out = np.zeros_like(values)
    if ball.size > 1:
        np.add.at(out, ball.parent[1:], values[1:])
    return out


@dataclass
class ResidualReport:
    max_residual: float
    per_vertex: np.ndarray  # interior vertices only, in ball order

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.per_vertex))


def compatibility_residual(gbc: GbcAssignment, xi: np.ndarray, theta: float) -> ResidualReport:
    """``|| beta h(x) - sum_{y in S(x)} F(beta h(y) + beta xi(y)) ||_inf`` over interior vertices."""
    ball = gbc.ball
    if ball.depth == 0:
        raise ValueError("a ball of depth 0 has no interior vertex")
    beta = math.log(theta)
    g = f_map(gbc.h + beta * np.asarray(xi, dtype=float), theta)
    g[0] = 0.0
    rhs = children_sum(ball, g)
    interior = ball.interior
    res = np.max(np.abs(gbc.h[interior.start:interior.stop] - rhs[interior.start:interior.stop]), axis=1)
    return ResidualReport(float(res.max()), res)


def solve_inward(ball: Ball, xi: np.ndarray, theta: float, h_leaves: np.ndarray) -> GbcAssignment:
    """Compatible assignment obtained from leaf data by the leaf-to-root recursion."""
    beta = math.log(theta)
    q1 = h_leaves.shape[1]
    h = np.zeros((ball.size, q1))
    leaves = ball.leaves
    h[leaves.start:leaves.stop] = h_leaves
    for j in range(ball.depth - 1, -1, -1):
        kids = ball.sphere(j + 1)
        g = f_map(h[kids.start:kids.stop] + beta * xi[kids.start:kids.stop], theta)
        par = ball.parent[kids.start:kids.stop]
        acc = np.zeros((ball.size, q1))
        np.add.at(acc, par, g)
        sp = ball.sphere(j)
        h[sp.start:sp.stop] = acc[sp.start:sp.stop]
    return GbcAssignment(ball, h)


# exact finite-ball measures -----------------------------------------------

@dataclass
class BallMeasure:
    """Normalized probability table; axis ``i`` is vertex ``i``, entry ``s`` is spin ``s+1``."""

    ball: Ball
    q: int
    probs: np.ndarray

    def marginal(self, vertices: Sequence[int]) -> np.ndarray:
        drop = tuple(i for i in range(self.ball.size) if i not in set(vertices))
        return self.probs.sum(axis=drop)


def _log_weights(params: ModelParams, ball: Ball, xi: np.ndarray, boundary: np.ndarray) -> np.ndarray:
    k, q, beta = params.k, params.q, params.beta
    nv = ball.size
    xi_full = expand_vector(np.asarray(xi, dtype=float)[:nv])
    logw = np.zeros((q,) * nv)

    def along(axis: int, vec: np.ndarray) -> np.ndarray:
        shape = [1] * nv
        shape[axis] = q
        return vec.reshape(shape)

    for i in range(nv):
        logw = logw + along(i, beta * xi_full[i])
    coupling = beta * np.eye(q)
    for p, c in ball.edges():
        shape = [1] * nv
        shape[p], shape[c] = q, q
        logw = logw + coupling.reshape(shape)
    for i in ball.leaves:
        logw = logw + along(i, boundary[i])
    return logw


def exact_ball_measure(params: ModelParams, xi: np.ndarray, gbc: GbcAssignment, n: int | None = None,
                       state_limit: int = EXACT_STATE_LIMIT) -> BallMeasure:
    """Brute-force ``mu_n^h(sigma) ∝ exp{-beta H_n(sigma) + sum_{x in W_n} beta h_sigma(x)(x)}``.

    ``gbc`` may live on a larger ball; only its values on the sphere ``W_n``
    are used.
    """
    n = gbc.ball.depth if n is None else n
    ball = build_ball(params.k, n)
    states = params.q ** ball.size
    if states > state_limit:
        raise ResourceError(f"q^|V_n| = {params.q}^{ball.size} = {states} exceeds {state_limit}")
    boundary = expand_vector(gbc.h[:ball.size])
    logw = _log_weights(params, ball, xi, boundary)
    probs = np.exp(logw - logsumexp(logw))
    return BallMeasure(ball, params.q, probs)


@dataclass
class ConsistencyReport:
    tv: float
    residual_sphere: float
    residual_all: float
    compatible: bool
    consistent: bool

    @property
    def agrees(self) -> bool:
        return self.compatible == self.consistent


def check_marginal_consistency(params: ModelParams, xi: np.ndarray, gbc: GbcAssignment, n: int,
                               tol_residual: float = 1e-10, tol_tv: float = 1e-8) -> ConsistencyReport:
    """Compare ``sum_omega mu_{n+1}(sigma v omega)`` with ``mu_n(sigma)``.

    ``gbc`` must cover ``V_{n+1}``. The residual that decides consistency is the
    one on the sphere ``W_n``: only there does ``h`` enter both measures.
    """
    if gbc.ball.depth < n + 1:
        raise ValueError(f"boundary field must cover V_{n + 1}")
    upper = exact_ball_measure(params, xi, gbc, n + 1)
    lower = exact_ball_measure(params, xi, gbc, n)
    nv = lower.ball.size
    marg = upper.probs.sum(axis=tuple(range(nv, upper.ball.size)))
    tv = 0.5 * float(np.abs(marg - lower.probs).sum())

    sub_ball = build_ball(params.k, n + 1)
    sub = GbcAssignment(sub_ball, gbc.h[:sub_ball.size])
    rep = compatibility_residual(sub, xi[:sub_ball.size], params.theta)
    sphere = sub_ball.sphere(n)
    res_sphere = float(rep.per_vertex[sphere.start:sphere.stop].max())
    return ConsistencyReport(tv, res_sphere, rep.max_residual, res_sphere < tol_residual, tv < tol_tv)
