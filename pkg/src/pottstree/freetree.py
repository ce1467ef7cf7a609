"""The Cayley tree as the free product of k+1 involutions.

A vertex is a reduced word over generators ``1..k+1`` (no letter repeated
twice in a row); the empty word is the root. Word length is the graph
distance to the root, children append a letter and translations are left
multiplication.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

MAX_WORD_LENGTH = 64
DEFAULT_VERTEX_BUDGET = 5_000_000


class ResourceError(RuntimeError):
    """Raised when a requested structure exceeds a configured size budget."""


def _reduce(letters: Iterable[int]) -> tuple[int, ...]:
    out: list[int] = []
    for a in letters:
        if out and out[-1] == a:
            out.pop()
        else:
            out.append(a)
    return tuple(out)


@dataclass(frozen=True, order=True)
class GroupWord:
    """Reduced word in the free product of ``k+1`` copies of Z/2."""

    k: int
    letters: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        letters = tuple(int(a) for a in self.letters)
        for a in letters:
            if not 1 <= a <= self.k + 1:
                raise ValueError(f"generator index {a} outside 1..{self.k + 1}")
        letters = _reduce(letters)
        if len(letters) > MAX_WORD_LENGTH:
            raise ValueError(f"word length {len(letters)} exceeds cap {MAX_WORD_LENGTH}")
        object.__setattr__(self, "letters", letters)

    @classmethod
    def identity(cls, k: int) -> "GroupWord":
        return cls(k, ())

    @classmethod
    def generator(cls, k: int, i: int) -> "GroupWord":
        return cls(k, (i,))

    @classmethod
    def parse(cls, text: str, k: int) -> "GroupWord":
        """Inverse of ``str``: ``"e"`` or dot-separated generator indices."""
        text = text.strip()
        if text in ("e", ""):
            return cls(k, ())
        return cls(k, tuple(int(t) for t in text.split(".")))

    def __str__(self) -> str:
        return "e" if not self.letters else ".".join(map(str, self.letters))

    def __len__(self) -> int:
        return len(self.letters)

    def __mul__(self, other: "GroupWord") -> "GroupWord":
        return multiply(self, other)

    @property
    def is_identity(self) -> bool:
        return not self.letters

    def inverse(self) -> "GroupWord":
        return GroupWord(self.k, self.letters[::-1])

    def parent(self) -> "GroupWord":
        if not self.letters:
            raise ValueError("the root has no parent")
        return GroupWord(self.k, self.letters[:-1])


def _check_same_k(a: GroupWord, b: GroupWord) -> None:
    if a.k != b.k:
        raise ValueError(f"words over different trees: k={a.k} vs k={b.k}")


def multiply(a: GroupWord, b: GroupWord) -> GroupWord:
    """Reduced concatenation ``a·b``."""
    _check_same_k(a, b)
    return GroupWord(a.k, a.letters + b.letters)


def translate(z: GroupWord, x: GroupWord) -> GroupWord:
    """Left shift ``T_z(x) = z·x``; an automorphism of the tree."""
    return multiply(z, x)


def successors(x: GroupWord, k: int | None = None) -> list[GroupWord]:
    """Direct successors of ``x`` away from the root, in ascending generator order."""
    k = x.k if k is None else k
    if k != x.k:
        raise ValueError(f"word over k={x.k} queried with k={k}")
    last = x.letters[-1] if x.letters else None
    return [GroupWord(k, x.letters + (a,)) for a in range(1, k + 2) if a != last]


def distance(x: GroupWord, y: GroupWord) -> int:
    """Graph distance, the length of ``x⁻¹·y``."""
    return len(multiply(x.inverse(), y))


def sphere_size(k: int, n: int) -> int:
    return 1 if n == 0 else (k + 1) * k ** (n - 1)


def ball_size(k: int, n: int) -> int:
    if k == 1:
        return 1 + 2 * n
    return 1 + (k + 1) * (k**n - 1) // (k - 1)


@dataclass(frozen=True)
class Ball:
    """Breadth-first enumeration of the ball ``V_n`` of radius ``depth``.

    Vertices are numbered level by level, and within a level by the word read
    as a number in generator order. The numbering of ``V_n`` is a prefix of the
    numbering of ``V_{n+1}``, so a vertex index does not depend on the depth.
    """

    k: int
    depth: int
    parent: np.ndarray  # parent index, -1 for the root
    last: np.ndarray  # last letter, 0 for the root
    level: np.ndarray  # word length
    child_start: np.ndarray  # children of i are child_start[i]:child_start[i]+n_children[i]
    n_children: np.ndarray
    offsets: np.ndarray = field(repr=False)  # offsets[j] = first index of sphere j

    @property
    def size(self) -> int:
        return int(self.parent.shape[0])

    def __len__(self) -> int:
        return self.size

    def sphere(self, j: int) -> range:
        """Index range of the sphere ``W_j``."""
        return range(int(self.offsets[j]), int(self.offsets[j + 1]))

    @property
    def leaves(self) -> range:
        return self.sphere(self.depth)

    @property
    def interior(self) -> range:
        return range(0, int(self.offsets[self.depth]))

    def children(self, i: int) -> range:
        s = int(self.child_start[i])
        return range(s, s + int(self.n_children[i]))

    def word(self, i: int) -> GroupWord:
        letters = []
        while i > 0:
            letters.append(int(self.last[i]))
            i = int(self.parent[i])
        return GroupWord(self.k, tuple(reversed(letters)))

    def words(self) -> Iterator[GroupWord]:
        for i in range(self.size):
            yield self.word(i)

    def labels(self) -> list[str]:
        return [str(w) for w in self.words()]

    def index(self, x: GroupWord | str) -> int:
        """Position of ``x`` in the enumeration; ``KeyError`` if outside the ball."""
        if isinstance(x, str):
            x = GroupWord.parse(x, self.k)
        if x.k != self.k:
            raise ValueError(f"word over k={x.k} used with a ball over k={self.k}")
        n = len(x)
        if n > self.depth:
            raise KeyError(str(x))
        if n == 0:
            return 0
        k = self.k
        rank = x.letters[0] - 1
        for prev, a in zip(x.letters, x.letters[1:]):
            rank = rank * k + (a - 1 if a < prev else a - 2)
        return int(self.offsets[n]) + rank

    def __contains__(self, x: GroupWord) -> bool:
        return len(x) <= self.depth

    def edges(self) -> np.ndarray:
        """Array of (parent, child) index pairs."""
        idx = np.arange(1, self.size)
        return np.stack([self.parent[1:], idx], axis=1)


def build_ball(k: int, n: int, budget: int = DEFAULT_VERTEX_BUDGET) -> Ball:
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if n < 0:
        raise ValueError(f"depth must be >= 0, got {n}")
    if n > MAX_WORD_LENGTH:
        raise ValueError(f"depth {n} exceeds the word length cap {MAX_WORD_LENGTH}")
    total = ball_size(k, n)
    if total > budget:
        raise ResourceError(f"|V_{n}| = {total} exceeds the vertex budget {budget}")

    offsets = np.zeros(n + 2, dtype=np.int64)
    for j in range(n + 1):
        offsets[j + 1] = offsets[j] + sphere_size(k, j)

    parent = np.empty(total, dtype=np.int64)
    last = np.empty(total, dtype=np.int16)
    level = np.empty(total, dtype=np.int16)
    parent[0], last[0], level[0] = -1, 0, 0

    gens = np.arange(1, k + 2, dtype=np.int16)
    for j in range(n):
        lo, hi = offsets[j], offsets[j + 1]
        p_last = last[lo:hi]
        grid = np.broadcast_to(gens, (hi - lo, k + 1))
        keep = grid != p_last[:, None]
        if j == 0:
            keep = np.ones_like(keep)
        kids = grid[keep]
        par = np.repeat(np.arange(lo, hi), keep.sum(axis=1))
        c_lo, c_hi = offsets[j + 1], offsets[j + 2]
        parent[c_lo:c_hi] = par
        last[c_lo:c_hi] = kids
        level[c_lo:c_hi] = j + 1

    n_children = np.zeros(total, dtype=np.int64)
    child_start = np.full(total, total, dtype=np.int64)
    if n > 0:
        n_children[0] = k + 1
        child_start[0] = 1
        inner = np.arange(1, offsets[n])
        n_children[inner] = k
        child_start[inner] = offsets[2] + (inner - 1) * k if n >= 2 else total
    return Ball(k, n, parent, last, level, child_start, n_children, offsets)


def enumerate_words(k: int, n: int) -> list[GroupWord]:
    """Plain recursive BFS, independent of :func:`build_ball` (used as a cross-check)."""
    out = [GroupWord.identity(k)]
    frontier: Sequence[GroupWord] = out
    for _ in range(n):
        frontier = [y for x in frontier for y in successors(x)]
        out.extend(frontier)
    return out
