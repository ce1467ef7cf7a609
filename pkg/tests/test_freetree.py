import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pottstree.freetree import (
    GroupWord,
    ResourceError,
    ball_size,
    build_ball,
    distance,
    enumerate_words,
    multiply,
    sphere_size,
    successors,
    translate,
)


@st.composite
def words(draw, k=None, max_len=8):
    k = draw(st.integers(2, 4)) if k is None else k
    n = draw(st.integers(0, max_len))
    letters = []
    for _ in range(n):
        choices = [a for a in range(1, k + 2) if not letters or a != letters[-1]]
        letters.append(draw(st.sampled_from(choices)))
    return GroupWord(k, tuple(letters))


@st.composite
def word_triples(draw):
    k = draw(st.integers(2, 4))
    return draw(words(k)), draw(words(k)), draw(words(k))


def test_reduction_cancels_repeated_letters():
    assert GroupWord(2, (1, 2, 2, 3)).letters == (1, 3)
    assert GroupWord(2, (1, 2, 2, 1)).is_identity


def test_root_has_k_plus_one_successors_others_k():
    k = 3
    root = GroupWord.identity(k)
    assert len(successors(root)) == k + 1
    for y in successors(root):
        assert len(successors(y)) == k
        assert all(len(z) == 2 for z in successors(y))


@pytest.mark.parametrize("k,n", [(2, 0), (2, 1), (2, 4), (3, 3), (5, 2)])
def test_ball_matches_recursive_enumeration(k, n):
    ball = build_ball(k, n)
    ref = enumerate_words(k, n)
    assert ball.size == len(ref) == ball_size(k, n)
    assert ball.labels() == [str(w) for w in ref]
    for j in range(n + 1):
        assert len(ball.sphere(j)) == sphere_size(k, j)


@pytest.mark.parametrize("k,n", [(2, 4), (3, 3), (4, 2)])
def test_index_roundtrip_and_children(k, n):
    ball = build_ball(k, n)
    for i, w in enumerate(ball.words()):
        assert ball.index(w) == i
        assert ball.index(str(w)) == i
        if i < ball.interior.stop:
            kids = [ball.word(c) for c in ball.children(i)]
            assert kids == successors(w)
            assert all(ball.parent[c] == i for c in ball.children(i))


def test_numbering_is_depth_independent():
    small, big = build_ball(3, 2), build_ball(3, 4)
    assert big.labels()[:small.size] == small.labels()
    np.testing.assert_array_equal(big.parent[:small.size], small.parent)


def test_vertex_budget():
    with pytest.raises(ResourceError):
        build_ball(3, 20, budget=10_000)


def test_index_outside_ball():
    ball = build_ball(2, 2)
    with pytest.raises(KeyError):
        ball.index("1.2.1")


def test_invalid_inputs():
    with pytest.raises(ValueError):
        GroupWord(2, (4,))
    with pytest.raises(ValueError):
        build_ball(1, 3)
    with pytest.raises(ValueError):
        multiply(GroupWord(2, (1,)), GroupWord(3, (1,)))


@given(words())
def test_parse_str_roundtrip(w):
    assert GroupWord.parse(str(w), w.k) == w


@given(words())
def test_inverse(w):
    assert multiply(w, w.inverse()).is_identity
    assert multiply(w.inverse(), w).is_identity


@given(word_triples())
def test_associativity(t):
    a, b, c = t
    assert multiply(multiply(a, b), c) == multiply(a, multiply(b, c))


@settings(max_examples=200)
@given(word_triples())
def test_translations_are_isometries(t):
    z, x, y = t
    assert distance(translate(z, x), translate(z, y)) == distance(x, y)


@given(words())
def test_translation_preserves_edges(z):
    k = z.k
    for x in enumerate_words(k, 2):
        for y in successors(x):
            assert distance(translate(z, x), translate(z, y)) == 1


def test_distance_is_tree_metric_on_small_ball():
    # compare with breadth-first graph distances on V_3
    k, n = 2, 3
    ball = build_ball(k, n)
    adj = {i: set() for i in range(ball.size)}
    for p, c in ball.edges():
        adj[int(p)].add(int(c))
        adj[int(c)].add(int(p))
    ws = list(ball.words())
    for s in range(ball.size):
        dist = {s: 0}
        frontier = [s]
        while frontier:
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if v not in dist:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        for t, d in dist.items():
            assert distance(ws[s], ws[t]) == d


def test_all_reduced_words_enumerated_once():
    k, n = 2, 3
    brute = {GroupWord(k, w) for L in range(n + 1) for w in itertools.product(range(1, k + 2), repeat=L)
             if all(a != b for a, b in zip(w, w[1:]))}
    assert set(enumerate_words(k, n)) == brute
