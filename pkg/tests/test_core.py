import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coarse_lab.core import (
    Entourage,
    Space,
    ball,
    bounded_witness,
    compose,
    degree,
    diagonal,
    empty_relation,
    full_relation,
    intersection,
    inverse,
    power,
    symmetrize,
    union,
)
from coarse_lab.errors import InputError, SpaceMismatchError, UnknownPointError

from conftest import entourage, relations


def brute_compose(p1, p2):
    return {(x, y) for (x, z) in p1 for (w, y) in p2 if z == w}


def brute_ball(p, ys):
    return {x for (x, y) in p if y in ys}


def cycle5():
    sp = Space.range(5)
    pairs = [(i, i) for i in range(5)] + [(i, (i + 1) % 5) for i in range(5)] + [((i + 1) % 5, i) for i in range(5)]
    return sp, Entourage(sp, pairs)


def test_space_labels_round_trip():
    sp = Space(["a", "b", "c"])
    assert [sp.resolve(sp.label(i)) for i in range(3)] == [0, 1, 2]
    assert sp.resolve("b") == 1 and sp.resolve(2) == 2


def test_space_rejects_duplicates_and_unknowns():
    with pytest.raises(InputError):
        Space(["a", "a"])
    sp = Space(["a"])
    with pytest.raises(UnknownPointError):
        sp.resolve("z")
    with pytest.raises(UnknownPointError):
        sp.resolve(3)


def test_compose_small_example():
    sp = Space.range(3)
    t = compose(Entourage(sp, [(0, 1)]), Entourage(sp, [(1, 2)]))
    assert t.pairs == {(0, 2)}


def test_compose_space_mismatch():
    with pytest.raises(SpaceMismatchError):
        compose(diagonal(Space.range(2)), diagonal(Space.range(3)))


def test_inverse_examples():
    sp = Space.range(3)
    assert inverse(diagonal(sp)) == diagonal(sp)
    assert inverse(Entourage(sp, [(0, 1)])).pairs == {(1, 0)}


def test_ball_on_five_cycle():
    sp, t = cycle5()
    assert ball(t, [0]) == {4, 0, 1}
    assert ball(diagonal(sp), [3]) == {3}


def test_degree_examples():
    sp, t = cycle5()
    d = degree(t)
    assert (d.fwd_deg, d.bwd_deg) == (3, 3)
    d = degree(diagonal(sp))
    assert (d.fwd_deg, d.bwd_deg) == (1, 1)
    assert degree(empty_relation(sp)).max == 0


def test_bounded_witness_examples():
    sp, t = cycle5()
    assert bounded_witness([4, 0, 1], t) == 0
    assert bounded_witness([2], diagonal(sp)) == 2
    assert bounded_witness([0, 2], diagonal(Space.range(3))) is None


def test_power_zero_is_diagonal():
    sp, t = cycle5()
    assert power(t, 0) == diagonal(sp)
    assert power(t, 2) == compose(t, t)
    assert power(t, 5) == full_relation(sp)


def test_empty_entourage_is_legal():
    sp = Space.range(4)
    e = empty_relation(sp)
    assert len(e) == 0
    assert ball(e, [0, 1]) == frozenset()
    assert compose(e, full_relation(sp)) == e


@given(relations(), relations())
def test_compose_matches_brute_force(r1, r2):
    n = min(r1[0], r2[0])
    p1 = {(x, y) for x, y in r1[1] if x < n and y < n}
    p2 = {(x, y) for x, y in r2[1] if x < n and y < n}
    assert compose(entourage(n, p1), entourage(n, p2)).pairs == brute_compose(p1, p2)


@given(relations())
def test_inverse_of_composition(r):
    n, p = r
    t1 = entourage(n, p)
    t2 = entourage(n, {(y, x) for x, y in p if (x + y) % 2 == 0})
    assert inverse(compose(t1, t2)) == compose(inverse(t2), inverse(t1))
    assert inverse(inverse(t1)) == t1


@given(relations(6), relations(6), relations(6))
def test_composition_associative(r1, r2, r3):
    n = min(r1[0], r2[0], r3[0])
    ts = [entourage(n, {(x, y) for x, y in r[1] if x < n and y < n}) for r in (r1, r2, r3)]
    assert compose(compose(ts[0], ts[1]), ts[2]) == compose(ts[0], compose(ts[1], ts[2]))


@given(relations(), st.data())
def test_ball_and_composition(r, data):
    n, p = r
    t = entourage(n, p)
    ys = data.draw(st.sets(st.integers(0, n - 1)))
    assert ball(t, ys) == brute_ball(p, ys)
    # (T1 o T2)[x] = T1[T2[x]]
    t2 = symmetrize(t)
    for x in range(n):
        assert ball(compose(t, t2), [x]) == ball(t, ball(t2, [x]))


@given(relations(), relations())
def test_bounded_image_is_bounded(r1, r2):
    n = min(r1[0], r2[0])
    t1 = entourage(n, {(x, y) for x, y in r1[1] if x < n and y < n})
    t2 = entourage(n, {(x, y) for x, y in r2[1] if x < n and y < n})
    for x in range(n):
        y_set = ball(t2, [x])
        if not y_set:
            continue
        assert bounded_witness(y_set, t2) is not None
        assert bounded_witness(ball(t1, y_set), compose(t1, t2)) is not None


@given(relations())
def test_degree_relations(r):
    n, p = r
    t = entourage(n, p)
    d = degree(t)
    assert d.bwd_deg == degree(inverse(t)).fwd_deg
    assert d.fwd_deg == max(len(ball(t, [x])) for x in range(n))
    assert degree(compose(t, t)).fwd_deg <= d.fwd_deg**2


@given(relations())
def test_fwd_bwd_are_transposes(r):
    n, p = r
    t = entourage(n, p)
    from_fwd = {(int(z), x) for x in range(n) for z in t.fwd[x]}
    from_bwd = {(x, int(z)) for x in range(n) for z in t.bwd[x]}
    assert from_fwd == from_bwd == set(p)
    for x in range(n):
        assert list(t.fwd[x]) == sorted(t.fwd[x])


@given(relations(), relations())
def test_monotonicity(r1, r2):
    n = min(r1[0], r2[0])
    small = entourage(n, {(x, y) for x, y in r1[1] if x < n and y < n})
    u = entourage(n, {(x, y) for x, y in r2[1] if x < n and y < n})
    big = union(small, u)
    assert small <= big
    assert compose(small, u) <= compose(big, u)
    for x in range(n):
        assert ball(small, [x]) <= ball(big, [x])


@given(relations(), relations())
def test_set_operations(r1, r2):
    n = min(r1[0], r2[0])
    p1 = {(x, y) for x, y in r1[1] if x < n and y < n}
    p2 = {(x, y) for x, y in r2[1] if x < n and y < n}
    t1, t2 = entourage(n, p1), entourage(n, p2)
    assert union(t1, t2).pairs == p1 | p2
    assert intersection(t1, t2).pairs == p1 & p2
    assert (t1 - t2).pairs == p1 - p2
    s = symmetrize(t1)
    assert s.is_symmetric and s.contains_diagonal


def test_bounded_witness_smallest_id():
    sp = Space.range(4)
    t = full_relation(sp)
    assert bounded_witness([3], t) == 0
    assert bounded_witness([], t) == 0
    # the empty set sits inside every ball, even an empty one
    assert bounded_witness([], empty_relation(sp)) == 0


def test_brute_force_all_triples_small():
    sp = Space.range(3)
    all_pairs = list(itertools.product(range(3), repeat=2))
    rng = np.random.default_rng(0)
    for _ in range(20):
        p1 = {q for q in all_pairs if rng.random() < 0.4}
        p2 = {q for q in all_pairs if rng.random() < 0.4}
        assert compose(Entourage(sp, sorted(p1)), Entourage(sp, sorted(p2))).pairs == brute_compose(p1, p2)
