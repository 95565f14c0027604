import numpy as np
import pytest
from hypothesis import given, strategies as st

from coarse_lab import gallery
from coarse_lab.core import Entourage, Space, compose, degree, diagonal, full_relation, power
from coarse_lab.errors import InputError


def cycle_metric(n):
    return gallery.graph_metric(n, [(i, (i + 1) % n) for i in range(n)])


def test_metric_space_examples():
    m = cycle_metric(6)
    sp, t0 = gallery.metric_space(m, 0)
    assert t0 == diagonal(sp)
    sp, t1 = gallery.metric_space(m, 1)
    expected = {(i, i) for i in range(6)} | {(i, (i + 1) % 6) for i in range(6)} | {((i + 1) % 6, i) for i in range(6)}
    assert t1.pairs == expected
    d = degree(t1)
    assert (d.fwd_deg, d.bwd_deg) == (3, 3)
    sp, t3 = gallery.metric_space(m, 3)
    assert t3 == full_relation(sp) and degree(t3).max == 6


def test_metric_table_validation():
    with pytest.raises(InputError):
        gallery.MetricTable(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(InputError):
        gallery.MetricTable(np.array([[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]]))
    with pytest.raises(InputError):
        gallery.MetricTable(np.array([[1.0]]))
    with pytest.raises(InputError):
        gallery.graph_metric(3, [(0, 1)])


@given(st.integers(3, 20), st.floats(0, 5), st.floats(0, 5))
def test_metric_thresholds_nest(n, a, b):
    m = cycle_metric(n)
    lo, hi = sorted((a, b))
    _, t_lo = gallery.metric_space(m, lo)
    _, t_hi = gallery.metric_space(m, hi)
    assert t_lo <= t_hi
    assert t_lo.is_symmetric and t_lo.contains_diagonal


def test_group_axioms_checked():
    with pytest.raises(InputError):
        # not associative
        gallery.FiniteGroup(("a", "b", "c"), [[0, 1, 2], [1, 0, 0], [2, 2, 0]])
    with pytest.raises(InputError):
        gallery.FiniteGroup(("a", "b"), [[0, 0], [0, 0]])
    with pytest.raises(InputError):
        gallery.FiniteGroup(("a", "b"), [[0, 1], [1, 0]], (5,))


@pytest.mark.parametrize("make,order", [(gallery.cyclic_group, 7), (gallery.dihedral_group, 5), (gallery.symmetric_group, 4)])
def test_builtin_groups(make, order):
    g = make(order)
    expected = {gallery.cyclic_group: order, gallery.dihedral_group: 2 * order, gallery.symmetric_group: 24}[make]
    assert g.order == expected
    for x in range(g.order):
        assert g.mul(x, int(g.inverses[x])) == g.identity


def test_action_identity_and_cycle():
    g = gallery.cyclic_group(4)
    sp = Space(g.elements)
    act = gallery.left_translation_action(g)
    assert gallery.group_action_space(g, sp, act, [g.identity]) == diagonal(sp)
    t = gallery.group_action_space(g, sp, act, [1, 3])
    assert t.pairs == {((i + 1) % 4, i) for i in range(4)} | {((i + 3) % 4, i) for i in range(4)}
    d = degree(t)
    assert (d.fwd_deg, d.bwd_deg) == (2, 2)


def test_bad_action_rejected():
    g = gallery.cyclic_group(3)
    sp = Space.range(3)
    with pytest.raises(InputError):
        gallery.group_action_space(g, sp, [[0, 1, 2], [0, 1, 2], [1, 2, 0]], [1])


@given(st.sets(st.integers(0, 9), min_size=1), st.sets(st.integers(0, 9), min_size=1))
def test_action_composition_inside_product_set(k1, k2):
    g = gallery.dihedral_group(5)
    sp = Space(g.elements)
    act = gallery.left_translation_action(g)
    t1 = gallery.group_action_space(g, sp, act, k1)
    t2 = gallery.group_action_space(g, sp, act, k2)
    prod = {g.mul(a, b) for a in k1 for b in k2}
    assert compose(t1, t2) <= gallery.group_action_space(g, sp, act, prod)


def brute_box(seq, r):
    k = len(seq[0].generators)
    words = list(gallery.reduced_words(k, r))
    pairs = set()
    offset = 0
    for g in seq:
        images = set()
        for w in words:
            h = g.identity
            for letter in w:
                gen = g.generators[abs(letter) - 1]
                s = gen if letter > 0 else int(g.inverses[gen])
                h = g.mul(h, s)
            images.add(h)
        for h in images:
            for x in range(g.order):
                pairs.add((g.mul(h, x) + offset, x + offset))
        offset += g.order
    return pairs


def test_box_space_small():
    seq = [gallery.cyclic_group(2), gallery.cyclic_group(3)]
    sp, t0 = gallery.box_space(seq, 0)
    assert t0 == diagonal(sp)
    sp, t1 = gallery.box_space(seq, 1)
    assert sp.points == ("0:0", "0:1", "1:0", "1:1", "1:2")
    assert t1.pairs == brute_box(seq, 1)
    assert all((x < 2) == (y < 2) for x, y in t1.pairs)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_box_space_matches_words_and_ball_size(r):
    seq = [gallery.dihedral_group(3), gallery.symmetric_group(3), gallery.dihedral_group(6)]
    sp, t = gallery.box_space(seq, r)
    assert t.pairs == brute_box(seq, r)
    assert degree(t).max <= gallery.free_group_ball_size(2, r)
    assert t.is_symmetric and t.contains_diagonal


def test_box_components_never_link():
    seq = [gallery.cyclic_group(5), gallery.cyclic_group(7)]
    sp, t = gallery.box_space(seq, 1)
    big = power(t, 20)
    assert all((x < 5) == (y < 5) for x, y in big.pairs)


def test_box_space_generator_mismatch():
    with pytest.raises(InputError):
        gallery.box_space([gallery.cyclic_group(3), gallery.dihedral_group(3)], 1)


def test_free_group_ball_counts():
    for k, r in [(1, 3), (2, 2), (3, 2)]:
        assert gallery.free_group_ball_size(k, r) == len(list(gallery.reduced_words(k, r)))
    assert gallery.free_group_ball_size(2, 2) == 1 + 4 + 12


def test_random_regular_graph():
    sp, t = gallery.random_regular_graph(4, 3, seed=7)
    assert t == full_relation(sp)
    _, a = gallery.random_regular_graph(50, 3, seed=1)
    _, b = gallery.random_regular_graph(50, 3, seed=1)
    assert a == b
    rows = np.asarray(a.matrix.sum(axis=1)).ravel()
    assert np.all(rows == 4)  # three neighbours plus the diagonal
    assert a.is_symmetric
    with pytest.raises(InputError):
        gallery.random_regular_graph(5, 3, seed=0)


def test_graph_space_parsing():
    sp, t = gallery.graph_space(["a b", "# comment", "", "b c  # trailing"])
    assert sp.points == ("a", "b", "c")
    assert (0, 1) in t and (1, 0) in t and (0, 2) not in t
    with pytest.raises(InputError):
        gallery.graph_space(["a b c"])


@pytest.mark.parametrize(
    "build",
    [
        lambda: gallery.cycle_space(9, 2),
        lambda: gallery.cayley_space(gallery.dihedral_group(4), 2),
        lambda: gallery.random_regular_graph(20, 4, 3),
        lambda: gallery.box_space([gallery.cyclic_group(4), gallery.cyclic_group(6)], 2),
    ],
)
def test_gallery_entourages_symmetric_with_diagonal(build):
    _, t = build()
    assert t.is_symmetric and t.contains_diagonal
