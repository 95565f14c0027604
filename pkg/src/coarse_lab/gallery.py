"""Constructors for example coarse spaces and test families."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import shortest_path
import scipy.sparse as sp

from .core import Entourage, Space, diagonal, union
from .errors import InputError, NumericalError

__all__ = [
    "FiniteGroup",
    "MetricTable",
    "cyclic_group",
    "dihedral_group",
    "symmetric_group",
    "metric_space",
    "graph_metric",
    "cycle_space",
    "group_action_space",
    "left_translation_action",
    "cayley_space",
    "box_space",
    "free_group_ball_size",
    "reduced_words",
    "random_regular_graph",
    "graph_space",
    "adjacency_relation",
]


@dataclass(frozen=True)
class FiniteGroup:
    """A finite group given by its multiplication table.

    ``table[i][j]`` is the id of ``elements[i] * elements[j]``.  The group
    axioms are verified on construction.
    """

    elements: tuple
    table: np.ndarray
    generators: tuple = ()
    identity: int = field(init=False)
    inverses: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        elements = tuple(str(e) for e in self.elements)
        table = np.asarray(self.table, dtype=np.int64)
        n = len(elements)
        if len(set(elements)) != n:
            raise InputError("duplicate group element labels")
        if table.shape != (n, n):
            raise InputError(f"multiplication table must be {n}x{n}, got {table.shape}")
        if n == 0:
            raise InputError("a group has at least one element")
        if table.min() < 0 or table.max() >= n:
            raise InputError("multiplication table entry out of range")
        # associativity: (ij)k == i(jk) for all triples
        for i in range(n):
            bad = np.argwhere(table[table[i]] != table[i][table])
            if len(bad):
                j, k = bad[0]
                raise InputError(f"table is not associative at ({i}, {int(j)}, {int(k)})")
        ids = np.arange(n)
        unit = [e for e in range(n) if np.array_equal(table[e], ids) and np.array_equal(table[:, e], ids)]
        if not unit:
            raise InputError("table has no identity element")
        e = unit[0]
        inv = np.full(n, -1)
        for g in range(n):
            hits = np.nonzero(table[g] == e)[0]
            if len(hits) == 0 or table[hits[0], g] != e:
                raise InputError(f"element {elements[g]!r} has no inverse")
            inv[g] = hits[0]
        gens = tuple(int(g) for g in self.generators)
        if any(not 0 <= g < n for g in gens):
            raise InputError("generator id out of range")
        table.setflags(write=False)
        inv.setflags(write=False)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "identity", int(e))
        object.__setattr__(self, "inverses", inv)

    @property
    def order(self) -> int:
        return len(self.elements)

    def mul(self, g: int, h: int) -> int:
        return int(self.table[g, h])

    def product(self, word: Sequence[int]) -> int:
        out = self.identity
        for g in word:
            out = int(self.table[out, g])
        return out


def _group_from_perms(perms: list[tuple], gens: list[tuple], label) -> FiniteGroup:
    index = {p: i for i, p in enumerate(perms)}
    n = len(perms)
    table = np.empty((n, n), dtype=np.int64)
    for i, p in enumerate(perms):
        for j, q in enumerate(perms):
            # (p*q)(k) = p(q(k))
            table[i, j] = index[tuple(p[k] for k in q)]
    return FiniteGroup(tuple(label(p) for p in perms), table, tuple(index[g] for g in gens))


def cyclic_group(n: int) -> FiniteGroup:
    """``Z/n`` with generator 1."""
    ids = np.arange(n)
    table = (ids[:, None] + ids[None, :]) % n
    return FiniteGroup(tuple(str(i) for i in range(n)), table, (1 % n,))


def dihedral_group(n: int) -> FiniteGroup:
    """Symmetries of the regular ``n``-gon, generated by a rotation and a reflection.

    Elements ``r^i s^f`` are labelled ``"r{i}"`` and ``"r{i}s"``.
    """
    if n < 1:
        raise InputError("dihedral group needs n >= 1")
    elems = [(i, f) for f in (0, 1) for i in range(n)]
    index = {e: k for k, e in enumerate(elems)}

    def mul(a, b):
        i, f = a
        j, g = b
        # s r^j = r^{-j} s
        return ((i + (-j if f else j)) % n, f ^ g)

    table = [[index[mul(a, b)] for b in elems] for a in elems]
    labels = tuple(f"r{i}" + ("s" if f else "") for i, f in elems)
    return FiniteGroup(labels, table, (index[(1 % n, 0)], index[(0, 1)]))


def symmetric_group(k: int) -> FiniteGroup:
    """``S_k`` for ``k <= 5``, generated by the transposition (0 1) and the k-cycle."""
    if not 1 <= k <= 5:
        raise InputError("symmetric groups are built in only for 1 <= k <= 5")
    perms = list(itertools.permutations(range(k)))
    swap = tuple([1, 0] + list(range(2, k))) if k > 1 else (0,)
    cycle = tuple((i + 1) % k for i in range(k))
    return _group_from_perms(perms, [swap, cycle], lambda p: "".join(map(str, p)))


@dataclass(frozen=True)
class MetricTable:
    """A finite metric as a dense distance matrix, validated on construction."""

    dist: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InputError("distance matrix must be square")
        if not np.all(np.isfinite(d)):
            raise InputError("distances must be finite")
        if np.any(d < 0):
            raise InputError("distances must be nonnegative")
        if np.any(np.diag(d) != 0):
            raise InputError("distance matrix must have zero diagonal")
        if not np.array_equal(d, d.T):
            raise InputError("distance matrix must be symmetric")
        # d[x, z] <= d[x, y] + d[y, z]
        slack = 1e-12 * max(1.0, float(d.max(initial=0.0)))
        via = d.copy()
        for y in range(d.shape[0]):
            np.minimum(via, d[:, y, None] + d[None, y, :], out=via)
        if np.any(d > via + slack):
            x, z = np.argwhere(d > via + slack)[0]
            raise InputError(f"triangle inequality fails for pair ({int(x)}, {int(z)})")
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)
        if self.labels is not None:
            if len(self.labels) != d.shape[0]:
                raise InputError("label count does not match distance matrix")
            object.__setattr__(self, "labels", tuple(str(p) for p in self.labels))

    def space(self) -> Space:
        n = self.dist.shape[0]
        return Space(self.labels) if self.labels is not None else Space.range(n)


def metric_space(m: MetricTable, threshold: float, space: Space | None = None) -> tuple[Space, Entourage]:
    """Entourage ``{(x, y) : d(x, y) <= threshold}``."""
    if threshold < 0:
        raise InputError("threshold must be nonnegative")
    space = space or m.space()
    return space, Entourage.from_matrix(space, m.dist <= threshold)


def graph_metric(n: int, edges) -> MetricTable:
    """Shortest-path metric of a connected graph on ids ``0..n-1``."""
    edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    adj = sp.csr_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    d = shortest_path(adj, directed=False, unweighted=True)
    if not np.all(np.isfinite(d)):
        raise InputError("graph is disconnected; its path metric is not finite")
    return MetricTable(d)


def cycle_space(n: int, radius: int = 1) -> tuple[Space, Entourage]:
    """``Z/n`` with the cyclic distance ball of the given radius."""
    edges = [(i, (i + 1) % n) for i in range(n)]
    return metric_space(graph_metric(n, edges), radius)


def _check_action(group: FiniteGroup, n: int, act: np.ndarray):
    if act.shape != (group.order, n):
        raise InputError(f"action table must be {group.order}x{n}, got {act.shape}")
    if act.min(initial=0) < 0 or act.max(initial=0) >= max(n, 1):
        raise InputError("action table entry out of range")
    if not np.array_equal(act[group.identity], np.arange(n)):
        raise InputError("identity does not act trivially")
    # g.(h.x) == (gh).x
    for g in range(group.order):
        bad = np.argwhere(act[g][act] != act[group.table[g]])
        if len(bad):
            h, x = bad[0]
            raise InputError(f"not a group action: g={g}, h={int(h)}, x={int(x)}")


def left_translation_action(group: FiniteGroup) -> np.ndarray:
    """Action table of ``G`` on itself by left multiplication."""
    return np.asarray(group.table)


def group_action_space(group: FiniteGroup, space: Space, act, subset: Sequence[int]) -> Entourage:
    """Orbit relation ``T_K = {(k.x, x) : k in K, x in X}``."""
    act = np.asarray(act, dtype=np.int64)
    _check_action(group, space.n, act)
    ks = [int(k) for k in subset]
    if any(not 0 <= k < group.order for k in ks):
        raise InputError("subset element out of range")
    xs = np.arange(space.n)
    if not ks:
        return Entourage(space, ())
    pairs = np.concatenate([np.stack([act[k], xs], axis=1) for k in ks])
    return Entourage(space, pairs)


def _cayley_ball(group: FiniteGroup, radius: int) -> list[int]:
    steps = set(group.generators) | {int(group.inverses[g]) for g in group.generators}
    reached = {group.identity}
    frontier = {group.identity}
    for _ in range(radius):
        # h -> s h keeps the word read left to right as phi(s) phi(h)
        frontier = {group.mul(s, h) for h in frontier for s in steps} - reached
        if not frontier:
            break
        reached |= frontier
    return sorted(reached)


def cayley_space(group: FiniteGroup, radius: int = 1) -> tuple[Space, Entourage]:
    """The group with its left-translation coarse structure, word ball of given radius."""
    space = Space(group.elements)
    ball_ids = _cayley_ball(group, radius)
    return space, group_action_space(group, space, left_translation_action(group), ball_ids)


def free_group_ball_size(k: int, r: int) -> int:
    """Number of reduced words of length ``<= r`` in the free group of rank ``k``."""
    if k == 0:
        return 1
    return 1 + sum(2 * k * (2 * k - 1) ** (i - 1) for i in range(1, r + 1))


def reduced_words(k: int, r: int):
    """Yield the reduced words of length ``<= r`` over ``{+-1, ..., +-k}``."""
    letters = [s * i for i in range(1, k + 1) for s in (1, -1)]
    words = [()]
    yield ()
    for _ in range(r):
        nxt = []
        for w in words:
            for a in letters:
                if w and w[-1] == -a:
                    continue
                nxt.append(w + (a,))
        words = nxt
        yield from words


def box_space(seq: Sequence[FiniteGroup], radius: int) -> tuple[Space, Entourage]:
    """Disjoint union of finite quotients of ``F_k`` under the free-group action.

    Points are labelled ``"m:g"`` with ``m`` the position in ``seq``.  The
    entourage is ``{(phi_m(h) g, g) : |h| <= radius}`` on each component.
    """
    if not seq:
        raise InputError("box space needs at least one group")
    k = len(seq[0].generators)
    if any(len(g.generators) != k for g in seq):
        raise InputError("every group in a box space needs the same number of generators")
    if radius < 0:
        raise InputError("radius must be nonnegative")
    labels = [f"{m}:{e}" for m, g in enumerate(seq) for e in g.elements]
    space = Space(labels)
    pairs = []
    offset = 0
    for g in seq:
        # the image of the word ball under phi is the Cayley ball of the same radius
        image = _cayley_ball(g, radius)
        xs = np.arange(g.order)
        for h in image:
            pairs.append(np.stack([g.table[h] + offset, xs + offset], axis=1))
        offset += g.order
    return space, Entourage(space, np.concatenate(pairs))


def adjacency_relation(space: Space, edges) -> Entourage:
    edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    return Entourage(space, np.concatenate([edges, edges[:, ::-1]]))


def random_regular_graph(n: int, d: int, seed: int, max_attempts: int = 10_000) -> tuple[Space, Entourage]:
    """Simple ``d``-regular graph from the pairing model, returned as ``Delta | adjacency``."""
    if n < 1 or d < 0:
        raise InputError("need n >= 1 and d >= 0")
    if (n * d) % 2 or d >= n:
        raise InputError("need n*d even and d < n")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n), d)
    space = Space.range(n)
    for _ in range(max_attempts):
        perm = rng.permutation(stubs)
        u, v = perm[0::2], perm[1::2]
        if np.any(u == v):
            continue
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        if len(np.unique(lo * n + hi)) != len(lo):
            continue
        edges = np.stack([lo, hi], axis=1)
        return space, union(diagonal(space), adjacency_relation(space, edges))
    raise NumericalError(f"pairing model failed to produce a simple graph in {max_attempts} attempts")


def graph_space(lines) -> tuple[Space, Entourage]:
    """Parse an edge list (one ``"u v"`` per line) into ``Delta | adjacency``.

    Blank lines and ``#`` comments are skipped; labels keep first-seen order.
    """
    order: dict[str, int] = {}
    edges = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InputError(f"line {lineno}: expected 'u v', got {raw.rstrip()!r}")
        for p in parts:
            order.setdefault(p, len(order))
        edges.append((order[parts[0]], order[parts[1]]))
    space = Space(order)
    return space, union(diagonal(space), adjacency_relation(space, edges))
