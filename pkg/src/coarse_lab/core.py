"""Finite ground sets and the relation algebra of entourages.

A relation ``T`` on a finite set ``X`` is a set of ordered pairs ``(x, y)``.
Balls follow the convention ``T[Y] = {x : (x, y) in T for some y in Y}``,
so ``T[x]`` collects the *first* coordinates of pairs whose second
coordinate is ``x``.  With this convention

    (T1 o T2)[x] == T1[T2[x]]

and a ``T2``-bounded set ``Y`` has a ``(T1 o T2)``-bounded image ``T1[Y]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InputError, SpaceMismatchError, UnknownPointError

__all__ = [
    "Space",
    "Entourage",
    "DegreeBound",
    "compose",
    "inverse",
    "power",
    "union",
    "intersection",
    "symmetrize",
    "ball",
    "degree",
    "bounded_witness",
    "diagonal",
    "full_relation",
    "empty_relation",
]


class Space:
    """An ordered set of opaque string labels with dense integer ids."""

    def __init__(self, points: Iterable):
        points = tuple(str(p) for p in points)
        index = {}
        for i, p in enumerate(points):
            if p in index:
                raise InputError(f"duplicate point label {p!r}")
            index[p] = i
        self.points = points
        self.index = index

    @classmethod
    def range(cls, n: int) -> "Space":
        return cls(str(i) for i in range(n))

    def __len__(self):
        return len(self.points)

    @property
    def n(self) -> int:
        return len(self.points)

    def __eq__(self, other):
        if self is other:
            return True
        return isinstance(other, Space) and self.points == other.points

    def __hash__(self):
        return hash(self.points)

    def __repr__(self):
        head = ", ".join(self.points[:5])
        tail = ", ..." if self.n > 5 else ""
        return f"Space(n={self.n}, points=[{head}{tail}])"

    def label(self, i: int) -> str:
        return self.points[i]

    def resolve(self, item) -> int:
        """Map a label or an integer id to an id, rejecting unknown points."""
        if isinstance(item, (int, np.integer)) and not isinstance(item, bool):
            i = int(item)
            if not 0 <= i < self.n:
                raise UnknownPointError(f"point id {i} out of range for {self.n} points")
            return i
        try:
            return self.index[str(item)]
        except KeyError:
            raise UnknownPointError(f"unknown point label {item!r}") from None

    def resolve_all(self, items: Iterable) -> list[int]:
        return [self.resolve(i) for i in items]


def _canonical_pairs(n: int, pairs) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(pairs, dtype=np.int64)
    if arr.size == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    arr = arr.reshape(-1, 2)
    if arr.min() < 0 or arr.max() >= n:
        raise UnknownPointError(f"pair id out of range for {n} points")
    codes = np.unique(arr[:, 0] * n + arr[:, 1])
    return codes // n, codes % n


class Entourage:
    """A finite relation on a :class:`Space`.

    Stored as sorted ``(rows, cols)`` id arrays; adjacency lists and the sparse
    boolean matrix are derived on first use.  Instances are immutable.
    """

    def __init__(self, space: Space, pairs=()):
        self.space = space
        rows, cols = _canonical_pairs(space.n, pairs)
        rows.setflags(write=False)
        cols.setflags(write=False)
        self.rows = rows
        self.cols = cols

    @classmethod
    def from_matrix(cls, space: Space, mask) -> "Entourage":
        if sp.issparse(mask):
            coo = sp.coo_matrix(mask)
            keep = coo.data != 0
            rows, cols = coo.row[keep], coo.col[keep]
        else:
            rows, cols = np.nonzero(np.asarray(mask))
        return cls(space, np.stack([rows, cols], axis=1))

    @classmethod
    def from_labels(cls, space: Space, pairs: Iterable[Sequence]) -> "Entourage":
        return cls(space, [(space.resolve(x), space.resolve(y)) for x, y in pairs])

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        """Boolean adjacency with ``matrix[x, y]`` set iff ``(x, y)`` is a pair."""
        n = self.space.n
        data = np.ones(len(self.rows), dtype=bool)
        return sp.csr_matrix((data, (self.rows, self.cols)), shape=(n, n))

    @cached_property
    def pairs(self) -> frozenset:
        return frozenset(zip(self.rows.tolist(), self.cols.tolist()))

    @cached_property
    def fwd(self) -> tuple[np.ndarray, ...]:
        """``fwd[x]`` is the ball ``T[x] = {z : (z, x) in T}``, sorted."""
        csc = self.matrix.tocsc()
        csc.sort_indices()
        return tuple(
            csc.indices[csc.indptr[x]:csc.indptr[x + 1]].astype(np.int64)
            for x in range(self.space.n)
        )

    @cached_property
    def bwd(self) -> tuple[np.ndarray, ...]:
        """``bwd[x]`` is ``T^{-1}[x] = {z : (x, z) in T}``, sorted."""
        csr = self.matrix
        csr.sort_indices()
        return tuple(
            csr.indices[csr.indptr[x]:csr.indptr[x + 1]].astype(np.int64)
            for x in range(self.space.n)
        )

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return zip(self.rows.tolist(), self.cols.tolist())

    def __contains__(self, pair):
        x, y = pair
        return (int(x), int(y)) in self.pairs

    def __eq__(self, other):
        if not isinstance(other, Entourage):
            return NotImplemented
        return (
            self.space == other.space
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
        )

    def __hash__(self):
        return hash((self.space, self.pairs))

    def __le__(self, other: "Entourage") -> bool:
        _check_same(self, other)
        return self.pairs <= other.pairs

    def __ge__(self, other: "Entourage") -> bool:
        return other <= self

    def __or__(self, other: "Entourage") -> "Entourage":
        return union(self, other)

    def __and__(self, other: "Entourage") -> "Entourage":
        return intersection(self, other)

    def __sub__(self, other: "Entourage") -> "Entourage":
        _check_same(self, other)
        return Entourage(self.space, sorted(self.pairs - other.pairs))

    def __repr__(self):
        return f"Entourage(n={self.space.n}, pairs={len(self)})"

    @property
    def is_symmetric(self) -> bool:
        return self == inverse(self)

    @property
    def contains_diagonal(self) -> bool:
        return all((i, i) in self.pairs for i in range(self.space.n))

    def label_pairs(self) -> list[list[str]]:
        pts = self.space.points
        return [[pts[x], pts[y]] for x, y in self]


@dataclass(frozen=True)
class DegreeBound:
    fwd_deg: int
    bwd_deg: int

    @property
    def max(self) -> int:
        """``max{sup #T[x], sup #T^{-1}[x]}``, the constant in the Schur test."""
        return max(self.fwd_deg, self.bwd_deg)


def _check_same(t1: Entourage, t2: Entourage):
    if t1.space != t2.space:
        raise SpaceMismatchError("entourages live on different spaces")


def diagonal(space: Space) -> Entourage:
    ids = np.arange(space.n)
    return Entourage(space, np.stack([ids, ids], axis=1))


def full_relation(space: Space) -> Entourage:
    ids = np.arange(space.n)
    xs, ys = np.meshgrid(ids, ids, indexing="ij")
    return Entourage(space, np.stack([xs.ravel(), ys.ravel()], axis=1))


def empty_relation(space: Space) -> Entourage:
    return Entourage(space, ())


def compose(t1: Entourage, t2: Entourage) -> Entourage:
    """``{(x, y) : (x, z) in t1 and (z, y) in t2 for some z}``."""
    _check_same(t1, t2)
    prod = t1.matrix.astype(np.int32) @ t2.matrix.astype(np.int32)
    return Entourage.from_matrix(t1.space, prod)


def inverse(t: Entourage) -> Entourage:
    return Entourage(t.space, np.stack([t.cols, t.rows], axis=1))


def power(t: Entourage, n: int) -> Entourage:
    """``n``-fold self-composition; the zeroth power is the diagonal."""
    if n < 0:
        raise ValueError("power must be nonnegative")
    result = diagonal(t.space)
    base = t
    # square-and-multiply; composition is associative
    while n:
        if n & 1:
            result = compose(result, base)
        n >>= 1
        if n:
            base = compose(base, base)
    return result


def union(*ts: Entourage) -> Entourage:
    if not ts:
        raise ValueError("union of no entourages")
    for t in ts[1:]:
        _check_same(ts[0], t)
    rows = np.concatenate([t.rows for t in ts])
    cols = np.concatenate([t.cols for t in ts])
    return Entourage(ts[0].space, np.stack([rows, cols], axis=1))


def intersection(*ts: Entourage) -> Entourage:
    if not ts:
        raise ValueError("intersection of no entourages")
    for t in ts[1:]:
        _check_same(ts[0], t)
    common = reduce(lambda a, b: a & b, (t.pairs for t in ts))
    return Entourage(ts[0].space, sorted(common))


def symmetrize(t: Entourage) -> Entourage:
    """``Delta | T | T^{-1}``."""
    return union(diagonal(t.space), t, inverse(t))


def ball(t: Entourage, points) -> frozenset:
    """``T[Y]`` for a point set ``Y`` given as labels or ids (a single point is allowed)."""
    space = t.space
    if isinstance(points, (str, int, np.integer)):
        points = [points]
    ids = space.resolve_all(points)
    fwd = t.fwd
    out = set()
    for y in ids:
        out.update(fwd[y].tolist())
    return frozenset(out)


def degree(t: Entourage) -> DegreeBound:
    n = t.space.n
    if len(t) == 0:
        return DegreeBound(0, 0)
    fwd = np.bincount(t.cols, minlength=n).max()
    bwd = np.bincount(t.rows, minlength=n).max()
    return DegreeBound(int(fwd), int(bwd))


def bounded_witness(points, t: Entourage) -> int | None:
    """Smallest id ``x`` with ``Y`` contained in ``T[x]``, or ``None``."""
    ids = set(t.space.resolve_all(points))
    if not ids:
        return 0 if t.space.n else None
    # x must satisfy (y, x) in T for every y in Y, i.e. x in T^{-1}[y]
    candidates = None
    for y in ids:
        row = set(t.bwd[y].tolist())
        candidates = row if candidates is None else candidates & row
        if not candidates:
            return None
    return min(candidates)
