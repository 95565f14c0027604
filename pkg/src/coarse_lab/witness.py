"""Property-A witnesses and the conversions between them.

Four forms of the same data are supported:

* :class:`FolnerWitness` -- finite sets ``A_x`` of ``X x N`` with a small
  symmetric-difference-to-intersection ratio along an entourage;
* :class:`L1Profile` -- probability vectors ``xi_x``;
* :class:`L2Profile` -- unit vectors ``eta_x`` of ``l2(X)``;
* :class:`KernelMatrix` -- a positive definite kernel close to 1 along an entourage.

Each converter keeps supports controlled and the displacement bounds it
promises are checked by the corresponding ``verify_*`` function, never
assumed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import Entourage, Space, compose, diagonal, inverse, symmetrize, union
from .errors import (
    DegenerateVectorError,
    InputError,
    NotPSDError,
    NumericalError,
    PreconditionError,
    SpaceMismatchError,
    WitnessViolation,
)

__all__ = [
    "FolnerWitness",
    "L1Profile",
    "L2Profile",
    "KernelMatrix",
    "WitnessQuality",
    "KernelQuality",
    "KernelFactorization",
    "verify_folner",
    "folner_ratios",
    "folner_to_l2",
    "l2_to_kernel",
    "kernel_to_l2",
    "factor_kernel",
    "l2_to_folner",
    "verify_l2",
    "verify_kernel",
    "folner_from_balls",
    "psd_tolerance",
    "interval_witness",
]

UNIT_TOL = 1e-12
HERMITIAN_TOL = 1e-12
GRID_CAP = 10**9


def _nonzero_inside(matrix, support: Entourage) -> bool:
    rows, cols = np.nonzero(matrix)
    if len(rows) == 0:
        return True
    mask = support.matrix
    return bool(np.all(np.asarray(mask[rows, cols]).ravel()))


@dataclass(frozen=True)
class FolnerWitness:
    """The set ``A`` as per-point sections ``A_x(y) = {0, ..., counts[x, y] - 1}``.

    Index 0 plays the role of the diagonal marker, so ``variant="diagonal"``
    means ``counts[x, x] >= 1`` for every ``x``.
    """

    support: Entourage
    counts: sp.csr_matrix
    variant: str = "nonempty"

    def __post_init__(self):
        n = self.support.space.n
        counts = sp.csr_matrix(self.counts, dtype=np.int64)
        counts.eliminate_zeros()
        counts.sort_indices()
        if counts.shape != (n, n):
            raise InputError(f"counts must be {n}x{n}, got {counts.shape}")
        if counts.nnz and counts.data.min() < 0:
            raise InputError("section sizes must be nonnegative")
        if self.variant not in ("diagonal", "nonempty"):
            raise InputError(f"unknown variant {self.variant!r}")
        coo = counts.tocoo()
        if coo.nnz and not np.all(np.asarray(self.support.matrix[coo.row, coo.col]).ravel()):
            raise InputError("witness has sections outside its support entourage")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_counts(cls, support: Entourage, counts: dict, variant: str = "nonempty") -> "FolnerWitness":
        """Build from ``{x: {y: count}}`` with labels or ids as keys."""
        space = support.space
        rows, cols, vals = [], [], []
        for x, section in counts.items():
            for y, c in section.items():
                rows.append(space.resolve(x))
                cols.append(space.resolve(y))
                vals.append(int(c))
        mat = sp.csr_matrix((vals, (rows, cols)), shape=(space.n, space.n), dtype=np.int64)
        return cls(support, mat, variant)

    @property
    def space(self) -> Space:
        return self.support.space

    @property
    def sizes(self) -> np.ndarray:
        """``#A_x`` for every ``x``."""
        return np.asarray(self.counts.sum(axis=1)).ravel()

    @property
    def max_index(self) -> int:
        return int(self.counts.data.max()) if self.counts.nnz else 0

    def section(self, x: int) -> set:
        """``A_x`` materialised as a set of ``(y, n)`` pairs."""
        row = self.counts.getrow(x).tocoo()
        return {(int(y), k) for y, c in zip(row.col, row.data) for k in range(int(c))}


@dataclass(frozen=True)
class L1Profile:
    vectors: np.ndarray
    support: Entourage

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        n = self.support.space.n
        if v.shape != (n, n):
            raise InputError(f"profile must be {n}x{n}, got {v.shape}")
        if np.any(v < 0):
            raise InputError("l1 profile entries must be nonnegative")
        if not _nonzero_inside(v, self.support):
            raise InputError("profile has mass outside its support entourage")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)


@dataclass(frozen=True)
class L2Profile:
    """Row ``x`` of ``vectors`` is ``eta_x``; ``support`` holds ``{(x, z) : eta_x(z) != 0}``."""

    vectors: np.ndarray
    support: Entourage

    def __post_init__(self):
        v = np.asarray(self.vectors)
        if not np.iscomplexobj(v):
            v = v.astype(float)
        n = self.support.space.n
        if v.shape != (n, n):
            raise InputError(f"profile must be {n}x{n}, got {v.shape}")
        if not _nonzero_inside(v, self.support):
            raise InputError("profile has mass outside its support entourage")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @property
    def space(self) -> Space:
        return self.support.space

    @classmethod
    def from_vectors(cls, space: Space, vectors) -> "L2Profile":
        """Profile whose support is exactly the nonzero pattern of ``vectors``."""
        vectors = np.asarray(vectors)
        return cls(vectors, Entourage.from_matrix(space, vectors != 0))

    def displacements(self, t: Entourage) -> np.ndarray:
        """``||eta_x - eta_y||`` for every pair of ``t`` in sorted pair order."""
        if t.space != self.space:
            raise SpaceMismatchError("profile and entourage live on different spaces")
        if len(t) == 0:
            return np.zeros(0)
        return np.linalg.norm(self.vectors[t.rows] - self.vectors[t.cols], axis=1)


@dataclass(frozen=True)
class KernelMatrix:
    """``k[x, y]`` with ``{(x, y) : k(x, y) != 0}`` inside ``support``."""

    k: np.ndarray
    support: Entourage

    def __post_init__(self):
        k = np.asarray(self.k)
        if not np.iscomplexobj(k):
            k = k.astype(float)
        n = self.support.space.n
        if k.shape != (n, n):
            raise InputError(f"kernel must be {n}x{n}, got {k.shape}")
        if not _nonzero_inside(k, self.support):
            raise InputError("kernel is nonzero outside its support entourage")
        k.setflags(write=False)
        object.__setattr__(self, "k", k)

    @property
    def space(self) -> Space:
        return self.support.space


@dataclass(frozen=True)
class WitnessQuality:
    """The bound a witness achieves on the tested entourage.

    ``epsilon`` is the supremum of the relevant quantity over ``tested``
    (0 when ``tested`` is empty) and ``pair`` the first pair attaining it.
    """

    epsilon: float
    tested: Entourage
    pair: tuple | None = None

    @property
    def vacuous(self) -> bool:
        return len(self.tested) == 0


@dataclass(frozen=True)
class KernelQuality(WitnessQuality):
    min_eigenvalue: float = 0.0
    support_ok: bool = True


def _worst(values: np.ndarray, t: Entourage):
    if len(values) == 0:
        return 0.0, None
    i = int(np.argmax(values))
    return float(values[i]), (int(t.rows[i]), int(t.cols[i]))


def folner_ratios(w: FolnerWitness, t: Entourage) -> np.ndarray:
    """``#(A_x sym-diff A_y) / #(A_x cap A_y)`` for each pair of ``t``.

    Sections are initial segments, so the symmetric difference has size
    ``sum_y |c_x(y) - c_y(y)|`` and the intersection ``(#A_x + #A_y - sym) / 2``.
    """
    if t.space != w.space:
        raise SpaceMismatchError("witness and entourage live on different spaces")
    if len(t) == 0:
        return np.zeros(0)
    c = w.counts
    sym = np.asarray(abs(c[t.rows] - c[t.cols]).sum(axis=1)).ravel().astype(np.int64)
    sizes = w.sizes
    inter = (sizes[t.rows] + sizes[t.cols] - sym) // 2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(inter > 0, sym / np.maximum(inter, 1), np.where(sym > 0, np.inf, 0.0))
    return ratio


def verify_folner(w: FolnerWitness, t: Entourage, eps: float) -> WitnessQuality:
    """Check the Følner conditions at ``(t, eps)``; the ratio bound is strict."""
    if not eps > 0:
        raise InputError("eps must be positive")
    sizes = w.sizes
    if w.variant == "diagonal":
        diag = np.asarray(w.counts.diagonal()).ravel()
        missing = np.nonzero(diag < 1)[0]
        if len(missing):
            x = int(missing[0])
            raise WitnessViolation(f"diagonal marker missing from A_{w.space.label(x)}", where=x)
    empty = np.nonzero(sizes == 0)[0]
    if len(empty):
        x = int(empty[0])
        raise WitnessViolation(f"section A_{w.space.label(x)} is empty", where=x)
    worst, pair = _worst(folner_ratios(w, t), t)
    if len(t) and worst >= eps:
        raise WitnessViolation(f"ratio {worst:.6g} >= eps={eps:.6g} at pair {pair}", where=pair, value=worst)
    return WitnessQuality(worst, t, pair)


def folner_to_l2(w: FolnerWitness) -> tuple[L1Profile, L2Profile]:
    """``xi_x = zeta_x / ||zeta_x||_1`` with ``zeta_x(y) = #A_x(y)``, and ``eta_x = sqrt(xi_x)``."""
    sizes = w.sizes
    empty = np.nonzero(sizes == 0)[0]
    if len(empty):
        raise WitnessViolation(f"section A_{w.space.label(int(empty[0]))} is empty", where=int(empty[0]))
    zeta = w.counts.toarray().astype(float)
    xi = zeta / sizes[:, None]
    return L1Profile(xi, w.support), L2Profile(np.sqrt(xi), w.support)


def l2_to_kernel(p: L2Profile) -> KernelMatrix:
    """Gram kernel ``k(x, y) = <eta_x, eta_y>``, supported in ``S o S^{-1}``."""
    v = p.vectors
    k = v @ v.conj().T
    return KernelMatrix(k, compose(p.support, inverse(p.support)))


def psd_tolerance(k: np.ndarray) -> float:
    """Eigenvalues down to ``-1e-9 * n * max|k|`` count as zero."""
    scale = float(np.abs(k).max(initial=0.0))
    return 1e-9 * k.shape[0] * max(scale, np.finfo(float).tiny)


def _hermitian_defect(k: np.ndarray) -> float:
    return float(np.abs(k - k.conj().T).max(initial=0.0))


@dataclass(frozen=True)
class KernelFactorization:
    """Output of :func:`factor_kernel`.

    ``band`` is the truncation window ``S_m`` (``band_power`` = m) of the
    square root, ``residual`` is ``||a - b* b||`` and ``displacement_bound``
    the a-priori bound on ``||eta_x - eta_y||`` over the tested entourage
    (``None`` when no entourage was given or the bound is vacuous).
    """

    profile: L2Profile
    band: Entourage
    band_power: int
    residual: float
    displacement_bound: float | None = None


def displacement_bound(eps: float) -> float:
    """``(2 sqrt(eps) + 2 eps) / sqrt(1 - eps)``: normalising vectors whose
    Gram matrix is within ``eps`` of 1 along an entourage and on the diagonal."""
    if not 0 <= eps < 1:
        return math.inf
    return (2 * math.sqrt(eps) + 2 * eps) / math.sqrt(1 - eps)


def factor_kernel(k: KernelMatrix, eps: float, t: Entourage | None = None) -> KernelFactorization:
    a = np.asarray(k.k)
    if not eps > 0:
        raise InputError("eps must be positive")
    if _hermitian_defect(a) > HERMITIAN_TOL:
        raise InputError("kernel is not Hermitian")
    diag_defect = float(np.abs(1 - np.diag(a)).max(initial=0.0))
    if diag_defect >= eps:
        raise PreconditionError(f"kernel diagonal deviates from 1 by {diag_defect:.3e} >= eps")
    a = (a + a.conj().T) / 2
    evals, evecs = np.linalg.eigh(a)
    tol = psd_tolerance(a)
    if evals.size and evals[0] < -tol:
        raise NotPSDError(float(evals[0]), tol)
    root = (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.conj().T

    space = k.space
    base = symmetrize(k.support)
    band, m = base, 1
    while True:
        b = np.where(band.matrix.toarray(), root, 0)
        residual = float(np.linalg.norm(a - b.conj().T @ b, 2))
        if residual < eps:
            break
        grown = compose(band, base)
        if grown == band:
            raise NumericalError(f"truncated square root stalls at residual {residual:.3e} >= eps")
        band, m = grown, m + 1

    # zeta_x(z) = conj(b[z, x]) so that <zeta_x, zeta_y> = (b* b)[x, y]
    zeta = b.conj().T
    if not np.iscomplexobj(a):
        zeta = zeta.real
    norms = np.linalg.norm(zeta, axis=1)
    if np.any(norms == 0):
        x = int(np.nonzero(norms == 0)[0][0])
        raise DegenerateVectorError(f"zeta_{space.label(x)} vanishes; kernel is degenerate there")
    profile = L2Profile(zeta / norms[:, None], band)

    bound = None
    if t is not None:
        # entrywise |1 - (b* b)[x, y]| <= |1 - a[x, y]| + residual
        on_t = float(np.abs(1 - a[t.rows, t.cols]).max(initial=0.0))
        bound = displacement_bound(max(on_t, diag_defect) + residual)
    return KernelFactorization(profile, band, m, residual, bound)


def kernel_to_l2(k: KernelMatrix, eps: float) -> L2Profile:
    """Unit vectors whose Gram matrix is within ``eps`` (operator norm, before
    normalisation) of ``k``, via a band-truncated PSD square root."""
    return factor_kernel(k, eps).profile


def verify_l2(p: L2Profile, t: Entourage) -> WitnessQuality:
    """Supremum of ``||eta_x - eta_y||`` over ``t``."""
    norms = np.linalg.norm(p.vectors, axis=1)
    off = np.abs(norms - 1)
    if off.size and off.max() > UNIT_TOL:
        x = int(np.argmax(off))
        raise WitnessViolation(f"eta_{p.space.label(x)} has norm {norms[x]!r}", where=x, value=float(norms[x]))
    worst, pair = _worst(p.displacements(t), t)
    return WitnessQuality(worst, t, pair)


def verify_kernel(k: KernelMatrix, t: Entourage) -> KernelQuality:
    a = np.asarray(k.k)
    if _hermitian_defect(a) > HERMITIAN_TOL:
        raise InputError("kernel is not Hermitian")
    if t.space != k.space:
        raise SpaceMismatchError("kernel and entourage live on different spaces")
    min_eig = float(np.linalg.eigvalsh((a + a.conj().T) / 2)[0]) if a.size else 0.0
    defect = np.abs(1 - a[t.rows, t.cols]) if len(t) else np.zeros(0)
    worst, pair = _worst(defect, t)
    return KernelQuality(worst, t, pair, min_eigenvalue=min_eig, support_ok=_nonzero_inside(a, k.support))


def _grid_counts(xi: np.ndarray, m: int) -> np.ndarray:
    # the relative nudge keeps exact grid points such as 8 * (1/8) from flooring down
    counts = np.floor(m * xi * (1 + 1e-12)).astype(np.int64)
    diag = np.arange(xi.shape[0])
    counts[diag, diag] = np.maximum(counts[diag, diag], 1)
    return counts


def l2_to_folner(
    p: L2Profile,
    t: Entourage,
    eps: float,
    m: int | None = None,
    target_ratio: float | None = None,
) -> FolnerWitness:
    """Discretise ``xi_x = |eta_x|^2`` on the grid ``{n / m}`` and read off sections.

    The grid size is the first of ``1, 2, 4, ...`` (capped at ``1e9``) for which
    rounding moves every ``||xi_x||_1`` by less than ``eps / 4``, every
    ``||xi_x - xi_y||_1`` on ``t`` by less than ``eps / 2``, and the resulting
    witness passes :func:`verify_folner` at ``target_ratio`` (default
    ``2 eps / (1 - eps)``).  Pass ``m`` to use one fixed grid instead.
    """
    if not 0 < eps:
        raise InputError("eps must be positive")
    quality = verify_l2(p, t)
    if quality.epsilon >= eps:
        raise PreconditionError(
            f"profile displacement {quality.epsilon:.6g} >= eps={eps:.6g} at pair {quality.pair}"
        )
    if target_ratio is None:
        if eps >= 1:
            raise InputError("default target ratio 2 eps / (1 - eps) needs eps < 1")
        target_ratio = 2 * eps / (1 - eps)
    xi = np.abs(p.vectors) ** 2
    l1 = xi.sum(axis=1)
    diff = np.abs(xi[t.rows] - xi[t.cols]).sum(axis=1) if len(t) else np.zeros(0)
    support = union(p.support, diagonal(p.space))

    grid = [m] if m is not None else [2**j for j in range(int(math.log2(GRID_CAP)) + 1)]
    for size in grid:
        counts = _grid_counts(xi, size)
        rounded = counts / size
        if np.abs(rounded.sum(axis=1) - l1).max(initial=0.0) >= eps / 4:
            continue
        if len(t):
            rdiff = np.abs(rounded[t.rows] - rounded[t.cols]).sum(axis=1)
            if np.abs(rdiff - diff).max() >= eps / 2:
                continue
        w = FolnerWitness(support, sp.csr_matrix(counts), "nonempty")
        try:
            verify_folner(w, t, target_ratio)
        except WitnessViolation:
            continue
        return w

    zero_diag = np.nonzero(np.diag(xi) == 0)[0]
    if len(zero_diag):
        x = int(zero_diag[0])
        raise PreconditionError(f"eta_{p.space.label(x)}({p.space.label(x)}) = 0 and no grid up to {grid[-1]} absorbs it")
    raise NumericalError(f"no grid size up to {grid[-1]} meets the rounding and ratio bounds")


def folner_from_balls(space: Space, gens: Entourage, t: Entourage, eps: float, r_max: int) -> FolnerWitness | None:
    """Try ``A_x = gens^r[x] x {0}`` for ``r = 1..r_max``; ``None`` if no radius works."""
    if gens.space != space or t.space != space:
        raise SpaceMismatchError("entourages must live on the given space")
    if not (gens.is_symmetric and gens.contains_diagonal):
        raise PreconditionError("generating entourage must be symmetric and contain the diagonal")
    ball = diagonal(space)
    for _ in range(r_max):
        ball = compose(ball, gens)
        # gens^r is symmetric, so the row pattern of its matrix gives the balls
        w = FolnerWitness(ball, ball.matrix.astype(np.int64), "diagonal")
        try:
            verify_folner(w, t, eps)
        except WitnessViolation:
            continue
        return w
    return None


def interval_witness(n: int, length: int) -> FolnerWitness:
    """On ``Z/n``: ``A_x = {(x + j, 0) : 0 <= j < length}``."""
    space = Space.range(n)
    pairs = [(x, (x + j) % n) for x in range(n) for j in range(length)]
    support = Entourage(space, pairs)
    return FolnerWitness(support, support.matrix.astype(np.int64), "diagonal")
