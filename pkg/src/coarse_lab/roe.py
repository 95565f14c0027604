"""Banded operators, operator norms, block compression and Schur reconstruction.

An operator ``b`` on ``l2(X)`` is stored through its matrix coefficients
``b[x, y] = <b delta_y, delta_x>`` and carries a *band* entourage outside of
which every coefficient vanishes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import Entourage, Space, compose, degree, diagonal, inverse, union
from .errors import ConvergenceError, InputError, NumericalError, PreconditionError, SpaceMismatchError
from ._parallel import pmap
from .witness import L2Profile

__all__ = [
    "BandedOperator",
    "BlockFamily",
    "NormReport",
    "DefectReport",
    "band_product",
    "band_adjoint",
    "operator_norm",
    "dense_norm",
    "schur_bound",
    "compress",
    "schur_reconstruct",
    "reconstruction",
    "reconstruction_defect",
    "nuclearity_defect",
    "adjacency_operator",
    "indicator_operator",
    "matrix_unit",
    "random_banded",
]

EXACT_LIMIT = 2000


@dataclass(frozen=True)
class BandedOperator:
    band: Entourage
    entries: sp.csr_matrix

    def __post_init__(self):
        n = self.band.space.n
        entries = sp.csr_matrix(self.entries)
        if not (np.iscomplexobj(entries.data) or np.issubdtype(entries.dtype, np.floating)):
            entries = entries.astype(float)
        entries.eliminate_zeros()
        entries.sort_indices()
        if entries.shape != (n, n):
            raise InputError(f"operator must be {n}x{n}, got {entries.shape}")
        coo = entries.tocoo()
        if coo.nnz and not np.all(np.asarray(self.band.matrix[coo.row, coo.col]).ravel()):
            raise InputError("operator has coefficients outside its band")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_dense(cls, band: Entourage, matrix) -> "BandedOperator":
        return cls(band, sp.csr_matrix(np.asarray(matrix)))

    @classmethod
    def project(cls, band: Entourage, matrix) -> "BandedOperator":
        """Zero every coefficient of ``matrix`` outside ``band``."""
        matrix = np.asarray(matrix)
        return cls(band, sp.csr_matrix(np.where(band.matrix.toarray(), matrix, 0)))

    @classmethod
    def identity(cls, space: Space) -> "BandedOperator":
        return cls(diagonal(space), sp.identity(space.n, format="csr", dtype=float))

    @property
    def space(self) -> Space:
        return self.band.space

    def toarray(self) -> np.ndarray:
        return self.entries.toarray()

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.entries.data).max(initial=0.0))

    @property
    def H(self) -> "BandedOperator":
        return band_adjoint(self)

    def __matmul__(self, other):
        if isinstance(other, BandedOperator):
            return band_product(self, other)
        return self.entries @ other

    def __add__(self, other: "BandedOperator") -> "BandedOperator":
        return BandedOperator(union(self.band, other.band), self.entries + other.entries)

    def __sub__(self, other: "BandedOperator") -> "BandedOperator":
        return BandedOperator(union(self.band, other.band), self.entries - other.entries)

    def __mul__(self, scalar) -> "BandedOperator":
        return BandedOperator(self.band, self.entries * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "BandedOperator":
        return BandedOperator(self.band, self.entries / scalar)


@dataclass(frozen=True)
class BlockFamily:
    """``Phi_S(b)``: for every ``z`` the principal block of ``b`` on ``S[z]``."""

    window: Entourage
    index: tuple
    blocks: tuple

    def norms(self) -> np.ndarray:
        return np.array(pmap(dense_norm, self.blocks), dtype=float)

    def norm(self) -> float:
        """``max_z ||block_z||``, the norm in the product algebra."""
        return float(self.norms().max(initial=0.0))


@dataclass(frozen=True)
class NormReport:
    value: float
    method: str
    iterations: int
    residual: float


@dataclass(frozen=True)
class DefectReport:
    """``value = ||Psi(Phi_S(b)) - b||`` with its Schur-test ``bound`` and the ``delta`` used."""

    value: float
    bound: float
    delta: float
    eps: float


def _check_same(b1: BandedOperator, b2: BandedOperator):
    if b1.space != b2.space:
        raise SpaceMismatchError("operators act on different spaces")


def band_product(b1: BandedOperator, b2: BandedOperator) -> BandedOperator:
    _check_same(b1, b2)
    return BandedOperator(compose(b1.band, b2.band), b1.entries @ b2.entries)


def band_adjoint(b: BandedOperator) -> BandedOperator:
    return BandedOperator(inverse(b.band), b.entries.conj().T.tocsr())


def dense_norm(matrix: np.ndarray) -> float:
    """Spectral norm from the top eigenvalue of ``M* M``."""
    matrix = np.asarray(matrix)
    if matrix.size == 0:
        return 0.0
    gram = matrix.conj().T @ matrix
    # same LAPACK driver as _exact_norm, so a block equal to the whole
    # matrix reproduces its norm bit for bit
    top = np.linalg.eigh(gram)[0][-1]
    return float(np.sqrt(max(top, 0.0)))


def _exact_norm(b: BandedOperator) -> NormReport:
    m = b.toarray()
    gram = m.conj().T @ m
    evals, evecs = np.linalg.eigh(gram)
    lam, v = max(evals[-1], 0.0), evecs[:, -1]
    residual = float(np.linalg.norm(gram @ v - lam * v))
    return NormReport(float(np.sqrt(lam)), "exact_eig", 0, residual)


def _power_norm(b: BandedOperator, tol: float, max_iter: int) -> NormReport:
    a = b.entries
    ah = a.conj().T.tocsr()
    n = b.space.n
    v = np.ones(n) / np.sqrt(n)
    lam, residual = 0.0, np.inf
    for it in range(1, max_iter + 1):
        w = ah @ (a @ v)
        lam = float(np.real(np.vdot(v, w)))
        residual = float(np.linalg.norm(w - lam * v))
        if lam <= 0:
            # the all-ones start is orthogonal to the range of b* b
            return NormReport(0.0, "power_iter", it, residual)
        if residual <= tol * lam:
            return NormReport(float(np.sqrt(lam)), "power_iter", it, residual)
        v = w / np.linalg.norm(w)
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations", residual)


def operator_norm(b: BandedOperator, method: str | None = None, tol: float = 1e-10, max_iter: int = 100_000) -> NormReport:
    """Spectral norm: dense Hermitian eigensolve up to 2000 points, power iteration beyond.

    Power iteration runs on ``b* b`` from the normalised all-ones vector and
    stops once ``||b* b v - lambda v|| <= tol * lambda``.
    """
    if method is None:
        method = "exact_eig" if b.space.n <= EXACT_LIMIT else "power_iter"
    if b.entries.nnz == 0:
        return NormReport(0.0, method, 0, 0.0)
    if method == "exact_eig":
        return _exact_norm(b)
    if method == "power_iter":
        return _power_norm(b, tol, max_iter)
    raise InputError(f"unknown norm method {method!r}")


def schur_bound(b: BandedOperator) -> float:
    """``max{sup #T[x], sup #T^{-1}[x]} * sup |b[x, y]|`` for the band ``T`` of ``b``."""
    return degree(b.band).max * b.max_abs


def compress(b: BandedOperator, window: Entourage) -> BlockFamily:
    if window.space != b.space:
        raise SpaceMismatchError("window and operator live on different spaces")
    dense = b.toarray()
    index = window.fwd
    blocks = tuple(dense[np.ix_(idx, idx)] for idx in index)
    return BlockFamily(window, index, blocks)


def _pattern(profile: L2Profile) -> Entourage:
    return Entourage.from_matrix(profile.space, profile.vectors != 0)


def schur_reconstruct(c: BlockFamily, profile: L2Profile) -> BandedOperator:
    """``Psi(c)[x, y] = sum_z conj(eta_x(z)) c^(z)[x, y] eta_y(z)``.

    The window must contain every pair ``(x, z)`` with ``eta_x(z) != 0``;
    then ``x`` belongs to the block at ``z`` whenever ``eta_x(z)`` can
    contribute, and ``Psi(Phi_S(b))[x, y] = <eta_y, eta_x> b[x, y]``.
    """
    window = c.window
    if profile.space != window.space:
        raise SpaceMismatchError("profile and block family live on different spaces")
    if not _pattern(profile) <= window:
        raise InputError("profile support is not contained in the block window")
    eta = profile.vectors
    n = window.space.n
    dtype = np.result_type(eta.dtype, *(blk.dtype for blk in c.blocks), float)
    out = np.zeros((n, n), dtype=dtype)
    for z, (idx, blk) in enumerate(zip(c.index, c.blocks)):
        if len(idx) == 0:
            continue
        e = eta[idx, z]
        out[np.ix_(idx, idx)] += np.conj(e)[:, None] * blk * e[None, :]
    return BandedOperator(compose(window, inverse(window)), sp.csr_matrix(out))


def reconstruction(b: BandedOperator, profile: L2Profile) -> BandedOperator:
    """``Psi(Phi_S(b))`` with the window ``S`` taken as the profile's support."""
    return schur_reconstruct(compress(b, profile.support), profile)


def reconstruction_defect(b: BandedOperator, profile: L2Profile) -> float:
    return operator_norm(reconstruction(b, profile) - b).value


def nuclearity_defect(b: BandedOperator, profile: L2Profile, t: Entourage, eps: float) -> DefectReport:
    """Compute ``||Psi(Phi_S(b)) - b||`` and check it against the Schur-test bound.

    Requires ``b`` supported in ``t`` and the profile displacement on ``t``
    below ``delta = eps / (||b|| * max{sup #T[x], sup #T^{-1}[x]})``.
    """
    if not eps > 0:
        raise InputError("eps must be positive")
    if not Entourage.from_matrix(b.space, b.entries) <= t:
        raise PreconditionError("operator is not supported in the tested entourage")
    deg = degree(t).max
    norm_b = operator_norm(b).value
    delta = eps / (norm_b * deg) if norm_b > 0 and deg > 0 else np.inf
    disp = profile.displacements(t)
    if len(disp) and disp.max() >= delta:
        i = int(np.argmax(disp))
        pair = (int(t.rows[i]), int(t.cols[i]))
        raise PreconditionError(f"displacement {disp[i]:.6g} >= delta={delta:.6g} at pair {pair}")

    value = reconstruction_defect(b, profile)
    eta = profile.vectors
    if len(t):
        # <eta_y, eta_x> = sum_z eta_y(z) conj(eta_x(z))
        gram = np.einsum("ij,ij->i", eta[t.cols], np.conj(eta[t.rows]))
        gram_defect = float(np.abs(1 - gram).max())
    else:
        gram_defect = 0.0
    bound = deg * gram_defect * b.max_abs
    if value > bound + 1e-9:
        raise NumericalError(f"defect {value:.6g} exceeds Schur-test bound {bound:.6g}")
    if bound >= eps:
        raise NumericalError(f"Schur-test bound {bound:.6g} is not below eps={eps:.6g}")
    return DefectReport(value, bound, float(delta), eps)


def adjacency_operator(t: Entourage) -> BandedOperator:
    """Coefficient 1 on every off-diagonal pair of ``t``; band ``t``."""
    off = t.rows != t.cols
    n = t.space.n
    mat = sp.csr_matrix((np.ones(int(off.sum())), (t.rows[off], t.cols[off])), shape=(n, n))
    return BandedOperator(t, mat)


def indicator_operator(t: Entourage) -> BandedOperator:
    """Coefficient 1 on every pair of ``t``."""
    return BandedOperator(t, t.matrix.astype(float))


def matrix_unit(space: Space, x: int, y: int) -> BandedOperator:
    """``e_{x,y}``: sends ``delta_y`` to ``delta_x``."""
    band = Entourage(space, [(x, y)])
    return BandedOperator(band, band.matrix.astype(float))


def random_banded(t: Entourage, rng: np.random.Generator, complex_entries: bool = False, density: float = 1.0) -> BandedOperator:
    """Uniform ``[-1, 1]`` coefficients on a random subset of ``t`` (each pair kept with ``density``)."""
    k = len(t)
    vals = rng.uniform(-1, 1, size=k)
    if complex_entries:
        vals = vals + 1j * rng.uniform(-1, 1, size=k)
    keep = rng.random(k) < density
    n = t.space.n
    mat = sp.csr_matrix((vals[keep], (t.rows[keep], t.cols[keep])), shape=(n, n))
    return BandedOperator(t, mat)

