"""Operator norm localization on finite truncations.

``beta_check`` answers the localization question for one operator and one
window exactly; ``amplify`` runs the ``(a a*)^n`` telescoping argument that
upgrades a weak localization constant; ``inverse_compression_norm`` bounds
``||(Phi_S restricted to E_T)^{-1}||`` from below; ``matrix_amplify_compress``
and ``kernel_from_ucp`` evaluate the constructions behind the matrix-level
and kernel-level characterisations.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._parallel import pmap
from .core import Entourage, bounded_witness, compose, degree, full_relation, inverse, power, symmetrize
from .errors import (
    DegenerateVectorError,
    InputError,
    NotPSDError,
    NumericalError,
    PreconditionError,
    SpaceMismatchError,
    WitnessViolation,
)
from .roe import BandedOperator, compress, dense_norm, operator_norm, schur_bound
from .witness import KernelMatrix, L2Profile

__all__ = [
    "BetaCertificate",
    "BetaFailure",
    "Localization",
    "InverseNormEstimate",
    "UCPKernel",
    "ForwardChainReport",
    "localize",
    "beta_check",
    "amplify",
    "inverse_compression_norm",
    "compression_ratio",
    "amplified_matrix",
    "amplified_compression_norm",
    "matrix_amplify_compress",
    "kernel_from_ucp",
    "forward_chain",
]

TIE_RTOL = 1e-12
PSD_TOL = 1e-9


@dataclass(frozen=True)
class BetaCertificate:
    """A unit vector supported in ``window[center]`` with ``||a eta|| >= ratio * ||a||``."""

    constant: float
    window: Entourage
    vector: np.ndarray
    center: int
    ratio: float
    localization: str = "column"


class BetaFailure(WitnessViolation):
    def __init__(self, best_ratio: float, center: int, c: float):
        self.best_ratio = best_ratio
        self.center = center
        super().__init__(
            f"best localization ratio {best_ratio:.6g} < c={c:.6g} (center {center})", where=center, value=best_ratio
        )


@dataclass(frozen=True)
class Localization:
    ratios: np.ndarray
    center: int
    vector: np.ndarray
    norm: float
    method: str

    @property
    def best_ratio(self) -> float:
        return float(self.ratios[self.center])


def _top_right_singular(m: np.ndarray) -> tuple[float, np.ndarray]:
    gram = m.conj().T @ m
    evals, evecs = np.linalg.eigh(gram)
    return float(np.sqrt(max(evals[-1], 0.0))), evecs[:, -1]


def localize(a: BandedOperator, window: Entourage, localization: str = "column") -> Localization:
    """Best ratio ``||a eta|| / ||a||`` over unit vectors supported in one ``window[x]``.

    ``localization="column"`` keeps all rows of ``a`` and restricts columns
    to ``window[x]``; the top right-singular vector then attains the exact
    optimum.  ``"block"`` uses the principal block on ``window[x]`` instead,
    whose norm is a certified lower bound for the same optimum.
    """
    if window.space != a.space:
        raise SpaceMismatchError("window and operator live on different spaces")
    if localization not in ("column", "block"):
        raise InputError(f"unknown localization {localization!r}")
    report = operator_norm(a)
    norm = report.value
    if norm == 0:
        raise InputError("operator is zero")
    dense = a.toarray()
    index = window.fwd

    def per_center(x):
        idx = index[x]
        if len(idx) == 0:
            return 0.0, np.zeros(0)
        sub = dense[:, idx] if localization == "column" else dense[np.ix_(idx, idx)]
        return _top_right_singular(sub)

    results = pmap(per_center, range(a.space.n))
    ratios = np.array([s for s, _ in results]) / norm
    top = ratios.max()
    center = int(np.nonzero(ratios >= top * (1 - TIE_RTOL))[0][0])
    vec = np.zeros(a.space.n, dtype=np.result_type(dense.dtype, float))
    vec[index[center]] = results[center][1]
    return Localization(ratios, center, vec, norm, report.method)


def beta_check(a: BandedOperator, window: Entourage, c: float, localization: str = "column") -> BetaCertificate:
    """Find a center whose window carries a unit vector with ``||a eta|| >= c ||a||``.

    Raises :class:`BetaFailure` carrying the best ratio when none exists.
    """
    if not 0 < c <= 1:
        raise InputError("c must lie in (0, 1]")
    if c == 1 and window != full_relation(window.space):
        raise InputError("c = 1 is only admissible for the full relation")
    loc = localize(a, window, localization)
    best = loc.best_ratio
    if best < c - TIE_RTOL:
        raise BetaFailure(best, loc.center, c)
    return BetaCertificate(c, window, loc.vector, loc.center, best, localization)


def amplify(
    a: BandedOperator,
    t: Entourage,
    window: Entourage,
    xi: np.ndarray,
    kappa: float,
    n: int,
) -> BetaCertificate:
    """Upgrade a localized vector ``xi`` to a certificate at constant ``kappa``.

    With ``||a|| = 1`` and ``kappa**n < ||(a a*)^n xi||``, the first ``j`` with
    ``||(a a*)^(j+1) xi|| > kappa ||(a a*)^j xi||`` gives
    ``eta = a* (a a*)^j xi / ||.||`` and ``||a eta|| > kappa``.  The support of
    ``eta`` lies in ``(T^(2n-1) o S)[x]`` with ``x`` a center of ``xi``; a
    non-symmetric ``T`` is first replaced by ``Delta | T | T^{-1}``.
    """
    space = a.space
    if t.space != space or window.space != space:
        raise SpaceMismatchError("operator and entourages live on different spaces")
    if not Entourage.from_matrix(space, a.entries) <= t:
        raise PreconditionError("operator is not supported in T")
    if not 0 < kappa < 1:
        raise InputError("kappa must lie in (0, 1)")
    if n < 1:
        raise InputError("n must be at least 1")
    norm = operator_norm(a).value
    if abs(norm - 1) > 1e-9:
        raise PreconditionError(f"operator must have norm 1, got {norm!r}")
    xi = np.asarray(xi)
    if xi.shape != (space.n,):
        raise InputError(f"xi must have length {space.n}")
    if abs(np.linalg.norm(xi) - 1) > 1e-12:
        raise PreconditionError("xi must be a unit vector")
    center = bounded_witness(np.nonzero(xi)[0].tolist(), window)
    if center is None:
        raise PreconditionError("support of xi is not bounded by the window")

    m = a.entries
    mh = m.conj().T.tocsr()
    vs, us = [xi], []
    for _ in range(n):
        u = mh @ vs[-1]
        us.append(u)
        vs.append(m @ u)
    norms = [float(np.linalg.norm(v)) for v in vs]
    if norms[-1] == 0:
        raise DegenerateVectorError("(a a*)^n xi vanishes: xi lies in the kernel of a power of a a*")
    if not kappa**n < norms[-1]:
        raise PreconditionError(f"kappa^n = {kappa**n:.6g} >= ||(a a*)^n xi|| = {norms[-1]:.6g}")
    for j in range(n):
        if norms[j + 1] > kappa * norms[j]:
            break
    else:
        raise NumericalError("telescoping product admits no step above kappa")
    u = us[j]
    unorm = float(np.linalg.norm(u))
    if unorm == 0:
        raise DegenerateVectorError(f"a* (a a*)^{j} xi vanishes")
    eta = u / unorm
    ratio = float(np.linalg.norm(m @ eta)) / norm
    if not ratio > kappa:
        raise NumericalError(f"certified ratio {ratio!r} does not exceed kappa={kappa!r}")

    # for symmetric T every odd power T^(2j+1), j < n, sits inside T^(2n-1)
    step = t if t.is_symmetric else symmetrize(t)
    grown = compose(power(step, 2 * n - 1), window)
    allowed = set(grown.fwd[center].tolist())
    if not set(np.nonzero(eta)[0].tolist()) <= allowed:
        raise NumericalError("amplified vector escapes the enlarged window")
    return BetaCertificate(kappa, grown, eta, center, ratio)


@dataclass(frozen=True)
class InverseNormEstimate:
    """``lower_bound = ||argmax|| / ||Phi_S(argmax)||``, a lower bound for the inverse norm."""

    band: Entourage
    window: Entourage
    lower_bound: float
    samples: int
    argmax_operator: BandedOperator | None = field(default=None, repr=False)


def compression_ratio(a: BandedOperator, window: Entourage) -> float:
    """``||a|| / ||Phi_S(a)||`` (``inf`` when the compression kills a nonzero ``a``)."""
    num = operator_norm(a).value
    den = compress(a, window).norm()
    if num == 0:
        return 0.0
    if den == 0:
        return np.inf
    return num / den


def _laplacian(t: Entourage) -> np.ndarray:
    n = t.space.n
    off = t.rows != t.cols
    adj = np.zeros((n, n))
    adj[t.rows[off], t.cols[off]] = 1.0
    lap = np.diag(adj.sum(axis=1)) - adj
    return np.where(t.matrix.toarray(), lap, 0.0)


def inverse_compression_norm(t: Entourage, window: Entourage, trials: int, seed: int, refine_steps: int = 100) -> InverseNormEstimate:
    """Lower bound for ``||(Phi_S restricted to E_T)^{-1}||`` from a seeded candidate family.

    Candidates: ``trials`` uniform and ``trials`` random-sign operators on
    ``T``, the adjacency and Laplacian of ``T``, then up to ``refine_steps``
    alternating projections of the best candidate (top rank-one part, then
    back onto ``E_T``).  The estimate is never claimed tight.
    """
    if trials < 1:
        raise InputError("trials must be at least 1")
    if t.space != window.space:
        raise SpaceMismatchError("band and window live on different spaces")
    rng = np.random.default_rng(seed)
    n = t.space.n
    mask = t.matrix.toarray()
    candidates = []
    for _ in range(trials):
        candidates.append(np.where(mask, rng.uniform(-1, 1, (n, n)), 0.0))
    for _ in range(trials):
        candidates.append(np.where(mask, rng.choice([-1.0, 1.0], (n, n)), 0.0))
    adj = np.where(mask, 1.0, 0.0)
    np.fill_diagonal(adj, 0.0)
    candidates.append(adj)
    candidates.append(_laplacian(t))
    candidates = [c for c in candidates if np.any(c)]
    if not candidates:
        return InverseNormEstimate(t, window, 1.0, 0, None)

    def score(c):
        return compression_ratio(BandedOperator(t, sp.csr_matrix(c)), window)

    ratios = pmap(score, candidates)
    samples = len(candidates)
    i = int(np.argmax(ratios))
    best, best_ratio = candidates[i], ratios[i]
    current = best
    for _ in range(refine_steps):
        if np.isinf(best_ratio):
            break
        u, s, vh = np.linalg.svd(current)
        nxt = np.where(mask, s[0] * np.outer(u[:, 0], vh[0]), 0.0)
        if not np.any(nxt):
            break
        nxt /= np.abs(nxt).max()
        samples += 1
        r = score(nxt)
        if r > best_ratio:
            best, best_ratio = nxt, r
        if np.allclose(nxt, current / np.abs(current).max(), rtol=0, atol=1e-13):
            break
        current = nxt
    if best_ratio < 1 and best_ratio > 1 - 1e-12:
        # Phi_S is contractive, so the true ratio is at least 1
        best_ratio = 1.0
    return InverseNormEstimate(t, window, float(best_ratio), samples, BandedOperator(t, sp.csr_matrix(best)))


def amplified_matrix(a_blocks) -> np.ndarray:
    """Dense matrix of ``a`` in ``E_T (x) M_n`` on ``l2(X) (x) C^n``, index ``(x, i) -> x n + i``."""
    nb = len(a_blocks)
    if nb == 0 or any(len(row) != nb for row in a_blocks):
        raise InputError("a_blocks must be a nonempty square array")
    dense = np.array([[blk.toarray() for blk in row] for row in a_blocks])
    _, _, size, _ = dense.shape
    return dense.transpose(2, 0, 3, 1).reshape(size * nb, size * nb)


def amplified_compression_norm(a_blocks, window: Entourage) -> float:
    """``||Phi_S^(n)(a)||``: the largest principal block on ``S[z] x {1..n}``."""
    nb = len(a_blocks)
    big = amplified_matrix(a_blocks)

    def block_norm(idx):
        rows = (idx[:, None] * nb + np.arange(nb)[None, :]).ravel()
        return dense_norm(big[np.ix_(rows, rows)])

    return float(max(pmap(block_norm, window.fwd), default=0.0))


def _isometry_columns(vecs: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vecs, axis=1)
    out = np.zeros_like(vecs, dtype=np.result_type(vecs.dtype, float))
    nz = norms > 0
    out[nz] = vecs[nz] / norms[nz, None]
    out[~nz, 0] = 1.0
    return out


def matrix_amplify_compress(a_blocks, xi: np.ndarray, eta: np.ndarray, window: Entourage | None = None) -> BandedOperator:
    """``W* a V`` for the isometries ``V delta_x = delta_x (x) xi_x / ||xi_x||`` (and ``W`` from ``eta``).

    Zero ``xi_x`` map ``delta_x`` to ``delta_x (x) e_1``.  The result lives on
    the common band of the blocks.  ``||W* a V|| <= ||a||`` is checked, and so
    is ``||Phi_S(W* a V)|| <= ||Phi_S^(n)(a)||`` when a window is given.
    """
    nb = len(a_blocks)
    if nb == 0 or any(len(row) != nb for row in a_blocks):
        raise InputError("a_blocks must be a nonempty square array")
    band = a_blocks[0][0].band
    if any(blk.band != band for row in a_blocks for blk in row):
        raise InputError("all blocks must share one band")
    size = band.space.n
    xi = np.asarray(xi)
    eta = np.asarray(eta)
    if xi.shape != (size, nb) or eta.shape != (size, nb):
        raise InputError(f"xi and eta must have shape ({size}, {nb})")
    v = _isometry_columns(xi)
    w = _isometry_columns(eta)
    blocks = np.array([[blk.toarray() for blk in row] for row in a_blocks])
    # (W* a V)[x, y] = conj(w_x) . A_{x,y} . v_y with A_{x,y}[i, j] = a_ij[x, y]
    out = np.einsum("xi,ijxy,yj->xy", np.conj(w), blocks, v)
    result = BandedOperator(band, sp.csr_matrix(out))

    big = amplified_matrix(a_blocks)
    slack = 1e-9
    if operator_norm(result).value > dense_norm(big) + slack:
        raise NumericalError("||W* a V|| exceeds ||a||")
    if window is not None:
        if compress(result, window).norm() > amplified_compression_norm(a_blocks, window) + slack:
            raise NumericalError("||Phi_S(W* a V)|| exceeds ||Phi_S^(n)(a)||")
    return result


@dataclass(frozen=True)
class UCPKernel:
    kernel: KernelMatrix
    min_eigenvalue: float
    defect: float


def kernel_from_ucp(t: Entourage, window: Entourage, profile: L2Profile) -> UCPKernel:
    """``k(x, y) = <Psi(Phi_S(e_{x,y})) delta_y, delta_x>`` for the Schur-multiplier ``Psi``.

    ``Phi_S(e_{x,y})`` has a single unit coefficient in every block at ``z``
    with ``x, y`` in ``S[z]``, so ``k(x, y)`` accumulates
    ``conj(eta_x(z)) eta_y(z)`` over those ``z``.  This equals
    ``<eta_y, eta_x>`` (the conjugate of the Gram kernel) once the window
    contains the profile's support.
    """
    space = window.space
    if t.space != space or profile.space != space:
        raise SpaceMismatchError("entourages and profile live on different spaces")
    pattern = Entourage.from_matrix(space, profile.vectors != 0)
    if not pattern <= window:
        raise InputError("profile support is not contained in the window")
    eta = profile.vectors
    k = np.zeros((space.n, space.n), dtype=np.result_type(eta.dtype, float))
    for z, idx in enumerate(window.fwd):
        if len(idx) == 0:
            continue
        e = eta[idx, z]
        k[np.ix_(idx, idx)] += np.outer(np.conj(e), e)
    herm = (k + k.conj().T) / 2
    min_eig = float(np.linalg.eigvalsh(herm)[0]) if k.size else 0.0
    if min_eig < -PSD_TOL:
        raise NotPSDError(min_eig, PSD_TOL)
    defect = float(np.abs(1 - k[t.rows, t.cols]).max(initial=0.0)) if len(t) else 0.0
    kernel = KernelMatrix(k, compose(window, inverse(window)))
    return UCPKernel(kernel, min_eig, defect)


@dataclass(frozen=True)
class ForwardChainReport:
    """Quantities along the property-A to localization chain for one operator."""

    delta: float
    displacement: float
    defect_bound: float
    compression_norm: float
    norm: float
    certificate: BetaCertificate


def forward_chain(b: BandedOperator, profile: L2Profile, t: Entourage, eps: float) -> ForwardChainReport:
    """From a profile with displacement below ``eps / deg(T)`` on ``T`` to a
    localization certificate for ``b`` in ``E_T`` at constant ``1 - 2 eps``.

    Along the way ``||Psi(Phi_S(b)) - b|| <= eps ||b||`` and hence
    ``||Phi_S(b)|| >= (1 - eps) ||b||``, with ``S`` the profile's support.
    """
    if not 0 < eps < 0.5:
        raise InputError("eps must lie in (0, 1/2)")
    if not Entourage.from_matrix(b.space, b.entries) <= t:
        raise PreconditionError("operator is not supported in T")
    deg = degree(t).max
    delta = eps / deg if deg else np.inf
    disp = profile.displacements(t)
    worst = float(disp.max(initial=0.0))
    if worst >= delta:
        raise PreconditionError(f"displacement {worst:.6g} >= delta={delta:.6g}")
    window = profile.support
    norm = operator_norm(b).value
    if len(t):
        eta = profile.vectors
        gram = np.einsum("ij,ij->i", eta[t.cols], np.conj(eta[t.rows]))
        defect_bound = deg * float(np.abs(1 - gram).max()) * b.max_abs
    else:
        defect_bound = 0.0
    comp = compress(b, window).norm()
    if comp < (1 - eps) * norm - 1e-9:
        raise NumericalError(f"||Phi_S(b)|| = {comp:.6g} < (1 - eps) ||b|| = {(1 - eps) * norm:.6g}")
    cert = beta_check(b, window, 1 - 2 * eps)
    return ForwardChainReport(float(delta), worst, defect_bound, comp, norm, cert)
