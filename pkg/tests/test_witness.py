import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from coarse_lab.core import Entourage, Space, compose, diagonal, full_relation, inverse, power
from coarse_lab.errors import DegenerateVectorError, NotPSDError, PreconditionError, WitnessViolation
from coarse_lab.gallery import cycle_space, random_regular_graph
from coarse_lab.witness import (
    FolnerWitness,
    KernelMatrix,
    L2Profile,
    factor_kernel,
    folner_from_balls,
    folner_ratios,
    folner_to_l2,
    interval_witness,
    kernel_to_l2,
    l2_to_folner,
    l2_to_kernel,
    verify_folner,
    verify_kernel,
    verify_l2,
)


def cyc_dist(n):
    i = np.arange(n)
    d = np.abs(i[:, None] - i[None, :])
    return np.minimum(d, n - d)


def triangular(n=24, width=8):
    return np.maximum(0, (width - cyc_dist(n)) / width)


def brute_ratio(w, x, y):
    ax, ay = w.section(x), w.section(y)
    inter = len(ax & ay)
    sym = len(ax ^ ay)
    return sym / inter if inter else (math.inf if sym else 0.0)


def random_unit_profile(space, support, rng, complex_entries=False):
    mask = support.matrix.toarray()
    v = rng.random(mask.shape) + 0.05
    if complex_entries:
        v = v * np.exp(2j * np.pi * rng.random(mask.shape))
    v = np.where(mask, v, 0)
    v /= np.linalg.norm(v, axis=1)[:, None]
    return L2Profile(v, support)


def test_trivial_diagonal_witness():
    sp_ = Space.range(5)
    d = diagonal(sp_)
    w = FolnerWitness(d, sp.identity(5, format="csr", dtype=np.int64), "diagonal")
    q = verify_folner(w, d, 1e-6)
    assert q.epsilon == 0


def test_interval_witness_ratio():
    w = interval_witness(24, 8)
    _, t = cycle_space(24)
    q = verify_folner(w, t, 0.3)
    assert q.epsilon == pytest.approx(2 / 7, abs=0)
    with pytest.raises(WitnessViolation):
        verify_folner(w, t, 2 / 7)  # ties are violations
    short = interval_witness(24, 2)
    with pytest.raises(WitnessViolation) as exc:
        verify_folner(short, t, 0.5)
    assert exc.value.value == 2.0


def test_ratios_match_set_enumeration(rng):
    sp_, t = cycle_space(12, 2)
    full = full_relation(sp_)
    counts = rng.integers(0, 4, size=(12, 12))
    counts[np.arange(12), np.arange(12)] += 1
    w = FolnerWitness(full, sp.csr_matrix(counts))
    ratios = folner_ratios(w, t)
    for (x, y), r in zip(t, ratios):
        assert r == pytest.approx(brute_ratio(w, x, y), rel=1e-15)


def test_empty_section_and_missing_marker():
    sp_ = Space.range(3)
    full = full_relation(sp_)
    counts = np.array([[1, 0, 0], [0, 0, 0], [0, 0, 2]])
    with pytest.raises(WitnessViolation) as exc:
        verify_folner(FolnerWitness(full, sp.csr_matrix(counts)), diagonal(sp_), 1.0)
    assert exc.value.where == 1
    counts = np.array([[1, 0, 0], [1, 0, 0], [0, 0, 1]])
    with pytest.raises(WitnessViolation):
        verify_folner(FolnerWitness(full, sp.csr_matrix(counts), "diagonal"), diagonal(sp_), 1.0)


def test_folner_to_l2_examples():
    w = interval_witness(24, 8)
    l1, l2 = folner_to_l2(w)
    g = l2.vectors @ l2.vectors.T
    assert g[0, 1] == pytest.approx(7 / 8, abs=1e-15)
    assert np.linalg.norm(l2.vectors[0] - l2.vectors[1]) ** 2 == pytest.approx(1 / 4, abs=1e-15)
    sp_ = Space.range(2)
    w2 = FolnerWitness(full_relation(sp_), sp.csr_matrix([[2, 1], [0, 1]]))
    l1, l2 = folner_to_l2(w2)
    assert np.allclose(l1.vectors[0], [2 / 3, 1 / 3], atol=0)
    assert np.allclose(l2.vectors[0], [math.sqrt(2 / 3), math.sqrt(1 / 3)], atol=1e-16)
    d = FolnerWitness(diagonal(sp_), sp.identity(2, format="csr", dtype=np.int64))
    assert np.array_equal(folner_to_l2(d)[1].vectors, np.eye(2))


def test_gram_kernel_examples():
    _, p = folner_to_l2(interval_witness(24, 8))
    k = l2_to_kernel(p)
    assert np.allclose(k.k, triangular(), atol=1e-15)
    assert k.support == compose(p.support, inverse(p.support))
    assert np.array_equal(l2_to_kernel(L2Profile(np.eye(4), diagonal(Space.range(4)))).k, np.eye(4))


@given(st.integers(2, 12), st.integers(0, 2**32 - 1), st.booleans())
def test_gram_kernel_psd(n, seed, cplx):
    rng = np.random.default_rng(seed)
    sp_, t = cycle_space(max(n, 3), 1)
    p = random_unit_profile(sp_, t, rng, cplx)
    k = l2_to_kernel(p)
    assert np.linalg.eigvalsh(k.k)[0] >= -1e-12
    assert np.allclose(np.diag(k.k), 1, atol=1e-12)


def test_verify_l2_examples():
    sp_, t = cycle_space(24)
    _, p = folner_to_l2(interval_witness(24, 8))
    assert verify_l2(p, t).epsilon == pytest.approx(0.5, abs=1e-15)
    const = L2Profile(np.full((24, 24), 1 / math.sqrt(24)), full_relation(sp_))
    assert verify_l2(const, t).epsilon < 1e-15
    delta = L2Profile(np.eye(24), diagonal(sp_))
    assert verify_l2(delta, t).epsilon == pytest.approx(math.sqrt(2))
    bad = L2Profile(2 * np.eye(24), diagonal(sp_))
    with pytest.raises(WitnessViolation):
        verify_l2(bad, t)


def test_verify_kernel_examples():
    sp_, t = cycle_space(24)
    full = full_relation(sp_)
    q = verify_kernel(KernelMatrix(np.ones((24, 24)), full), t)
    assert abs(q.min_eigenvalue) < 1e-12 and q.epsilon == 0
    q = verify_kernel(KernelMatrix(np.eye(24), full), t)
    assert q.epsilon == 1
    q = verify_kernel(KernelMatrix(triangular(), full), t)
    assert q.epsilon == pytest.approx(1 / 8, abs=1e-15)
    assert q.support_ok


def test_kernel_to_l2_identity_and_triangular():
    sp_ = Space.range(5)
    fac = factor_kernel(KernelMatrix(np.eye(5), diagonal(sp_)), 0.1)
    assert fac.band_power == 1 and np.allclose(fac.profile.vectors, np.eye(5))
    full = full_relation(Space.range(24))
    k = KernelMatrix(triangular(), Entourage.from_matrix(full.space, triangular() != 0))
    for eps in (0.3, 0.1, 0.01):
        fac = factor_kernel(k, eps)
        b = fac.profile.vectors
        assert fac.residual < eps
        # Gram of the unnormalised square root sits within eps of k in operator norm
        assert np.abs(b @ b.T - k.k).max() < 2 * eps


def test_kernel_not_psd():
    a = np.full((3, 3), -1.0)
    np.fill_diagonal(a, 1.0)
    assert np.allclose(np.linalg.eigvalsh(a), [-1, 2, 2])
    with pytest.raises(NotPSDError):
        kernel_to_l2(KernelMatrix(a, full_relation(Space.range(3))), 0.5)


def test_kernel_diagonal_precondition():
    with pytest.raises(PreconditionError):
        kernel_to_l2(KernelMatrix(2 * np.eye(3), diagonal(Space.range(3))), 0.5)


def test_degenerate_kernel():
    # a zero row makes zeta_x vanish but keeps the kernel PSD
    k = np.eye(3)
    k[1, 1] = 0.0
    with pytest.raises(DegenerateVectorError):
        kernel_to_l2(KernelMatrix(k, diagonal(Space.range(3))), 1.5)


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.05, 0.2, 0.5]))
def test_kernel_round_trip_within_two_eps(seed, eps):
    rng = np.random.default_rng(seed)
    sp_, t = cycle_space(10, 2)
    p = random_unit_profile(sp_, t, rng)
    k = l2_to_kernel(p)
    out = kernel_to_l2(k, eps)
    g = out.vectors @ out.vectors.conj().T
    on_support = k.support.matrix.toarray()
    assert np.abs(g - k.k)[on_support].max() < 2 * eps


def test_factor_reports_displacement_bound():
    _, p = folner_to_l2(interval_witness(24, 8))
    _, t = cycle_space(24)
    k = l2_to_kernel(p)
    fac = factor_kernel(k, 0.2, t)
    measured = verify_l2(fac.profile, t).epsilon
    assert measured <= fac.displacement_bound


def test_l2_to_folner_exact_grid():
    w = interval_witness(24, 8)
    _, t = cycle_space(24)
    _, p = folner_to_l2(w)
    w2 = l2_to_folner(p, t, 0.6, m=8)
    assert np.array_equal(w2.counts.toarray(), w.counts.toarray())
    assert verify_folner(w2, t, 0.3).epsilon == pytest.approx(2 / 7)


def test_l2_to_folner_delta_field():
    sp_ = Space.range(6)
    p = L2Profile(np.eye(6), diagonal(sp_))
    w = l2_to_folner(p, diagonal(sp_), 0.1)
    assert verify_folner(w, diagonal(sp_), 0.1).epsilon == 0
    assert np.all(w.counts.diagonal() >= 1)


def test_l2_to_folner_precondition():
    sp_, t = cycle_space(24)
    _, p = folner_to_l2(interval_witness(24, 8))
    with pytest.raises(PreconditionError):
        l2_to_folner(p, t, 0.5)


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.3, 0.5, 0.8]))
def test_l2_to_folner_random_profiles(seed, eps):
    rng = np.random.default_rng(seed)
    n = 30
    sp_, t = cycle_space(n, 1)
    # smooth random profile: wide windows of random positive weights
    support = power(t, 6)
    base = rng.random(n) + 0.5
    dist = cyc_dist(n)
    v = np.where(support.matrix.toarray(), base[None, :] * np.maximum(0, 7 - dist), 0.0)
    v /= np.linalg.norm(v, axis=1)[:, None]
    p = L2Profile(v, support)
    d = verify_l2(p, t).epsilon
    if d >= eps:
        return
    w = l2_to_folner(p, t, eps)
    assert verify_folner(w, t, 2 * eps / (1 - eps)).epsilon < 2 * eps / (1 - eps)


@given(st.integers(0, 2**32 - 1))
def test_folner_ratio_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    n = 9
    sp_, t = cycle_space(n, 1)
    full = full_relation(sp_)
    counts = rng.integers(1, 4, size=(n, n))
    w = FolnerWitness(full, sp.csr_matrix(counts))
    perm = rng.permutation(n)
    inv = np.argsort(perm)
    pw = FolnerWitness(full, sp.csr_matrix(counts[np.ix_(inv, inv)]))
    pt = Entourage(sp_, [(perm[x], perm[y]) for x, y in t])
    assert verify_folner(w, t, 10.0).epsilon == pytest.approx(verify_folner(pw, pt, 10.0).epsilon, rel=1e-15)


@given(st.integers(0, 2**32 - 1))
def test_rational_grid_reproduces_counts(seed):
    rng = np.random.default_rng(seed)
    n = 6
    sp_ = Space.range(n)
    full = full_relation(sp_)
    counts = rng.integers(0, 5, size=(n, n))
    counts[np.arange(n), np.arange(n)] += 1
    w = FolnerWitness(full, sp.csr_matrix(counts))
    _, p = folner_to_l2(w)
    m = int(np.lcm.reduce(w.sizes))
    w2 = l2_to_folner(p, diagonal(sp_), 1.0, m=m, target_ratio=1.0)
    scale = m // w.sizes
    assert np.array_equal(w2.counts.toarray(), counts * scale[:, None])


def test_folner_from_balls_cycle():
    sp_, g = cycle_space(100)
    w = folner_from_balls(sp_, g, g, 0.3, 20)
    # ball of radius r has 2r + 1 points; a unit shift gives ratio 2 / (2r) = 1 / r
    brute = next(r for r in range(1, 21) if 1 / r < 0.3)
    assert brute == 4
    assert w.sizes[0] == 2 * brute + 1
    assert verify_folner(w, g, 0.3).epsilon == pytest.approx(1 / brute)


def test_folner_from_balls_trivial_and_expander():
    sp_, g = cycle_space(20)
    w = folner_from_balls(sp_, g, diagonal(sp_), 0.01, 3)
    assert w.sizes[0] == 3
    sp_, g = random_regular_graph(200, 3, 0)
    w = folner_from_balls(sp_, g, g, 0.1, 6)
    assert w is None or verify_folner(w, g, 0.1).epsilon < 0.1
    assert w is None


def test_vacuous_empty_entourage():
    w = interval_witness(10, 3)
    q = verify_folner(w, Entourage(w.space, []), 1e-3)
    assert q.vacuous and q.epsilon == 0
