"""Parameterization, realification, and the least-squares identifiers."""

import numpy as np
import pytest

from gridid.errors import ValidationError
from gridid.fullid import (StructureMap, build_gamma, estimate_full,
                           estimate_full_signed, matrix_from_svec, realify,
                           svec_of)
from gridid.ingest import MeasurementSet
from gridid.netmodel import AdmittanceMatrix

# lifting matrix for three buses, constrained diagonal, written out in full
GAMMA_3 = np.array([
    [-1, -1, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 0, 0],
    [-1, 0, -1],
    [0, 0, 1],
    [0, 1, 0],
    [0, 0, 1],
    [0, -1, -1],
], dtype=float)


def _random_zero_rowsum(rng, n):
    dense = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            dense[i, j] = dense[j, i] = complex(rng.normal(), rng.normal())
    np.fill_diagonal(dense, -dense.sum(axis=1))
    return dense


def _tree_lines(rng, n):
    return [(int(rng.integers(0, v)), v,
             complex(rng.uniform(0.5, 3), -rng.uniform(1, 5))) for v in range(1, n)]


def _exact_measurements(rng, dense, slots):
    n = dense.shape[0]
    v = rng.normal(size=(slots, n)) + 1j * rng.normal(size=(slots, n))
    labels = tuple(str(k) for k in range(n))
    return MeasurementSet(observed=labels, v=v, i=v @ dense.T)


# ---------------------------------------------------------------------------
# Structure map and lifting matrix
# ---------------------------------------------------------------------------

def test_gamma_three_bus_constrained():
    assert np.array_equal(build_gamma(StructureMap(3)), GAMMA_3)


def test_gamma_two_bus_constrained():
    assert np.array_equal(build_gamma(StructureMap(2)),
                          np.array([[-1.0], [1.0], [1.0], [-1.0]]))


def test_gamma_rank_five_bus():
    gamma = build_gamma(StructureMap(5))
    assert gamma.shape == (25, 10)
    assert np.linalg.matrix_rank(gamma) == 10


def test_gamma_reconstruction_identity():
    rng = np.random.default_rng(31)
    for n in (3, 5, 8):
        labels = tuple(str(k) for k in range(n))
        zero_rowsum = _random_zero_rowsum(rng, n)
        smap = StructureMap(n)
        theta = svec_of(AdmittanceMatrix.from_dense(zero_rowsum, labels), smap)
        assert np.allclose((build_gamma(smap) @ theta).reshape(n, n, order="F"),
                           zero_rowsum, atol=1e-12)
        rebuilt = matrix_from_svec(smap, theta, labels)
        assert np.allclose(rebuilt.to_dense(), zero_rowsum, atol=1e-12)

        free = StructureMap(n, diagonal="free")
        dense = zero_rowsum.copy()
        dense[np.diag_indices(n)] += rng.normal(size=n)  # arbitrary diagonal
        theta = svec_of(AdmittanceMatrix.from_dense(dense, labels), free)
        assert np.allclose((build_gamma(free) @ theta).reshape(n, n, order="F"),
                           dense, atol=1e-12)


def test_gamma_known_diagonal_rows_are_constants():
    smap = StructureMap(3, diagonal="free", known_diagonal={1: 5 - 1j})
    gamma = build_gamma(smap)
    assert gamma.shape == (9, 5)  # three pairs plus two free diagonals
    assert np.all(gamma[4] == 0)  # the pinned diagonal row takes no parameter
    rebuilt = matrix_from_svec(smap, np.zeros(5, dtype=complex), ("a", "b", "c"))
    assert rebuilt[1, 1] == 5 - 1j


def test_structure_map_validation():
    with pytest.raises(ValidationError):
        StructureMap(1)
    with pytest.raises(ValidationError):
        StructureMap(3, diagonal="weird")
    with pytest.raises(ValidationError):
        StructureMap(3, known_diagonal={4: 1 + 0j})
    assert StructureMap(4).size == 6
    assert StructureMap(4, diagonal="free").size == 10
    assert StructureMap(4, diagonal="free", known_diagonal={0: 1j}).size == 9


# ---------------------------------------------------------------------------
# Realification
# ---------------------------------------------------------------------------

def test_realify_identity_layout():
    out = realify(np.eye(2, dtype=complex))
    assert np.array_equal(out, np.eye(4))
    m = np.array([[1 + 2j]])
    assert np.array_equal(realify(m), np.array([[1.0, -2.0], [2.0, 1.0]]))


def test_realify_rank_doubles():
    rng = np.random.default_rng(32)
    for _ in range(50):
        rows, cols = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        rank = int(rng.integers(1, min(rows, cols) + 1))
        m = ((rng.normal(size=(rows, rank)) + 1j * rng.normal(size=(rows, rank)))
             @ (rng.normal(size=(rank, cols)) + 1j * rng.normal(size=(rank, cols))))
        sv = np.linalg.svd(realify(m), compute_uv=False)
        assert int(np.sum(sv > 1e-10 * sv[0])) == 2 * rank


def test_realify_nuclear_doubles():
    rng = np.random.default_rng(33)
    for _ in range(20):
        m = rng.normal(size=(5, 4)) + 1j * rng.normal(size=(5, 4))
        nuc = np.linalg.svd(m, compute_uv=False).sum()
        nuc_real = np.linalg.svd(realify(m), compute_uv=False).sum()
        assert abs(nuc_real - 2 * nuc) < 1e-9


# ---------------------------------------------------------------------------
# Unconstrained estimator
# ---------------------------------------------------------------------------

def test_two_bus_exact():
    rng = np.random.default_rng(34)
    y = AdmittanceMatrix.from_lines(("a", "b"), [(0, 1, 1 - 2j)])
    m = _exact_measurements(rng, y.to_dense(), slots=2)
    m = MeasurementSet(observed=("a", "b"), v=m.v, i=m.i)
    yhat, diag = estimate_full(m, StructureMap(2))
    assert np.abs(yhat.to_dense() - y.to_dense()).max() < 1e-10
    assert diag.residual < 1e-10
    assert diag.exact


def test_14bus_anchored_free_diagonal(meas14, y14):
    anchor = {6: y14[6, 6]}  # the only zero-injection bus
    smap = StructureMap(14, diagonal="free", known_diagonal=anchor)
    yhat, diag = estimate_full(meas14, smap)
    assert np.abs(yhat.to_dense() - y14.to_dense()).max() < 1e-6
    assert yhat[6, 6] == y14[6, 6]
    assert diag.rank_design == 2 * diag.columns


def test_14bus_unanchored_is_rank_deficient(meas14):
    # one bus injects nothing, so its voltage is a function of the others
    yhat, diag = estimate_full(meas14, StructureMap(14, diagonal="free"))
    assert diag.rank_v == 13
    assert not diag.exact


def test_single_slot_clears_exactness():
    rng = np.random.default_rng(35)
    y = AdmittanceMatrix.from_lines(("0", "1", "2"), _tree_lines(rng, 3))
    m = _exact_measurements(rng, y.to_dense(), slots=1)
    _, diag = estimate_full(m, StructureMap(3))
    assert not diag.exact


def test_exactness_sweep_random_networks():
    rng = np.random.default_rng(36)
    for _ in range(100):
        n = int(rng.integers(3, 13))
        lines = _tree_lines(rng, n)
        for _ in range(int(rng.integers(0, n))):
            a, b = sorted(rng.choice(n, size=2, replace=False))
            lines.append((int(a), int(b), complex(rng.uniform(0.5, 3), -rng.uniform(1, 5))))
        y = AdmittanceMatrix.from_lines(tuple(str(k) for k in range(n)), lines)
        m = _exact_measurements(rng, y.to_dense(), slots=n + int(rng.integers(0, 4)))
        yhat, diag = estimate_full(m, StructureMap(n))
        assert diag.exact
        assert np.abs(yhat.to_dense() - y.to_dense()).max() <= 1e-8 * y.max_abs()


def test_residual_is_first_order_optimal():
    rng = np.random.default_rng(37)
    n, slots = 4, 8
    y = AdmittanceMatrix.from_lines(tuple(str(k) for k in range(n)), _tree_lines(rng, n))
    m = _exact_measurements(rng, y.to_dense(), slots)
    noisy = MeasurementSet(observed=m.observed, v=m.v,
                           i=m.i + 1e-3 * (rng.normal(size=m.i.shape)
                                           + 1j * rng.normal(size=m.i.shape)))
    smap = StructureMap(n)
    yhat, diag = estimate_full(noisy, smap)
    theta = svec_of(yhat, smap)

    def residual(t):
        dense = matrix_from_svec(smap, t, m.observed).to_dense()
        return np.linalg.norm(noisy.v @ dense.T - noisy.i)

    base = residual(theta)
    assert abs(base - diag.residual) < 1e-9
    for c in range(smap.size):
        for step in (1e-4, -1e-4, 1e-4j, -1e-4j):
            bumped = theta.copy()
            bumped[c] += step
            assert residual(bumped) >= base - 1e-12


def test_estimator_needs_currents_or_powers():
    rng = np.random.default_rng(38)
    y = AdmittanceMatrix.from_lines(("0", "1"), [(0, 1, 2 - 1j)])
    m = _exact_measurements(rng, y.to_dense(), slots=3)
    powers = MeasurementSet(observed=m.observed, v=m.v, s=m.v * np.conj(m.i))
    yhat, _ = estimate_full(powers, StructureMap(2))
    assert np.abs(yhat.to_dense() - y.to_dense()).max() < 1e-9


# ---------------------------------------------------------------------------
# Sign-constrained estimator
# ---------------------------------------------------------------------------

def test_signed_matches_unconstrained_when_inactive():
    rng = np.random.default_rng(39)
    y = AdmittanceMatrix.from_lines(tuple(str(k) for k in range(5)), _tree_lines(rng, 5))
    m = _exact_measurements(rng, y.to_dense(), slots=7)
    plain, _ = estimate_full(m, StructureMap(5))
    signed, _ = estimate_full_signed(m, StructureMap(5))
    assert np.abs(plain.to_dense() - signed.to_dense()).max() < 1e-9


def test_signed_exact_on_passive_network():
    rng = np.random.default_rng(40)
    y = AdmittanceMatrix.from_lines(tuple(str(k) for k in range(6)), _tree_lines(rng, 6))
    m = _exact_measurements(rng, y.to_dense(), slots=8)
    yhat, diag = estimate_full_signed(m, StructureMap(6), constrain="both")
    assert np.abs(yhat.to_dense() - y.to_dense()).max() < 1e-8
    assert diag.residual < 1e-8


def test_signed_clips_negative_conductance():
    # data generated from a line with g < 0: the bound must activate exactly
    rng = np.random.default_rng(41)
    bad = AdmittanceMatrix.from_lines(("a", "b"), [(0, 1, -0.3 - 2.0j)])
    m = _exact_measurements(rng, bad.to_dense(), slots=3)
    m = MeasurementSet(observed=("a", "b"), v=m.v, i=m.i)
    smap = StructureMap(2)
    yhat, _ = estimate_full_signed(m, smap, constrain="conductance")
    line = -yhat[0, 1]
    assert line.real == 0.0

    # brute-force sweep over the feasible set: nothing beats the returned point
    def residual(g, b):
        dense = AdmittanceMatrix.from_lines(("a", "b"), [(0, 1, complex(g, b))]).to_dense()
        return np.linalg.norm(m.v @ dense.T - m.i)

    best = residual(line.real, line.imag)
    grid = [residual(g, b) for g in np.linspace(0, 1.0, 41)
            for b in np.linspace(-4.0, 0.0, 41)]
    assert best <= min(grid) + 1e-9
    # first-order check at the active bound: moving into the interior cannot help
    assert residual(1e-6, line.imag) >= best - 1e-12


def test_signed_rejects_unknown_constraint():
    rng = np.random.default_rng(42)
    y = AdmittanceMatrix.from_lines(("0", "1"), [(0, 1, 1 - 1j)])
    m = _exact_measurements(rng, y.to_dense(), slots=2)
    with pytest.raises(ValidationError):
        estimate_full_signed(m, StructureMap(2), constrain="nonsense")


def test_known_diagonal_agrees_on_full_rank_data():
    rng = np.random.default_rng(43)
    y = AdmittanceMatrix.from_lines(tuple(str(k) for k in range(5)),
                                    _tree_lines(rng, 5), shunts={2: 0.4 - 0.1j})
    m = _exact_measurements(rng, y.to_dense(), slots=7)
    free, _ = estimate_full(m, StructureMap(5, diagonal="free"))
    pinned, _ = estimate_full(m, StructureMap(5, diagonal="free",
                                              known_diagonal={2: y[2, 2]}))
    assert np.abs(free.to_dense() - pinned.to_dense()).max() < 1e-9
    assert pinned[2, 2] == y[2, 2]
