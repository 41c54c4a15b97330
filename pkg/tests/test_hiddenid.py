"""Reduced-network estimation and hidden-voltage reconstruction."""

import numpy as np
import pytest

from gridid.errors import KronError
from gridid.hiddenid import estimate_reduced, hidden_voltages
from gridid.ingest import MeasurementSet
from gridid.netmodel import AdmittanceMatrix, NodePartition, kron_reduce
from gridid.simgen import (generate_scenarios, measure, solve_power_flow,
                           solve_scenarios)


def _tree(rng, n):
    lines = [(int(rng.integers(0, v)), v,
              complex(rng.uniform(0.5, 3), -rng.uniform(1, 5))) for v in range(1, n)]
    return AdmittanceMatrix.from_lines(tuple(str(k) for k in range(n)), lines)


def _reduced_measurements(rng, y, hidden, slots):
    """Steady states with zero injection at the hidden buses."""
    part = NodePartition.hiding(y.n, hidden)
    obs = list(part.observed)
    v1 = rng.normal(size=(slots, len(obs))) + 1j * rng.normal(size=(slots, len(obs)))
    v2 = hidden_voltages(y, part, v1)
    v_full = np.zeros((slots, y.n), dtype=complex)
    v_full[:, obs] = v1
    v_full[:, list(part.hidden)] = v2
    i_full = v_full @ y.to_dense().T
    assert np.abs(i_full[:, list(part.hidden)]).max() < 1e-9  # injections vanish
    labels = tuple(y.labels[k] for k in obs)
    return MeasurementSet(observed=labels, v=v1, i=i_full[:, obs]), part


def test_reduced_estimate_matches_block_reduction():
    rng = np.random.default_rng(51)
    for _ in range(10):
        n = int(rng.integers(5, 10))
        y = _tree(rng, n)
        k = int(rng.integers(1, max(2, n - 3)))
        hidden = set(int(h) for h in rng.choice(n, size=k, replace=False))
        try:
            ybar = kron_reduce(y, NodePartition.hiding(n, hidden))
        except KronError:
            continue
        m, part = _reduced_measurements(rng, y, hidden, slots=n + 2)
        est = estimate_reduced(m)  # shuntless truth: constrained mode holds
        assert np.abs(est.ybar.to_dense() - ybar.to_dense()).max() < 1e-8
        assert est.diagnostics.exact


def test_reduced_estimate_14bus_hidden_bus7(case14, y14):
    state = solve_power_flow(case14)
    # bus 7 injects nothing at the base point, so scenario scaling keeps it dark
    scenarios = generate_scenarios(case14, 15, 0.8, 1.2, seed=9)
    states = solve_scenarios(scenarios)
    observed = tuple(b for b in case14.bus_ids if b != "7")
    m = measure(states, observed)
    est = estimate_reduced(m, diagonal="free")
    truth = kron_reduce(y14, NodePartition.hiding(14, {6}))
    assert np.abs(est.ybar.to_dense() - truth.to_dense()).max() < 1e-6
    assert est.diagnostics.exact
    assert abs(state.s[6]) < 1e-8


def test_hidden_voltages_roundtrip():
    rng = np.random.default_rng(52)
    y = _tree(rng, 7)
    part = NodePartition.hiding(7, {2, 5})
    v1 = rng.normal(size=(4, 5)) + 1j * rng.normal(size=(4, 5))
    v2 = hidden_voltages(y, part, v1)
    assert v2.shape == (4, 2)
    dense = y.to_dense()
    full = np.zeros((4, 7), dtype=complex)
    full[:, list(part.observed)] = v1
    full[:, list(part.hidden)] = v2
    assert np.abs((full @ dense.T)[:, [2, 5]]).max() < 1e-10

    single = hidden_voltages(y, part, v1[0])
    assert single.shape == (2,)
    assert np.allclose(single, v2[0])


def test_hidden_voltages_errors():
    rng = np.random.default_rng(53)
    y = _tree(rng, 5)
    part = NodePartition.hiding(5, {1})
    with pytest.raises(KronError, match="columns"):
        hidden_voltages(y, part, np.ones((2, 3), dtype=complex))
    with pytest.raises(KronError, match="partition"):
        hidden_voltages(y, NodePartition.hiding(4, {1}), np.ones((2, 3), dtype=complex))

    # hidden block decoupled from the rest is singular
    split = AdmittanceMatrix.from_lines(("a", "b", "c", "d"),
                                        [(0, 1, 1 - 1j), (2, 3, 2 - 2j)])
    with pytest.raises(KronError, match="singular"):
        hidden_voltages(split, NodePartition.hiding(4, {2, 3}),
                        np.ones((1, 2), dtype=complex))


def test_hidden_voltages_empty_hidden_set():
    rng = np.random.default_rng(54)
    y = _tree(rng, 4)
    out = hidden_voltages(y, NodePartition(tuple(range(4)), ()),
                          np.ones((3, 4), dtype=complex))
    assert out.shape == (3, 0)
