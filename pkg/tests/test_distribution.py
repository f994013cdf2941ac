import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphprior.distribution import (
    RegionMethodConfig,
    dir_region_update,
    ir_node_update_setting1,
    ir_node_update_setting2,
    ir_region_update,
    node_step,
    node_update_shared,
    region_objective,
    run_region_method,
    wvrn,
    wvrn_init,
    wvrn_step,
)
from graphprior.errors import ConfigError, InputError
from graphprior.graph import build_graph

import oracles

PAIR = build_graph([(0, 1, 1.0)])


def _regions_for_pair(a, b):
    return np.array([a, b], dtype=float)


# ------------------------------------------------------------------ WvRN


def test_wvrn_first_step_is_pure_vote():
    g = build_graph([(0, 1, 1.0), (1, 2, 3.0)])
    P0 = np.array([[0.9, 0.1], [0.5, 0.5], [0.2, 0.8]])
    state = wvrn_init(g, P0, variant="V1")
    assert state.beta == 1.0
    wvrn_step(g, state)
    q = np.array([[0.5, 0.5], [(0.9 + 3 * 0.2) / 4, (0.1 + 3 * 0.8) / 4], [0.5, 0.5]])
    assert np.array_equal(state.P, q)


def test_wvrn_two_node_clamped_limit():
    sol = wvrn(PAIR, np.array([[0.8, 0.2], [0.1, 0.9]]), clamp=[0], variant="base")
    assert sol.converged
    assert np.allclose(sol.values, [[1, 0], [1, 0]], atol=1e-6)


def test_wvrn_v2_full_dongle_returns_priors():
    rng = np.random.default_rng(0)
    edges = oracles.connected_random_edges(rng, 8)
    g = build_graph(edges, n=8)
    P0 = oracles.random_distributions(rng, 8, 3)
    assert np.array_equal(wvrn(g, P0, variant="V2", lam=np.ones(8)).values, P0)


def test_wvrn_base_starts_free_nodes_at_class_prior():
    g = build_graph([(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)])
    P0 = np.array([[0.9, 0.1], [0.4, 0.6], [0.5, 0.5], [0.6, 0.4]])
    state = wvrn_init(g, P0, clamp=[0, 1, 3], variant="base")
    assert np.allclose(state.P[2], [2 / 3, 1 / 3])
    assert np.array_equal(state.P[[0, 1, 3]], np.array([[1, 0], [0, 1], [1, 0.0]]))


def test_wvrn_isolated_nodes_keep_rows():
    g = build_graph([(0, 1, 1.0)], n=3)
    P0 = np.array([[0.9, 0.1], [0.3, 0.7], [0.2, 0.8]])
    sol = wvrn(g, P0, variant="V1")
    assert np.array_equal(sol.values[2], P0[2])
    assert sol.flagged.tolist() == [2]
    sol = wvrn(g, P0, variant="V2", lam=np.array([0.5, 0.5, 0.5]))
    assert np.array_equal(sol.values[2], P0[2])
    assert sol.flagged.tolist() == []


def test_wvrn_stops_on_beta_floor():
    g = build_graph([(0, 1, 1.0)])
    sol = wvrn(g, np.array([[1.0, 0], [0, 1.0]]), variant="V1", nu=0.5, tol=0.0, beta_floor=1e-3)
    assert sol.converged and sol.iterations == 10


def test_wvrn_config_errors():
    P0 = np.array([[0.5, 0.5], [0.5, 0.5]])
    with pytest.raises(ConfigError):
        wvrn(PAIR, P0, variant="V3")
    with pytest.raises(ConfigError):
        wvrn(PAIR, P0, variant="V1", nu=1.0)
    with pytest.raises(ConfigError):
        wvrn(PAIR, P0, variant="base")
    with pytest.raises(ConfigError):
        wvrn(PAIR, P0, variant="V2")
    with pytest.raises(InputError):
        wvrn(PAIR, np.array([[0.5, 0.6], [0.5, 0.5]]), variant="V1")


# --------------------------------------------------------- region steps


def test_ir_region_examples():
    P = np.array([[0.8, 0.2], [0.4, 0.6]])
    r = ir_region_update(P, PAIR)
    assert np.allclose(r, [[0.6, 0.4], [0.6, 0.4]])
    assert np.allclose(ir_region_update(np.array([[1.0, 0], [0, 1.0]]), PAIR), 0.5)
    same = np.array([[0.3, 0.7], [0.3, 0.7]])
    assert np.allclose(ir_region_update(same, PAIR), same)


def test_dir_region_examples():
    assert np.allclose(dir_region_update(np.array([[0.8, 0.2], [0.2, 0.8]]), PAIR), 0.5)
    assert np.allclose(dir_region_update(np.array([[1.0, 0], [0, 1.0]]), PAIR), 0.5)
    same = np.array([[0.3, 0.7], [0.3, 0.7]])
    assert np.allclose(dir_region_update(same, PAIR), same)


def test_dir_region_against_log_form():
    rng = np.random.default_rng(1)
    edges = oracles.connected_random_edges(rng, 7)
    g = build_graph(edges, n=7)
    P = oracles.random_distributions(rng, 7, 4)
    r = dir_region_update(P, g)
    for e, (i, j) in enumerate(zip(g.entry_rows, g.indices)):
        v = np.exp(0.5 * (np.log(P[i]) + np.log(P[j])))
        assert np.allclose(r[e], v / v.sum())


def test_region_rows_symmetric_across_directions():
    rng = np.random.default_rng(2)
    g = build_graph(oracles.connected_random_edges(rng, 6), n=6)
    P = oracles.random_distributions(rng, 6, 3)
    for update in (ir_region_update, dir_region_update):
        r = update(P, g)
        lookup = {(int(i), int(j)): r[e] for e, (i, j) in enumerate(zip(g.entry_rows, g.indices))}
        for (i, j), row in lookup.items():
            assert np.array_equal(row, lookup[(j, i)])


# ------------------------------------------------------------ node steps


def test_shared_node_step_examples():
    regions = _regions_for_pair([0.5, 0.5], [0.5, 0.5])
    P0 = np.array([[1.0, 0.0], [0.5, 0.5]])
    out = node_update_shared(PAIR, regions, P0, np.array([1.0, 0.0]), 1.0, P0)
    assert np.allclose(out[0], [0.75, 0.25])
    assert np.allclose(out[1], [0.5, 0.5])  # lambda = 0: plain neighborhood average


def test_shared_node_step_large_c_returns_prior():
    regions = _regions_for_pair([0.5, 0.5], [0.5, 0.5])
    P0 = np.array([[0.9, 0.1], [0.5, 0.5]])
    out = node_update_shared(PAIR, regions, P0, np.array([1.0, 0.0]), 1e6, P0)
    assert np.allclose(out[0], P0[0], atol=1e-6)


def test_ir_setting1_examples():
    g = build_graph([(0, 1, 1.0), (0, 2, 1.0)])
    prev = np.full((3, 2), 0.5)
    # entry order in row 0 is (0,1), (0,2)
    regions = np.array([[0.5, 0.5], [0.5, 0.5], [0.5, 0.5], [0.5, 0.5]])
    assert np.allclose(ir_node_update_setting1(PAIR, regions[:2], prev[:2])[0], [0.5, 0.5])
    regions = np.array([[0.8, 0.2], [0.2, 0.8], [0.8, 0.2], [0.2, 0.8]])
    assert np.allclose(ir_node_update_setting1(g, regions, prev)[0], [0.5, 0.5])
    g2 = build_graph([(0, 1, 2.0), (0, 2, 0.0)], n=3)
    g2b = build_graph([(0, 1, 2.0)], n=3)
    out = ir_node_update_setting1(g2b, np.array([[0.8, 0.2], [0.8, 0.2]]), prev)
    assert np.allclose(out[0], [0.8, 0.2])
    assert g2.nnz == g2b.nnz  # a zero-weight edge is not stored at all


def test_ir_setting2_zero_lambda_reduces_to_setting1():
    rng = np.random.default_rng(3)
    g = build_graph(oracles.connected_random_edges(rng, 6), n=6)
    regions = ir_region_update(oracles.random_distributions(rng, 6, 3), g)
    P0 = oracles.random_distributions(rng, 6, 3)
    prev = oracles.random_distributions(rng, 6, 3)
    a, ok = ir_node_update_setting2(g, regions, P0, np.zeros(6), 1.0, prev)
    assert ok
    assert np.array_equal(a, ir_node_update_setting1(g, regions, prev))


def test_ir_setting2_small_c_approaches_setting1():
    rng = np.random.default_rng(4)
    g = build_graph(oracles.connected_random_edges(rng, 6), n=6)
    regions = ir_region_update(oracles.random_distributions(rng, 6, 3), g)
    P0 = oracles.random_distributions(rng, 6, 3)
    prev = oracles.random_distributions(rng, 6, 3)
    a, _ = ir_node_update_setting2(g, regions, P0, np.ones(6), 1e-9, prev)
    assert np.allclose(a, ir_node_update_setting1(g, regions, prev), atol=1e-6)


@pytest.mark.parametrize("solver", ["newton", "exponentiated_gradient"])
def test_ir_setting2_matches_grid_search(solver):
    rng = np.random.default_rng(5)
    for _ in range(10):
        w = float(rng.uniform(0.5, 2))
        g = build_graph([(0, 1, w)])
        x0, xb = rng.uniform(0.05, 0.95, 2)
        P0 = np.array([[x0, 1 - x0], [0.5, 0.5]])
        regions = np.array([[xb, 1 - xb], [xb, 1 - xb]])
        mu = float(rng.uniform(0.2, 3))
        P, _ = ir_node_update_setting2(g, regions, P0, np.array([1.0, 0.0]), mu, P0.copy(), active=[0],
                                       solver=solver, max_inner=2000)
        want = oracles.ir2_grid_oracle(P0[0], regions[0], mu, w)
        assert np.max(np.abs(P[0] - want)) < 1e-4


def test_ir_setting2_solvers_agree_and_descend():
    rng = np.random.default_rng(6)
    g = build_graph(oracles.connected_random_edges(rng, 8), n=8)
    regions = ir_region_update(oracles.random_distributions(rng, 8, 3), g)
    P0 = oracles.random_distributions(rng, 8, 3)
    lam = rng.uniform(0.1, 1, 8)
    a, ok = ir_node_update_setting2(g, regions, P0, lam, 2.0, P0.copy())
    b, _ = ir_node_update_setting2(g, regions, P0, lam, 2.0, P0.copy(), solver="exponentiated_gradient",
                                   max_inner=5000, inner_tol=1e-12)
    assert ok
    assert np.allclose(a, b, atol=1e-6)


def test_ir_setting2_isolated_node_returns_prior():
    g = build_graph([(0, 1, 1.0)], n=3)
    P0 = np.array([[0.5, 0.5], [0.5, 0.5], [0.7, 0.3]])
    regions = ir_region_update(P0, g)
    out, _ = ir_node_update_setting2(g, regions, P0, np.ones(3), 1.0, P0)
    assert np.array_equal(out[2], P0[2])


def test_ir_unknown_inner_solver():
    with pytest.raises(ConfigError):
        RegionMethodConfig("IR", inner_solver="bfgs")


# ------------------------------------------------------------ full loop


@pytest.mark.parametrize("method", ["IR", "DIR", "LSR"])
def test_edgeless_setting2_returns_priors(method):
    g = build_graph([], n=4)
    P0 = oracles.random_distributions(np.random.default_rng(7), 4, 3)
    sol = run_region_method(g, RegionMethodConfig(method, setting=2, lam=np.full(4, 0.5)), P0)
    assert np.allclose(sol.values, P0, atol=1e-12)
    assert sol.converged


@pytest.mark.parametrize("method", ["IR", "DIR", "LSR"])
def test_setting1_clamped_rows_are_delta(method):
    rng = np.random.default_rng(8)
    g = build_graph(oracles.connected_random_edges(rng, 10), n=10)
    P0 = oracles.random_distributions(rng, 10, 3)
    S = np.zeros(10, dtype=bool)
    S[[0, 3, 6]] = True
    sol = run_region_method(g, RegionMethodConfig(method, setting=1), P0, S=S)
    delta = np.eye(3)[P0[S].argmax(axis=1)]
    assert sol.values[S].tobytes() == delta.tobytes()


def test_setting1_requires_clamp_set():
    g = build_graph([(0, 1, 1.0)])
    with pytest.raises(ConfigError):
        run_region_method(g, RegionMethodConfig("LSR", setting=1), np.full((2, 2), 0.5), S=[])
    with pytest.raises(ConfigError):
        run_region_method(g, RegionMethodConfig("LSR", setting=2), np.full((2, 2), 0.5))


def test_lsr_five_node_projected_gradient():
    rng = np.random.default_rng(9)
    edges = oracles.connected_random_edges(rng, 5)
    g = build_graph(edges, n=5)
    W = oracles.dense_weights(edges, 5)
    P0 = oracles.random_distributions(rng, 5, 3)
    lam = rng.uniform(0.2, 1, 5)
    sol = run_region_method(g, RegionMethodConfig("LSR", C=1.5, lam=lam, tol=1e-12, max_outer_iter=100000), P0)
    _, want = oracles.lsr_projected_gradient(W, P0, lam, 1.5)
    assert abs(oracles.lsr_objective(W, sol.values, P0, lam, 1.5) - want) < 1e-4


@pytest.mark.parametrize("method", ["IR", "DIR", "LSR"])
def test_half_step_objective_is_monotone(method):
    rng = np.random.default_rng(10)
    g = build_graph(oracles.connected_random_edges(rng, 9), n=9)
    P0 = oracles.random_distributions(rng, 9, 3)
    cfg = RegionMethodConfig(method, C=0.8, lam=rng.uniform(0.1, 1, 9), tol=1e-9, max_outer_iter=3000)
    sol = run_region_method(g, cfg, P0, trace=True)
    half = np.asarray(sol.half_steps)
    assert np.all(np.diff(half) <= 1e-9 * np.maximum(1, np.abs(half[:-1])))
    assert [row[0] for row in sol.trace] == list(range(1, sol.iterations + 1))


def test_region_objective_lsr_hand_value():
    P = np.array([[1.0, 0.0], [0.0, 1.0]])
    regions = ir_region_update(P, PAIR)
    val = region_objective(PAIR, "LSR", P, regions, P, np.ones(2), 1.0)
    # two endpoints each 0.5 away per coordinate, counted once per direction
    assert val == pytest.approx(2 * 0.5)


def test_node_step_rejects_unknown_method():
    with pytest.raises(ConfigError):
        node_step("XYZ", 2, PAIR, np.full((2, 2), 0.5), np.full((2, 2), 0.5), np.ones(2), 1.0, np.full((2, 2), 0.5))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["IR", "DIR", "LSR"]), st.floats(0.05, 20))
def test_region_methods_output_distributions(seed, method, C):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 10))
    g = build_graph(oracles.random_edges(rng, n, p=0.5), n=n)
    P0 = oracles.random_distributions(rng, n, 3, concentration=0.3)
    sol = run_region_method(g, RegionMethodConfig(method, C=C, lam=rng.random(n), max_outer_iter=50), P0)
    assert np.all(sol.values >= 0) and np.all(sol.values <= 1)
    assert np.allclose(sol.values.sum(axis=1), 1.0, atol=1e-9)
