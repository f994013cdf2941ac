import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphprior.errors import ConfigError, InputError
from graphprior.model_selection import (
    DEFAULT_RANGES,
    CVPlan,
    choose_from_curve,
    cv_select,
    make_doubling_grid,
    make_folds,
)
from graphprior.priors import hard_labels


def test_grid_dir_lsr_range():
    grid = make_doubling_grid(0.078, 10)
    assert len(grid) == 8
    assert grid[0] == 0.078 and grid[-1] == pytest.approx(9.984)


def test_grid_single_element():
    assert make_doubling_grid(1, 1.5) == [1.0]


def test_grid_lgc_range_count():
    grid = make_doubling_grid(0.00153, 100)
    # 0.00153 * 2**15 = 50.1 is the last value not above 100
    assert len(grid) == 16
    assert grid[-1] == pytest.approx(0.00153 * 2**15)
    assert grid[-1] * 2 > 100


def test_grid_ir_range_hits_upper_end():
    grid = make_doubling_grid(*DEFAULT_RANGES["IR"])
    assert grid[-1] == pytest.approx(256.0) and len(grid) == 13


@pytest.mark.parametrize("lo,hi", [(1, 1), (2, 1), (0, 1), (-1, 2)])
def test_grid_errors(lo, hi):
    with pytest.raises(ConfigError):
        make_doubling_grid(lo, hi)


def test_choose_examples():
    assert choose_from_curve([1, 2, 4, 8], [0.80, 0.90, 0.90, 0.85]) == 1
    assert choose_from_curve([1, 2, 4], [0.86, 0.90, 0.88], "smallest_within_pct", 5) == 0
    assert choose_from_curve([1, 2], [0.5, 0.5], "smallest_within_pct") == 0
    assert choose_from_curve([1, 2], [0.5, 0.5], "best") == 0


def test_choose_absolute_slack():
    # relative 5% of 0.5 is 0.025, absolute 5 points is 0.05
    curve = [0.46, 0.5]
    assert choose_from_curve([1, 2], curve, "smallest_within_pct", 5, relative=True) == 1
    assert choose_from_curve([1, 2], curve, "smallest_within_pct", 5, relative=False) == 0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=15))
def test_small_delta_converges_to_best(curve):
    grid = list(range(1, len(curve) + 1))
    best = choose_from_curve(grid, curve, "best")
    tiny = choose_from_curve(grid, curve, "smallest_within_pct", pct=1e-9)
    assert curve[tiny] >= curve[best] - 1e-9
    assert tiny <= best


@settings(max_examples=100, deadline=None)
@given(st.integers(5, 60), st.integers(2, 7), st.integers(0, 1000), st.integers(2, 4))
def test_folds_partition(m, k, seed, K):
    if m < k:
        return
    rng = np.random.default_rng(seed)
    nodes = np.sort(rng.choice(200, size=m, replace=False))
    labels = rng.integers(0, K, 200)
    folds = make_folds(nodes, labels, k, seed)
    joined = np.sort(np.concatenate(folds))
    assert np.array_equal(joined, nodes)
    sizes = [f.size for f in folds]
    assert max(sizes) - min(sizes) <= 1
    again = make_folds(nodes, labels, k, seed)
    assert all(np.array_equal(a, b) for a, b in zip(folds, again))


def test_folds_are_stratified():
    nodes = np.arange(50)
    labels = np.array([0] * 25 + [1] * 25)
    for f in make_folds(nodes, labels, 5, seed=3):
        counts = np.bincount(labels[f], minlength=2)
        assert abs(counts[0] - counts[1]) <= 1


def test_folds_too_few_nodes():
    with pytest.raises(InputError):
        make_folds([1, 2], np.zeros(3, int), 5)


def test_plan_validation():
    with pytest.raises(ConfigError):
        CVPlan(grid=[])
    with pytest.raises(ConfigError):
        CVPlan(grid=[2, 1])
    with pytest.raises(ConfigError):
        CVPlan(grid=[1], k=1)
    with pytest.raises(ConfigError):
        CVPlan(grid=[1], rule="median")
    with pytest.raises(ConfigError):
        CVPlan(grid=[1], pct=60)


def test_cv_select_zeroes_held_out_lambda():
    n = 20
    P0 = np.tile([0.8, 0.2], (n, 1))
    lam = np.full(n, 0.7)
    seen = []

    def runner(C, lam_fold):
        seen.append(lam_fold.copy())
        return hard_labels(np.zeros(n, int), 2)

    out = cv_select(runner, P0, lam, CVPlan(grid=[0.5, 1.0], k=4, eval_nodes=np.arange(12)))
    assert len(seen) == 8
    held = [np.flatnonzero(s == 0) for s in seen]
    assert sorted(np.concatenate(held[::2]).tolist()) == list(range(12))
    assert all(set(np.flatnonzero(s == 0.7)) | set(h) == set(range(n)) for s, h in zip(seen, held))
    assert out.C == 0.5 and out.fold_accuracy.shape == (2, 4)
    assert out.nu == pytest.approx(1 / 1.5)


def test_cv_select_default_eval_nodes_and_bool_mask():
    n = 10
    P0 = np.tile([0.3, 0.7], (n, 1))
    lam = np.zeros(n)
    lam[:6] = 1.0

    def runner(C, lam_fold):
        return hard_labels(np.ones(n, int) if C > 1 else np.zeros(n, int), 2)

    a = cv_select(runner, P0, lam, CVPlan(grid=[1.0, 2.0], k=3))
    b = cv_select(runner, P0, lam, CVPlan(grid=[1.0, 2.0], k=3, eval_nodes=lam > 0))
    assert a.C == b.C == 2.0
    assert np.array_equal(a.curve, [0.0, 1.0])
