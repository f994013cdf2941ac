import numpy as np
import pytest

from graphprior.errors import ConfigError
from graphprior.synthetic import SyntheticBlockSpec, generate_block_graph


def test_disjoint_cliques():
    g, truth = generate_block_graph(SyntheticBlockSpec([3, 3], 1.0, 0.0))
    W = g.to_dense()
    assert truth.tolist() == [0, 0, 0, 1, 1, 1]
    assert np.array_equal(W > 0, (truth[:, None] == truth[None, :]) & ~np.eye(6, dtype=bool))


def test_edgeless():
    g, _ = generate_block_graph(SyntheticBlockSpec([4, 2], 0.0, 0.0))
    assert g.nnz == 0 and g.n == 6


def test_expected_edge_count():
    g, _ = generate_block_graph(SyntheticBlockSpec([100, 100], 0.1, 0.005, seed=0))
    within = 2 * 100 * 99 / 2
    mean = within * 0.1 + 100 * 100 * 0.005
    var = within * 0.1 * 0.9 + 100 * 100 * 0.005 * 0.995
    assert mean == pytest.approx(1040)
    assert abs(g.num_edges - mean) <= 3 * np.sqrt(var)


def test_deterministic_and_weighted():
    spec = SyntheticBlockSpec([10, 10, 5], 0.5, 0.1, weight=2.5, seed=7)
    a, _ = generate_block_graph(spec)
    b, _ = generate_block_graph(spec)
    assert np.array_equal(a.to_dense(), b.to_dense())
    assert set(np.unique(a.data)) == {2.5}


@pytest.mark.parametrize(
    "kw",
    [dict(blocks=[5]), dict(p_within=1.5), dict(p_across=-0.1), dict(weight=0.0), dict(blocks=[3, 0])],
)
def test_invalid_specs(kw):
    base = dict(blocks=[3, 3], p_within=0.5, p_across=0.1)
    base.update(kw)
    with pytest.raises(ConfigError):
        SyntheticBlockSpec(**base)
