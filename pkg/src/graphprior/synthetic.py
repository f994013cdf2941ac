"""Planted-partition (stochastic block) graphs for benchmarking."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .graph import SparseWeightedGraph


@dataclass(frozen=True)
class SyntheticBlockSpec:
    blocks: tuple  # node count per class
    p_within: float
    p_across: float
    weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(int(b) for b in self.blocks))
        if len(self.blocks) < 2:
            raise ConfigError("need at least two blocks")
        if any(b < 1 for b in self.blocks):
            raise ConfigError("block sizes must be positive")
        for name in ("p_within", "p_across"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if not self.weight > 0:
            raise ConfigError("edge weight must be positive")


def generate_block_graph(spec: SyntheticBlockSpec) -> tuple[SparseWeightedGraph, np.ndarray]:
    """Draw an undirected Bernoulli block graph; truth label = block id.

    One uniform is drawn per unordered node pair ``i < j`` in row-major
    order from ``default_rng(seed)``, so the result depends only on ``spec``.
    """
    truth = np.repeat(np.arange(len(spec.blocks)), spec.blocks)
    n = truth.size
    iu, ju = np.triu_indices(n, k=1)
    rng = np.random.default_rng(spec.seed)
    u = rng.random(iu.size)
    prob = np.where(truth[iu] == truth[ju], spec.p_within, spec.p_across)
    hit = u < prob
    rows, cols = iu[hit], ju[hit]
    w = np.full(rows.size, float(spec.weight))
    upper = sp.coo_matrix((w, (rows, cols)), shape=(n, n))
    return SparseWeightedGraph((upper + upper.T).tocsr()), truth
