"""Noisy k-fold cross-validation for the fit weight ``C``.

Held-out nodes stay in the graph; only their label degree is zeroed so they
behave as unlabeled during propagation. Scores are measured against the
derived (argmax) labels of the priors, never against ground truth.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, InputError
from .priors import accuracy, derived_labels

RULES = ("best", "smallest_within_pct")

# default search ranges, each a doubling grid between the two ends
DEFAULT_RANGES = {
    "LGC": (0.00153, 100.0),
    "WvRN-V2": (0.00153, 100.0),
    "IR": (0.0625, 312.5),
    "DIR": (0.078, 10.0),
    "LSR": (0.078, 10.0),
}


def make_doubling_grid(lo: float, hi: float) -> list[float]:
    """``[lo, 2 lo, 4 lo, ...]`` up to the last value not above ``hi``."""
    if not (lo > 0 and hi > 0):
        raise ConfigError("grid ends must be positive")
    if lo >= hi:
        raise ConfigError("grid needs lo < hi")
    grid = []
    c = float(lo)
    limit = hi * (1 + 1e-9)
    while c <= limit:
        grid.append(c)
        c *= 2.0
    return grid


@dataclass
class CVPlan:
    grid: Sequence[float]
    k: int = 5
    rule: str = "best"
    pct: float = 5.0
    relative: bool = True
    seed: int = 0
    eval_nodes: np.ndarray | None = None

    def __post_init__(self):
        self.grid = [float(c) for c in self.grid]
        if not self.grid:
            raise ConfigError("C grid is empty")
        if any(c <= 0 for c in self.grid) or any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigError("C grid must be positive and strictly ascending")
        if self.k < 2:
            raise ConfigError("need at least 2 folds")
        if self.rule not in RULES:
            raise ConfigError(f"unknown CV rule {self.rule!r}; expected one of {RULES}")
        if not 0 < self.pct <= 50:
            raise ConfigError("pct must lie in (0, 50]")


@dataclass
class CVOutcome:
    C: float
    index: int
    curve: np.ndarray  # mean accuracy per grid value
    fold_accuracy: np.ndarray  # (len(grid), k)
    grid: list = field(default_factory=list)

    @property
    def nu(self) -> float:
        """Annealing decay tied to ``C`` for the dongle WvRN variant."""
        return 1.0 / (1.0 + self.C)


def make_folds(eval_nodes, labels, k: int, seed: int = 0) -> list[np.ndarray]:
    """Split ``eval_nodes`` into ``k`` disjoint folds.

    Folds are stratified by label when every label present has at least
    ``k`` members; otherwise the split is a plain shuffle. Fold sizes differ
    by at most one either way.
    """
    nodes = np.asarray(eval_nodes, dtype=np.int64)
    if nodes.size < k:
        raise InputError(f"{nodes.size} evaluation nodes cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    lab = np.asarray(labels)[nodes]
    classes, counts = np.unique(lab, return_counts=True)
    if counts.min() >= k:
        # deal each shuffled class in turn, continuing the round-robin
        order = np.concatenate([rng.permutation(nodes[lab == c]) for c in classes])
    else:
        order = rng.permutation(nodes)
    assignment = np.arange(order.size) % k
    return [np.sort(order[assignment == f]) for f in range(k)]


def choose_from_curve(grid, curve, rule: str = "best", pct: float = 5.0, relative: bool = True) -> int:
    """Index of the chosen grid value for a mean-accuracy curve.

    ``best`` takes the maximum (smallest ``C`` among ties).
    ``smallest_within_pct`` takes the smallest ``C`` whose accuracy is at
    least ``(1 - pct/100) * best`` (or ``best - pct/100`` when not
    ``relative``).
    """
    curve = np.asarray(curve, dtype=float)
    if curve.size == 0 or curve.size != len(grid):
        raise ConfigError("curve and grid must be nonempty and aligned")
    best_idx = int(np.argmax(curve))
    if rule == "best":
        return best_idx
    if rule != "smallest_within_pct":
        raise ConfigError(f"unknown CV rule {rule!r}")
    best = curve[best_idx]
    floor = best * (1 - pct / 100.0) if relative else best - pct / 100.0
    return int(np.flatnonzero(curve >= floor - 1e-12)[0])


def cv_select(runner: Callable[[float, np.ndarray], np.ndarray], P0, lam, plan: CVPlan) -> CVOutcome:
    """Pick ``C`` by k-fold CV over ``plan.grid``.

    Parameters
    ----------
    runner : callable
        ``runner(C, lam_fold)`` returns an ``(n, K)`` score or distribution
        matrix computed with the given per-node label degrees.
    P0 : (n, K) array
        Priors; their argmax supplies the (noisy) CV targets.
    lam : (n,) array
        Label degrees; held-out nodes get ``0`` in each fold.
    plan : CVPlan
        ``plan.eval_nodes`` (default: nodes with ``lam > 0``) are split
        into the folds.
    """
    P0 = np.asarray(P0, dtype=float)
    lam = np.asarray(lam, dtype=float)
    targets = derived_labels(P0)
    eval_nodes = plan.eval_nodes
    if eval_nodes is None:
        eval_nodes = np.flatnonzero(lam > 0)
    eval_nodes = np.asarray(eval_nodes)
    if eval_nodes.dtype == bool:
        eval_nodes = np.flatnonzero(eval_nodes)
    folds = make_folds(eval_nodes, targets, plan.k, plan.seed)
    for f in folds:
        if f.size == 0:
            raise InputError("a CV fold has no evaluation nodes")

    acc = np.zeros((len(plan.grid), plan.k))
    for f, held in enumerate(folds):
        lam_f = lam.copy()
        lam_f[held] = 0.0
        for c_idx, C in enumerate(plan.grid):
            acc[c_idx, f] = accuracy(runner(C, lam_f), targets, held)
    curve = acc.mean(axis=1)
    idx = choose_from_curve(plan.grid, curve, plan.rule, plan.pct, plan.relative)
    return CVOutcome(C=plan.grid[idx], index=idx, curve=curve, fold_accuracy=acc, grid=list(plan.grid))
