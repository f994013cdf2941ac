"""Class-distribution priors: noise model, confidence scores, subset selection.

Distribution matrices are plain ``(n, K)`` float arrays whose rows are
probability vectors. Argmax ties are always broken toward the lowest class
index (``np.argmax`` semantics).
"""
from __future__ import annotations

from dataclasses import dataclass
from math import floor

import numpy as np

from .errors import ConfigError, InputError

SCHEMES = ("MPS", "EBS")
SIMPLEX_TOL = 1e-9


def check_distribution(P, tol: float = SIMPLEX_TOL, name: str = "P") -> np.ndarray:
    """Validate a row-stochastic matrix and return it as a float array."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2:
        raise InputError(f"{name} must be a 2-D array")
    if P.shape[1] < 2:
        raise InputError(f"{name} needs at least two classes")
    if not np.all(np.isfinite(P)):
        raise InputError(f"{name} has non-finite entries")
    if P.size and (P.min() < -tol or P.max() > 1 + tol):
        raise InputError(f"{name} has entries outside [0, 1]")
    sums = P.sum(axis=1)
    if P.size and np.max(np.abs(sums - 1.0)) > tol:
        bad = int(np.argmax(np.abs(sums - 1.0)))
        raise InputError(f"row {bad} of {name} sums to {sums[bad]!r}, not 1")
    return P


def renormalize(P, tol: float = 1e-6) -> np.ndarray:
    """Validate rows at a loose tolerance, then clip and rescale them exactly."""
    P = check_distribution(P, tol=tol)
    P = np.clip(P, 0.0, 1.0)
    return P / P.sum(axis=1, keepdims=True)


def hard_labels(labels, K: int) -> np.ndarray:
    """One-hot label matrix ``Y`` with ``y_i = delta(k, c_i)``."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= K):
        raise InputError(f"labels must lie in 0..{K - 1}")
    Y = np.zeros((labels.size, K))
    Y[np.arange(labels.size), labels] = 1.0
    return Y


def derived_labels(P) -> np.ndarray:
    """``argmax_k p_ik`` with lowest-index tie-break."""
    return np.argmax(np.asarray(P), axis=1)


@dataclass(frozen=True)
class NoiseSpec:
    """Parameters of the inaccurate-classifier simulator.

    The true-class probability of each node is uniform on ``[p_min, p_max]``;
    the remaining mass is split over the other classes in proportion to
    independent uniform draws.
    """

    p_min: float
    p_max: float
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.p_min <= self.p_max <= 1.0):
            raise ConfigError("noise spec needs 0 <= p_min <= p_max <= 1")
        if self.p_min == self.p_max and self.p_max != 1.0:
            # degenerate range only makes sense for the noiseless corner case
            raise ConfigError("noise spec needs p_min < p_max (or p_min = p_max = 1)")


def generate_noisy_priors(true_labels, K: int, spec: NoiseSpec) -> np.ndarray:
    """Simulate an inaccurate external classifier.

    Random stream layout: a single Philox stream keyed by ``spec.seed``; node
    ``i`` owns the ``K`` consecutive uniforms at positions ``i*K .. i*K+K-1``.
    The first one sets the true-class probability, the other ``K-1`` are the
    off-class weights in increasing class order. A node's row therefore
    depends only on ``(seed, i, K, c_i)``, never on other nodes.
    """
    if K < 2:
        raise ConfigError("K must be at least 2")
    labels = np.asarray(true_labels, dtype=np.int64)
    if labels.ndim != 1:
        raise InputError("true_labels must be a vector")
    if labels.size and (labels.min() < 0 or labels.max() >= K):
        raise InputError(f"labels must lie in 0..{K - 1}")
    n = labels.size

    rng = np.random.Generator(np.random.Philox(key=int(spec.seed) & (2**64 - 1)))
    u = rng.random((n, K))

    p_true = np.clip(spec.p_min + (spec.p_max - spec.p_min) * u[:, 0], spec.p_min, spec.p_max)
    pr = u[:, 1:]
    psi = pr.sum(axis=1, keepdims=True)
    # psi == 0 has probability zero; fall back to an even split
    share = np.where(psi > 0, pr / np.where(psi > 0, psi, 1.0), 1.0 / (K - 1))
    off = share * (1.0 - p_true)[:, None]

    P = np.empty((n, K))
    rows = np.arange(n)
    P[rows, labels] = p_true
    # scatter the K-1 off-class entries into the columns != label, in order
    cols = np.arange(K)[None, :].repeat(n, axis=0)
    off_cols = cols[cols != labels[:, None]].reshape(n, K - 1)
    P[rows[:, None], off_cols] = off
    return P


def mps_score(P) -> np.ndarray:
    """Maximum-probability score ``max_k p_ik``."""
    return np.max(np.asarray(P, dtype=float), axis=1)


def entropy(P) -> np.ndarray:
    """Row entropies in nats with ``0 log 0 = 0``."""
    P = np.asarray(P, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0)
    return -terms.sum(axis=1)


def ebs_score(P) -> np.ndarray:
    """Entropy-based score ``1 - H(p_i) / log K``, clipped to [0, 1]."""
    P = np.asarray(P, dtype=float)
    K = P.shape[1]
    return np.clip(1.0 - entropy(P) / np.log(K), 0.0, 1.0)


def scheme_scores(P, scheme: str) -> np.ndarray:
    if scheme == "MPS":
        return mps_score(P)
    if scheme == "EBS":
        return ebs_score(P)
    raise ConfigError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


@dataclass(frozen=True)
class SelectionResult:
    nodes: np.ndarray  # sorted selected node indices
    derived_labels: np.ndarray  # label of each selected node, aligned with ``nodes``
    scheme: str | None
    criterion: tuple  # ("threshold", p_th) or ("top_percent", M)
    forced: tuple = ()  # nodes added only to cover missing classes

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[self.nodes] = True
        return m

    def __len__(self) -> int:
        return int(self.nodes.size)


def top_percent_count(M: float, n: int) -> int:
    """``floor(M n / 100)``, at least 1."""
    return max(1, floor(M * n / 100.0 + 1e-9))


def rank_nodes(scores) -> np.ndarray:
    """Node order by decreasing score, lower index first among ties."""
    scores = np.asarray(scores, dtype=float)
    return np.lexsort((np.arange(scores.size), -scores))


def select_subset(
    scores,
    P,
    threshold: float | None = None,
    top_percent: float | None = None,
    ensure_coverage: bool = True,
    scheme: str | None = None,
) -> SelectionResult:
    """Pick the confident nodes used as labeled seeds.

    Exactly one of ``threshold`` (keep ``score >= p_th``) or ``top_percent``
    (keep the ``floor(M n / 100)`` best, minimum one) must be given. With
    ``ensure_coverage`` every class that occurs among the derived labels of
    ``P`` gets at least one member: its highest-scoring node is added.
    """
    scores = np.asarray(scores, dtype=float)
    P = np.asarray(P, dtype=float)
    n = scores.size
    if P.shape[0] != n:
        raise InputError("scores and P disagree on the node count")
    if (threshold is None) == (top_percent is None):
        raise ConfigError("give exactly one of threshold or top_percent")

    order = rank_nodes(scores)
    if threshold is not None:
        if not 0.0 < threshold <= 1.0:
            raise ConfigError("threshold must lie in (0, 1]")
        chosen = np.flatnonzero(scores >= threshold)
        criterion = ("threshold", float(threshold))
    else:
        if not 0.0 < top_percent <= 100.0:
            raise ConfigError("top_percent must lie in (0, 100]")
        chosen = order[: top_percent_count(top_percent, n)] if n else order
        criterion = ("top_percent", float(top_percent))

    labels_all = derived_labels(P)
    forced = []
    if ensure_coverage and n:
        selected = np.zeros(n, dtype=bool)
        selected[chosen] = True
        covered = set(labels_all[selected].tolist())
        for k in np.unique(labels_all):
            if k in covered:
                continue
            # order is sorted by score, so the first hit is the best node of class k
            best = order[labels_all[order] == k][0]
            forced.append(int(best))
        chosen = np.concatenate([chosen, np.asarray(forced, dtype=np.int64)])

    nodes = np.unique(chosen).astype(np.int64)
    if nodes.size == 0:
        raise InputError("selection is empty")
    return SelectionResult(
        nodes=nodes,
        derived_labels=labels_all[nodes],
        scheme=scheme,
        criterion=criterion,
        forced=tuple(sorted(forced)),
    )


def lambda_from_scheme(P, scheme: str, setting: int, selection: SelectionResult | None = None) -> np.ndarray:
    """Per-node label degrees.

    Setting 1 gives ``1`` on the selected nodes and ``0`` elsewhere (a missing
    selection means every node is selected); Setting 2 uses the scheme score
    of every node.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if setting == 1:
        if selection is None:
            return np.ones(n)
        return selection.mask(n).astype(float)
    if setting == 2:
        return scheme_scores(P, scheme)
    raise ConfigError(f"setting must be 1 or 2, got {setting!r}")


def accuracy(P_hat, truth, eval_set=None) -> float:
    """Fraction of ``eval_set`` whose argmax prediction matches ``truth``."""
    pred = derived_labels(P_hat)
    truth = np.asarray(truth)
    if eval_set is None:
        idx = np.arange(pred.size)
    else:
        idx = np.asarray(eval_set)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
    if idx.size == 0:
        raise InputError("evaluation set is empty")
    return float(np.mean(pred[idx] == truth[idx]))


def class_prior(labels, K: int) -> np.ndarray:
    """Empirical class distribution of a label vector."""
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=K).astype(float)
    if counts.sum() == 0:
        raise InputError("cannot estimate a class prior from no labels")
    return counts / counts.sum()
