"""Function-estimation solvers: generic quadratic objective, GFHF and LGC.

All three minimise (per class column ``k``)::

    Q(F) = C (F_k - Z_k)^T H (F_k - Z_k) + F_k^T L F_k

whose stationarity condition is the linear system ``(L + C H) F = C H Z``.
Rather than inverting it we run the Jacobi splitting of that system::

    F <- (diag(L) + C H)^-1 (C H Z + (diag(L) - L) F)

which, for the GFHF weights ``H = D Lam (I - Lam)^-1`` with ``C = 1``, is
exactly ``F <- (I - Lam) D^-1 W F + Lam Z`` and, for ``H = I`` with the
normalized Laplacian, exactly ``F <- gamma S F + (1 - gamma) Z``. The
splitting contracts whenever ``L + C H`` is positive definite and every
step is a descent step on ``Q`` (``2 diag(L + C H) - (L + C H)`` is PSD).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import graph as gr
from .errors import ConfigError, DegenerateClassError, DivergenceError, InputError, SingularSystemError
from .graph import SparseWeightedGraph

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 1000
DIVERGENCE_BOUND = 1e12
ORACLE_MAX_NODES = 3000


@dataclass
class Solution:
    """Output of an iterative solver.

    ``values`` holds ``F`` (score matrix) or ``P`` (distribution matrix).
    ``trace`` collects ``(iteration, objective, delta)`` rows when tracing
    was requested. ``flagged`` lists nodes whose update was undefined and
    which kept their previous value.
    """

    values: np.ndarray
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)
    flagged: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    half_steps: list = field(default_factory=list)


@dataclass
class QuadraticConfig:
    C: float = 1.0
    laplacian: str = "unnormalized"
    h: np.ndarray | None = None  # diagonal of H; None means identity, inf means clamped
    lam: np.ndarray | None = None  # used only to build the starting point Lam Z
    use_node_regularization: bool = False
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if not self.C > 0:
            raise ConfigError("C must be positive")
        if self.laplacian not in gr.LAPLACIAN_KINDS:
            raise ConfigError(f"unknown Laplacian kind {self.laplacian!r}")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")

    def h_diag(self, n: int) -> np.ndarray:
        if self.h is None:
            return np.ones(n)
        h = np.asarray(self.h, dtype=float)
        if h.shape != (n,):
            raise InputError(f"H diagonal must have length {n}")
        if np.any(np.isnan(h)) or np.any(h < 0):
            raise InputError("H diagonal must be nonnegative")
        return h


@dataclass
class NormalizedLabelData:
    v: np.ndarray  # node regularization weights
    z: np.ndarray  # Z = V Lam Y
    eta: np.ndarray | None  # per-class normalizers (None when V = I)


def _check_lambda(lam, n: int) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (n,):
        raise InputError(f"label degrees must have length {n}")
    if np.any(~np.isfinite(lam)) or lam.min(initial=0.0) < 0 or lam.max(initial=0.0) > 1:
        raise InputError("label degrees must lie in [0, 1]")
    return lam


def _check_scores(Z, n: int) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != n:
        raise InputError(f"label matrix must have shape ({n}, K)")
    if not np.all(np.isfinite(Z)):
        raise InputError("label matrix has non-finite entries")
    return Z


def build_node_regularization(
    g: SparseWeightedGraph, lam, Y, use_node_regularization: bool = True
) -> NormalizedLabelData:
    """Return ``Z = V Lam Y`` with degree-based node regularization.

    ``v_ii = sum_k d_ii lam_ii y_ik / eta_k`` with
    ``eta_k = sum_i d_ii lam_ii y_ik``. For one-hot ``Y`` and
    ``lam in {0, 1}`` every column of ``Z`` sums to one. With soft labels or
    fractional ``lam`` the formula is applied as written and the column sums
    are whatever it yields.
    """
    lam = _check_lambda(lam, g.n)
    Y = _check_scores(Y, g.n)
    if not use_node_regularization:
        return NormalizedLabelData(v=np.ones(g.n), z=lam[:, None] * Y, eta=None)

    support = (g.degrees * lam)[:, None] * Y
    eta = support.sum(axis=0)
    present = Y.sum(axis=0) > 0
    if np.any(present & (eta <= 0)):
        bad = np.flatnonzero(present & (eta <= 0)).tolist()
        raise DegenerateClassError(f"class(es) {bad} have no degree-weighted label support")
    safe_eta = np.where(eta > 0, eta, 1.0)
    v = (support / safe_eta).sum(axis=1)
    return NormalizedLabelData(v=v, z=(v * lam)[:, None] * Y, eta=eta)


def gfhf_weights(g: SparseWeightedGraph, lam) -> np.ndarray:
    """``H = D Lam (I - Lam)^-1``; fully labeled nodes get ``inf`` (clamped)."""
    lam = _check_lambda(lam, g.n)
    h = np.full(g.n, np.inf)
    free = lam < 1
    h[free] = g.degrees[free] * lam[free] / (1.0 - lam[free])
    return h


def quadratic_objective(g: SparseWeightedGraph, cfg: QuadraticConfig, Z, F) -> float:
    """Evaluate ``sum_k C (F_k - Z_k)^T H (F_k - Z_k) + F_k^T L F_k``.

    Rows with infinite ``h`` are treated as hard constraints and contribute
    nothing to the fitting term (they must satisfy ``F_i = Z_i``).
    """
    Z = getattr(Z, "z", Z)
    h = cfg.h_diag(g.n)
    finite = np.isfinite(h)
    resid = (F - Z)[finite]
    fit = cfg.C * float(np.sum(h[finite, None] * resid**2))
    smooth = float(np.sum(F * gr.apply_laplacian(g, cfg.laplacian, F)))
    return fit + smooth


def _iterate(
    step, F0: np.ndarray, tol: float, max_iter: int, objective=None, name: str = "solver"
) -> Solution:
    F = F0
    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        F_new = step(F)
        delta = float(np.max(np.abs(F_new - F))) if F.size else 0.0
        F = F_new
        if not np.all(np.isfinite(F)) or (F.size and np.max(np.abs(F)) > DIVERGENCE_BOUND):
            raise DivergenceError(f"{name} diverged at iteration {it}")
        if objective is not None:
            trace.append((it, objective(F), delta))
        if delta < tol:
            converged = True
            break
    if not converged:
        log.warning("%s did not converge in %d iterations", name, max_iter)
    return Solution(values=F, iterations=it, converged=converged, trace=trace)


def solve_generic(g: SparseWeightedGraph, cfg: QuadraticConfig, Z, trace: bool = False) -> Solution:
    """Minimise the generic quadratic objective by a Jacobi fixed point.

    ``Z`` is either a :class:`NormalizedLabelData` or an ``(n, K)`` array.
    Nodes with ``h_ii = inf`` are clamped to their ``Z`` row.
    """
    Z = _check_scores(getattr(Z, "z", Z), g.n)
    h = cfg.h_diag(g.n)
    clamped = np.isinf(h)
    free = ~clamped
    hf = np.where(clamped, 0.0, h)

    diag = gr.laplacian_diagonal(g, cfg.laplacian) + cfg.C * hf
    if np.any(free & (diag <= 0)):
        bad = np.flatnonzero(free & (diag <= 0))[:5].tolist()
        raise SingularSystemError(f"zero diagonal in L + C H at nodes {bad} (isolated with h = 0)")
    inv_diag = np.where(free, 1.0 / np.where(diag > 0, diag, 1.0), 0.0)[:, None]
    anchor = (cfg.C * hf)[:, None] * Z
    Zc = Z[clamped]

    def step(F):
        out = inv_diag * (anchor + gr.apply_laplacian_offdiag(g, cfg.laplacian, F))
        out[clamped] = Zc
        return out

    F0 = Z.copy() if cfg.lam is None else _check_lambda(cfg.lam, g.n)[:, None] * Z
    F0[clamped] = Zc
    objective = (lambda F: quadratic_objective(g, cfg, Z, F)) if trace else None
    return _iterate(step, F0, cfg.tol, cfg.max_iter, objective, name="generic quadratic solver")


def closed_form_oracle(g: SparseWeightedGraph, cfg: QuadraticConfig, Z) -> np.ndarray:
    """Dense solve of ``(L + C H) F = C H Z``; test-sized graphs only.

    Rows with infinite ``h`` are eliminated as fixed values, which is the
    ``h -> inf`` limit of the closed form.
    """
    if g.n > ORACLE_MAX_NODES:
        raise ConfigError(f"dense oracle is capped at {ORACLE_MAX_NODES} nodes")
    Z = _check_scores(getattr(Z, "z", Z), g.n)
    h = cfg.h_diag(g.n)
    clamped = np.isinf(h)
    free = ~clamped
    L = gr.dense_laplacian(g, cfg.laplacian)
    A = L[np.ix_(free, free)] + cfg.C * np.diag(h[free])
    rhs = cfg.C * h[free, None] * Z[free] - L[np.ix_(free, clamped)] @ Z[clamped]
    F = Z.copy()
    try:
        F[free] = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("L + C H is singular") from exc
    return F


def solve_gfhf(
    g: SparseWeightedGraph,
    lam,
    Z,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    trace: bool = False,
) -> Solution:
    """Harmonic-function propagation ``F = (I - Lam) D^-1 W F + Lam Z``.

    Nodes with ``lam_ii = 1`` are clamped to their ``Z`` row and never
    updated. ``Lam = mu I`` gives the uniform dongle-node variant.
    """
    lam = _check_lambda(lam, g.n)
    Z = _check_scores(getattr(Z, "z", Z), g.n)
    if not np.any(lam > 0):
        raise ConfigError("GFHF needs at least one node with positive label degree")
    clamped = lam == 1.0
    keep = (1.0 - lam)[:, None]
    anchor = lam[:, None] * Z
    Zc = Z[clamped]

    def step(F):
        out = keep * gr.apply_row_normalized(g, F) + anchor
        out[clamped] = Zc
        return out

    F0 = anchor.copy()
    F0[clamped] = Zc
    objective = None
    if trace:
        cfg = QuadraticConfig(C=1.0, laplacian="unnormalized", h=gfhf_weights(g, lam))
        objective = lambda F: quadratic_objective(g, cfg, Z, F)  # noqa: E731
    return _iterate(step, F0, tol, max_iter, objective, name="GFHF")


def solve_lgc(
    g: SparseWeightedGraph,
    lam,
    Z,
    C: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    trace: bool = False,
) -> Solution:
    """Local/global consistency spreading with per-node label degrees.

    Iterates ``F <- gamma S F + (1 - gamma) Lam Z`` with
    ``gamma = 1 / (1 + C)`` and ``S = D^-1/2 W D^-1/2``. The factor ``Lam``
    multiplies ``Z`` even when ``Z`` already carries ``Lam``.
    """
    if not C > 0:
        raise ConfigError("C must be positive")
    lam = _check_lambda(lam, g.n)
    Z = _check_scores(getattr(Z, "z", Z), g.n)
    gamma = 1.0 / (1.0 + C)
    anchor = (1.0 - gamma) * (lam[:, None] * Z)

    def step(F):
        return gamma * gr.apply_symmetric_normalized(g, F) + anchor

    objective = None
    if trace:
        cfg = QuadraticConfig(C=C, laplacian="normalized")
        LZ = lam[:, None] * Z
        objective = lambda F: quadratic_objective(g, cfg, LZ, F)  # noqa: E731
    return _iterate(step, lam[:, None] * Z, tol, max_iter, objective, name="LGC")
