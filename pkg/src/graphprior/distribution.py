"""Distribution-estimation solvers: WvRN relaxation labeling and region methods.

Region methods treat every edge as a two-node region with its own
distribution ``pbar_ij`` and alternate between a region step and a node
step on::

    C sum_i lam_i Dfit(p0_i, p_i) + sum_(i,j) w_ij [Dreg(p_i, pbar_ij) + Dreg(p_j, pbar_ij)]

(the second sum runs over undirected edges). Region distributions are
stored as an ``(nnz, K)`` array aligned with the graph's CSR entries, so
``regions[e]`` belongs to the directed entry ``(entry_rows[e], indices[e])``.
Both directions of an edge hold bitwise-identical rows.

========  ==================  =================================
method    region step         node step
========  ==================  =================================
IR        arithmetic mean     weighted geometric mean (Setting 1),
                              per-node multiplier search (Setting 2)
DIR       normalized          mixture ``(mu p0 + sum w pbar) / (mu + d)``
          geometric mean
LSR       arithmetic mean     same mixture as DIR
========  ==================  =================================
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import wrightomega

from .errors import ConfigError, InputError
from .graph import SparseWeightedGraph
from .priors import check_distribution, class_prior, derived_labels, hard_labels
from .quadratic import Solution

log = logging.getLogger(__name__)

REGION_METHODS = ("IR", "DIR", "LSR")
WVRN_VARIANTS = ("base", "V1", "V2")
EPS_FLOOR = 1e-12
IR_INNER_SOLVERS = ("newton", "exponentiated_gradient")


def _mask(nodes, n: int) -> np.ndarray:
    if nodes is None:
        return np.zeros(n, dtype=bool)
    nodes = np.asarray(nodes)
    if nodes.dtype == bool:
        if nodes.shape != (n,):
            raise InputError(f"node mask must have length {n}")
        return nodes.copy()
    m = np.zeros(n, dtype=bool)
    m[nodes.astype(np.int64)] = True
    return m


def _lambda(lam, n: int) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (n,):
        raise InputError(f"label degrees must have length {n}")
    if np.any(~np.isfinite(lam)) or lam.min(initial=0.0) < 0 or lam.max(initial=0.0) > 1:
        raise InputError("label degrees must lie in [0, 1]")
    return lam


def _to_simplex(P: np.ndarray) -> np.ndarray:
    return np.clip(P, 0.0, 1.0, out=P)


def floor_probabilities(P, eps: float = EPS_FLOOR) -> np.ndarray:
    """Raise entries to at least ``eps`` and renormalize the rows."""
    P = np.maximum(np.asarray(P, dtype=float), eps)
    return P / P.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------- WvRN


@dataclass
class WvRNState:
    """Relaxation-labeling state; ``beta`` is always ``nu ** t``."""

    t: int
    nu: float
    P: np.ndarray
    clamped: np.ndarray  # bool mask, rows never change
    variant: str
    lam: np.ndarray | None = None
    P0: np.ndarray | None = None

    @property
    def beta(self) -> float:
        return self.nu**self.t


def wvrn_init(g: SparseWeightedGraph, P0, clamp=None, variant: str = "base", lam=None, nu: float = 0.95) -> WvRNState:
    if variant not in WVRN_VARIANTS:
        raise ConfigError(f"unknown WvRN variant {variant!r}")
    if not 0.0 < nu < 1.0:
        raise ConfigError("nu must lie in (0, 1)")
    P0 = check_distribution(P0, name="P0")
    if P0.shape[0] != g.n:
        raise InputError("P0 does not match the graph size")
    K = P0.shape[1]

    if variant == "base":
        clamped = _mask(clamp, g.n)
        if not clamped.any():
            raise ConfigError("base WvRN needs a nonempty clamp set")
        labels = derived_labels(P0)
        P = np.tile(class_prior(labels[clamped], K), (g.n, 1))
        P[clamped] = hard_labels(labels[clamped], K)
        return WvRNState(t=0, nu=nu, P=P, clamped=clamped, variant=variant)

    clamped = np.zeros(g.n, dtype=bool)
    if variant == "V2":
        if lam is None:
            raise ConfigError("WvRN-V2 needs label degrees")
        lam = _lambda(lam, g.n)
    return WvRNState(t=0, nu=nu, P=P0.copy(), clamped=clamped, variant=variant, lam=lam, P0=P0)


def wvrn_step(g: SparseWeightedGraph, state: WvRNState) -> float:
    """Advance one relaxation-labeling step in place; return the sup-norm change.

    Every free node votes from the frozen previous iterate:
    ``q_i = sum_j w_ij p_j / sum_j w_ij`` and
    ``p_i <- beta q_i + (1 - beta) p_i``. V2 replaces ``q_i`` by
    ``lam_i p0_i + (1 - lam_i) q_i``. Nodes with no neighbors keep their row.
    """
    P = state.P
    q = g.inv_degrees[:, None] * (g.weights @ P)
    iso = g.isolated
    if state.variant == "V2":
        lam = state.lam[:, None]
        q = lam * state.P0 + (1.0 - lam) * q
        # without neighbors the dongle is the only vote left
        q[iso] = np.where(lam[iso] > 0, state.P0[iso], P[iso])
    else:
        q[iso] = P[iso]
    beta = state.beta
    # same as beta q + (1 - beta) p, but exact at beta = 1 and at q = p
    new = q + (1.0 - beta) * (P - q)
    new[state.clamped] = P[state.clamped]
    _to_simplex(new)
    delta = float(np.max(np.abs(new - P))) if P.size else 0.0
    state.P = new
    state.t += 1
    return delta


def wvrn(
    g: SparseWeightedGraph,
    P0,
    clamp=None,
    variant: str = "base",
    lam=None,
    nu: float = 0.95,
    tol: float = 1e-6,
    max_iter: int = 10000,
    beta_floor: float = 1e-12,
) -> Solution:
    """Probabilistic weighted-vote relational neighbor with relaxation labeling.

    Parameters
    ----------
    P0 : (n, K) array
        External priors. For ``variant="base"`` only their argmax on the
        clamp set is used; free nodes start at the empirical class prior of
        the clamped labels.
    clamp : index array or bool mask
        Nodes fixed to their derived one-hot label (base variant only).
    variant : {"base", "V1", "V2"}
        V1 starts from ``P0`` and clamps nothing; V2 additionally mixes each
        vote with the node's own prior with weight ``lam``.
    nu : float
        Annealing decay; the step size after ``t`` steps is ``nu ** t``.

    Iteration stops when the sup-norm change drops below ``tol`` or the
    step size drops below ``beta_floor``.
    """
    state = wvrn_init(g, P0, clamp=clamp, variant=variant, lam=lam, nu=nu)
    if variant == "base":
        undefined = g.isolated & ~state.clamped
    elif variant == "V2":
        undefined = g.isolated & (state.lam == 0)
    else:
        undefined = g.isolated
    flagged = np.flatnonzero(undefined)
    if flagged.size:
        log.info("WvRN: %d node(s) without neighbors keep their initial row", flagged.size)

    converged = False
    while state.t < max_iter:
        delta = wvrn_step(g, state)
        if delta < tol or state.beta < beta_floor:
            converged = True
            break
    if not converged:
        log.warning("WvRN did not converge in %d iterations", max_iter)
    return Solution(values=state.P, iterations=state.t, converged=converged, flagged=flagged)


# ---------------------------------------------------------- region steps


def _aggregator(g: SparseWeightedGraph) -> sp.csr_matrix:
    """Sparse ``(n, nnz)`` matrix summing ``w_ij * x_e`` over each row's entries."""
    return g.entry_aggregator


def ir_region_update(P, g: SparseWeightedGraph) -> np.ndarray:
    """Arithmetic-mean region distributions ``(p_i + p_j) / 2`` per stored entry."""
    P = np.asarray(P, dtype=float)
    return 0.5 * (np.take(P, g.entry_rows, axis=0) + np.take(P, g.indices, axis=0))


def dir_region_update(P, g: SparseWeightedGraph, eps: float = EPS_FLOOR) -> np.ndarray:
    """Normalized geometric-mean regions ``sqrt(p_i p_j) / Z_ij`` per stored entry.

    Rows are floored at ``eps`` first so every region has full support.
    """
    R = np.sqrt(floor_probabilities(P, eps))
    r = np.take(R, g.entry_rows, axis=0) * np.take(R, g.indices, axis=0)
    r /= r.sum(axis=1, keepdims=True)
    return r


class _SharedNodeStep:
    """Node step of DIR/LSR with the per-solve constants precomputed."""

    def __init__(self, g: SparseWeightedGraph, P0, lam, C: float, active=None):
        mu = C * _lambda(lam, g.n)
        self.agg = _aggregator(g)
        self.anchor = mu[:, None] * np.asarray(P0, dtype=float)
        den = mu + g.degrees
        ok = den > 0
        if active is not None:
            ok &= _mask(active, g.n)
        self.ok = ok
        self.all_ok = bool(ok.all())
        self.den = den[:, None] if self.all_ok else den[ok, None]

    def __call__(self, regions, previous) -> np.ndarray:
        num = self.anchor + self.agg @ regions
        if self.all_ok:
            return _to_simplex(num / self.den)
        out = np.array(previous, dtype=float)
        out[self.ok] = num[self.ok] / self.den
        return _to_simplex(out)


def node_update_shared(g: SparseWeightedGraph, regions, P0, lam, C: float, previous, active=None) -> np.ndarray:
    """Closed-form mixture node step shared by DIR and LSR.

    ``p_i = (mu_i p0_i + sum_j w_ij pbar_ij) / (mu_i + d_ii)`` with
    ``mu_i = C lam_i``. Inactive nodes, and nodes where ``mu_i + d_ii = 0``,
    keep their row from ``previous``.
    """
    return _SharedNodeStep(g, P0, lam, C, active)(regions, previous)


def ir_node_update_setting1(g: SparseWeightedGraph, regions, previous, active=None, eps: float = EPS_FLOOR) -> np.ndarray:
    """Weighted geometric mean of incident regions.

    ``p_ik ~ exp(sum_j w_ij log pbar_ij(k) / d_ii)``: the minimiser of
    ``sum_j w_ij KL(p_i || pbar_ij)`` over the simplex. Isolated or
    inactive nodes keep their previous row.
    """
    previous = np.asarray(previous, dtype=float)
    logR = np.log(np.maximum(regions, eps))
    A = _aggregator(g) @ logR
    ok = g.degrees > 0
    if active is not None:
        ok &= _mask(active, g.n)
    out = previous.copy()
    if ok.any():
        a = A[ok] / g.degrees[ok, None]
        a -= a.max(axis=1, keepdims=True)
        e = np.exp(a)
        out[ok] = e / e.sum(axis=1, keepdims=True)
    return _to_simplex(out)


def _ir2_node_objective(p, p0, mu, d, B):
    """Per-node ``mu KL(p0||p) + d <p, log p> - <p, B>`` up to constants."""
    logp = np.log(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        fit = np.where(p0 > 0, p0 * (np.log(np.where(p0 > 0, p0, 1.0)) - logp), 0.0).sum(axis=1)
    return mu * fit + d * (p * logp).sum(axis=1) - (p * B).sum(axis=1)


def _ir2_coordinates(t, a, d):
    """Solve ``d log p - a / p = t`` elementwise for ``p > 0``.

    With ``x = log p`` and ``x = t/d + y`` the equation becomes
    ``y exp(y) = (a/d) exp(-t/d)``, so ``y = omega(log(a/d) - t/d)`` with
    the Wright omega function. ``a = 0`` gives ``y = 0``.
    """
    base = t / d
    with np.errstate(divide="ignore"):
        z = np.log(a / d) - base
    y = np.where(a > 0, np.real(wrightomega(np.where(a > 0, z, 0.0))), 0.0)
    return np.exp(base + y)


def _ir2_exponentiated_gradient(p, p0, mu, d, B, eps, step, max_inner, inner_tol):
    """Multiplicative updates ``log p <- log p - eta grad`` with renormalization.

    ``eta_i = step / (mu_i + d_i)``; a step that would raise a node's
    objective is halved and retried, so each objective is non-increasing.
    """
    m = mu[:, None]
    dd = d[:, None]
    f = _ir2_node_objective(p, p0, mu, d, B)
    eta = step / (m + dd)
    done = np.zeros(p.shape[0], dtype=bool)
    for _ in range(max_inner):
        work = np.flatnonzero(~done)
        if work.size == 0:
            break
        pw = p[work]
        with np.errstate(divide="ignore", invalid="ignore"):
            grad = -m[work] * np.where(p0[work] > 0, p0[work] / pw, 0.0) + dd[work] * (np.log(pw) + 1.0) - B[work]
        e = eta[work]
        fw = f[work]
        cand = pw.copy()
        accepted = np.zeros(work.size, dtype=bool)
        for _halving in range(40):
            pending = np.flatnonzero(~accepted)
            if pending.size == 0:
                break
            z = np.log(pw[pending]) - e[pending] * grad[pending]
            z -= z.max(axis=1, keepdims=True)
            q = np.exp(z)
            q = floor_probabilities(q / q.sum(axis=1, keepdims=True), eps)
            fq = _ir2_node_objective(q, p0[work][pending], mu[work][pending], d[work][pending], B[work][pending])
            ok = fq <= fw[pending] + 1e-15 * np.abs(fw[pending])
            acc = pending[ok]
            cand[acc] = q[ok]
            fw[acc] = fq[ok]
            accepted[acc] = True
            e[pending[~ok]] *= 0.5
        change = np.max(np.abs(cand - pw), axis=1)
        p[work] = cand
        f[work] = fw
        eta[work] = e
        done[work[(change < inner_tol) | ~accepted]] = True
    return p, bool(done.all())


def ir_node_update_setting2(
    g: SparseWeightedGraph,
    regions,
    P0,
    lam,
    C: float,
    previous,
    active=None,
    eps: float = EPS_FLOOR,
    solver: str = "newton",
    step: float = 0.5,
    max_inner: int = 200,
    inner_tol: float = 1e-8,
) -> tuple[np.ndarray, bool]:
    """Minimise ``mu_i KL(p0_i || p_i) + sum_j w_ij KL(p_i || pbar_ij)`` per node.

    The stationarity condition with simplex multiplier ``nu`` reads
    ``d log p_k - mu p0_k / p_k = B_k - d - nu`` where
    ``B = sum_j w_ij log pbar_ij``. Each coordinate has a closed form in
    ``nu`` (see ``_ir2_coordinates``) and the total mass is decreasing in
    ``nu``, so ``nu`` is found by Newton steps kept inside a bracket where
    the mass crosses one. ``mu_i = 0`` nodes use the closed-form geometric mean and
    isolated nodes with ``mu_i > 0`` return ``p0_i``.

    ``solver="exponentiated_gradient"`` instead takes multiplicative steps
    from the previous row (see ``_ir2_exponentiated_gradient``).

    Returns the updated matrix and whether every node met ``inner_tol``:
    the mass error before renormalization for Newton, the per-step change
    for exponentiated gradient.
    """
    previous = np.asarray(previous, dtype=float)
    P0 = np.asarray(P0, dtype=float)
    mu = C * _lambda(lam, g.n)
    d = g.degrees
    act = np.ones(g.n, dtype=bool) if active is None else _mask(active, g.n)

    out = ir_node_update_setting1(g, regions, previous, active=act & (mu == 0), eps=eps)
    lone = act & (d == 0) & (mu > 0)
    out[lone] = P0[lone]

    idx = np.flatnonzero(act & (d > 0) & (mu > 0))
    if idx.size == 0:
        return out, True

    if solver == "exponentiated_gradient":
        B = (_aggregator(g) @ np.log(np.maximum(regions, eps)))[idx]
        p, converged = _ir2_exponentiated_gradient(
            floor_probabilities(previous[idx], eps), P0[idx], mu[idx], d[idx], B, eps, step, max_inner, inner_tol
        )
        out[idx] = p
        return _to_simplex(out), converged
    if solver != "newton":
        raise ConfigError(f"inner solver must be one of {IR_INNER_SOLVERS}")

    K = P0.shape[1]
    dd = d[idx][:, None]
    a = mu[idx][:, None] * P0[idx]
    c = (_aggregator(g) @ np.log(np.maximum(regions, eps)))[idx] - dd
    # at lo some coordinate equals 1 (mass >= 1); at hi all are <= 1/K (mass <= 1)
    lo = (c + a).max(axis=1)
    hi = (c + dd * np.log(K) + a * K).max(axis=1)
    nu = lo.copy()
    for _ in range(max_inner):
        p = _ir2_coordinates(c - nu[:, None], a, dd)
        mass = p.sum(axis=1)
        if np.all(np.abs(mass - 1.0) <= 1e-14):
            break
        big = mass > 1.0
        lo = np.where(big, nu, lo)
        hi = np.where(big, hi, nu)
        # safeguarded Newton: d p_k / d nu = -p_k^2 / (d p_k + a_k)
        slope = -(p * p / (dd * p + a)).sum(axis=1)
        step = nu - (mass - 1.0) / slope
        inside = (step > lo) & (step < hi)
        nu = np.where(inside, step, 0.5 * (lo + hi))
    p = _ir2_coordinates(c - nu[:, None], a, dd)
    mass = p.sum(axis=1)
    converged = bool(np.all(np.abs(mass - 1.0) <= inner_tol))
    out[idx] = floor_probabilities(p / mass[:, None], eps)
    return _to_simplex(out), converged


# ------------------------------------------------------- region objective


def _kl_rows(p, q, eps):
    """Row-wise ``KL(p || q)`` with ``0 log 0 = 0`` and ``q`` floored."""
    q = np.maximum(q, eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, p * (np.log(np.where(p > 0, p, 1.0)) - np.log(q)), 0.0)
    return t.sum(axis=1)


def region_objective(
    g: SparseWeightedGraph, method: str, P, regions, P0, lam, C: float, eps: float = EPS_FLOOR
) -> float:
    """Regularized objective for fixed node and region distributions.

    LSR uses squared error for both terms; IR uses ``KL(p0||p)`` and
    ``KL(p||pbar)``; DIR uses ``KL(p0||p)`` and ``KL(pbar||p)``.
    """
    P = np.asarray(P, dtype=float)
    P0 = np.asarray(P0, dtype=float)
    mu = C * np.asarray(lam, dtype=float)
    Pi = P[g.entry_rows]
    if method == "LSR":
        fit = np.sum(mu * np.sum((P0 - P) ** 2, axis=1))
        reg = np.sum(g.data * np.sum((Pi - regions) ** 2, axis=1))
    elif method == "IR":
        fit = np.sum(mu * _kl_rows(P0, P, eps))
        reg = np.sum(g.data * _kl_rows(Pi, regions, eps))
    elif method == "DIR":
        Pf = floor_probabilities(P, eps)
        fit = np.sum(mu * _kl_rows(P0, Pf, eps))
        reg = np.sum(g.data * _kl_rows(regions, Pf[g.entry_rows], eps))
    else:
        raise ConfigError(f"unknown region method {method!r}")
    return float(fit + reg)


# ------------------------------------------------------- alternating loop


@dataclass
class RegionMethodConfig:
    method: str
    setting: int = 2
    C: float = 1.0
    lam: np.ndarray | None = None
    eps: float = EPS_FLOOR
    tol: float = 1e-6
    max_outer_iter: int = 500
    inner_solver: str = "newton"
    inner_step: float = 0.5
    max_inner_iter: int = 200
    inner_tol: float = 1e-8

    def __post_init__(self):
        if self.method not in REGION_METHODS:
            raise ConfigError(f"unknown region method {self.method!r}; expected one of {REGION_METHODS}")
        if self.setting not in (1, 2):
            raise ConfigError("setting must be 1 or 2")
        if not self.C > 0:
            raise ConfigError("C must be positive")
        if not 0 < self.eps <= 1e-6:
            raise ConfigError("eps must lie in (0, 1e-6]")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.inner_solver not in IR_INNER_SOLVERS:
            raise ConfigError(f"inner_solver must be one of {IR_INNER_SOLVERS}")


def region_step(method: str, P, g: SparseWeightedGraph, eps: float = EPS_FLOOR) -> np.ndarray:
    if method == "DIR":
        return dir_region_update(P, g, eps)
    return ir_region_update(P, g)


def node_step(
    method: str,
    setting: int,
    g: SparseWeightedGraph,
    regions,
    P0,
    lam,
    C: float,
    previous,
    active=None,
    cfg: RegionMethodConfig | None = None,
) -> tuple[np.ndarray, bool]:
    """Node half-step of ``method``; returns ``(P, inner_converged)``."""
    if method in ("DIR", "LSR"):
        return node_update_shared(g, regions, P0, lam, C, previous, active), True
    if method != "IR":
        raise ConfigError(f"unknown region method {method!r}")
    eps = cfg.eps if cfg else EPS_FLOOR
    if setting == 1:
        return ir_node_update_setting1(g, regions, previous, active, eps), True
    kw = {}
    if cfg is not None:
        kw = dict(solver=cfg.inner_solver, step=cfg.inner_step, max_inner=cfg.max_inner_iter, inner_tol=cfg.inner_tol)
    return ir_node_update_setting2(g, regions, P0, lam, C, previous, active, eps=eps, **kw)


def run_region_method(g: SparseWeightedGraph, cfg: RegionMethodConfig, P0, S=None, trace: bool = False) -> Solution:
    """Alternate region and node steps until the node distributions settle.

    Setting 1 clamps the nodes in ``S`` to their derived one-hot label and
    starts the others at the empirical class prior of ``S``; the fitting
    term drops out. Setting 2 starts from ``P0`` and fits every node with
    weight ``C * lam_i``.

    With ``trace`` the solution carries one ``(iter, objective, delta)`` row
    per outer iteration and, in ``half_steps``, the objective after every
    region and node half-step.
    """
    P0 = check_distribution(P0, name="P0")
    if P0.shape[0] != g.n:
        raise InputError("P0 does not match the graph size")
    K = P0.shape[1]
    method = cfg.method

    if cfg.setting == 1:
        clamped = _mask(S, g.n)
        if not clamped.any():
            raise ConfigError("Setting 1 needs a nonempty clamp set S")
        labels = derived_labels(P0)
        fixed = hard_labels(labels[clamped], K)
        P = np.tile(class_prior(labels[clamped], K), (g.n, 1))
        P[clamped] = fixed
        target = P.copy()
        lam = np.zeros(g.n)
        C = 1.0
    else:
        if cfg.lam is None:
            raise ConfigError("Setting 2 needs label degrees lam")
        clamped = np.zeros(g.n, dtype=bool)
        target = P0
        lam = _lambda(cfg.lam, g.n)
        C = cfg.C
        P = P0.copy()
    free = ~clamped

    undefined = free & (g.degrees == 0) & (C * lam == 0)
    flagged = np.flatnonzero(undefined)

    if method in ("DIR", "LSR"):
        shared = _SharedNodeStep(g, target, lam, C, active=free)

        def do_node(regions, P):
            return shared(regions, P), True
    else:

        def do_node(regions, P):
            return node_step(method, cfg.setting, g, regions, target, lam, C, P, active=free, cfg=cfg)

    rows, half = [], []
    converged = False
    inner_ok = True
    it = 0
    for it in range(1, cfg.max_outer_iter + 1):
        regions = region_step(method, P, g, cfg.eps)
        if trace:
            half.append(region_objective(g, method, P, regions, target, lam, C, cfg.eps))
        P_new, ok = do_node(regions, P)
        inner_ok &= ok
        P_new[clamped] = P[clamped]
        delta = float(np.max(np.abs(P_new - P))) if P.size else 0.0
        P = P_new
        if trace:
            obj = region_objective(g, method, P, regions, target, lam, C, cfg.eps)
            half.append(obj)
            rows.append((it, obj, delta))
        if delta < cfg.tol:
            converged = True
            break
    if not converged:
        log.warning("%s did not converge in %d outer iterations", method, cfg.max_outer_iter)
    if not inner_ok:
        log.info("%s: inner node solve hit its iteration cap", method)
    return Solution(values=P, iterations=it, converged=converged, trace=rows, flagged=flagged, half_steps=half)
