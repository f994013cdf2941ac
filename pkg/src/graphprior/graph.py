"""Sparse symmetric weighted graphs and matrix-free graph operators.

The graph stores ``W`` in CSR form together with the degree vector
``d_ii = sum_j w_ij``. The propagation operators used by the solvers are
never materialised as matrices::

    apply_row_normalized        D^-1 W M
    apply_symmetric_normalized  D^-1/2 W D^-1/2 M
    apply_laplacian             (D - W) M   or   (I - D^-1/2 W D^-1/2) M

Isolated nodes (``d_ii = 0``) get zero rows in ``D^-1`` and ``D^-1/2``.
"""
from __future__ import annotations

import logging
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InputError

log = logging.getLogger(__name__)

LAPLACIAN_KINDS = ("unnormalized", "normalized")


class SparseWeightedGraph:
    """Immutable undirected graph with nonnegative edge weights.

    Use :func:`build_graph` rather than calling the constructor directly;
    the constructor trusts that ``weights`` is already symmetric, has no
    diagonal and no negative entries.
    """

    def __init__(self, weights: sp.csr_matrix, self_loops_dropped: int = 0):
        weights = weights.tocsr()
        weights.sort_indices()
        for arr in (weights.data, weights.indices, weights.indptr):
            arr.setflags(write=False)
        self._w = weights
        self.n = weights.shape[0]
        self.self_loops_dropped = self_loops_dropped

        deg = np.asarray(weights.sum(axis=1)).ravel()
        deg.setflags(write=False)
        self.degrees = deg

        has_nbr = deg > 0
        inv = np.zeros(self.n)
        inv[has_nbr] = 1.0 / deg[has_nbr]
        inv_sqrt = np.zeros(self.n)
        inv_sqrt[has_nbr] = 1.0 / np.sqrt(deg[has_nbr])
        inv.setflags(write=False)
        inv_sqrt.setflags(write=False)
        self.inv_degrees = inv
        self.inv_sqrt_degrees = inv_sqrt

        # row index of every stored (directed) entry, aligned with indices/data
        rows = np.repeat(np.arange(self.n), np.diff(weights.indptr))
        rows.setflags(write=False)
        self.entry_rows = rows
        # (n, nnz) operator summing w_ij * x_e over the entries of each row
        self.entry_aggregator = sp.csr_matrix(
            (weights.data, np.arange(weights.nnz), weights.indptr), shape=(self.n, weights.nnz)
        )

    @property
    def weights(self) -> sp.csr_matrix:
        return self._w

    @property
    def indptr(self) -> np.ndarray:
        return self._w.indptr

    @property
    def indices(self) -> np.ndarray:
        return self._w.indices

    @property
    def data(self) -> np.ndarray:
        return self._w.data

    @property
    def nnz(self) -> int:
        """Number of stored directed entries (twice the undirected edge count)."""
        return self._w.nnz

    @property
    def num_edges(self) -> int:
        return self._w.nnz // 2

    @property
    def isolated(self) -> np.ndarray:
        return self.degrees == 0

    def edges(self) -> list[tuple[int, int, float]]:
        """Undirected edges ``(u, v, w)`` with ``u < v``."""
        coo = sp.triu(self._w, k=1).tocoo()
        return [(int(u), int(v), float(w)) for u, v, w in zip(coo.row, coo.col, coo.data)]

    def to_dense(self) -> np.ndarray:
        return self._w.toarray()

    def scaled(self, factor: float) -> "SparseWeightedGraph":
        if factor <= 0:
            raise InputError("scale factor must be positive")
        return SparseWeightedGraph(self._w * factor)

    def __repr__(self) -> str:
        return f"SparseWeightedGraph(n={self.n}, edges={self.num_edges})"


def build_graph(
    edge_triples: Iterable[Sequence[float]], n: int | None = None
) -> SparseWeightedGraph:
    """Build a symmetric graph from directed ``(u, v, w)`` triples.

    Each triple contributes ``w`` to both ``w_uv`` and ``w_vu``, so an edge
    listed in both directions ends up with the summed weight (a mutual
    citation counts twice). Self-loops are dropped.

    Parameters
    ----------
    edge_triples : iterable of (u, v, w)
        0-based node indices and nonnegative weights.
    n : int, optional
        Node count. Defaults to ``1 + max index`` (0 for an empty list).
    """
    triples = list(edge_triples)
    if triples:
        arr = np.asarray(triples, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise InputError("edge triples must have exactly three fields (u, v, w)")
        u_f, v_f, w = arr[:, 0], arr[:, 1], arr[:, 2]
        if np.any(u_f != np.round(u_f)) or np.any(v_f != np.round(v_f)):
            raise InputError("node indices must be integers")
        u = u_f.astype(np.int64)
        v = v_f.astype(np.int64)
    else:
        u = v = np.zeros(0, dtype=np.int64)
        w = np.zeros(0)

    if n is None:
        n = int(max(u.max(initial=-1), v.max(initial=-1)) + 1)
    if n < 0:
        raise InputError("node count must be nonnegative")
    if u.size and (u.min() < 0 or v.min() < 0 or u.max() >= n or v.max() >= n):
        raise InputError(f"node index out of range for n={n}")
    if np.any(~np.isfinite(w)):
        raise InputError("edge weights must be finite")
    if np.any(w < 0):
        raise InputError("edge weights must be nonnegative")

    loops = u == v
    n_loops = int(loops.sum())
    if n_loops:
        log.warning("dropped %d self-loop(s)", n_loops)
    keep = ~loops
    u, v, w = u[keep], v[keep], w[keep]

    directed = sp.coo_matrix((w, (u, v)), shape=(n, n)).tocsr()
    sym = (directed + directed.T).tocsr()
    sym.eliminate_zeros()
    return SparseWeightedGraph(sym, self_loops_dropped=n_loops)


def from_scipy(matrix, symmetrize: bool = True) -> SparseWeightedGraph:
    """Wrap a square sparse or dense weight matrix.

    With ``symmetrize`` the matrix is read as directed input and summed with
    its transpose (the :func:`build_graph` convention). Otherwise it must
    already be symmetric. The diagonal is dropped in both cases.
    """
    m = sp.csr_matrix(matrix, dtype=float)
    if m.shape[0] != m.shape[1]:
        raise InputError("weight matrix must be square")
    if symmetrize:
        coo = m.tocoo()
        return build_graph(zip(coo.row, coo.col, coo.data), n=m.shape[0])
    if m.nnz and m.data.min() < 0:
        raise InputError("edge weights must be nonnegative")
    if m.nnz and abs(m - m.T).max() > 0:
        raise InputError("weight matrix is not symmetric")
    n_loops = int(np.count_nonzero(m.diagonal()))
    m = (m - sp.diags(m.diagonal())).tocsr()
    m.eliminate_zeros()
    return SparseWeightedGraph(m, self_loops_dropped=n_loops)


def _as_block(g: SparseWeightedGraph, M) -> tuple[np.ndarray, bool]:
    M = np.asarray(M, dtype=float)
    vector = M.ndim == 1
    if vector:
        M = M[:, None]
    if M.ndim != 2 or M.shape[0] != g.n:
        raise InputError(f"expected an array with {g.n} rows, got shape {np.shape(M)}")
    return M, vector


def _out(res: np.ndarray, vector: bool) -> np.ndarray:
    return res[:, 0] if vector else res


def apply_row_normalized(g: SparseWeightedGraph, M) -> np.ndarray:
    """Return ``D^-1 W M``; isolated rows are zero."""
    M, vec = _as_block(g, M)
    return _out(g.inv_degrees[:, None] * (g.weights @ M), vec)


def apply_symmetric_normalized(g: SparseWeightedGraph, M) -> np.ndarray:
    """Return ``D^-1/2 W D^-1/2 M``; isolated rows are zero."""
    M, vec = _as_block(g, M)
    s = g.inv_sqrt_degrees[:, None]
    return _out(s * (g.weights @ (s * M)), vec)


def apply_laplacian(g: SparseWeightedGraph, kind: str, M) -> np.ndarray:
    """Return ``L M`` for ``kind`` in {"unnormalized", "normalized"}.

    The normalized Laplacian has a zero row for an isolated node (its
    diagonal entry is 1 only where ``d_ii > 0``), so both kinds vanish on
    an edgeless graph and isolated nodes settle at their fitting target.
    """
    if kind == "unnormalized":
        M, vec = _as_block(g, M)
        return _out(g.degrees[:, None] * M - g.weights @ M, vec)
    if kind == "normalized":
        M, vec = _as_block(g, M)
        return _out(_has_neighbors(g)[:, None] * M - apply_symmetric_normalized(g, M), vec)
    raise InputError(f"unknown Laplacian kind {kind!r}; expected one of {LAPLACIAN_KINDS}")


def _has_neighbors(g: SparseWeightedGraph) -> np.ndarray:
    return (g.degrees > 0).astype(float)


def laplacian_diagonal(g: SparseWeightedGraph, kind: str) -> np.ndarray:
    """Diagonal of ``L`` under the isolated-node convention above."""
    if kind == "unnormalized":
        return g.degrees.copy()
    if kind == "normalized":
        return _has_neighbors(g)
    raise InputError(f"unknown Laplacian kind {kind!r}")


def apply_laplacian_offdiag(g: SparseWeightedGraph, kind: str, M) -> np.ndarray:
    """Return ``(diag(L) - L) M``, the off-diagonal part with its sign flipped."""
    if kind == "unnormalized":
        M, vec = _as_block(g, M)
        return _out(g.weights @ M, vec)
    if kind == "normalized":
        return apply_symmetric_normalized(g, M)
    raise InputError(f"unknown Laplacian kind {kind!r}")


def dense_laplacian(g: SparseWeightedGraph, kind: str) -> np.ndarray:
    W = g.to_dense()
    if kind == "unnormalized":
        return np.diag(g.degrees) - W
    if kind == "normalized":
        s = g.inv_sqrt_degrees
        return np.diag(_has_neighbors(g)) - s[:, None] * W * s[None, :]
    raise InputError(f"unknown Laplacian kind {kind!r}")
