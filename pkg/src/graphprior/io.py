"""Readers and writers for edge lists, truth labels, priors and score dumps."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import InputError
from .graph import SparseWeightedGraph, build_graph
from .priors import renormalize


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def read_edge_list(path, n: int | None = None) -> SparseWeightedGraph:
    """Read ``u<TAB>v<TAB>w`` lines (0-based ids); ``#`` starts a comment line."""
    triples = []
    for lineno, line in _lines(path):
        parts = line.split("\t")
        if len(parts) != 3:
            raise InputError(f"{path}:{lineno}: expected u<TAB>v<TAB>w")
        try:
            u, v, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from None
        triples.append((u, v, w))
    return build_graph(triples, n=n)


def write_edge_list(g: SparseWeightedGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n={g.n}\n")
        for u, v, w in g.edges():
            fh.write(f"{u}\t{v}\t{w!r}\n")


def read_labels(path, n: int | None = None) -> np.ndarray:
    """Read ``node<TAB>class`` lines; nodes without a line get label -1."""
    pairs = []
    for lineno, line in _lines(path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise InputError(f"{path}:{lineno}: expected node<TAB>class")
        try:
            node, cls = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from None
        if node < 0 or cls < 0:
            raise InputError(f"{path}:{lineno}: ids must be nonnegative")
        pairs.append((node, cls))
    size = max((p[0] for p in pairs), default=-1) + 1
    if n is not None:
        if size > n:
            raise InputError(f"{path}: node id {size - 1} out of range for n={n}")
        size = n
    labels = np.full(size, -1, dtype=np.int64)
    for node, cls in pairs:
        if labels[node] != -1 and labels[node] != cls:
            raise InputError(f"{path}: conflicting labels for node {node}")
        labels[node] = cls
    return labels


def write_labels(labels, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for node, cls in enumerate(np.asarray(labels)):
            if cls >= 0:
                fh.write(f"{node}\t{int(cls)}\n")


def read_priors(path, n: int | None = None, tol: float = 1e-6) -> np.ndarray:
    """Read a ``node,p_0,...,p_{K-1}`` CSV and renormalize its rows exactly."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty priors file") from None
        K = len(header) - 1
        if header[0].strip() != "node" or K < 2 or [h.strip() for h in header[1:]] != [f"p_{k}" for k in range(K)]:
            raise InputError(f"{path}: header must be node,p_0,...,p_{{K-1}}")
        rows = {}
        for lineno, rec in enumerate(reader, 2):
            if not rec:
                continue
            if len(rec) != K + 1:
                raise InputError(f"{path}:{lineno}: expected {K + 1} fields")
            try:
                node = int(rec[0])
                rows[node] = [float(x) for x in rec[1:]]
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    size = n if n is not None else (max(rows, default=-1) + 1)
    missing = [i for i in range(size) if i not in rows]
    if missing or any(i >= size or i < 0 for i in rows):
        raise InputError(f"{path}: priors must cover nodes 0..{size - 1} exactly once")
    P = np.array([rows[i] for i in range(size)], dtype=float).reshape(size, K)
    try:
        return renormalize(P, tol=tol)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_priors(P, path) -> None:
    P = np.asarray(P, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node"] + [f"p_{k}" for k in range(P.shape[1])])
        for i, row in enumerate(P):
            w.writerow([i] + [repr(float(x)) for x in row])


def write_scores(F, path) -> None:
    """Dump a raw score matrix (no renormalization) with a ``node,f_k`` header."""
    F = np.asarray(F, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node"] + [f"f_{k}" for k in range(F.shape[1])])
        for i, row in enumerate(F):
            w.writerow([i] + [repr(float(x)) for x in row])


def scores_to_distribution(F) -> np.ndarray:
    """Clip negative scores and renormalize rows for reporting.

    Rows that are entirely nonpositive become uniform.
    """
    F = np.clip(np.asarray(F, dtype=float), 0.0, None)
    s = F.sum(axis=1, keepdims=True)
    K = F.shape[1]
    return np.where(s > 0, F / np.where(s > 0, s, 1.0), 1.0 / K)


def write_rows(path, header, rows) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
