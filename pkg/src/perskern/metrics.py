"""Distances between point sets and persistence diagrams."""

from __future__ import annotations

import math

import numpy as np

from .diagrams import PersistenceDiagram

DEFAULT_DIRECTIONS = 50


def hausdorff(X, Y, norm: str = "sup") -> float:
    """Hausdorff distance between two finite point sets.

    ``norm`` is ``"sup"`` (the default) or ``"euclidean"``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.size == 0 or Y.size == 0:
        raise ValueError("Hausdorff distance needs two nonempty sets")
    if X.shape[1] != Y.shape[1]:
        raise ValueError("point sets live in different dimensions")
    diff = np.abs(X[:, None, :] - Y[None, :, :])
    if norm == "sup":
        d = diff.max(axis=2)
    elif norm == "euclidean":
        d = np.sqrt((diff ** 2).sum(axis=2))
    else:
        raise ValueError(f"unknown norm {norm!r}")
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def _finite_points(D: PersistenceDiagram, name: str) -> np.ndarray:
    if D.has_essential:
        raise ValueError(f"{name} has essential points; cap or drop them first")
    return D.as_array()


def _check_dims(D, E, pool_dims):
    if pool_dims:
        return
    dims = set(D.dims.tolist()) | set(E.dims.tolist())
    if len(dims) > 1:
        raise ValueError(f"diagrams mix homology dimensions {sorted(dims)}; filter first or pass pool_dims=True")


def diagonal_cost(P: np.ndarray) -> np.ndarray:
    """Sup-norm distance from each point to its diagonal projection."""
    return (P[:, 1] - P[:, 0]) / 2.0


def _sup_cost(P, Q):
    return np.maximum(np.abs(P[:, None, 0] - Q[None, :, 0]), np.abs(P[:, None, 1] - Q[None, :, 1]))


def _has_perfect_matching(adj: list, n_right: int) -> bool:
    match_right = [-1] * n_right

    def augment(u, seen):
        for v in adj[u]:
            if seen[v]:
                continue
            seen[v] = True
            if match_right[v] < 0 or augment(match_right[v], seen):
                match_right[v] = u
                return True
        return False

    for u in range(len(adj)):
        if not augment(u, [False] * n_right):
            return False
    return True


def bottleneck(D: PersistenceDiagram, E: PersistenceDiagram, pool_dims: bool = False) -> float:
    """Exact bottleneck distance under the sup-norm.

    Each side is augmented with the diagonal projections of the other
    side's points.  The answer is the smallest candidate cost for which the
    threshold graph has a perfect matching, found by binary search.
    """
    _check_dims(D, E, pool_dims)
    P = _finite_points(D, "first diagram")
    Q = _finite_points(E, "second diagram")
    n, m = len(P), len(Q)
    if n == 0 and m == 0:
        return 0.0
    cross = _sup_cost(P, Q)
    dp = diagonal_cost(P)
    dq = diagonal_cost(Q)
    candidates = np.unique(np.concatenate([cross.ravel(), dp, dq, [0.0]]))

    def feasible(c):
        # left: P then diag(Q); right: Q then diag(P)
        adj = []
        for i in range(n):
            row = np.flatnonzero(cross[i] <= c).tolist()
            if dp[i] <= c:
                row.append(m + i)
            adj.append(row)
        every_diag_p = list(range(m, m + n))
        for j in range(m):
            row = [j] if dq[j] <= c else []
            adj.append(row + every_diag_p)
        return _has_perfect_matching(adj, m + n)

    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(candidates[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(candidates[lo])


def wasserstein_1d(a, b) -> float:
    """Optimal transport cost between equal-size samples on the line."""
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if len(a) != len(b):
        raise ValueError(f"unequal masses: {len(a)} vs {len(b)}")
    # |a - b| = s*a - s*b with s = sign(a - b); summing the signed terms
    # with fsum rounds the exact total once
    s = np.where(a >= b, 1.0, -1.0)
    return math.fsum(np.concatenate([s * a, -s * b]).tolist())


def directions(M: int) -> np.ndarray:
    """Unit vectors at the midpoints of a uniform partition of [-pi/2, pi/2)."""
    if M < 1:
        raise ValueError("need at least one direction")
    theta = -np.pi / 2 + (np.arange(M) + 0.5) * np.pi / M
    return np.stack([np.cos(theta), np.sin(theta)])


def diagonal_projection(P: np.ndarray) -> np.ndarray:
    mid = (P[:, 0] + P[:, 1]) / 2.0
    return np.column_stack([mid, mid])


def sliced_projections(D: PersistenceDiagram, M: int = DEFAULT_DIRECTIONS) -> tuple:
    """Projections of a diagram and of its diagonal shadow onto the M lines.

    Returns two ``(|D|, M)`` arrays; the sliced distance between ``D`` and
    ``E`` only needs these per-diagram pieces, which lets Gram assembly
    project every diagram once.
    """
    P = _finite_points(D, "diagram")
    dirs = directions(M)
    return P @ dirs, diagonal_projection(P) @ dirs


def _sw_from_projections(pd, pdd, pe, ped) -> float:
    a = np.sort(np.concatenate([pd, ped]), axis=0)
    b = np.sort(np.concatenate([pe, pdd]), axis=0)
    M = a.shape[1]
    return float(np.abs(a - b).sum(axis=0).sum() / M)


def sliced_wasserstein(D: PersistenceDiagram, E: PersistenceDiagram, M: int = DEFAULT_DIRECTIONS) -> float:
    """Sliced Wasserstein distance, averaged over M directions of the half circle.

    By the antipodal symmetry of the 1-D transport cost this mean equals the
    normalised integral over the full circle.
    """
    pd, pdd = sliced_projections(D, M)
    pe, ped = sliced_projections(E, M)
    return _sw_from_projections(pd, pdd, pe, ped)
