"""Boundary-matrix reduction over GF(2) and diagram extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .diagrams import PersistenceDiagram
from .filtrations import FilteredComplex, SIMPLICIAL, as_point_cloud, pairwise_distances, _scale_factor


@dataclass(frozen=True)
class OrderedComplex:
    """Cells sorted by (value, dim, vertex tuple); faces precede cofaces."""

    cells: tuple
    dims: np.ndarray
    values: np.ndarray
    kind: str
    order: np.ndarray  # order[k] = index of the k-th cell in the source complex

    def __len__(self):
        return len(self.cells)

    def index(self) -> dict:
        return {c: i for i, c in enumerate(self.cells)}


@dataclass(frozen=True)
class PairingResult:
    pairs: tuple  # (birth position, death position)
    essentials: tuple  # birth positions


def order_cells(fc: FilteredComplex, check: bool = True) -> OrderedComplex:
    if check:
        fc.check_monotone()
    order = sorted(range(len(fc)), key=lambda i: (fc.values[i], fc.dims[i], fc.cells[i]))
    order = np.asarray(order, dtype=np.int64)
    return OrderedComplex(
        tuple(fc.cells[i] for i in order),
        fc.dims[order] if len(order) else fc.dims.copy(),
        fc.values[order] if len(order) else fc.values.copy(),
        fc.kind,
        order,
    )


def boundary_matrix(oc: OrderedComplex) -> list:
    """Sparse GF(2) columns: sorted positions of each cell's facets."""
    view = FilteredComplex(oc.cells, oc.dims, oc.values, oc.kind)
    index = oc.index()
    return [sorted(view.faces(j, index)) for j in range(len(oc))]


def reduce(columns: list, dims: Optional[np.ndarray] = None, clearing: bool = False) -> PairingResult:
    """Left-to-right column reduction with lowest-one pivots.

    With ``clearing`` (which needs ``dims``) columns are processed from the
    top dimension down and any column whose index is already a pivot is
    zeroed without work.  The pairing is identical either way.
    """
    n = len(columns)
    pivot_of = {}  # lowest row -> column
    low = [-1] * n
    if clearing:
        if dims is None:
            raise ValueError("clearing needs cell dimensions")
        dims = np.asarray(dims)
        batches = [np.flatnonzero(dims == d).tolist() for d in sorted(set(dims.tolist()), reverse=True)]
    else:
        batches = [range(n)]
    reduced = [None] * n
    cleared = set()
    for batch in batches:
        for j in batch:
            if j in cleared:
                continue
            col = set(columns[j])
            while col:
                p = max(col)
                k = pivot_of.get(p)
                if k is None:
                    break
                col ^= reduced[k]
            if col:
                p = max(col)
                pivot_of[p] = j
                low[j] = p
                reduced[j] = col
                if clearing:
                    cleared.add(p)
    paired = set(pivot_of)
    pairs = sorted((p, j) for p, j in pivot_of.items())
    essentials = tuple(j for j in range(n) if low[j] < 0 and j not in paired)
    return PairingResult(tuple(pairs), essentials)


def extract_diagram(oc: OrderedComplex, pr: PairingResult, source_id: str = "") -> PersistenceDiagram:
    """Points ordered by (dim, birth position); zero-persistence pairs dropped."""
    rows = []
    for b, d in pr.pairs:
        if oc.values[d] > oc.values[b]:
            rows.append((int(oc.dims[b]), b, oc.values[b], oc.values[d]))
    for b in pr.essentials:
        rows.append((int(oc.dims[b]), b, oc.values[b], math.inf))
    rows.sort(key=lambda r: (r[0], r[1]))
    return PersistenceDiagram.from_points([(r[0], r[2], r[3]) for r in rows], source_id)


def compute_diagram(fc: FilteredComplex, max_dim: Optional[int] = None, clearing: bool = True,
                    source_id: str = "") -> PersistenceDiagram:
    """Order, reduce and extract; optionally keep dimensions ``<= max_dim``."""
    oc = order_cells(fc)
    pr = reduce(boundary_matrix(oc), oc.dims, clearing=clearing)
    D = extract_diagram(oc, pr, source_id)
    if max_dim is not None:
        D = D.take(np.flatnonzero(D.dims <= max_dim))
    return D


# -------------------------------------------------------------------- oracle

def _gf2_rank(m: np.ndarray) -> int:
    m = m.copy().astype(bool)
    rank = 0
    rows, cols = m.shape
    for c in range(cols):
        hits = np.flatnonzero(m[rank:, c])
        if len(hits) == 0:
            continue
        r = rank + hits[0]
        if r != rank:
            m[[rank, r]] = m[[r, rank]]
        below = np.flatnonzero(m[:, c])
        below = below[below != rank]
        m[below] ^= m[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def betti_oracle(fc: FilteredComplex, scale: float, max_cells: int = 2000) -> list:
    """Betti numbers of the sub-complex at ``scale`` by dense GF(2) ranks."""
    sub = fc.subcomplex(scale)
    if len(sub) > max_cells:
        raise ValueError(f"complex has {len(sub)} cells, oracle limit is {max_cells}")
    if len(sub) == 0:
        return []
    top = int(fc.dims.max())
    index = sub.index()
    by_dim = [np.flatnonzero(sub.dims == k) for k in range(top + 2)]
    pos = {}
    for k in range(top + 1):
        for r, i in enumerate(by_dim[k]):
            pos[i] = r
    ranks = [0] * (top + 2)
    for k in range(1, top + 1):
        m = np.zeros((len(by_dim[k - 1]), len(by_dim[k])), dtype=bool)
        for c, i in enumerate(by_dim[k]):
            for j in sub.faces(i, index):
                m[pos[j], c] = True
        ranks[k] = _gf2_rank(m) if m.size else 0
    return [len(by_dim[k]) - ranks[k] - ranks[k + 1] for k in range(top + 1)]


def betti_from_diagram(D: PersistenceDiagram, scale: float, top: int) -> list:
    alive = (D.births <= scale) & (scale < D.deaths)
    return [int(np.sum(alive & (D.dims == k))) for k in range(top + 1)]


# ------------------------------------------------------- Vietoris-Rips fast path

def rips_diagram(points, max_dim: int = 1, max_scale: float = math.inf, metric: str = "euclidean",
                 scale: str = "diameter", source_id: str = "") -> PersistenceDiagram:
    """Rips persistence through ``max_dim`` without building the complex.

    Dimensions 0 and 1 use union-find plus a compiled cohomology reduction
    with clearing; the result equals
    ``compute_diagram(vietoris_rips(...), max_dim)`` point for point.
    Higher ``max_dim`` falls back to the explicit complex.
    """
    pc = as_point_cloud(points)
    if len(pc) == 0:
        raise ValueError("empty point cloud")
    if max_dim > 1:
        from .filtrations import vietoris_rips

        fc = vietoris_rips(pc, max_dim, max_scale, metric, scale)
        return compute_diagram(fc, max_dim=max_dim, source_id=source_id)
    dist = pairwise_distances(pc, metric) * _scale_factor(scale)
    from ._rips import rips_pairs

    rows = rips_pairs(dist, float(max_scale), max_dim)
    return PersistenceDiagram.from_points(rows, source_id)
