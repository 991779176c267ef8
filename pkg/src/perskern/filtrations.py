"""Builders turning raw data into filtered complexes.

Point clouds are ``(n, d)`` float arrays, images are 2-D arrays and time
series are 1-D arrays; only graphs get a dedicated container.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

SIMPLICIAL = "simplicial"
CUBICAL = "cubical"


@dataclass(frozen=True)
class FilteredComplex:
    """Cells with monotone filtration values.

    ``cells[i]`` is the ascending vertex tuple of cell ``i``; for cubical
    complexes the vertices index the corner lattice of the pixel grid.
    """

    cells: tuple
    dims: np.ndarray
    values: np.ndarray
    kind: str = SIMPLICIAL

    def __len__(self) -> int:
        return len(self.cells)

    @classmethod
    def from_cells(cls, cells: Iterable, kind: str = SIMPLICIAL) -> "FilteredComplex":
        """Build from ``(vertices, dim, value)`` triples."""
        cells = list(cells)
        verts = tuple(tuple(sorted(int(v) for v in c[0])) for c in cells)
        dims = np.array([c[1] for c in cells], dtype=np.int64)
        values = np.array([c[2] for c in cells], dtype=np.float64)
        return cls(verts, dims, values, kind)

    def faces(self, i: int, index: Optional[dict] = None) -> list:
        """Indices of the codimension-1 faces of cell ``i``."""
        if index is None:
            index = self.index()
        cell = self.cells[i]
        if self.dims[i] == 0:
            return []
        if self.kind == SIMPLICIAL:
            candidates = itertools.combinations(cell, len(cell) - 1)
        else:
            # a k-cube has 2**k corners and its facets are the cells on half of them
            candidates = itertools.combinations(cell, len(cell) // 2)
        out = []
        for face in candidates:
            j = index.get(face)
            if j is not None and self.dims[j] == self.dims[i] - 1:
                out.append(j)
        return out

    def index(self) -> dict:
        return {c: i for i, c in enumerate(self.cells)}

    def check_monotone(self) -> None:
        """Raise ``ValueError`` naming the first face/coface pair out of order.

        Also rejects cells whose facets are missing from the complex.
        """
        index = self.index()
        for i, cell in enumerate(self.cells):
            d = int(self.dims[i])
            if d == 0:
                continue
            faces = self.faces(i, index)
            expected = d + 1 if self.kind == SIMPLICIAL else 2 * d
            if len(faces) != expected:
                raise ValueError(f"cell {cell} is missing facets ({len(faces)} of {expected} present)")
            for j in faces:
                if self.values[j] > self.values[i]:
                    raise ValueError(
                        f"face {self.cells[j]} (value {self.values[j]}) enters after "
                        f"coface {cell} (value {self.values[i]})"
                    )

    def subcomplex(self, scale: float) -> "FilteredComplex":
        keep = np.flatnonzero(self.values <= scale)
        return FilteredComplex(
            tuple(self.cells[i] for i in keep), self.dims[keep], self.values[keep], self.kind
        )


# ---------------------------------------------------------------- point clouds

def as_point_cloud(points) -> np.ndarray:
    pc = np.asarray(points, dtype=np.float64)
    if pc.ndim == 1:
        pc = pc.reshape(-1, 1)
    if pc.ndim != 2 or pc.shape[1] < 1:
        raise ValueError(f"point cloud must be a 2-D array, got shape {pc.shape}")
    if not np.all(np.isfinite(pc)):
        raise ValueError("point cloud has non-finite coordinates")
    return pc


def pairwise_distances(pc: np.ndarray, metric: str = "euclidean") -> np.ndarray:
    diff = pc[:, None, :] - pc[None, :, :]
    if metric == "euclidean":
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    if metric == "chebyshev":
        return np.abs(diff).max(axis=2) if pc.shape[1] else np.zeros((len(pc), len(pc)))
    raise ValueError(f"unknown metric {metric!r}")


def _scale_factor(scale: str) -> float:
    # "diameter" records the edge length d; "radius" records eps with d <= 2 eps
    if scale == "diameter":
        return 1.0
    if scale == "radius":
        return 0.5
    raise ValueError(f"unknown scale convention {scale!r}")


def vietoris_rips(
    points,
    max_dim: int = 1,
    max_scale: float = math.inf,
    metric: str = "euclidean",
    scale: str = "diameter",
) -> FilteredComplex:
    """Vietoris-Rips complex with simplices up to dimension ``max_dim + 1``.

    Each simplex enters at its diameter (times 0.5 under the ``"radius"``
    convention); simplices above ``max_scale`` are left out.  Clique
    enumeration is exhaustive, so this is meant for small clouds; large
    clouds should go through :func:`perskern.persistence.rips_diagram`.
    """
    pc = as_point_cloud(points)
    if len(pc) == 0:
        raise ValueError("empty point cloud")
    if max_dim < 0:
        raise ValueError("max_dim must be non-negative")
    if not max_scale > 0:
        raise ValueError("max_scale must be positive")
    factor = _scale_factor(scale)
    dist = pairwise_distances(pc, metric) * factor
    n = len(pc)
    adj = dist <= max_scale
    nbrs = [set(np.flatnonzero(adj[i]).tolist()) - {i} for i in range(n)]

    cells = [((i,), 0, 0.0) for i in range(n)]
    top = max_dim + 1

    def extend(simplex, value, candidates):
        # candidates: common neighbours with index above simplex[-1]
        for v in sorted(candidates):
            new_value = max(value, max(dist[u, v] for u in simplex))
            cells.append((simplex + (v,), len(simplex), float(new_value)))
            if len(simplex) < top:
                extend(simplex + (v,), new_value, {w for w in candidates & nbrs[v] if w > v})

    if top >= 1:
        for i in range(n):
            extend((i,), 0.0, {w for w in nbrs[i] if w > i})
    return FilteredComplex.from_cells(cells)


# ---------------------------------------------------------------------- graphs

@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph on vertices ``0..n-1``; edges stored as ``(u, v, w)`` with ``u < v``."""

    n: int
    edges: tuple = ()
    scheme: str = "raw"

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("vertex count must be non-negative")
        seen = {}
        for e in self.edges:
            u, v = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if u == v:
                raise ValueError(f"self loop at vertex {u}")
            u, v = min(u, v), max(u, v)
            if not (0 <= u < v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
            if (u, v) in seen:
                raise ValueError(f"duplicate edge ({u}, {v})")
            if not math.isfinite(w):
                raise ValueError(f"non-finite weight on edge ({u}, {v})")
            seen[(u, v)] = w
        object.__setattr__(self, "edges", tuple((u, v, w) for (u, v), w in sorted(seen.items())))

    def neighbors(self) -> list:
        nb = [set() for _ in range(self.n)]
        for u, v, _ in self.edges:
            nb[u].add(v)
            nb[v].add(u)
        return nb


def graph_sublevel_filtration(
    g: WeightedGraph, include_triangles: bool = False, vertex_birth: str = "min_incident"
) -> FilteredComplex:
    if vertex_birth not in ("min_incident", "zero"):
        raise ValueError(f"unknown vertex_birth rule {vertex_birth!r}")
    vval = [math.inf] * g.n
    weight = {}
    for u, v, w in g.edges:
        weight[(u, v)] = w
        vval[u] = min(vval[u], w)
        vval[v] = min(vval[v], w)
    if vertex_birth == "zero":
        vval = [0.0] * g.n
    else:
        vval = [0.0 if math.isinf(x) else x for x in vval]
    cells = [((i,), 0, vval[i]) for i in range(g.n)]
    cells += [((u, v), 1, max(w, vval[u], vval[v])) for (u, v), w in weight.items()]
    if include_triangles:
        nb = g.neighbors()
        for u, v, w in g.edges:
            for x in sorted(nb[u] & nb[v]):
                if x > v:
                    cells.append(((u, v, x), 2, max(w, weight[(u, x)], weight[(v, x)])))
    return FilteredComplex.from_cells(cells)


def shortest_path_weights(g: WeightedGraph) -> WeightedGraph:
    """Complete graph per connected component weighted by hop distance."""
    nb = g.neighbors()
    edges = []
    for s in range(g.n):
        dist = {s: 0}
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for y in nb[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        edges.extend((s, t, float(d)) for t, d in dist.items() if t > s)
    return WeightedGraph(g.n, tuple(edges), scheme="shortest_path")


def jaccard_weights(g: WeightedGraph, complement: bool = True) -> WeightedGraph:
    """Jaccard index of the endpoint neighbourhoods on every edge.

    With ``complement`` (the default) the stored weight is ``1 - J`` so
    that edges between similar vertices enter the sub-level filtration
    first.
    """
    nb = g.neighbors()
    edges = []
    for u, v, _ in g.edges:
        union = nb[u] | nb[v]
        j = len(nb[u] & nb[v]) / len(union) if union else 0.0
        edges.append((u, v, 1.0 - j if complement else j))
    return WeightedGraph(g.n, tuple(edges), scheme="one_minus_jaccard" if complement else "jaccard")


# ---------------------------------------------------------------------- images

def binarize(img, threshold: float = 127.0) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    return (img > threshold).astype(np.int8)


def height_values(binary, v: Sequence[float], h_inf: Optional[float] = None) -> np.ndarray:
    """Per-pixel height ``<(row, col), v>`` on the foreground, ``h_inf`` elsewhere."""
    binary = np.asarray(binary)
    if binary.ndim != 2:
        raise ValueError("image must be 2-D")
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (2,) or abs(np.hypot(v[0], v[1]) - 1.0) > 1e-12:
        raise ValueError(f"direction {v.tolist()} is not a unit 2-vector")
    rows, cols = binary.shape
    if h_inf is None:
        h_inf = 2.0 * (rows + cols)
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    heights = rr * v[0] + cc * v[1]
    if heights.size and h_inf <= heights.max():
        raise ValueError(f"h_inf={h_inf} does not exceed the largest height {heights.max()}")
    return np.where(binary != 0, heights, float(h_inf))


def cubical_complex(top_values) -> FilteredComplex:
    """Cubical complex of a pixel grid; lower cells take the min of their pixels.

    Pixel ``(r, c)`` is the square with lattice corners ``(r, c)`` to
    ``(r+1, c+1)``; corner ``(i, j)`` has vertex id ``i * (cols + 1) + j``.
    """
    vals = np.asarray(top_values, dtype=np.float64)
    if vals.ndim != 2:
        raise ValueError("expected a 2-D grid of pixel values")
    rows, cols = vals.shape
    w = cols + 1
    padded = np.full((rows + 2, cols + 2), np.inf)
    padded[1:-1, 1:-1] = vals

    def vid(i, j):
        return i * w + j

    cells = []
    # corner (i, j) touches pixels (i-1..i, j-1..j) -> padded (i..i+1, j..j+1)
    for i in range(rows + 1):
        for j in range(cols + 1):
            cells.append(((vid(i, j),), 0, padded[i:i + 2, j:j + 2].min()))
    for i in range(rows + 1):
        for j in range(cols):
            # horizontal edge touches pixels (i-1, j) and (i, j)
            cells.append(((vid(i, j), vid(i, j + 1)), 1, min(padded[i, j + 1], padded[i + 1, j + 1])))
    for i in range(rows):
        for j in range(cols + 1):
            cells.append(((vid(i, j), vid(i + 1, j)), 1, min(padded[i + 1, j], padded[i + 1, j + 1])))
    for i in range(rows):
        for j in range(cols):
            corners = (vid(i, j), vid(i, j + 1), vid(i + 1, j), vid(i + 1, j + 1))
            cells.append((corners, 2, vals[i, j]))
    return FilteredComplex.from_cells(cells, kind=CUBICAL)


def height_filtration(binary, v: Sequence[float], h_inf: Optional[float] = None) -> FilteredComplex:
    return cubical_complex(height_values(binary, v, h_inf))


# ----------------------------------------------------------------- time series

def takens_embedding(ts, delay: int, edim: int) -> np.ndarray:
    x = np.asarray(ts, dtype=np.float64).reshape(-1)
    if delay < 1 or edim < 1:
        raise ValueError("delay and embedding dimension must be at least 1")
    if not np.all(np.isfinite(x)):
        raise ValueError("time series has non-finite samples")
    count = len(x) - (edim - 1) * delay
    if count < 1:
        raise ValueError(
            f"series of length {len(x)} too short for delay={delay}, edim={edim}"
        )
    idx = np.arange(count)[:, None] + delay * np.arange(edim)[None, :]
    return x[idx]
