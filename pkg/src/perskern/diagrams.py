"""Persistence diagrams as multisets of (dim, birth, death) generators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

INF = math.inf


class DiagramPoint(NamedTuple):
    dim: int
    birth: float
    death: float

    def validate(self) -> "DiagramPoint":
        if self.dim < 0:
            raise ValueError(f"negative homology dimension {self.dim}")
        if not math.isfinite(self.birth):
            raise ValueError(f"birth must be finite, got {self.birth}")
        if math.isnan(self.death) or (math.isfinite(self.death) and self.death < self.birth):
            raise ValueError(f"death {self.death} precedes birth {self.birth}")
        return self


def persistence(p: DiagramPoint) -> float:
    """Lifespan ``death - birth``; ``inf`` for essential classes."""
    if math.isinf(p.death):
        return INF
    return p.death - p.birth


def project_to_diagonal(p: DiagramPoint) -> DiagramPoint:
    if math.isinf(p.death):
        raise ValueError("cannot project an essential point; cap it first")
    m = (p.birth + p.death) / 2.0
    return DiagramPoint(p.dim, m, m)


@dataclass(frozen=True)
class PersistenceDiagram:
    """Immutable multiset of diagram points.

    Points are stored column-wise in three arrays; the diagonal is never
    stored. Order is preserved by every operation in this module.
    """

    dims: np.ndarray
    births: np.ndarray
    deaths: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        dims = np.asarray(self.dims, dtype=np.int64).reshape(-1)
        births = np.asarray(self.births, dtype=np.float64).reshape(-1)
        deaths = np.asarray(self.deaths, dtype=np.float64).reshape(-1)
        if not (len(dims) == len(births) == len(deaths)):
            raise ValueError("dims, births and deaths must have the same length")
        if np.any(dims < 0):
            raise ValueError("negative homology dimension")
        if not np.all(np.isfinite(births)):
            raise ValueError("births must be finite")
        if np.any(np.isnan(deaths)):
            raise ValueError("NaN death")
        finite = np.isfinite(deaths)
        if np.any(deaths[finite] < births[finite]):
            raise ValueError("death precedes birth")
        for arr in (dims, births, deaths):
            arr.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "births", births)
        object.__setattr__(self, "deaths", deaths)

    @classmethod
    def from_points(cls, points: Iterable[Sequence[float]], source_id: str = "") -> "PersistenceDiagram":
        pts = [tuple(p) for p in points]
        if not pts:
            return cls.empty(source_id)
        dims, births, deaths = zip(*pts)
        return cls(np.array(dims), np.array(births, dtype=float), np.array(deaths, dtype=float), source_id)

    @classmethod
    def empty(cls, source_id: str = "") -> "PersistenceDiagram":
        return cls(np.zeros(0, np.int64), np.zeros(0), np.zeros(0), source_id)

    def __len__(self) -> int:
        return len(self.dims)

    def __iter__(self):
        for d, b, e in zip(self.dims.tolist(), self.births.tolist(), self.deaths.tolist()):
            yield DiagramPoint(d, b, e)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PersistenceDiagram):
            return NotImplemented
        return (
            np.array_equal(self.dims, other.dims)
            and np.array_equal(self.births, other.births)
            and np.array_equal(self.deaths, other.deaths)
        )

    def __hash__(self):
        return hash((self.dims.tobytes(), self.births.tobytes(), self.deaths.tobytes()))

    @property
    def points(self) -> list:
        return list(self)

    @property
    def persistence(self) -> np.ndarray:
        return self.deaths - self.births

    @property
    def has_essential(self) -> bool:
        return bool(np.any(np.isinf(self.deaths)))

    def as_array(self) -> np.ndarray:
        """(n, 2) array of (birth, death) rows, dimension dropped."""
        return np.column_stack([self.births, self.deaths]) if len(self) else np.zeros((0, 2))

    def take(self, idx) -> "PersistenceDiagram":
        idx = np.asarray(idx, dtype=np.int64)
        return PersistenceDiagram(self.dims[idx], self.births[idx], self.deaths[idx], self.source_id)

    def with_source(self, source_id: str) -> "PersistenceDiagram":
        return PersistenceDiagram(self.dims, self.births, self.deaths, source_id)


def cap_infinite(D: PersistenceDiagram, cap: float) -> PersistenceDiagram:
    finite = np.isfinite(D.deaths)
    if len(D):
        top = max(D.deaths[finite].max(initial=-INF), D.births.max())
        if cap < top:
            raise ValueError(f"cap {cap} is below the largest finite value {top}")
    deaths = np.where(finite, D.deaths, cap)
    return PersistenceDiagram(D.dims, D.births, deaths, D.source_id)


def filter_dimension(D: PersistenceDiagram, r: int) -> PersistenceDiagram:
    if r < 0:
        raise ValueError("dimension must be non-negative")
    return D.take(np.flatnonzero(D.dims == r))


def top_k_by_persistence(D: PersistenceDiagram, k: int) -> PersistenceDiagram:
    """Keep the ``k`` most persistent points.

    Ties on persistence go to the lexicographically smaller
    ``(birth, death, dim)``; essential points outrank every finite one.
    The survivors keep their original relative order.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if len(D) <= k:
        return D
    # np.lexsort sorts by the last key first
    order = np.lexsort((D.dims, D.deaths, D.births, -D.persistence))
    return D.take(np.sort(order[:k]))


def concatenate(diagrams: Sequence[PersistenceDiagram], source_id: str = "") -> PersistenceDiagram:
    if not diagrams:
        return PersistenceDiagram.empty(source_id)
    return PersistenceDiagram(
        np.concatenate([d.dims for d in diagrams]),
        np.concatenate([d.births for d in diagrams]),
        np.concatenate([d.deaths for d in diagrams]),
        source_id or diagrams[0].source_id,
    )


# --- text format: one "dim,birth,death" per line, "inf" for essential classes

def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else repr(float(x))


def dumps(D: PersistenceDiagram) -> str:
    lines = []
    if D.source_id:
        lines.append(f"# source: {D.source_id}")
    lines.extend(f"{d},{_fmt(b)},{_fmt(e)}" for d, b, e in D)
    return "\n".join(lines) + "\n"


def loads(text: str, source_id: str = "") -> PersistenceDiagram:
    pts = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if not source_id and line[1:].strip().startswith("source:"):
                source_id = line.split("source:", 1)[1].strip()
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 3:
            raise ValueError(f"line {lineno}: expected 'dim,birth,death', got {raw!r}")
        try:
            pt = DiagramPoint(int(fields[0]), float(fields[1]), float(fields[2])).validate()
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        pts.append(pt)
    return PersistenceDiagram.from_points(pts, source_id)


def save(D: PersistenceDiagram, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps(D))


def load(path: Union[str, Path]) -> PersistenceDiagram:
    path = Path(path)
    return loads(path.read_text(), source_id="")
