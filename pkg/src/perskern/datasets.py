"""Dataset generation and loaders for the four sample families."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .filtrations import WeightedGraph

ORBIT_R_VALUES = (2.5, 3.5, 4.0, 4.1, 4.3)


class DataError(ValueError):
    """Malformed or missing input data."""


@dataclass
class LabeledCollection:
    samples: list
    labels: np.ndarray
    ids: list
    kind: str  # "point_clouds", "graphs", "images" or "time_series"

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if not (len(self.samples) == len(self.labels) == len(self.ids)):
            raise DataError("samples, labels and ids have different lengths")
        if len(self.samples) == 0:
            raise DataError("empty dataset")

    def __len__(self):
        return len(self.samples)


# ------------------------------------------------------------------ orbits

def orbit(x0: float, y0: float, r: float, n_points: int) -> np.ndarray:
    """One orbit of the linked twisted map; row 0 is the starting point."""
    return orbits_batch(np.array([x0]), np.array([y0]), r, n_points)[0]


def orbits_batch(x0: np.ndarray, y0: np.ndarray, r: float, n_points: int) -> np.ndarray:
    x = np.asarray(x0, dtype=np.float64).copy()
    y = np.asarray(y0, dtype=np.float64).copy()
    out = np.empty((len(x), n_points, 2))
    for k in range(n_points):
        if k:
            x = np.mod(x + r * y * (1.0 - y), 1.0)
            y = np.mod(y + r * x * (1.0 - x), 1.0)
        out[:, k, 0] = x
        out[:, k, 1] = y
    return out


def generate_orbits(r_values: Sequence[float] = ORBIT_R_VALUES, n_orbits: int = 50, n_points: int = 1000,
                    seed: int = 0) -> LabeledCollection:
    """Orbit clouds labelled by the index of their ``r``.

    Starting points come from ``numpy.random.default_rng(seed)`` (PCG64) as
    one ``(len(r_values), n_orbits, 2)`` uniform draw on ``[0, 1)``.
    """
    if len(r_values) == 0 or n_orbits < 1 or n_points < 1:
        raise ValueError("need r values and positive orbit/point counts")
    starts = np.random.default_rng(seed).random((len(r_values), n_orbits, 2))
    samples, labels, ids = [], [], []
    for c, r in enumerate(r_values):
        clouds = orbits_batch(starts[c, :, 0], starts[c, :, 1], float(r), n_points)
        for k in range(n_orbits):
            samples.append(clouds[k])
            labels.append(c)
            ids.append(f"r{c}_o{k}")
    return LabeledCollection(samples, np.asarray(labels), ids, "point_clouds")


# ------------------------------------------------------------- point clouds

def save_point_clouds(data: LabeledCollection, path) -> None:
    """One row per point: ``id,label,x0,x1,...``."""
    dim = data.samples[0].shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "label"] + [f"x{k}" for k in range(dim)])
        for sid, lab, pc in zip(data.ids, data.labels, data.samples):
            for p in pc:
                w.writerow([sid, int(lab)] + [repr(float(v)) for v in p])


def _open(path):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    return open(path, newline="")


def load_point_clouds(path) -> LabeledCollection:
    groups: dict = {}
    labels: dict = {}
    with _open(path) as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if not header or header[:2] != ["id", "label"]:
            raise DataError(f"{path}:1: expected header 'id,label,x0,...'")
        dim = len(header) - 2
        if dim < 1:
            raise DataError(f"{path}:1: no coordinate columns")
        for no, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != dim + 2:
                raise DataError(f"{path}:{no}: expected {dim + 2} fields, got {len(row)}")
            try:
                lab = int(row[1])
                p = [float(v) for v in row[2:]]
            except ValueError as exc:
                raise DataError(f"{path}:{no}: {exc}") from None
            if not all(math.isfinite(v) for v in p):
                raise DataError(f"{path}:{no}: non-finite coordinate")
            sid = row[0]
            if sid in labels and labels[sid] != lab:
                raise DataError(f"{path}:{no}: sample {sid} changes label")
            labels[sid] = lab
            groups.setdefault(sid, []).append(p)
    ids = list(groups)
    return LabeledCollection([np.asarray(groups[i]) for i in ids], [labels[i] for i in ids], ids, "point_clouds")


# ------------------------------------------------------------------ graphs

def _parse_header(tokens, path, no):
    fields = {}
    for tok in tokens:
        key, eq, value = tok.partition("=")
        if not eq:
            raise DataError(f"{path}:{no}: header token {tok!r} is not key=value")
        fields[key] = value
    try:
        n = int(fields["n"])
        label = int(fields.get("label", 0))
    except (KeyError, ValueError):
        raise DataError(f"{path}:{no}: header needs an integer n= (and optional integer label=)") from None
    return n, label, fields.get("id")


def load_graphs(path) -> LabeledCollection:
    """Edge-list blocks, each opened by a header line ``n=<vertices> [label=<int>] [id=<name>]``.

    Edge lines are ``u v [weight]`` (whitespace or comma separated);
    ``#`` starts a comment.
    """
    graphs, labels, ids = [], [], []
    cur = None

    def close():
        if cur is not None:
            n, label, gid, edges, no = cur
            try:
                graphs.append(WeightedGraph(n, edges))
            except ValueError as exc:
                raise DataError(f"{path}:{no}: {exc}") from None
            labels.append(label)
            ids.append(gid if gid is not None else f"g{len(ids)}")

    with _open(path) as fh:
        for no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.replace(",", " ").split()
            if "=" in tokens[0]:
                close()
                n, label, gid = _parse_header(tokens, path, no)
                cur = (n, label, gid, [], no)
                continue
            if cur is None:
                raise DataError(f"{path}:{no}: edge before any 'n=' header")
            if len(tokens) not in (2, 3):
                raise DataError(f"{path}:{no}: expected 'u v [weight]'")
            try:
                u, v = int(tokens[0]), int(tokens[1])
                w = float(tokens[2]) if len(tokens) == 3 else 1.0
            except ValueError as exc:
                raise DataError(f"{path}:{no}: {exc}") from None
            if not (0 <= u < cur[0] and 0 <= v < cur[0]):
                raise DataError(f"{path}:{no}: vertex out of range for n={cur[0]}")
            cur[3].append((u, v, w))
    close()
    return LabeledCollection(graphs, labels, ids, "graphs")


def save_graphs(data: LabeledCollection, path) -> None:
    with open(path, "w") as fh:
        for g, lab, gid in zip(data.samples, data.labels, data.ids):
            fh.write(f"n={g.n} label={int(lab)} id={gid}\n")
            for u, v, w in g.edges:
                fh.write(f"{u} {v} {w!r}\n")


# ------------------------------------------------------------------ images

def load_images(path, shape: Optional[tuple] = None) -> LabeledCollection:
    """CSV rows ``label,p0,p1,...`` in row-major pixel order.

    The image shape comes from ``shape``, a leading ``# shape=RxC`` comment,
    or else a square side.
    """
    images, labels = [], []
    with _open(path) as fh:
        for no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                body = text[1:].strip()
                if body.startswith("shape=") and shape is None:
                    try:
                        r, c = body[6:].lower().split("x")
                        shape = (int(r), int(c))
                    except ValueError:
                        raise DataError(f"{path}:{no}: bad shape comment {body!r}") from None
                continue
            fields = text.split(",")
            try:
                lab = int(fields[0])
                px = np.array([float(v) for v in fields[1:]])
            except ValueError as exc:
                raise DataError(f"{path}:{no}: {exc}") from None
            if shape is None:
                side = math.isqrt(len(px))
                if side * side != len(px):
                    raise DataError(f"{path}:{no}: {len(px)} pixels do not form a square; add '# shape=RxC'")
                shape = (side, side)
            if len(px) != shape[0] * shape[1]:
                raise DataError(f"{path}:{no}: expected {shape[0] * shape[1]} pixels, got {len(px)}")
            images.append(px.reshape(shape))
            labels.append(lab)
    return LabeledCollection(images, labels, [f"img{k}" for k in range(len(images))], "images")


# ------------------------------------------------------------- time series

def load_time_series(path) -> LabeledCollection:
    """UCR layout: one series per line, the first field is the class label.

    Fields are separated by tabs, commas or blanks.
    """
    series, labels = [], []
    with _open(path) as fh:
        for no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.replace(",", " ").split()
            try:
                lab = int(float(fields[0]))
                values = np.array([float(v) for v in fields[1:]])
            except ValueError as exc:
                raise DataError(f"{path}:{no}: {exc}") from None
            if len(values) == 0:
                raise DataError(f"{path}:{no}: series has no values")
            series.append(values)
            labels.append(lab)
    return LabeledCollection(series, labels, [f"ts{k}" for k in range(len(series))], "time_series")


LOADERS = {
    "point_clouds": load_point_clouds,
    "graphs": load_graphs,
    "images": load_images,
    "time_series": load_time_series,
}
