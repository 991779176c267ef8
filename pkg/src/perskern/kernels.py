"""Persistence kernels, Gram assembly and Gram conditioning.

All kernels act on finite diagrams (cap essential points first).  Pair
evaluations sum with :func:`math.fsum`, which makes every kernel exactly
symmetric in its two arguments.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .diagrams import PersistenceDiagram, filter_dimension
from .linalg import jacobi_eigenvalues
from .metrics import (DEFAULT_DIRECTIONS, _finite_points, _sw_from_projections, diagonal_projection,
                      sliced_projections, sliced_wasserstein)

KINDS = ("pssk", "pwgk", "swk", "pfk", "pi")

_REQUIRED = {
    "pssk": ("sigma",),
    "pwgk": ("rho", "tau", "p", "cw"),
    "swk": ("eta",),
    "pfk": ("sigma", "t"),
    "pi": ("sigma",),
}
_DEFAULTS = {
    "swk": {"M": DEFAULT_DIRECTIONS},
    "pi": {"pixel": 0.1, "b": None, "bounds": None},
}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel variant plus its parameters.

    ``dims`` selects per-dimension evaluation: the kernel value becomes the
    sum of the kernel on each listed dimension's sub-diagrams.  ``None``
    evaluates on the total diagram.
    """

    kind: str
    params: dict = field(default_factory=dict)
    dims: Optional[tuple] = None

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KINDS:
            raise ValueError(f"unknown kernel {self.kind!r}; expected one of {KINDS}")
        params = dict(_DEFAULTS.get(kind, {}))
        params.update(self.params)
        missing = [k for k in _REQUIRED[kind] if k not in params]
        if missing:
            raise ValueError(f"{kind} needs parameters {missing}")
        unknown = set(params) - set(_REQUIRED[kind]) - set(_DEFAULTS.get(kind, {}))
        if unknown:
            raise ValueError(f"{kind} does not take parameters {sorted(unknown)}")
        for name in _REQUIRED[kind]:
            if not params[name] > 0:
                raise ValueError(f"{kind}: {name} must be positive, got {params[name]}")
        if kind == "pwgk" and params["p"] < 1:
            raise ValueError("pwgk: weight exponent p must be >= 1")
        if kind == "swk" and int(params["M"]) < 1:
            raise ValueError("swk: need at least one direction")
        if kind == "pi":
            if not params["pixel"] > 0:
                raise ValueError("pi: pixel size must be positive")
            if params["b"] is not None and not params["b"] > 0:
                raise ValueError("pi: weight cutoff b must be positive")
            if params["bounds"] is not None:
                params["bounds"] = tuple(float(x) for x in params["bounds"])
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", params)
        if self.dims is not None:
            object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    def __hash__(self):
        return hash((self.kind, tuple(sorted(self.params.items())), self.dims))

    def replace(self, **params) -> "KernelSpec":
        merged = dict(self.params)
        merged.update(params)
        return KernelSpec(self.kind, merged, self.dims)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "params": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()}}
        if self.dims is not None:
            out["dims"] = list(self.dims)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(d["kind"], dict(d.get("params", {})), d.get("dims"))

    def label(self) -> str:
        shown = {k: v for k, v in self.params.items() if k not in ("bounds",)}
        return self.kind + "(" + ", ".join(f"{k}={v}" for k, v in sorted(shown.items())) + ")"


def _pts(D) -> np.ndarray:
    if isinstance(D, PersistenceDiagram):
        return _finite_points(D, "diagram")
    P = np.asarray(D, dtype=np.float64).reshape(-1, 2)
    if not np.all(np.isfinite(P)):
        raise ValueError("diagram has non-finite coordinates; cap it first")
    return P


def _sqdist(P, Q):
    return (P[:, None, 0] - Q[None, :, 0]) ** 2 + (P[:, None, 1] - Q[None, :, 1]) ** 2


# ------------------------------------------------------------------------ PSSK

def _pss_pair(P, Q, sigma):
    if len(P) == 0 or len(Q) == 0:
        return 0.0
    Qbar = Q[:, ::-1]
    terms = np.exp(-_sqdist(P, Q) / (8.0 * sigma)) - np.exp(-_sqdist(P, Qbar) / (8.0 * sigma))
    return math.fsum(terms.ravel().tolist()) / (8.0 * math.pi * sigma)


def k_pss(D, E, sigma: float) -> float:
    """Persistence scale-space kernel (heat diffusion with a diagonal sink)."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return _pss_pair(_pts(D), _pts(E), sigma)


# ------------------------------------------------------------------------ PWGK

def pwgk_weight(x, cw: float, p: float) -> float:
    """Persistence weight ``arctan(cw * pers**p)`` of one point ``(birth, death)`` or DiagramPoint."""
    birth, death = (x.birth, x.death) if hasattr(x, "birth") else (x[0], x[1])
    return math.atan(cw * (death - birth) ** p)


def _pwgk_weights(P, cw, p):
    return np.arctan(cw * (P[:, 1] - P[:, 0]) ** p)


def _pwgk_inner(P, Q, rho, cw, p):
    if len(P) == 0 or len(Q) == 0:
        return 0.0
    wp = _pwgk_weights(P, cw, p)
    wq = _pwgk_weights(Q, cw, p)
    terms = wp[:, None] * wq[None, :] * np.exp(-_sqdist(P, Q) / (2.0 * rho * rho))
    return math.fsum(terms.ravel().tolist())


def pwgk_embedding_inner(D, E, rho: float, cw: float, p: float) -> float:
    if not rho > 0:
        raise ValueError("rho must be positive")
    return _pwgk_inner(_pts(D), _pts(E), rho, cw, p)


def _pwgk_from_inner(dd, ee, de, tau):
    sq = max(dd + ee - 2.0 * de, 0.0)
    return math.exp(-sq / (2.0 * tau * tau))


def k_pwg(D, E, rho: float, tau: float, cw: float, p: float) -> float:
    """Persistence weighted Gaussian kernel on the RKHS embeddings."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    P, Q = _pts(D), _pts(E)
    dd = pwgk_embedding_inner(P, P, rho, cw, p)
    ee = pwgk_embedding_inner(Q, Q, rho, cw, p)
    de = pwgk_embedding_inner(P, Q, rho, cw, p)
    return _pwgk_from_inner(dd, ee, de, tau)


# ------------------------------------------------------------------------- SWK

def k_sw(D, E, eta: float, M: int = DEFAULT_DIRECTIONS) -> float:
    if not eta > 0:
        raise ValueError("eta must be positive")
    return math.exp(-sliced_wasserstein(D, E, M) / (2.0 * eta * eta))


# ------------------------------------------------------------------------- PFK

def _fisher_pair(P, Q, sigma):
    if len(P) == 0 and len(Q) == 0:
        raise ValueError("Fisher distance between two empty diagrams is undefined")
    A = np.concatenate([P, diagonal_projection(Q)])
    B = np.concatenate([Q, diagonal_projection(P)])
    theta = np.concatenate([A, B])
    # Gaussian with covariance sigma * I; normalising constants cancel
    va = np.exp(-_sqdist(theta, A) / (2.0 * sigma))
    vb = np.exp(-_sqdist(theta, B) / (2.0 * sigma))
    va = np.array([math.fsum(r) for r in va.tolist()])
    vb = np.array([math.fsum(r) for r in vb.tolist()])
    num = math.fsum(np.sqrt(va * vb).tolist())
    bc = num / math.sqrt(math.fsum(va.tolist()) * math.fsum(vb.tolist()))
    return math.acos(min(max(bc, 0.0), 1.0))


def fisher_distance(D, E, sigma: float) -> float:
    """Fisher information metric between the smoothed, diagonal-augmented diagrams.

    Both mixtures are evaluated and normalised on the support set formed by
    every point of the two augmented diagrams.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return _fisher_pair(_pts(D), _pts(E), sigma)


def k_pf(D, E, t: float, sigma: float) -> float:
    if not t > 0:
        raise ValueError("t must be positive")
    return math.exp(-t * fisher_distance(D, E, sigma))


# -------------------------------------------------------------------------- PI

def pi_weight(t, b: float):
    """Piecewise-linear ramp: 0 below 0, t/b on (0, b), 1 from b on."""
    return np.clip(np.asarray(t, dtype=np.float64) / b, 0.0, 1.0)


@dataclass(frozen=True)
class PersistenceImage:
    values: np.ndarray  # flattened row-major; rows run over persistence, columns over birth
    shape: tuple
    bounds: tuple  # (birth_min, birth_max, pers_min, pers_max)
    pixel: float
    clipped: bool


def _edges(lo, hi, pixel):
    count = max(int(math.ceil((hi - lo) / pixel - 1e-9)), 1)
    return lo + pixel * np.arange(count + 1)


def _interval_masses(centers, edges, sigma):
    """Gaussian mass of each cell ``[edges[k], edges[k+1]]`` for every centre.

    Tails are differenced on the side away from the centre to keep precision.
    """
    z = (edges[None, :] - centers[:, None]) / sigma
    za, zb = z[:, :-1], z[:, 1:]
    left = ndtr(zb) - ndtr(za)
    right = ndtr(-za) - ndtr(-zb)
    straddle = 1.0 - ndtr(za) - ndtr(-zb)
    m = np.where(zb <= 0, left, np.where(za >= 0, right, straddle))
    return np.maximum(m, 0.0)


def fit_pi_grid(diagrams: Sequence, sigma: float, margin: float = 3.0) -> tuple:
    """Bounding box of the birth/persistence coordinates grown by ``margin * sigma``."""
    pts = [_pts(D) for D in diagrams]
    pts = [P for P in pts if len(P)]
    if not pts:
        return (-margin * sigma, margin * sigma, -margin * sigma, margin * sigma)
    P = np.concatenate(pts)
    births, pers = P[:, 0], P[:, 1] - P[:, 0]
    pad = margin * sigma
    return (births.min() - pad, births.max() + pad, pers.min() - pad, pers.max() + pad)


def fit_pi_cutoff(diagrams: Sequence) -> float:
    pers = [(_pts(D)[:, 1] - _pts(D)[:, 0]) for D in diagrams]
    top = max((float(p.max()) for p in pers if len(p)), default=0.0)
    return top if top > 0 else 1.0


def _pi_factors(P, sigma, pixel, b, bounds):
    bx0, bx1, by0, by1 = bounds
    ex = _edges(bx0, bx1, pixel)
    ey = _edges(by0, by1, pixel)
    births, pers = P[:, 0], P[:, 1] - P[:, 0]
    w = pi_weight(pers, b)
    Ix = _interval_masses(births, ex, sigma)
    Iy = _interval_masses(pers, ey, sigma)
    return w, Ix, Iy


def persistence_image(D, sigma: float, pixel: float = 0.1, b: Optional[float] = None,
                      bounds: Optional[tuple] = None) -> PersistenceImage:
    """Exact pixel integrals of the weighted Gaussian persistence surface."""
    if not pixel > 0:
        raise ValueError("pixel size must be positive")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    P = _pts(D)
    if bounds is None:
        bounds = fit_pi_grid([P], sigma)
    if b is None:
        b = fit_pi_cutoff([P])
    w, Ix, Iy = _pi_factors(P, sigma, pixel, b, bounds)
    shape = (Iy.shape[1], Ix.shape[1])
    img = (Iy * w[:, None]).T @ Ix if len(P) else np.zeros(shape)
    bx0, bx1, by0, by1 = bounds
    births, pers = P[:, 0], P[:, 1] - P[:, 0]
    clipped = bool(np.any((births < bx0) | (births > bx1) | (pers < by0) | (pers > by1)))
    return PersistenceImage(img.ravel(), shape, tuple(bounds), pixel, clipped)


def k_pi(D, E, sigma: float, pixel: float = 0.1, b: Optional[float] = None,
         bounds: Optional[tuple] = None) -> float:
    """Dot product of the two persistence images on one shared grid.

    When ``bounds``/``b`` are omitted they are fitted on ``D`` and ``E``
    together.
    """
    if bounds is None:
        bounds = fit_pi_grid([D, E], sigma)
    if b is None:
        b = fit_pi_cutoff([D, E])
    u = persistence_image(D, sigma, pixel, b, bounds)
    v = persistence_image(E, sigma, pixel, b, bounds)
    if u.shape != v.shape:
        raise ValueError(f"image grids differ: {u.shape} vs {v.shape}")
    return math.fsum((u.values * v.values).tolist())


# --------------------------------------------------------------- kernel dispatch

def _split_dims(D, dims):
    return [filter_dimension(D, d) for d in dims]


def kernel(D, E, spec: KernelSpec) -> float:
    """Evaluate ``spec`` on one pair of diagrams."""
    if spec.dims is not None:
        return math.fsum(
            kernel(a, b, KernelSpec(spec.kind, spec.params))
            for a, b in zip(_split_dims(D, spec.dims), _split_dims(E, spec.dims))
        )
    k, q = spec.kind, spec.params
    if k == "pssk":
        return k_pss(D, E, q["sigma"])
    if k == "pwgk":
        return k_pwg(D, E, q["rho"], q["tau"], q["cw"], q["p"])
    if k == "swk":
        return k_sw(D, E, q["eta"], int(q["M"]))
    if k == "pfk":
        if len(D) == 0 and len(E) == 0:
            return 1.0
        return k_pf(D, E, q["t"], q["sigma"])
    return k_pi(D, E, q["sigma"], q["pixel"], q["b"], q["bounds"])


# ------------------------------------------------------------- Gram assembly

class GramError(ValueError):
    def __init__(self, i, j, ids, exc):
        self.pair = (i, j)
        a = ids[i] if ids is not None else i
        b = ids[j] if ids is not None else j
        super().__init__(f"kernel failed on pair ({a}, {b}): {exc}")


def _all_pts(diagrams, ids=None) -> list:
    """Point arrays of every diagram; a bad diagram ``j`` is reported as pair ``(j, j)``."""
    out = []
    for j, D in enumerate(diagrams):
        try:
            out.append(_pts(D))
        except ValueError as exc:
            raise GramError(j, j, ids, exc) from exc
    return out


def _pairwise(items, fn, ids=None) -> np.ndarray:
    """Upper triangle by ``fn`` then mirrored."""
    n = len(items)
    G = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            try:
                G[i, j] = fn(items[i], items[j])
            except (ValueError, ArithmeticError) as exc:
                raise GramError(i, j, ids, exc) from exc
            G[j, i] = G[i, j]
    return G


def sw_distance_matrix(diagrams: Sequence, M: int = DEFAULT_DIRECTIONS, ids=None) -> np.ndarray:
    """Sliced Wasserstein distances; every diagram is projected once."""
    pts = _all_pts(diagrams, ids)
    proj = [sliced_projections(PersistenceDiagram(np.zeros(len(P), np.int64), P[:, 0], P[:, 1]), M) for P in pts]
    return _pairwise(proj, lambda a, b: _sw_from_projections(a[0], a[1], b[0], b[1]), ids)


def fisher_distance_matrix(diagrams: Sequence, sigma: float, ids=None) -> np.ndarray:
    pts = _all_pts(diagrams, ids)

    def fn(P, Q):
        if len(P) == 0 and len(Q) == 0:
            return 0.0
        return _fisher_pair(P, Q, sigma)

    return _pairwise(pts, fn, ids)


def pwgk_inner_matrix(diagrams: Sequence, rho: float, cw: float, p: float, ids=None) -> np.ndarray:
    """RKHS inner products of all weighted embeddings, in one blocked pass."""
    pts = _all_pts(diagrams, ids)
    n = len(pts)
    sizes = np.array([len(P) for P in pts])
    if sizes.sum() == 0:
        return np.zeros((n, n))
    allp = np.concatenate([P for P in pts if len(P)])
    w = _pwgk_weights(allp, cw, p)
    K = np.exp(-_sqdist(allp, allp) / (2.0 * rho * rho))
    K *= w[:, None]
    K *= w[None, :]
    return _block_sums(K, sizes)


def _block_sums(K, sizes):
    n = len(sizes)
    G = np.zeros((n, n))
    nz = np.flatnonzero(sizes)
    starts = np.concatenate([[0], np.cumsum(sizes[nz])[:-1]])
    S = np.add.reduceat(np.add.reduceat(K, starts, axis=0), starts, axis=1)
    G[np.ix_(nz, nz)] = S
    iu = np.triu_indices(n, 1)
    G[(iu[1], iu[0])] = G[iu]
    return G


def pwgk_from_inner(inner: np.ndarray, tau: float) -> np.ndarray:
    d = np.diag(inner)
    sq = np.maximum(d[:, None] + d[None, :] - 2.0 * inner, 0.0)
    np.fill_diagonal(sq, 0.0)
    return np.exp(-sq / (2.0 * tau * tau))


def pi_gram(diagrams: Sequence, sigma: float, pixel: float, b: float, bounds: tuple, ids=None) -> np.ndarray:
    """Persistence-image inner products without materialising the images.

    The pixel integrals factor into birth and persistence parts, so
    ``<PI(D), PI(E)> = sum_uv w_u w_v (Ix_u . Ix_v) (Iy_u . Iy_v)``.
    """
    pts = _all_pts(diagrams, ids)
    sizes = np.array([len(P) for P in pts])
    n = len(pts)
    if sizes.sum() == 0:
        return np.zeros((n, n))
    allp = np.concatenate([P for P in pts if len(P)])
    w, Ix, Iy = _pi_factors(allp, sigma, pixel, b, bounds)
    K = (Ix @ Ix.T) * (Iy @ Iy.T)
    K *= w[:, None]
    K *= w[None, :]
    return _block_sums(K, sizes)


def gram(diagrams: Sequence, spec: KernelSpec, ids: Optional[Sequence] = None) -> np.ndarray:
    """Symmetric Gram matrix of ``spec`` over ``diagrams``.

    PI without frozen ``bounds``/``b`` fits them on the given diagrams.
    """
    if spec.dims is not None:
        base = KernelSpec(spec.kind, spec.params)
        parts = [gram([filter_dimension(D, d) for D in diagrams], base, ids) for d in spec.dims]
        return np.sum(parts, axis=0)
    k, q = spec.kind, spec.params
    if k == "pssk":
        return _pairwise(_all_pts(diagrams, ids), lambda P, Q: _pss_pair(P, Q, q["sigma"]), ids)
    if k == "pwgk":
        return pwgk_from_inner(pwgk_inner_matrix(diagrams, q["rho"], q["cw"], q["p"], ids), q["tau"])
    if k == "swk":
        return np.exp(-sw_distance_matrix(diagrams, int(q["M"]), ids) / (2.0 * q["eta"] ** 2))
    if k == "pfk":
        return np.exp(-q["t"] * fisher_distance_matrix(diagrams, q["sigma"], ids))
    pts = _all_pts(diagrams, ids)
    bounds = q["bounds"] if q["bounds"] is not None else fit_pi_grid(pts, q["sigma"])
    b = q["b"] if q["b"] is not None else fit_pi_cutoff(pts)
    return pi_gram(pts, q["sigma"], q["pixel"], b, bounds, ids)


def condition_number(G, jitter: float = 0.0, sym_tol: float = 1e-10) -> float:
    """Ratio of extreme eigenvalues of ``G + jitter * I``; ``inf`` if not positive definite."""
    G = np.asarray(G, dtype=np.float64)
    scale = np.abs(G).max() if G.size else 0.0
    if G.size and np.abs(G - G.T).max() > sym_tol * max(scale, 1e-300):
        raise ValueError("Gram matrix is not symmetric")
    ev = jacobi_eigenvalues(G + jitter * np.eye(len(G)))
    lo, hi = ev[0], ev[-1]
    if lo <= 0 or hi <= 0:
        return math.inf
    return float(hi / max(lo, np.finfo(float).eps * hi))


# ----------------------------------------------------------------- CSV format

def save_gram_csv(G: np.ndarray, ids: Sequence, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id"] + [str(i) for i in ids])
        for i, row in zip(ids, G):
            w.writerow([str(i)] + [repr(float(x)) for x in row])


def load_gram_csv(path) -> tuple:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty Gram file")
    ids = rows[0][1:]
    body = rows[1:]
    if len(body) != len(ids):
        raise ValueError(f"{path}: {len(body)} rows for {len(ids)} identifiers")
    G = np.array([[float(x) for x in r[1:]] for r in body])
    if [r[0] for r in body] != ids:
        raise ValueError(f"{path}: row identifiers do not match the header")
    return G, ids
