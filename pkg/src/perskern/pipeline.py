"""Experiment configuration, per-family diagram recipes and the benchmark protocol.

A run of the protocol: split 70/30 (stratified, seeded), grid-search the
kernel parameters and C by stratified k-fold CV on the training part, refit
the best cell on the whole training part and score the test part.  Scores
are averaged over several runs.  Diagrams and parameter-free base matrices
are cached under the output directory and reused on later invocations.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from . import diagrams as dg
from . import kernels as kn
from . import svm
from .datasets import LOADERS, DataError, LabeledCollection, generate_orbits
from .filtrations import (binarize, graph_sublevel_filtration, height_filtration, jaccard_weights,
                          shortest_path_weights, takens_embedding)
from .persistence import compute_diagram, rips_diagram

log = logging.getLogger(__name__)

SWEEP_SIGMAS = (1e-5, 1e-4, 1e-3, 0.01, 0.1, 1.0, 10.0, 100.0, 500.0, 800.0, 1000.0)

# parameter grids explored for each kernel
DEFAULT_GRIDS = {
    "pssk": {"sigma": [1e-5, 1e-4, 1e-3, 0.01, 0.1, 1.0, 10.0]},
    "pwgk": {"tau": [1e-3, 0.01, 0.1, 1.0, 10.0, 100.0], "rho": [1e-3, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0],
             "p": [1, 5, 10, 50, 100], "cw": [1e-3, 0.01, 0.1, 1.0]},
    "swk": {"eta": [1e-5, 1e-4, 1e-3, 0.01, 0.1, 1.0, 10.0]},
    "pfk": {"sigma": [1e-3, 0.01, 0.1, 1.0, 10.0], "t": [0.1, 1.0, 10.0, 100.0, 1000.0]},
    "pi": {"sigma": [1e-6, 1e-5, 1e-4, 1e-3, 0.01, 0.1, 1.0, 10.0]},
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class NumericalError(ArithmeticError):
    """A numerical stage produced unusable values."""


class PipelineError(RuntimeError):
    def __init__(self, stage: str, index, cause: Exception):
        self.stage, self.index, self.cause = stage, index, cause
        where = f" on sample {index}" if index is not None else ""
        super().__init__(f"stage '{stage}' failed{where}: {cause}")


# ------------------------------------------------------------------ config

@dataclass
class KernelEntry:
    kind: str
    grid: dict  # name -> list of values
    fixed: dict = field(default_factory=dict)
    dims: Optional[tuple] = None

    def specs(self) -> list:
        """``(params, KernelSpec)`` for every grid cell, grid names in sorted order."""
        names = sorted(self.grid)
        out = []
        for values in itertools.product(*(self.grid[k] for k in names)):
            params = dict(zip(names, values))
            out.append((params, kn.KernelSpec(self.kind, {**self.fixed, **params}, self.dims)))
        return out


@dataclass
class ExperimentConfig:
    dataset: dict
    filtration: dict
    diagram_rules: dict
    kernels: list
    C_grid: list = field(default_factory=lambda: list(svm.C_GRID))
    test_fraction: float = 0.3
    folds: int = 10
    runs: int = 10
    seed: int = 0
    metric: str = "auto"
    tol: float = svm.DEFAULT_TOL
    output: str = "results"
    name: str = "experiment"
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def out_dir(self) -> Path:
        # relative output paths follow the working directory; data paths follow the config file
        return Path(self.output).resolve()

    def validate(self) -> "ExperimentConfig":
        src = self.dataset.get("source")
        if src == "orbits":
            if not self.dataset.get("r_values", [1]):
                raise ConfigError("dataset.r_values is empty")
        elif src == "file":
            if self.dataset.get("loader") not in LOADERS:
                raise ConfigError(f"dataset.loader must be one of {sorted(LOADERS)}")
            path = self.dataset_path()
            if not path.is_file():
                raise ConfigError(f"dataset file {path} does not exist")
        else:
            raise ConfigError("dataset.source must be 'orbits' or 'file'")
        if self.filtration.get("kind") not in ("rips", "graph", "height", "takens"):
            raise ConfigError("filtration.kind must be rips, graph, height or takens")
        if not self.kernels:
            raise ConfigError("no kernels configured")
        for entry in self.kernels:
            if not entry.grid and not entry.fixed:
                raise ConfigError(f"kernel {entry.kind} has an empty grid")
            if any(len(v) == 0 for v in entry.grid.values()):
                raise ConfigError(f"kernel {entry.kind} has an empty parameter list")
            try:
                entry.specs()
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if not self.C_grid or any(not c > 0 for c in self.C_grid):
            raise ConfigError("C grid must be nonempty and positive")
        if self.runs < 1:
            raise ConfigError("run count must be at least 1")
        if self.folds < 2:
            raise ConfigError("need at least two folds")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test fraction must lie in (0, 1)")
        if self.metric not in ("auto", "accuracy", "balanced"):
            raise ConfigError("metric must be auto, accuracy or balanced")
        return self

    def dataset_path(self) -> Path:
        p = Path(self.dataset.get("path", ""))
        return p if p.is_absolute() else self.base_dir / p

    def diagram_key(self) -> str:
        blob = json.dumps([self.dataset, self.filtration, self.diagram_rules], sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _as_list(x):
    return list(x) if isinstance(x, (list, tuple)) else [x]


def config_from_dict(d: dict, base_dir: Optional[Path] = None) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a mapping")
    known = {"name", "dataset", "filtration", "diagrams", "kernels", "C_grid", "test_fraction", "folds",
             "runs", "seed", "metric", "tol", "output"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    for key in ("dataset", "filtration", "kernels"):
        if key not in d:
            raise ConfigError(f"config lacks '{key}'")
    entries = []
    for k in d["kernels"]:
        if not isinstance(k, dict) or "kind" not in k:
            raise ConfigError("each kernel needs a 'kind'")
        kind = str(k["kind"]).lower()
        if kind not in kn.KINDS:
            raise ConfigError(f"unknown kernel {kind!r}")
        grid = k.get("grid", "default")
        grid = DEFAULT_GRIDS[kind] if grid == "default" else {name: _as_list(v) for name, v in grid.items()}
        dims = k.get("dims")
        entries.append(KernelEntry(kind, dict(grid), dict(k.get("fixed", {})),
                                   tuple(dims) if dims is not None else None))
    try:
        cfg = ExperimentConfig(
            dataset=dict(d["dataset"]), filtration=dict(d["filtration"]),
            diagram_rules=dict(d.get("diagrams", {})), kernels=entries,
            C_grid=[float(c) for c in d.get("C_grid", svm.C_GRID)],
            test_fraction=float(d.get("test_fraction", 0.3)), folds=int(d.get("folds", 10)),
            runs=int(d.get("runs", 10)), seed=int(d.get("seed", 0)), metric=str(d.get("metric", "auto")),
            tol=float(d.get("tol", svm.DEFAULT_TOL)), output=str(d.get("output", "results")),
            name=str(d.get("name", "experiment")), base_dir=base_dir or Path.cwd(),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        d = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(d, path.parent)


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package (``dynsys``, ``dynsys-fast``)."""
    p = Path(__file__).parent / "configs" / f"{name}.yaml"
    if not p.is_file():
        raise ConfigError(f"no bundled config named {name!r}")
    return p


# ------------------------------------------------------------------- data

def load_dataset(cfg: ExperimentConfig) -> LabeledCollection:
    d = cfg.dataset
    if d["source"] == "orbits":
        return generate_orbits(tuple(d.get("r_values", (2.5, 3.5, 4.0, 4.1, 4.3))), int(d.get("n_orbits", 50)),
                               int(d.get("n_points", 1000)), int(d.get("seed", 0)))
    return LOADERS[d["loader"]](cfg.dataset_path())


def _rips(pc, f):
    return rips_diagram(pc, int(f.get("max_dim", 1)), float(f.get("max_scale", math.inf)),
                        f.get("metric", "euclidean"), f.get("scale", "diameter"))


def _graph(g, f):
    scheme = f.get("weights", "raw")
    if scheme == "shortest_path":
        g = shortest_path_weights(g)
    elif scheme == "jaccard":
        g = jaccard_weights(g, complement=True)
    elif scheme != "raw":
        raise ConfigError(f"unknown graph weight scheme {scheme!r}")
    fc = graph_sublevel_filtration(g, bool(f.get("include_triangles", False)), f.get("vertex_birth", "min_incident"))
    return compute_diagram(fc, max_dim=int(f.get("max_dim", 1)))


def _height(img, f):
    b = binarize(img, float(f.get("threshold", 127.0)))
    dirs = f.get("directions", [[1, 0], [0, 1], [-1, 0], [0, -1]])
    parts = [compute_diagram(height_filtration(b, v, f.get("h_inf")), max_dim=1) for v in dirs]
    return dg.concatenate(parts)


def _takens(ts, f):
    pc = takens_embedding(ts, int(f.get("delay", 1)), int(f.get("edim", 2)))
    return _rips(pc, f)


_RECIPES = {"rips": _rips, "graph": _graph, "height": _height, "takens": _takens}


def apply_rules(D: dg.PersistenceDiagram, rules: dict) -> dg.PersistenceDiagram:
    """Dimension filter, cap rule, then optional top-k by persistence."""
    dims = rules.get("dims")
    if dims is not None:
        D = D.take(np.flatnonzero(np.isin(D.dims, list(dims))))
    cap = rules.get("cap", "max_value")
    if D.has_essential:
        if cap == "drop":
            D = D.take(np.flatnonzero(np.isfinite(D.deaths)))
        elif cap == "max_value":
            vals = np.concatenate([D.births, D.deaths[np.isfinite(D.deaths)]])
            D = dg.cap_infinite(D, float(vals.max()))
        elif cap in (None, "none"):
            raise ValueError("diagram has essential points and no cap rule")
        else:
            D = dg.cap_infinite(D, float(cap))
    k = rules.get("top_k")
    if k is not None:
        D = dg.top_k_by_persistence(D, int(k))
    return D


def diagram_pipeline(sample, cfg: ExperimentConfig, sample_id: str = "") -> dg.PersistenceDiagram:
    """Filtration recipe, reduction, then the configured diagram rules."""
    recipe = _RECIPES[cfg.filtration["kind"]]
    D = recipe(sample, cfg.filtration)
    return apply_rules(D, cfg.diagram_rules).with_source(sample_id)


def compute_diagrams(cfg: ExperimentConfig, data: LabeledCollection, cache: bool = True) -> list:
    ddir = cfg.out_dir / "cache" / cfg.diagram_key() / "diagrams"
    if cache:
        ddir.mkdir(parents=True, exist_ok=True)
    out = []
    for k, (sample, sid) in enumerate(zip(data.samples, data.ids)):
        path = ddir / f"{k:05d}.txt"
        if cache and path.is_file():
            out.append(dg.load(path).with_source(sid))
            continue
        try:
            D = diagram_pipeline(sample, cfg, sid)
        except ConfigError:
            raise
        except (ValueError, ArithmeticError) as exc:
            raise PipelineError("diagrams", sid, exc) from exc
        if cache:
            tmp = path.with_suffix(".tmp")
            dg.save(D, tmp)
            tmp.replace(path)
        out.append(D)
    return out


# -------------------------------------------------------------- Gram cache

class GramCache:
    """Base matrices over the whole dataset, memoised in memory and on disk."""

    def __init__(self, diagrams: Sequence, directory: Optional[Path]):
        self.diagrams = list(diagrams)
        self.dir = directory
        self.mem: dict = {}
        if directory is not None:
            directory.mkdir(parents=True, exist_ok=True)

    def _get(self, name, build):
        if name in self.mem:
            return self.mem[name]
        path = self.dir / f"{name}.npy" if self.dir is not None else None
        if path is not None and path.is_file():
            M = np.load(path)
        else:
            M = build()
            if path is not None:
                tmp = path.with_suffix(".tmp.npy")
                np.save(tmp, M)
                tmp.replace(path)
        self.mem[name] = M
        return M

    def _dim_sets(self, dims):
        if dims is None:
            return [("all", self.diagrams)]
        return [(f"d{d}", [dg.filter_dimension(D, d) for D in self.diagrams]) for d in dims]

    def gram(self, spec: kn.KernelSpec, train_idx=None) -> np.ndarray:
        """Full-dataset Gram of ``spec``; PI grids are fitted on ``train_idx``."""
        total = None
        q = spec.params
        for tag, ds in self._dim_sets(spec.dims):
            if spec.kind == "swk":
                M = self._get(f"sw_{tag}_M{int(q['M'])}", lambda: kn.sw_distance_matrix(ds, int(q["M"])))
                G = np.exp(-M / (2.0 * q["eta"] ** 2))
            elif spec.kind == "pfk":
                M = self._get(f"fisher_{tag}_s{q['sigma']!r}", lambda: kn.fisher_distance_matrix(ds, q["sigma"]))
                G = np.exp(-q["t"] * M)
            elif spec.kind == "pwgk":
                M = self._get(f"pwgk_{tag}_r{q['rho']!r}_c{q['cw']!r}_p{q['p']!r}",
                              lambda: kn.pwgk_inner_matrix(ds, q["rho"], q["cw"], q["p"]))
                G = kn.pwgk_from_inner(M, q["tau"])
            elif spec.kind == "pssk":
                G = self._get(f"pssk_{tag}_s{q['sigma']!r}", lambda: kn.gram(ds, kn.KernelSpec("pssk", q)))
            else:
                fit_on = ds if train_idx is None else [ds[i] for i in train_idx]
                bounds = q["bounds"] if q["bounds"] is not None else kn.fit_pi_grid(fit_on, q["sigma"])
                b = q["b"] if q["b"] is not None else kn.fit_pi_cutoff(fit_on)
                G = kn.pi_gram(ds, q["sigma"], q["pixel"], b, bounds)
            total = G if total is None else total + G
        if not np.all(np.isfinite(total)):
            raise NumericalError(f"{spec.label()} produced non-finite Gram entries")
        return total


# ------------------------------------------------------------------ results

@dataclass
class KernelResult:
    kernel: str
    mean: float
    std: float
    scores: list
    best: list  # per run: kernel parameters plus C
    seconds: float


@dataclass
class ResultTable:
    name: str
    metric: str
    rows: list

    def to_json(self) -> str:
        return json.dumps({"name": self.name, "metric": self.metric,
                           "rows": [r.__dict__ for r in self.rows]}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ResultTable":
        d = json.loads(text)
        return cls(d["name"], d["metric"], [KernelResult(**r) for r in d["rows"]])

    def write(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "results.json").write_text(self.to_json())
        with open(directory / "results.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            runs = max(len(r.scores) for r in self.rows)
            w.writerow(["kernel", "mean", "std"] + [f"run{k}" for k in range(runs)] + ["seconds"])
            for r in self.rows:
                w.writerow([r.kernel, repr(r.mean), repr(r.std)] + [repr(s) for s in r.scores] + [f"{r.seconds:.3f}"])

    def row(self, kernel: str) -> KernelResult:
        for r in self.rows:
            if r.kernel == kernel:
                return r
        raise KeyError(kernel)


def split_seed(cfg: ExperimentConfig, run: int) -> list:
    return [cfg.seed, run, 0]


def fold_seed(cfg: ExperimentConfig, run: int) -> list:
    return [cfg.seed, run, 1]


def evaluate_kernel(entry: KernelEntry, cache: GramCache, labels, cfg: ExperimentConfig,
                    on_access=None) -> KernelResult:
    """All runs of the protocol for one kernel family."""
    labels = np.asarray(labels)
    t0 = time.perf_counter()
    cells = entry.specs()
    scores, best = [], []
    for run in range(cfg.runs):
        tr, te = svm.stratified_split(labels, cfg.test_fraction, split_seed(cfg, run))
        metric = svm.resolve_metric(cfg.metric, labels[tr])
        grams = [(params, (lambda s=s: cache.gram(s, tr))) for params, s in cells]
        try:
            cv = svm.cv_grid_search(grams, labels, tr, cfg.C_grid, cfg.folds, fold_seed(cfg, run), metric,
                                    cfg.tol, on_access)
        except kn.GramError as exc:
            raise PipelineError(f"gram[{entry.kind}]", exc.pair, exc) from exc
        params = dict(cv.best_params)
        spec = _spec_for(cells, cv.best_params)
        G = cache.gram(spec, tr)
        model = svm.train_multiclass(G[np.ix_(tr, tr)], labels[tr], cv.best_C, cfg.tol)
        pred = model.predict(G[np.ix_(te, tr)])
        scores.append(svm.score(pred, labels[te], metric))
        best.append({**params, "C": cv.best_C, "cv_score": cv.best_score})
        log.info("%s run %d: test %.4f (cv %.4f, %s, C=%g)", entry.kind, run, scores[-1], cv.best_score,
                 params, cv.best_C)
    s = np.asarray(scores)
    return KernelResult(entry.kind, float(s.mean()), float(s.std()), [float(x) for x in s], best,
                        time.perf_counter() - t0)


def _spec_for(cells, key):
    for params, spec in cells:
        if svm._param_key(params) == key:
            return spec
    raise KeyError(key)


def run_pipeline(cfg: ExperimentConfig, kernels: Optional[Sequence[str]] = None, cache: bool = True,
                 on_access=None) -> ResultTable:
    """Full protocol over every configured kernel; writes results.csv/json to the output path."""
    try:
        data = load_dataset(cfg)
    except DataError:
        raise
    except (ValueError, OSError) as exc:
        raise PipelineError("load", None, exc) from exc
    diagrams = compute_diagrams(cfg, data, cache)
    gdir = cfg.out_dir / "cache" / cfg.diagram_key() / "grams" if cache else None
    gc = GramCache(diagrams, gdir)
    rows = []
    metric = svm.resolve_metric(cfg.metric, data.labels)
    for entry in cfg.kernels:
        if kernels is not None and entry.kind not in kernels:
            continue
        rows.append(evaluate_kernel(entry, gc, data.labels, cfg, on_access))
    table = ResultTable(cfg.name, metric, rows)
    table.write(cfg.out_dir)
    return table


# ------------------------------------------------------------------- sweeps

@dataclass
class SweepRow:
    value: float
    condition: float
    cv_score: float
    best_C: float


def sweep_conditioning(cfg: ExperimentConfig, kind: str, param: str, values: Sequence[float],
                       base_params: Optional[dict] = None, jitter: float = 0.0, run: int = 0,
                       diagrams: Optional[list] = None, labels=None) -> list:
    """Condition number of the training Gram and best CV score per parameter value.

    The training split is the one of protocol run ``run``.  ``jitter`` (default
    0) is added to the diagonal before the eigenvalue ratio; a Gram that is
    not positive definite reports ``inf``.  Rows come sorted by value.
    """
    if diagrams is None:
        data = load_dataset(cfg)
        diagrams = compute_diagrams(cfg, data)
        labels = data.labels
    labels = np.asarray(labels)
    if base_params is None:
        entry = next((e for e in cfg.kernels if e.kind == kind), None)
        base_params = {} if entry is None else {**entry.fixed, **{k: v[0] for k, v in entry.grid.items()}}
    tr, _ = svm.stratified_split(labels, cfg.test_fraction, split_seed(cfg, run))
    train = [diagrams[i] for i in tr]
    rows = []
    for v in sorted(values):
        spec = kn.KernelSpec(kind, {**base_params, param: v})
        G = kn.gram(train, spec)
        if not np.all(np.isfinite(G)):
            raise NumericalError(f"{spec.label()} produced non-finite Gram entries")
        cond = kn.condition_number(G, jitter)
        cv = svm.cv_grid_search([({param: v}, G)], labels[tr], np.arange(len(tr)), cfg.C_grid, cfg.folds,
                                fold_seed(cfg, run), svm.resolve_metric(cfg.metric, labels[tr]), cfg.tol)
        rows.append(SweepRow(float(v), float(cond), cv.best_score, cv.best_C))
    return rows


def write_sweep(rows: list, directory: Path, stem: str = "sweep") -> None:
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / f"{stem}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["value", "condition_number", "cv_score", "best_C"])
        for r in rows:
            w.writerow([repr(r.value), repr(r.condition), repr(r.cv_score), repr(r.best_C)])
    (directory / f"{stem}.json").write_text(json.dumps([r.__dict__ for r in rows], indent=2))
