"""Command line entry point.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import diagrams as dg
from . import kernels as kn
from . import pipeline as pl
from . import svm
from .datasets import ORBIT_R_VALUES, DataError, generate_orbits, save_point_clouds

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


def _config(args, out_is_dir: bool = False) -> pl.ExperimentConfig:
    if args.config is None:
        raise pl.ConfigError("--config is required (a YAML file or a bundled name such as dynsys-fast)")
    path = Path(args.config)
    cfg = pl.load_config(path if path.suffix in (".yaml", ".yml") or path.exists() else pl.bundled_config(args.config))
    if out_is_dir and getattr(args, "out", None):
        cfg.output = args.out
    if getattr(args, "runs", None):
        cfg.runs = args.runs
        cfg.validate()
    return cfg


def _parse_params(items) -> dict:
    out = {}
    for item in items or []:
        key, eq, value = item.partition("=")
        if not eq:
            raise pl.ConfigError(f"parameter {item!r} is not key=value")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _spec(args) -> kn.KernelSpec:
    try:
        return kn.KernelSpec(args.kernel, _parse_params(args.param), tuple(args.dims) if args.dims else None)
    except ValueError as exc:
        raise pl.ConfigError(str(exc)) from None


def cmd_generate_orbits(args) -> None:
    data = generate_orbits(tuple(args.r_values), args.n_orbits, args.n_points, args.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_point_clouds(data, args.out)
    print(f"wrote {len(data)} orbits to {args.out}")


def cmd_diagrams(args) -> None:
    cfg = _config(args)
    data = pl.load_dataset(cfg)
    ds = pl.compute_diagrams(cfg, data)
    out = Path(args.out or cfg.out_dir / "diagrams")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "labels.csv", "w") as fh:
        fh.write("id,label\n")
        for sid, lab in zip(data.ids, data.labels):
            fh.write(f"{sid},{int(lab)}\n")
    for sid, D in zip(data.ids, ds):
        dg.save(D, out / f"{sid}.txt")
    print(f"wrote {len(ds)} diagrams to {out}")


def cmd_gram(args) -> None:
    cfg = _config(args)
    spec = _spec(args)
    data = pl.load_dataset(cfg)
    ds = pl.compute_diagrams(cfg, data)
    G = kn.gram(ds, spec, data.ids)
    if not np.all(np.isfinite(G)):
        raise pl.NumericalError("Gram matrix has non-finite entries")
    out = Path(args.out or cfg.out_dir / f"gram_{spec.kind}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    kn.save_gram_csv(G, data.ids, out)
    print(f"wrote {G.shape[0]}x{G.shape[1]} Gram matrix to {out}")
    if args.condition:
        print(f"condition number: {kn.condition_number(G, args.jitter):.6g}")


def _read_labels(path, ids) -> np.ndarray:
    table = {}
    with open(path) as fh:
        for no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("id,"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataError(f"{path}:{no}: expected 'id,label'")
            try:
                table[parts[0]] = int(parts[1])
            except ValueError as exc:
                raise DataError(f"{path}:{no}: {exc}") from None
    missing = [i for i in ids if i not in table]
    if missing:
        raise DataError(f"{path}: no label for {missing[:3]}")
    return np.array([table[i] for i in ids])


def cmd_train(args) -> None:
    try:
        G, ids = kn.load_gram_csv(args.gram)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from None
    labels = _read_labels(args.labels, ids)
    model = svm.train_multiclass(G, labels, args.C, args.tol)
    pred = model.predict(G)
    text = svm.dumps_multiclass(model, ids)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    print(f"training accuracy {svm.accuracy(pred, labels):.4f}; model written to {out}")


def cmd_bench(args) -> None:
    cfg = _config(args, out_is_dir=True)
    table = pl.run_pipeline(cfg, kernels=args.kernels)
    for r in table.rows:
        print(f"{r.kernel:5s} {r.mean:.4f} +- {r.std:.4f}  ({r.seconds:.1f} s)")
    print(f"results in {cfg.out_dir}")


def cmd_sweep(args) -> None:
    cfg = _config(args, out_is_dir=True)
    values = args.values or list(pl.SWEEP_SIGMAS)
    rows = pl.sweep_conditioning(cfg, args.kernel, args.axis, values, _parse_params(args.param) or None, args.jitter)
    pl.write_sweep(rows, cfg.out_dir, f"sweep_{args.kernel}_{args.axis}")
    for r in rows:
        print(f"{r.value:<10g} cond={r.condition:<12.6g} cv={r.cv_score:.4f} C={r.best_C:g}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="perskern", description="Persistence kernels for SVM classification")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-orbits", help="write orbit point clouds as CSV")
    g.add_argument("--r-values", type=float, nargs="+", default=list(ORBIT_R_VALUES))
    g.add_argument("--n-orbits", type=int, default=50)
    g.add_argument("--n-points", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate_orbits)

    for name, func, helptext in (("diagrams", cmd_diagrams, "compute and save persistence diagrams"),
                                 ("gram", cmd_gram, "compute a Gram matrix as CSV"),
                                 ("bench", cmd_bench, "run the benchmark protocol"),
                                 ("sweep", cmd_sweep, "condition number and CV score along a parameter")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", help="YAML config path or bundled config name")
        s.add_argument("--out")
        s.set_defaults(func=func)
        if name in ("gram", "sweep"):
            s.add_argument("--kernel", required=True, choices=kn.KINDS)
            s.add_argument("--param", action="append", help="fixed kernel parameter key=value")
            s.add_argument("--jitter", type=float, default=0.0)
        if name == "gram":
            s.add_argument("--dims", type=int, nargs="+")
            s.add_argument("--condition", action="store_true")
        if name == "bench":
            s.add_argument("--kernels", nargs="+", choices=kn.KINDS)
            s.add_argument("--runs", type=int)
        if name == "sweep":
            s.add_argument("--axis", default="sigma")
            s.add_argument("--values", type=float, nargs="+")

    t = sub.add_parser("train", help="fit a multiclass SVM on a Gram CSV")
    t.add_argument("--gram", required=True)
    t.add_argument("--labels", required=True, help="CSV with 'id,label' rows")
    t.add_argument("--C", type=float, default=1.0)
    t.add_argument("--tol", type=float, default=svm.DEFAULT_TOL)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except pl.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (pl.NumericalError, ArithmeticError, np.linalg.LinAlgError, kn.GramError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except pl.PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc.cause, DataError):
            return EXIT_DATA
        return EXIT_NUMERIC if isinstance(exc.cause, ArithmeticError) else EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
