"""Command line front end.

Four subcommands:

- ``dist``: distance between two measures (exact LP or entropic).
- ``barycenter``: fixed- or free-support barycenter of a set of measures.
- ``simulate``: run a named simulation scenario and write its records.
- ``convert``: translate between PGM images and measure CSV files.

Exit codes: 0 on success, 1 when a solver fails to produce a result,
2 when the inputs or arguments are invalid.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from .cost import CostSpec
from .entropic import ScalingError, SinkhornParams, ibp_barycenter, sinkhorn_distance
from .exact import DEFAULT_ORACLE_CAP, OracleCapError, SolverError, exact_distance
from .experiments import (
    RunRecord,
    desk_config,
    full_scale_config,
    run_scenario,
    write_records,
)
from .free_support import BarycenterProblem, free_support_barycenter, kmeans_init_support
from .measures import (
    DiscreteMeasure,
    MeasureError,
    image_to_measure,
    load_measure,
    measure_to_image,
    prune,
    read_pgm,
    save_measure,
    write_pgm,
)

__all__ = ["main", "entrypoint"]


def _parse_lambda(text: str) -> float:
    val = math.inf if text.strip().lower() in ("inf", "infinity") else float(text)
    if val <= 0:
        raise ValueError(f"lambda must be positive, got {text!r}")
    return val


def _parse_ratios(text: str) -> tuple:
    """Inclusive a:b:step range, or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"ratio range must be start:stop:step, got {text!r}")
        a, b, step = (float(x) for x in parts)
        if step <= 0:
            raise ValueError("ratio step must be positive")
        count = int(math.floor((b - a) / step + 1e-9)) + 1
        if count < 1:
            raise ValueError(f"empty ratio range {text!r}")
        return tuple(round(a + i * step, 10) for i in range(count))
    return tuple(float(x) for x in text.split(","))


def _parse_lambdas(text: str) -> tuple:
    return tuple(_parse_lambda(x) for x in text.split(","))


def _load_any(path: str) -> DiscreteMeasure:
    p = Path(path)
    if p.suffix.lower() == ".pgm":
        return image_to_measure(read_pgm(p), label=p.name)
    return load_measure(p)


def _load_inputs(paths) -> list:
    measures = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            files = sorted(q for q in p.iterdir() if q.suffix.lower() in (".csv", ".pgm"))
            if not files:
                raise MeasureError(f"{p}: no .csv or .pgm files inside")
            measures.extend(_load_any(str(q)) for q in files)
        else:
            measures.append(_load_any(raw))
    if not measures:
        raise MeasureError("no input measures given")
    return measures


def _sinkhorn_params(args) -> SinkhornParams:
    kw = {}
    if getattr(args, "epsilon", None) is not None:
        kw["epsilon"] = args.epsilon
    if getattr(args, "max_iter", None) is not None:
        kw["max_iter"] = args.max_iter
    if getattr(args, "tol", None) is not None:
        kw["tol"] = args.tol
    return SinkhornParams(**kw)


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _cmd_dist(args) -> int:
    mu = _load_any(args.mu)
    nu = _load_any(args.nu)
    spec = CostSpec(p=args.p, lam=args.lam)
    if args.method == "exact":
        res = exact_distance(mu, nu, spec, oracle_cap=args.oracle_cap)
        payload = {
            "distance": res.distance,
            "cost": res.cost,
            "method": "exact",
            "iterations": res.iterations,
            "marginal_error": res.plan.marginal_error,
        }
    elif args.method == "sinkhorn":
        res = sinkhorn_distance(mu, nu, spec, _sinkhorn_params(args))
        payload = {
            "distance": res.distance,
            "cost": res.cost,
            "method": "sinkhorn",
            "iterations": res.iterations,
            "marginal_error": res.marginal_error,
        }
    else:
        raise ValueError(f"dist supports methods exact and sinkhorn, got {args.method!r}")
    _emit(payload, args.out)
    return 0


def _grid_support(measures, R: int) -> np.ndarray:
    """Pixel-grid support covering the integer bounding box of the inputs."""
    pts = np.vstack([m.points for m in measures])
    if pts.shape[1] != 2:
        raise ValueError("--support grid requires 2-D (image) inputs")
    lo = np.floor(pts.min(axis=0)).astype(int)
    hi = np.ceil(pts.max(axis=0)).astype(int)
    side = max(1, int(round(math.sqrt(R))))
    rows = np.linspace(lo[0], hi[0], side)
    cols = np.linspace(lo[1], hi[1], side)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return np.column_stack([rr.ravel(), cc.ravel()])


def _cmd_barycenter(args) -> int:
    measures = _load_inputs(args.inputs)
    spec = CostSpec(p=args.p, lam=args.lam)
    problem = BarycenterProblem.uniform(measures, spec)
    params = _sinkhorn_params(args)

    if args.support.startswith("file:"):
        init = _load_any(args.support[len("file:") :]).points
    elif args.support == "grid":
        init = _grid_support(measures, args.R)
    elif args.support == "kmeans":
        init = kmeans_init_support(problem, args.R, seed=args.seed)
    else:
        raise ValueError(f"unknown support choice {args.support!r}")

    if args.method == "ibp":
        res = ibp_barycenter(problem, init, params)
        bary = prune(DiscreteMeasure(init, res.mass, normalize=True))
        summary = {
            "method": "ibp",
            "objective": res.objective,
            "iterations": res.iterations,
            "marginal_error": res.marginal_error,
            "atoms": bary.size,
        }
    elif args.method == "free":
        res = free_support_barycenter(
            problem,
            init,
            params=params,
            outer_max=args.outer_max,
            outer_tol=args.outer_tol,
        )
        bary = res.barycenter
        summary = {
            "method": "free",
            "objective": res.objective_trace[-1],
            "objective_trace": list(res.objective_trace),
            "outer_iterations": res.outer_iterations,
            "converged": res.converged,
            "atoms": bary.size,
        }
    else:
        raise ValueError(f"barycenter supports methods ibp and free, got {args.method!r}")

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_measure(bary, out)
    if bary.dim == 2 and args.image_size:
        shape = (args.image_size, args.image_size)
        write_pgm(out.with_suffix(".pgm"), measure_to_image(bary, shape))
    summary["out"] = str(out)
    _emit(summary, None)
    return 0


def _cmd_simulate(args) -> int:
    cfg = full_scale_config(args.scenario, args.seed) if args.full_scale else desk_config(args.scenario, args.seed)
    overrides = {}
    if args.lambdas is not None:
        overrides["lambda_grid"] = args.lambdas
    if args.ratios is not None:
        overrides["ratio_grid"] = args.ratios
    if args.n_datasets is not None:
        overrides["n_datasets"] = args.n_datasets
    if args.samples is not None:
        overrides["samples_per_dataset"] = args.samples
    if args.support_size is not None:
        overrides["support_size"] = args.support_size
    if args.image_size is not None:
        overrides["image_size"] = args.image_size
    if args.R is not None:
        overrides["R"] = args.R
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)

    echo = {
        k: ("inf" if isinstance(v, float) and math.isinf(v) else v)
        for k, v in dataclasses.asdict(cfg).items()
    }
    print(json.dumps(echo, sort_keys=True))

    records = []

    def sink(rec):
        records.append(rec)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        run_scenario(cfg, threads=args.threads, sink=sink, artifacts_dir=args.artifacts_dir)
    except RuntimeError as exc:
        # Keep what finished; the marker row flags the abort for readers.
        records.append(RunRecord(cfg.scenario, 0.0, 0.0, "aborted", -1.0, cfg.seed))
        write_records(records, out)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_records(records, out)
    print(f"wrote {len(records)} records to {out}")
    return 0


def _cmd_convert(args) -> int:
    src = Path(args.src)
    dst = Path(args.dst)
    if src.suffix.lower() == ".pgm" and dst.suffix.lower() == ".csv":
        save_measure(image_to_measure(read_pgm(src), label=src.name), dst)
    elif src.suffix.lower() == ".csv" and dst.suffix.lower() == ".pgm":
        measure = load_measure(src)
        if measure.dim != 2:
            raise ValueError("only 2-D measures render to PGM")
        size = args.image_size or int(math.ceil(measure.points.max())) + 1
        write_pgm(dst, measure_to_image(measure, (size, size)))
    else:
        raise ValueError(f"cannot convert {src.suffix!r} to {dst.suffix!r}; use .pgm and .csv")
    print(f"wrote {dst}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robustot", description="Robust optimal transport toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_cost_args(sp):
        sp.add_argument("--lambda", dest="lam", type=_parse_lambda, default=math.inf, help="truncation level, or inf")
        sp.add_argument("--p", type=float, default=2.0, help="ground distance exponent")

    def add_sinkhorn_args(sp):
        sp.add_argument("--epsilon", type=float, default=None, help="entropic regularization (absolute)")
        sp.add_argument("--max-iter", dest="max_iter", type=int, default=None)
        sp.add_argument("--tol", type=float, default=None)

    sp = sub.add_parser("dist", help="distance between two measures")
    sp.add_argument("--mu", required=True, help="first measure (.csv or .pgm)")
    sp.add_argument("--nu", required=True, help="second measure (.csv or .pgm)")
    add_cost_args(sp)
    sp.add_argument("--method", choices=("exact", "sinkhorn"), default="exact")
    add_sinkhorn_args(sp)
    sp.add_argument("--oracle-cap", dest="oracle_cap", type=int, default=DEFAULT_ORACLE_CAP)
    sp.add_argument("--out", default=None, help="write the JSON result here instead of stdout")
    sp.set_defaults(fn=_cmd_dist)

    sp = sub.add_parser("barycenter", help="barycenter of a set of measures")
    sp.add_argument("--inputs", nargs="+", required=True, help="measure files or directories of them")
    sp.add_argument("--out", required=True, help="output measure CSV path")
    add_cost_args(sp)
    sp.add_argument("--method", choices=("ibp", "free"), default="ibp")
    add_sinkhorn_args(sp)
    sp.add_argument("--R", type=int, default=50, help="support budget")
    sp.add_argument("--support", default="kmeans", help="kmeans, grid, or file:PATH")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--outer-max", dest="outer_max", type=int, default=50)
    sp.add_argument("--outer-tol", dest="outer_tol", type=float, default=1e-7)
    sp.add_argument("--image-size", dest="image_size", type=int, default=0, help="also render an NxN PGM")
    sp.set_defaults(fn=_cmd_barycenter)

    sp = sub.add_parser("simulate", help="run a simulation scenario")
    sp.add_argument("scenario", choices=("contamination", "heavytail", "ellipse_images", "pipeline1d"))
    sp.add_argument("--out", required=True, help="records CSV path")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--full-scale", dest="full_scale", action="store_true", help="full-size protocol")
    sp.add_argument("--lambdas", type=_parse_lambdas, default=None, help="comma-separated truncation grid")
    sp.add_argument("--ratios", type=_parse_ratios, default=None, help="a:b:step range or comma list")
    sp.add_argument("--n-datasets", dest="n_datasets", type=int, default=None)
    sp.add_argument("--samples", type=int, default=None, help="samples per dataset")
    sp.add_argument("--support-size", dest="support_size", type=int, default=None)
    sp.add_argument("--image-size", dest="image_size", type=int, default=None)
    sp.add_argument("--R", type=int, default=None)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--artifacts-dir", dest="artifacts_dir", default=None)
    sp.set_defaults(fn=_cmd_simulate)

    sp = sub.add_parser("convert", help="convert between .pgm and .csv")
    sp.add_argument("src")
    sp.add_argument("dst")
    sp.add_argument("--image-size", dest="image_size", type=int, default=None)
    sp.set_defaults(fn=_cmd_convert)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad arguments and 0 on --help.
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (MeasureError, OracleCapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, ScalingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
