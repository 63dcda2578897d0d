"""Seeded simulation harness.

Four scenarios:

- ``contamination``: Gaussian signal datasets mixed with a far Gaussian
  contamination cluster at a controlled ratio; sweeps a truncation grid
  and measures each barycenter's exact distance to the ideal signal
  barycenter N(0, 1).
- ``heavytail``: Student-t(3) datasets with random locations, same sweep
  against a discretized t(3) reference.
- ``ellipse_images``: nested-ellipse images with a few bright outlier
  pixels in a corner region; compares fixed-support and free-support
  barycenters and how much mass each leaks into the outlier region.
- ``pipeline1d``: the generic sample pipeline (quantile outlier split,
  k-means supports, KDE weights) comparing barycenters of cleaned and
  raw datasets.

Every cell of every scenario derives its RNG from (seed, stream tag, cell
indices), so results are independent of evaluation order and thread count,
and reruns are bit-identical.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .cost import CostSpec
from .entropic import SinkhornParams, ibp_barycenter
from .exact import exact_distance
from .free_support import BarycenterProblem, free_support_barycenter, kmeans_init_support
from .kmeans import kmeans
from .measures import (
    DiscreteMeasure,
    MeasureMeta,
    image_to_measure,
    measure_to_image,
    merge_duplicates,
    prune,
    save_measure,
    write_pgm,
)

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "desk_config",
    "full_scale_config",
    "gen_ellipse_images",
    "gen_contamination",
    "gen_heavytail",
    "samples_to_measure",
    "kde_curve",
    "reference_normal",
    "reference_student_t",
    "region_mass",
    "run_lambda_sweep",
    "run_ellipse_experiment",
    "run_pipeline1d",
    "run_scenario",
    "write_ellipse_artifacts",
    "write_records",
    "read_records",
]

SCENARIOS = ("ellipse_images", "contamination", "heavytail", "pipeline1d")

# Stream tags keep the RNG of unrelated pipeline stages disjoint even when
# they share a master seed and cell index.
_STREAM_DATA = 11
_STREAM_SUPPORT = 13
_STREAM_BARY = 17
_STREAM_IMAGE = 19


def _cell_seed(*parts) -> int:
    """Deterministic 64-bit sub-seed for one pipeline cell."""
    state = np.random.SeedSequence([int(p) for p in parts]).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


@dataclass(frozen=True)
class ExperimentConfig:
    """Size and protocol knobs for one scenario run."""

    scenario: str
    seed: int = 0
    n_datasets: int = 20
    samples_per_dataset: int = 500
    support_size: int = 50
    contamination_ratio: float = 0.1
    lambda_grid: tuple = (10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0)
    ratio_grid: tuple = (0.0, 0.05, 0.10, 0.15, 0.20, 0.25)
    p: float = 1.0
    image_size: int = 20
    R: int = 40
    outlier_region: tuple | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        for name in ("n_datasets", "samples_per_dataset", "support_size", "image_size", "R"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not (0.0 <= self.contamination_ratio <= 1.0):
            raise ValueError("contamination_ratio must lie in [0, 1]")
        grid = tuple(float(x) for x in self.lambda_grid)
        if not grid or any(x <= 0 for x in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("lambda_grid must be strictly positive and ascending")
        ratios = tuple(float(r) for r in self.ratio_grid)
        if any(not (0.0 <= r <= 1.0) for r in ratios):
            raise ValueError("ratio_grid entries must lie in [0, 1]")
        object.__setattr__(self, "lambda_grid", grid)
        object.__setattr__(self, "ratio_grid", ratios)


@dataclass(frozen=True)
class RunRecord:
    """One measured value of one sweep cell."""

    scenario: str
    lam: float
    ratio: float
    metric: str
    value: float
    seed: int

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"record value must be finite, got {self.value!r}")


def desk_config(scenario: str, seed: int = 0) -> ExperimentConfig:
    """Minutes-scale defaults used by the acceptance suite."""
    if scenario == "contamination":
        return ExperimentConfig(scenario=scenario, seed=seed, p=2.0)
    if scenario == "heavytail":
        return ExperimentConfig(
            scenario=scenario,
            seed=seed,
            lambda_grid=(30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0, 110.0),
            ratio_grid=(0.0,),
            p=2.0,
        )
    if scenario == "ellipse_images":
        return ExperimentConfig(
            scenario=scenario,
            seed=seed,
            n_datasets=20,
            image_size=20,
            R=40,
            lambda_grid=(2.5,),
            outlier_region=(0, 5, 15, 20),
        )
    if scenario == "pipeline1d":
        return ExperimentConfig(scenario=scenario, seed=seed, lambda_grid=(10.0, 30.0, 50.0), p=2.0)
    raise ValueError(f"unknown scenario {scenario!r}")


def full_scale_config(scenario: str, seed: int = 0) -> ExperimentConfig:
    """Full-size protocol parameters; hours-scale, not used by tests."""
    base = desk_config(scenario, seed)
    if scenario in ("contamination", "heavytail"):
        ratios = tuple(round(0.01 * k, 2) for k in range(26)) if scenario == "contamination" else (0.0,)
        return dataclasses.replace(
            base,
            n_datasets=100,
            samples_per_dataset=1000,
            support_size=100,
            ratio_grid=ratios,
        )
    if scenario == "ellipse_images":
        return dataclasses.replace(
            base,
            n_datasets=200,
            image_size=40,
            R=105,
            lambda_grid=(5.0,),
            outlier_region=None,
        )
    return dataclasses.replace(base, n_datasets=100, samples_per_dataset=1000, support_size=100)


def _pmap(fn, items, threads: int):
    """Ordered map; results never depend on the worker count."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def gen_contamination(cfg: ExperimentConfig):
    """Gaussian signal datasets with a fraction replaced by far outlier sets.

    Dataset i draws a signal version N(mu0, 1) with mu0 ~ U(-20, 20) and a
    contaminated version N(mu1, 1) with mu1 ~ U(30, 70). The first
    floor(ratio * n_datasets) datasets ship the contaminated version, the
    rest the signal one. Both versions are drawn for every dataset
    regardless of the ratio, so sweeps over ratios see identical signal
    draws and a growing, nested set of corrupted datasets.
    """
    m = cfg.samples_per_dataset
    k = int(math.floor(cfg.contamination_ratio * cfg.n_datasets))
    out = []
    for idx in range(cfg.n_datasets):
        rng = np.random.default_rng([cfg.seed, _STREAM_DATA, idx])
        mu0 = rng.uniform(-20.0, 20.0)
        mu1 = rng.uniform(30.0, 70.0)
        signal = mu0 + rng.standard_normal(m)
        noise = mu1 + rng.standard_normal(m)
        out.append(noise if idx < k else signal)
    return out


def gen_heavytail(cfg: ExperimentConfig, loc_range=(-50.0, 50.0)):
    """Student-t(3) datasets, each shifted by a location drawn uniformly."""
    lo, hi = float(loc_range[0]), float(loc_range[1])
    out = []
    for idx in range(cfg.n_datasets):
        rng = np.random.default_rng([cfg.seed, _STREAM_DATA, idx])
        loc = rng.uniform(lo, hi)
        out.append(loc + rng.standard_t(3, size=cfg.samples_per_dataset))
    return out


def gen_ellipse_images(cfg: ExperimentConfig):
    """Nested-ellipse outline images with bright outlier pixels in a corner.

    Each image draws two concentric axis-aligned ellipses (inner axes 0.20
    to 0.25 of the image size, outer 0.27 to 0.32) rendered as one-ish
    pixel wide outlines, then 1 to 5 outlier pixels uniformly inside
    outlier_region (default: the upper-right quarter). An empty region
    suppresses the outliers entirely.
    """
    if cfg.image_size < 10:
        raise ValueError("image_size must be at least 10")
    size = cfg.image_size
    region = cfg.outlier_region if cfg.outlier_region is not None else (0, size // 2, size // 2, size)
    r_lo, r_hi, c_lo, c_hi = (int(v) for v in region)
    region_ok = r_hi > r_lo and c_hi > c_lo
    rr, cc = np.meshgrid(np.arange(size, dtype=np.float64), np.arange(size, dtype=np.float64), indexing="ij")
    center = (size - 1) / 2.0
    images = []
    for idx in range(cfg.n_datasets):
        rng = np.random.default_rng([cfg.seed, _STREAM_IMAGE, idx])
        img = np.zeros((size, size))
        for lo, hi in ((0.20, 0.25), (0.27, 0.32)):
            a = rng.uniform(lo, hi) * size
            b = rng.uniform(lo, hi) * size
            level = rng.uniform(0.6, 1.0)
            # Normalized quadratic; |q - 1| below ~1/min-axis is a band
            # about one pixel wide around the ellipse curve.
            q = ((rr - center) / a) ** 2 + ((cc - center) / b) ** 2
            band = 1.2 / min(a, b)
            outline = np.abs(q - 1.0) <= band
            img[outline] = np.maximum(img[outline], level)
        if region_ok:
            for _ in range(int(rng.integers(1, 6))):
                r = int(rng.integers(r_lo, r_hi))
                c = int(rng.integers(c_lo, c_hi))
                img[r, c] = max(img[r, c], float(rng.uniform(0.5, 1.0)))
        images.append(img)
    return images


def samples_to_measure(samples, support_size: int, seed: int = 0) -> DiscreteMeasure:
    """Quantize 1-D samples to a measure on k-means support points.

    The mass of a support point is the fraction of samples assigned to it
    (nearest centroid, ties to the lower index). Centroids that attract no
    samples are dropped; the support is sorted ascending.
    """
    samples = np.asarray(samples, dtype=np.float64).reshape(-1)
    if support_size > samples.shape[0]:
        raise ValueError(f"support_size {support_size} exceeds sample count {samples.shape[0]}")
    centers, labels = kmeans(samples.reshape(-1, 1), support_size, seed=seed)
    counts = np.bincount(labels, minlength=centers.shape[0]).astype(np.float64)
    keep = counts > 0
    pts = centers[keep]
    w = counts[keep]
    order = np.argsort(pts[:, 0], kind="stable")
    measure = DiscreteMeasure(pts[order], w[order], normalize=True, meta=MeasureMeta("samples", "generated"))
    return merge_duplicates(measure)


def kde_curve(samples, grid) -> np.ndarray:
    """Gaussian kernel density on a grid, Silverman bandwidth.

    Bandwidth 1.06 * sd * n^(-1/5); sample standard deviation with one
    delta degree of freedom. Returns raw density values (not normalized).
    """
    samples = np.asarray(samples, dtype=np.float64).reshape(-1)
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    n = samples.shape[0]
    if n < 2:
        raise ValueError("KDE needs at least 2 samples")
    sd = float(samples.std(ddof=1))
    if sd <= 0:
        raise ValueError("KDE needs samples with positive variance")
    h = 1.06 * sd * n ** (-0.2)
    z = (grid[:, None] - samples[None, :]) / h
    return np.exp(-0.5 * z * z).sum(axis=1) / (n * h * math.sqrt(2.0 * math.pi))


def reference_normal(n_points: int = 200, span: float = 6.0) -> DiscreteMeasure:
    """Standard normal discretized on equispaced points over [-span, span]."""
    grid = np.linspace(-span, span, n_points)
    dens = np.exp(-0.5 * grid * grid)
    return DiscreteMeasure(grid, dens, normalize=True, meta=MeasureMeta("normal-reference", "derived"))


def reference_student_t(df: int = 3, n_points: int = 200, tail: float = 1e-3) -> DiscreteMeasure:
    """Student-t discretized at equispaced quantiles with uniform mass.

    Points sit at the quantiles of t(df) from `tail` to 1 - `tail`, each
    carrying mass 1/n: the straightforward quantile sketch of the law,
    which keeps a proper share of mass in the heavy tails.
    """
    qs = np.linspace(tail, 1.0 - tail, n_points)
    grid = stats.t.ppf(qs, df)
    w = np.full(n_points, 1.0 / n_points)
    return DiscreteMeasure(grid, w, meta=MeasureMeta("student-t-reference", "derived"))


def region_mass(measure: DiscreteMeasure, region) -> float:
    """Total weight of atoms inside a half-open box [r0, r1) x [c0, c1)."""
    if measure.dim != 2:
        raise ValueError("region mass is defined for 2-D measures")
    r_lo, r_hi, c_lo, c_hi = (float(v) for v in region)
    pts = measure.points
    inside = (pts[:, 0] >= r_lo) & (pts[:, 0] < r_hi) & (pts[:, 1] >= c_lo) & (pts[:, 1] < c_hi)
    return float(measure.weights[inside].sum())


def _sweep_params(params: SinkhornParams | None) -> SinkhornParams:
    # Sweep default trades entropic sharpness for speed: a coarser epsilon
    # keeps the kernels in the fast linear domain and converges in far
    # fewer iterations, and the orderings under study survive the blur.
    return params or SinkhornParams(epsilon_rel=2e-2, tol=1e-7, max_iter=4000)


def _dataset_measures(cfg: ExperimentConfig, samples_list, threads: int):
    def build(idx_samples):
        idx, samples = idx_samples
        return samples_to_measure(samples, cfg.support_size, seed=_cell_seed(cfg.seed, _STREAM_SUPPORT, idx))

    return _pmap(build, enumerate(samples_list), threads)


def _barycenter_on_support(cfg, measures, support, lam, params):
    spec = CostSpec(p=cfg.p, lam=lam)
    problem = BarycenterProblem.uniform(measures, spec)
    res = ibp_barycenter(problem, support, params)
    bary = DiscreteMeasure(support, res.mass, normalize=True, meta=MeasureMeta("sweep-barycenter", "derived"))
    return prune(bary)


def run_lambda_sweep(cfg: ExperimentConfig, params: SinkhornParams | None = None, threads: int = 1, sink=None):
    """Sweep truncation levels against a known reference barycenter.

    For every ratio in cfg.ratio_grid (the single ratio 0 for the
    heavy-tail scenario) and every lam in [inf] + lambda_grid: quantize the
    datasets, solve the fixed-support barycenter, and record the exact
    untruncated W_p distance to the scenario's reference measure. lam = inf
    rows carry the metric wb_to_true, finite rows rwb_to_true; per-lam
    means across ratios are appended with the ratio sentinel -1.
    """
    if cfg.scenario not in ("contamination", "heavytail"):
        raise ValueError(f"lambda sweep expects contamination or heavytail, got {cfg.scenario!r}")
    params = _sweep_params(params)
    ref = reference_normal() if cfg.scenario == "contamination" else reference_student_t()
    eval_spec = CostSpec(p=cfg.p, lam=math.inf)
    lams = [math.inf] + list(cfg.lambda_grid)
    records: list[RunRecord] = []
    by_lam: dict[float, list[float]] = {lam: [] for lam in lams}

    for ratio_idx, ratio in enumerate(cfg.ratio_grid):
        cfg_r = dataclasses.replace(cfg, contamination_ratio=ratio)
        samples_list = gen_contamination(cfg_r) if cfg.scenario == "contamination" else gen_heavytail(cfg_r)
        measures = _dataset_measures(cfg_r, samples_list, threads)
        pooled = np.concatenate(samples_list).reshape(-1, 1)
        support, _ = kmeans(pooled, cfg.support_size, seed=_cell_seed(cfg.seed, _STREAM_BARY, ratio_idx))

        def solve(lam, measures=measures, support=support):
            bary = _barycenter_on_support(cfg_r, measures, support, lam, params)
            return exact_distance(bary, ref, eval_spec, oracle_cap=1_000_000).distance

        dists = _pmap(solve, lams, threads)
        for lam, dist in zip(lams, dists):
            metric = "wb_to_true" if math.isinf(lam) else "rwb_to_true"
            rec = RunRecord(cfg.scenario, lam, ratio, metric, dist, cfg.seed)
            records.append(rec)
            if sink is not None:
                sink(rec)
            by_lam[lam].append(dist)

    for lam in lams:
        metric = "wb_to_true_mean" if math.isinf(lam) else "rwb_to_true_mean"
        rec = RunRecord(cfg.scenario, lam, -1.0, metric, float(np.mean(by_lam[lam])), cfg.seed)
        records.append(rec)
        if sink is not None:
            sink(rec)
    return records


def run_ellipse_experiment(
    cfg: ExperimentConfig,
    params: SinkhornParams | None = None,
    outer_max: int = 12,
    outer_tol: float = 1e-5,
    threads: int = 1,
    sink=None,
):
    """Fixed- vs free-support barycenters of outlier-spiked ellipse images.

    For lam = inf (plain barycenter) and each grid lam: solve the
    fixed-support barycenter on a k-means support of R points, then run the
    free-support solver initialized at the pruned fixed-support result.
    Records objectives and the mass each barycenter leaves in the outlier
    region. Returns (records, artifacts) where artifacts maps each lam to
    its fixed/free measures and the problem; threads are accepted for
    interface symmetry but the solves are sequential.
    """
    if cfg.scenario != "ellipse_images":
        raise ValueError(f"ellipse experiment expects ellipse_images, got {cfg.scenario!r}")
    del threads
    params = _sweep_params(params)
    size = cfg.image_size
    region = cfg.outlier_region if cfg.outlier_region is not None else (0, size // 2, size // 2, size)
    images = gen_ellipse_images(cfg)
    measures = [image_to_measure(img, label=f"ellipse-{i}") for i, img in enumerate(images)]
    records: list[RunRecord] = []
    artifacts: dict[float, dict] = {}

    for lam_idx, lam in enumerate([math.inf] + list(cfg.lambda_grid)):
        spec = CostSpec(p=cfg.p, lam=lam)
        problem = BarycenterProblem.uniform(measures, spec)
        init = kmeans_init_support(problem, cfg.R, seed=_cell_seed(cfg.seed, _STREAM_BARY, lam_idx))
        fixed_res = ibp_barycenter(problem, init, params)
        fixed = prune(
            DiscreteMeasure(init, fixed_res.mass, normalize=True, meta=MeasureMeta("fixed-barycenter", "derived"))
        )
        free_res = free_support_barycenter(
            problem,
            fixed.points,
            params=params,
            outer_max=outer_max,
            outer_tol=outer_tol,
        )
        free = free_res.barycenter
        artifacts[lam] = {"fixed": fixed, "free": free, "problem": problem}
        rows = [
            RunRecord(cfg.scenario, lam, 0.0, "fixed_objective", fixed_res.objective, cfg.seed),
            RunRecord(cfg.scenario, lam, 0.0, "free_objective", free_res.objective_trace[-1], cfg.seed),
            RunRecord(cfg.scenario, lam, 0.0, "fixed_region_mass", region_mass(fixed, region), cfg.seed),
            RunRecord(cfg.scenario, lam, 0.0, "free_region_mass", region_mass(free, region), cfg.seed),
            RunRecord(cfg.scenario, lam, 0.0, "free_outer_iterations", float(free_res.outer_iterations), cfg.seed),
        ]
        records.extend(rows)
        if sink is not None:
            for rec in rows:
                sink(rec)
    return records, artifacts


def write_ellipse_artifacts(artifacts, out_dir, image_shape) -> list[str]:
    """Save each barycenter as measure CSV plus a rendered PGM image."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for lam, entry in artifacts.items():
        tag = "inf" if math.isinf(lam) else f"{lam:g}"
        for kind in ("fixed", "free"):
            base = out_dir / f"barycenter_lam_{tag}_{kind}"
            save_measure(entry[kind], base.with_suffix(".csv"))
            write_pgm(base.with_suffix(".pgm"), measure_to_image(entry[kind], image_shape))
            written.extend([str(base.with_suffix(".csv")), str(base.with_suffix(".pgm"))])
    return written


def run_pipeline1d(cfg: ExperimentConfig, params: SinkhornParams | None = None, tail: float = 0.005, threads: int = 1, sink=None):
    """Generic 1-D pipeline: quantile split, k-means supports, KDE weights.

    Each contaminated dataset is split at the two-sided `tail` quantiles.
    A cleaned measure is built from the inliers alone; a raw measure keeps
    everything (95% of the support budget on inliers, the rest on the
    tails). Weights come from the dataset's KDE evaluated at the support
    points. Records compare the plain barycenter of the raw datasets and
    its truncated variants against the barycenter of the cleaned datasets.
    """
    if cfg.scenario != "pipeline1d":
        raise ValueError(f"pipeline expects pipeline1d, got {cfg.scenario!r}")
    params = _sweep_params(params)
    samples_list = gen_contamination(cfg)

    def build(idx_samples):
        idx, samples = idx_samples
        lo, hi = np.quantile(samples, [tail, 1.0 - tail])
        inliers = samples[(samples >= lo) & (samples <= hi)]
        outliers = samples[(samples < lo) | (samples > hi)]
        k_in = max(1, int(round(0.95 * cfg.support_size)))
        seed_in = _cell_seed(cfg.seed, _STREAM_SUPPORT, idx, 0)
        centers_in, _ = kmeans(inliers.reshape(-1, 1), min(k_in, inliers.shape[0]), seed=seed_in)
        clean_w = kde_curve(inliers, centers_in[:, 0])
        clean = DiscreteMeasure(centers_in, clean_w, normalize=True, meta=MeasureMeta(f"clean-{idx}", "generated"))
        support = centers_in
        if outliers.shape[0] > 0:
            k_out = max(1, cfg.support_size - k_in)
            seed_out = _cell_seed(cfg.seed, _STREAM_SUPPORT, idx, 1)
            centers_out, _ = kmeans(outliers.reshape(-1, 1), min(k_out, outliers.shape[0]), seed=seed_out)
            support = np.vstack([centers_in, centers_out])
        raw_w = kde_curve(samples, support[:, 0])
        raw = DiscreteMeasure(support, raw_w, normalize=True, meta=MeasureMeta(f"raw-{idx}", "generated"))
        return merge_duplicates(clean), merge_duplicates(raw)

    pairs = _pmap(build, enumerate(samples_list), threads)
    cleans = [c for c, _ in pairs]
    raws = [r for _, r in pairs]

    def solve(measures, lam, pool_tag):
        spec = CostSpec(p=cfg.p, lam=lam)
        problem = BarycenterProblem.uniform(measures, spec)
        pooled = np.vstack([m.points for m in measures])
        pooled_w = np.hstack([m.weights for m in measures])
        pooled_w = pooled_w / pooled_w.sum()
        support, _ = kmeans(pooled, cfg.support_size, weights=pooled_w, seed=_cell_seed(cfg.seed, _STREAM_BARY, pool_tag))
        res = ibp_barycenter(problem, support, params)
        return prune(DiscreteMeasure(support, res.mass, normalize=True, meta=MeasureMeta("pipeline-bary", "derived")))

    wb_clean = solve(cleans, math.inf, 0)
    wb_raw = solve(raws, math.inf, 1)
    eval_spec = CostSpec(p=cfg.p, lam=math.inf)
    records = [
        RunRecord(
            cfg.scenario,
            math.inf,
            cfg.contamination_ratio,
            "wb_raw_to_clean",
            exact_distance(wb_raw, wb_clean, eval_spec, oracle_cap=1_000_000).distance,
            cfg.seed,
        )
    ]
    for lam in cfg.lambda_grid:
        rwb_raw = solve(raws, lam, 1)
        records.append(
            RunRecord(
                cfg.scenario,
                lam,
                cfg.contamination_ratio,
                "rwb_raw_to_clean",
                exact_distance(rwb_raw, wb_clean, eval_spec, oracle_cap=1_000_000).distance,
                cfg.seed,
            )
        )
    if sink is not None:
        for rec in records:
            sink(rec)
    return records


def run_scenario(cfg: ExperimentConfig, params: SinkhornParams | None = None, threads: int = 1, sink=None, artifacts_dir=None):
    """Dispatch a configured scenario; returns its records."""
    if cfg.scenario in ("contamination", "heavytail"):
        return run_lambda_sweep(cfg, params=params, threads=threads, sink=sink)
    if cfg.scenario == "ellipse_images":
        records, artifacts = run_ellipse_experiment(cfg, params=params, threads=threads, sink=sink)
        if artifacts_dir is not None:
            write_ellipse_artifacts(artifacts, artifacts_dir, (cfg.image_size, cfg.image_size))
        return records
    return run_pipeline1d(cfg, params=params, threads=threads, sink=sink)


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.17g}"


def write_records(records, path) -> None:
    """RunRecord CSV: header scenario,lambda,ratio,metric,value,seed."""
    lines = ["scenario,lambda,ratio,metric,value,seed"]
    for r in records:
        lines.append(f"{r.scenario},{_fmt(r.lam)},{_fmt(r.ratio)},{r.metric},{_fmt(r.value)},{r.seed}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_records(path) -> list:
    """Parse a RunRecord CSV written by write_records."""
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln]
    if not lines or lines[0] != "scenario,lambda,ratio,metric,value,seed":
        raise ValueError(f"{path}: not a run-record CSV")
    out = []
    for ln in lines[1:]:
        scenario, lam, ratio, metric, value, seed = ln.split(",")
        out.append(RunRecord(scenario, float(lam), float(ratio), metric, float(value), int(seed)))
    return out
