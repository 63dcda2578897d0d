"""Discrete optimal transport with truncated ground costs.

Distances that cap how far mass can profitably travel, barycenters under
those distances (fixed and free support), exact small-instance solvers
for reference values, and a seeded simulation harness.
"""

from .cost import CostMatrix, CostSpec, cost_matrix, pairwise_cost, truncated_cost
from .entropic import (
    FixedSupportResult,
    ScalingError,
    SinkhornParams,
    SinkhornResult,
    ibp_barycenter,
    round_to_marginals,
    sinkhorn_distance,
)
from .exact import (
    DEFAULT_ORACLE_CAP,
    CouplingPlan,
    ExactResult,
    OracleCapError,
    SolverError,
    exact_barycenter_lp,
    exact_distance,
)
from .experiments import (
    ExperimentConfig,
    RunRecord,
    desk_config,
    gen_contamination,
    gen_ellipse_images,
    gen_heavytail,
    kde_curve,
    full_scale_config,
    read_records,
    reference_normal,
    reference_student_t,
    region_mass,
    run_ellipse_experiment,
    run_lambda_sweep,
    run_pipeline1d,
    run_scenario,
    samples_to_measure,
    write_records,
)
from .free_support import (
    BarycenterProblem,
    FreeSupportResult,
    candidate_supports,
    free_support_barycenter,
    kmeans_init_support,
    objective_f,
    update_support,
)
from .kmeans import kmeans
from .measures import (
    DiscreteMeasure,
    MeasureError,
    MeasureMeta,
    image_to_measure,
    load_measure,
    measure_to_image,
    merge_duplicates,
    pooled_diameter,
    prune,
    read_pgm,
    save_measure,
    write_pgm,
)

__version__ = "0.1.0"

__all__ = [
    "BarycenterProblem",
    "CostMatrix",
    "CostSpec",
    "CouplingPlan",
    "DEFAULT_ORACLE_CAP",
    "DiscreteMeasure",
    "ExactResult",
    "ExperimentConfig",
    "FixedSupportResult",
    "FreeSupportResult",
    "MeasureError",
    "MeasureMeta",
    "OracleCapError",
    "RunRecord",
    "ScalingError",
    "SinkhornParams",
    "SinkhornResult",
    "SolverError",
    "candidate_supports",
    "cost_matrix",
    "desk_config",
    "exact_barycenter_lp",
    "exact_distance",
    "free_support_barycenter",
    "gen_contamination",
    "gen_ellipse_images",
    "gen_heavytail",
    "ibp_barycenter",
    "image_to_measure",
    "kde_curve",
    "kmeans",
    "kmeans_init_support",
    "load_measure",
    "measure_to_image",
    "merge_duplicates",
    "objective_f",
    "full_scale_config",
    "pairwise_cost",
    "pooled_diameter",
    "prune",
    "read_pgm",
    "read_records",
    "reference_normal",
    "reference_student_t",
    "region_mass",
    "round_to_marginals",
    "run_ellipse_experiment",
    "run_lambda_sweep",
    "run_pipeline1d",
    "run_scenario",
    "samples_to_measure",
    "save_measure",
    "sinkhorn_distance",
    "truncated_cost",
    "update_support",
    "write_pgm",
    "write_records",
]
