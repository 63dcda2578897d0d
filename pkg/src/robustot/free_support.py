"""Free-support barycenters under truncated costs.

The solver alternates two steps: a mass solve on the current support
(entropic by default, exact LP under the oracle cap) and a support update
that relocates every barycenter atom to lower its own share of the
objective. The update objective min over z of sum_j W_j min{|z - x_j|,
lam}^p is not convex once the cost truncates, so each atom runs a
majorize-minimize scheme: targets closer than lam keep their exact
p-th-power cost, saturated targets are pinned at the constant lam^p, and
the resulting surrogate is minimized in closed form (p = 2) or by
Weiszfeld iterations (p = 1). The surrogate touches the objective at the
current point and dominates it everywhere, so every accepted move lowers
the true objective and the outer trace is non-increasing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .cost import CostSpec, pairwise_cost
from .entropic import SinkhornParams, ibp_barycenter, sinkhorn_distance
from .exact import DEFAULT_ORACLE_CAP, OracleCapError, _barycenter_lp, exact_distance
from .measures import DEFAULT_PRUNE_THRESHOLD, DiscreteMeasure, MeasureMeta, prune

__all__ = [
    "BarycenterProblem",
    "FreeSupportResult",
    "objective_f",
    "update_support",
    "free_support_barycenter",
    "candidate_supports",
    "kmeans_init_support",
]

_MM_MAX_ITER = 100
_MM_MOVE_TOL = 1e-10
_COINCIDENCE_TOL = 1e-12


@dataclass(frozen=True)
class BarycenterProblem:
    """Inputs, their weights, and the cost under which to average them.

    Weights are renormalized to sum to one. The objective exponent is tied
    to the cost exponent p (the k_equals_p flag records that convention and
    rejects attempts to change it).
    """

    inputs: tuple
    weights: np.ndarray
    spec: CostSpec
    k_equals_p: bool = True

    def __post_init__(self):
        inputs = tuple(self.inputs)
        if not inputs:
            raise ValueError("barycenter problem needs at least one input measure")
        d = inputs[0].dim
        for m in inputs:
            if m.dim != d:
                raise ValueError(f"input dims differ: {m.dim} vs {d}")
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != len(inputs):
            raise ValueError(f"{w.shape[0]} weights for {len(inputs)} inputs")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        total = w.sum()
        if total <= 0:
            raise ValueError("weights must have positive total")
        w = w / total
        w.setflags(write=False)
        if not self.k_equals_p:
            raise ValueError("only the k = p objective convention is supported")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, inputs, spec: CostSpec) -> "BarycenterProblem":
        inputs = tuple(inputs)
        return cls(inputs, np.full(len(inputs), 1.0 / len(inputs)), spec)

    @property
    def dim(self) -> int:
        return self.inputs[0].dim

    @property
    def n(self) -> int:
        return len(self.inputs)


@dataclass(frozen=True)
class FreeSupportResult:
    """Final barycenter plus the per-outer-iteration objective trace."""

    barycenter: DiscreteMeasure
    objective_trace: tuple
    outer_iterations: int
    converged: bool


def objective_f(
    candidate: DiscreteMeasure,
    problem: BarycenterProblem,
    method: str = "exact",
    params: SinkhornParams | None = None,
    oracle_cap: int = DEFAULT_ORACLE_CAP,
) -> float:
    """Weighted sum of p-th-power truncated transport costs to the inputs.

    The exact method prices each term by LP; the sinkhorn method uses the
    rounded entropic plan, so its value is a feasible upper bound.
    """
    if candidate.dim != problem.dim:
        raise ValueError(f"candidate dim {candidate.dim} does not match inputs dim {problem.dim}")
    total = 0.0
    for w, m in zip(problem.weights, problem.inputs):
        if method == "exact":
            c = exact_distance(candidate, m, problem.spec, oracle_cap=oracle_cap).cost
        elif method == "sinkhorn":
            c = sinkhorn_distance(candidate, m, problem.spec, params).cost
        else:
            raise ValueError(f"unknown objective method {method!r}")
        total += float(w) * c
    return total


def _row_objective(z: np.ndarray, targets: np.ndarray, w: np.ndarray, spec: CostSpec) -> float:
    """g(z) = sum_j w_j min{|z - x_j|, lam}^p for one barycenter atom."""
    return float(w @ pairwise_cost(z.reshape(1, -1), targets, spec)[0])


def _weiszfeld(start, targets, w, max_iter: int = 100, tol: float = _MM_MOVE_TOL):
    """Weighted geometric median of the targets, started at `start`.

    Plain Weiszfeld steps, with the coincidence case handled explicitly:
    when the iterate sits on a target, the step stops if the pull of the
    remaining points is no larger than the local weight (that is the
    subgradient optimality condition there) and otherwise retreats along
    the standard damped update.
    """
    y = np.array(start, dtype=np.float64)
    for _ in range(max_iter):
        diff = targets - y
        d = np.linalg.norm(diff, axis=1)
        near = d <= _COINCIDENCE_TOL
        if near.any():
            w_near = float(w[near].sum())
            far = ~near
            if not far.any():
                return y
            inv = w[far] / d[far]
            pull = (diff[far] * inv[:, None]).sum(axis=0)
            r = float(np.linalg.norm(pull))
            if r <= w_near:
                return y
            t_point = (targets[far] * inv[:, None]).sum(axis=0) / inv.sum()
            new = max(0.0, 1.0 - w_near / r) * t_point + min(1.0, w_near / r) * y
        else:
            inv = w / d
            denom = inv.sum()
            if denom <= 0:
                return y
            new = (targets * inv[:, None]).sum(axis=0) / denom
        if np.linalg.norm(new - y) < tol:
            return new
        y = new
    return y


def _descend_point(start, targets, w, spec: CostSpec, g_trace=None):
    """Majorize-minimize descent of one atom's objective g.

    Each pass classifies targets against the current point: within lam they
    keep their exact cost term, at or beyond lam they are frozen at the
    constant lam^p. Minimizing the frozen surrogate (weighted mean for
    p = 2, geometric median for p = 1) cannot increase g. When every target
    is saturated the surrogate is flat, so the atom snaps to the heaviest
    target (first index on ties), which strictly helps whenever that target
    carries weight. Moves are only accepted on strict decrease of g, so the
    returned point always satisfies g(out) <= g(start).
    """
    if spec.p not in (1.0, 2.0):
        raise ValueError(f"support update implemented for p in {{1, 2}} only, got p={spec.p}")
    y = np.array(start, dtype=np.float64)
    g_y = _row_objective(y, targets, w, spec)
    if g_trace is not None:
        g_trace.append(g_y)
    for _ in range(_MM_MAX_ITER):
        d = np.linalg.norm(targets - y, axis=1)
        active = (d < spec.lam) & (w > 0)
        if not active.any():
            if w.sum() <= 0:
                break
            proposal = targets[int(np.argmax(w))]
        elif spec.p == 2.0:
            wa = w[active]
            proposal = (targets[active] * wa[:, None]).sum(axis=0) / wa.sum()
        else:
            proposal = _weiszfeld(y, targets[active], w[active])
        g_new = _row_objective(proposal, targets, w, spec)
        if not (g_new < g_y):
            break
        moved = float(np.linalg.norm(proposal - y))
        y, g_y = proposal, g_new
        if g_trace is not None:
            g_trace.append(g_y)
        if moved < _MM_MOVE_TOL:
            break
    return y


def update_support(current: DiscreteMeasure, plans, problem: BarycenterProblem) -> np.ndarray:
    """Relocate every barycenter atom against the given transport plans.

    For atom r the targets are all input support points pooled, weighted
    by w_i times the plan mass row r sends to each point. Atoms whose rows
    carry no mass stay where they are (their objective share is zero, so
    any move would be arbitrary). Returns the new (R, d) support stack.
    """
    if len(plans) != problem.n:
        raise ValueError(f"{len(plans)} plans for {problem.n} inputs")
    targets = np.vstack([m.points for m in problem.inputs])
    rows = np.hstack([w * p.matrix for w, p in zip(problem.weights, plans)])
    if rows.shape != (current.size, targets.shape[0]):
        raise ValueError(f"plan stack shape {rows.shape} does not match (R={current.size}, total targets)")
    out = np.array(current.points, dtype=np.float64)
    for r in range(current.size):
        w_r = rows[r]
        if w_r.sum() <= 0:
            continue
        out[r] = _descend_point(out[r], targets, w_r, problem.spec)
    return out


def _carried_objective(support: np.ndarray, plans, problem: BarycenterProblem) -> float:
    """Objective of the current plans re-priced at a relocated support."""
    total = 0.0
    for w, p, m in zip(problem.weights, plans, problem.inputs):
        C = pairwise_cost(support, m.points, problem.spec)
        total += float(w) * float((p.matrix * C).sum())
    return total


def _solve_mass(support, problem, solver, params, oracle_cap):
    """Fixed-support mass solve; returns (mass, plans, feasible objective)."""
    if solver == "ibp":
        res = ibp_barycenter(problem, support, params)
        return res.mass, list(res.plans), res.objective
    if solver == "exact":
        measure, objective, plans = _barycenter_lp(problem, support, oracle_cap)
        return measure.weights, plans, objective
    raise ValueError(f"unknown mass solver {solver!r}")


def free_support_barycenter(
    problem: BarycenterProblem,
    init_support,
    params: SinkhornParams | None = None,
    outer_max: int = 50,
    outer_tol: float = 1e-7,
    solver: str = "ibp",
    oracle_cap: int = DEFAULT_ORACLE_CAP,
) -> FreeSupportResult:
    """Alternate fixed-support mass solves with support relocation.

    One outer iteration is: relocate the support against the current
    feasible plans, then re-solve the masses on the moved support. The
    trace records the objective of the carried plans right after each
    relocation; the relocation cannot increase it, and the fresh mass
    solve can only lower it again, so the trace is non-increasing. With
    the entropic solver a fresh solve can wobble above the carried value
    by more than roundoff; that step is rejected and the run stops there,
    keeping the trace monotone. Convergence means the per-iteration
    relative decrease fell below outer_tol (or a rejected entropic step);
    exhausting outer_max without that leaves converged False.
    """
    if outer_max < 1:
        raise ValueError("outer_max must be at least 1")
    if not (outer_tol > 0):
        raise ValueError("outer_tol must be positive")
    support = np.asarray(init_support, dtype=np.float64)
    if support.ndim == 1:
        support = support.reshape(-1, 1)
    if support.shape[0] < 1:
        raise ValueError("empty initial support")
    if support.shape[1] != problem.dim:
        raise ValueError(f"init support has dim {support.shape[1]}, inputs have dim {problem.dim}")

    mass, plans, f_mass = _solve_mass(support, problem, solver, params, oracle_cap)
    trace: list[float] = []
    converged = False
    iterations = 0
    for t in range(1, outer_max + 1):
        iterations = t
        carrier = DiscreteMeasure(support, mass, normalize=True)
        new_support = update_support(carrier, plans, problem)
        f_post = _carried_objective(new_support, plans, problem)
        if f_post > f_mass + 1e-12:
            # Relocation is guaranteed non-increasing row by row; exceeding
            # the pre-move value means pure summation noise, so stay put.
            new_support, f_post = support, f_mass
        support = new_support
        trace.append(f_post)
        if len(trace) >= 2 and trace[-2] - trace[-1] <= outer_tol * max(1.0, abs(trace[-2])):
            converged = True
            break
        if t == outer_max:
            break
        mass_new, plans_new, f_new = _solve_mass(support, problem, solver, params, oracle_cap)
        if f_new > trace[-1] + 1e-12:
            # Entropic wobble: the fresh solve lost more to regularization
            # bias than the relocation gained. Keep the better iterate.
            converged = True
            break
        mass, plans, f_mass = mass_new, plans_new, f_new

    bary = DiscreteMeasure(support, mass, normalize=True, meta=MeasureMeta("free-support barycenter", "derived"))
    bary = prune(bary, DEFAULT_PRUNE_THRESHOLD)
    return FreeSupportResult(
        barycenter=bary,
        objective_trace=tuple(trace),
        outer_iterations=iterations,
        converged=converged,
    )


def candidate_supports(problem: BarycenterProblem, cap: int = DEFAULT_ORACLE_CAP) -> np.ndarray:
    """Stationary points for every one-point-per-input target tuple.

    Enumerates all tuples of one support point per input and descends the
    weighted objective from the heaviest-weighted target of each tuple
    (ties to the lowest input index). Candidates closer than 1e-9 are
    merged. The optimal barycenter over any support is supported on points
    of this form, so these candidates feed the exact LP.
    """
    count = 1
    for m in problem.inputs:
        count *= m.size
        if count > cap:
            raise OracleCapError(f"candidate enumeration needs {count}+ tuples, cap is {cap}")
    start_idx = int(np.argmax(problem.weights))
    out: list[np.ndarray] = []
    for combo in itertools.product(*(range(m.size) for m in problem.inputs)):
        targets = np.array([m.points[j] for m, j in zip(problem.inputs, combo)], dtype=np.float64)
        point = _descend_point(targets[start_idx], targets, np.asarray(problem.weights), problem.spec)
        if all(np.linalg.norm(point - q) > 1e-9 for q in out):
            out.append(point)
    return np.array(out)


def kmeans_init_support(problem: BarycenterProblem, R: int, seed: int = 0) -> np.ndarray:
    """Initial support: k-means centroids of the pooled weighted supports."""
    from .kmeans import kmeans

    pts = np.vstack([m.points for m in problem.inputs])
    w = np.hstack([wi * m.weights for wi, m in zip(problem.weights, problem.inputs)])
    centers, _ = kmeans(pts, R, weights=w, seed=seed)
    return centers
