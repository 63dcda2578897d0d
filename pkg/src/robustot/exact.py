"""Exact linear-programming solvers for small transport instances.

Two oracles live here. `exact_distance` solves the discrete transport LP
between two measures under a truncated cost and returns an optimal coupling
at a vertex of the transport polytope. `exact_barycenter_lp` solves the
fixed-candidate barycenter problem as one joint LP over the barycenter
masses and all couplings. Both enforce a size cap so nobody accidentally
feeds them an instance sized for the scalable solvers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .cost import CostSpec, pairwise_cost
from .measures import DiscreteMeasure, MeasureMeta

if TYPE_CHECKING:
    from .free_support import BarycenterProblem

__all__ = [
    "DEFAULT_ORACLE_CAP",
    "MARGINAL_TOL",
    "OracleCapError",
    "SolverError",
    "CouplingPlan",
    "ExactResult",
    "exact_distance",
    "exact_barycenter_lp",
]

DEFAULT_ORACLE_CAP = 10_000
MARGINAL_TOL = 1e-9

# Dual simplex so solutions are vertices of the feasible polytope; tight
# primal tolerance (1e-10 is the smallest the solver accepts) because
# marginals are compared at 1e-9 downstream.
_LP_OPTIONS = {
    "presolve": True,
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-9,
}


def _solve_lp(obj, A, rhs, what: str):
    """Equality-form LP solve returning a basic solution.

    Presolve can misreport feasibility when a marginal carries weight below
    the primal tolerance (entropic dust), so a failed solve retries once
    without it before giving up.
    """
    res = linprog(obj, A_eq=A, b_eq=rhs, bounds=(0, None), method="highs-ds", options=_LP_OPTIONS)
    if not res.success:
        res = linprog(
            obj,
            A_eq=A,
            b_eq=rhs,
            bounds=(0, None),
            method="highs-ds",
            options={**_LP_OPTIONS, "presolve": False},
        )
    if not res.success:
        raise SolverError(f"{what} failed: {res.message}")
    return res


class OracleCapError(ValueError):
    """Instance exceeds the size cap of the exact oracle."""


class SolverError(RuntimeError):
    """The underlying LP solver failed to return an optimal solution."""


@dataclass(frozen=True)
class CouplingPlan:
    """A transport plan with the marginals it is supposed to match.

    Entries below -1e-9 are rejected; small negative noise from the solver
    is clipped to zero. Row and column sums must match the stated marginals
    to within 1e-9 in the sup norm.
    """

    matrix: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.min(initial=0.0) < -MARGINAL_TOL:
            raise SolverError(f"coupling has entry {m.min()} below -{MARGINAL_TOL}")
        m = np.maximum(m, 0.0)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        r = np.asarray(self.row_marginal, dtype=np.float64)
        c = np.asarray(self.col_marginal, dtype=np.float64)
        if m.shape != (r.shape[0], c.shape[0]):
            raise SolverError(f"coupling shape {m.shape} does not match marginals ({r.shape[0]}, {c.shape[0]})")
        row_err = np.abs(m.sum(axis=1) - r).max()
        col_err = np.abs(m.sum(axis=0) - c).max()
        if row_err > MARGINAL_TOL or col_err > MARGINAL_TOL:
            raise SolverError(f"coupling marginal error {max(row_err, col_err):.3e} exceeds {MARGINAL_TOL}")

    @property
    def marginal_error(self) -> float:
        row = np.abs(self.matrix.sum(axis=1) - self.row_marginal).max()
        col = np.abs(self.matrix.sum(axis=0) - self.col_marginal).max()
        return float(max(row, col))


@dataclass(frozen=True)
class ExactResult:
    """Optimal value and plan for one transport LP.

    `cost` is the optimal truncated-cost integral; `distance` is
    cost**(1/p), the metric value. `is_vertex` records that the solution
    came from a simplex basis.
    """

    cost: float
    distance: float
    plan: CouplingPlan
    is_vertex: bool
    iterations: int


def _check_cap(cells: int, oracle_cap: int) -> None:
    if cells > oracle_cap:
        raise OracleCapError(f"instance has {cells} cost cells, oracle cap is {oracle_cap}")


def exact_distance(
    a: DiscreteMeasure,
    b: DiscreteMeasure,
    spec: CostSpec,
    oracle_cap: int = DEFAULT_ORACLE_CAP,
) -> ExactResult:
    """Solve the transport LP between two measures exactly.

    Minimizes <C, P> over couplings P with row sums a.weights and column
    sums b.weights, where C is the truncated cost matrix. The last column
    constraint is dropped (it is implied by the rest), which leaves a
    full-rank system, so the simplex vertex has at most R + S - 1 nonzero
    entries.
    """
    if a.dim != b.dim:
        raise ValueError(f"measures live in different dims: {a.dim} vs {b.dim}")
    R, S = a.size, b.size
    _check_cap(R * S, oracle_cap)
    C = pairwise_cost(a.points, b.points, spec)

    row_block = sp.kron(sp.eye(R), np.ones((1, S)), format="csr")
    col_block = sp.kron(np.ones((1, R)), sp.eye(S), format="csr")[:-1]
    A = sp.vstack([row_block, col_block], format="csr")
    rhs = np.concatenate([a.weights, b.weights[:-1]])

    res = _solve_lp(C.ravel(), A, rhs, "transport LP")
    plan = CouplingPlan(res.x.reshape(R, S), a.weights, b.weights)
    cost = max(float(res.fun), 0.0)
    return ExactResult(
        cost=cost,
        distance=cost ** (1.0 / spec.p),
        plan=plan,
        is_vertex=True,
        iterations=int(res.nit),
    )


def _barycenter_lp(problem, candidates: np.ndarray, oracle_cap: int):
    """Joint LP over barycenter masses z and one coupling per input.

    Variables are [z (R) | P_1 (R*S_1) | ... | P_n (R*S_n)]. For each input
    i the R coupling-row constraints tie P_i's row sums to z, and the
    column constraints pin P_i's column sums to that input's weights. One
    column constraint per input beyond the first is dropped: each block
    already forces total mass to match input 0's, so keeping them all would
    leave n - 1 dependent rows and non-vertex bases.
    """
    candidates = np.asarray(candidates, dtype=np.float64)
    if candidates.ndim == 1:
        candidates = candidates.reshape(-1, 1)
    R = candidates.shape[0]
    if R < 1:
        raise ValueError("no candidate points")
    if candidates.shape[1] != problem.dim:
        raise ValueError(f"candidates have dim {candidates.shape[1]}, inputs have dim {problem.dim}")
    sizes = [m.size for m in problem.inputs]
    _check_cap(R * sum(sizes), oracle_cap)

    costs = [pairwise_cost(candidates, m.points, problem.spec) for m in problem.inputs]
    obj = np.concatenate([np.zeros(R)] + [w * C.ravel() for w, C in zip(problem.weights, costs)])

    blocks = []
    rhs_parts = []
    offset = R
    total = R + sum(R * s for s in sizes)
    for i, (m, S) in enumerate(zip(problem.inputs, sizes)):
        # Row-sum ties: -z_r + sum_s P_i[r, s] = 0 for each barycenter atom r.
        left = sp.csr_matrix((-np.ones(R), (np.arange(R), np.arange(R))), shape=(R, R))
        mid = sp.csr_matrix((R, offset - R))
        rows = sp.kron(sp.eye(R), np.ones((1, S)), format="csr")
        right = sp.csr_matrix((R, total - offset - R * S))
        blocks.append(sp.hstack([left, mid, rows, right], format="csr"))
        rhs_parts.append(np.zeros(R))
        # Column sums: P_i's columns must reproduce input i's weights. Drop
        # the last row for every input after the first; those rows are
        # implied once block 0 fixes the shared total mass.
        cols = sp.kron(np.ones((1, R)), sp.eye(S), format="csr")
        keep = S if i == 0 else S - 1
        cols = cols[:keep]
        mid = sp.csr_matrix((keep, offset))
        right = sp.csr_matrix((keep, total - offset - R * S))
        blocks.append(sp.hstack([mid, cols, right], format="csr"))
        rhs_parts.append(m.weights[:keep])
        offset += R * S

    A = sp.vstack(blocks, format="csr")
    rhs = np.concatenate(rhs_parts)
    res = _solve_lp(obj, A, rhs, "barycenter LP")

    z = np.maximum(res.x[:R], 0.0)
    z_total = float(z.sum())
    if z_total <= 0:
        raise SolverError("barycenter LP returned zero total mass")
    measure = DiscreteMeasure(candidates, z, normalize=True, meta=MeasureMeta("barycenter-lp", "derived"))
    plans = []
    offset = R
    for m, S in zip(problem.inputs, sizes):
        P = res.x[offset : offset + R * S].reshape(R, S)
        plans.append(CouplingPlan(P / z_total, measure.weights, m.weights))
        offset += R * S
    objective = max(float(res.fun), 0.0)
    return measure, objective, plans


def exact_barycenter_lp(
    problem: "BarycenterProblem",
    candidates,
    oracle_cap: int = DEFAULT_ORACLE_CAP,
):
    """Optimal barycenter masses over a fixed candidate support.

    Returns (measure, objective): the optimizing measure on the candidate
    points (zero-mass atoms retained, so the support equals the candidate
    set) and the optimal weighted sum of truncated transport costs. The
    solution is a vertex of the joint feasible polytope, which is what
    makes the support-size bound testable on its mass pattern.
    """
    measure, objective, _ = _barycenter_lp(problem, candidates, oracle_cap)
    return measure, objective
