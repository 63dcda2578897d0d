"""Entropic transport solvers.

`sinkhorn_distance` runs matrix scaling on the truncated-cost kernel and
reports a feasible plan obtained by rounding the scaled kernel back onto
the marginals. `ibp_barycenter` runs iterative Bregman projections for the
fixed-support barycenter: one scaling pair per input measure coupled
through a shared barycenter mass vector.

Both solvers pick the regularization as a fraction of the cost scale and
switch to log-domain arithmetic when that fraction is small enough that
the kernel would underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import logsumexp

from .cost import CostSpec, pairwise_cost
from .exact import CouplingPlan
from .measures import DiscreteMeasure

if TYPE_CHECKING:
    from .free_support import BarycenterProblem

__all__ = [
    "ScalingError",
    "SinkhornParams",
    "SinkhornResult",
    "FixedSupportResult",
    "sinkhorn_distance",
    "ibp_barycenter",
    "round_to_marginals",
]

# Below epsilon / scale = 1e-2 the linear-domain kernel exp(-C / eps) can
# underflow to exact zero rows; switch to log-domain scaling there.
_LOG_DOMAIN_SWITCH = 1e-2


class ScalingError(RuntimeError):
    """Matrix scaling produced a zero or non-finite scaling vector."""


@dataclass(frozen=True)
class SinkhornParams:
    """Knobs for the scaling solvers.

    epsilon, when given, is the absolute regularization strength. Otherwise
    it is epsilon_rel times the cost scale: lam**p when the cost truncates,
    else the largest cost entry actually seen. log_domain=None lets the
    solver decide by the underflow rule; True or False forces the choice.
    """

    epsilon: float | None = None
    epsilon_rel: float = 5e-3
    max_iter: int = 10_000
    tol: float = 1e-8
    log_domain: bool | None = None

    def __post_init__(self):
        if self.epsilon is not None and not (self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if not (self.epsilon_rel > 0):
            raise ValueError(f"epsilon_rel must be positive, got {self.epsilon_rel!r}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not (self.tol > 0):
            raise ValueError("tol must be positive")

    def resolve(self, max_cost: float, spec: CostSpec) -> tuple[float, bool]:
        """Concrete (epsilon, use_log_domain) for a given cost matrix."""
        if spec.truncates:
            scale = spec.lam**spec.p
        elif max_cost > 0:
            scale = max_cost
        else:
            scale = 1.0
        eps = self.epsilon if self.epsilon is not None else self.epsilon_rel * scale
        if self.log_domain is not None:
            return eps, self.log_domain
        return eps, (eps / scale) < _LOG_DOMAIN_SWITCH


@dataclass(frozen=True)
class SinkhornResult:
    """Transport value from the rounded plan plus solver diagnostics."""

    distance: float
    cost: float
    plan: CouplingPlan
    iterations: int
    marginal_error: float
    epsilon: float
    log_domain: bool


@dataclass(frozen=True)
class FixedSupportResult:
    """Barycenter masses on a fixed support plus per-input plans."""

    mass: np.ndarray
    objective: float
    iterations: int
    marginal_error: float
    support: np.ndarray
    plans: tuple


def round_to_marginals(plan: np.ndarray, row: np.ndarray, col: np.ndarray) -> np.ndarray:
    """Project an approximate plan onto exact row and column marginals.

    Rows with excess mass are scaled down to their targets, then columns
    likewise; the remaining deficits are filled by a rank-one patch
    (outer product of the deficit vectors over the total deficit). The
    result is nonnegative with exact marginals up to roundoff.
    """
    P = np.array(plan, dtype=np.float64)
    rs = P.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(rs > 0, np.minimum(1.0, row / np.where(rs > 0, rs, 1.0)), 0.0)
    P *= scale[:, None]
    cs = P.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(cs > 0, np.minimum(1.0, col / np.where(cs > 0, cs, 1.0)), 0.0)
    P *= scale[None, :]
    row_def = row - P.sum(axis=1)
    col_def = col - P.sum(axis=0)
    deficit = row_def.sum()
    if deficit > 1e-300:
        P += np.outer(row_def, col_def) / deficit
    return P


def _safe_div(num: np.ndarray, den: np.ndarray, what: str) -> np.ndarray:
    """Elementwise num / den where den may have zeros matched by zero num."""
    bad = (den <= 0) & (num > 0)
    if bad.any():
        raise ScalingError(f"{what}: zero kernel mass against positive marginal")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return out


def _sinkhorn_linear(C, a, b, eps, max_iter, tol):
    K = np.exp(-C / eps)
    u = np.ones_like(a)
    v = np.ones_like(b)
    err = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        Kv = K @ v
        # Pre-update residual: how far the current plan's row sums are from a.
        err = float(np.abs(u * Kv - a).sum())
        if err < tol:
            break
        u = _safe_div(a, Kv, "row scaling")
        v = _safe_div(b, K.T @ u, "column scaling")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ScalingError("scaling vectors overflowed; lower epsilon_rel or force log domain")
    P = u[:, None] * K * v[None, :]
    return P, it, err


def _sinkhorn_log(C, a, b, eps, max_iter, tol):
    # Scaled log potentials: plan = exp(lu[:, None] + lv[None, :] - C / eps).
    negC = -C / eps
    with np.errstate(divide="ignore"):
        la = np.log(a)
        lb = np.log(b)
    lu = np.zeros_like(a)
    lv = np.zeros_like(b)
    err = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        lKv = logsumexp(negC + lv[None, :], axis=1)
        err = float(np.abs(np.exp(lu + lKv) - a).sum())
        if err < tol:
            break
        lu = la - lKv
        lv = lb - logsumexp(negC.T + lu[None, :], axis=1)
    P = np.exp(lu[:, None] + negC + lv[None, :])
    return P, it, err


def sinkhorn_distance(
    a: DiscreteMeasure,
    b: DiscreteMeasure,
    spec: CostSpec,
    params: SinkhornParams | None = None,
) -> SinkhornResult:
    """Entropically regularized transport value between two measures.

    The scaled kernel is rounded onto the exact marginals before costing,
    so the reported cost is that of a genuinely feasible plan (an upper
    bound on the optimum) rather than the regularized surrogate.
    """
    if a.dim != b.dim:
        raise ValueError(f"measures live in different dims: {a.dim} vs {b.dim}")
    params = params or SinkhornParams()
    C = pairwise_cost(a.points, b.points, spec)
    eps, use_log = params.resolve(float(C.max(initial=0.0)), spec)
    if use_log:
        P, it, err = _sinkhorn_log(C, a.weights, b.weights, eps, params.max_iter, params.tol)
    else:
        P, it, err = _sinkhorn_linear(C, a.weights, b.weights, eps, params.max_iter, params.tol)
    if not np.all(np.isfinite(P)):
        raise ScalingError("scaling produced a non-finite plan")
    del err  # scaling residual; the reported error describes the rounded plan
    rounded = round_to_marginals(P, a.weights, b.weights)
    plan = CouplingPlan(rounded, a.weights, b.weights)
    cost = float((rounded * C).sum())
    return SinkhornResult(
        distance=cost ** (1.0 / spec.p),
        cost=cost,
        plan=plan,
        iterations=it,
        marginal_error=plan.marginal_error,
        epsilon=eps,
        log_domain=use_log,
    )


def ibp_barycenter(
    problem: "BarycenterProblem",
    support,
    params: SinkhornParams | None = None,
) -> FixedSupportResult:
    """Barycenter masses on a fixed support by iterative Bregman projection.

    Each sweep updates, for every input i with kernel K_i: the column
    scaling v_i from the input's weights, the shared mass vector a as the
    weighted geometric mean of K_i v_i, then the row scaling u_i from a.
    Stops when successive mass vectors differ by less than tol in L1.

    The per-input kernels are padded to a common width and stacked, so one
    sweep is a couple of batched tensor contractions instead of a Python
    loop over inputs. Padded columns carry zero target mass, which zeroes
    their scalings and keeps them inert.
    """
    support = np.asarray(support, dtype=np.float64)
    if support.ndim == 1:
        support = support.reshape(-1, 1)
    if support.shape[0] < 1:
        raise ValueError("empty support")
    if support.shape[1] != problem.dim:
        raise ValueError(f"support has dim {support.shape[1]}, inputs have dim {problem.dim}")
    inputs = problem.inputs
    weights = np.asarray(problem.weights)
    spec = problem.spec
    params = params or SinkhornParams()
    costs = [pairwise_cost(support, m.points, spec) for m in inputs]
    max_cost = max(float(C.max(initial=0.0)) for C in costs)
    eps, use_log = params.resolve(max_cost, spec)
    n = len(inputs)
    R = support.shape[0]
    S = max(m.size for m in inputs)
    pad_cost = spec.lam**spec.p if spec.truncates else max(max_cost, 1.0)

    C3 = np.full((n, R, S), pad_cost)
    q3 = np.zeros((n, S))
    for i, m in enumerate(inputs):
        C3[i, :, : m.size] = costs[i]
        q3[i, : m.size] = m.weights

    if use_log:
        negC = -C3 / eps
        with np.errstate(divide="ignore"):
            lq = np.log(q3)
        lu = np.zeros((n, R))
        la = np.full(R, -math.log(R))
        err = math.inf
        it = 0
        for it in range(1, params.max_iter + 1):
            lKu = logsumexp(negC + lu[:, :, None], axis=1)
            lv = lq - lKu
            lKv = logsumexp(negC + lv[:, None, :], axis=2)
            # Zero-weight inputs contribute factor 1 to the geometric mean;
            # masking avoids 0 * (-inf) at empty kernel rows.
            terms = np.where(weights[:, None] > 0, weights[:, None] * lKv, 0.0)
            la_new = terms.sum(axis=0)
            lu = la_new[None, :] - lKv
            err = float(np.abs(np.exp(la_new) - np.exp(la)).sum())
            la = la_new
            if it > 1 and err < params.tol:
                break
        a = np.exp(la)
        raw = np.exp(lu[:, :, None] + negC + lv[:, None, :])
    else:
        K = np.exp(-C3 / eps)
        u = np.ones((n, R))
        a = np.full(R, 1.0 / R)
        err = math.inf
        it = 0
        for it in range(1, params.max_iter + 1):
            Ku = np.einsum("nrs,nr->ns", K, u)
            v = _safe_div(q3, Ku, "column scaling")
            Kv = np.einsum("nrs,ns->nr", K, v)
            # Weighted geometric mean, taken in log space; a zero in any
            # positive-weight K_i v_i row legitimately zeroes that atom.
            with np.errstate(divide="ignore"):
                logKv = np.log(Kv)
            terms = np.where(weights[:, None] > 0, weights[:, None] * logKv, 0.0)
            a_new = np.exp(terms.sum(axis=0))
            if not np.all(np.isfinite(a_new)):
                raise ScalingError("barycenter mass overflowed; lower epsilon_rel or force log domain")
            u = _safe_div(np.broadcast_to(a_new, (n, R)), Kv, "row scaling")
            err = float(np.abs(a_new - a).sum())
            a = a_new
            if it > 1 and err < params.tol:
                break
        raw = u[:, :, None] * K * v[:, None, :]

    total = float(a.sum())
    if not (total > 0 and math.isfinite(total)):
        raise ScalingError("barycenter mass degenerated to zero or non-finite total")
    mass = a / total
    plans = []
    objective = 0.0
    for i, m in enumerate(inputs):
        rounded = round_to_marginals(raw[i, :, : m.size], mass, m.weights)
        plans.append(CouplingPlan(rounded, mass, m.weights))
        objective += float(weights[i] * (rounded * costs[i]).sum())
    return FixedSupportResult(
        mass=mass,
        objective=objective,
        iterations=it,
        marginal_error=err,
        support=support,
        plans=tuple(plans),
    )
