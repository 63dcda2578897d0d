import math

import numpy as np
import pytest

from robustot import (
    BarycenterProblem,
    CostSpec,
    CouplingPlan,
    DiscreteMeasure,
    OracleCapError,
    SolverError,
    candidate_supports,
    exact_barycenter_lp,
    exact_distance,
    pooled_diameter,
)

from helpers import dirac, random_measure


def test_dirac_distances():
    d0, d10 = dirac(0.0), dirac(10.0)
    res = exact_distance(d0, d10, CostSpec(p=1.0, lam=3.0))
    assert res.distance == pytest.approx(3.0, abs=1e-12)
    assert res.is_vertex

    mix = DiscreteMeasure([[0.0], [10.0]], [0.5, 0.5])
    res = exact_distance(mix, d0, CostSpec(p=2.0, lam=3.0))
    assert res.cost == pytest.approx(4.5, abs=1e-12)
    assert res.distance == pytest.approx(math.sqrt(4.5), abs=1e-12)


def test_two_by_two_instance():
    a = DiscreteMeasure([[0.0], [2.0]], [0.5, 0.5])
    b = DiscreteMeasure([[1.0], [3.0]], [0.5, 0.5])
    res = exact_distance(a, b, CostSpec(p=1.0, lam=1.5))
    assert res.distance == pytest.approx(1.0, abs=1e-12)
    # Optimal matching is 0 -> 1, 2 -> 3.
    assert res.plan.matrix[0, 0] == pytest.approx(0.5, abs=1e-12)
    assert res.plan.matrix[1, 1] == pytest.approx(0.5, abs=1e-12)


def test_plan_contract():
    rng = np.random.default_rng(21)
    for _ in range(20):
        a = random_measure(rng, max_size=6, dim=2)
        b = random_measure(rng, max_size=6, dim=2)
        res = exact_distance(a, b, CostSpec(p=2.0, lam=1.0))
        plan = res.plan
        assert plan.marginal_error <= 1e-9
        # Vertex sparsity: at most S_a + S_b - 1 entries above noise level.
        nnz = int((plan.matrix > 1e-12).sum())
        assert nnz <= a.size + b.size - 1


def test_identity_of_indiscernibles():
    rng = np.random.default_rng(22)
    for _ in range(10):
        a = random_measure(rng, max_size=5, dim=2)
        spec = CostSpec(p=2.0, lam=float(rng.uniform(0.5, 3.0)))
        assert exact_distance(a, a, spec).distance <= 1e-9
        b = DiscreteMeasure(a.points + 5.0, a.weights, normalize=True)
        assert exact_distance(a, b, spec).distance > 0


def test_distance_bounded_by_lambda():
    rng = np.random.default_rng(23)
    for _ in range(10):
        a = random_measure(rng, dim=1, span=10.0)
        b = random_measure(rng, dim=1, span=10.0)
        lam = float(rng.uniform(0.1, 2.0))
        p = float(rng.choice([1.0, 2.0]))
        res = exact_distance(a, b, CostSpec(p=p, lam=lam))
        assert res.distance <= lam + 1e-12


def test_w1_below_wp():
    # Jensen: the p-th root of the mean p-th power dominates the mean.
    rng = np.random.default_rng(24)
    for _ in range(10):
        a = random_measure(rng, dim=2)
        b = random_measure(rng, dim=2)
        lam = float(rng.uniform(0.3, 3.0))
        d1 = exact_distance(a, b, CostSpec(p=1.0, lam=lam)).distance
        d2 = exact_distance(a, b, CostSpec(p=2.0, lam=lam)).distance
        assert d1 <= d2 + 1e-9


def test_lambda_monotone():
    rng = np.random.default_rng(25)
    for _ in range(10):
        a = random_measure(rng, dim=2)
        b = random_measure(rng, dim=2)
        lams = np.sort(rng.uniform(0.1, 4.0, size=3))
        p = float(rng.choice([1.0, 2.0]))
        vals = [exact_distance(a, b, CostSpec(p=p, lam=l)).distance for l in lams]
        for lo, hi in zip(vals, vals[1:]):
            assert lo <= hi + 1e-12


def test_saturation_equals_untruncated():
    rng = np.random.default_rng(26)
    for _ in range(10):
        a = random_measure(rng, dim=2)
        b = random_measure(rng, dim=2)
        diam = pooled_diameter([a, b])
        p = float(rng.choice([1.0, 2.0]))
        cap = exact_distance(a, b, CostSpec(p=p, lam=diam)).distance
        unc = exact_distance(a, b, CostSpec(p=p, lam=math.inf)).distance
        assert cap == pytest.approx(unc, abs=1e-9)


def test_oracle_cap():
    rng = np.random.default_rng(27)
    a = random_measure(rng, max_size=6, dim=1)
    b = random_measure(rng, max_size=6, dim=1)
    with pytest.raises(OracleCapError):
        exact_distance(a, b, CostSpec(), oracle_cap=1)


def test_coupling_plan_rejects_bad_marginals():
    with pytest.raises(SolverError):
        CouplingPlan(np.array([[0.6, 0.0], [0.0, 0.5]]), np.array([0.5, 0.5]), np.array([0.5, 0.5]))
    with pytest.raises(SolverError):
        CouplingPlan(np.array([[-0.1, 0.6], [0.0, 0.5]]), np.array([0.5, 0.5]), np.array([0.5, 0.5]))
    # Tiny negative noise is clipped, not rejected.
    plan = CouplingPlan(np.array([[0.5, -1e-12], [0.0, 0.5]]), np.array([0.5, 0.5]), np.array([0.5, 0.5]))
    assert plan.matrix.min() == 0.0


def test_barycenter_lp_self():
    m = DiscreteMeasure([[0.0], [1.0]], [0.4, 0.6])
    problem = BarycenterProblem((m,), [1.0], CostSpec(p=2.0, lam=math.inf))
    bary, obj = exact_barycenter_lp(problem, m.points)
    assert obj == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(bary.weights, m.weights, atol=1e-9)


def test_barycenter_lp_midpoint():
    problem = BarycenterProblem((dirac(0.0), dirac(1.0)), [0.5, 0.5], CostSpec(p=2.0, lam=math.inf))
    cands = np.array([[0.0], [0.5], [1.0]])
    bary, obj = exact_barycenter_lp(problem, cands)
    assert obj == pytest.approx(0.25, abs=1e-12)
    assert bary.weights[1] == pytest.approx(1.0, abs=1e-9)


def test_barycenter_lp_truncated():
    # With lam=0.2 the cheapest vertex parks all mass on one input's
    # location: f = 0.5*0 + 0.5*0.2 = 0.1 (the 0.5 candidate pays 0.2).
    problem = BarycenterProblem((dirac(0.0), dirac(1.0)), [0.5, 0.5], CostSpec(p=1.0, lam=0.2))
    cands = np.array([[0.0], [0.5], [1.0]])
    bary, obj = exact_barycenter_lp(problem, cands)
    assert obj == pytest.approx(0.1, abs=1e-12)
    assert bary.weights[1] == pytest.approx(0.0, abs=1e-9)


def test_barycenter_lp_keeps_zero_atoms():
    problem = BarycenterProblem((dirac(0.0), dirac(1.0)), [0.5, 0.5], CostSpec(p=2.0, lam=math.inf))
    cands = np.array([[0.0], [0.5], [1.0]])
    bary, _ = exact_barycenter_lp(problem, cands)
    assert bary.size == 3


def test_support_bound_on_tiny_problems():
    # Vertex solutions put mass on at most sum(S_i) + 1 - n candidates.
    rng = np.random.default_rng(28)
    for _ in range(15):
        n = int(rng.integers(2, 4))
        inputs = [random_measure(rng, max_size=3, dim=2) for _ in range(n)]
        lam = 0.5 * max(pooled_diameter(inputs), 1e-3)
        problem = BarycenterProblem(tuple(inputs), rng.uniform(0.2, 1.0, n), CostSpec(p=2.0, lam=lam))
        cands = candidate_supports(problem)
        bary, _ = exact_barycenter_lp(problem, cands)
        bound = sum(m.size for m in inputs) + 1 - n
        assert int((bary.weights > 1e-9).sum()) <= bound
