import math

import numpy as np
import pytest

from robustot import (
    BarycenterProblem,
    CostSpec,
    CouplingPlan,
    DiscreteMeasure,
    OracleCapError,
    SinkhornParams,
    candidate_supports,
    exact_distance,
    free_support_barycenter,
    kmeans_init_support,
    objective_f,
    update_support,
)
from robustot.free_support import _descend_point, _row_objective

from helpers import dirac, random_measure, random_problem


def two_dirac_problem(p=2.0, lam=math.inf):
    return BarycenterProblem((dirac(0.0), dirac(1.0)), [0.5, 0.5], CostSpec(p=p, lam=lam))


def test_problem_validation():
    with pytest.raises(ValueError):
        BarycenterProblem((), [], CostSpec())
    with pytest.raises(ValueError):
        BarycenterProblem((dirac(0.0),), [1.0, 1.0], CostSpec())
    with pytest.raises(ValueError):
        BarycenterProblem((dirac(0.0), dirac([0.0, 1.0])), [0.5, 0.5], CostSpec())
    with pytest.raises(ValueError):
        BarycenterProblem((dirac(0.0),), [-1.0], CostSpec())
    with pytest.raises(ValueError):
        BarycenterProblem((dirac(0.0),), [1.0], CostSpec(), k_equals_p=False)
    prob = BarycenterProblem((dirac(0.0), dirac(1.0)), [2.0, 2.0], CostSpec())
    assert np.allclose(prob.weights, [0.5, 0.5])


def test_objective_f_values():
    single = BarycenterProblem((dirac(0.5),), [1.0], CostSpec(p=2.0, lam=math.inf))
    assert objective_f(dirac(0.5), single) == pytest.approx(0.0, abs=1e-12)

    assert objective_f(dirac(0.0), two_dirac_problem()) == pytest.approx(0.5, abs=1e-12)
    assert objective_f(dirac(0.0), two_dirac_problem(p=1.0, lam=0.2)) == pytest.approx(0.1, abs=1e-12)

    with pytest.raises(ValueError):
        objective_f(dirac([0.0, 0.0]), two_dirac_problem())
    with pytest.raises(ValueError):
        objective_f(dirac(0.0), two_dirac_problem(), method="lbfgs")


def test_update_support_weighted_mean():
    # All targets within lam at p=2: the relocation is the weighted mean.
    targets = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    problem = BarycenterProblem((targets,), [1.0], CostSpec(p=2.0, lam=10.0))
    current = DiscreteMeasure([[0.8]], [1.0])
    plan = CouplingPlan(np.array([[0.5, 0.5]]), np.array([1.0]), targets.weights)
    out = update_support(current, [plan], problem)
    assert out[0, 0] == pytest.approx(0.5, abs=1e-9)


def test_update_support_saturated_snap():
    # Both targets beyond lam: flat surrogate, snap to the max-weight
    # target (ties break to the lowest index), which lowers g to 4.5.
    targets = DiscreteMeasure([[0.0], [10.0]], [0.5, 0.5])
    problem = BarycenterProblem((targets,), [1.0], CostSpec(p=2.0, lam=3.0))
    current = DiscreteMeasure([[5.0]], [1.0])
    plan = CouplingPlan(np.array([[0.5, 0.5]]), np.array([1.0]), targets.weights)
    spec = problem.spec
    g_before = _row_objective(np.array([5.0]), targets.points, np.array([0.5, 0.5]), spec)
    assert g_before == pytest.approx(9.0, abs=1e-12)
    out = update_support(current, [plan], problem)
    assert out[0, 0] == pytest.approx(0.0, abs=1e-12)
    g_after = _row_objective(out[0], targets.points, np.array([0.5, 0.5]), spec)
    assert g_after == pytest.approx(4.5, abs=1e-12)


def test_update_support_single_target():
    targets = dirac(3.0)
    problem = BarycenterProblem((targets,), [1.0], CostSpec(p=1.0, lam=2.0))
    current = DiscreteMeasure([[0.0]], [1.0])
    plan = CouplingPlan(np.array([[1.0]]), np.array([1.0]), np.array([1.0]))
    out = update_support(current, [plan], problem)
    assert out[0, 0] == pytest.approx(3.0, abs=1e-9)


def test_update_support_zero_row_stays():
    targets = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    problem = BarycenterProblem((targets,), [1.0], CostSpec(p=2.0, lam=math.inf))
    current = DiscreteMeasure([[0.5], [7.0]], [1.0, 0.0], normalize=True)
    plan = CouplingPlan(np.array([[0.5, 0.5], [0.0, 0.0]]), np.array([1.0, 0.0]), targets.weights)
    out = update_support(current, [plan], problem)
    assert out[1, 0] == 7.0


def test_mm_inner_descent():
    # Every accepted MM step lowers the atom objective g.
    rng = np.random.default_rng(41)
    for _ in range(25):
        dim = int(rng.integers(1, 3))
        targets = rng.uniform(-3, 3, size=(int(rng.integers(2, 7)), dim))
        w = rng.uniform(0.0, 1.0, size=targets.shape[0])
        spec = CostSpec(p=float(rng.choice([1.0, 2.0])), lam=float(rng.uniform(0.5, 4.0)))
        start = rng.uniform(-3, 3, size=dim)
        trace = []
        _descend_point(start, targets, w, spec, g_trace=trace)
        for hi, lo in zip(trace, trace[1:]):
            assert lo <= hi
    with pytest.raises(ValueError):
        _descend_point(np.zeros(1), np.zeros((1, 1)), np.ones(1), CostSpec(p=1.5))


def test_free_support_single_input_fixed_point():
    m = DiscreteMeasure([[0.0], [1.0]], [0.4, 0.6])
    problem = BarycenterProblem((m,), [1.0], CostSpec(p=2.0, lam=math.inf))
    res = free_support_barycenter(problem, m.points, solver="exact")
    assert res.objective_trace[-1] == pytest.approx(0.0, abs=1e-12)
    assert res.converged


def test_free_support_dirac_pair_midpoint():
    problem = two_dirac_problem()
    res = free_support_barycenter(problem, np.array([[0.9]]), solver="exact")
    assert res.barycenter.points[0, 0] == pytest.approx(0.5, abs=1e-9)
    assert res.objective_trace[0] == pytest.approx(0.25, abs=1e-12)
    assert res.objective_trace[-1] == pytest.approx(0.25, abs=1e-12)
    assert res.converged


def test_free_support_translation_invariance():
    rng = np.random.default_rng(42)
    problem = random_problem(rng, dim=2, p=2.0)
    init = rng.uniform(-2, 2, size=(3, 2))
    base = free_support_barycenter(problem, init, solver="exact", outer_max=8)

    t = np.array([4.0, -2.5])
    shifted_inputs = tuple(
        DiscreteMeasure(m.points + t, m.weights, normalize=True) for m in problem.inputs
    )
    shifted = BarycenterProblem(shifted_inputs, problem.weights, problem.spec)
    res = free_support_barycenter(shifted, init + t, solver="exact", outer_max=8)

    assert np.allclose(res.barycenter.points, base.barycenter.points + t, atol=1e-9)
    assert np.allclose(res.objective_trace, base.objective_trace, atol=1e-9)


def test_descent_trace_non_increasing():
    # Small version of the descent property; the 100-run suite is in the
    # acceptance tests.
    rng = np.random.default_rng(43)
    for _ in range(10):
        lam_kind = "inf" if rng.random() < 0.5 else "half"
        problem = random_problem(rng, p=float(rng.choice([1.0, 2.0])), lam_kind=lam_kind)
        R = int(rng.integers(1, 5))
        init = rng.uniform(-2, 2, size=(R, problem.dim))
        res = free_support_barycenter(problem, init, solver="exact", outer_max=12, outer_tol=1e-7)
        trace = res.objective_trace
        for hi, lo in zip(trace, trace[1:]):
            assert lo <= hi + 1e-9


def test_initialization_dominance():
    rng = np.random.default_rng(44)
    for _ in range(5):
        problem = random_problem(rng, p=2.0)
        mu1 = problem.inputs[0]
        res = free_support_barycenter(problem, mu1.points, solver="exact", outer_max=10)
        f_start = objective_f(mu1, problem)
        assert res.objective_trace[-1] <= f_start + 1e-9


def test_free_support_validation():
    problem = two_dirac_problem()
    with pytest.raises(ValueError):
        free_support_barycenter(problem, np.array([[0.5]]), outer_max=0)
    with pytest.raises(ValueError):
        free_support_barycenter(problem, np.array([[0.5]]), outer_tol=0.0)
    with pytest.raises(ValueError):
        free_support_barycenter(problem, np.zeros((1, 3)))
    with pytest.raises(ValueError):
        free_support_barycenter(problem, np.array([[0.5]]), solver="vertex")


def test_candidate_supports():
    assert np.allclose(candidate_supports(two_dirac_problem()), [[0.5]])
    # p=1 plateau: tie-break lands on the first input's point.
    assert np.allclose(candidate_supports(two_dirac_problem(p=1.0)), [[0.0]])

    a = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    b = DiscreteMeasure([[2.0], [3.0]], [0.5, 0.5])
    problem = BarycenterProblem((a, b), [0.5, 0.5], CostSpec(p=2.0, lam=math.inf))
    cands = candidate_supports(problem)
    assert cands.shape[0] <= 4

    with pytest.raises(OracleCapError):
        candidate_supports(problem, cap=3)


def test_empirical_consistency():
    # Successive barycenters of growing samples from one distribution get
    # closer to each other on most seeds.
    wins = 0
    params = SinkhornParams(epsilon_rel=1e-2, tol=1e-7, max_iter=3000)
    eval_spec = CostSpec(p=2.0, lam=math.inf)
    for seed in range(10):
        rng = np.random.default_rng([91, seed])
        # One init per seed: re-rolling it per sample size would add
        # local-optimum noise that does not shrink with m.
        init = rng.uniform(-2, 2, size=(8, 1))
        estimates = []
        for m in (50, 200, 800):
            inputs = tuple(
                DiscreteMeasure(rng.normal(size=(m, 1)), np.full(m, 1.0 / m)) for _ in range(3)
            )
            problem = BarycenterProblem(inputs, np.ones(3), CostSpec(p=2.0, lam=2.0))
            res = free_support_barycenter(problem, init, params=params, outer_max=10, outer_tol=1e-7)
            estimates.append(res.barycenter)
        d01 = exact_distance(estimates[0], estimates[1], eval_spec).distance
        d12 = exact_distance(estimates[1], estimates[2], eval_spec).distance
        if d12 < d01:
            wins += 1
    assert wins >= 8


def test_kmeans_init_support():
    rng = np.random.default_rng(45)
    problem = random_problem(rng, n_range=(3, 3), max_size=6, dim=2)
    init = kmeans_init_support(problem, 5, seed=0)
    assert init.shape[1] == 2
    assert 1 <= init.shape[0] <= 5
    again = kmeans_init_support(problem, 5, seed=0)
    assert np.array_equal(init, again)
