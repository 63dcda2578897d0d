import math

import numpy as np
import pytest

from robustot import (
    BarycenterProblem,
    CostSpec,
    DiscreteMeasure,
    ScalingError,
    SinkhornParams,
    exact_distance,
    ibp_barycenter,
    prune,
    round_to_marginals,
    sinkhorn_distance,
)

from helpers import dirac, random_measure


def test_params_validation():
    with pytest.raises(ValueError):
        SinkhornParams(epsilon=0.0)
    with pytest.raises(ValueError):
        SinkhornParams(epsilon_rel=-1.0)
    with pytest.raises(ValueError):
        SinkhornParams(max_iter=0)
    with pytest.raises(ValueError):
        SinkhornParams(tol=0.0)


def test_resolve_picks_log_domain():
    spec = CostSpec(p=2.0, lam=2.0)
    eps, log = SinkhornParams(epsilon_rel=5e-3).resolve(4.0, spec)
    assert eps == pytest.approx(0.02)
    assert log is True
    eps, log = SinkhornParams(epsilon_rel=2e-2).resolve(4.0, spec)
    assert log is False
    # Explicit choice wins over the underflow rule.
    _, log = SinkhornParams(epsilon_rel=5e-3, log_domain=False).resolve(4.0, spec)
    assert log is False
    # Untruncated specs scale epsilon by the realized max cost.
    eps, _ = SinkhornParams(epsilon_rel=1e-2).resolve(9.0, CostSpec(p=2.0, lam=math.inf))
    assert eps == pytest.approx(0.09)


def test_forced_dirac_pair():
    res = sinkhorn_distance(dirac(0.0), dirac(10.0), CostSpec(p=1.0, lam=3.0))
    assert res.distance == pytest.approx(3.0, abs=1e-12)
    assert res.plan.matrix.shape == (1, 1)


def test_self_distance_small():
    rng = np.random.default_rng(31)
    m = random_measure(rng, max_size=5, dim=2)
    spec = CostSpec(p=2.0, lam=1.5)
    params = SinkhornParams(epsilon=1e-3 * spec.lam**spec.p, log_domain=True)
    res = sinkhorn_distance(m, m, spec, params)
    assert res.distance < 0.05 * spec.lam


def test_matches_exact_on_small_instance():
    a = DiscreteMeasure([[0.0], [2.0]], [0.5, 0.5])
    b = DiscreteMeasure([[1.0], [3.0]], [0.5, 0.5])
    spec = CostSpec(p=1.0, lam=1.5)
    params = SinkhornParams(epsilon=1e-3 * spec.lam, log_domain=True)
    res = sinkhorn_distance(a, b, spec, params)
    assert res.distance == pytest.approx(1.0, rel=0.01)
    assert res.marginal_error <= 1e-9


def test_shrinking_epsilon_monotone():
    rng = np.random.default_rng(32)
    a = random_measure(rng, max_size=6, dim=2)
    b = random_measure(rng, max_size=6, dim=2)
    spec = CostSpec(p=2.0, lam=2.0)
    costs = []
    for eps in (0.5, 0.1, 0.02, 0.004):
        res = sinkhorn_distance(a, b, spec, SinkhornParams(epsilon=eps, max_iter=20000))
        costs.append(res.cost)
    for hi, lo in zip(costs, costs[1:]):
        assert lo <= hi + 1e-6


def test_linear_domain_underflow_raises():
    params = SinkhornParams(epsilon=1e-4, log_domain=False)
    with pytest.raises(ScalingError):
        sinkhorn_distance(dirac(0.0), dirac(10.0), CostSpec(p=2.0, lam=math.inf), params)


def test_round_to_marginals():
    rng = np.random.default_rng(33)
    for _ in range(10):
        plan = rng.uniform(0.0, 1.0, size=(4, 3))
        row = rng.uniform(0.1, 1.0, size=4)
        row /= row.sum()
        col = rng.uniform(0.1, 1.0, size=3)
        col /= col.sum()
        out = round_to_marginals(plan, row, col)
        assert out.min() >= 0
        assert np.abs(out.sum(axis=1) - row).max() <= 1e-12
        assert np.abs(out.sum(axis=0) - col).max() <= 1e-12


def test_ibp_single_input_returns_it():
    m = DiscreteMeasure([[0.0], [1.0], [2.0]], [0.2, 0.5, 0.3])
    problem = BarycenterProblem((m,), [1.0], CostSpec(p=2.0, lam=math.inf))
    res = ibp_barycenter(problem, m.points)
    assert np.allclose(res.mass, m.weights, atol=1e-6)


def test_ibp_mirrored_symmetry():
    # Two histograms mirrored about the grid midpoint average to a
    # symmetric barycenter.
    grid = np.linspace(0.0, 1.0, 21).reshape(-1, 1)
    w = np.exp(-((grid[:, 0] - 0.3) ** 2) / 0.02)
    a = DiscreteMeasure(grid, w, normalize=True)
    b = DiscreteMeasure(grid, w[::-1], normalize=True)
    problem = BarycenterProblem((a, b), [0.5, 0.5], CostSpec(p=2.0, lam=math.inf))
    res = ibp_barycenter(problem, grid)
    assert np.abs(res.mass - res.mass[::-1]).max() <= 1e-6


def test_ibp_dirac_pair_concentrates():
    problem = BarycenterProblem((dirac(0.0), dirac(1.0)), [0.5, 0.5], CostSpec(p=2.0, lam=math.inf))
    grid = np.array([[0.0], [0.5], [1.0]])
    res = ibp_barycenter(problem, grid, SinkhornParams(epsilon=1e-3))
    bary = prune(DiscreteMeasure(grid, res.mass, normalize=True))
    mid = bary.weights[np.isclose(bary.points[:, 0], 0.5)]
    assert mid.size == 1 and mid[0] > 0.99


def test_ibp_objective_bounded_by_cap():
    rng = np.random.default_rng(34)
    for _ in range(5):
        inputs = tuple(random_measure(rng, max_size=6, dim=2, span=5.0) for _ in range(3))
        lam = float(rng.uniform(0.3, 2.0))
        problem = BarycenterProblem(inputs, np.ones(3), CostSpec(p=2.0, lam=lam))
        support = rng.uniform(-5, 5, size=(8, 2))
        res = ibp_barycenter(problem, support)
        assert res.objective <= lam**2 + 1e-9
        for plan in res.plans:
            assert plan.marginal_error <= 1e-9


def test_sinkhorn_agreement_sample():
    # Spot check of the oracle-agreement invariant; the 50-instance run is
    # in the acceptance suite.
    rng = np.random.default_rng(35)
    for _ in range(5):
        a = random_measure(rng, max_size=8, dim=2)
        b = random_measure(rng, max_size=8, dim=2)
        lam = float(rng.uniform(0.5, 2.0))
        p = float(rng.choice([1.0, 2.0]))
        spec = CostSpec(p=p, lam=lam)
        exact = exact_distance(a, b, spec).distance
        params = SinkhornParams(epsilon=1e-3 * lam**p, log_domain=True, max_iter=20000)
        approx = sinkhorn_distance(a, b, spec, params).distance
        assert abs(approx - exact) / max(exact, 1e-6) < 0.01
