"""Shared builders for the test suite."""

import numpy as np

from robustot import BarycenterProblem, CostSpec, DiscreteMeasure, pooled_diameter


def random_measure(rng, max_size=6, dim=2, span=2.0):
    size = int(rng.integers(1, max_size + 1))
    pts = rng.uniform(-span, span, size=(size, dim))
    w = rng.uniform(0.1, 1.0, size=size)
    return DiscreteMeasure(pts, w, normalize=True)


def random_problem(rng, n_range=(2, 4), max_size=6, dim=2, p=2.0, lam_kind="half"):
    """Random barycenter problem; lam_kind: 'half' (0.5*diam) or 'inf'."""
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    inputs = [random_measure(rng, max_size, dim) for _ in range(n)]
    if lam_kind == "inf":
        lam = np.inf
    else:
        lam = 0.5 * max(pooled_diameter(inputs), 1e-3)
    w = rng.uniform(0.2, 1.0, size=n)
    return BarycenterProblem(tuple(inputs), w, CostSpec(p=p, lam=lam))


def dirac(x):
    pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if pts.shape[0] != 1:
        pts = pts.reshape(1, -1)
    return DiscreteMeasure(pts, [1.0])
