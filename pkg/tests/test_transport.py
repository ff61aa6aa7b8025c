import itertools
import math

import numpy as np
import pytest

from foliation_energy.elliptic import sample_fiber
from foliation_energy.measures import DiscreteMeasure, Point2, dirac, euclidean_distance
from foliation_energy.transport import (
    TransportPlan,
    brute_force_wasserstein,
    plan_cost,
    wasserstein,
)


def random_measure(rng, n, mass=None):
    w = rng.uniform(0.1, 1.0, n)
    if mass is not None:
        w *= mass / w.sum()
    return DiscreteMeasure(rng.uniform(-1.0, 1.0, (n, 2)), w)


def test_dirac_pair_any_p():
    a, b = Point2(0.0, 0.0), Point2(3.0, 4.0)
    for p in (1.0, 1.5, 2.0, 3.0):
        value, plan = wasserstein(dirac(a), dirac(b), p)
        assert value == pytest.approx(5.0, rel=1e-12)
        assert plan.entries == {(0, 0): 1.0}


def test_aligned_circles_radial_value():
    """Aligned 256-atom circles of radii 0.3 and 0.7: the radial matching is
    feasible and the support separation bound pins the optimum at 0.4."""
    mu = sample_fiber(0.3, 1.0, 256)
    nu = sample_fiber(0.7, 1.0, 256)
    value, _ = wasserstein(mu, nu, 1.0)
    assert value == pytest.approx(0.4, abs=1e-9)


def test_solver_matches_oracle_3x3(rng):
    for _ in range(25):
        mu = random_measure(rng, 3)
        nu = random_measure(rng, 3, mass=mu.mass)
        value, _ = wasserstein(mu, nu, 1.0)
        oracle = brute_force_wasserstein(mu, nu, 1.0)
        assert value == pytest.approx(oracle, rel=1e-9)


def test_unbalanced_masses_rejected():
    mu = dirac(Point2(0, 0))
    nu = DiscreteMeasure(np.array([[1.0, 0.0]]), np.array([0.5]))
    with pytest.raises(ValueError):
        wasserstein(mu, nu, 1.0)


def test_invalid_order_rejected():
    m = dirac(Point2(0, 0))
    with pytest.raises(ValueError):
        wasserstein(m, m, 0.5)
    with pytest.raises(ValueError):
        wasserstein(m, m, float("inf"))


def test_mass_rescaling_within_tolerance():
    mu = DiscreteMeasure(np.array([[0.0, 0.0]]), np.array([1.0]))
    nu = DiscreteMeasure(np.array([[1.0, 0.0]]), np.array([1.0 + 5e-10]))
    value, plan = wasserstein(mu, nu, 1.0)
    assert value == pytest.approx(1.0, rel=1e-9)
    assert abs(sum(plan.entries.values()) - 1.0) <= 1e-9


# --- brute-force oracle ----------------------------------------------------


def test_oracle_1x1():
    mu = DiscreteMeasure(np.array([[0.0, 0.0]]), np.array([0.7]))
    nu = DiscreteMeasure(np.array([[3.0, 4.0]]), np.array([0.7]))
    assert brute_force_wasserstein(mu, nu, 1.0) == pytest.approx(0.7 * 5.0)
    assert brute_force_wasserstein(mu, nu, 2.0) == pytest.approx(math.sqrt(0.7 * 25.0))


def test_oracle_2x2_matching():
    # equal weights 1/2: optimum is the better of the two matchings
    mu = DiscreteMeasure(np.array([[0.0, 0.0], [1.0, 0.0]]), np.full(2, 0.5))
    nu = DiscreteMeasure(np.array([[0.0, 1.0], [1.0, 1.0]]), np.full(2, 0.5))
    straight = 0.5 * 1.0 + 0.5 * 1.0
    crossed = 0.5 * math.sqrt(2) + 0.5 * math.sqrt(2)
    assert brute_force_wasserstein(mu, nu, 1.0) == pytest.approx(min(straight, crossed))


def test_oracle_enumerates_81_trees():
    """K_{3,3} has 3^2 * 3^2 = 81 spanning trees among C(9,5) edge subsets."""
    from foliation_energy.transport import _tree_flows

    a = np.array([0.2, 0.3, 0.5])
    b = np.array([0.4, 0.4, 0.2])
    edges = [(i, j) for i in range(3) for j in range(3)]
    subsets = list(itertools.combinations(edges, 5))
    assert len(subsets) == 126
    assert sum(1 for subset in subsets if _is_tree(subset)) == 81
    # the flow solver never accepts a subset that is not a spanning tree
    for subset in subsets:
        if _tree_flows(subset, a, b) is not None:
            assert _is_tree(subset)


def _is_tree(subset):
    # connectivity check over 6 nodes, used only to count spanning trees
    adj = {}
    for i, j in subset:
        adj.setdefault(i, set()).add(3 + j)
        adj.setdefault(3 + j, set()).add(i)
    if len(adj) != 6:
        return False
    seen = {0}
    stack = [0]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == 6


def test_oracle_too_large_rejected(rng):
    mu = random_measure(rng, 4)
    nu = random_measure(rng, 2, mass=mu.mass)
    with pytest.raises(ValueError):
        brute_force_wasserstein(mu, nu, 1.0)


# --- plans -----------------------------------------------------------------


def test_plan_cost_identity_zero():
    m = DiscreteMeasure(np.array([[0.0, 0.0], [1.0, 1.0]]), np.full(2, 0.5))
    value, plan = wasserstein(m, m, 2.0)
    assert value <= 1e-12
    assert plan_cost(plan, 2.0) <= 1e-24


def test_plan_cost_consistent_with_value(rng):
    mu = random_measure(rng, 8)
    nu = random_measure(rng, 11, mass=mu.mass)
    for p in (1.0, 2.0):
        value, plan = wasserstein(mu, nu, p)
        assert plan_cost(plan, p) == pytest.approx(value**p, rel=1e-9)
        assert plan.cost == pytest.approx(value**p, rel=1e-9)


def test_plan_cost_hand_built():
    # half the mass moves distance 1, half moves distance 3: cost 2 at p=1
    src = DiscreteMeasure(np.array([[0.0, 0.0], [10.0, 0.0]]), np.full(2, 0.5))
    dst = DiscreteMeasure(np.array([[1.0, 0.0], [13.0, 0.0]]), np.full(2, 0.5))
    plan = TransportPlan(src, dst, {(0, 0): 0.5, (1, 1): 0.5}, cost=2.0, p=1.0)
    assert plan_cost(plan, 1.0) == pytest.approx(2.0)


def test_plan_marginals(rng):
    mu = random_measure(rng, 7)
    nu = random_measure(rng, 5, mass=mu.mass)
    _, plan = wasserstein(mu, nu, 1.0)
    assert np.allclose(plan.row_sums(), mu.weights, atol=1e-10 * mu.mass)
    assert np.allclose(plan.col_sums(), nu.weights, atol=1e-10 * mu.mass)
    assert all(f > 0 for f in plan.entries.values())


# --- metric properties ------------------------------------------------------


def test_identity_distance_zero(rng):
    m = random_measure(rng, 13)
    for p in (1.0, 2.0):
        value, _ = wasserstein(m, m, p)
        assert value <= 1e-12


def test_symmetry(rng):
    for _ in range(10):
        mu = random_measure(rng, 9)
        nu = random_measure(rng, 12, mass=mu.mass)
        for p in (1.0, 2.0):
            ab, _ = wasserstein(mu, nu, p)
            ba, _ = wasserstein(nu, mu, p)
            assert ab == pytest.approx(ba, rel=1e-9)


def test_triangle_inequality(rng):
    for _ in range(10):
        ms = [random_measure(rng, rng.integers(4, 17), mass=1.0) for _ in range(3)]
        for p in (1.0, 2.0):
            d01, _ = wasserstein(ms[0], ms[1], p)
            d12, _ = wasserstein(ms[1], ms[2], p)
            d02, _ = wasserstein(ms[0], ms[2], p)
            assert d02 <= d01 + d12 + 1e-9


def test_monotone_in_p(rng):
    for _ in range(10):
        mu = random_measure(rng, 10, mass=1.0)
        nu = random_measure(rng, 10, mass=1.0)
        w1, _ = wasserstein(mu, nu, 1.0)
        w2, _ = wasserstein(mu, nu, 2.0)
        w3, _ = wasserstein(mu, nu, 3.0)
        assert w1 <= w2 + 1e-9
        assert w2 <= w3 + 1e-9


def test_support_separation_lower_bound(rng):
    for _ in range(10):
        mu = random_measure(rng, 6, mass=1.0)
        nu = random_measure(rng, 8, mass=1.0)
        sep = min(
            euclidean_distance(pa, pb)
            for pa, _ in mu.atoms
            for pb, _ in nu.atoms
        )
        for p in (1.0, 2.0):
            value, _ = wasserstein(mu, nu, p)
            assert value >= sep - 1e-12


def test_oracle_equivalence_all_small_shapes(rng):
    for n, m in itertools.product((1, 2, 3), repeat=2):
        for _ in range(5):
            mu = random_measure(rng, n)
            nu = random_measure(rng, m, mass=mu.mass)
            for p in (1.0, 2.0):
                value, _ = wasserstein(mu, nu, p)
                oracle = brute_force_wasserstein(mu, nu, p)
                assert value == pytest.approx(oracle, rel=1e-9)
