import numpy as np
import pytest
from hypothesis import given, strategies as st

from foliation_energy.disintegration import (
    bin_labels,
    disintegrate,
    pushforward,
    verify_reconstruction,
)
from foliation_energy.elliptic import build_scenario
from foliation_energy.measures import FiberedScenario, box_region, normalize


def grid_scenario(n):
    """n x n uniform grid on the unit square, labeled by the first coordinate."""
    xs = (np.arange(n) + 0.5) / n
    xx, yy = np.meshgrid(xs, xs, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return FiberedScenario(pts, pts[:, 0].copy())


def test_grid_disintegration_uniform_columns():
    s = grid_scenario(8)
    d = disintegrate(s)
    assert len(d.labels) == 8
    for label in d.labels:
        cond = d.conditionals[label]
        assert cond.probability
        assert np.allclose(cond.weights, 1.0 / 8)
        # support inside the fiber: every atom shares the label coordinate
        assert np.allclose(cond.locations[:, 0], label)
    assert np.allclose(d.base.weights, 8.0)
    assert d.base.mass == pytest.approx(64.0)


def test_graph_disintegration_is_dirac_family():
    s = build_scenario("graph", count=16, graph_map="sin")
    d = disintegrate(s)
    for label in d.labels:
        cond = d.conditionals[label]
        assert len(cond) == 1
        assert cond.probability


def test_single_label_scenario():
    s = FiberedScenario(np.array([[0.0, 0.0], [1.0, 1.0]]), np.array([2.0, 2.0]),
                        np.array([1.0, 3.0]))
    d = disintegrate(s)
    assert d.labels == (2.0,)
    cond = d.conditionals[2.0]
    expected = normalize(s.measure())
    assert np.allclose(cond.weights, expected.weights)
    assert d.base.mass == pytest.approx(4.0)


def test_zero_weight_sample_extends_fiber_only():
    s = FiberedScenario(
        np.array([[0.0, 0.0], [0.0, 1.0]]),
        np.array([1.0, 1.0]),
        np.array([1.0, 0.0]),
    )
    d = disintegrate(s)
    assert len(d.fibers[1.0]) == 2
    assert len(d.conditionals[1.0]) == 1


def test_all_zero_fiber_rejected():
    s = FiberedScenario(np.array([[0.0, 0.0]]), np.array([1.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        disintegrate(s)


def test_pushforward_uniform_grid():
    base = pushforward(grid_scenario(6))
    assert np.allclose(base.weights, 6.0)
    assert np.allclose(base.locations[:, 1], 0.0)


def test_pushforward_disk_base_weights_proportional_to_label():
    # the radial density 2r/R^2 makes the base weight of a fiber scale with r
    s = build_scenario("circle", fibers=10, points=16)
    base = pushforward(s)
    labels = base.locations[:, 0]
    ratio = base.weights / labels
    assert np.allclose(ratio, ratio[0], rtol=1e-12)


def test_pushforward_single_sample():
    s = FiberedScenario(np.array([[0.3, 0.4]]), np.array([7.0]))
    base = pushforward(s)
    assert base.mass == 1.0
    assert base.locations.tolist() == [[7.0, 0.0]]


def test_pushforward_mass_equals_scenario_mass():
    s = build_scenario("ellipse", lam=1.5, fibers=6, points=12)
    assert pushforward(s).mass == pytest.approx(s.measure().mass, rel=1e-14)


def test_reconstruction_whole_plane():
    s = grid_scenario(5)
    d = disintegrate(s)
    assert verify_reconstruction(d, s, [lambda p: True]) <= 1e-12 * d.source.mass


def test_reconstruction_half_square_16():
    s = grid_scenario(16)
    d = disintegrate(s)
    assert verify_reconstruction(d, s, [lambda p: p.x1 < 0.5]) <= 1e-12 * d.source.mass


def test_reconstruction_random_boxes(rng, small_scenarios, small_disintegrations):
    for kind, s in small_scenarios.items():
        d = small_disintegrations[kind]
        lo = s.points.min(axis=0) - 0.1
        hi = s.points.max(axis=0) + 0.1
        regions = []
        for _ in range(100):
            a, b = rng.uniform(lo, hi), rng.uniform(lo, hi)
            regions.append(box_region(min(a[0], b[0]), max(a[0], b[0]),
                                      min(a[1], b[1]), max(a[1], b[1])))
        assert verify_reconstruction(d, s, regions) <= 1e-12 * d.source.mass, kind


def test_reconstruction_rejects_mismatched_scenario():
    d = disintegrate(grid_scenario(4))
    with pytest.raises(ValueError):
        verify_reconstruction(d, grid_scenario(5), [lambda p: True])


def test_bin_labels_single_fiber_when_width_huge():
    s = grid_scenario(4)
    binned = bin_labels(s, 10.0)
    assert len(np.unique(binned.labels)) == 1


def test_bin_labels_arithmetic():
    s = FiberedScenario(np.zeros((3, 2)), np.array([0.10, 0.11, 0.49]))
    binned = bin_labels(s, 0.2)
    assert np.allclose(binned.labels, [0.1, 0.1, 0.5])


def test_bin_labels_grid_step_keeps_partition():
    # binary-exact grid step: labels shift to midpoints, partition unchanged
    labels = np.array([0.0, 0.25, 0.5, 0.75, 0.25, 0.5])
    s = FiberedScenario(np.zeros((6, 2)), labels)
    binned = bin_labels(s, 0.25)
    assert np.allclose(binned.labels, labels + 0.125)
    assert len(np.unique(binned.labels)) == len(np.unique(labels))


def test_bin_labels_requires_positive_width():
    s = grid_scenario(2)
    with pytest.raises(ValueError):
        bin_labels(s, 0.0)
    with pytest.raises(ValueError):
        bin_labels(s, -1.0)


@given(st.integers(min_value=2, max_value=6))
def test_tiny_width_binning_matches_plain_disintegration(n):
    s = grid_scenario(n)
    d_plain = disintegrate(s)
    d_binned = disintegrate(bin_labels(s, 1e-9))
    assert len(d_binned.labels) == len(d_plain.labels)
    for la, lb in zip(d_plain.labels, d_binned.labels):
        assert abs(la - lb) <= 1e-9
        assert np.array_equal(d_plain.fibers[la], d_binned.fibers[lb])
        assert np.allclose(
            d_plain.conditionals[la].weights, d_binned.conditionals[lb].weights
        )


def test_binning_never_splits_a_label(rng):
    labels = rng.uniform(0, 1, 30).round(2)
    s = FiberedScenario(rng.uniform(0, 1, (30, 2)), labels)
    for width in (0.05, 0.2, 0.7):
        binned = bin_labels(s, width)
        mapping = {}
        for old, new in zip(s.labels, binned.labels):
            assert mapping.setdefault(old, new) == new
