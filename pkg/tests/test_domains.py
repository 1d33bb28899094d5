import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.spatial import cKDTree

from uclab.domains import (ConvexDomain, covering_net, net_size, project, squared_bound,
                           subsampled_net)
from uclab.errors import ArgumentError, CapacityError


def max_probe_gap(domain, net, probes=10_000, seed=0):
    """Largest distance from a uniform probe to its nearest net point (KD-tree oracle)."""
    pts = domain.sample_uniform(np.random.default_rng(seed), probes)
    return float(cKDTree(net.points).query(pts)[0].max())


def dense_probe_gap(lower, upper, step, net):
    axes = [np.arange(lo, hi + step / 2, step) for lo, hi in zip(lower, upper)]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    return float(cKDTree(net.points).query(grid)[0].max())


# --- projection ---------------------------------------------------------------


def test_ball_projection_scales_radially():
    ball = ConvexDomain.ball([0.0, 0.0], 1.0)
    np.testing.assert_allclose(project(ball, [2.0, 0.0]), [1.0, 0.0])


def test_box_projection_clamps():
    box = ConvexDomain.cube(2, 1.0)
    np.testing.assert_allclose(project(box, [0.3, -2.0]), [0.3, -1.0])


@pytest.mark.parametrize("domain", [ConvexDomain.cube(3, 1.0), ConvexDomain.ball([1, 2, 0], 2.0)])
def test_projection_fixes_interior_points(domain):
    pts = domain.sample_uniform(np.random.default_rng(1), 200)
    np.testing.assert_array_equal(domain.project(pts), pts)


def test_projection_dimension_mismatch():
    with pytest.raises(ArgumentError):
        ConvexDomain.cube(2, 1.0).project([1.0, 2.0, 3.0])


def test_projection_is_batched():
    ball = ConvexDomain.ball([0.0, 0.0], 1.0)
    out = ball.project(np.array([[2.0, 0.0], [0.0, -3.0], [0.1, 0.1]]))
    np.testing.assert_allclose(out, [[1.0, 0.0], [0.0, -1.0], [0.1, 0.1]])


@pytest.mark.parametrize("kwargs", [
    dict(kind="box", dim=2, lower=[0, 0], upper=[0, 1]),
    dict(kind="ball", dim=2, center=[0, 0], radius=0.0),
    dict(kind="ball", dim=2, center=[np.nan, 0], radius=1.0),
    dict(kind="simplex", dim=2),
])
def test_invalid_domains_rejected(kwargs):
    with pytest.raises(ArgumentError):
        ConvexDomain(**kwargs)


# --- squared bound ------------------------------------------------------------


@pytest.mark.parametrize("domain, expected", [
    (ConvexDomain.ball([0.0, 0.0], 2.0), 4.0),
    (ConvexDomain.cube(2, 1.0), 2.0),
    (ConvexDomain.ball([3.0, 0.0], 1.0), 16.0),
])
def test_squared_bound_examples(domain, expected):
    assert squared_bound(domain) == pytest.approx(expected)


def test_round_trip_through_dict():
    for dom in (ConvexDomain.box([0, -1], [2, 1]), ConvexDomain.ball([1, 1], 0.5)):
        back = ConvexDomain.from_dict(dom.to_dict())
        assert back.to_dict() == dom.to_dict()


# --- covering nets --------------------------------------------------------------


def test_unit_interval_net():
    net = covering_net(ConvexDomain.box([0.0], [1.0]), 0.25)
    np.testing.assert_allclose(net.points[:, 0], [0.25, 0.75])
    assert net.count == 2


def test_unit_square_net_half_radius():
    box = ConvexDomain.box([0, 0], [1, 1])
    net = covering_net(box, 0.5)
    assert net.count == 4
    assert dense_probe_gap([0, 0], [1, 1], 0.005, net) <= 0.5


def test_unit_square_net_quarter_radius():
    # ceil(sqrt(2) / (2 * 0.25)) = 3 cells per axis
    box = ConvexDomain.box([0, 0], [1, 1])
    net = covering_net(box, 0.25)
    assert net.count == 9
    assert dense_probe_gap([0, 0], [1, 1], 0.005, net) <= 0.25


def test_net_count_formula_in_three_dimensions():
    box = ConvexDomain.box([0, 0, 0], [2, 1, 1])
    net = covering_net(box, 0.3)
    per_axis = np.ceil(np.array([2, 1, 1]) * np.sqrt(3) / 0.6).astype(int)
    assert net.count == np.prod(per_axis) == net_size(box, 0.3)
    assert max_probe_gap(box, net) <= 0.3


def test_capacity_error_names_required_count():
    with pytest.raises(CapacityError) as info:
        covering_net(ConvexDomain.cube(3, 1.0), 1e-3, cap=10**6)
    assert info.value.required == net_size(ConvexDomain.cube(3, 1.0), 1e-3)
    assert str(info.value.required) in str(info.value)


def test_ball_net_inside_and_covering():
    ball = ConvexDomain.ball([0.5, -0.5], 1.0)
    net = covering_net(ball, 0.2)
    assert np.all(ball.contains(net.points))
    assert len(np.unique(np.round(net.points, 9), axis=0)) == net.count
    assert max_probe_gap(ball, net) <= 0.2


def test_net_csv_export(tmp_path):
    net = covering_net(ConvexDomain.box([0, 0], [1, 1]), 0.5)
    net.to_csv(tmp_path / "net.csv")
    rows = list(csv.reader(open(tmp_path / "net.csv")))
    assert rows[0] == ["index", "x_0", "x_1"]
    assert len(rows) == 5
    np.testing.assert_array_equal(np.array(rows[1:], dtype=float)[:, 1:], net.points)


def test_subsampled_net_is_flagged_and_seeded():
    box = ConvexDomain.cube(4, 1.0)
    a, b = subsampled_net(box, 50, 3), subsampled_net(box, 50, 3)
    assert a.approximate and a.count == 50
    np.testing.assert_array_equal(a.points, b.points)


def test_net_radius_must_be_positive():
    with pytest.raises(ArgumentError):
        covering_net(ConvexDomain.cube(1, 1.0), 0.0)


# --- properties -------------------------------------------------------------------

coords = st.floats(-50, 50, allow_nan=False)


@given(arrays(float, (2, 3), elements=coords))
def test_projection_is_nonexpansive(pair):
    for dom in (ConvexDomain.box([-1, 0, -2], [1, 3, 2]), ConvexDomain.ball([0, 1, -1], 1.5)):
        pa, pb = dom.project(pair[0]), dom.project(pair[1])
        assert np.linalg.norm(pa - pb) <= np.linalg.norm(pair[0] - pair[1]) + 1e-12
        assert dom.contains(pa) and dom.contains(pb)
        np.testing.assert_allclose(dom.project(pa), pa, atol=1e-14)


@given(arrays(float, 2, elements=coords))
def test_ball_projection_is_nearest_point(p):
    ball = ConvexDomain.ball([0.2, -0.4], 1.3)
    proj = ball.project(p)
    rim = ball.sample_uniform(np.random.default_rng(0), 2000)
    assert np.linalg.norm(p - proj) <= np.min(np.linalg.norm(rim - p, axis=1)) + 1e-12


@given(st.floats(0.05, 2.0), st.integers(1, 3))
def test_halving_radius_never_decreases_count(radius, dim):
    box = ConvexDomain.box(np.zeros(dim), np.linspace(1.0, 2.0, dim))
    assert net_size(box, radius / 2) >= net_size(box, radius)


@given(st.integers(0, 10_000))
def test_squared_bound_dominates_samples(seed):
    rng = np.random.default_rng(seed)
    for dom in (ConvexDomain.box([-1, 0.5], [2, 3]), ConvexDomain.ball([1.0, -2.0], 0.7)):
        pts = dom.sample_uniform(rng, 100)
        assert np.max(np.sum(pts * pts, axis=1)) <= dom.squared_bound() + 1e-12


@pytest.mark.parametrize("radius", [0.4, 0.17, 0.05])
def test_net_covers_ten_thousand_probes(radius):
    box = ConvexDomain.box([-1, 0], [1, 1.5])
    net = covering_net(box, radius)
    assert np.all(box.contains(net.points))
    assert max_probe_gap(box, net, 10_000, seed=int(radius * 100)) <= radius
