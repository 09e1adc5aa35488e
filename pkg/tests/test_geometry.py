import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphdeeponet.errors import InvalidArgumentError
from graphdeeponet.geometry import (
    DomainSpec,
    SensorSet,
    build_knn_graph,
    minimum_image_displacement,
    parse_query_spec,
    regular_sensors,
    sample_irregular_sensors,
)

LINE16 = DomainSpec((0.0,), (16.0,), (True,))


def brute_force_neighbours(pos, domain, k):
    """Exhaustive oracle: sort (wrapped distance, index) pairs for every node."""
    L = domain.extent
    out = []
    for i in range(len(pos)):
        cand = []
        for j in range(len(pos)):
            if i == j:
                continue
            d2 = 0.0
            for c in range(domain.dim):
                diff = abs(pos[i, c] - pos[j, c])
                if domain.periodic[c]:
                    diff = min(diff, L[c] - diff)
                d2 += diff * diff
            cand.append((d2, j))
        cand.sort()
        out.append(sorted(j for _, j in cand[:k]))
    return out


def test_minimum_image_wraps_periodic_axis():
    d = minimum_image_displacement([0.5], [15.5], LINE16)
    np.testing.assert_allclose(d, [1.0])


def test_minimum_image_plain_difference_when_not_periodic():
    dom = DomainSpec((0.0,), (16.0,), (False,))
    np.testing.assert_allclose(minimum_image_displacement([0.3], [0.1], dom), [0.2])


def test_minimum_image_two_axes():
    dom = DomainSpec.box(0.0, 2.5, dim=2)
    d = minimum_image_displacement([0.1, 2.4], [2.4, 0.1], dom)
    np.testing.assert_allclose(d, [0.2, -0.2], atol=1e-12)


def test_minimum_image_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        minimum_image_displacement([0.1, 0.2], [0.3], LINE16)


@given(
    st.floats(0, 16, exclude_max=True),
    st.floats(0, 16, exclude_max=True),
)
def test_minimum_image_antisymmetric(a, b):
    d1 = minimum_image_displacement([a], [b], LINE16)[0]
    d2 = minimum_image_displacement([b], [a], LINE16)[0]
    assert -8.0 <= d1 < 8.0
    if not math.isclose(abs(d1), 8.0, abs_tol=1e-9):
        assert d1 == pytest.approx(-d2, abs=1e-12)


def test_uniform_ring_neighbours_are_three_each_side():
    sensors = regular_sensors(LINE16, 50)
    g = build_knn_graph(sensors, 6)
    for i in range(50):
        nb = set(g.senders[g.receivers == i])
        assert nb == {(i + s) % 50 for s in (-3, -2, -1, 1, 2, 3)}
    expected = brute_force_neighbours(sensors.positions, LINE16, 6)
    assert [sorted(g.senders[g.receivers == i].tolist()) for i in range(50)] == expected


def test_default_k_per_dimension():
    assert build_knn_graph(regular_sensors(LINE16, 20)).k == 6
    assert build_knn_graph(regular_sensors(DomainSpec.box(-2.5, 2.5, 2), 5)).k == 8


def test_tie_goes_to_lower_index():
    dom = DomainSpec((0.0,), (3.0,), (False,))
    g = build_knn_graph(SensorSet([[0.0], [1.0], [2.0]], dom), k=1)
    assert g.senders.tolist() == [1, 0, 1]


def test_k_too_large():
    with pytest.raises(InvalidArgumentError):
        build_knn_graph(regular_sensors(LINE16, 6), 6)


def test_graph_invariants():
    rng = np.random.default_rng(0)
    dom = DomainSpec.box(0.0, 1.0, 2)
    sensors = SensorSet(rng.random((40, 2)), dom)
    g = build_knn_graph(sensors, 5)
    assert np.all(np.bincount(g.receivers, minlength=40) == 5)
    assert not np.any(g.receivers == g.senders)
    assert np.all(np.abs(g.rel_pos) <= 0.5 + 1e-12)
    np.testing.assert_array_equal(
        g.rel_pos, minimum_image_displacement(sensors.positions[g.receivers], sensors.positions[g.senders], dom)
    )


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(3, 64),
    dim=st.sampled_from([1, 2]),
    periodic=st.booleans(),
    k=st.integers(1, 8),
    seed=st.integers(0, 2**31 - 1),
)
def test_knn_matches_brute_force(n, dim, periodic, k, seed):
    if k >= n:
        k = n - 1
    rng = np.random.default_rng(seed)
    dom = DomainSpec.box(0.0, 1.0, dim, periodic=periodic)
    sensors = SensorSet(rng.random((n, dim)), dom)
    g = build_knn_graph(sensors, k)
    expected = brute_force_neighbours(sensors.positions, dom, k)
    got = [sorted(g.senders[g.receivers == i].tolist()) for i in range(n)]
    assert got == expected


def test_knn_is_pure():
    sensors = sample_irregular_sensors(LINE16, 100, 50, seed=3)
    a, b = build_knn_graph(sensors), build_knn_graph(sensors)
    np.testing.assert_array_equal(a.edges, b.edges)
    np.testing.assert_array_equal(a.rel_pos, b.rel_pos)


@settings(max_examples=25, deadline=None)
@given(shift=st.floats(-40, 40), seed=st.integers(0, 1000))
def test_translation_leaves_edge_features_unchanged(shift, seed):
    rng = np.random.default_rng(seed)
    dom = DomainSpec.box(0.0, 16.0, 1)
    pos = rng.random((30, 1)) * 16
    a = build_knn_graph(SensorSet(pos, dom), 6)
    moved = SensorSet(dom.wrap(pos + shift), dom)
    b = build_knn_graph(moved, 6)
    np.testing.assert_array_equal(a.edges, b.edges)
    np.testing.assert_allclose(a.rel_pos, b.rel_pos, atol=1e-9)


def test_relabel_consistent_with_rebuild():
    # generic positions: no distance ties, so labels cannot affect neighbour sets
    sensors = SensorSet(np.random.default_rng(1).random((30, 1)) * 16, LINE16)
    g = build_knn_graph(sensors, 4)
    perm = np.random.default_rng(0).permutation(30)
    relabeled = g.relabel(perm)
    rebuilt = build_knn_graph(sensors.permuted(perm), 4)
    as_set = lambda gr: {(int(r), int(s)) for r, s in gr.edges}
    assert as_set(relabeled) == as_set(rebuilt)


def test_irregular_sensors_1d():
    s = sample_irregular_sensors(LINE16, 100, 50, seed=0)
    assert s.n == 50
    grid = regular_sensors(LINE16, 100).positions[:, 0]
    assert np.all(np.isin(s.positions[:, 0], grid))
    again = sample_irregular_sensors(LINE16, 100, 50, seed=0)
    np.testing.assert_array_equal(s.positions, again.positions)
    other = sample_irregular_sensors(LINE16, 100, 50, seed=1)
    assert not np.array_equal(s.positions, other.positions)


def test_irregular_sensors_2d():
    dom = DomainSpec.box(-2.5, 2.5, 2, periodic=False)
    s = sample_irregular_sensors(dom, 128**2, 1024, seed=0)
    assert s.positions.shape == (1024, 2)
    assert s.positions.min() >= -2.5 and s.positions.max() < 2.5


def test_full_selection_is_regular_grid():
    s = sample_irregular_sensors(LINE16, 100, 100, seed=5)
    np.testing.assert_array_equal(s.positions, regular_sensors(LINE16, 100).positions)


def test_irregular_sensors_errors():
    with pytest.raises(InvalidArgumentError):
        sample_irregular_sensors(LINE16, 100, 101, seed=0)
    with pytest.raises(InvalidArgumentError):
        sample_irregular_sensors(DomainSpec.box(0, 1, 2), 10, 5, seed=0)


def test_domain_validation():
    with pytest.raises(InvalidArgumentError):
        DomainSpec((1.0,), (1.0,), (True,))
    with pytest.raises(InvalidArgumentError):
        SensorSet([[16.0]], LINE16)
    with pytest.raises(InvalidArgumentError):
        SensorSet([[1.0], [1.0]], LINE16)


def test_query_specs():
    assert parse_query_spec("regular:200", LINE16).n == 200
    off = parse_query_spec("offset:100", LINE16)
    np.testing.assert_allclose(off.positions[:2, 0], [0.08, 0.24])
    assert parse_query_spec("random:17", LINE16, seed=1).n == 17
    with pytest.raises(InvalidArgumentError):
        parse_query_spec("hex:10", LINE16)
