import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discfol.geometry import (CPoint, SlabRegion, as_complex, as_real, ball, coordinate_circles,
                              norm, polyline_length, region_contains, region_contains_many, sample_ball,
                              sample_slab, sample_sphere)

finite = st.floats(-1e3, 1e3, allow_nan=False)


@given(st.lists(finite, min_size=4, max_size=8).filter(lambda c: len(c) % 2 == 0))
def test_cpoint_complex_round_trip(coords):
    p = CPoint(tuple(coords))
    assert CPoint.from_complex(p.to_complex()) == p
    assert p.n == len(coords) // 2


def test_cpoint_rejects_bad_input():
    with pytest.raises(ValueError):
        CPoint((1.0, 2.0))
    with pytest.raises(ValueError):
        CPoint((1.0, 2.0, 3.0))
    with pytest.raises(ValueError):
        CPoint((1.0, math.nan, 0.0, 0.0))


def test_as_complex_reads_interleaved_pairs():
    z = as_complex(np.array([1.0, 2.0, 3.0, 4.0]))
    assert np.array_equal(z, [1 + 2j, 3 + 4j])
    assert np.array_equal(as_real(z), [1, 2, 3, 4])
    assert norm(CPoint((3.0, 4.0, 0.0, 0.0))) == 5.0


@settings(max_examples=50)
@given(st.lists(st.tuples(finite, finite, finite, finite), min_size=2, max_size=40))
def test_polyline_length_matches_compensated_sum(pts):
    P = np.array(pts)
    segs = [math.dist(a, b) for a, b in zip(pts, pts[1:])]
    assert polyline_length(P) == pytest.approx(math.fsum(segs), rel=1e-12, abs=1e-12)


def test_circle_length_converges():
    # inscribed regular k-gon has exact perimeter 2 k r sin(pi/k)
    r, k = 0.7, 20000
    t = 2 * np.pi * np.arange(k + 1) / k
    P = np.column_stack([r * np.cos(t), r * np.sin(t), np.zeros(k + 1), np.zeros(k + 1)])
    L = polyline_length(P)
    assert L == pytest.approx(2 * k * r * math.sin(math.pi / k), rel=1e-12)
    assert L == pytest.approx(2 * math.pi * r, rel=1e-8)


def test_degenerate_path():
    with pytest.raises(ValueError, match="degenerate path"):
        polyline_length(np.zeros((1, 4)))


def test_regions():
    B = ball(0.5)
    assert region_contains(B, CPoint((0.3, 0.0, 0.0, 0.3)))
    assert not region_contains(B, CPoint((0.3, 0.0, 0.0, 0.3)), margin=0.2)
    S = SlabRegion(1.0)
    inside = region_contains_many(S, np.array([[0.5 + 0.5j, 7.0], [2.0, 0.0]]))
    assert inside.tolist() == [True, False]
    with pytest.raises(ValueError, match="empty shrunk region"):
        region_contains(ball(0.1), CPoint((0.0, 0.0, 0.0, 0.0)), margin=0.2)


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 5.0))
def test_samplers_respect_radius(seed, radius):
    rng = np.random.default_rng(seed)
    S = sample_sphere(rng, 200, 2, radius)
    assert np.allclose(np.linalg.norm(S, axis=1), radius)
    Bp = sample_ball(rng, 200, 2, radius)
    assert np.all(np.linalg.norm(Bp, axis=1) <= radius * (1 + 1e-12))
    T = sample_slab(rng, 200, 2, radius, 10.0)
    assert np.all(np.abs(T[:, 0]) <= radius * (1 + 1e-12))
    C = coordinate_circles(2, radius, 16)
    assert np.allclose(np.linalg.norm(C, axis=1), radius)
