import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discfol.geometry import ball
from discfol.labyrinth import (Labyrinth, Plate, Shell, build_labyrinth, build_labyrinth_shell, build_shells,
                               certified_delta, check_disjoint_and_contained, default_rho,
                               estimate_min_avoiding_length, min_pairwise_distance, plate_distance,
                               tangent_plate)


def test_dyadic_schedule_widths():
    rho = [1 - 2.0 ** -i for i in range(1, 8)]
    widths = [s.width for s in build_shells(rho)]
    assert widths == pytest.approx([2.0 ** -(i + 1) for i in range(1, 7)], rel=1e-12)


def test_harmonic_schedule_widths():
    rho = default_rho(6)
    widths = [s.width for s in build_shells(rho)]
    assert widths == pytest.approx([1 / ((i + 1) * (i + 2)) for i in range(1, 6)], rel=1e-12)


def test_single_shell():
    (s,) = build_shells([0.5, 0.9])
    assert (s.index, s.inner, s.outer) == (1, 0.5, 0.9)


@pytest.mark.parametrize("rho", [[0.5, 0.4], [0.0, 0.5], [0.5, 1.0], [0.3, 0.3]])
def test_invalid_schedule(rho):
    with pytest.raises(ValueError, match="invalid radius schedule"):
        build_shells(rho)


def _brute_plate_distance(p, q, m=3000, seed=0):
    # dense boundary clouds; their nearest pair overestimates the true gap slightly
    rng = np.random.default_rng(seed)
    A = p.sample(rng, m, surface=1.0)
    B = q.sample(rng, m, surface=1.0)
    return float(np.min(np.linalg.norm(A[:, None] - B[None], axis=-1)))


def test_density_one_geometry():
    s = Shell(1, 0.5, 0.9)
    plates = build_labyrinth_shell(s, 1, 0.004)
    assert len(plates) == 8
    for p in plates:
        assert np.linalg.norm(p.center) == pytest.approx(0.7)
        # tangential: the normal is the radial direction at the center
        c = np.concatenate([[z.real, z.imag] for z in p.center])
        assert abs(abs(c @ p.normal) - np.linalg.norm(c)) < 1e-12
    assert check_disjoint_and_contained(ball(0.5), plates, s) > 0


def test_density_zero_rejected():
    with pytest.raises(ValueError):
        build_labyrinth_shell(Shell(1, 0.5, 0.9), 0, 0.002)


def test_overlap_rejected():
    with pytest.raises(ValueError, match="plates overlap"):
        build_labyrinth_shell(Shell(1, 0.5, 0.9), 1, 0.002, per_sphere=200, radius_frac=0.2)


def test_density_three_pairs_against_brute_force():
    s = Shell(1, 0.5, 0.9)
    plates = build_labyrinth_shell(s, 3, 0.002)
    assert len(plates) == 24
    gap = min_pairwise_distance(plates)
    assert gap > 0
    exact = []
    for k, (p, q) in enumerate(itertools.combinations(plates, 2)):
        d = plate_distance(p, q)
        exact.append(d)
        if d < 2 * gap:  # only the near pairs can be close to the minimum
            b = _brute_plate_distance(p, q, seed=k)
            assert d <= b + 1e-9
            assert b - d < 0.05 * p.radius
    assert min(exact) == pytest.approx(gap, rel=1e-7)


def test_margin_matches_exhaustive_oracle():
    lab = build_labyrinth([0.1, 0.2, 0.35], 2)
    for s, plates in zip(lab.shells, lab.plates):
        B = ball(s.inner)
        pairs = min(plate_distance(p, q) for p, q in itertools.combinations(plates, 2))
        lo = min(p.norm_range()[0] for p in plates) - s.inner
        hi = s.outer - max(p.norm_range()[1] for p in plates)
        assert check_disjoint_and_contained(B, plates, s) == pytest.approx(min(pairs, lo, hi), rel=1e-7)


def test_identical_plates_have_negative_margin():
    p = tangent_plate(np.array([0.7, 0.0], complex), 0.02, 0.002)
    assert check_disjoint_and_contained(ball(0.5), [p, p]) < 0


def test_plate_signed_distance_against_samples():
    rng = np.random.default_rng(4)
    p = tangent_plate(np.array([0.3 + 0.1j, 0.6j]), 0.05, 0.01)
    Z = p.center + 0.2 * (rng.standard_normal((300, 2)) + 1j * rng.standard_normal((300, 2)))
    cloud = p.sample(rng, 40000, surface=1.0)
    brute = np.min(np.linalg.norm(Z[:, None] - cloud[None], axis=-1), axis=1)
    d = p.signed_distance(Z)
    outside = d > 0
    assert np.all(d[outside] <= brute[outside] + 1e-12)
    assert np.max(brute[outside] - d[outside]) < 0.01
    # closest points lie on the plate and realise the distance
    Q = p.closest_point(Z)
    assert np.all(p.signed_distance(Q) <= 1e-12)
    assert np.allclose(np.linalg.norm(Z - Q, axis=1)[outside], d[outside])


def test_plate_norm_range_against_samples():
    p = tangent_plate(np.array([0.4, 0.5j]), 0.05, 0.01)
    r = np.linalg.norm(p.sample(np.random.default_rng(0), 20000, surface=1.0), axis=1)
    lo, hi = p.norm_range()
    assert lo <= r.min() + 1e-12 and r.max() <= hi + 1e-12
    assert r.min() - lo < 1e-3 and hi - r.max() < 1e-3


@pytest.mark.parametrize("h", [0.02, 0.01])
def test_empty_shell_length_is_width(h):
    assert estimate_min_avoiding_length(Shell(1, 0.5, 0.9), [], h) == pytest.approx(0.4, rel=0.02)


def test_tiny_plate_changes_nothing():
    s = Shell(1, 0.5, 0.9)
    p = tangent_plate(np.array([0.7, 0.0], complex), 1e-3, 0.01)
    assert estimate_min_avoiding_length(s, [p], 0.005) == pytest.approx(0.4, rel=0.02)


def test_grid_convergence():
    s = Shell(1, 0.5, 0.9)
    errs = [abs(estimate_min_avoiding_length(s, [], h) - 0.4) for h in (0.04, 0.02, 0.01)]
    assert errs[1] <= errs[0] + 1e-12 and errs[2] <= errs[1] + 1e-12


def test_unresolved_obstacles():
    p = tangent_plate(np.array([0.7, 0.0], complex), 0.02, 0.001)
    with pytest.raises(ValueError, match="unresolved obstacles"):
        estimate_min_avoiding_length(Shell(1, 0.5, 0.9), [p], 0.01)


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000))
def test_adding_a_plate_never_shortens(seed):
    rng = np.random.default_rng(seed)
    s = Shell(1, 0.5, 0.9)
    plates = []
    prev = estimate_min_avoiding_length(s, plates, 0.005)
    for _ in range(3):
        z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        c = z / np.linalg.norm(z) * rng.uniform(0.6, 0.8)
        plates.append(tangent_plate(c, rng.uniform(0.02, 0.08), 0.01))
        if check_disjoint_and_contained(ball(0.5), plates, s) <= 0:
            plates.pop()
            continue
        cur = estimate_min_avoiding_length(s, plates, 0.005)
        assert cur >= prev - 1e-12
        prev = cur


def test_certified_delta_and_default_labyrinth():
    assert certified_delta(0.4, 0.01, 2) == pytest.approx(0.4 - 0.02)
    rho = [0.1, 0.2, 0.35, 0.6, 0.9]
    lab = build_labyrinth(rho, 4)
    assert all(d >= 0.05 for d in lab.deltas)
    assert sum(lab.deltas) >= 4 * 0.05
    assert all(m > 0 for m in lab.margins)
    for s, plates in zip(lab.shells, lab.plates):
        for p in plates:
            lo, hi = p.norm_range()
            assert s.inner < lo and hi < s.outer
    back = Labyrinth.from_dict(lab.to_dict())
    assert back.deltas == lab.deltas
    assert [p.to_dict() for p in back.all_plates] == [p.to_dict() for p in lab.all_plates]
