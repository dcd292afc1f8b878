import math

import numpy as np
import pytest

from discfol.geometry import norms, polyline_length, sample_ball
from discfol.induction import new_state, state_at
from discfol.labyrinth import Labyrinth, Shell, tangent_plate
from discfol.leaves import (completeness_evidence, default_tol_boundary, first_controlled_stage,
                            foliation_partition_check, leaf_clearance, leaf_invariance_residual, same_leaf,
                            stage_chain, trace_leaf)


def _empty_lab(rho):
    shells = [Shell(i + 1, a, b) for i, (a, b) in enumerate(zip(rho, rho[1:]))]
    k = len(shells)
    return Labyrinth(shells, [[] for _ in shells], [s.width for s in shells], [s.width for s in shells],
                     [0.01] * k, [math.inf] * k)


@pytest.fixture(scope="module")
def trace4(default_state):
    return trace_leaf([0], 0, default_state, step=0.005)


def test_identity_leaf_is_a_diameter():
    rho = [0.5, 0.9]
    st = new_state(_empty_lab(rho), rho)
    tol = 0.05
    tr = trace_leaf([0], 0, st, step=0.01, tol_boundary=tol)
    assert tr.reasons == ("exited", "exited")
    assert tr.length == pytest.approx(2 * (1 - tol), rel=1e-9)
    assert np.max(np.abs(tr.points[:, 0])) == 0
    ev = completeness_evidence(tr, st.labyrinth, st)
    assert ev.bound == 0 and ev.holds
    assert leaf_clearance(tr, st.labyrinth) == {1: math.inf}


def test_chord_bound_and_budget(default_state, trace4):
    chords = norms(np.diff(trace4.points, axis=0))
    assert np.max(chords) <= trace4.step * (1 + 1e-12)
    short = trace_leaf([0], 0, default_state, step=0.005, budget=5)
    assert short.reasons == ("budget", "budget") and len(short.points) == 9


def test_anchor_outside_domain(default_state):
    with pytest.raises(ValueError, match="anchor not in domain"):
        trace_leaf([0], 3.0, default_state)


def test_length_against_dense_reevaluation(default_state, trace4):
    Phi = stage_chain(default_state)
    z = trace4.zetas
    k = 10 * len(z)
    # dense uniform zeta grid over the traced parameter range, clipped to the same boundary sphere
    grid = np.linspace(z[0].real, z[-1].real, k)
    P, esc = Phi.apply(np.column_stack([np.zeros(k), grid]).astype(complex))
    assert not esc.any()
    dense = polyline_length(P)
    assert trace4.length == pytest.approx(dense, rel=0.01)
    assert trace4.length <= dense * (1 + 1e-9)


def test_step_refinement_does_not_shrink(default_state, trace4):
    fine = trace_leaf([0], 0, default_state, step=0.0025, tol_boundary=trace4.tol_boundary)
    assert fine.length >= trace4.length * (1 - 1e-3)


def test_growth_over_stages(default_state, trace4):
    tol = trace4.tol_boundary
    lengths = [trace_leaf([0], 0, default_state, step=0.005, stage=s, tol_boundary=tol).length for s in range(5)]
    assert lengths[0] == pytest.approx(2 * (1 - tol), rel=1e-9)
    assert lengths[4] > lengths[0]
    i0 = first_controlled_stage(trace4, default_state)
    assert i0 == 1
    assert all(b >= a - 1e-12 for a, b in zip(lengths[i0:], lengths[i0 + 1:]))


def test_clearance_against_exhaustive_pairs(default_state, trace4):
    lab = default_state.labyrinth
    clear = leaf_clearance(trace4, lab)
    r = norms(trace4.points)
    for s, plates in zip(lab.shells, lab.plates):
        P = trace4.points[(r >= s.inner) & (r < s.outer)]
        # every (trace point, plate) pair, via the nearest point of the plate
        brute = min(float(np.linalg.norm(P[k] - p.closest_point(P[k:k + 1])[0]))
                    for p in plates for k in range(len(P)))
        assert clear[s.index] == pytest.approx(brute, rel=1e-9)
        assert clear[s.index] > 0


def test_planted_plate_is_detected():
    rho = [0.5, 0.9]
    st = new_state(_empty_lab(rho), rho)
    tr = trace_leaf([0], 0, st, step=0.01, tol_boundary=0.05)
    lab = _empty_lab(rho)
    lab.plates[0] = [tangent_plate(np.array([0, 0.7], complex), 0.02, 0.004)]
    assert leaf_clearance(tr, lab)[1] < 0


def test_completeness_evidence(default_state, trace4):
    ev = completeness_evidence(trace4, default_state.labyrinth, default_state)
    deltas = default_state.labyrinth.deltas
    assert ev.i0 == 1
    assert ev.crossed == [[1, 2, 3, 4], [1, 2, 3, 4]]
    assert ev.bound == pytest.approx(2 * sum(deltas))
    assert all(d >= 0.05 for d in deltas)
    assert ev.holds and trace4.length > ev.bound


def test_trace_confined_to_first_ball_has_zero_bound(default_state):
    tr = trace_leaf([0], 0, default_state, step=0.005, tol_boundary=1 - 0.05)
    ev = completeness_evidence(tr, default_state.labyrinth, default_state)
    assert ev.bound == 0 and ev.holds


def test_leaf_invariance(default_state, trace4):
    assert leaf_invariance_residual(trace4, default_state) < 1e-9


def test_foliation_partition(default_state):
    pts = sample_ball(np.random.default_rng(0), 1000, 2, default_state.rho[1])
    rep = foliation_partition_check(pts, default_state)
    assert rep["max_residual"] < 1e-9 and rep["count"] == 1000
    st0 = state_at(default_state, 0)
    rep0 = foliation_partition_check(pts, st0)
    assert np.array_equal(rep0["c"][:, 0], pts[:, 0])


def test_partition_degrades_loudly_far_out(default_state):
    pts = sample_ball(np.random.default_rng(0), 1000, 2, default_state.rho[3])
    with pytest.raises(ValueError, match="chain arithmetic degraded"):
        foliation_partition_check(pts, default_state)


def test_distinct_leaves_are_apart(default_state):
    a = trace_leaf([0], 0, default_state, step=0.01)
    b = trace_leaf([0.02], 0, default_state, step=0.01)
    assert np.min(np.linalg.norm(a.points[:, None] - b.points[None], axis=-1)) > 0
    p, q = a.points[3], b.points[3]
    assert same_leaf(p, q, default_state) is False
    assert same_leaf(a.points[a.anchor_index], a.points[a.anchor_index + 2], default_state) is True


def test_default_tol_boundary(default_state):
    assert default_tol_boundary(default_state) == pytest.approx((1 - default_state.rho[4]) / 2)
