"""Closed-loop generation: gains, references, control law, and IK."""

import numpy as np
import pytest

from derarm.configurations import bend_state, bend_tip_position
from derarm.errors import (
    TooFewSamples,
    Unreachable,
    ValidationError,
)
from derarm.simulate import SimConfig
from derarm.trajgen import (
    Gains,
    bend_angles_for_tip,
    control_input,
    generate,
    motion_basis,
    reference_derivatives,
    reference_states,
)


def test_gains():
    g = Gains(natural_frequency=10.0, damping_ratio=0.5)
    assert g.kp == 100.0
    assert g.kd == 10.0
    with pytest.raises(ValidationError):
        Gains(natural_frequency=0.0)
    with pytest.raises(ValidationError):
        Gains(u_max=-1.0)


def test_reference_states_lift(params):
    sched = np.array([[0.0, 0.0], [0.3, -0.2], [0.6, -0.4]])
    refs = reference_states(sched, params)
    assert len(refs) == 3
    expected = bend_state(params.segment_nodes, sched[1],
                          params.rest_edge_length)
    np.testing.assert_array_equal(refs[1].flat(), expected.flat())


def test_reference_derivatives_exact_for_quadratic():
    dt = 0.1
    t = dt * np.arange(6)
    q = np.column_stack([3.0 * t**2, 1.0 - 2.0 * t**2])
    vel, acc = reference_derivatives(q, dt)
    np.testing.assert_allclose(vel[1:-1, 0], 6.0 * t[1:-1], atol=1e-12)
    np.testing.assert_allclose(acc[1:-1, 0], 6.0, atol=1e-10)
    np.testing.assert_allclose(acc[1:-1, 1], -4.0, atol=1e-10)
    with pytest.raises(TooFewSamples):
        reference_derivatives(q[:2], dt)
    with pytest.raises(ValidationError):
        reference_derivatives(q, 0.0)


def test_motion_basis_predicts_tip_motion(params):
    angles = np.array([0.3, -0.2])
    basis = motion_basis(angles, params)
    assert basis.shape == (params.n_nodes * 4 - 1, 2)
    # Tip rows of the basis match the tip-position derivative.
    h = 1e-6
    for j in range(2):
        ap, am = angles.copy(), angles.copy()
        ap[j] += h
        am[j] -= h
        dtip = (bend_tip_position(params.segment_nodes, ap,
                                  params.rest_edge_length)
                - bend_tip_position(params.segment_nodes, am,
                                    params.rest_edge_length)) / (2.0 * h)
        # The tip node's x,y,z occupy the last three flat DOFs.
        np.testing.assert_allclose(basis[-3:, j], dtip, atol=1e-6)


def test_control_input_reproduces_static_holding_input(params, actuation):
    """On a static 45-degree reference at the reference state, the
    projected law returns the calibrated holding input u = (1, 0)."""
    angles = np.array([np.pi / 4.0, 0.0])
    ref = bend_state(params.segment_nodes, angles, params.rest_edge_length)
    q_ref = ref.flat()
    zeros = np.zeros_like(q_ref)
    basis = motion_basis(angles, params)
    free = np.ones(q_ref.size, dtype=bool)
    free[:7] = False
    u, saturated = control_input(ref, q_ref, zeros, zeros, basis, params,
                                 actuation, Gains(), free)
    assert not saturated
    np.testing.assert_allclose(u, [1.0, 0.0], atol=1e-6)


def test_control_input_saturates(params, actuation):
    angles = np.array([np.pi / 4.0, 0.0])
    ref = bend_state(params.segment_nodes, angles, params.rest_edge_length)
    q_ref = ref.flat()
    zeros = np.zeros_like(q_ref)
    basis = motion_basis(angles, params)
    free = np.ones(q_ref.size, dtype=bool)
    free[:7] = False
    gains = Gains(u_max=0.5)
    u, saturated = control_input(ref, q_ref, zeros, zeros, basis, params,
                                 actuation, gains, free)
    assert saturated
    assert np.abs(u).max() <= 0.5


def test_generate_short_schedule(params, actuation, straight_state):
    t = 0.05 * np.arange(9)
    ramp = 0.2 * (1.0 - np.cos(np.pi * t / t[-1])) / 2.0
    sched = np.column_stack([ramp, -ramp])
    result = generate(straight_state, sched, params, actuation, Gains(),
                      SimConfig(), 0.05)
    traj = result.trajectory
    assert len(traj.states) == 9
    assert result.input_schedule.shape == (8, 2)
    np.testing.assert_array_equal(result.input_schedule,
                                  traj.inputs[:-1])
    assert result.reference_tips.shape == (9, 3)
    assert 0.0 <= result.saturation_fraction <= 1.0
    # The controller ends close to the commanded configuration.
    assert np.linalg.norm(traj.tips[-1] - result.reference_tips[-1]) < 5e-3


def test_ik_round_trip():
    segs = (8, 8)
    edge = 0.25 / 15.0
    rng = np.random.default_rng(3)
    for _ in range(20):
        angles = rng.uniform(-1.0, 1.0, 2)
        target = bend_tip_position(segs, angles, edge)
        sol = bend_angles_for_tip(target, segs, edge, initial_guess=angles)
        back = bend_tip_position(segs, sol, edge)
        assert np.linalg.norm(back - target) < 1e-9


def test_ik_rejects_unreachable():
    segs = (8, 8)
    edge = 0.25 / 15.0
    with pytest.raises(Unreachable):
        bend_angles_for_tip(np.array([0.3, 0.0, 0.0]), segs, edge)
    with pytest.raises(Unreachable):
        bend_angles_for_tip(np.array([0.1, 0.0, 0.05]), segs, edge)
