"""Closed-loop trajectory generation with the pseudo-inverse control law.

Bend-angle references are lifted to full rod configurations (piecewise
uniform bends), differentiated numerically, and tracked by computing the
generalized force a PD-plus-feedforward law asks for and projecting it
onto the two actuation directions with a damped least-squares pseudo-
inverse.  The result is an input schedule plus the nominal trajectory it
produces, suitable for open-loop replay on a perturbed plant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .actuation import ActuationModel, build_B
from .configurations import (
    bend_state,
    bend_tip_position,
    segment_turn_profile,
)
from .elastic import RodParams, internal_forces, mass_matrix
from .errors import (
    DimensionMismatch,
    IkDivergence,
    TooFewSamples,
    Unreachable,
    ValidationError,
)
from .geometry import RodState, dof_count, tip_position, unpack_dof
from .simulate import RodStepper, SimConfig, Trajectory


@dataclass(frozen=True)
class Gains:
    """Tracking gains for the closed-loop generator.

    The PD law is expressed as a desired acceleration, so kp and kd act
    uniformly across DOFs and the mass matrix supplies the scaling:
    kp = natural_frequency^2, kd = 2 * damping_ratio * natural_frequency.
    """

    natural_frequency: float = 20.0
    damping_ratio: float = 1.0
    u_max: float = 10.0

    def __post_init__(self):
        if self.natural_frequency <= 0.0 or self.damping_ratio < 0.0:
            raise ValidationError("gains must be positive")
        if self.u_max <= 0.0:
            raise ValidationError("u_max must be positive")

    @property
    def kp(self) -> float:
        return self.natural_frequency**2

    @property
    def kd(self) -> float:
        return 2.0 * self.damping_ratio * self.natural_frequency


def reference_states(bend_schedule: np.ndarray,
                     params: RodParams) -> list[RodState]:
    """Lift per-instant bend angles (K, m) to rod configurations."""
    bend_schedule = np.atleast_2d(np.asarray(bend_schedule, dtype=float))
    if bend_schedule.shape[1] != len(params.segment_nodes):
        raise DimensionMismatch(
            f"expected {len(params.segment_nodes)} bend angles per sample"
        )
    edge = params.rest_edge_length
    return [bend_state(params.segment_nodes, angles, edge)
            for angles in bend_schedule]


def reference_derivatives(q_refs: np.ndarray,
                          control_dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Velocity and acceleration samples by central differences.

    Interior samples use centered stencils; the endpoints fall back to
    one-sided first-order differences (and zero end accelerations, which
    is exact for schedules that start and finish at rest).
    """
    q = np.asarray(q_refs, dtype=float)
    if q.ndim != 2 or q.shape[0] < 3:
        raise TooFewSamples("need at least 3 reference samples")
    if control_dt <= 0.0:
        raise ValidationError("control_dt must be positive")
    vel = np.empty_like(q)
    vel[1:-1] = (q[2:] - q[:-2]) / (2.0 * control_dt)
    vel[0] = (q[1] - q[0]) / control_dt
    vel[-1] = (q[-1] - q[-2]) / control_dt
    acc = np.zeros_like(q)
    acc[1:-1] = (q[2:] - 2.0 * q[1:-1] + q[:-2]) / control_dt**2
    return vel, acc


def motion_basis(bend_angles, params: RodParams,
                 h: float = 1e-6) -> np.ndarray:
    """d q_ref / d(bend angles) at a reference sample, shape (4N-1, m).

    The columns span the directions the reference family can move in;
    projecting forces through this basis turns them into the equivalent
    generalized torques (virtual work), which is what the actuation can
    actually deliver.
    """
    angles = np.asarray(bend_angles, dtype=float)
    edge = params.rest_edge_length
    basis = np.empty((dof_count(params.n_nodes), angles.size))
    for j in range(angles.size):
        ap = angles.copy()
        ap[j] += h
        am = angles.copy()
        am[j] -= h
        basis[:, j] = (bend_state(params.segment_nodes, ap, edge).flat()
                       - bend_state(params.segment_nodes, am, edge).flat()
                       ) / (2.0 * h)
    return basis


def control_input(state: RodState, q_ref: np.ndarray, v_ref: np.ndarray,
                  a_ref: np.ndarray, basis: np.ndarray, params: RodParams,
                  actuation: ActuationModel, gains: Gains,
                  free: np.ndarray) -> tuple[np.ndarray, bool]:
    """Damped pseudo-inverse of the actuation map on the reference motions.

    Builds the generalized force the PD-plus-feedforward law asks for,
    converts it and the actuation map to generalized torques on the
    reference motion basis (virtual work), and solves the damped least-
    squares problem

        u = (A^T A + lambda^2 I)^-1 A^T w,    A = basis^T (B Lambda)

    then clamps to the input bound.  Returns (u, saturated).
    """
    q = state.flat()
    v = state.velocity
    a_des = (a_ref + gains.kd * (v_ref - v) + gains.kp * (q_ref - q))
    mass = mass_matrix(params)
    # Plant: M qddot = F_int - c qdot + B Lambda u.  The elastic and
    # damping feedforward is evaluated on the reference, so the projected
    # input holds the reference exactly and the PD terms only correct
    # the dynamic lag.
    nodes_ref, twists_ref = unpack_dof(np.asarray(q_ref, dtype=float),
                                       state.n_nodes)
    f_ref = internal_forces(RodState(nodes_ref, twists_ref, v), params)
    w_force = mass * a_des - f_ref + params.damping * v_ref
    bmap = (build_B(state, actuation) @ actuation.Lambda)
    A = basis[free].T @ bmap[free]
    w = basis[free].T @ w_force[free]
    reg = 1e-6 * np.linalg.norm(A)
    u = np.linalg.solve(A.T @ A + reg**2 * np.eye(A.shape[1]), A.T @ w)
    saturated = bool(np.any(np.abs(u) > gains.u_max))
    return np.clip(u, -gains.u_max, gains.u_max), saturated


@dataclass
class GenerationResult:
    """Closed-loop nominal trajectory plus tracking diagnostics."""

    trajectory: Trajectory
    reference_tips: np.ndarray
    saturation_fraction: float

    @property
    def input_schedule(self) -> np.ndarray:
        """Inputs to replay open loop (drops the trailing zero record)."""
        return self.trajectory.inputs[:-1]


def generate(state0: RodState, bend_schedule: np.ndarray, params: RodParams,
             actuation: ActuationModel, gains: Gains, config: SimConfig,
             control_dt: float) -> GenerationResult:
    """Run the tracking controller against the elastic model.

    bend_schedule has one row of per-segment bend angles per control
    instant (K rows produce K-1 held inputs).  The returned trajectory
    samples every control instant, like an open-loop rollout.
    """
    bend_schedule = np.atleast_2d(np.asarray(bend_schedule, dtype=float))
    refs = reference_states(bend_schedule, params)
    q_refs = np.array([s.flat() for s in refs])
    v_refs, a_refs = reference_derivatives(q_refs, control_dt)
    bases = [motion_basis(angles, params) for angles in bend_schedule]

    substeps = int(round(control_dt / config.dt))
    if abs(substeps * config.dt - control_dt) > 1e-12 or substeps < 1:
        raise ValidationError(
            f"dt={config.dt} must divide the control interval {control_dt}"
        )
    stepper = RodStepper(params, actuation, config)
    free = np.ones(state0.n_dof, dtype=bool)
    free[config.clamp_indices(state0.n_nodes)] = False

    n_steps = q_refs.shape[0] - 1
    states = [state0]
    tips = [tip_position(state0)]
    inputs = np.empty((n_steps, actuation.input_dim))
    n_saturated = 0
    state = state0
    for k in range(n_steps):
        u, saturated = control_input(
            state, q_refs[k], v_refs[k], a_refs[k], bases[k], params,
            actuation, gains, free)
        n_saturated += saturated
        inputs[k] = u
        for _ in range(substeps):
            state = stepper.step(state, u)
        states.append(state)
        tips.append(tip_position(state))

    times = control_dt * np.arange(n_steps + 1)
    u_records = np.vstack([inputs, np.zeros((1, actuation.input_dim))])
    trajectory = Trajectory(times=times, states=states, inputs=u_records,
                            tips=np.asarray(tips))
    ref_tips = np.array([tip_position(s) for s in refs])
    return GenerationResult(
        trajectory=trajectory,
        reference_tips=ref_tips,
        saturation_fraction=n_saturated / max(n_steps, 1),
    )


def bend_angles_for_tip(tip_target: np.ndarray, segment_nodes,
                        edge_length: float, initial_guess=None,
                        tol: float = 1e-10, max_iters: int = 100) -> np.ndarray:
    """Invert the shared bend-angle forward kinematics for a planar tip.

    Damped Newton on the two bend angles; the initial guess doubles as a
    continuity tie-break between the elbow-up and elbow-down solutions.
    Raises Unreachable for targets outside the annular workspace and
    IkDivergence if the iteration fails to close the residual.
    """
    target = np.asarray(tip_target, dtype=float)
    if target.shape == (3,):
        if abs(target[2]) > 1e-12:
            raise Unreachable("planar arm cannot leave the x-y plane")
        target = target[:2]
    if target.shape != (2,):
        raise DimensionMismatch("tip target must be a 2- or 3-vector")
    n_edges = sum(segment_nodes) - 1
    reach = n_edges * edge_length
    r = float(np.linalg.norm(target))
    if r > reach + 1e-9:
        raise Unreachable(f"target radius {r:.4f} exceeds reach {reach:.4f}")

    theta = (np.zeros(2) if initial_guess is None
             else np.asarray(initial_guess, dtype=float).copy())

    def fk(angles):
        return bend_tip_position(segment_nodes, angles, edge_length)[:2]

    # d(edge angle)/d(bend angle j): the turn profile of a unit bend of
    # segment j, accumulated along the chain.  Exact, so Newton converges
    # to machine precision.
    m = len(segment_nodes)
    unit = np.eye(m)
    dalpha = np.array([
        np.concatenate([[0.0], np.cumsum(
            segment_turn_profile(segment_nodes, unit[j]))])
        for j in range(m)
    ])                                          # (m, n_edges)

    def jacobian(angles):
        turns = segment_turn_profile(segment_nodes, angles)
        alpha = np.concatenate([[0.0], np.cumsum(turns)])
        return edge_length * np.stack([
            -(dalpha * np.sin(alpha)).sum(axis=1),
            (dalpha * np.cos(alpha)).sum(axis=1),
        ])                                      # (2, m)

    for _ in range(max_iters):
        err = fk(theta) - target
        if np.linalg.norm(err) < tol:
            return theta
        jac = jacobian(theta)
        # Damped step, regularized near the straight-arm singularity; the
        # damping scales with J^T J so it never swamps the weak direction
        # near the workspace boundary.
        jtj = jac.T @ jac
        lam = (1e-12 + 1e-5 * np.linalg.norm(err)) * np.trace(jtj)
        step = np.linalg.solve(jtj + lam * np.eye(m), -jac.T @ err)
        scale = 1.0
        base = np.linalg.norm(err)
        for _ in range(20):
            trial = theta + scale * step
            if np.linalg.norm(fk(trial) - target) < base:
                theta = trial
                break
            scale *= 0.5
        else:
            raise IkDivergence("bend-angle inversion stalled")
    raise IkDivergence(
        f"bend-angle inversion did not converge (residual {base:.2e})"
    )
