"""Implicit time integration of the rod dynamics.

Each step solves the backward-Euler update

    M (q+ - q - dt qdot) / dt^2 = F_int(q+) + D qdot+ + B(q) Lambda u

with qdot+ = (q+ - q)/dt, by Newton iteration on the free DOFs.  Damping
acts on the new velocity (unconditionally dissipative); B is frozen at
the pre-step configuration so the step stays affine in u.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NewtonDivergence, ValidationError
from .elastic import (
    RodParams,
    elastic_energy,
    force_jacobian,
    gravity_force,
    internal_forces,
    mass_matrix,
)
from .actuation import ActuationModel, build_B
from .geometry import RodState, dof_count, tip_position, unpack_dof


def default_clamped_dofs(n_nodes: int) -> tuple[int, ...]:
    """Cantilever base clamp: node 0, the base twist phi_0, and node 1.

    In the interleaved layout these are flat DOFs 0..6.
    """
    return (0, 1, 2, 3, 4, 5, 6)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.005
    newton_tol: float = 1e-9
    newton_max_iters: int = 50
    clamped_dofs: tuple[int, ...] | None = None
    jacobian_refresh_every: int = 25
    max_substep_halvings: int = 8

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValidationError("dt must be positive")
        if self.newton_tol <= 0.0:
            raise ValidationError("newton_tol must be positive")

    def clamp_indices(self, n_nodes: int) -> np.ndarray:
        if self.clamped_dofs is None:
            idx = default_clamped_dofs(n_nodes)
        else:
            idx = self.clamped_dofs
        idx = np.asarray(sorted(set(idx)), dtype=int)
        if idx.size and (idx[0] < 0 or idx[-1] >= dof_count(n_nodes)):
            raise ValidationError("clamped DOF index out of range")
        return idx


@dataclass
class Trajectory:
    """Time-indexed samples of state, input, and tip position."""

    times: np.ndarray
    states: list[RodState]
    inputs: np.ndarray
    tips: np.ndarray

    def __post_init__(self):
        if not (len(self.times) == len(self.states) == len(self.inputs)
                == len(self.tips)):
            raise ValidationError("trajectory fields must have equal length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0.0):
            raise ValidationError("times must be strictly increasing")


class RodStepper:
    """Owns the factored Jacobian cache for a sequence of implicit steps.

    The Newton matrix M/dt^2 - dF/dq - D/dt is refreshed lazily: it is
    rebuilt every `jacobian_refresh_every` steps or whenever the chord
    iteration stalls, which keeps long smooth rollouts cheap without
    sacrificing robustness.  The policy is deterministic, so identical
    input sequences reproduce identical trajectories.
    """

    def __init__(self, params: RodParams, actuation: ActuationModel,
                 config: SimConfig):
        self.params = params
        self.actuation = actuation
        self.config = config
        self._mass = mass_matrix(params)
        self._gravity = gravity_force(params)
        self._lu = None
        self._lu_dt = None
        self._steps_since_refresh = 0

    def _free_mask(self, n_nodes: int) -> np.ndarray:
        mask = np.ones(dof_count(n_nodes), dtype=bool)
        mask[self.config.clamp_indices(n_nodes)] = False
        return mask

    def _refresh_jacobian(self, q: np.ndarray, dt: float,
                          free: np.ndarray) -> None:
        nodes, twists = unpack_dof(q, self.params.n_nodes)
        jf = force_jacobian(RodState(nodes, twists, np.zeros(q.size)),
                            self.params)
        newton_mat = np.diag(self._mass / dt**2 + self.params.damping / dt) - jf
        self._lu = np.linalg.inv(newton_mat[np.ix_(free, free)])
        self._lu_dt = dt
        self._steps_since_refresh = 0

    def _newton_solve(self, q0: np.ndarray, v0: np.ndarray,
                      const_force: np.ndarray, dt: float,
                      free: np.ndarray) -> np.ndarray:
        """Backward-Euler update over one interval dt; returns q+."""
        params = self.params
        cfg = self.config
        n = params.n_nodes
        mass = self._mass
        damping = params.damping

        def residual(q):
            nodes, twists = unpack_dof(q, n)
            f_int = internal_forces(RodState(nodes, twists, v0), params)
            vplus = (q - q0) / dt
            # Damping opposes the new velocity: F_damp = -c vplus.
            return (mass * (vplus - v0) / dt
                    - f_int + damping * vplus - const_force)

        scale = max(1.0, float(np.max(np.abs(const_force))),
                    float(np.max(np.abs(mass * v0 / dt))))
        tol = cfg.newton_tol * scale

        if (self._lu is None or self._lu_dt != dt
                or self._steps_since_refresh >= cfg.jacobian_refresh_every):
            self._refresh_jacobian(q0, dt, free)

        # Warm start from the explicit prediction; helps smooth rollouts.
        q = q0.copy()
        q[free] += dt * v0[free]
        r = residual(q)
        rnorm = np.max(np.abs(r[free]))
        iters = 0
        full_newton = False
        while rnorm > tol:
            if iters >= cfg.newton_max_iters:
                raise NewtonDivergence(
                    f"Newton failed: residual {rnorm:.3e} after {iters} iters"
                )
            if full_newton:
                self._refresh_jacobian(q, dt, free)
            dq = -(self._lu @ r[free])
            # Backtracking line search on the residual norm.
            step_scale = 1.0
            improved = False
            for _ in range(12):
                q_try = q.copy()
                q_try[free] += step_scale * dq
                r_try = residual(q_try)
                rnorm_try = np.max(np.abs(r_try[free]))
                if rnorm_try < rnorm:
                    improved = True
                    break
                step_scale *= 0.5
            if improved:
                q, r, rnorm = q_try, r_try, rnorm_try
            elif not full_newton:
                # Chord iteration with the cached Jacobian stalled;
                # escalate to a per-iteration refresh.
                full_newton = True
                continue
            else:
                # Even exact Newton with backtracking cannot make
                # progress: the step left the convergence basin.
                raise NewtonDivergence(
                    f"Newton stalled at residual {rnorm:.3e}"
                )
            iters += 1
            if iters >= 8 and not full_newton:
                full_newton = True
        return q

    def _advance(self, q0: np.ndarray, v0: np.ndarray,
                 const_force: np.ndarray, dt: float, free: np.ndarray,
                 halvings: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Advance by dt, recursively halving the interval on divergence.

        Substepping is deterministic (the recursion depends only on the
        inputs), so replays of an input sequence stay bit-identical.
        """
        try:
            q = self._newton_solve(q0, v0, const_force, dt, free)
        except NewtonDivergence:
            if halvings >= self.config.max_substep_halvings:
                raise
            q_mid, v_mid = self._advance(q0, v0, const_force, dt / 2.0,
                                         free, halvings + 1)
            return self._advance(q_mid, v_mid, const_force, dt / 2.0,
                                 free, halvings + 1)
        vplus = (q - q0) / dt
        vplus[~free] = 0.0
        return q, vplus

    def step(self, state: RodState, u: np.ndarray) -> RodState:
        cfg = self.config
        n = state.n_nodes
        free = self._free_mask(n)
        q0 = state.flat()
        v0 = state.velocity.copy()
        v0[~free] = 0.0

        # B and gravity are held fixed over the step, so the applied
        # force is affine in u even while the geometry relaxes.
        b_force = build_B(state, self.actuation) @ (
            self.actuation.Lambda @ np.asarray(u, dtype=float))
        const_force = b_force + self._gravity

        q, vplus = self._advance(q0, v0, const_force, cfg.dt, free)
        self._steps_since_refresh += 1
        q[~free] = q0[~free]
        nodes, twists = unpack_dof(q, n)
        return RodState(nodes, twists, vplus)


def step(state: RodState, u, params: RodParams, actuation: ActuationModel,
         config: SimConfig) -> RodState:
    """Single implicit-Euler step (convenience wrapper, no cache reuse)."""
    return RodStepper(params, actuation, config).step(state, np.asarray(u))


def rollout(state0: RodState, input_schedule: np.ndarray, params: RodParams,
            actuation: ActuationModel, config: SimConfig,
            control_dt: float) -> Trajectory:
    """Open-loop rollout of a zero-order-held input schedule.

    input_schedule has one row of u per control interval; each is held for
    control_dt and integrated with substeps of config.dt.  The trajectory
    records the state at every control instant, including t = 0.
    """
    inputs = np.atleast_2d(np.asarray(input_schedule, dtype=float))
    substeps = int(round(control_dt / config.dt))
    if abs(substeps * config.dt - control_dt) > 1e-12 or substeps < 1:
        raise ValidationError(
            f"dt={config.dt} must divide the control interval {control_dt}"
        )
    stepper = RodStepper(params, actuation, config)
    n_samples = inputs.shape[0] + 1
    times = control_dt * np.arange(n_samples)
    states = [state0]
    tips = [tip_position(state0)]
    state = state0
    for u in inputs:
        for _ in range(substeps):
            state = stepper.step(state, u)
        states.append(state)
        tips.append(tip_position(state))
    u_records = np.vstack([inputs, np.zeros((1, inputs.shape[1]))])
    return Trajectory(times=times, states=states, inputs=u_records,
                      tips=np.asarray(tips))


def total_energy(state: RodState, params: RodParams) -> tuple[float, float]:
    """(kinetic, elastic) energy of a state."""
    mass = mass_matrix(params)
    kinetic = 0.5 * float(state.velocity @ (mass * state.velocity))
    return kinetic, sum(elastic_energy(state, params))
