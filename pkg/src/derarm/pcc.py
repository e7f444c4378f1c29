"""Piecewise-constant-curvature baseline with computed-torque inputs.

The arm is reduced to one bend angle per segment.  Kinematics reuse the
same discrete chord-sum chain the elastic reference configurations are
built from, so tip positions agree exactly between the two descriptions.
Dynamics are assembled from the lumped node masses pushed through the
reduced kinematics; damping and bend stiffness are frozen diagonal
coefficients, the usual constant-curvature spring-damper model.

The baseline generates inputs by evaluating the computed-torque law
along the reference and mapping torques through the inverse of the input
scaling.  It compensates only the two reduced coordinates, so everything
the 4N-1 DOF plant does outside that manifold is unmodeled - which is
exactly what the comparison scenarios measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .actuation import ActuationModel
from .configurations import bend_state, bend_tip_position
from .elastic import RodParams
from .errors import DimensionMismatch, SingularLambda, TooFewSamples
from .geometry import node_dof_indices


@dataclass(frozen=True)
class PccState:
    """Reduced state: per-segment bend angles and their rates."""

    angles: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "angles",
                           np.asarray(self.angles, dtype=float))
        object.__setattr__(self, "rates", np.asarray(self.rates, dtype=float))
        if self.angles.shape != self.rates.shape or self.angles.ndim != 1:
            raise DimensionMismatch("angles and rates must be equal-length")


def pcc_forward_kinematics(angles, params: RodParams) -> np.ndarray:
    """Tip position of the reduced model (shared chord-sum chain)."""
    return bend_tip_position(params.segment_nodes, angles,
                             params.rest_edge_length)


def _node_positions(angles, params: RodParams) -> np.ndarray:
    return bend_state(params.segment_nodes, angles,
                      params.rest_edge_length).nodes


def _node_jacobian(angles, params: RodParams, h: float = 1e-7) -> np.ndarray:
    """d(node positions)/d(angles), shape (N, 3, m)."""
    angles = np.asarray(angles, dtype=float)
    m = angles.size
    n = params.n_nodes
    jac = np.empty((n, 3, m))
    for j in range(m):
        ap = angles.copy()
        ap[j] += h
        am = angles.copy()
        am[j] -= h
        jac[:, :, j] = (_node_positions(ap, params)
                        - _node_positions(am, params)) / (2.0 * h)
    return jac


def pcc_mass_matrix(angles, params: RodParams) -> np.ndarray:
    """Reduced inertia: lumped node masses through the bend kinematics."""
    jac = _node_jacobian(angles, params)
    return np.einsum("n,nij,nik->jk", params.node_masses, jac, jac)


def pcc_damping_matrix(angles, params: RodParams) -> np.ndarray:
    """Reduced damping: translational coefficients through the kinematics."""
    jac = _node_jacobian(angles, params)
    # Per-node translational damping coefficient (uniform by construction).
    coeffs = params.damping[node_dof_indices(params.n_nodes)[::3]]
    return np.einsum("n,nij,nik->jk", coeffs, jac, jac)


def pcc_damping_diagonal(params: RodParams) -> np.ndarray:
    """Frozen diagonal damping for the baseline controller.

    Identified once at the straight configuration and held constant, the
    way a joint-space damping coefficient would be fit from step
    responses; the configuration dependence and cross coupling are
    deliberately ignored.
    """
    m = len(params.segment_nodes)
    return np.diag(pcc_damping_matrix(np.zeros(m), params)).copy()


def pcc_stiffness_diagonal(params: RodParams) -> np.ndarray:
    """Frozen diagonal bend stiffness: small-angle slope EI / n_joints."""
    return np.array([params.EI / (n_j - 2) for n_j in params.segment_nodes])


def pcc_coriolis(angles, rates, params: RodParams,
                 h: float = 1e-6) -> np.ndarray:
    """Coriolis/centrifugal vector C(theta, thetadot) thetadot.

    Christoffel symbols from central differences of the reduced inertia.
    """
    angles = np.asarray(angles, dtype=float)
    rates = np.asarray(rates, dtype=float)
    m = angles.size
    dM = np.empty((m, m, m))        # dM[i] = dM/dtheta_i
    for i in range(m):
        ap = angles.copy()
        ap[i] += h
        am = angles.copy()
        am[i] -= h
        dM[i] = (pcc_mass_matrix(ap, params)
                 - pcc_mass_matrix(am, params)) / (2.0 * h)
    out = np.empty(m)
    for k in range(m):
        c_k = 0.5 * (dM[:, k, :] + dM[:, :, k].T - dM[k])
        out[k] = rates @ (c_k @ rates)
    return out


def pcc_elastic_torque(angles, params: RodParams) -> np.ndarray:
    """Linear restoring torque K theta with the frozen diagonal stiffness.

    The exact uniform-bend torque is EI * kappa * sec^2(theta/(2n)) with
    kappa = 2 tan(theta/(2n)); the baseline keeps only its small-angle
    slope EI/n, the usual constant-curvature spring model.
    """
    return pcc_stiffness_diagonal(params) * np.asarray(angles, dtype=float)


def pcc_virtual_torque(state: PccState, angles_ref, rates_ref, accel_ref,
                       params: RodParams, kp: float = 0.0,
                       kd: float = 0.0) -> np.ndarray:
    """Computed-torque law on the reduced model.

    tau = M_p (accel_ref + kd e_dot + kp e) + C_p rates + D_p rates
          + tau_el, with the dynamic terms evaluated at the current
    reduced state.  Zero gains give the pure feedforward law.
    """
    e = np.asarray(angles_ref, dtype=float) - state.angles
    e_dot = np.asarray(rates_ref, dtype=float) - state.rates
    a_des = np.asarray(accel_ref, dtype=float) + kd * e_dot + kp * e
    tau = pcc_mass_matrix(state.angles, params) @ a_des
    tau += pcc_coriolis(state.angles, state.rates, params)
    tau += pcc_damping_diagonal(params) * state.rates
    tau += pcc_elastic_torque(state.angles, params)
    return tau


def pcc_input(tau, actuation: ActuationModel, params: RodParams) -> np.ndarray:
    """Map reduced torques to inputs: u = Lambda^-1 tau / ebar.

    A unit input applies a couple Lambda_jj * ebar about segment j's bend
    angle, so the torque-to-input map is the scaled inverse of Lambda.
    """
    lam = actuation.Lambda
    if abs(np.linalg.det(lam)) < 1e-12 * np.linalg.norm(lam) ** lam.shape[0]:
        raise SingularLambda("Lambda is numerically singular")
    return np.linalg.solve(lam, np.asarray(tau, dtype=float)
                           / params.rest_edge_length)


def pcc_generate(bend_schedule: np.ndarray, params: RodParams,
                 actuation: ActuationModel,
                 control_dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Feedforward input schedule tracking a bend-angle reference.

    Differentiates the schedule, evaluates the computed-torque law along
    it (no feedback: the reduced state is assumed on the reference), and
    returns (inputs (K-1, m), reference tips (K, 3)).
    """
    sched = np.atleast_2d(np.asarray(bend_schedule, dtype=float))
    if sched.shape[0] < 3:
        raise TooFewSamples("need at least 3 schedule samples")
    rates = np.empty_like(sched)
    rates[1:-1] = (sched[2:] - sched[:-2]) / (2.0 * control_dt)
    rates[0] = (sched[1] - sched[0]) / control_dt
    rates[-1] = (sched[-1] - sched[-2]) / control_dt
    accels = np.zeros_like(sched)
    accels[1:-1] = (sched[2:] - 2.0 * sched[1:-1] + sched[:-2]) / control_dt**2

    inputs = np.empty((sched.shape[0] - 1, actuation.input_dim))
    for k in range(inputs.shape[0]):
        state = PccState(sched[k], rates[k])
        tau = pcc_virtual_torque(state, sched[k], rates[k], accels[k], params)
        inputs[k] = pcc_input(tau, actuation, params)
    tips = np.array([pcc_forward_kinematics(a, params) for a in sched])
    return inputs, tips
