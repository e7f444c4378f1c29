"""Elastic energies, internal forces, and the finite-difference oracle.

Energies follow the unnormalized discrete forms

    E_s = EA/2 sum (e_i - ebar_i)^2
    E_b = EI/2 sum ||kappa_i - kappabar_i||^2
    E_t = GJ/2 sum (tau_i - taubar_i)^2

with per-length scaling factors folded into EA, EI, GJ.  The internal
force is the negated analytic gradient of the total energy; the gradient
accounts both for the explicit dependence of the curvature components on
the edge vectors and for the rotation of the parallel-transported
reference frames as the centerline moves (the holonomy terms, which
vanish on planar states).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch, NonFinite, ValidationError
from . import geometry
from .geometry import (
    RodState,
    RestStrains,
    compute_frames,
    compute_strains,
    dof_count,
    node_dof_indices,
    twist_dof_indices,
)


@dataclass(frozen=True)
class RodParams:
    """Discretization, rest geometry, stiffnesses, masses, and damping.

    The rest shape is the straight uniformly-discretized rod: rest edge
    lengths L/(N-1), zero rest curvature and twist.
    """

    n_nodes: int
    segment_nodes: tuple[int, ...]
    rest_length: float
    EA: float
    EI: float
    GJ: float
    node_masses: np.ndarray
    edge_inertias: np.ndarray
    damping: np.ndarray
    gravity: np.ndarray | None = None

    def __post_init__(self):
        n = self.n_nodes
        if sum(self.segment_nodes) != n:
            raise DimensionMismatch(
                f"segment nodes {self.segment_nodes} do not sum to N={n}"
            )
        if self.rest_length <= 0.0:
            raise ValidationError("rest_length must be positive")
        for name in ("EA", "EI", "GJ"):
            if getattr(self, name) < 0.0:
                raise ValidationError(f"{name} must be nonnegative")
        object.__setattr__(self, "node_masses",
                           np.asarray(self.node_masses, dtype=float))
        object.__setattr__(self, "edge_inertias",
                           np.asarray(self.edge_inertias, dtype=float))
        object.__setattr__(self, "damping",
                           np.asarray(self.damping, dtype=float))
        if self.node_masses.shape != (n,):
            raise DimensionMismatch("node_masses must have length N")
        if self.edge_inertias.shape != (n - 1,):
            raise DimensionMismatch("edge_inertias must have length N-1")
        if self.damping.shape != (dof_count(n),):
            raise DimensionMismatch("damping must have length 4N-1")
        if np.any(self.node_masses <= 0.0) or np.any(self.edge_inertias <= 0.0):
            raise ValidationError("masses and inertias must be positive")
        if np.any(self.damping < 0.0):
            raise ValidationError("damping entries must be nonnegative")
        if self.gravity is not None:
            g = np.asarray(self.gravity, dtype=float)
            if g.shape != (3,):
                raise DimensionMismatch("gravity must be a 3-vector")
            if not np.isfinite(g).all():
                raise NonFinite("gravity must be finite")
            object.__setattr__(self, "gravity", g)

    @property
    def rest_edge_length(self) -> float:
        return self.rest_length / (self.n_nodes - 1)

    def rest_strains(self) -> RestStrains:
        return RestStrains.straight(self.n_nodes, self.rest_edge_length)

    def scaled(self, *, EA=None, EI=None, GJ=None,
               damping_factor=None) -> "RodParams":
        """Copy with selected stiffnesses replaced (plant perturbations)."""
        kwargs = {}
        if EA is not None:
            kwargs["EA"] = EA
        if EI is not None:
            kwargs["EI"] = EI
        if GJ is not None:
            kwargs["GJ"] = GJ
        if damping_factor is not None:
            kwargs["damping"] = self.damping * damping_factor
        return replace(self, **kwargs)


def uniform_params(n_segments_nodes, rest_length, total_mass, EA, EI, GJ,
                   translational_damping=0.0, twist_damping=0.0,
                   edge_inertia=1e-7, gravity=None) -> RodParams:
    """RodParams for a uniform rod with half-edge mass lumping.

    Each edge contributes half its mass to each endpoint node, so interior
    nodes carry one edge mass and end nodes half of one.
    """
    segment_nodes = tuple(n_segments_nodes)
    n = sum(segment_nodes)
    edge_mass = total_mass / (n - 1)
    node_masses = np.full(n, edge_mass)
    node_masses[0] = node_masses[-1] = 0.5 * edge_mass
    damping = np.zeros(dof_count(n))
    damping[node_dof_indices(n)] = translational_damping
    damping[twist_dof_indices(n)] = twist_damping
    return RodParams(
        n_nodes=n,
        segment_nodes=segment_nodes,
        rest_length=rest_length,
        EA=EA,
        EI=EI,
        GJ=GJ,
        node_masses=node_masses,
        edge_inertias=np.full(n - 1, edge_inertia),
        damping=damping,
        gravity=gravity,
    )


def _check_match(state: RodState, params: RodParams):
    if state.n_nodes != params.n_nodes:
        raise DimensionMismatch(
            f"state has N={state.n_nodes}, params expect N={params.n_nodes}"
        )


def elastic_energy(state: RodState, params: RodParams):
    """Stretching, bending, and twisting energies (E_s, E_b, E_t)."""
    _check_match(state, params)
    frames = compute_frames(state)
    rest = params.rest_strains()
    strains = compute_strains(state, frames, rest)
    de = strains.edge_lengths - rest.edge_lengths
    dk = strains.curvatures - rest.curvatures
    dt = strains.twists - rest.twists
    e_s = 0.5 * params.EA * float(de @ de)
    e_b = 0.5 * params.EI * float(np.sum(dk * dk))
    e_t = 0.5 * params.GJ * float(dt @ dt)
    return e_s, e_b, e_t


def _forces_batch(nodes: np.ndarray, twists: np.ndarray,
                  params: RodParams) -> np.ndarray:
    """Analytic internal forces for a batch of configurations.

    nodes is (B, N, 3), twists is (B, N-1); returns (B, 4N-1).  This is
    the single force kernel: internal_forces evaluates it at batch size
    one and force_jacobian at one batch entry per perturbed coordinate,
    so the two can never disagree.
    """
    from .errors import AntipodalTangents

    b, n, _ = nodes.shape
    rest = params.rest_strains()

    edges = np.diff(nodes, axis=1)                      # (B, N-1, 3)
    lengths = np.linalg.norm(edges, axis=2)
    tangents = edges / lengths[:, :, None]

    grad_nodes = np.zeros((b, n, 3))
    grad_phi = np.zeros((b, n - 1))

    # Stretching: dE_s/dEdge_i = EA (e_i - ebar_i) t_i.
    g_stretch = (params.EA
                 * (lengths - rest.edge_lengths)[:, :, None] * tangents)
    grad_nodes[:, :-1] -= g_stretch
    grad_nodes[:, 1:] += g_stretch

    if params.EI != 0.0 or params.GJ != 0.0:
        # Space-parallel transport of the reference director along each
        # rod (sequential over edges, vectorized over the batch).
        a1 = np.empty((b, n - 1, 3))
        base = np.cross(tangents[:, 0], -geometry.E3)
        norm = np.linalg.norm(base, axis=1)
        bad = norm < 1e-9
        if np.any(bad):
            base[bad] = np.cross(tangents[bad, 0],
                                 np.array([0.0, 1.0, 0.0]))
            norm[bad] = np.linalg.norm(base[bad], axis=1)
        base /= norm[:, None]
        base -= (np.einsum("ij,ij->i", base, tangents[:, 0])[:, None]
                 * tangents[:, 0])
        a1[:, 0] = base / np.linalg.norm(base, axis=1)[:, None]
        for i in range(1, n - 1):
            v = geometry._parallel_transport(
                a1[:, i - 1], tangents[:, i - 1], tangents[:, i])
            v -= (np.einsum("ij,ij->i", v, tangents[:, i])[:, None]
                  * tangents[:, i])
            a1[:, i] = v / np.linalg.norm(v, axis=1)[:, None]
        a2 = np.cross(tangents, a1)
        c = np.cos(twists)[:, :, None]
        s = np.sin(twists)[:, :, None]
        m1 = a1 * c + a2 * s
        m2 = -a1 * s + a2 * c

        tp = tangents[:, :-1]       # t_{i-1} at joints 1..N-2
        tn = tangents[:, 1:]        # t_i
        chi = 1.0 + np.einsum("bij,bij->bi", tp, tn)
        if np.any(chi < 1e-10):
            raise AntipodalTangents("consecutive tangents are antiparallel")
        kb = 2.0 * np.cross(tp, tn) / chi[:, :, None]

        m1_avg = 0.5 * (m1[:, :-1] + m1[:, 1:])
        m2_avg = 0.5 * (m2[:, :-1] + m2[:, 1:])
        k1 = np.einsum("bij,bij->bi", m2_avg, kb)
        k2 = -np.einsum("bij,bij->bi", m1_avg, kb)
        dk1 = k1 - rest.curvatures[None, :, 0]
        dk2 = k2 - rest.curvatures[None, :, 1]

        chi3 = chi[:, :, None]
        ttil = (tp + tn) / chi3
        m1til = (m1[:, :-1] + m1[:, 1:]) / chi3
        m2til = (m2[:, :-1] + m2[:, 1:]) / chi3
        ep = lengths[:, :-1, None]
        en = lengths[:, 1:, None]

        # Explicit curvature gradients w.r.t. the adjacent edge vectors
        # (frames co-moving by parallel transport).
        dk1_dEp = (-k1[:, :, None] * ttil + np.cross(tn, m2til)) / ep
        dk1_dEn = (-k1[:, :, None] * ttil - np.cross(tp, m2til)) / en
        dk2_dEp = (-k2[:, :, None] * ttil - np.cross(tn, m1til)) / ep
        dk2_dEn = (-k2[:, :, None] * ttil + np.cross(tp, m1til)) / en

        w1 = params.EI * dk1[:, :, None]
        w2 = params.EI * dk2[:, :, None]
        gEp = w1 * dk1_dEp + w2 * dk2_dEp   # dE_b/dEdge_{i-1}, per joint
        gEn = w1 * dk1_dEn + w2 * dk2_dEn   # dE_b/dEdge_i

        # Edge j = joint index i-1 for gEp rows, joint index i for gEn rows.
        g_edges = np.zeros((b, n - 1, 3))
        g_edges[:, : n - 2] += gEp
        g_edges[:, 1:] += gEn

        # Bending gradient w.r.t. twist angles: rotating the material frame
        # of edge j mixes the curvature components at both adjacent joints.
        dk1_dphi_prev = -0.5 * np.einsum("bij,bij->bi", m1[:, :-1], kb)
        dk1_dphi_next = -0.5 * np.einsum("bij,bij->bi", m1[:, 1:], kb)
        dk2_dphi_prev = -0.5 * np.einsum("bij,bij->bi", m2[:, :-1], kb)
        dk2_dphi_next = -0.5 * np.einsum("bij,bij->bi", m2[:, 1:], kb)
        w_joint_prev = params.EI * (dk1 * dk1_dphi_prev + dk2 * dk2_dphi_prev)
        w_joint_next = params.EI * (dk1 * dk1_dphi_next + dk2 * dk2_dphi_next)
        w_edge = np.zeros((b, n - 1))       # dE_b/dalpha_j per edge frame
        w_edge[:, : n - 2] += w_joint_prev
        w_edge[:, 1:] += w_joint_next
        grad_phi += w_edge

        # Holonomy: moving the centerline rotates every downstream
        # space-transported frame about its tangent; the induced gauge
        # angle at joint i has edge-gradients kb_i / (2 e).
        suffix = np.cumsum(w_edge[:, ::-1], axis=1)[:, ::-1]
        s_joint = suffix[:, 1:, None]       # sum_{j>=i} dE/dalpha_j
        g_edges[:, : n - 2] += -0.5 * s_joint * kb / ep
        g_edges[:, 1:] += -0.5 * s_joint * kb / en

        grad_nodes[:, :-1] -= g_edges
        grad_nodes[:, 1:] += g_edges

        # Twisting: tau_i = phi_i - phi_{i-1} (the reference twist is
        # numerically zero in the space-transport gauge).
        dtau = np.diff(twists, axis=1) - rest.twists[None, :]
        g_tau = params.GJ * dtau
        grad_phi[:, 1:] += g_tau
        grad_phi[:, : n - 2] -= g_tau

    force = np.zeros((b, dof_count(n)))
    force[:, node_dof_indices(n)] = -grad_nodes.reshape(b, -1)
    force[:, twist_dof_indices(n)] = -grad_phi
    return force


def internal_forces(state: RodState, params: RodParams) -> np.ndarray:
    """Analytic internal force -dE/dq, length 4N-1.

    Matches the central finite difference of elastic_energy (the oracle
    internal_forces_fd) to high accuracy; see the gradient-consistency
    tests.
    """
    _check_match(state, params)
    return _forces_batch(state.nodes[None], state.twists[None], params)[0]


def internal_forces_fd(state: RodState, params: RodParams,
                       h: float = 1e-6) -> np.ndarray:
    """Independent oracle: central finite difference of the total energy."""
    if h <= 0.0:
        raise ValidationError("finite-difference step must be positive")
    _check_match(state, params)
    n = state.n_nodes
    q0 = state.flat()
    force = np.empty(dof_count(n))

    def energy_at(q):
        nodes, twists = geometry.unpack_dof(q, n)
        s = RodState(nodes, twists, state.velocity)
        return sum(elastic_energy(s, params))

    for i in range(q0.size):
        step = h * max(1.0, abs(q0[i]))
        qp = q0.copy()
        qp[i] += step
        qm = q0.copy()
        qm[i] -= step
        force[i] = -(energy_at(qp) - energy_at(qm)) / (2.0 * step)
    return force


def mass_matrix(params: RodParams) -> np.ndarray:
    """Diagonal of the lumped mass matrix, length 4N-1."""
    n = params.n_nodes
    diag = np.empty(dof_count(n))
    diag[node_dof_indices(n)] = np.repeat(params.node_masses, 3)
    diag[twist_dof_indices(n)] = params.edge_inertias
    return diag


def gravity_force(params: RodParams) -> np.ndarray:
    """Constant lumped nodal gravity load; zero when gravity is unset."""
    n = params.n_nodes
    force = np.zeros(dof_count(n))
    if params.gravity is not None:
        force[node_dof_indices(n)] = (
            params.node_masses[:, None] * params.gravity[None, :]
        ).reshape(-1)
    return force


def force_jacobian(state: RodState, params: RodParams,
                   h: float = 1e-7) -> np.ndarray:
    """dF_int/dq by column-wise central differences of internal_forces."""
    _check_match(state, params)
    n = state.n_nodes
    q0 = state.flat()
    ndof = q0.size
    steps = h * np.maximum(1.0, np.abs(q0))
    # One batched force evaluation over all 2*ndof perturbed states.
    Q = np.concatenate([q0[None] + np.diag(steps), q0[None] - np.diag(steps)])
    node_idx = node_dof_indices(n)
    twist_idx = twist_dof_indices(n)
    nodes_b = Q[:, node_idx].reshape(-1, n, 3)
    twists_b = Q[:, twist_idx]
    f = _forces_batch(nodes_b, twists_b, params)
    return (f[:ndof] - f[ndof:]).T / (2.0 * steps)[None, :]
