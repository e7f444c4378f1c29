"""Rod state representation and discrete differential geometry.

The rod is a polyline of N nodes with a scalar twist angle per edge.  The
generalized coordinate vector interleaves nodal positions and twist angles,

    q = [x0 y0 z0, phi0, x1 y1 z1, phi1, ..., x_{N-1} y_{N-1} z_{N-1}]

for a total of 4N-1 degrees of freedom (the last node carries no twist).
All derived quantities (tangents, frames, curvatures, twists, turn angles)
are pure functions of the state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AntipodalTangents,
    DegenerateEdge,
    DimensionMismatch,
    NonFinite,
)

# Out-of-plane axis: planar configurations live in the x-y plane.
E3 = np.array([0.0, 0.0, 1.0])

_CHI_MIN = 1e-10  # 1 + t_{i-1}.t_i below this is treated as antipodal


def dof_count(n_nodes: int) -> int:
    return 4 * n_nodes - 1


@dataclass(frozen=True)
class RodState:
    """Immutable rod configuration and velocity.

    nodes: (N, 3) positions in meters.
    twists: (N-1,) per-edge twist angles phi_i in radians.
    velocity: (4N-1,) flat velocity matching the interleaved DOF layout.
    """

    nodes: np.ndarray
    twists: np.ndarray
    velocity: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_dof(self) -> int:
        return dof_count(self.n_nodes)

    def flat(self) -> np.ndarray:
        """Interleaved DOF vector [q_0, phi_0, ..., q_{N-1}]."""
        return pack_dof(self.nodes, self.twists)

    def with_velocity(self, velocity: np.ndarray) -> "RodState":
        velocity = np.asarray(velocity, dtype=float)
        if velocity.shape != (self.n_dof,):
            raise DimensionMismatch(
                f"velocity length {velocity.shape} != {(self.n_dof,)}"
            )
        return RodState(self.nodes, self.twists, velocity)


@dataclass(frozen=True)
class FrameSet:
    """Per-edge orthonormal frames.

    tangents: (N-1, 3) unit edge tangents t_i.
    a1, a2: reference directors (twist-free transport of the base frame).
    m1, m2: material directors, the reference pair rotated about t_i by phi_i.
    """

    tangents: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    m1: np.ndarray
    m2: np.ndarray


@dataclass(frozen=True)
class DiscreteStrains:
    """Discrete strain measures.

    edge_lengths: (N-1,) chord lengths e_i.
    curvatures: (N-2, 2) material curvature pairs (kappa_1, kappa_2)
        at interior nodes 1..N-2.
    twists: (N-2,) discrete twist tau_i at interior nodes.
    turn_angles: (N-2,) angle between consecutive tangents.
    """

    edge_lengths: np.ndarray
    curvatures: np.ndarray
    twists: np.ndarray
    turn_angles: np.ndarray


def pack_dof(nodes: np.ndarray, twists: np.ndarray) -> np.ndarray:
    n = nodes.shape[0]
    q = np.empty(dof_count(n))
    idx = node_dof_indices(n)
    q[idx] = nodes.reshape(-1)
    q[twist_dof_indices(n)] = twists
    return q


def unpack_dof(q: np.ndarray, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    nodes = q[node_dof_indices(n_nodes)].reshape(n_nodes, 3)
    twists = q[twist_dof_indices(n_nodes)].copy()
    return nodes, twists


def node_dof_indices(n_nodes: int) -> np.ndarray:
    """Flat indices of the 3N translational DOFs, in node order."""
    base = 4 * np.arange(n_nodes)[:, None]
    return (base + np.arange(3)[None, :]).reshape(-1)


def twist_dof_indices(n_nodes: int) -> np.ndarray:
    """Flat indices of the N-1 twist DOFs."""
    return 4 * np.arange(n_nodes - 1) + 3


def build_state(nodes, twists, velocity=None) -> RodState:
    """Validate raw arrays and assemble a RodState.

    Velocity defaults to zero.  Rejects non-finite data, fewer than three
    nodes, inconsistent twist/velocity lengths, and zero-length edges.
    """
    nodes = np.array(nodes, dtype=float)
    twists = np.array(twists, dtype=float)
    if nodes.ndim != 2 or nodes.shape[1] != 3:
        raise DimensionMismatch(f"nodes must be (N, 3), got {nodes.shape}")
    n = nodes.shape[0]
    if n < 3:
        raise DimensionMismatch(f"need at least 3 nodes, got {n}")
    if twists.shape != (n - 1,):
        raise DimensionMismatch(
            f"twists must have length N-1={n - 1}, got {twists.shape}"
        )
    if velocity is None:
        velocity = np.zeros(dof_count(n))
    else:
        velocity = np.array(velocity, dtype=float)
        if velocity.shape != (dof_count(n),):
            raise DimensionMismatch(
                f"velocity must have length 4N-1={dof_count(n)}, "
                f"got {velocity.shape}"
            )
    if not (np.isfinite(nodes).all() and np.isfinite(twists).all()
            and np.isfinite(velocity).all()):
        raise NonFinite("state contains NaN or infinity")
    edge_len = np.linalg.norm(np.diff(nodes, axis=0), axis=1)
    if np.any(edge_len <= 0.0):
        bad = int(np.argmin(edge_len))
        raise DegenerateEdge(f"zero-length edge at index {bad}")
    nodes.setflags(write=False)
    twists.setflags(write=False)
    velocity.setflags(write=False)
    return RodState(nodes, twists, velocity)


def _edge_tangents(nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    edges = np.diff(nodes, axis=0)
    lengths = np.linalg.norm(edges, axis=1)
    if np.any(lengths <= 0.0):
        raise DegenerateEdge("zero-length edge")
    return lengths, edges / lengths[:, None]


def _parallel_transport(vectors: np.ndarray, t_from: np.ndarray,
                        t_to: np.ndarray) -> np.ndarray:
    """Rotate each vector by the rotation taking t_from to t_to.

    Vectorized over the leading axis; falls back to the identity when the
    two tangents are (anti)parallel enough that the axis is undefined.
    """
    axis = np.cross(t_from, t_to)
    sin_th = np.linalg.norm(axis, axis=-1)
    cos_th = np.einsum("...i,...i->...", t_from, t_to)
    out = vectors.copy()
    ok = sin_th > 1e-14
    if np.any(ok):
        u = axis[ok] / sin_th[ok][:, None]
        v = vectors[ok]
        c = cos_th[ok][:, None]
        s = sin_th[ok][:, None]
        out[ok] = (v * c + np.cross(u, v) * s
                   + u * np.einsum("ij,ij->i", u, v)[:, None] * (1.0 - c))
    return out


def _base_director(t0: np.ndarray) -> np.ndarray:
    """First reference director on edge 0.

    Uses t0 x (-E3) so that planar states with zero twist reproduce the
    material-frame convention m1 = t x (-E3); falls back to an arbitrary
    perpendicular when t0 is (anti)parallel to E3.  The fallback choice is
    a pure gauge: the elastic energy is invariant under a global rotation
    of the frame field about the tangents.
    """
    a1 = np.cross(t0, -E3)
    norm = np.linalg.norm(a1)
    if norm < 1e-9:
        a1 = np.cross(t0, np.array([0.0, 1.0, 0.0]))
        norm = np.linalg.norm(a1)
    a1 = a1 / norm
    a1 -= np.dot(a1, t0) * t0
    return a1 / np.linalg.norm(a1)


def compute_frames(state: RodState,
                   reference_frames_prev: FrameSet | None = None) -> FrameSet:
    """Tangents, reference frames, and material frames for every edge.

    Without a previous frame set, reference directors are space-parallel
    transported from the first edge (the canonical gauge used by the
    elastic energy).  With one, each edge's director is time-parallel
    transported from its own previous-step director instead.
    """
    _, tangents = _edge_tangents(state.nodes)
    ne = tangents.shape[0]
    a1 = np.empty((ne, 3))
    if reference_frames_prev is not None:
        a1 = _parallel_transport(
            reference_frames_prev.a1, reference_frames_prev.tangents, tangents
        )
        # Defensive re-orthonormalization against drift.
        a1 -= np.einsum("ij,ij->i", a1, tangents)[:, None] * tangents
        a1 /= np.linalg.norm(a1, axis=1)[:, None]
    else:
        a1[0] = _base_director(tangents[0])
        for i in range(1, ne):
            v = _parallel_transport(a1[i - 1][None, :], tangents[i - 1][None, :],
                                    tangents[i][None, :])[0]
            v -= np.dot(v, tangents[i]) * tangents[i]
            a1[i] = v / np.linalg.norm(v)
    a2 = np.cross(tangents, a1)
    c = np.cos(state.twists)[:, None]
    s = np.sin(state.twists)[:, None]
    m1 = a1 * c + a2 * s
    m2 = -a1 * s + a2 * c
    return FrameSet(tangents, a1, a2, m1, m2)


@dataclass(frozen=True)
class RestStrains:
    """Natural strains the elastic energy penalizes deviations from."""

    edge_lengths: np.ndarray
    curvatures: np.ndarray
    twists: np.ndarray

    @staticmethod
    def straight(n_nodes: int, rest_edge_length: float) -> "RestStrains":
        return RestStrains(
            edge_lengths=np.full(n_nodes - 1, rest_edge_length),
            curvatures=np.zeros((n_nodes - 2, 2)),
            twists=np.zeros(n_nodes - 2),
        )


def curvature_binormals(tangents: np.ndarray) -> np.ndarray:
    """(kappa b)_i = 2 t_{i-1} x t_i / (1 + t_{i-1} . t_i) at interior nodes."""
    chi = 1.0 + np.einsum("ij,ij->i", tangents[:-1], tangents[1:])
    if np.any(chi < _CHI_MIN):
        raise AntipodalTangents("consecutive tangents are antiparallel")
    return 2.0 * np.cross(tangents[:-1], tangents[1:]) / chi[:, None]


def reference_twists(frames: FrameSet) -> np.ndarray:
    """Signed angle from the transported a1 of edge i-1 to a1 of edge i.

    Identically zero when the frames were built by space-parallel transport.
    """
    t = frames.tangents
    transported = _parallel_transport(frames.a1[:-1], t[:-1], t[1:])
    cos_a = np.einsum("ij,ij->i", transported, frames.a1[1:])
    sin_a = np.einsum("ij,ij->i", np.cross(transported, frames.a1[1:]), t[1:])
    return np.arctan2(sin_a, cos_a)


def compute_strains(state: RodState, frames: FrameSet,
                    rest: RestStrains) -> DiscreteStrains:
    """Edge lengths, material curvatures, twists, and turn angles.

    Curvature components are projections of the curvature binormal onto
    averaged material directors:

        kappa_1 = +(m2_{i-1} + m2_i)/2 . (kappa b)_i
        kappa_2 = -(m1_{i-1} + m1_i)/2 . (kappa b)_i

    Sign convention: the minus on kappa_2 follows the usual DER choice;
    either sign makes kappa_2 vanish on planar zero-twist rods, and this
    one pairs with the curvature-gradient formulas used by the elastic
    model.
    """
    lengths, tangents = _edge_tangents(state.nodes)
    kb = curvature_binormals(tangents)
    m1_avg = 0.5 * (frames.m1[:-1] + frames.m1[1:])
    m2_avg = 0.5 * (frames.m2[:-1] + frames.m2[1:])
    kappa1 = np.einsum("ij,ij->i", m2_avg, kb)
    kappa2 = -np.einsum("ij,ij->i", m1_avg, kb)
    ref_twist = reference_twists(frames)
    tau = ref_twist + np.diff(state.twists)
    cross = np.linalg.norm(np.cross(tangents[:-1], tangents[1:]), axis=1)
    dot = np.einsum("ij,ij->i", tangents[:-1], tangents[1:])
    theta = np.arctan2(cross, dot)
    return DiscreteStrains(
        edge_lengths=lengths,
        curvatures=np.column_stack([kappa1, kappa2]),
        twists=tau,
        turn_angles=theta,
    )


def tip_position(state: RodState) -> np.ndarray:
    """Task-space readout: position of the last node."""
    return state.nodes[-1].copy()
