"""Planar chain constructions used for references and diagnostics."""

from __future__ import annotations

import numpy as np

from .geometry import RodState, build_state


def chain_from_turns(turns, edge_length, start=None, start_angle=0.0,
                     velocity=None) -> RodState:
    """Planar polyline with prescribed turn angles at interior joints.

    Edge k points at angle start_angle + sum of turns at joints <= k; all
    edges share one length.  Twists are zero.
    """
    turns = np.asarray(turns, dtype=float)
    n_edges = turns.size + 1
    angles = start_angle + np.concatenate([[0.0], np.cumsum(turns)])
    dirs = np.column_stack([np.cos(angles), np.sin(angles),
                            np.zeros(n_edges)])
    origin = np.zeros(3) if start is None else np.asarray(start, dtype=float)
    nodes = origin + np.vstack([np.zeros(3),
                                np.cumsum(edge_length * dirs, axis=0)])
    return build_state(nodes, np.zeros(n_edges), velocity)


def uniform_arc_state(n_nodes, turn_angle, edge_length,
                      start_angle=0.0) -> RodState:
    """Discrete arc: equal turn at every interior joint (1..N-2)."""
    return chain_from_turns(np.full(n_nodes - 2, turn_angle), edge_length,
                            start_angle=start_angle)


def bend_state(segment_nodes, bend_angles, edge_length,
               velocity=None) -> RodState:
    """Piecewise-uniform-bend chain for given per-segment bend angles."""
    turns = segment_turn_profile(segment_nodes, bend_angles)
    return chain_from_turns(turns, edge_length, velocity=velocity)


def bend_tip_position(segment_nodes, bend_angles, edge_length) -> np.ndarray:
    """Tip of the piecewise-uniform-bend chain (shared forward kinematics).

    Chord summation, not a continuous-arc formula: the same discrete
    geometry the elastic reference configurations use, so tip positions
    agree exactly between the two descriptions.
    """
    turns = segment_turn_profile(segment_nodes, bend_angles)
    angles = np.concatenate([[0.0], np.cumsum(turns)])
    return edge_length * np.array([
        np.sum(np.cos(angles)), np.sum(np.sin(angles)), 0.0
    ])


def segment_turn_profile(segment_nodes, bend_angles) -> np.ndarray:
    """Per-joint turn angles for a multi-segment piecewise-uniform bend.

    Segment j's total bend is split uniformly over its interior joints;
    the joints at each junction carry zero turn so that three consecutive
    tangents there stay colinear (the junction construction the
    segment-decoupling analysis requires).
    """
    if len(segment_nodes) != len(bend_angles):
        raise ValueError("one bend angle per segment required")
    n = sum(segment_nodes)
    turns = np.zeros(n - 2)
    offset = 0
    for n_j, theta in zip(segment_nodes, bend_angles):
        if n_j < 4:
            raise ValueError("segments need at least 4 nodes")
        # Bending joints of this segment: nodes offset+1 .. offset+n_j-2;
        # turns[k] holds the turn at joint k+1.
        turns[offset : offset + n_j - 2] = theta / (n_j - 2)
        offset += n_j
        # The two junction joints after each segment stay zero.
    return turns
