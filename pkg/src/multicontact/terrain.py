"""Planar convex terrain surfaces and contact-membership constraints.

A surface is described by a set of coplanar corners. From them we derive the
unit normal, a surface-aligned rotation (third column equal to the normal),
and the halfspace system that constrains a point to lie on the surface: the
lateral edge halfspaces plus the paired plane inequalities n.p <= n.v and
-n.p <= -n.v.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TerrainSurface:
    """Convex planar contact region defined by coplanar corners."""

    corners: np.ndarray          # (k, 3), ordered counter-clockwise
    normal: np.ndarray           # unit 3-vector
    rotation: np.ndarray         # 3x3, third column = normal
    halfspace_matrix: np.ndarray  # lateral halfspaces A p <= b
    halfspace_rhs: np.ndarray
    reference_point: np.ndarray  # a point on the plane
    friction: float | None = field(default=None)

    @staticmethod
    def from_corners(corners, friction: float | None = None) -> "TerrainSurface":
        corners = np.asarray(corners, dtype=float)
        if corners.ndim != 2 or corners.shape[1] != 3 or corners.shape[0] < 3:
            raise ValueError("a surface needs at least 3 corners of dimension 3")
        normal = _plane_normal(corners)
        centroid = corners.mean(axis=0)
        if np.max(np.abs((corners - centroid) @ normal)) > 1e-9:
            raise ValueError("surface corners are not coplanar within 1e-9")
        # Prefer upward-facing normals when the surface is not vertical.
        if normal[2] < 0 or (abs(normal[2]) < 1e-12 and (normal[0] < 0 or (
                abs(normal[0]) < 1e-12 and normal[1] < 0))):
            normal = -normal
        rotation = _surface_rotation(normal)
        ordered = _order_ccw(corners, normal, rotation)
        a_rows, b_vals = _lateral_halfspaces(ordered, normal)
        return TerrainSurface(
            corners=ordered, normal=normal, rotation=rotation,
            halfspace_matrix=a_rows, halfspace_rhs=b_vals,
            reference_point=ordered[0].copy(), friction=friction,
        )

    def plane_offset(self) -> float:
        return float(self.normal @ self.reference_point)

    def membership_violation(self, point: np.ndarray) -> float:
        """Worst violation of the membership system at `point` (0 if inside)."""
        point = np.asarray(point, dtype=float)
        lateral = self.halfspace_matrix @ point - self.halfspace_rhs
        plane = abs(self.normal @ point - self.plane_offset())
        return float(max(np.max(lateral, initial=0.0), plane))

    def contains(self, point: np.ndarray, tol: float = 1e-9) -> bool:
        return self.membership_violation(point) <= tol


def surface_halfspaces(surface: TerrainSurface):
    """Full membership system (A, b): lateral rows plus the plane pair.

    A point p lies on the surface iff A p <= b. The plane equality is encoded
    as the stacked pair n.p <= n.v and -n.p <= -n.v.
    """
    n = surface.normal
    off = surface.plane_offset()
    a_full = np.vstack([surface.halfspace_matrix, n, -n])
    b_full = np.concatenate([surface.halfspace_rhs, [off, -off]])
    return a_full, b_full


def _plane_normal(corners: np.ndarray) -> np.ndarray:
    centroid = corners.mean(axis=0)
    best = np.zeros(3)
    best_norm = 0.0
    for i in range(corners.shape[0]):
        for j in range(i + 1, corners.shape[0]):
            cand = np.cross(corners[i] - centroid, corners[j] - centroid)
            nc = np.linalg.norm(cand)
            if nc > best_norm:
                best, best_norm = cand, nc
    if best_norm < 1e-12:
        raise ValueError("degenerate surface: corners are collinear")
    return best / best_norm


def _surface_rotation(normal: np.ndarray) -> np.ndarray:
    """Orthonormal frame with the normal as third column."""
    seed = np.array([1.0, 0.0, 0.0])
    if abs(normal @ seed) > 0.9:
        seed = np.array([0.0, 1.0, 0.0])
    x_axis = seed - (seed @ normal) * normal
    x_axis /= np.linalg.norm(x_axis)
    y_axis = np.cross(normal, x_axis)
    return np.column_stack([x_axis, y_axis, normal])


def _order_ccw(corners, normal, rotation) -> np.ndarray:
    centroid = corners.mean(axis=0)
    local = (corners - centroid) @ rotation[:, :2]
    angles = np.arctan2(local[:, 1], local[:, 0])
    return corners[np.argsort(angles)]


def _lateral_halfspaces(ordered, normal):
    k = ordered.shape[0]
    rows, rhs = [], []
    for i in range(k):
        edge = ordered[(i + 1) % k] - ordered[i]
        outward = np.cross(edge, normal)
        norm = np.linalg.norm(outward)
        if norm < 1e-12:
            raise ValueError("degenerate surface edge (repeated corners)")
        outward /= norm
        rows.append(outward)
        rhs.append(outward @ ordered[i])
    return np.array(rows), np.array(rhs)
