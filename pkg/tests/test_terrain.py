"""Terrain surfaces and membership halfspace systems."""

import numpy as np
import pytest

from multicontact.terrain import TerrainSurface, surface_halfspaces

UNIT_SQUARE = [[-0.5, -0.5, 0.0], [0.5, -0.5, 0.0],
               [0.5, 0.5, 0.0], [-0.5, 0.5, 0.0]]


def test_halfspaces_center_point():
    surf = TerrainSurface.from_corners(UNIT_SQUARE)
    a, b = surface_halfspaces(surf)
    assert np.all(a @ np.zeros(3) <= b + 1e-12)
    assert surf.membership_violation([0.0, 0.0, 0.0]) == 0.0


def test_halfspaces_lateral_violation():
    surf = TerrainSurface.from_corners(UNIT_SQUARE)
    a, b = surface_halfspaces(surf)
    resid = a @ np.array([0.6, 0.0, 0.0]) - b
    assert np.sum(resid > 1e-12) == 1
    assert np.max(resid) == pytest.approx(0.1, abs=1e-12)
    assert surf.membership_violation([0.6, 0.0, 0.0]) == pytest.approx(
        0.1, abs=1e-12)


def test_halfspaces_plane_violation():
    surf = TerrainSurface.from_corners(UNIT_SQUARE)
    a, b = surface_halfspaces(surf)
    resid = a @ np.array([0.0, 0.0, 0.1]) - b
    # Exactly one of the stacked plane pair fires, by 0.1.
    assert np.max(resid) == pytest.approx(0.1, abs=1e-12)
    assert surf.membership_violation([0.0, 0.0, 0.1]) == pytest.approx(
        0.1, abs=1e-12)


def test_rotation_is_orthonormal_with_normal_last():
    rng = np.random.default_rng(2)
    for _ in range(50):
        # Random tilted quad: rotate the unit square by a random rotation.
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(-1.2, 1.2)
        k = np.array([[0, -axis[2], axis[1]],
                      [axis[2], 0, -axis[0]],
                      [-axis[1], axis[0], 0]])
        rot = np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * k @ k
        corners = np.asarray(UNIT_SQUARE) @ rot.T + rng.standard_normal(3)
        surf = TerrainSurface.from_corners(corners)
        r = surf.rotation
        assert np.allclose(r.T @ r, np.eye(3), atol=1e-12)
        assert np.allclose(r[:, 2], surf.normal, atol=1e-12)
        # Corners lie on the surface.
        for c in surf.corners:
            assert surf.membership_violation(c) <= 1e-9


def test_membership_matches_halfspace_system():
    rng = np.random.default_rng(9)
    surf = TerrainSurface.from_corners(
        [[0.0, 0.0, 0.0], [0.4, 0.0, 0.1], [0.4, 0.3, 0.1], [0.0, 0.3, 0.0]])
    a, b = surface_halfspaces(surf)
    for _ in range(200):
        p = rng.uniform(-0.5, 0.8, 3)
        resid = float(np.max(a @ p - b, initial=0.0))
        assert surf.membership_violation(p) == pytest.approx(resid, abs=1e-12)
        assert surf.contains(p) == (resid <= 1e-9)


def test_degenerate_surfaces_rejected():
    with pytest.raises(ValueError):
        TerrainSurface.from_corners([[0, 0, 0], [1, 0, 0], [2, 0, 0]])
    with pytest.raises(ValueError):
        TerrainSurface.from_corners([[0, 0, 0], [1, 0, 0]])
    with pytest.raises(ValueError):
        TerrainSurface.from_corners(
            [[0, 0, 0], [1, 0, 0], [1, 1, 0.5], [0, 1, 0]])
