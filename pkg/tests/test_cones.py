"""Cone primitives: projection, eigenvalues, boundary steps."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multicontact.cones import (ConeSpec, block_groups, in_cone, min_eig,
                                project_onto_cone, step_to_boundary)


def random_cone(rng):
    nonneg = int(rng.integers(0, 5))
    soc_dims = tuple(int(rng.integers(1, 6))
                     for _ in range(int(rng.integers(0, 4))))
    if nonneg == 0 and not soc_dims:
        nonneg = 1
    return ConeSpec(nonneg=nonneg, soc_dims=soc_dims)


def interior_point(cone, rng, margin=0.5):
    v = rng.standard_normal(cone.dim)
    v[: cone.nonneg] = np.abs(v[: cone.nonneg]) + margin
    for sl in cone.soc_slices():
        tail = v[sl][1:]
        v[sl.start] = np.linalg.norm(tail) + margin
    return v


def test_cone_spec_validation():
    with pytest.raises(ValueError):
        ConeSpec(nonneg=-1)
    with pytest.raises(ValueError):
        ConeSpec(soc_dims=(0,))
    cone = ConeSpec(nonneg=2, soc_dims=(3, 1))
    assert cone.dim == 6
    assert cone.degree == 4


def test_identity_element():
    cone = ConeSpec(nonneg=2, soc_dims=(3,))
    e = cone.identity()
    assert np.array_equal(e, [1.0, 1.0, 1.0, 0.0, 0.0])
    assert min_eig(e, cone) == 1.0


def test_block_groups_partition():
    cone = ConeSpec(nonneg=3, soc_dims=(2, 4, 2, 3))
    groups = block_groups(cone)
    seen = np.concatenate([idx.reshape(-1) for idx in groups.values()])
    assert sorted(seen) == list(range(3, cone.dim))
    assert groups[2].shape == (2, 2)
    assert groups[4].shape == (1, 4)


def test_projection_known_values():
    cone = ConeSpec(nonneg=2, soc_dims=(3,))
    v = np.array([-1.0, 2.0, -5.0, 1.0, 0.0])
    out = project_onto_cone(v, cone)
    assert np.array_equal(out[:2], [0.0, 2.0])
    # Negative-polar SOC point projects to the origin.
    assert np.array_equal(out[2:], [0.0, 0.0, 0.0])
    w = np.array([0.0, 0.0, 0.0, 3.0, 4.0])
    out = project_onto_cone(w, cone)
    assert np.allclose(out[2:], [2.5, 1.5, 2.0])


def test_projection_properties():
    rng = np.random.default_rng(3)
    for _ in range(300):
        cone = random_cone(rng)
        v = rng.standard_normal(cone.dim) * 10 ** rng.uniform(-2, 2)
        p = project_onto_cone(v, cone)
        assert in_cone(p, cone, tol=1e-9)
        # Idempotent.
        assert np.allclose(project_onto_cone(p, cone), p, atol=1e-12)
        # Interior points are fixed points.
        w = interior_point(cone, rng)
        assert np.array_equal(project_onto_cone(w, cone), w)
        # Moreau: v = proj_K(v) - proj_K(-v) for self-dual K, with
        # orthogonal parts.
        q = project_onto_cone(-v, cone)
        assert np.allclose(p - q, v, atol=1e-10)
        assert abs(p @ q) <= 1e-9 * max(1.0, p @ p, q @ q)


def test_min_eig_matches_membership():
    rng = np.random.default_rng(5)
    for _ in range(200):
        cone = random_cone(rng)
        v = rng.standard_normal(cone.dim)
        me = min_eig(v, cone)
        assert in_cone(v, cone) == (me >= 0.0)
        # Shifting by -me times the identity lands on the boundary.
        shifted = v - me * cone.identity()
        assert abs(min_eig(shifted, cone)) <= 1e-12 * max(1.0, abs(me))


def _step_bisect(v, dv, cone, hi=1e9):
    if in_cone(v + hi * dv, cone):
        return np.inf
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if in_cone(v + mid * dv, cone):
            lo = mid
        else:
            hi = mid
    return lo


def test_step_to_boundary_against_bisection():
    rng = np.random.default_rng(11)
    for _ in range(200):
        cone = random_cone(rng)
        v = interior_point(cone, rng)
        dv = rng.standard_normal(cone.dim) * 10 ** rng.uniform(-3, 3)
        alpha = step_to_boundary(v, dv, cone)
        ref = _step_bisect(v, dv, cone)
        if np.isinf(ref):
            assert alpha > 1e8
        else:
            assert alpha == pytest.approx(ref, rel=1e-6, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 4), st.lists(st.integers(1, 5), max_size=3),
       st.integers(0, 2**32 - 1))
def test_step_lands_on_boundary(nonneg, soc_dims, seed):
    if nonneg == 0 and not soc_dims:
        nonneg = 1
    cone = ConeSpec(nonneg=nonneg, soc_dims=tuple(soc_dims))
    rng = np.random.default_rng(seed)
    v = interior_point(cone, rng)
    dv = rng.standard_normal(cone.dim)
    alpha = step_to_boundary(v, dv, cone)
    if np.isinf(alpha):
        assert in_cone(v + 1e6 * dv, cone, tol=1e-6)
        return
    scale = max(1.0, np.linalg.norm(v + alpha * dv))
    assert in_cone(v + 0.999 * alpha * dv, cone, tol=1e-9 * scale)
    assert min_eig(v + alpha * dv, cone) <= 1e-7 * scale
