"""Mixed-integer contact-surface planning: primitives and branch-and-bound."""

import itertools
import os

import numpy as np
import pytest

from conftest import SCENARIO_DIR
from multicontact.contacts import (PlanSettings, big_m_link, contact_slots,
                                   friction_pyramid_rows, plan_contacts,
                                   pwa_value, reachability_violation,
                                   rotation_from_yaw, sine_cosine_segments,
                                   solve_assignment, terrain_bounding_box)
from multicontact.scenario import (build_plan_settings, build_spec,
                                   load_scenario)


def _stones():
    doc = load_scenario(os.path.join(SCENARIO_DIR, "stepping_stones.json"))
    return build_spec(doc), build_plan_settings(doc)


def test_big_m_link_vacuous_over_box():
    rng = np.random.default_rng(8)
    for _ in range(50):
        rows = rng.standard_normal((4, 3))
        rhs = rng.standard_normal(4)
        lo = rng.uniform(-2.0, 0.0, 3)
        hi = lo + rng.uniform(0.1, 3.0, 3)
        m = big_m_link(rows, rhs, lo, hi)
        assert np.all(m >= 0.0)
        # Grid sweep: with the binary at 0 every box point satisfies
        # a.p <= b + M.
        axes = [np.linspace(lo[i], hi[i], 7) for i in range(3)]
        worst = np.full(4, -np.inf)
        for p in itertools.product(*axes):
            worst = np.maximum(worst, rows @ np.array(p) - rhs)
        assert np.all(worst <= m + 1e-9)
        # Tight: the maximum over the box attains b + M exactly.
        assert np.min(m - worst) <= 1e-6 or np.all(m == 0.0)


def test_big_m_rejects_unbounded_box():
    with pytest.raises(ValueError):
        big_m_link(np.eye(3), np.zeros(3), np.zeros(3),
                   np.array([1.0, np.inf, 1.0]))


def test_friction_pyramid_inscribed():
    mu = 0.7
    rows = friction_pyramid_rows(mu)
    rng = np.random.default_rng(12)
    for _ in range(500):
        f = rng.standard_normal(3) * 50.0
        if np.all(rows @ f <= 0.0):
            assert f[2] >= 0.0
            assert np.linalg.norm(f[:2]) <= mu * f[2] + 1e-9
    # Conservative: the cone boundary at a diagonal direction is cut off.
    edge = np.array([mu / np.sqrt(2), mu / np.sqrt(2), 1.0]) * 10.0
    assert np.all(rows @ edge <= 1e-9)
    outside = np.array([mu, 0.0, 1.0]) * 10.0
    assert np.any(rows @ outside > 1e-9)


def test_reachability_violation_examples():
    zero = np.zeros(3)
    assert reachability_violation(zero, zero, np.zeros(3),
                                  np.full(3, 0.4)) == 0.0
    step = np.array([0.4, 0.0, 0.0])
    viol = reachability_violation(step, zero, np.full(3, -0.3),
                                  np.array([0.3, 0.4, 0.3]))
    assert viol == pytest.approx(0.1, abs=1e-12)


def test_reachability_violation_random_agreement():
    rng = np.random.default_rng(15)
    for _ in range(300):
        p = rng.standard_normal(3)
        q = rng.standard_normal(3)
        dp_min = rng.uniform(-1.0, 0.0, 3)
        dp_max = rng.uniform(0.0, 1.0, 3)
        d = p - q
        direct = max(0.0, float(np.max(dp_min - d)), float(np.max(d - dp_max)))
        assert reachability_violation(p, q, dp_min, dp_max) == pytest.approx(
            direct, abs=1e-15)


def test_pwa_sine_cosine_model():
    breakpoints = np.linspace(-np.pi / 2, np.pi / 2, 6)
    segs = sine_cosine_segments(breakpoints)
    # Exact at the breakpoints (chord interpolation).
    for theta in breakpoints:
        assert pwa_value(theta, breakpoints, segs["sin"]) == pytest.approx(
            np.sin(theta), abs=1e-12)
    assert pwa_value(0.0, breakpoints, segs["sin"]) == pytest.approx(
        0.0, abs=1e-12)
    # Sup-norm error over a dense grid equals the worst per-segment chord
    # deviation, and stays within the sagitta bound h^2/8.
    grid = np.linspace(breakpoints[0], breakpoints[-1], 20001)
    err = max(abs(np.sin(t) - pwa_value(t, breakpoints, segs["sin"]))
              for t in grid)
    per_segment = 0.0
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        local = np.linspace(a, b, 4001)
        per_segment = max(per_segment, max(
            abs(np.sin(t) - pwa_value(t, breakpoints, segs["sin"]))
            for t in local))
    assert err == pytest.approx(per_segment, abs=1e-9)
    h = breakpoints[1] - breakpoints[0]
    assert err <= h * h / 8.0 + 1e-12


def test_rotation_from_yaw_orthonormal():
    rng = np.random.default_rng(20)
    base = np.eye(3)
    for yaw in rng.uniform(-np.pi, np.pi, 20):
        r = rotation_from_yaw(float(yaw), base)
        assert np.allclose(r.T @ r, np.eye(3), atol=1e-12)
        assert np.allclose(r[:, 2], base[:, 2], atol=1e-12)


def test_contact_slots_order_and_pinning():
    spec, _ = _stones()
    slots = contact_slots(spec)
    assert [s.index for s in slots] == list(range(len(slots)))
    starts = [s.start for s in slots]
    assert starts == sorted(starts)
    # The first stance is pinned (initially active), later ones are free.
    assert slots[0].fixed_position is not None
    assert any(s.fixed_position is None for s in slots[1:])


def test_terrain_bounding_box_covers_surfaces():
    spec, _ = _stones()
    lo, hi = terrain_bounding_box(spec.surfaces)
    for surf in spec.surfaces:
        assert np.all(surf.corners >= lo) and np.all(surf.corners <= hi)


def _enumerate_assignments(spec, settings):
    """Exhaustive oracle: every surface choice per free slot, solved alike."""
    free = [s for s in contact_slots(spec) if s.fixed_position is None]
    n_s = len(spec.surfaces)
    best = (np.inf, None)
    for combo in itertools.product(range(n_s), repeat=len(free)):
        fixings = {f"H/{slot.index}/{r}": int(r == combo[i])
                   for i, slot in enumerate(free) for r in range(n_s)}
        obj, x, _ = solve_assignment(spec, settings, fixings)
        if obj < best[0]:
            best = (obj, combo)
    return best


def test_plan_matches_exhaustive_enumeration():
    spec, settings = _stones()
    report = plan_contacts(spec, settings)
    assert report.status == "optimal"
    assert report.gap <= settings.gap_tol
    best_obj, best_combo = _enumerate_assignments(spec, settings)
    assert np.isfinite(best_obj)
    rel = abs(report.objective - best_obj) / max(1.0, abs(best_obj))
    assert rel <= 1e-6
    # The incumbent selects the enumerated-best surfaces.
    h = report.assignment.surface_matrix
    assert np.array_equal(np.argmax(h, axis=1), np.array(best_combo))
    assert np.all(np.isin(h, (0.0, 1.0)))
    assert np.allclose(h.sum(axis=1), 1.0)


def test_bounds_history_is_sound():
    spec, settings = _stones()
    report = plan_contacts(spec, settings)
    lbs = [rec["lb"] for rec in report.bounds_history]
    ubs = [rec["ub"] for rec in report.bounds_history]
    for lb, ub in zip(lbs, ubs):
        assert lb <= ub + 1e-9
    finite = [lb for lb in lbs if np.isfinite(lb)]
    for prev, cur in zip(finite, finite[1:]):
        assert cur >= prev - 1e-9
    assert report.lower_bound <= report.objective + 1e-9


def test_more_refinement_never_worsens_incumbent():
    spec, settings = _stones()
    import copy
    quick = copy.deepcopy(settings)
    quick.refine_iters = 1
    thorough = copy.deepcopy(settings)
    thorough.refine_iters = 3
    obj_quick = plan_contacts(spec, quick).objective
    obj_thorough = plan_contacts(spec, thorough).objective
    assert obj_thorough <= obj_quick + 1e-6


def test_unreachable_surface_never_selected():
    doc = load_scenario(os.path.join(SCENARIO_DIR, "stepping_stones.json"))
    far = {"corners": [[100.0, -0.2, 0.0], [100.4, -0.2, 0.0],
                       [100.4, 0.2, 0.0], [100.0, 0.2, 0.0]]}
    doc["terrain"]["surfaces"].append(far)
    spec = build_spec(doc)
    settings = build_plan_settings(doc)
    report = plan_contacts(spec, settings)
    assert report.status == "optimal"
    far_index = len(spec.surfaces) - 1
    assert np.all(report.assignment.surface_matrix[:, far_index] == 0.0)
