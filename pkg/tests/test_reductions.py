import math

import numpy as np
import pytest

from coordmed.analysis import alpha, eta_points, icp_threshold, random_profiles, theorem1_value
from coordmed.core import Profile
from coordmed.mechanisms import MechanismSpec, apply_mechanism
from coordmed.optimal import geometric_median
from coordmed.reductions import (
    REDUCED,
    UNREDUCED,
    StepName,
    ar,
    center_profile,
    check_trace,
    classify,
    convexity_merge,
    cp_membership,
    double_rotation,
    eta_layout_t,
    isosceles_balance,
    normalize,
    orient,
    reduce_axes,
    reduce_to_icp,
    toward_gm_sweep,
)

CM = MechanismSpec.cm()


def _median(prof):
    return np.array(apply_mechanism(CM, prof))


def test_center_example():
    out = center_profile([(1, 1), (2, 2), (3, 0)])
    assert out == Profile([(-1, 0), (0, 1), (1, -1)])
    with pytest.raises(ValueError):
        center_profile([(0, 0), (1, 1)])


def test_reduce_axes_example():
    out = reduce_axes([(0, -1), (1, 0), (0, 2)])
    assert out == Profile([(-1, 0), (1, 0), (0, 2)])


def test_reduce_axes_keeps_median():
    # moving the lower agent would pull the a-median left of the origin
    prof = Profile([(0, -1), (0, -2), (-1, 0), (0, 3), (2, 0)])
    out = reduce_axes(prof)
    np.testing.assert_array_equal(_median(out), [0, 0])


def test_convexity_example():
    prof = Profile([(1, 0), (3, 0), (-2, 0), (0, 4), (0, 4)])
    g = geometric_median(prof).location
    assert math.hypot(g.a - 1, g.b) > 1e-6 and math.hypot(g.a - 3, g.b) > 1e-6
    out = convexity_merge(prof, "+a")
    assert out == Profile([(2, 0), (2, 0), (-2, 0), (0, 4), (0, 4)])
    with pytest.raises(ValueError):
        convexity_merge(prof, "north")


def test_isosceles_example():
    out = isosceles_balance([(3, 0), (-1, 0), (0, 1.7)])
    assert out == Profile([(2, 0), (-2, 0), (0, 1.7)])
    pts = np.array([(1, 0), (5, 0), (-0.5, 0), (0, 1), (0, 1)], dtype=float)
    out = isosceles_balance(pts)
    s = (1 + 5 + 0.5) / 3
    assert out == Profile([(s, 0), (s, 0), (-s, 0), (0, 1), (0, 1)])
    # total distance to the origin is unchanged
    assert np.hypot(*out.points.T).sum() == pytest.approx(np.hypot(*pts.T).sum(), abs=1e-12)


def test_eta_layout_and_normalize():
    assert eta_layout_t(eta_points(2, 1.5) * 3) == pytest.approx(1.5)
    prof, t = normalize(np.array([(0, 2), (4, 0), (-4, 0)], dtype=float))
    assert t == pytest.approx(2) and prof == Profile(eta_points(1, 2))
    assert normalize([(0, 2), (4, 0), (-3, 0)]) == (None, None)


def test_cp_membership_examples():
    assert cp_membership(eta_points(1, 2))
    assert cp_membership(eta_points(3, 4 / 3))
    bad = cp_membership([(1, 1), (2, 2), (3, 0)])
    assert not bad and any("median" in d for d in bad.diagnostics)
    off = cp_membership([(0.5, 0.5), (-1, 0), (0, -1), (1, 0), (0, 1)])
    assert not off and any("off both axes" in d for d in off.diagnostics)


def test_classify_labels():
    labels = classify(eta_points(1, 2))
    assert labels == ["R", "L", "G"]


@pytest.mark.parametrize("n", [3, 5, 7])
def test_sweep_reaches_cp(n):
    for pts in random_profiles(n, 200, 3):
        out = toward_gm_sweep(center_profile(pts))
        check = cp_membership(out)
        assert check, check.diagnostics
        assert ar(out) >= ar(center_profile(pts)) - 1e-9


def test_orient_preserves_ratio(rng):
    for pts in random_profiles(5, 200, 4):
        prof = toward_gm_sweep(center_profile(pts))
        out, name = orient(prof)
        assert abs(ar(out) - ar(prof)) <= 1e-12
        np.testing.assert_array_equal(_median(out), [0, 0])
        g = geometric_median(out).location
        tol = 1e-9
        assert g.b >= -tol and g.a >= -tol
        if g.a > tol:
            assert g.b >= g.a - tol, name


def test_double_rotation_formula():
    seen = 0
    for pts in random_profiles(5, 400, 8):
        prof = convexity_merge(reduce_axes(orient(toward_gm_sweep(center_profile(pts)))[0]))
        g = geometric_median(prof).location
        out = double_rotation(prof)
        if out == prof:
            continue
        seen += 1
        norm_g = math.hypot(g.a, g.b)
        for before, after in zip(prof.points, out.points):
            if np.array_equal(before, after):
                continue
            at_g = math.hypot(before[0] - g.a, before[1] - g.b) <= 1e-6
            if at_g:
                np.testing.assert_allclose(after, [0, norm_g], atol=1e-12)
            else:
                assert before[1] == 0 and before[0] <= 0
                np.testing.assert_allclose(after, [-before[0] + 2 * g.a, 0], atol=1e-12)
        assert ar(out) >= ar(prof) - 1e-9
    assert seen > 0


def test_family_member_reduces_to_itself():
    trace = reduce_to_icp(eta_points(1, 2))
    assert trace.status == REDUCED and trace.reduced
    assert trace.final_t == pytest.approx(2, abs=1e-12)
    assert trace.final_ar == pytest.approx(math.sqrt(5) / 2, abs=1e-12)
    assert trace.steps[0].name is StepName.CENTER
    assert trace.steps[-1].name is StepName.NORMALIZE
    assert check_trace(trace, 3) == []


def test_unanimous_is_degenerate():
    trace = reduce_to_icp([(0.2, 0.4)] * 3)
    assert trace.reduced
    assert trace.steps[-1].name is StepName.DEGENERATE
    assert trace.final_t == pytest.approx(icp_threshold(1))


def test_trace_json_round():
    trace = reduce_to_icp(eta_points(2, 2.5))
    d = trace.to_dict()
    assert d["status"] == REDUCED
    assert [s["name"] for s in d["steps"]][0] == "CENTER"
    assert '"status": "REDUCED"' in trace.to_json(indent=2)


@pytest.mark.parametrize("n", [3, 5])
def test_corpus_traces_are_valid(n):
    profiles = random_profiles(n, 300, 17)
    unreduced = 0
    for pts in profiles:
        trace = reduce_to_icp(pts)
        assert check_trace(trace, n) == []
        for step in trace.steps:
            assert step.ar_after >= step.ar_before - 1e-9
            if step.name is not StepName.CENTER:
                np.testing.assert_allclose(_median(step.after), [0, 0], atol=1e-9)
        if trace.status == UNREDUCED:
            unreduced += 1
            assert trace.reason
        else:
            m = (n - 1) // 2
            assert trace.final_ar <= theorem1_value(n) + 1e-9
            assert abs(trace.final_ar - alpha(m, trace.final_t)) <= 1e-9
    assert unreduced / len(profiles) < 0.01


def test_reduce_rejects_even():
    with pytest.raises(ValueError):
        reduce_to_icp([(0, 0), (1, 1)])
