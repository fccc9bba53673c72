import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aimlab.acceptance import brute_force
from aimlab.core import EpisodeRecord, Controller
from aimlab.metrics import (
    DcfParams, ScoreSet, aggregate_games, balanced_accuracy, det_points, detection_summary, eer,
    min_dcf, movement_stats, pearson,
)

HAND_SCORES = np.array([-1.0, 0.0, 0.5, 2.0])
HAND_LABELS = np.array([0, 0, 1, 1])


def test_hand_set_staircase():
    thr, fpr, fnr = det_points(HAND_SCORES, HAND_LABELS)
    np.testing.assert_array_equal(thr, [-np.inf, -1.0, 0.0, 0.5, 2.0, np.inf])
    np.testing.assert_array_equal(fpr, [1.0, 1.0, 0.5, 0.0, 0.0, 0.0])
    np.testing.assert_array_equal(fnr, [0.0, 0.0, 0.0, 0.0, 0.5, 1.0])


def test_hand_set_eer_and_dcf_from_enumeration():
    bf = brute_force(HAND_SCORES, HAND_LABELS, p=0.25)
    assert eer(HAND_SCORES, HAND_LABELS) == bf["minmax"] == 0.0
    assert min_dcf(HAND_SCORES, HAND_LABELS, DcfParams(0.25)) == bf["min_dcf"] == 0.0


def test_overlapping_hand_set():
    # scores 0,1,2,3 with labels 0,1,0,1: enumerated by hand
    s = np.array([0.0, 1.0, 2.0, 3.0])
    y = np.array([0, 1, 0, 1])
    _, fpr, fnr = det_points(s, y)
    np.testing.assert_array_equal(fpr, [1, 1, 0.5, 0.5, 0, 0])
    np.testing.assert_array_equal(fnr, [0, 0, 0, 0.5, 0.5, 1])
    assert eer(s, y) == 0.5
    # p = 0.25: a = 0.25 (miss), b = 0.75 (false alarm); best is t=3 -> 0.25*0.5 = 0.125
    assert min_dcf(s, y, DcfParams(0.25)) == pytest.approx(0.125 / 0.25)


def test_identical_scores_only_corners():
    _, fpr, fnr = det_points(np.zeros(6), np.array([0, 1] * 3))
    assert set(zip(fpr.tolist(), fnr.tolist())) == {(1.0, 0.0), (0.0, 1.0)}


def test_perfect_and_uninformative():
    s = np.array([0.1, 0.2, 0.9, 1.0])
    y = np.array([0, 0, 1, 1])
    assert eer(s, y) == 0.0
    for p in (0.5, 0.25, 0.1, 0.01):
        assert min_dcf(s, y, DcfParams(p)) == 0.0
        assert min_dcf(np.ones(8), np.array([0, 1] * 4), DcfParams(p)) == 1.0


def test_random_scores_near_chance():
    rng = np.random.default_rng(0)
    assert abs(eer(rng.normal(size=4000), rng.integers(0, 2, 4000)) - 0.5) < 0.05


def test_single_label_rejected():
    with pytest.raises(ValueError):
        eer(np.zeros(3), np.ones(3))
    with pytest.raises(ValueError):
        balanced_accuracy([1, 1], [1, 1])


def test_dcf_params_validation():
    with pytest.raises(ValueError):
        DcfParams(0.0)
    with pytest.raises(ValueError):
        DcfParams(0.5, 0.0, 0.0)


def test_balanced_accuracy_examples():
    assert balanced_accuracy([1, 0, 1], [1, 0, 1]) == 1.0
    labels = np.array([1] * 10 + [0] * 90)
    assert balanced_accuracy(np.ones(100), labels) == 0.5
    pred = [1, 1, 1, 0, 0, 0, 1, 1]
    lab = [1, 1, 1, 1, 0, 0, 0, 0]
    assert balanced_accuracy(pred, lab) == pytest.approx(0.625)


scores_st = st.lists(st.tuples(st.floats(-5, 5, allow_nan=False), st.integers(0, 1)), min_size=2, max_size=40)


def _with_both(pairs):
    pairs = list(pairs) + [(0.0, 0), (0.0, 1)]
    s = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    return s, y


@settings(max_examples=80, deadline=None)
@given(scores_st, st.sampled_from([0.5, 0.25, 0.1, 0.01]))
def test_matches_brute_force(pairs, p):
    s, y = _with_both(pairs)
    bf = brute_force(s, y, p)
    _, fpr, fnr = det_points(s, y)
    assert list(zip(fpr.tolist(), fnr.tolist())) == bf["points"]
    lo, hi = bf["eer_bracket"]
    assert lo - 1e-12 <= eer(s, y) <= hi + 1e-12
    assert min_dcf(s, y, DcfParams(p)) == pytest.approx(bf["min_dcf"], abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(scores_st)
def test_det_staircase_monotone(pairs):
    s, y = _with_both(pairs)
    _, fpr, fnr = det_points(s, y)
    assert np.all(np.diff(fpr) <= 0) and np.all(np.diff(fnr) >= 0)


@settings(max_examples=60, deadline=None)
@given(scores_st, st.floats(0.1, 10), st.floats(-3, 3))
def test_invariant_to_increasing_transforms(pairs, a, b):
    s, y = _with_both(pairs)
    for warp in (a * s + b, np.tanh(s / 10.0)):
        if len(np.unique(warp)) != len(np.unique(s)):
            continue  # float rounding merged two scores
        assert eer(warp, y) == pytest.approx(eer(s, y), abs=1e-12)
        assert min_dcf(warp, y, DcfParams(0.1)) == pytest.approx(min_dcf(s, y, DcfParams(0.1)), abs=1e-12)
        np.testing.assert_array_equal(det_points(warp, y)[1], det_points(s, y)[1])


@settings(max_examples=40, deadline=None)
@given(scores_st)
def test_min_dcf_is_minimal(pairs):
    s, y = _with_both(pairs)
    p = DcfParams(0.25)
    best = min_dcf(s, y, p)
    for t in np.unique(s):
        f = np.mean(s[y == 0] >= t)
        m = np.mean(s[y == 1] < t)
        assert best <= (0.25 * m + 0.75 * f) / 0.25 + 1e-12


def test_detection_summary_keys():
    out = detection_summary(ScoreSet(HAND_SCORES, HAND_LABELS))
    assert set(out["min_dcf"]) == {"0.5", "0.25", "0.1", "0.01"}
    assert out["n_pos"] == 2 and out["n_neg"] == 2


def _games(rng, n_games=12, per_game=20, sep=1.0):
    score, label, gid = [], [], []
    for g in range(n_games):
        lab = g % 2
        score.extend(rng.normal(sep * lab, 1.0, per_game))
        label.extend([lab] * per_game)
        gid.extend([f"g{g}"] * per_game)
    return ScoreSet(np.array(score), np.array(label), np.array(gid, dtype=object))


def test_aggregate_more_vectors_help():
    s = _games(np.random.default_rng(0))
    one = aggregate_games(s, 1, repetitions=50)
    many = aggregate_games(s, 20, repetitions=1)
    assert many.mean_eer <= one.mean_eer
    assert aggregate_games(s, 20, repetitions=1) == aggregate_games(s, 20, repetitions=1)


def test_aggregate_drops_short_games_and_reports_empty():
    s = _games(np.random.default_rng(1), per_game=5)
    res = aggregate_games(s, 6)
    assert res.empty and res.dropped_games == 12 and res.n_games == 0


def _episode(dyaw, dpitch):
    n = len(dyaw)
    return EpisodeRecord("e", Controller.HUMAN, 0, dyaw, dpitch, [False] * n, [[np.nan, np.nan]] * n,
                         [False] * n, [False] * n, [False] * n)


def test_movement_constant_deltas_flagged():
    st_ = movement_stats([_episode([2.0] * 10, [-0.5] * 10)])
    assert st_.avg_abs_yaw == 2.0 and st_.avg_abs_pitch == 0.5
    assert {"axis_corr", "step_corr_yaw", "step_corr_pitch"} <= set(st_.degenerate)
    assert st_.step_corr_yaw == 0.0


def test_movement_all_zero():
    st_ = movement_stats([_episode([0.0] * 5, [0.0] * 5)])
    assert st_.avg_abs_yaw == 0.0 and st_.axis_corr == 0.0 and st_.degenerate


def test_movement_autocorrelation_of_ar1():
    rng = np.random.default_rng(0)
    x = np.zeros(20000)
    for t in range(1, len(x)):
        x[t] = 0.7 * x[t - 1] + rng.normal()
    st_ = movement_stats([_episode(x, rng.normal(size=len(x)))])
    assert st_.step_corr_yaw == pytest.approx(0.7, abs=0.02)
    assert abs(st_.step_corr_pitch) < 0.03


def test_pearson_bounds():
    r, bad = pearson([1, 2, 3], [2, 4, 6])
    assert r == pytest.approx(1.0) and not bad
    assert pearson([1, 1], [1, 2]) == (0.0, True)
