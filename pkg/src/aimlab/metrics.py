"""Detection metrics (DET sweep, EER, normalized min-DCF, balanced accuracy), whole-game
score aggregation and mouse-movement statistics.

Convention: a larger score means "more likely a cheater", and a sample is flagged when
``score >= threshold``. Label 1 is cheat, label 0 is bona fide.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DCF_PRIORS = (0.5, 0.25, 0.1, 0.01)


@dataclass
class ScoreSet:
    score: np.ndarray
    label: np.ndarray
    game_id: np.ndarray = None

    def __post_init__(self):
        self.score = np.asarray(self.score, dtype=np.float64)
        self.label = np.asarray(self.label, dtype=np.int64)
        if self.game_id is None:
            self.game_id = np.arange(len(self.score)).astype(str).astype(object)
        self.game_id = np.asarray(self.game_id, dtype=object)
        if not (len(self.score) == len(self.label) == len(self.game_id)):
            raise ValueError("score, label and game_id lengths differ")

    def __len__(self) -> int:
        return len(self.score)

    def split(self) -> tuple:
        return self.score[self.label == 1], self.score[self.label == 0]


@dataclass(frozen=True)
class DcfParams:
    p_hacker: float
    cost_fp: float = 1.0
    cost_fn: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.p_hacker < 1.0:
            raise ValueError("p_hacker must be in (0, 1)")
        if self.cost_fp < 0 or self.cost_fn < 0 or self.cost_fp + self.cost_fn <= 0:
            raise ValueError("costs must be non-negative and not both zero")


def _pos_neg(scores, labels=None):
    if isinstance(scores, ScoreSet):
        pos, neg = scores.split()
    else:
        scores = np.asarray(scores, dtype=np.float64)
        labels = np.asarray(labels)
        pos, neg = scores[labels == 1], scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("both labels must be present")
    return pos, neg


def det_points(scores, labels=None) -> tuple:
    """Exact threshold sweep: (thresholds, fpr, fnr) with thresholds rising from -inf to +inf.

    Thresholds are the sorted distinct scores plus the two sentinels, so tied scores share a
    threshold. FPR is non-increasing and FNR non-decreasing along the sweep.
    """
    pos, neg = _pos_neg(scores, labels)
    pos = np.sort(pos)
    neg = np.sort(neg)
    thr = np.concatenate([[-np.inf], np.unique(np.concatenate([pos, neg])), [np.inf]])
    fpr = (len(neg) - np.searchsorted(neg, thr, side="left")) / len(neg)
    fnr = np.searchsorted(pos, thr, side="left") / len(pos)
    return thr, fpr, fnr


def eer(scores, labels=None) -> float:
    """Equal error rate, linearly interpolated between the thresholds bracketing FPR = FNR."""
    _, fpr, fnr = det_points(scores, labels)
    diff = fpr - fnr
    i = int(np.argmax(diff <= 0))  # first point at or past the crossing; diff[0] = 1 > 0
    if diff[i] == 0:
        return float(fpr[i])
    lam = diff[i - 1] / (diff[i - 1] - diff[i])
    f = fpr[i - 1] + lam * (fpr[i] - fpr[i - 1])
    m = fnr[i - 1] + lam * (fnr[i] - fnr[i - 1])
    return float(0.5 * (f + m))


def min_dcf(scores, labels=None, params: DcfParams = DcfParams(0.5)) -> float:
    """Minimum over thresholds of p*C_fn*FNR + (1-p)*C_fp*FPR, divided by the cost of the
    better constant decision, so 1.0 means no better than always (or never) flagging."""
    _, fpr, fnr = det_points(scores, labels)
    a = params.p_hacker * params.cost_fn
    b = (1.0 - params.p_hacker) * params.cost_fp
    dcf = a * fnr + b * fpr
    return float(dcf.min() / min(a, b))


def balanced_accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    pos, neg = labels == 1, labels == 0
    if not pos.any() or not neg.any():
        raise ValueError("both labels must be present")
    acc_pos = float(np.mean(predictions[pos] == 1))
    acc_neg = float(np.mean(predictions[neg] == 0))
    return 0.5 * (acc_pos + acc_neg)


def detection_summary(scores: ScoreSet, priors: Sequence[float] = DCF_PRIORS) -> dict:
    return {
        "eer": eer(scores),
        "min_dcf": {str(p): min_dcf(scores, params=DcfParams(p)) for p in priors},
        "n_pos": int(np.sum(scores.label == 1)),
        "n_neg": int(np.sum(scores.label == 0)),
    }


# ---------------------------------------------------------------------------
# whole-game aggregation


@dataclass
class AggregateResult:
    n_vectors: int
    mean_eer: float | None
    std_eer: float | None
    n_games: int
    dropped_games: int

    @property
    def empty(self) -> bool:
        return self.mean_eer is None


def aggregate_games(scores: ScoreSet, n_vectors: int, repetitions: int = 200,
                    seed: int = 0) -> AggregateResult:
    """Game-level EER from the mean score of ``n_vectors`` randomly drawn vectors per game.

    Games with fewer than ``n_vectors`` vectors are dropped. Draws are without replacement;
    the EER is averaged over ``repetitions`` independent draws.
    """
    rng = np.random.default_rng(seed)
    games = {}
    for i, g in enumerate(scores.game_id):
        games.setdefault(g, []).append(i)
    eligible = [(g, np.array(idx)) for g, idx in sorted(games.items()) if len(idx) >= n_vectors]
    dropped = len(games) - len(eligible)
    labels = np.array([int(scores.label[idx[0]]) for _, idx in eligible], dtype=np.int64)
    if not eligible or labels.min() == labels.max():
        return AggregateResult(n_vectors, None, None, len(eligible), dropped)
    values = []
    for _ in range(repetitions):
        means = np.array([scores.score[rng.choice(idx, size=n_vectors, replace=False)].mean()
                          for _, idx in eligible])
        values.append(eer(means, labels))
    values = np.array(values)
    return AggregateResult(n_vectors, float(values.mean()), float(values.std()), len(eligible), dropped)


# ---------------------------------------------------------------------------
# movement statistics


def pearson(a, b) -> tuple:
    """(correlation, degenerate); a zero-variance input gives (0.0, True)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 2:
        return 0.0, True
    da, db = a - a.mean(), b - b.mean()
    sa, sb = np.sqrt(np.dot(da, da)), np.sqrt(np.dot(db, db))
    if sa == 0.0 or sb == 0.0:
        return 0.0, True
    return float(np.clip(np.dot(da, db) / (sa * sb), -1.0, 1.0)), False


@dataclass
class MovementStats:
    avg_abs_yaw: float
    std_abs_yaw: float
    avg_abs_pitch: float
    std_abs_pitch: float
    axis_corr: float
    step_corr_yaw: float
    step_corr_pitch: float
    degenerate: list = field(default_factory=list)

    def to_json(self) -> dict:
        return dict(self.__dict__)


def movement_stats(episodes: Iterable) -> MovementStats:
    """Mean |delta| per axis, Pearson correlation of |dyaw| with |dpitch| over all frames, and
    lag-1 autocorrelation of the signed deltas per axis (per episode, then averaged)."""
    episodes = list(episodes)
    yaw = np.concatenate([ep.dyaw for ep in episodes]) if episodes else np.zeros(0)
    pitch = np.concatenate([ep.dpitch for ep in episodes]) if episodes else np.zeros(0)
    if len(yaw) < 2:
        raise ValueError("need at least two frames")
    degenerate = []
    ay, ap = np.abs(yaw), np.abs(pitch)
    axis, bad = pearson(ay, ap)
    if bad:
        degenerate.append("axis_corr")
    steps = {}
    for name, attr in (("step_corr_yaw", "dyaw"), ("step_corr_pitch", "dpitch")):
        vals = []
        for ep in episodes:
            s = getattr(ep, attr)
            r, bad = pearson(s[:-1], s[1:])
            if not bad:
                vals.append(r)
        if vals:
            steps[name] = float(np.mean(vals))
        else:
            steps[name] = 0.0
            degenerate.append(name)
    return MovementStats(float(ay.mean()), float(ay.std()), float(ap.mean()), float(ap.std()),
                         axis, steps["step_corr_yaw"], steps["step_corr_pitch"], degenerate)
