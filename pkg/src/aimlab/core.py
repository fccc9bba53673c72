"""Episode logs, detector feature vectors, GAN training windows and their file formats."""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

FRAME_RATE = 35
SPEED_CAP = 30.0  # degrees per frame, per axis

# detector window around a fire event: 17 frames before, the fire frame, 7 after
PRE_FRAMES = 17
POST_FRAMES = 8
WINDOW = PRE_FRAMES + POST_FRAMES
FEATURE_DIM = 2 * WINDOW

CONTEXT = 20
GEN_STEPS = 5

STD_FLOOR = 1e-6


class Controller(str, enum.Enum):
    HUMAN = "HumanModel"
    LIGHT = "Light"
    STRONG = "Strong"
    GAN1 = "GanGroup1"
    GAN2 = "GanGroup2"

    @property
    def is_cheat(self) -> bool:
        return self is not Controller.HUMAN


@dataclass(frozen=True)
class MouseDelta:
    dyaw: float
    dpitch: float

    def __post_init__(self):
        for v in (self.dyaw, self.dpitch):
            if not np.isfinite(v) or abs(v) > SPEED_CAP:
                raise ValueError(f"mouse delta component {v} outside the speed cap")


@dataclass(frozen=True)
class FrameLog:
    delta: MouseDelta
    target_visible: bool
    target_offset: tuple | None
    fired: bool
    hit: bool
    aimbot_active: bool


class EpisodeRecord:
    """One simulated game stored column-wise.

    ``toff`` holds the post-move (yaw, pitch) offset to the target centre and is NaN on
    frames where the target is not visible.
    """

    __slots__ = ("episode_id", "controller", "seed", "frame_rate", "dyaw", "dpitch",
                 "tvis", "toff", "fired", "hit", "bot")

    def __init__(self, episode_id: str, controller: Controller, seed: int, dyaw, dpitch, tvis,
                 toff, fired, hit, bot, frame_rate: int = FRAME_RATE):
        self.episode_id = str(episode_id)
        self.controller = Controller(controller)
        self.seed = int(seed)
        self.frame_rate = int(frame_rate)
        self.dyaw = np.asarray(dyaw, dtype=np.float64)
        self.dpitch = np.asarray(dpitch, dtype=np.float64)
        self.tvis = np.asarray(tvis, dtype=bool)
        self.toff = np.asarray(toff, dtype=np.float64).reshape(-1, 2)
        self.fired = np.asarray(fired, dtype=bool)
        self.hit = np.asarray(hit, dtype=bool)
        self.bot = np.asarray(bot, dtype=bool)
        n = len(self.dyaw)
        if n == 0:
            raise ValueError("an episode needs at least one frame")
        if self.frame_rate != FRAME_RATE:
            raise ValueError(f"frame rate must be {FRAME_RATE}")
        for name in ("dpitch", "tvis", "toff", "fired", "hit", "bot"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has the wrong length")
        if np.any(self.hit & ~self.fired):
            raise ValueError("hit without firing")
        if np.any(self.bot & ~self.tvis):
            raise ValueError("aimbot active without a visible target")

    def __len__(self) -> int:
        return len(self.dyaw)

    @property
    def label(self) -> int:
        return int(self.controller.is_cheat)

    @property
    def frames(self) -> list:
        out = []
        for i in range(len(self)):
            off = tuple(self.toff[i].tolist()) if self.tvis[i] else None
            out.append(FrameLog(MouseDelta(float(self.dyaw[i]), float(self.dpitch[i])),
                                bool(self.tvis[i]), off, bool(self.fired[i]),
                                bool(self.hit[i]), bool(self.bot[i])))
        return out

    def accuracy(self) -> tuple:
        """(hits, shots)."""
        return int(self.hit.sum()), int(self.fired.sum())

    def to_json(self) -> dict:
        frames = []
        for i in range(len(self)):
            toff = [float(self.toff[i, 0]), float(self.toff[i, 1])] if self.tvis[i] else None
            frames.append({
                "dyaw": float(self.dyaw[i]), "dpitch": float(self.dpitch[i]),
                "tvis": bool(self.tvis[i]), "toff": toff, "fired": bool(self.fired[i]),
                "hit": bool(self.hit[i]), "bot": bool(self.bot[i]),
            })
        return {"episode_id": self.episode_id, "controller": self.controller.value,
                "seed": self.seed, "frame_rate": self.frame_rate, "frames": frames}

    @classmethod
    def from_json(cls, obj: dict) -> "EpisodeRecord":
        frames = obj["frames"]
        nan2 = [float("nan"), float("nan")]
        return cls(
            obj["episode_id"], Controller(obj["controller"]), obj["seed"],
            [f["dyaw"] for f in frames], [f["dpitch"] for f in frames],
            [f["tvis"] for f in frames],
            [f["toff"] if f["toff"] is not None else nan2 for f in frames],
            [f["fired"] for f in frames], [f["hit"] for f in frames], [f["bot"] for f in frames],
            frame_rate=obj["frame_rate"],
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, EpisodeRecord):
            return NotImplemented
        return self.to_json() == other.to_json()


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def write_episodes(path, episodes: Iterable[EpisodeRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ep in episodes:
            fh.write(_dumps(ep.to_json()))
            fh.write("\n")


def iter_episodes(path) -> Iterator[EpisodeRecord]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield EpisodeRecord.from_json(json.loads(line))


def read_episodes(path) -> list:
    return list(iter_episodes(path))


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# detector features


@dataclass(frozen=True)
class FeatureVector:
    x: np.ndarray  # 25 yaw deltas then 25 pitch deltas
    is_hit: int
    label: int
    game_id: str

    @property
    def pre_deltas(self) -> np.ndarray:
        return np.stack([self.x[:PRE_FRAMES], self.x[WINDOW:WINDOW + PRE_FRAMES]])

    @property
    def post_deltas(self) -> np.ndarray:
        return np.stack([self.x[PRE_FRAMES:WINDOW], self.x[WINDOW + PRE_FRAMES:]])

    def to_json(self) -> dict:
        return {"x": [float(v) for v in self.x], "is_hit": int(self.is_hit),
                "label": int(self.label), "game_id": self.game_id}

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureVector":
        return cls(np.asarray(obj["x"], dtype=np.float64), int(obj["is_hit"]),
                   int(obj["label"]), str(obj["game_id"]))


def extract_feature_vectors(episode: EpisodeRecord) -> list:
    """One raw vector per fire event with 17 frames before it and 7 after it in the episode."""
    n = len(episode)
    out = []
    for f in np.flatnonzero(episode.fired):
        if f < PRE_FRAMES or f + POST_FRAMES > n:
            continue
        lo, hi = f - PRE_FRAMES, f + POST_FRAMES
        x = np.concatenate([episode.dyaw[lo:hi], episode.dpitch[lo:hi]])
        out.append(FeatureVector(x, int(episode.hit[f]), episode.label, episode.episode_id))
    return out


@dataclass
class FeatureSet:
    """Stacked feature vectors: x (n, 50), is_hit (n,), label (n,), game_id (n,)."""

    x: np.ndarray
    is_hit: np.ndarray
    label: np.ndarray
    game_id: np.ndarray

    def __len__(self) -> int:
        return len(self.label)

    @classmethod
    def from_vectors(cls, vectors: Sequence[FeatureVector]) -> "FeatureSet":
        if not vectors:
            return cls(np.zeros((0, FEATURE_DIM)), np.zeros(0, dtype=np.int64),
                       np.zeros(0, dtype=np.int64), np.zeros(0, dtype=object))
        return cls(np.stack([v.x for v in vectors]),
                   np.array([v.is_hit for v in vectors], dtype=np.int64),
                   np.array([v.label for v in vectors], dtype=np.int64),
                   np.array([v.game_id for v in vectors], dtype=object))

    @classmethod
    def from_episodes(cls, episodes: Iterable[EpisodeRecord]) -> "FeatureSet":
        vecs = []
        for ep in episodes:
            vecs.extend(extract_feature_vectors(ep))
        return cls.from_vectors(vecs)

    @classmethod
    def concat(cls, sets: Sequence["FeatureSet"]) -> "FeatureSet":
        sets = [s for s in sets if len(s)]
        if not sets:
            return cls.from_vectors([])
        return cls(np.concatenate([s.x for s in sets]), np.concatenate([s.is_hit for s in sets]),
                   np.concatenate([s.label for s in sets]),
                   np.concatenate([s.game_id for s in sets]))

    def subset(self, idx) -> "FeatureSet":
        return FeatureSet(self.x[idx], self.is_hit[idx], self.label[idx], self.game_id[idx])

    def vectors(self) -> list:
        return [FeatureVector(self.x[i], int(self.is_hit[i]), int(self.label[i]),
                              str(self.game_id[i])) for i in range(len(self))]


def write_features(path, vectors: Iterable[FeatureVector]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in vectors:
            fh.write(_dumps(v.to_json()))
            fh.write("\n")


def read_features(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [FeatureVector.from_json(json.loads(line)) for line in fh if line.strip()]


@dataclass(frozen=True)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, x, is_hit) -> np.ndarray:
        """Normalize the 50 movement dims and append is_hit untouched -> (n, 51)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        hit = np.asarray(is_hit, dtype=np.float64).reshape(-1, 1)
        return np.hstack([(x - self.mean) / self.std, hit])

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Normalizer":
        return cls(np.asarray(obj["mean"], dtype=np.float64), np.asarray(obj["std"], dtype=np.float64))


def fit_normalizer(vectors) -> Normalizer:
    """Per-dimension mean and population std of the movement dims, std floored at 1e-6."""
    x = vectors.x if isinstance(vectors, FeatureSet) else np.stack([v.x for v in vectors])
    if len(x) < 2:
        raise ValueError("need at least two vectors to fit a normalizer")
    return Normalizer(x.mean(axis=0), np.maximum(x.std(axis=0), STD_FLOOR))


def apply_normalizer(normalizer: Normalizer, vector: FeatureVector) -> np.ndarray:
    return normalizer.apply(vector.x, [vector.is_hit])[0]


# ---------------------------------------------------------------------------
# GAN windows


@dataclass(frozen=True)
class GanWindow:
    context: np.ndarray  # (2, CONTEXT): yaw row, pitch row
    true_steps: np.ndarray  # (2, GEN_STEPS)
    target: np.ndarray  # (2,) per-axis sum of true_steps

    def condition(self) -> np.ndarray:
        """(ctx yaw..., ctx pitch..., target yaw, target pitch)."""
        return np.concatenate([self.context[0], self.context[1], self.target])

    def steps(self) -> np.ndarray:
        """(yaw steps..., pitch steps...)."""
        return np.concatenate([self.true_steps[0], self.true_steps[1]])


def make_gan_windows(episodes: Iterable[EpisodeRecord], stride: int = 1,
                     context: int = CONTEXT, steps: int = GEN_STEPS) -> list:
    if stride < 1:
        raise ValueError("stride must be >= 1")
    span = context + steps
    out = []
    for ep in episodes:
        d = np.stack([ep.dyaw, ep.dpitch])
        for start in range(0, len(ep) - span + 1, stride):
            ctx = d[:, start:start + context].copy()
            true = d[:, start + context:start + span].copy()
            out.append(GanWindow(ctx, true, true.sum(axis=1)))
    return out


def windows_to_arrays(windows: Sequence[GanWindow]) -> tuple:
    """Stack windows into (conditions (n, 2c+2), steps (n, 2g))."""
    cond = np.stack([w.condition() for w in windows])
    steps = np.stack([w.steps() for w in windows])
    return cond, steps
