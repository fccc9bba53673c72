"""Angular aim-duel simulator and the synthetic human aiming model.

The world is a single target moving on the (yaw, pitch) sphere around the player. Each
frame the target moves (piecewise-constant velocity, random direction changes, occasional
respawns to a fresh offset), the active controller produces a mouse delta, the aim-point
moves, and the human may fire. Shots are instant-hit: a shot hits when the post-move offset
to the target centre is within ``target_radius``.

The human perceives the target with ``reaction_frames`` of latency but knows its own mouse
motion since then (efference copy), so its percept is the delayed offset minus the deltas
executed since it was observed. Target motion during the latency is not compensated.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, fields, replace
from typing import Protocol

from .core import CONTEXT, SPEED_CAP, Controller, EpisodeRecord, MouseDelta
from .heuristic import HeuristicParams, heuristic_step


@dataclass(frozen=True)
class SimConfig:
    episode_frames: int = 5250
    target_radius: float = 1.5
    target_speed_range: tuple = (0.1, 1.5)  # yaw degrees/frame
    pitch_speed_std: float = 0.02  # degrees/frame
    direction_change_rate: float = 0.08
    respawn_rate: float = 0.015
    respawn_yaw_range: float = 90.0
    respawn_pitch_std: float = 1.5
    pitch_jitter_std: float = 0.35  # per-frame vertical jitter of the target centre
    fov: tuple = (45.0, 30.0)  # visible half-widths (yaw, pitch)
    lost_frames: int = 35  # respawn after this many frames out of view
    fire_cooldown: int = 8
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("direction_change_rate", "respawn_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.target_radius <= 0:
            raise ValueError("target_radius must be positive")
        if self.episode_frames < 1:
            raise ValueError("episode_frames must be positive")


@dataclass(frozen=True)
class HumanModelParams:
    reaction_frames: int = 7
    gain_yaw: float = 0.2
    gain_pitch: float = 0.12
    smoothing_alpha: float = 0.4
    noise_std_yaw: float = 0.5
    noise_std_pitch: float = 0.08
    axis_noise_correlation: float = 0.75
    fire_threshold: float = 2.0
    fire_probability: float = 0.15
    lead_gain: float = 0.8  # fraction of the observed target velocity extrapolated over the latency
    motor_noise_gain: float = 0.15  # noise std grows by this factor per degree of pursuit command

    def __post_init__(self):
        if not self.gain_pitch < self.gain_yaw:
            raise ValueError("gain_pitch must be below gain_yaw")
        if not 0.0 <= self.smoothing_alpha < 1.0:
            raise ValueError("smoothing_alpha must be in [0, 1)")
        if not -1.0 <= self.axis_noise_correlation <= 1.0:
            raise ValueError("axis_noise_correlation must be in [-1, 1]")
        if self.reaction_frames < 0:
            raise ValueError("reaction_frames must be >= 0")


PERTURBED_FIELDS = ("gain_yaw", "gain_pitch", "noise_std_yaw", "noise_std_pitch")


def archetype_params(base: HumanModelParams, archetype_seed: int, spread: float = 0.2) -> HumanModelParams:
    """Per-player variant of ``base``: gains and noise scaled by U(1 - spread, 1 + spread)."""
    rng = random.Random(f"archetype-{archetype_seed}")
    changes = {name: getattr(base, name) * rng.uniform(1.0 - spread, 1.0 + spread)
               for name in PERTURBED_FIELDS}
    if changes["gain_pitch"] >= changes["gain_yaw"]:
        changes["gain_pitch"] = 0.99 * changes["gain_yaw"]
    return replace(base, **changes)


def _clip(v: float, cap: float = SPEED_CAP) -> float:
    return -cap if v < -cap else cap if v > cap else v


def wrap_yaw(a: float) -> float:
    """Map to (-180, 180]."""
    a = math.fmod(a, 360.0)
    if a <= -180.0:
        a += 360.0
    elif a > 180.0:
        a -= 360.0
    return a


LEAD_WINDOW = 4  # frames used to estimate target velocity


class HumanState:
    """Latency buffer of observed offsets plus the deltas executed since each observation."""

    def __init__(self, reaction_frames: int, lead_gain: float = 0.0):
        self.k = reaction_frames
        self.lead_gain = lead_gain
        self.observed = deque(maxlen=reaction_frames + LEAD_WINDOW + 1)
        self.executed = deque(maxlen=reaction_frames + LEAD_WINDOW)
        self.prev_delta = (0.0, 0.0)

    def observe(self, offset) -> None:
        self.observed.append(offset)

    def perceived_offset(self):
        """Offset seen ``k`` frames ago, advanced by the aimer's own motion since and by the
        target motion extrapolated over the latency; None if the target was not seen."""
        k = self.k
        if len(self.observed) <= k:
            return None
        obs = self.observed[-1 - k]
        if obs is None:
            return None
        py, pp = obs
        ex = self.executed
        n_ex = len(ex)
        for j in range(n_ex - k, n_ex):
            py -= ex[j][0]
            pp -= ex[j][1]
        if self.lead_gain and k and len(self.observed) == self.observed.maxlen:
            old = self.observed[0]
            if old is not None:
                # target displacement = offset change + own motion over the window
                vy, vp = obs[0] - old[0], obs[1] - old[1]
                for j in range(n_ex - k - LEAD_WINDOW, n_ex - k):
                    vy += ex[j][0]
                    vp += ex[j][1]
                s = self.lead_gain * k / LEAD_WINDOW
                py += s * vy
                pp += s * vp
        return py, pp

    def record(self, delta) -> None:
        """Register the delta that was actually executed this frame (human or bot)."""
        self.executed.append(delta)
        self.prev_delta = delta


def human_step(state: HumanState, params: HumanModelParams, rng: random.Random | None) -> MouseDelta:
    """Smoothed proportional pursuit of the perceived offset plus correlated Gaussian noise."""
    a = params.smoothing_alpha
    percept = state.perceived_offset()
    if percept is None:
        py = pp = 0.0
    else:
        py = _clip(params.gain_yaw * percept[0])
        pp = _clip(params.gain_pitch * percept[1])
    dy = a * state.prev_delta[0] + (1.0 - a) * py
    dp = a * state.prev_delta[1] + (1.0 - a) * pp
    if rng is not None:
        e1 = rng.gauss(0.0, 1.0)
        e2 = rng.gauss(0.0, 1.0)
        rho = params.axis_noise_correlation
        scale = 1.0 + params.motor_noise_gain * math.hypot(py, pp)
        dy += scale * params.noise_std_yaw * e1
        dp += scale * params.noise_std_pitch * (rho * e1 + math.sqrt(1.0 - rho * rho) * e2)
    return MouseDelta(_clip(dy), _clip(dp))


class Aimbot(Protocol):
    """Anything that can take over the mouse for a frame."""

    def start_episode(self, seed: int) -> None: ...

    def step(self, offset, history) -> tuple | None:
        """``offset`` is the pre-move (yaw, pitch) target offset or None; ``history`` holds the
        last CONTEXT executed deltas as (yaw deque, pitch deque). Return a delta or None."""


class HeuristicBot:
    def __init__(self, params: HeuristicParams, noise: bool = True):
        self.params = params
        self.noise = noise
        self.rng = None

    def start_episode(self, seed: int) -> None:
        self.rng = random.Random(f"heuristic-{seed}") if self.noise else None

    def step(self, offset, history):
        return heuristic_step(offset, self.params, self.rng)


class _Target:
    __slots__ = ("yaw", "pitch", "vyaw", "vpitch", "unseen")

    def __init__(self):
        self.yaw = self.pitch = self.vyaw = self.vpitch = 0.0
        self.unseen = 0


def run_episode(config: SimConfig, controller: Controller, human: HumanModelParams,
                bot: Aimbot | None = None, archetype_seed: int = 0,
                episode_id: str | None = None) -> EpisodeRecord:
    """Simulate one game; deterministic in (config, controller, human, bot, archetype_seed)."""
    rng = random.Random(config.rng_seed)
    if bot is not None:
        bot.start_episode(config.rng_seed)
    lo_speed, hi_speed = config.target_speed_range
    fov_y, fov_p = config.fov
    radius2 = config.target_radius ** 2

    aim_yaw = aim_pitch = 0.0
    tgt = _Target()

    def new_velocity():
        tgt.vyaw = rng.uniform(lo_speed, hi_speed) * (1.0 if rng.random() < 0.5 else -1.0)
        tgt.vpitch = rng.gauss(0.0, config.pitch_speed_std)

    def respawn():
        tgt.yaw = wrap_yaw(aim_yaw + rng.uniform(-config.respawn_yaw_range, config.respawn_yaw_range))
        tgt.pitch = max(-60.0, min(60.0, aim_pitch + rng.gauss(0.0, config.respawn_pitch_std)))
        tgt.unseen = 0
        new_velocity()

    respawn()
    state = HumanState(human.reaction_frames, human.lead_gain)
    hist_y = deque([0.0] * CONTEXT, maxlen=CONTEXT)
    hist_p = deque([0.0] * CONTEXT, maxlen=CONTEXT)
    cooldown = 0

    n = config.episode_frames
    dyaw, dpitch, tvis, toff = [0.0] * n, [0.0] * n, [False] * n, [None] * n
    fired, hit, active = [False] * n, [False] * n, [False] * n
    nan2 = (math.nan, math.nan)

    for t in range(n):
        # world update
        if rng.random() < config.respawn_rate or tgt.unseen > config.lost_frames:
            respawn()
        elif rng.random() < config.direction_change_rate:
            new_velocity()
        tgt.yaw = wrap_yaw(tgt.yaw + tgt.vyaw)
        tgt.pitch = max(-60.0, min(60.0, tgt.pitch + tgt.vpitch))
        centre_pitch = tgt.pitch + rng.gauss(0.0, config.pitch_jitter_std)

        oy = wrap_yaw(tgt.yaw - aim_yaw)
        op = centre_pitch - aim_pitch
        visible = abs(oy) <= fov_y and abs(op) <= fov_p
        tgt.unseen = 0 if visible else tgt.unseen + 1
        offset = (oy, op) if visible else None
        state.observe(offset)

        # the human model always draws its noise so bot frames do not shift the rng stream
        h = human_step(state, human, rng)
        d = None
        if bot is not None and visible:
            d = bot.step(offset, (hist_y, hist_p))
        if d is None:
            d = (h.dyaw, h.dpitch)
        else:
            d = (_clip(d[0]), _clip(d[1]))
            active[t] = True
        state.record(d)
        hist_y.append(d[0])
        hist_p.append(d[1])

        aim_yaw = wrap_yaw(aim_yaw + d[0])
        aim_pitch = max(-90.0, min(90.0, aim_pitch + d[1]))
        post_y = wrap_yaw(tgt.yaw - aim_yaw)
        post_p = centre_pitch - aim_pitch

        # firing: the human decides from its own (post-move) percept
        percept = state.perceived_offset()
        u = rng.random()
        want = False
        if percept is not None and cooldown == 0:
            py, pp = percept[0] - d[0], percept[1] - d[1]
            want = py * py + pp * pp <= human.fire_threshold ** 2 and u < human.fire_probability
        if cooldown > 0:
            cooldown -= 1
        if want:
            fired[t] = True
            cooldown = config.fire_cooldown
            hit[t] = visible and post_y * post_y + post_p * post_p <= radius2

        dyaw[t], dpitch[t] = d
        tvis[t] = visible
        toff[t] = (post_y, post_p) if visible else nan2

    return EpisodeRecord(
        episode_id or f"{controller.value}-a{archetype_seed}-s{config.rng_seed}",
        controller, archetype_seed, dyaw, dpitch, tvis, toff, fired, hit, active,
    )


def sim_config_from_dict(d: dict) -> SimConfig:
    known = {f.name for f in fields(SimConfig)}
    kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items() if k in known}
    return SimConfig(**kw)


def human_params_from_dict(d: dict) -> HumanModelParams:
    known = {f.name for f in fields(HumanModelParams)}
    return HumanModelParams(**{k: v for k, v in d.items() if k in known})
