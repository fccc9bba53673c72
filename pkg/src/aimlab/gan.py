"""Conditional Wasserstein GAN that learns human mouse motion, and its use as an aimbot.

Sign convention: the critic is trained so that a *larger* output means "generated", matching
detector scores where positive means cheater. Per batch

    critic loss     = mean D(real | cond) - mean D(fake | cond)
    generator loss  = mean D(fake | cond) + dist_weight * mean dist(fake, target)

where dist is the Euclidean distance between the per-axis sum of the generated steps and the
target point. Critic parameters are clipped to [-w_max, w_max] after every critic update.

Both networks work in scaled units: every yaw quantity is divided by the yaw delta std of the
training data and every pitch quantity by the pitch std (targets use their own std). Pitch
deltas are an order of magnitude smaller than yaw, and without this the clipped critic barely
sees them. The scales are fixed at training time and stored in the checkpoint headers;
``generate`` and ``critic`` take and return degrees.

Vector layouts (fixed, also written into checkpoint headers):
    condition  = (ctx yaw_1..c, ctx pitch_1..c, target yaw, target pitch)
    steps      = (yaw_1..g, pitch_1..g)
    generator  input = (z_1..k, condition)
    critic     input = (steps, condition)
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .core import CONTEXT, GEN_STEPS, GanWindow, windows_to_arrays
from .heuristic import in_box
from .nn import Mlp, clip_weights, load_mlp, make_optimizer, save_mlp

CONDITION_LAYOUT = "ctx_yaw[c],ctx_pitch[c],target_yaw,target_pitch"
STEPS_LAYOUT = "yaw[g],pitch[g]"
GAN_ACTIVATION_RANGE = 15.0


@dataclass(frozen=True)
class GanConfig:
    context_c: int = CONTEXT
    gen_steps_g: int = GEN_STEPS
    latent_dim_k: int = 16
    d_updates_per_g: int = 5
    w_max: float = 0.01
    learning_rate: float = 5e-5
    batch_size: int = 64
    epochs: int = 100
    optimizer: str = "rmsprop"
    dist_weight: float = 1.0
    gen_hidden: int = 64
    disc_hidden: int = 512
    window_stride: int = 1
    scale_gain: float = 5.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and not isinstance(v, bool) and v <= 0:
                raise ValueError(f"{f.name} must be positive")

    @property
    def condition_dim(self) -> int:
        return 2 * self.context_c + 2

    @property
    def steps_dim(self) -> int:
        return 2 * self.gen_steps_g

    @classmethod
    def from_dict(cls, d: dict) -> "GanConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class GanPair:
    generator: Mlp
    discriminator: Mlp
    config: GanConfig
    group: str = "Group1"

    @property
    def condition_scale(self) -> np.ndarray:
        return np.asarray(self.generator.meta["condition_scale"], dtype=np.float64)

    @property
    def steps_scale(self) -> np.ndarray:
        return np.asarray(self.generator.meta["steps_scale"], dtype=np.float64)

    def generator_input(self, z, condition) -> np.ndarray:
        return np.hstack([np.atleast_2d(z), np.atleast_2d(condition) / self.condition_scale])

    def critic_input(self, steps, condition) -> np.ndarray:
        return np.hstack([np.atleast_2d(steps) / self.steps_scale,
                          np.atleast_2d(condition) / self.condition_scale])

    def generate(self, z, condition) -> np.ndarray:
        return self.generator.forward(self.generator_input(z, condition)) * self.steps_scale

    def critic(self, steps, condition) -> np.ndarray:
        return self.discriminator.forward(self.critic_input(steps, condition))[:, 0]


def axis_scales(cond, steps, config: GanConfig) -> tuple:
    """(condition scale, steps scale) from training arrays: pooled per-axis delta std for the
    context and steps, per-column std for the target, floored at 1e-3 degrees and divided
    by ``scale_gain`` (a gain above 1 lifts clipped-critic activations out of the linear
    regime)."""
    c, g = config.context_c, config.gen_steps_g
    s_yaw = max(float(np.std(steps[:, :g])), 1e-3)
    s_pitch = max(float(np.std(steps[:, g:])), 1e-3)
    t_yaw = max(float(np.std(cond[:, -2])), 1e-3)
    t_pitch = max(float(np.std(cond[:, -1])), 1e-3)
    cs = np.concatenate([np.full(c, s_yaw), np.full(c, s_pitch), [t_yaw, t_pitch]])
    ss = np.concatenate([np.full(g, s_yaw), np.full(g, s_pitch)])
    return cs / config.scale_gain, ss / config.scale_gain


def build_pair(config: GanConfig, rng: np.random.Generator, group: str = "Group1",
               condition_scale=None, steps_scale=None) -> GanPair:
    if condition_scale is None:
        condition_scale = np.ones(config.condition_dim)
    if steps_scale is None:
        steps_scale = np.ones(config.steps_dim)
    meta = {"condition_layout": CONDITION_LAYOUT, "steps_layout": STEPS_LAYOUT,
            "context_c": config.context_c, "gen_steps_g": config.gen_steps_g,
            "condition_scale": [float(v) for v in condition_scale],
            "steps_scale": [float(v) for v in steps_scale]}
    gen = Mlp.build(
        [config.latent_dim_k + config.condition_dim, config.gen_hidden, config.gen_hidden, config.steps_dim],
        ["elu", "elu", "linear"], rng, meta={**meta, "role": "generator"})
    disc = Mlp.build(
        [config.steps_dim + config.condition_dim, config.disc_hidden, config.disc_hidden, 1],
        ["elu", "elu", "linear"], rng, meta={**meta, "role": "discriminator"})
    clip_weights(disc, config.w_max)
    return GanPair(gen, disc, config, group)


def dist_term(steps, target, g: int = GEN_STEPS):
    """Per-sample distance between summed steps and target, and its gradient w.r.t. steps."""
    steps = np.atleast_2d(steps)
    target = np.atleast_2d(target)
    ey = steps[:, :g].sum(axis=1) - target[:, 0]
    ep = steps[:, g:2 * g].sum(axis=1) - target[:, 1]
    d = np.sqrt(ey * ey + ep * ep)
    safe = np.where(d > 0, d, 1.0)
    grad = np.empty_like(steps)
    grad[:, :g] = np.where(d > 0, ey / safe, 0.0)[:, None]
    grad[:, g:2 * g] = np.where(d > 0, ep / safe, 0.0)[:, None]
    return d, grad


def critic_loss_and_grads(pair: GanPair, real_steps, fake_steps, cond):
    """Critic loss (mean real - mean fake) and its parameter gradients."""
    n = len(cond)
    x = np.vstack([pair.critic_input(real_steps, cond), pair.critic_input(fake_steps, cond)])
    out, cache = pair.discriminator.forward(x, cache=True)
    loss = float(out[:n, 0].mean() - out[n:, 0].mean())
    g = np.empty((2 * n, 1))
    g[:n] = 1.0 / n
    g[n:] = -1.0 / n
    grads, _ = pair.discriminator.backward(cache, g)
    return loss, grads


def generator_loss_and_grads(pair: GanPair, z, cond, target, dist_weight: float = 1.0):
    """Generator loss (mean critic score of fakes + weighted mean dist) and its gradients.

    Returns (loss, grads, mean critic term, mean dist term).
    """
    n = len(cond)
    steps_dim = pair.config.steps_dim
    ss = pair.steps_scale
    scaled, gcache = pair.generator.forward(pair.generator_input(z, cond), cache=True)
    cond_in = np.atleast_2d(cond) / pair.condition_scale
    dout, dcache = pair.discriminator.forward(np.hstack([scaled, cond_in]), cache=True)
    _, dx = pair.discriminator.backward(dcache, np.full((n, 1), 1.0 / n))
    d, dgrad = dist_term(scaled * ss, target, pair.config.gen_steps_g)
    adv = float(dout[:, 0].mean())
    dist = float(d.mean())
    grad_scaled = dx[:, :steps_dim] + dist_weight * dgrad * ss / n
    grads, _ = pair.generator.backward(gcache, grad_scaled)
    return adv + dist_weight * dist, grads, adv, dist


@dataclass
class TrainingLog:
    epochs: list = field(default_factory=list)
    d_updates: int = 0
    g_updates: int = 0
    condition_range: tuple = (0.0, 0.0)
    steps_range: tuple = (0.0, 0.0)

    def to_json(self) -> dict:
        return {"epochs": self.epochs, "d_updates": self.d_updates, "g_updates": self.g_updates,
                "condition_range": list(self.condition_range), "steps_range": list(self.steps_range)}


def mean_dist(pair: GanPair, windows, rng: np.random.Generator) -> float:
    """Mean dist term of generated steps over ``windows`` with fresh latent draws."""
    cond, _ = windows_to_arrays(windows)
    z = rng.standard_normal((len(cond), pair.config.latent_dim_k))
    fake = pair.generate(z, cond)
    d, _ = dist_term(fake, cond[:, -2:], pair.config.gen_steps_g)
    return float(d.mean())


def train_gan(windows, config: GanConfig = GanConfig(), seed: int = 0, group: str = "Group1",
              held_out=None, progress=None) -> tuple:
    """Alternate ``d_updates_per_g`` critic updates with one generator update.

    One epoch is ``len(windows) // batch_size`` critic updates over a fresh shuffle. Returns
    (GanPair, TrainingLog). Raises FloatingPointError on a non-finite loss.
    """
    if isinstance(windows, tuple):
        cond, real = windows
    else:
        cond, real = windows_to_arrays(windows)
    if len(cond) < config.batch_size:
        raise ValueError(f"need at least {config.batch_size} windows, got {len(cond)}")
    rng = np.random.default_rng(seed)
    pair = build_pair(config, rng, group, *axis_scales(cond, real, config))
    held = windows_to_arrays(held_out) if held_out else None
    k, bs = config.latent_dim_k, config.batch_size
    opt_d = make_optimizer(config.optimizer, config.learning_rate)
    opt_g = make_optimizer(config.optimizer, config.learning_rate)
    log = TrainingLog(condition_range=(float(cond.min()), float(cond.max())),
                      steps_range=(float(real.min()), float(real.max())))
    per_epoch = len(cond) // bs
    d_count = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(cond))
        d_losses, g_losses, dists = [], [], []
        for b in range(per_epoch):
            idx = order[b * bs:(b + 1) * bs]
            c = cond[idx]
            z = rng.standard_normal((bs, k))
            fake = pair.generate(z, c)
            loss_d, grads = critic_loss_and_grads(pair, real[idx], fake, c)
            if not np.isfinite(loss_d):
                raise FloatingPointError(f"non-finite critic loss (seed={seed}, epoch={epoch}, batch={b})")
            opt_d.step(pair.discriminator.params(), grads)
            clip_weights(pair.discriminator, config.w_max)
            d_losses.append(loss_d)
            d_count += 1
            log.d_updates += 1
            if d_count % config.d_updates_per_g == 0:
                gidx = rng.integers(0, len(cond), size=bs)
                cg = cond[gidx]
                zg = rng.standard_normal((bs, k))
                loss_g, ggrads, _, dist = generator_loss_and_grads(
                    pair, zg, cg, cg[:, -2:], config.dist_weight)
                if not np.isfinite(loss_g):
                    raise FloatingPointError(
                        f"non-finite generator loss (seed={seed}, epoch={epoch}, batch={b})")
                opt_g.step(pair.generator.params(), ggrads)
                log.g_updates += 1
                g_losses.append(loss_g)
                dists.append(dist)
        entry = {
            "epoch": epoch,
            "loss_d": float(np.mean(d_losses)),
            "loss_g": float(np.mean(g_losses)) if g_losses else None,
            "dist": float(np.mean(dists)) if dists else None,
        }
        if held is not None:
            z = rng.standard_normal((len(held[0]), k))
            d, _ = dist_term(pair.generate(z, held[0]), held[0][:, -2:], config.gen_steps_g)
            entry["held_out_dist"] = float(d.mean())
        log.epochs.append(entry)
        if progress:
            progress(entry)
    return pair, log


class GanBot:
    """Runs a trained generator as an aimbot: plan g steps each frame, execute the first.

    The latent vector is drawn once per episode and held fixed.
    """

    def __init__(self, pair: GanPair, activation_range: float = GAN_ACTIVATION_RANGE):
        self.pair = pair
        self.activation_range = activation_range
        self.z = None
        cfg = pair.config
        self._g = cfg.gen_steps_g
        self._c = cfg.context_c

    def start_episode(self, seed: int) -> None:
        self.z = np.random.default_rng(np.random.SeedSequence([seed, 0x6A4])).standard_normal(
            self.pair.config.latent_dim_k)

    def plan(self, context_yaw, context_pitch, offset) -> np.ndarray:
        cond = np.concatenate([context_yaw, context_pitch, offset])
        return self.pair.generate(self.z, cond)[0]

    def step(self, offset, history):
        if not in_box(offset, self.activation_range):
            return None
        hy, hp = history
        out = self.plan(np.fromiter(hy, float, self._c), np.fromiter(hp, float, self._c), offset)
        return float(out[0]), float(out[self._g])


def gan_step(pair: GanPair, context, target_offset, z):
    """Single-frame aimbot decision: (dyaw, dpitch) or None when the target is outside the box.

    ``context`` is (2, c) executed deltas (yaw row, pitch row), zero-padded at episode start.
    """
    if not in_box(target_offset, GAN_ACTIVATION_RANGE):
        return None
    context = np.asarray(context, dtype=np.float64)
    cond = np.concatenate([context[0], context[1], np.asarray(target_offset, dtype=np.float64)])
    out = pair.generate(np.asarray(z, dtype=np.float64), cond)[0]
    g = pair.config.gen_steps_g
    return float(out[0]), float(out[g])


def save_pair(pair: GanPair, stem, manifest: dict | None = None) -> dict:
    """Write ``<stem>.gen.ckpt``, ``<stem>.disc.ckpt`` and the ``<stem>.json`` sidecar."""
    stem = Path(stem)
    save_mlp(pair.generator, stem.with_suffix(".gen.ckpt"))
    save_mlp(pair.discriminator, stem.with_suffix(".disc.ckpt"))
    sidecar = {"config": asdict(pair.config), "group": pair.group,
               "condition_layout": CONDITION_LAYOUT, "steps_layout": STEPS_LAYOUT,
               "manifest": manifest or {}}
    stem.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return sidecar


def load_pair(stem) -> GanPair:
    stem = Path(stem)
    sidecar = json.loads(stem.with_suffix(".json").read_text())
    if sidecar.get("condition_layout") != CONDITION_LAYOUT:
        raise ValueError(f"{stem}: condition layout mismatch")
    gen = load_mlp(stem.with_suffix(".gen.ckpt"))
    disc = load_mlp(stem.with_suffix(".disc.ckpt"))
    if gen.meta.get("condition_layout") != CONDITION_LAYOUT:
        raise ValueError(f"{stem}: generator checkpoint has a different condition layout")
    return GanPair(gen, disc, GanConfig.from_dict(sidecar["config"]), sidecar["group"])
