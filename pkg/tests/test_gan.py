from dataclasses import replace

import numpy as np
import pytest

from aimlab.acceptance import gradient_errors
from aimlab.core import CONTEXT, Controller, make_gan_windows, windows_to_arrays
from aimlab.gan import (
    GAN_ACTIVATION_RANGE, GanBot, GanConfig, build_pair, critic_loss_and_grads, dist_term, gan_step,
    load_pair, save_pair, train_gan,
)
from aimlab.sim import HumanModelParams, SimConfig, archetype_params, run_episode

SMALL = GanConfig(epochs=40, window_stride=2, learning_rate=5e-4, gen_hidden=32, disc_hidden=64,
                  scale_gain=5.0)


def human_windows(seeds, frames=2000, stride=2):
    eps = [run_episode(SimConfig(episode_frames=frames, rng_seed=s), Controller.HUMAN,
                       archetype_params(HumanModelParams(), s), None, s) for s in seeds]
    return make_gan_windows(eps, stride=stride)


@pytest.fixture(scope="module")
def trained():
    train = human_windows(range(6))
    held = human_windows([99])
    pair, log = train_gan(train, SMALL, seed=3, held_out=held)
    return pair, log, train


def test_dist_examples():
    steps = np.zeros((2, 10))
    steps[0, :5] = 0.6  # yaw sum 3
    steps[0, 5:] = 0.8  # pitch sum 4
    d, grad = dist_term(steps, np.zeros((2, 2)))
    np.testing.assert_allclose(d, [5.0, 0.0])
    np.testing.assert_allclose(grad[0], [0.6] * 5 + [0.8] * 5)
    assert np.all(grad[1] == 0.0)
    d, _ = dist_term(steps[:1], np.array([[3.0, 4.0]]))
    assert d[0] == pytest.approx(0.0, abs=1e-12)


def test_gradient_oracle():
    errs = gradient_errors(probes=100)
    assert max(errs.values()) < 1e-4, errs


def test_generator_output_dim_and_determinism():
    rng = np.random.default_rng(0)
    pair = build_pair(GanConfig(gen_hidden=8, disc_hidden=8), rng)
    out = pair.generate(np.zeros((3, 16)), np.zeros((3, 2 * CONTEXT + 2)))
    assert out.shape == (3, 10)
    again = build_pair(GanConfig(gen_hidden=8, disc_hidden=8), np.random.default_rng(0))
    np.testing.assert_array_equal(again.generate(np.ones(16), np.ones(42)), pair.generate(np.ones(16), np.ones(42)))


def test_critic_sign_convention():
    # loss is mean(real) - mean(fake): identical inputs give zero
    pair = build_pair(GanConfig(gen_hidden=8, disc_hidden=8), np.random.default_rng(1))
    x = np.random.default_rng(2).normal(size=(4, 10))
    c = np.zeros((4, 42))
    loss, _ = critic_loss_and_grads(pair, x, x, c)
    assert loss == pytest.approx(0.0, abs=1e-12)


def test_clipping_and_update_counts(trained):
    pair, log, train = trained
    for p in pair.discriminator.params():
        assert np.all(np.abs(p) <= SMALL.w_max)
    per_epoch = len(train) // SMALL.batch_size
    assert log.d_updates == SMALL.epochs * per_epoch
    assert log.g_updates == log.d_updates // SMALL.d_updates_per_g


def test_training_is_deterministic():
    w = human_windows([5], frames=600)
    cfg = replace(SMALL, epochs=2, gen_hidden=8, disc_hidden=8)
    a, la = train_gan(w, cfg, seed=1)
    b, lb = train_gan(w, cfg, seed=1)
    assert la.to_json() == lb.to_json()
    for x, y in zip(a.generator.params(), b.generator.params()):
        np.testing.assert_array_equal(x, y)


def test_too_few_windows_rejected():
    with pytest.raises(ValueError):
        train_gan(human_windows([1], frames=60), SMALL)


def test_held_out_dist_halves(trained):
    _, log, _ = trained
    first = log.epochs[0]["held_out_dist"]
    assert log.epochs[-1]["held_out_dist"] <= 0.5 * first


def test_closed_loop_approach_of_stationary_target(trained):
    pair, _, _ = trained
    z = np.random.default_rng(0).standard_normal(16)
    ctx = np.zeros((2, CONTEXT))
    off = np.array([8.0, 0.0])
    start = np.hypot(*off)
    for _ in range(35):
        d = gan_step(pair, ctx, tuple(off), z)
        if d is None:
            break
        off = off - d
        ctx = np.hstack([ctx[:, 1:], np.array(d)[:, None]])
    assert np.hypot(*off) < start


def test_gan_step_outside_box_is_inactive(trained):
    pair, _, _ = trained
    assert gan_step(pair, np.zeros((2, CONTEXT)), (GAN_ACTIVATION_RANGE + 1.0, 0.0), np.zeros(16)) is None


def test_bot_latent_fixed_per_episode(trained):
    pair, _, _ = trained
    bot = GanBot(pair)
    bot.start_episode(11)
    z = bot.z.copy()
    hist = (np.zeros(CONTEXT), np.zeros(CONTEXT))
    bot.step((3.0, 1.0), hist)
    np.testing.assert_array_equal(bot.z, z)
    bot.start_episode(11)
    np.testing.assert_array_equal(bot.z, z)
    bot.start_episode(12)
    assert not np.array_equal(bot.z, z)


def test_checkpoint_round_trip(trained, tmp_path):
    pair, _, train = trained
    save_pair(pair, tmp_path / "g1", {"note": "x"})
    back = load_pair(tmp_path / "g1")
    cond, _ = windows_to_arrays(train[:20])
    z = np.random.default_rng(4).standard_normal((20, 16))
    np.testing.assert_array_equal(back.generate(z, cond), pair.generate(z, cond))
    save_pair(back, tmp_path / "g2", {"note": "x"})
    for suffix in (".gen.ckpt", ".disc.ckpt"):
        assert (tmp_path / f"g1{suffix}").read_bytes() == (tmp_path / f"g2{suffix}").read_bytes()


def test_trained_critic_scores_heuristic_motion_higher(trained):
    from aimlab.heuristic import STRONG
    from aimlab.sim import HeuristicBot

    pair, _, _ = trained
    eps = {c: [run_episode(SimConfig(episode_frames=2000, rng_seed=500 + i), c, HumanModelParams(), bot)
               for i in range(3)]
           for c, bot in ((Controller.HUMAN, None), (Controller.STRONG, HeuristicBot(STRONG)))}
    mean = {}
    for c, e in eps.items():
        cond, steps = windows_to_arrays(make_gan_windows(e, stride=3))
        mean[c] = pair.critic(steps, cond).mean()
    assert mean[Controller.STRONG] > mean[Controller.HUMAN]
