import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aimlab.nn import (
    Adam, Layer, Mlp, RMSprop, clip_weights, elu, elu_grad, gradient_check, inverse_prior_weights,
    load_mlp, make_optimizer, numerical_gradient, save_mlp, weighted_cross_entropy,
)


def small_net(rng, acts=("elu", "elu", "linear")):
    return Mlp.build([5, 7, 6, 3], list(acts), rng)


def test_elu_values_and_grad():
    x = np.array([-2.0, -1e-3, 0.0, 3.0])
    np.testing.assert_allclose(elu(x), [np.expm1(-2.0), np.expm1(-1e-3), 0.0, 3.0])
    np.testing.assert_allclose(elu_grad(x), [np.exp(-2.0), np.exp(-1e-3), 1.0, 1.0])


def test_elu_large_negative_does_not_overflow():
    with np.errstate(all="raise"):
        assert elu(np.array([-1e4]))[0] == -1.0


def test_forward_shapes_and_1d_input():
    net = small_net(np.random.default_rng(0))
    assert net.forward(np.zeros((4, 5))).shape == (4, 3)
    assert net.forward(np.zeros(5)).shape == (1, 3)
    with pytest.raises(ValueError):
        net.forward(np.zeros((2, 4)))


@pytest.mark.parametrize("acts", [("elu", "elu", "linear"), ("relu", "relu", "linear")])
def test_gradients_match_finite_differences(acts):
    rng = np.random.default_rng(1)
    net = small_net(rng, acts)
    x = rng.normal(size=(8, 5))
    y = rng.integers(0, 3, 8)

    def loss_and_grad(model):
        out, cache = model.forward(x, cache=True)
        loss = 0.5 * float(np.sum((out - np.eye(3)[y]) ** 2))
        grads, _ = model.backward(cache, out - np.eye(3)[y])
        return loss, grads

    assert gradient_check(net, loss_and_grad, 150, rng) < 1e-6


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    net = small_net(rng)
    x = rng.normal(size=(3, 5))
    out, cache = net.forward(x, cache=True)
    _, dx = net.backward(cache, np.ones_like(out))
    i, j = 1, 3
    num = numerical_gradient(lambda: float(net.forward(x).sum()), x, (i, j))
    assert abs(num - dx[i, j]) < 1e-7


def test_weighted_cross_entropy_matches_definition():
    logits = np.array([[2.0, 0.0], [0.5, 1.5], [0.0, 0.0]])
    labels = np.array([0, 1, 1])
    w = np.array([0.25, 0.75])
    loss, grad = weighted_cross_entropy(logits, labels, w)
    p = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
    expected = -np.mean(w[labels] * np.log(p[np.arange(3), labels]))
    assert loss == pytest.approx(expected)
    h = 1e-6
    bumped = logits.copy()
    bumped[1, 0] += h
    assert grad[1, 0] == pytest.approx((weighted_cross_entropy(bumped, labels, w)[0] - loss) / h, abs=1e-5)


def test_inverse_prior_weights_favor_rare_class():
    w = inverse_prior_weights(np.array([0, 0, 0, 1]))
    np.testing.assert_allclose(w, [0.25, 0.75])


def test_clip_examples_from_table():
    layer = Layer(np.array([[0.5, -0.005]]), np.array([-0.3, 0.0]), "linear")
    net = clip_weights(Mlp([layer]), 0.01)
    np.testing.assert_array_equal(net.layers[0].weight, [[0.01, -0.005]])
    np.testing.assert_array_equal(net.layers[0].bias, [-0.01, 0.0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(1e-4, 1.0))
def test_clip_is_idempotent(seed, w_max):
    net = small_net(np.random.default_rng(seed))
    for p in net.params():
        p *= 10.0
    once = [p.copy() for p in clip_weights(net, w_max).params()]
    twice = clip_weights(net, w_max).params()
    for a, b in zip(once, twice):
        np.testing.assert_array_equal(a, b)
        assert np.all(np.abs(b) <= w_max)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_forward_is_permutation_equivariant(seed):
    rng = np.random.default_rng(seed)
    net = small_net(rng)
    x = rng.normal(size=(9, 5))
    perm = rng.permutation(9)
    np.testing.assert_allclose(net.forward(x)[perm], net.forward(x[perm]), rtol=1e-12, atol=1e-12)


def test_adam_first_step_is_lr_times_sign():
    p = [np.array([1.0, -2.0])]
    Adam(lr=0.1).step(p, [np.array([3.0, -0.5])])
    np.testing.assert_allclose(p[0], [0.9, -1.9], atol=1e-6)


def test_rmsprop_step_matches_rule():
    opt = RMSprop(lr=0.01, decay=0.9, eps=1e-8)
    p = [np.array([1.0])]
    opt.step(p, [np.array([2.0])])
    ms = 0.1 * 4.0
    assert p[0][0] == pytest.approx(1.0 - 0.01 * 2.0 / (np.sqrt(ms) + 1e-8))


def test_make_optimizer_rejects_unknown():
    assert make_optimizer("adam", 1e-3).lr == 1e-3
    with pytest.raises(ValueError):
        make_optimizer("sgd", 1e-3)


def test_checkpoint_round_trip_is_exact(tmp_path):
    net = small_net(np.random.default_rng(3))
    net.meta["role"] = "test"
    save_mlp(net, tmp_path / "m.ckpt")
    back = load_mlp(tmp_path / "m.ckpt")
    assert back.meta == net.meta
    for a, b in zip(net.params(), back.params()):
        np.testing.assert_array_equal(a, b)
    save_mlp(back, tmp_path / "n.ckpt")
    assert (tmp_path / "m.ckpt").read_bytes() == (tmp_path / "n.ckpt").read_bytes()


def test_checkpoint_rejects_garbage(tmp_path):
    (tmp_path / "bad.ckpt").write_bytes(b"nope")
    with pytest.raises(ValueError):
        load_mlp(tmp_path / "bad.ckpt")
    net = small_net(np.random.default_rng(4))
    save_mlp(net, tmp_path / "m.ckpt")
    (tmp_path / "t.ckpt").write_bytes((tmp_path / "m.ckpt").read_bytes() + b"\0")
    with pytest.raises(ValueError):
        load_mlp(tmp_path / "t.ckpt")
