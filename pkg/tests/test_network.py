import numpy as np
import pytest

from rps_collusion.network import (
    DivergenceError,
    Optimizer,
    QNetwork,
    TrainBatch,
    clone_into_target,
    gradient_check,
    load_network,
    save_network,
    train_batch,
)


def loop_forward(net, x):
    """Straight-line re-implementation with explicit loops."""
    a = [float(v) for v in x]
    for layer, (w, b) in enumerate(zip(net.weights, net.biases)):
        out = []
        for j in range(w.shape[1]):
            total = float(b[j])
            for i in range(w.shape[0]):
                total += a[i] * float(w[i, j])
            if layer < net.n_layers - 1 and net.activation == "relu":
                total = max(total, 0.0)
            out.append(total)
        a = out
    return np.array(a)


def test_zero_net_outputs_zero():
    net = QNetwork([6, 4, 3], rng=0)
    net.flat[:] = 0
    assert np.array_equal(net.forward(np.arange(6.0)), np.zeros(3))


def test_identity_net_reproduces_input():
    net = QNetwork([3, 3], activation="linear", rng=0)
    net.weights[0][...] = np.eye(3)
    net.biases[0][...] = 0
    x = np.array([0.3, -1.2, 2.5])
    assert np.array_equal(net.forward(x), x)


@pytest.mark.parametrize("seed", range(5))
def test_forward_matches_loop_oracle(seed):
    rng = np.random.default_rng(seed)
    net = QNetwork([4, 5, 3], rng=seed)
    for b in net.biases:
        b[...] = rng.normal(size=b.shape)
    x = rng.normal(size=4)
    np.testing.assert_allclose(net.forward(x), loop_forward(net, x), rtol=1e-12, atol=1e-15)
    batch = rng.normal(size=(7, 4))
    np.testing.assert_allclose(net.forward(batch), np.array([loop_forward(net, r) for r in batch]),
                               rtol=1e-12, atol=1e-15)


def test_forward_rejects_wrong_width():
    net = QNetwork([4, 3], rng=0)
    with pytest.raises(ValueError):
        net.forward(np.zeros(5))


def test_init_is_bounded_fan_in_fan_out():
    net = QNetwork([100, 20, 3], rng=1)
    assert np.abs(net.weights[0]).max() <= np.sqrt(6 / 120)
    assert np.abs(net.weights[1]).max() <= np.sqrt(6 / 23)
    assert not net.biases[0].any()


def test_train_step_at_target_leaves_sgd_params_unchanged():
    net = QNetwork([4, 5, 3], rng=0)
    x = np.random.default_rng(0).normal(size=(3, 4))
    q = net.forward(x)
    before = net.flat.copy()
    mask = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=bool)
    loss = train_batch(net, Optimizer("sgd", 0.1), TrainBatch(x, q, mask))
    assert loss == 0.0
    assert np.array_equal(net.flat, before)


def test_single_weight_sgd_step_by_hand():
    # q = w*x + b, loss = (q - t)^2, dL/dw = 2(q - t)x, dL/db = 2(q - t)
    net = QNetwork([1, 1], activation="linear", rng=0)
    net.weights[0][0, 0] = 0.5
    net.biases[0][0] = 0.0
    loss = train_batch(net, Optimizer("sgd", 0.01), TrainBatch([[2.0]], [[3.0]], [[True]]))
    assert loss == pytest.approx(4.0)
    assert net.weights[0][0, 0] == pytest.approx(0.5 - 0.01 * (2 * (1.0 - 3.0) * 2.0))
    assert net.biases[0][0] == pytest.approx(0.0 - 0.01 * (2 * (1.0 - 3.0)))


def test_masked_entries_do_not_train():
    net = QNetwork([2, 3], activation="linear", rng=0)
    before = net.weights[0].copy()
    batch = TrainBatch.for_actions([[1.0, 2.0]], [1], [10.0])
    train_batch(net, Optimizer("sgd", 0.01), batch)
    changed = ~np.isclose(net.weights[0], before)
    assert changed[:, 1].all()
    assert not changed[:, [0, 2]].any()


def test_repeated_training_converges():
    net = QNetwork([4, 8, 3], rng=3)
    x = np.array([[0.5, -0.2, 1.0, 0.3]])
    batch = TrainBatch.for_actions(x, [2], [1.7])
    opt = Optimizer("adam", 0.01)
    losses = [train_batch(net, opt, batch) for _ in range(1000)]
    assert losses[-1] < 1e-6
    assert losses[-1] < losses[0]


def test_loss_non_increasing_small_lr():
    net = QNetwork([4, 6, 3], rng=5)
    x = np.array([[0.1, 0.4, -0.3, 0.8]])
    batch = TrainBatch.for_actions(x, [0], [2.0])
    opt = Optimizer("sgd", 1e-3)
    losses = [train_batch(net, opt, batch) for _ in range(100)]
    assert all(b <= a for a, b in zip(losses, losses[1:]))


def test_empty_batch_rejected():
    with pytest.raises(ValueError):
        TrainBatch(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 3), dtype=bool))


def test_non_finite_loss_signals_divergence():
    net = QNetwork([2, 3], activation="linear", rng=0)
    net.weights[0][...] = np.inf
    with pytest.raises(DivergenceError):
        train_batch(net, Optimizer("sgd", 0.1), TrainBatch.for_actions([[1.0, 1.0]], [0], [0.0]))


def test_optimizer_validation():
    with pytest.raises(ValueError):
        Optimizer("rmsprop", 0.1)
    with pytest.raises(ValueError):
        Optimizer("adam", 0.0)


def test_gradient_check_linear_net():
    rng = np.random.default_rng(11)
    net = QNetwork([2, 3], activation="linear", rng=11)
    err = gradient_check(net, rng.normal(size=(1, 2)), rng.normal(size=(1, 3)), 1e-5)
    assert err < 1e-6


def test_gradient_check_relu_hidden_layer():
    rng = np.random.default_rng(12)
    net = QNetwork([4, 6, 3], rng=12)
    for b in net.biases:
        b[...] = rng.normal(scale=0.5, size=b.shape)
    err = gradient_check(net, rng.normal(size=(3, 4)), rng.normal(size=(3, 3)), 1e-5)
    assert err < 1e-4


def test_gradient_check_all_zero():
    net = QNetwork([3, 4, 3], rng=0)
    net.flat[:] = 0
    batch = TrainBatch(np.zeros((1, 3)), np.zeros((1, 3)), np.ones((1, 3), dtype=bool))
    from rps_collusion.network import masked_loss_and_grad

    _, grad = masked_loss_and_grad(net, batch)
    assert not grad.any()
    assert gradient_check(net, np.zeros((1, 3)), np.zeros((1, 3)), 1e-5) == 0.0


def test_clone_into_target():
    rng = np.random.default_rng(0)
    online = QNetwork([5, 4, 3], rng=1)
    target = QNetwork([5, 4, 3], rng=2)
    clone_into_target(online, target)
    x = rng.normal(size=5)
    assert np.array_equal(online.forward(x), target.forward(x))
    assert online.same_parameters(target)
    clone_into_target(online, target)
    assert online.same_parameters(target)
    train_batch(online, Optimizer("adam", 0.01), TrainBatch.for_actions([x], [1], [5.0]))
    assert not online.same_parameters(target)


def test_clone_rejects_mismatched_dims():
    with pytest.raises(ValueError):
        clone_into_target(QNetwork([5, 4, 3], rng=0), QNetwork([5, 3], rng=0))


def test_copy_is_independent():
    net = QNetwork([3, 3], rng=0)
    twin = net.copy()
    net.flat += 1
    assert not twin.same_parameters(net)


def test_training_is_deterministic():
    def run():
        net = QNetwork([6, 5, 3], rng=42)
        opt = Optimizer("adam", 0.005)
        rng = np.random.default_rng(7)
        for _ in range(50):
            x = rng.normal(size=(4, 6))
            train_batch(net, opt, TrainBatch.for_actions(x, rng.integers(3, size=4), rng.normal(size=4)))
        return net.flat.copy()

    assert np.array_equal(run(), run())


def test_checkpoint_round_trip(tmp_path):
    net = QNetwork([7, 5, 9, 3], rng=3)
    net.biases[1][...] = np.linspace(-1, 1, 9)
    path = tmp_path / "net.qnet"
    save_network(net, path)
    loaded = load_network(path)
    assert loaded.layer_dims == net.layer_dims
    assert loaded.activation == net.activation
    x = np.random.default_rng(0).normal(size=(4, 7))
    assert np.array_equal(loaded.forward(x), net.forward(x))


def test_checkpoint_layout_is_documented(tmp_path):
    import json
    import struct

    net = QNetwork([2, 3], rng=0)
    path = tmp_path / "net.qnet"
    save_network(net, path)
    data = path.read_bytes()
    assert data[:8] == b"RPSQNET\x00"
    version, hlen = struct.unpack_from("<II", data, 8)
    header = json.loads(data[16:16 + hlen])
    assert version == 1
    assert header["layer_dims"] == [2, 3] and header["dtype"] == "<f8"
    params = np.frombuffer(data[16 + hlen:], dtype="<f8")
    assert np.array_equal(params[:6].reshape(2, 3), net.weights[0])
    assert np.array_equal(params[6:], net.biases[0])


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.qnet"
    path.write_bytes(b"not a network")
    with pytest.raises(ValueError):
        load_network(path)
