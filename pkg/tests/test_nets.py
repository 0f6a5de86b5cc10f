"""Network core: forward oracle, analytic gradients, Adam arithmetic."""

import numpy as np
import pytest

from maskrl.nets import Adam, Mlp, softmax


def reference_forward(net, x):
    """Straight-line recompute of the affine/rectifier chain."""
    h = np.asarray(x, dtype=float)
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if i < len(net.weights) - 1:
            h = np.where(h > 0, h, 0.0)
    if net.head == "softmax":
        e = np.exp(h - h.max())
        h = e / e.sum()
    return h


def test_zero_weights_linear_head_outputs_zero():
    net = Mlp((4, 6, 3), head="linear")
    for w in net.weights:
        w[...] = 0.0
    assert np.allclose(net.forward(np.ones(4)), 0.0)


def test_zero_weights_softmax_head_is_uniform():
    net = Mlp((4, 6, 3), head="softmax")
    for w in net.weights:
        w[...] = 0.0
    assert np.allclose(net.forward(np.ones(4)), 1.0 / 3.0)


def test_forward_matches_reference_recompute():
    rng = np.random.default_rng(0)
    for head in ("linear", "softmax"):
        net = Mlp((7, 5, 4), head=head, rng=rng)
        for _ in range(10):
            x = rng.normal(size=7)
            assert np.allclose(net.forward(x), reference_forward(net, x))


def test_softmax_head_is_a_simplex():
    rng = np.random.default_rng(1)
    net = Mlp((6, 8, 4), head="softmax", rng=rng)
    out = net.forward(rng.normal(size=(32, 6)) * 50)
    assert np.all(out >= 0)
    assert np.allclose(out.sum(axis=1), 1.0, atol=1e-12)


def test_backward_zero_upstream_gives_zero_gradients():
    rng = np.random.default_rng(2)
    net = Mlp((5, 4, 2), rng=rng)
    net.forward(rng.normal(size=5))
    gw, gb = net.backward(np.zeros(2))
    assert all(np.all(g == 0) for g in gw + gb)


def test_single_layer_gradient_is_outer_product():
    rng = np.random.default_rng(3)
    net = Mlp((4, 3), head="linear", rng=rng)
    x = rng.normal(size=4)
    u = rng.normal(size=3)
    net.forward(x)
    gw, gb = net.backward(u)
    assert np.allclose(gw[0], np.outer(x, u))
    assert np.allclose(gb[0], u)


def central_difference_check(net, x, upstream_fn, loss_fn, h=1e-5):
    loss_fn()  # ensure forward cache
    gw, gb = net.backward(upstream_fn())
    worst = 0.0
    rng = np.random.default_rng(0)
    for li, w in enumerate(net.weights):
        for _ in range(4):
            i = int(rng.integers(w.shape[0]))
            j = int(rng.integers(w.shape[1]))
            orig = w[i, j]
            w[i, j] = orig + h
            up = loss_fn()
            w[i, j] = orig - h
            down = loss_fn()
            w[i, j] = orig
            fd = (up - down) / (2 * h)
            rel = abs(fd - gw[li][i, j]) / max(abs(fd), 1e-8)
            worst = max(worst, rel)
    return worst


def test_gradients_match_central_differences():
    rng = np.random.default_rng(4)
    for trial in range(20):
        head = "linear" if trial % 2 == 0 else "softmax"
        net = Mlp((6, 5, 3), head=head, rng=rng)
        x = rng.normal(size=(3, 6))
        if head == "linear":
            u = rng.normal(size=(3, 3))
            loss = lambda: float(np.sum(net.forward(x) * u))
            upstream = lambda: u
        else:
            target = rng.integers(0, 3, size=3)
            def loss():
                p = net.forward(x)
                return float(-np.sum(np.log(p[np.arange(3), target])))
            def upstream():
                p = net.forward(x)
                g = p.copy()
                g[np.arange(3), target] -= 1.0
                return g
        assert central_difference_check(net, x, upstream, loss) <= 1e-4


def test_backward_requires_cached_forward():
    net = Mlp((3, 2))
    with pytest.raises(RuntimeError):
        net.backward(np.zeros(2))


def test_adam_single_step_hand_computed():
    net = Mlp((1, 1), head="linear")
    net.weights[0][...] = 0.0
    net.biases[0][...] = 0.0
    opt = Adam(net, lr=0.001)
    g = np.array([[2.0]])
    opt.step(net, [g], [np.array([0.0])])
    # bias-corrected first step moves by lr * g / (|g| + eps)
    expected = -0.001 * 2.0 / (2.0 + 1e-8)
    assert net.weights[0][0, 0] == pytest.approx(expected, rel=1e-6)


def test_adam_zero_gradient_no_change():
    rng = np.random.default_rng(5)
    net = Mlp((3, 2), rng=rng)
    opt = Adam(net)
    before = [w.copy() for w in net.weights]
    opt.step(net, [np.zeros_like(w) for w in net.weights],
             [np.zeros_like(b) for b in net.biases])
    assert all(np.array_equal(a, b) for a, b in zip(before, net.weights))


def test_adam_deterministic():
    rng = np.random.default_rng(6)
    grads_w = [np.full((3, 2), 0.5)]
    grads_b = [np.full(2, -0.25)]
    results = []
    for _ in range(2):
        net = Mlp((3, 2), rng=np.random.default_rng(7))
        opt = Adam(net, lr=0.01)
        opt.step(net, grads_w, grads_b)
        opt.step(net, grads_w, grads_b)
        results.append(net.weights[0].copy())
    assert np.array_equal(results[0], results[1])
    _ = rng


def test_adam_rejects_non_finite_gradients():
    net = Mlp((2, 2))
    opt = Adam(net)
    before = net.weights[0].copy()
    ok = opt.step(net, [np.array([[np.nan, 0.0], [0.0, 0.0]])],
                  [np.zeros(2)])
    assert not ok
    assert np.array_equal(net.weights[0], before)


def test_mlp_snapshot_roundtrip(tmp_path):
    rng = np.random.default_rng(8)
    net = Mlp((5, 4, 3), head="softmax", rng=rng)
    path = tmp_path / "net.bin"
    net.save(path)
    loaded = Mlp.load(path)
    assert loaded.dims == net.dims
    assert loaded.head == net.head
    x = rng.normal(size=5)
    assert np.allclose(net.forward(x), loaded.forward(x))
    with pytest.raises(ValueError):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"nope")
        Mlp.load(bad)


def test_softmax_utility_stable():
    z = np.array([1e4, 1e4 + 1.0])
    p = softmax(z)
    assert np.isfinite(p).all()
    assert p.sum() == pytest.approx(1.0)
