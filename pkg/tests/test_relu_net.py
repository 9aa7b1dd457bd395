import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from composed_lab.errors import InvalidParameter
from composed_lab.relu_net import (
    ReluNet2,
    TrainConfig,
    backprop,
    compile_spline,
    complexity,
    concatenate,
    constant_net,
    init_net,
    net_to_spline,
    train,
)
from composed_lab.spline import LinearSpline, StaircaseSpec, base_construction, spline_norm
from composed_lab.valid_set import ValidSet


def unit_net():
    return ReluNet2(np.array([[1.0]]), np.array([0.0]), np.array([[1.0]]), np.array([0.0]))


def fd_grad(net, X, Y, h=1e-5):
    theta = net.flatten()
    out = np.zeros_like(theta)
    for j in range(len(theta)):
        up, dn = theta.copy(), theta.copy()
        up[j] += h
        dn[j] -= h
        out[j] = (backprop(net.unflatten(up), X, Y)[0] - backprop(net.unflatten(dn), X, Y)[0]) / (2 * h)
    return out


def test_eval_examples():
    net = unit_net()
    assert net(np.array([[2.0], [-1.0]]))[:, 0].tolist() == [2.0, 0.0]
    c = constant_net(3.5)
    assert np.all(c(np.linspace(-9, 9, 7)[:, None]) == 3.5)


def test_complexity_examples():
    assert complexity(unit_net()) == 1.0
    assert complexity(constant_net(2.0)) == 0.0


def test_compile_constant_spline_has_no_units():
    net = compile_spline(LinearSpline([0.0, 1.0], [2.0, 2.0]), (0.0, 1.0))
    assert net.h == 0 and complexity(net) == 0.0


def test_compile_abs_on_symmetric_domain():
    f = LinearSpline([0.0], [0.0], -1.0, 1.0)
    net = compile_spline(f, (-1.0, 1.0))
    x = np.linspace(-1, 1, 1001)
    assert np.allclose(net(x[:, None])[:, 0], np.abs(x), atol=1e-12)
    # one unit carries the slope -1 at the left end, one the change of +2 at 0
    assert complexity(net) == pytest.approx(2.0 + 1.0)


def test_compile_matches_spline_on_grid():
    rng = np.random.default_rng(3)
    xs = np.sort(rng.uniform(-3, 3, 9))
    f = LinearSpline(xs, rng.normal(size=9), 0.7, -0.4)
    net = compile_spline(f, (-4.0, 4.0))
    x = np.linspace(-4, 4, 1000)
    assert np.max(np.abs(net(x[:, None])[:, 0] - f(x))) <= 1e-9
    changes = np.abs(np.diff(f.slopes)).sum()
    assert complexity(net) == pytest.approx(changes + abs(f.left_slope))
    assert complexity(net) >= spline_norm(f) - 1e-12


def test_compiled_identity_line_cost_independent_of_n():
    V = ValidSet.integers(0, 40)
    costs = []
    for n in (5, 20, 40):
        spec = StaircaseSpec.rounding_staircase(n, 0.5)
        f = base_construction(spec, V)
        costs.append(complexity(compile_spline(f, spec.domain)))
    assert np.ptp(costs) < 1e-6 and costs[0] == pytest.approx(1.0, abs=1e-6)


def test_net_to_spline_roundtrip():
    net = init_net(1, 6, 1, seed=5)
    f = net_to_spline(net)
    x = np.linspace(-10, 10, 2001)
    assert np.allclose(f(x), net(x[:, None])[:, 0], atol=1e-10)


def test_concatenate_matches_coordinates():
    a, b = init_net(1, 3, 1, seed=1), init_net(1, 4, 1, seed=2)
    both = concatenate([a, b])
    x = np.linspace(-2, 2, 50)[:, None]
    assert np.allclose(both(x), np.hstack([a(x), b(x)]))
    assert complexity(both) == pytest.approx(complexity(a) + complexity(b))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 6), st.integers(1, 2))
def test_backprop_matches_finite_differences(seed, d, h, k):
    rng = np.random.default_rng(seed)
    net = init_net(d, h, k, seed)
    X = rng.normal(size=(7, d))
    Y = rng.normal(size=(7, k))
    _, g = backprop(net, X, Y)
    fd = fd_grad(net, X, Y)
    assert np.max(np.abs(g.flatten() - fd)) <= 1e-4 * max(np.max(np.abs(fd)), 1e-8)


def test_zero_residual_gives_zero_gradient():
    net = init_net(2, 5, 1, seed=0)
    X = np.random.default_rng(0).normal(size=(10, 2))
    _, g = backprop(net, X, net(X))
    assert np.all(g.flatten() == 0.0)


def test_all_active_reduces_to_linear_regression():
    # every unit active: f(x) = W2 (W1 x + b1) + b2, so dL/db2 = 2 mean(residual)
    net = ReluNet2(np.array([[1.0], [2.0]]), np.array([10.0, 10.0]), np.array([[0.5, -0.25]]), np.array([1.0]))
    X = np.linspace(-1, 1, 9)[:, None]
    Y = 3 * X[:, 0]
    r = net(X)[:, 0] - Y
    _, g = backprop(net, X, Y)
    assert g.b2[0] == pytest.approx(2 * r.mean())
    hidden = X @ net.W1.T + net.b1
    assert np.allclose(g.W2[0], 2 * (r[:, None] * hidden).mean(axis=0))


def test_train_fits_linear_function():
    x = np.linspace(-1, 1, 50)[:, None]
    y = 2 * x
    res = train(init_net(1, 16, 1, 0), x, y, TrainConfig(lr=0.05, epochs=3000, momentum=0.9))
    assert backprop(res.net, x, y)[0] <= 1e-4


def test_train_zero_epochs_and_determinism():
    net = init_net(1, 4, 1, 0)
    x = np.linspace(-1, 1, 20)[:, None]
    res = train(net, x, x**2, TrainConfig(epochs=0))
    assert np.array_equal(res.net.flatten(), net.flatten())
    cfg = TrainConfig(lr=0.01, epochs=50, batch_size=5, seed=3, optimizer="adam")
    a = train(net, x, x**2, cfg)
    b = train(net, x, x**2, cfg)
    assert a.losses == b.losses
    assert np.array_equal(net.flatten(), init_net(1, 4, 1, 0).flatten())


def test_train_rejects_bad_config():
    with pytest.raises(InvalidParameter):
        TrainConfig(optimizer="rmsprop")
    with pytest.raises(InvalidParameter):
        train(init_net(1, 2, 1, 0), np.zeros((3, 1)), np.zeros(3), TrainConfig(lr=0.0))


def test_weight_decay_shrinks_complexity():
    x = np.linspace(-1, 1, 30)[:, None]
    y = np.sign(x)
    cfg = dict(lr=0.01, epochs=800, optimizer="adam", seed=0)
    plain = train(init_net(1, 16, 1, 0), x, y, TrainConfig(**cfg)).net
    decayed = train(init_net(1, 16, 1, 0), x, y, TrainConfig(weight_decay=0.05, **cfg)).net
    assert complexity(decayed) < complexity(plain)
