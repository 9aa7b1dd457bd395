"""Two-layer ReLU networks with hand-written backprop and a plain GD trainer."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidInput, InvalidParameter
from .spline import LinearSpline


@dataclass
class ReluNet2:
    """f(x)_j = sum_l W2[j, l] * relu(W1[l] . x + b1[l]) + b2[j].

    W1 is (h, d), b1 is (h,), W2 is (k, h), b2 is (k,). h = 0 is allowed and
    gives the constant b2.
    """

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        self.W1 = np.asarray(self.W1, dtype=float)
        self.b1 = np.asarray(self.b1, dtype=float).ravel()
        self.W2 = np.asarray(self.W2, dtype=float)
        self.b2 = np.asarray(self.b2, dtype=float).ravel()
        h = len(self.b1)
        if self.W1.ndim == 1:
            self.W1 = self.W1.reshape(h, -1) if h else self.W1.reshape(0, 1)
        if self.W2.ndim == 1:
            self.W2 = self.W2.reshape(-1, h) if h else np.zeros((len(self.b2), 0))
        if self.W1.shape[0] != h or self.W2.shape != (len(self.b2), h):
            raise InvalidInput(
                f"inconsistent shapes W1{self.W1.shape} b1{self.b1.shape} W2{self.W2.shape} b2{self.b2.shape}"
            )
        if not all(np.all(np.isfinite(p)) for p in self.params()):
            raise InvalidInput("network parameters must be finite")

    @property
    def h(self) -> int:
        return len(self.b1)

    @property
    def d(self) -> int:
        return self.W1.shape[1]

    @property
    def k(self) -> int:
        return len(self.b2)

    def params(self) -> tuple[np.ndarray, ...]:
        return self.W1, self.b1, self.W2, self.b2

    def copy(self) -> "ReluNet2":
        return ReluNet2(*(p.copy() for p in self.params()))

    def _inputs(self, x) -> np.ndarray:
        X = np.asarray(x, dtype=float)
        if X.ndim == 0:
            X = X.reshape(1, 1)
        elif X.ndim == 1:
            X = X[:, None] if self.d == 1 else X[None, :]
        if X.shape[1] != self.d:
            raise InvalidInput(f"expected inputs with {self.d} features, got {X.shape[1]}")
        return X

    def forward(self, x) -> tuple[np.ndarray, tuple]:
        X = self._inputs(x)
        Z = X @ self.W1.T + self.b1
        A = np.maximum(Z, 0.0)
        return A @ self.W2.T + self.b2, (X, Z, A)

    def __call__(self, x) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: tuple, dout: np.ndarray) -> tuple["ReluNet2", np.ndarray]:
        """Gradient of sum(dout * f(X)) w.r.t. the parameters and the inputs."""
        X, Z, A = cache
        dW2 = dout.T @ A
        db2 = dout.sum(axis=0)
        dZ = (dout @ self.W2) * (Z > 0)  # subgradient 0 at the kink
        dW1 = dZ.T @ X
        db1 = dZ.sum(axis=0)
        dX = dZ @ self.W1
        return ReluNet2(dW1, db1, dW2, db2), dX

    def flatten(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def unflatten(self, theta) -> "ReluNet2":
        theta = np.asarray(theta, dtype=float)
        out, i = [], 0
        for p in self.params():
            out.append(theta[i : i + p.size].reshape(p.shape))
            i += p.size
        return ReluNet2(*out)

    def to_dict(self) -> dict:
        return {
            name: {"shape": list(p.shape), "data": p.ravel().tolist()}
            for name, p in zip(("W1", "b1", "W2", "b2"), self.params())
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReluNet2":
        arrs = [np.array(d[n]["data"], dtype=float).reshape(d[n]["shape"]) for n in ("W1", "b1", "W2", "b2")]
        return cls(*arrs)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def digest(self) -> str:
        h = hashlib.sha256()
        for p in self.params():
            h.update(np.ascontiguousarray(p, dtype=np.float64).tobytes())
            h.update(str(p.shape).encode())
        return h.hexdigest()

    def with_affine(self, in_shift, in_scale, out_shift, out_scale) -> "ReluNet2":
        """Net computing out_shift + out_scale * f((x - in_shift) / in_scale), exactly."""
        in_shift = np.broadcast_to(np.asarray(in_shift, float), (self.d,))
        in_scale = np.broadcast_to(np.asarray(in_scale, float), (self.d,))
        out_shift = np.broadcast_to(np.asarray(out_shift, float), (self.k,))
        out_scale = np.broadcast_to(np.asarray(out_scale, float), (self.k,))
        W1 = self.W1 / in_scale
        b1 = self.b1 - W1 @ in_shift
        W2 = self.W2 * out_scale[:, None]
        b2 = self.b2 * out_scale + out_shift
        return ReluNet2(W1, b1, W2, b2)


def evaluate(net: ReluNet2, x) -> np.ndarray:
    return net(x)


def complexity(net: ReluNet2) -> float:
    """Half the squared norm of all weights; biases are not counted."""
    return 0.5 * float(np.sum(net.W1**2) + np.sum(net.W2**2))


def constant_net(c, d: int = 1) -> ReluNet2:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return ReluNet2(np.zeros((0, d)), np.zeros(0), np.zeros((len(c), 0)), c)


def init_net(d: int, h: int, k: int, seed: int) -> ReluNet2:
    """Uniform(-1/sqrt(h), 1/sqrt(h)) weights and biases."""
    rng = np.random.default_rng(seed)
    a = 1.0 / np.sqrt(max(h, 1))
    return ReluNet2(
        rng.uniform(-a, a, (h, d)),
        rng.uniform(-a, a, h),
        rng.uniform(-a, a, (k, h)),
        rng.uniform(-a, a, k),
    )


def concatenate(nets: list[ReluNet2]) -> ReluNet2:
    """Stack single-output nets over a shared first layer; output j uses only net j's units."""
    if any(n.k != 1 for n in nets):
        raise InvalidInput("concatenate expects single-output nets")
    if len({n.d for n in nets}) != 1:
        raise InvalidInput("all nets must share the input dimension")
    h = sum(n.h for n in nets)
    W2 = np.zeros((len(nets), h))
    start = 0
    for j, n in enumerate(nets):
        W2[j, start : start + n.h] = n.W2[0]
        start += n.h
    return ReluNet2(
        np.vstack([n.W1 for n in nets]),
        np.concatenate([n.b1 for n in nets]),
        W2,
        np.concatenate([n.b2 for n in nets]),
    )


def compile_spline(f: LinearSpline, domain: tuple[float, float], tol: float = 1e-12) -> ReluNet2:
    """ReLU net equal to f on [a, b].

    One balanced unit (|w1| = |w2| = sqrt|change|) per slope change inside the
    domain, and one unit relu(x - a) that is active on all of [a, b] and
    carries the slope at a. Complexity is sum |slope changes| + |slope at a|.
    """
    a, b = map(float, domain)
    if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
        raise InvalidParameter("compile_spline needs a bounded domain a < b")
    if f.x[0] < a or f.x[-1] > b:
        raise InvalidParameter("the domain must contain every knot")
    pts = np.unique(np.concatenate([[a], f.x[(f.x > a) & (f.x < b)], [b]]))
    vals = f(pts)
    slopes = np.diff(vals) / np.diff(pts)
    scale = max(1.0, float(np.max(np.abs(slopes))))
    w1, b1, w2 = [], [], []

    def add_unit(slope, at):
        r = np.sqrt(abs(slope))
        w1.append(r)
        b1.append(-r * at)
        w2.append(np.sign(slope) * r)

    if abs(slopes[0]) > tol * scale:
        add_unit(slopes[0], a)
    for t, change in zip(pts[1:-1], np.diff(slopes)):
        if abs(change) > tol * scale:
            add_unit(change, t)
    h = len(w1)
    return ReluNet2(
        np.array(w1).reshape(h, 1),
        np.array(b1),
        np.array(w2).reshape(1, h),
        np.array([vals[0]]),
    )


def net_to_spline(net: ReluNet2) -> LinearSpline:
    """The exact linear spline a univariate single-output net computes on all of R."""
    if net.d != 1 or net.k != 1:
        raise InvalidInput("net_to_spline needs d = k = 1")
    w1, b1, w2 = net.W1[:, 0], net.b1, net.W2[0]
    live = (w1 != 0) & (w2 != 0)
    kinks = np.unique(-b1[live] / w1[live])
    left = float(np.sum((w1 * w2)[live & (w1 < 0)]))
    right = float(np.sum((w1 * w2)[live & (w1 > 0)]))
    xs = kinks if len(kinks) else np.array([0.0])
    return LinearSpline(xs, net(xs)[:, 0], left, right)


def _as_targets(Y, k: int) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None] if k == 1 else Y[None, :]
    return Y


def loss_and_output_grad(pred: np.ndarray, Y: np.ndarray, kind: str = "squared") -> tuple[float, np.ndarray]:
    """Mean over samples of the summed per-output loss, and its gradient w.r.t. pred."""
    n = len(pred)
    r = pred - Y
    if kind == "squared":
        return float(np.sum(r**2) / n), 2.0 * r / n
    if kind == "absolute":
        return float(np.sum(np.abs(r)) / n), np.sign(r) / n
    raise InvalidInput(f"unknown loss kind {kind!r}")


def backprop(net: ReluNet2, X, Y, loss: str = "squared") -> tuple[float, ReluNet2]:
    pred, cache = net.forward(X)
    value, dout = loss_and_output_grad(pred, _as_targets(Y, net.k), loss)
    grad, _ = net.backward(cache, dout)
    return value, grad


Objective = Callable[[ReluNet2, np.ndarray, np.ndarray], "tuple[float, ReluNet2]"]


@dataclass
class TrainConfig:
    lr: float = 0.01
    epochs: int = 1000
    seed: int = 0
    weight_decay: float = 0.0
    momentum: float = 0.0
    batch_size: int | None = None
    patience: int | None = None
    optimizer: str = "sgd"
    beta2: float = 0.999

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise InvalidParameter(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainResult:
    net: ReluNet2
    losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = -1


def train(
    net: ReluNet2,
    X,
    Y,
    config: TrainConfig,
    objective: Objective | None = None,
    val: tuple | None = None,
    val_objective: Objective | None = None,
) -> TrainResult:
    """Minimise objective + weight_decay * C(theta) by gradient descent.

    ``optimizer="sgd"`` is (heavy-ball) gradient descent; ``"adam"`` uses
    ``momentum`` as the first-moment decay and ``beta2`` for the second.

    The input net is not modified. With a validation split the returned net
    is the one with the lowest validation objective (early stopping).
    """
    if config.epochs < 0 or config.lr <= 0:
        raise InvalidParameter("need epochs >= 0 and lr > 0")
    objective = objective or (lambda m, a, b: backprop(m, a, b))
    val_objective = val_objective or objective
    X = net._inputs(X)
    Y = _as_targets(Y, net.k)
    rng = np.random.default_rng(config.seed)
    cur = net.copy()
    velocity = [np.zeros_like(p) for p in cur.params()]
    second = [np.zeros_like(p) for p in cur.params()]
    adam = config.optimizer == "adam"
    step = 0
    result = TrainResult(net.copy())
    best = np.inf
    if val is not None:
        best = val_objective(cur, *val)[0]
        result.best_epoch = 0
    since_best = 0
    n = len(X)
    bs = n if not config.batch_size else min(config.batch_size, n)

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n) if bs < n else np.arange(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            value, grad = objective(cur, X[idx], Y[idx])
            total += value * len(idx)
            grads = list(grad.params())
            if config.weight_decay:
                grads[0] = grads[0] + config.weight_decay * cur.W1
                grads[2] = grads[2] + config.weight_decay * cur.W2
            step += 1
            for v, s2, g, p in zip(velocity, second, grads, cur.params()):
                if adam:
                    b1, b2 = config.momentum, config.beta2
                    v *= b1
                    v += (1 - b1) * g
                    s2 *= b2
                    s2 += (1 - b2) * g * g
                    m_hat = v / (1 - b1**step)
                    s_hat = s2 / (1 - b2**step)
                    p -= config.lr * m_hat / (np.sqrt(s_hat) + 1e-8)
                else:
                    v *= config.momentum
                    v -= config.lr * g
                    p += v
        result.losses.append(total / n + config.weight_decay * complexity(cur))
        if not all(np.all(np.isfinite(p)) for p in cur.params()):
            raise FloatingPointError(f"training diverged at epoch {epoch}")
        if val is not None:
            v_loss = val_objective(cur, *val)[0]
            result.val_losses.append(v_loss)
            if v_loss < best:
                best, result.net, result.best_epoch, since_best = v_loss, cur.copy(), epoch, 0
            else:
                since_best += 1
                if config.patience is not None and since_best >= config.patience:
                    break
    if val is None:
        result.net = cur.copy()
        result.best_epoch = config.epochs
    return result
