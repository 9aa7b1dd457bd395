"""Composed fine-tuning with continuous outputs.

A denoiser net is pre-trained to undo Gaussian corruption of unlabeled valid
outputs, frozen, and then a base predictor is trained through it:

    loss = mean ||denoiser(base(x)) - y||^2 + lam * mean ||base(x) - y||^2

Only the base receives updates; gradients flow through the denoiser's input.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidParameter, InvalidState
from .relu_net import (
    ReluNet2,
    TrainConfig,
    complexity,
    init_net,
    loss_and_output_grad,
    net_to_spline,
    train,
)
from .spline import StaircaseSpec, spline_norm
from .valid_set import ValidSet, project_many


class FrozenDenoiser:
    """Read-only wrapper around a ReluNet2 mapping R^k -> R^k."""

    def __init__(self, net: ReluNet2):
        net = net.copy()
        for p in net.params():
            p.setflags(write=False)
        self._net = net
        self._digest = net.digest()

    @property
    def frozen(self) -> bool:
        return True

    @property
    def net(self) -> ReluNet2:
        return self._net

    @property
    def digest(self) -> str:
        return self._digest

    def verify(self) -> None:
        if self._net.digest() != self._digest:
            raise InvalidState("frozen denoiser parameters changed")

    def __call__(self, Y) -> np.ndarray:
        return self._net(Y)

    def forward(self, Y):
        return self._net.forward(Y)

    def input_grad(self, cache, dout) -> np.ndarray:
        """Vector-Jacobian product w.r.t. the denoiser input; parameter gradients are dropped."""
        _, dY = self._net.backward(cache, dout)
        return dY

    @classmethod
    def identity(cls, k: int = 1, span: float = 1e6) -> "FrozenDenoiser":
        """Exact identity on [-span, span]^k, built from relu(y + span) - span."""
        eye = np.eye(k)
        return cls(ReluNet2(eye, np.full(k, span), eye, np.full(k, -span)))


@dataclass
class DenoiserConfig:
    hidden: int = 512
    epochs: int = 0
    lr: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    copies: int = 60
    ridge: float = 1e-6
    noise: str = "uniform"

    def __post_init__(self):
        if self.noise not in ("gaussian", "uniform"):
            raise InvalidParameter(f"unknown corruption noise {self.noise!r}")


def pretrain_denoiser(unlabeled, sigma: float, config: DenoiserConfig | None = None) -> FrozenDenoiser:
    """Fit a ReLU net to map corrupted valid outputs back to y, then freeze it.

    Corruption adds N(0, sigma^2) noise, or Uniform[-sigma, sigma] noise with
    ``noise="uniform"``; for points one unit apart and sigma <= 0.5 the best
    uniform-noise denoiser is exactly rounding.

    Hidden units start with kinks placed at random corrupted samples and the
    output layer is solved by ridge regression before gradient descent
    refines all weights. Training runs in standardised coordinates and the
    affine maps are folded into the returned weights.
    """
    config = config or DenoiserConfig()
    if not sigma > 0:
        raise InvalidParameter("corruption scale sigma must be positive")
    clean = np.asarray(unlabeled, dtype=float)
    if clean.ndim == 1:
        clean = clean[:, None]
    rng = np.random.default_rng(config.seed)
    Y = np.repeat(clean, config.copies, axis=0)
    if config.noise == "uniform":
        noisy = Y + rng.uniform(-sigma, sigma, Y.shape)
    else:
        noisy = Y + sigma * rng.standard_normal(Y.shape)
    k = Y.shape[1]

    mu_in, sd_in = noisy.mean(axis=0), noisy.std(axis=0) + 1e-12
    mu_out, sd_out = Y.mean(axis=0), Y.std(axis=0) + 1e-12
    Xn, Yn = (noisy - mu_in) / sd_in, (Y - mu_out) / sd_out

    h = config.hidden
    dirs = rng.standard_normal((h, k))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    centers = Xn[rng.choice(len(Xn), size=h, replace=h > len(Xn))]
    W1 = dirs
    b1 = -np.sum(W1 * centers, axis=1)
    A = np.maximum(Xn @ W1.T + b1, 0.0)
    A1 = np.hstack([A, np.ones((len(A), 1))])
    sol = np.linalg.solve(A1.T @ A1 + config.ridge * len(A1) * np.eye(h + 1), A1.T @ Yn)
    net = ReluNet2(W1, b1, sol[:h].T, sol[h])

    if config.epochs:
        cfg = TrainConfig(lr=config.lr, epochs=config.epochs, momentum=config.momentum, seed=config.seed)
        net = train(net, Xn, Yn, cfg).net
    return FrozenDenoiser(net.with_affine(mu_in, sd_in, mu_out, sd_out))


def composed_loss(base: ReluNet2, denoiser: FrozenDenoiser, X, Y, lam: float) -> tuple[float, ReluNet2]:
    """Composed squared loss plus lam times the direct squared loss; gradient w.r.t. base only."""
    if not denoiser.frozen:
        raise InvalidState("the denoiser must be frozen")
    pred, base_cache = base.forward(X)
    out, den_cache = denoiser.forward(pred)
    Y = np.asarray(Y, dtype=float).reshape(out.shape)
    value, dout = loss_and_output_grad(out, Y)
    dpred = denoiser.input_grad(den_cache, dout)
    if lam:
        direct, ddirect = loss_and_output_grad(pred, Y)
        value += lam * direct
        dpred = dpred + lam * ddirect
    grad, _ = base.backward(base_cache, dpred)
    return value, grad


@dataclass
class ComposedConfig:
    lam: float = 0.3
    sigma: float = 0.5
    noise: str = "uniform"
    denoiser_epochs: int = 0
    denoiser_hidden: int = 512
    denoiser_ridge: float = 1e-6
    denoiser_copies: int = 60
    base_epochs: int = 4000
    base_hidden: int = 32
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.0
    optimizer: str = "adam"
    early_stopping: bool = False
    seed: int = 0
    points_per_interval: int = 20
    val_fraction: float = 0.2
    holdout_every: int = 3
    ood_widths: float = 1.0
    n_eval: int = 400

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise InvalidParameter("lam must be finite and non-negative")
        if not self.sigma > 0:
            raise InvalidParameter("sigma must be positive")


@dataclass
class StaircaseTask:
    """Train/OOD split of a staircase plus the valid set used for evaluation."""

    spec: StaircaseSpec
    V: ValidSet
    train_intervals: np.ndarray
    heldout_intervals: np.ndarray
    ood_range: tuple[tuple[float, float], tuple[float, float]]
    line: tuple[float, float] = field(default=(1.0, 0.0))

    def target(self, x) -> np.ndarray:
        """f* inside X; outside X, the trend line through interval centres projected onto V."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = self.spec.target(x)
        gap = np.isnan(out[:, 0])
        if gap.any():
            slope, icpt = self.line
            idx = project_many((slope * x[gap] + icpt)[:, None], self.V)
            out[gap] = self.V.points[idx]
        return out


def make_task(spec: StaircaseSpec, config: ComposedConfig, V: ValidSet | None = None) -> StaircaseTask:
    if spec.k != 1:
        raise InvalidParameter("the staircase experiment is univariate")
    centers = spec.intervals.mean(axis=1)
    vals = spec.values[:, 0]
    slope, icpt = np.polyfit(centers, vals, 1) if spec.n > 1 else (0.0, float(vals[0]))
    a, b = spec.domain
    width = (b - a) * config.ood_widths
    ood = ((a - width, a), (b, b + width))
    if V is None:
        if not np.all(vals == np.round(vals)):
            raise InvalidParameter("pass a valid set explicitly for non-integer staircases")
        ends = slope * np.array([a - width, b + width]) + icpt
        lo = int(np.floor(min(ends.min(), vals.min()))) - 1
        hi = int(np.ceil(max(ends.max(), vals.max()))) + 1
        V = ValidSet.integers(lo, hi)
    idx = np.arange(spec.n)
    held = idx[idx % config.holdout_every == config.holdout_every - 1] if config.holdout_every else idx[:0]
    return StaircaseTask(spec, V, np.setdiff1d(idx, held), held, ood, (float(slope), float(icpt)))


def _sample_intervals(spec, which, per, rng):
    xs = [rng.uniform(spec.intervals[i, 0], spec.intervals[i, 1], per) for i in which]
    return np.concatenate(xs) if xs else np.zeros(0)


def _affine_objective(inner, shift, scale):
    """Lift an objective on raw predictions to one on a net trained in standardised units."""

    def obj(g: ReluNet2, Xn, Y):
        raw = g.with_affine(0.0, 1.0, shift, scale)
        value, grad = inner(raw, Xn, Y)
        grad.W2 = grad.W2 * scale
        grad.b2 = grad.b2 * scale
        return value, grad

    return obj


def _direct_objective(net, X, Y):
    pred, cache = net.forward(X)
    value, dout = loss_and_output_grad(pred, np.asarray(Y, float).reshape(pred.shape))
    return value, net.backward(cache, dout)[0]


def run_staircase_experiment(spec: StaircaseSpec, config: ComposedConfig, V: ValidSet | None = None) -> dict:
    """Standard vs composed training on one seed; per-arm errors, exact match, and complexity."""
    task = make_task(spec, config, V)
    rng = np.random.default_rng([config.seed, 1])

    x_lab = _sample_intervals(spec, task.train_intervals, config.points_per_interval, rng)
    y_lab = task.target(x_lab)
    perm = rng.permutation(len(x_lab))
    n_val = int(round(config.val_fraction * len(x_lab)))
    val_idx, tr_idx = perm[:n_val], perm[n_val:]
    x_tr, y_tr, x_val, y_val = x_lab[tr_idx], y_lab[tr_idx], x_lab[val_idx], y_lab[val_idx]

    per_eval = max(1, config.n_eval // max(1, len(task.train_intervals)))
    x_test = _sample_intervals(spec, task.train_intervals, per_eval, rng)
    x_held = _sample_intervals(spec, task.heldout_intervals, max(1, config.n_eval // 4), rng)
    (l0, l1), (r0, r1) = task.ood_range
    n_side = config.n_eval // 2
    x_ood = np.concatenate([x_held, rng.uniform(l0, l1, n_side), rng.uniform(r0, r1, n_side)])

    denoiser = pretrain_denoiser(
        task.V.points,
        config.sigma,
        DenoiserConfig(
            hidden=config.denoiser_hidden,
            epochs=config.denoiser_epochs,
            seed=config.seed,
            noise=config.noise,
            ridge=config.denoiser_ridge,
            copies=config.denoiser_copies,
        ),
    )

    mu_x, sd_x = x_tr.mean(), x_tr.std() + 1e-12
    mu_y, sd_y = y_tr.mean(), y_tr.std() + 1e-12
    norm_x = lambda x: ((np.asarray(x) - mu_x) / sd_x)[:, None]  # noqa: E731
    init = init_net(1, config.base_hidden, 1, config.seed)
    tcfg = TrainConfig(
        lr=config.lr,
        epochs=config.base_epochs,
        seed=config.seed,
        weight_decay=config.weight_decay,
        momentum=config.momentum,
        optimizer=config.optimizer,
    )

    std_obj = _affine_objective(_direct_objective, mu_y, sd_y)
    val = (norm_x(x_val), y_val) if config.early_stopping else None
    std_res = train(init, norm_x(x_tr), y_tr, tcfg, objective=std_obj, val=val)

    comp_inner = lambda net, X, Y: composed_loss(net, denoiser, X, Y, config.lam)  # noqa: E731
    comp_obj = _affine_objective(comp_inner, mu_y, sd_y)
    val_comp = _affine_objective(lambda net, X, Y: composed_loss(net, denoiser, X, Y, 0.0), mu_y, sd_y)
    comp_res = train(
        init, norm_x(x_tr), y_tr, tcfg, objective=comp_obj, val=val, val_objective=val_comp
    )
    denoiser.verify()

    fold = lambda g: g.with_affine(mu_x, sd_x, mu_y, sd_y)  # noqa: E731
    std_net, comp_net = fold(std_res.net), fold(comp_res.net)

    def hard(pred):
        return task.V.points[project_many(pred, task.V)]

    arms = {
        "standard": (std_net, lambda x: std_net(x)),
        "standard+project": (std_net, lambda x: hard(std_net(x))),
        "composed": (comp_net, lambda x: denoiser(comp_net(x))),
        "composed+project": (comp_net, lambda x: hard(denoiser(comp_net(x)))),
    }
    splits = {"train": x_tr, "test": x_test, "ood": x_ood}
    report = {"seed": config.seed, "config": asdict(config), "denoiser_digest": denoiser.digest, "arms": {}}
    for name, (net, predict) in arms.items():
        row = {}
        for split, x in splits.items():
            pred = predict(x[:, None])
            want = task.target(x)
            row[f"mse_{split}"] = float(np.mean(np.sum((pred - want) ** 2, axis=1)))
            row[f"em_{split}"] = float(np.mean(np.all(hard(pred) == want, axis=1)))
        row["complexity"] = complexity(net)
        row["function_norm"] = spline_norm(net_to_spline(net))
        report["arms"][name] = row
    return report


CSV_FIELDS = ["arm", "seed", "mse_train", "mse_test", "mse_ood", "em_ood", "complexity"]


def report_rows(report: dict) -> list[dict]:
    return [
        {"arm": arm, "seed": report["seed"], **{k: row[k] for k in CSV_FIELDS[2:]}}
        for arm, row in report["arms"].items()
    ]
