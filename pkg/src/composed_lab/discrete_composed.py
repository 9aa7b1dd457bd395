"""Composed training for discrete sequence outputs.

The base model gives independent per-position categorical distributions, so
p(y | x) factorises over positions. Composed training maximises

    scale * E_{yhat ~ p(.|x)}[max(log p_denoise(y | yhat), gamma)] + lam * log p(y | x)

whose gradient is estimated with the score-function (REINFORCE) trick and,
for small output spaces, computed exactly by enumeration.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidInput, InvalidParameter, InvalidState

MAX_LENGTH = 4
MAX_VOCAB = 8
MAX_SPACE = 4096
_CHUNK = 1 << 15


def all_sequences(length: int, vocab: int) -> np.ndarray:
    """Every sequence in lexicographic order; row i encodes sequence index i."""
    idx = np.arange(vocab**length)
    powers = vocab ** np.arange(length - 1, -1, -1)
    return (idx[:, None] // powers) % vocab


def encode(Y, vocab: int) -> np.ndarray:
    """Sequence index of each row of Y (inverse of `all_sequences`)."""
    Y = np.asarray(Y, dtype=int)
    powers = vocab ** np.arange(Y.shape[-1] - 1, -1, -1)
    return Y @ powers


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class CategoricalSeqModel:
    """Per-position categorical distributions p(y_t | x), factorised over positions.

    Logits are linear in fixed input features: ``logits[x, t] = sum_f
    features[x, t, f] * params[f, t]``. Without explicit features every
    input id gets its own row of parameters (a lookup table).
    """

    def __init__(self, params, features=None):
        params = np.array(params, dtype=float)
        if params.ndim != 3:
            raise InvalidInput("params must have shape (n_features, length, vocab)")
        n_feat, length, vocab = params.shape
        if not 1 <= length <= MAX_LENGTH or not 2 <= vocab <= MAX_VOCAB:
            raise InvalidInput(f"need 1 <= length <= {MAX_LENGTH} and 2 <= vocab <= {MAX_VOCAB}")
        if features is None:
            features = np.broadcast_to(np.eye(n_feat)[:, None, :], (n_feat, length, n_feat))
        features = np.array(features, dtype=float)
        if features.ndim != 3 or features.shape[1:] != (length, n_feat):
            raise InvalidInput("features must have shape (n_inputs, length, n_features)")
        self.params = params
        self.features = features

    @classmethod
    def uniform(cls, n_inputs: int, length: int, vocab: int, features=None) -> "CategoricalSeqModel":
        n_feat = n_inputs if features is None else np.shape(features)[2]
        return cls(np.zeros((n_feat, length, vocab)), features)

    @classmethod
    def random(cls, n_inputs: int, length: int, vocab: int, seed: int = 0, scale: float = 1.0):
        rng = np.random.default_rng(seed)
        return cls(scale * rng.standard_normal((n_inputs, length, vocab)))

    @property
    def n_inputs(self) -> int:
        return self.features.shape[0]

    @property
    def length(self) -> int:
        return self.params.shape[1]

    @property
    def vocab(self) -> int:
        return self.params.shape[2]

    @property
    def logits(self) -> np.ndarray:
        return np.einsum("xtf,ftv->xtv", self.features, self.params)

    def pullback(self, dlogits: np.ndarray, squared: bool = False) -> np.ndarray:
        """Map a gradient w.r.t. the logits to one w.r.t. the params.

        With ``squared`` the features enter squared, which propagates the
        variances of independent per-input contributions.
        """
        phi = self.features**2 if squared else self.features
        return np.einsum("xtf,xtv->ftv", phi, dlogits)

    def copy(self) -> "CategoricalSeqModel":
        return CategoricalSeqModel(self.params.copy(), self.features)

    def probs(self) -> np.ndarray:
        """Per-position probabilities; raises InvalidState if they fail to normalise."""
        p = _softmax(self.logits)
        if not np.all(np.isfinite(p)) or np.max(np.abs(p.sum(axis=-1) - 1.0)) > 1e-9:
            raise InvalidState("model probabilities are not normalised")
        return p

    def log_prob(self, X, Y) -> np.ndarray:
        """log p(y | x) for each pair."""
        X = np.asarray(X, dtype=int)
        Y = np.asarray(Y, dtype=int)
        logp = np.log(self.probs())
        return logp[X[:, None], np.arange(self.length)[None, :], Y].sum(axis=1)

    def argmax(self, X=None) -> np.ndarray:
        """Most probable sequence per input; ties go to the lowest token id."""
        X = np.arange(self.n_inputs) if X is None else np.asarray(X, dtype=int)
        return np.argmax(self.logits[X], axis=-1)

    def sequence_probs(self, x: int) -> np.ndarray:
        """p(y | x) for every sequence in `all_sequences` order."""
        if self.vocab**self.length > MAX_SPACE:
            raise InvalidParameter(f"output space larger than {MAX_SPACE}")
        p = self.probs()[x]
        seqs = all_sequences(self.length, self.vocab)
        return np.prod(p[np.arange(self.length), seqs], axis=1)

    def to_dict(self) -> dict:
        return {
            "shape": list(self.params.shape),
            "params": self.params.ravel().tolist(),
            "features_shape": list(self.features.shape),
            "features": self.features.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CategoricalSeqModel":
        params = np.array(d["params"], dtype=float).reshape(d["shape"])
        features = np.array(d["features"], dtype=float).reshape(d["features_shape"])
        return cls(params, features)


class DiscreteDenoiser:
    """p(y | yhat) as a dense table over the whole output space.

    Row ``i`` is the distribution of the clean sequence given the corrupted
    sequence with index ``i``; only valid sequences carry mass.
    """

    def __init__(self, table, length: int, vocab: int, valid):
        table = np.array(table, dtype=float)
        size = vocab**length
        if size > MAX_SPACE:
            raise InvalidParameter(f"output space larger than {MAX_SPACE}")
        if table.shape != (size, size):
            raise InvalidInput(f"table must be {size} x {size}")
        if np.any(table < 0) or np.max(np.abs(table.sum(axis=1) - 1.0)) > 1e-9:
            raise InvalidInput("denoiser rows must be probability distributions")
        valid = np.unique(encode(np.atleast_2d(valid), vocab))
        mask = np.zeros(size, dtype=bool)
        mask[valid] = True
        if np.any(table[:, ~mask] > 0):
            raise InvalidInput("denoiser puts mass on an invalid sequence")
        self.table = table
        self.length = length
        self.vocab = vocab
        self.valid_mask = mask
        with np.errstate(divide="ignore"):
            self.log_table = np.log(table)

    @property
    def valid_indices(self) -> np.ndarray:
        return np.flatnonzero(self.valid_mask)

    def is_valid(self, Y) -> np.ndarray:
        return self.valid_mask[encode(Y, self.vocab)]

    def hard(self, Y) -> np.ndarray:
        """Most probable clean sequence for each row of Y; ties go to the lowest index."""
        rows = self.table[encode(Y, self.vocab)]
        return all_sequences(self.length, self.vocab)[np.argmax(rows, axis=-1)]

    @classmethod
    def nearest_valid(cls, valid, length: int, vocab: int, beta: float = 0.0) -> "DiscreteDenoiser":
        """Mass 1 - beta on the Hamming-nearest valid sequence, beta spread over all valid ones.

        Ties between equally near valid sequences go to the lowest index.
        """
        if not 0 <= beta <= 1:
            raise InvalidParameter("beta must lie in [0, 1]")
        seqs = all_sequences(length, vocab)
        valid_idx = np.unique(encode(np.atleast_2d(valid), vocab))
        dist = (seqs[:, None, :] != seqs[valid_idx][None, :, :]).sum(axis=2)
        nearest = valid_idx[np.argmin(dist, axis=1)]
        table = np.zeros((len(seqs), len(seqs)))
        table[:, valid_idx] = beta / len(valid_idx)
        table[np.arange(len(seqs)), nearest] += 1 - beta
        return cls(table, length, vocab, seqs[valid_idx])

    @classmethod
    def from_corruptions(
        cls,
        valid,
        length: int,
        vocab: int,
        corrupt_prob: float = 0.3,
        n_samples: int = 20000,
        smoothing: float = 0.1,
        seed: int = 0,
        corruption=None,
    ) -> "DiscreteDenoiser":
        """Estimate p(y | yhat) from counts of (clean, corrupted) pairs.

        Clean sequences are drawn uniformly from the valid set and passed
        through ``corruption(clean, rng)``; by default each position is
        replaced by a uniform random token with probability ``corrupt_prob``.
        Every valid sequence gets ``smoothing`` pseudo-counts in every row, so
        rows never seen during corruption become uniform.
        """
        if not 0 <= corrupt_prob <= 1 or smoothing <= 0 or n_samples < 1:
            raise InvalidParameter("need corrupt_prob in [0, 1], smoothing > 0, n_samples >= 1")
        rng = np.random.default_rng(seed)
        valid_seqs = all_sequences(length, vocab)[np.unique(encode(np.atleast_2d(valid), vocab))]
        clean = valid_seqs[rng.integers(len(valid_seqs), size=n_samples)]
        if corruption is None:
            flip = rng.random(clean.shape) < corrupt_prob
            noisy = np.where(flip, rng.integers(vocab, size=clean.shape), clean)
        else:
            noisy = np.asarray(corruption(clean, rng), dtype=int)
        size = vocab**length
        counts = np.zeros((size, size))
        np.add.at(counts, (encode(noisy, vocab), encode(clean, vocab)), 1.0)
        counts[:, encode(valid_seqs, vocab)] += smoothing
        return cls(counts / counts.sum(axis=1, keepdims=True), length, vocab, valid_seqs)


def kind_flip(prob: float, positions):
    """Corruption that toggles the kind bit (token % 2) at each listed position with probability prob."""
    positions = list(positions)

    def corrupt(clean, rng):
        noisy = clean.copy()
        flip = rng.random((len(clean), len(positions))) < prob
        noisy[:, positions] ^= flip.astype(int)
        return noisy

    return corrupt


def _check_args(model, denoiser, X, Y, gamma):
    if not gamma < 0:
        raise InvalidParameter("the clamp gamma must be negative")
    if (model.length, model.vocab) != (denoiser.length, denoiser.vocab):
        raise InvalidInput("model and denoiser disagree on sequence length or vocabulary")
    X = np.asarray(X, dtype=int).ravel()
    Y = np.asarray(Y, dtype=int).reshape(len(X), model.length)
    if len(X) == 0:
        raise InvalidInput("empty batch")
    if X.min() < 0 or X.max() >= model.n_inputs or Y.min() < 0 or Y.max() >= model.vocab:
        raise InvalidInput("input id or token out of range")
    return X, Y, model.probs()


def likelihood_grad(model: CategoricalSeqModel, X, Y) -> np.ndarray:
    """Gradient of mean log p(y | x) with respect to the params."""
    X = np.asarray(X, dtype=int).ravel()
    Y = np.asarray(Y, dtype=int).reshape(len(X), model.length)
    p = model.probs()
    onehot = np.eye(model.vocab)[Y]
    grad = np.zeros((model.n_inputs, model.length, model.vocab))
    np.add.at(grad, X, (onehot - p[X]) / len(X))
    return model.pullback(grad)


def composed_objective(
    model: CategoricalSeqModel,
    denoiser: DiscreteDenoiser,
    X,
    Y,
    lam: float = 1.0,
    gamma: float = -50.0,
    scale: float = 0.1,
) -> float:
    """Exact value of the clamped composed objective averaged over the batch."""
    X, Y, _ = _check_args(model, denoiser, X, Y, gamma)
    y_idx = encode(Y, model.vocab)
    total = 0.0
    for x, yi in zip(X, y_idx):
        q = model.sequence_probs(x)
        reward = np.maximum(denoiser.log_table[:, yi], gamma)
        total += scale * q @ reward
    return total / len(X) + lam * float(np.mean(model.log_prob(X, Y)))


def exact_grad(
    model: CategoricalSeqModel,
    denoiser: DiscreteDenoiser,
    X,
    Y,
    lam: float = 1.0,
    gamma: float = -50.0,
    scale: float = 0.1,
) -> np.ndarray:
    """Gradient of `composed_objective` w.r.t. the params by enumerating every output."""
    X, Y, p = _check_args(model, denoiser, X, Y, gamma)
    if model.vocab**model.length > MAX_SPACE:
        raise InvalidParameter(f"output space larger than {MAX_SPACE}")
    seqs = all_sequences(model.length, model.vocab)
    onehot = np.eye(model.vocab)[seqs]  # (S, T, V)
    grad = np.zeros((model.n_inputs, model.length, model.vocab))
    for x, yi in zip(X, encode(Y, model.vocab)):
        q = model.sequence_probs(x)
        w = q * np.maximum(denoiser.log_table[:, yi], gamma)
        # d/dlogits E_q[r] = sum_s q_s r_s (onehot_s - p)
        grad[x] += scale * (np.einsum("s,stv->tv", w, onehot) - w.sum() * p[x]) / len(X)
    return model.pullback(grad) + lam * likelihood_grad(model, X, Y)


def reinforce_grad(
    model: CategoricalSeqModel,
    denoiser: DiscreteDenoiser,
    X,
    Y,
    lam: float = 1.0,
    gamma: float = -50.0,
    scale: float = 0.1,
    n_samples: int = 1000,
    seed=0,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte-Carlo score-function estimate of `exact_grad`, with per-coordinate standard errors.

    Every batch element draws ``n_samples`` outputs from the model; no
    baseline is subtracted. Draws come from one generator seeded with
    ``seed`` and consumed in a fixed order, so results are reproducible. The
    likelihood term is computed exactly and contributes no variance.
    """
    X, Y, p = _check_args(model, denoiser, X, Y, gamma)
    if n_samples < 1:
        raise InvalidParameter("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    B, T, V = len(X), model.length, model.vocab
    y_idx = encode(Y, V)
    cdf = np.cumsum(p, axis=-1)
    cdf[..., -1] = 1.0
    eye = np.eye(V)
    grad = np.zeros((model.n_inputs, T, V))
    var = np.zeros((model.n_inputs, T, V))
    n = n_samples
    block = max(1, _CHUNK // n)
    for lo in range(0, B, block):
        xb, yb = X[lo : lo + block], y_idx[lo : lo + block]
        b = len(xb)
        s_r = np.zeros(b)
        s_r2 = np.zeros(b)
        s_ro = np.zeros((b, T, V))
        s_r2o = np.zeros((b, T, V))
        for start in range(0, n, _CHUNK):
            m = min(_CHUNK, n - start)
            u = rng.random((b, m, T))
            yhat = (u[..., None] > cdf[xb][:, None, :, :]).sum(axis=-1)
            r = np.maximum(denoiser.log_table[encode(yhat, V), yb[:, None]], gamma)
            oh = eye[yhat]  # (b, m, T, V)
            s_r += r.sum(axis=1)
            s_r2 += (r * r).sum(axis=1)
            s_ro += np.einsum("bm,bmtv->btv", r, oh)
            s_r2o += np.einsum("bm,bmtv->btv", r * r, oh)
        px = p[xb]
        # per-draw contribution h = scale * r * (onehot - p)
        mean = scale * (s_ro - px * s_r[:, None, None]) / n
        second = scale**2 * ((1 - 2 * px) * s_r2o + px**2 * s_r2[:, None, None]) / n
        sample_var = np.maximum(second - mean**2, 0.0) * (n / (n - 1) if n > 1 else 0.0)
        np.add.at(grad, xb, mean / B)
        np.add.at(var, xb, sample_var / (n * B * B))
    grad = model.pullback(grad)
    if lam:
        grad += lam * likelihood_grad(model, X, Y)
    return grad, np.sqrt(model.pullback(var, squared=True))


def z_scores(estimate: np.ndarray, stderr: np.ndarray, exact: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    """|estimate - exact| / stderr; coordinates with zero standard error must match to atol."""
    diff = np.abs(estimate - exact)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(stderr > 0, diff / stderr, np.where(diff <= atol, 0.0, np.inf))
    return z


@dataclass
class DiscreteTask:
    """Word-and-kind sequences with a global consistency constraint.

    Token ``2 * word + kind`` spells a word in one of two kinds, and a
    sequence is valid when all tokens share a kind. Each input fixes a word
    per position and one kind for the whole sequence, but only position 0
    sees the kind: later positions see just their own word. A factorised
    model therefore cannot know the kind at later positions, much like a
    line-by-line translator that must leave type inference to someone else.
    """

    length: int
    vocab: int
    valid: np.ndarray
    features: np.ndarray  # (n_inputs, length, n_features)
    targets: np.ndarray  # (n_inputs, length)
    train_ids: np.ndarray
    test_ids: np.ndarray

    @property
    def n_inputs(self) -> int:
        return len(self.targets)

    def model(self) -> CategoricalSeqModel:
        """A uniform model over this task's features."""
        return CategoricalSeqModel.uniform(self.n_inputs, self.length, self.vocab, self.features)


def valid_same_kind(length: int, n_words: int) -> np.ndarray:
    """All sequences whose tokens share one kind (token % 2)."""
    seqs = all_sequences(length, 2 * n_words)
    kinds = seqs % 2
    return seqs[np.all(kinds == kinds[:, :1], axis=1)]


def make_discrete_task(length: int = 3, n_words: int = 3, train_fraction: float = 0.5, seed: int = 0) -> DiscreteTask:
    """Every (words, kind) combination as an input, split at random into train and test ids."""
    if not 0 < train_fraction < 1:
        raise InvalidParameter("train_fraction must lie strictly between 0 and 1")
    vocab = 2 * n_words
    words = all_sequences(length, n_words)
    inputs = [(w, k) for w in words for k in (0, 1)]
    n_feat = vocab + n_words  # position 0: (word, kind); later positions: word only
    features = np.zeros((len(inputs), length, n_feat))
    targets = np.zeros((len(inputs), length), dtype=int)
    for x, (w, k) in enumerate(inputs):
        targets[x] = 2 * w + k
        features[x, 0, 2 * w[0] + k] = 1.0
        for t in range(1, length):
            features[x, t, vocab + w[t]] = 1.0
    rng = np.random.default_rng([seed, 7])
    order = rng.permutation(len(inputs))
    n_train = max(1, int(round(train_fraction * len(inputs))))
    return DiscreteTask(
        length,
        vocab,
        valid_same_kind(length, n_words),
        features,
        targets,
        np.sort(order[:n_train]),
        np.sort(order[n_train:]),
    )


@dataclass
class DiscreteConfig:
    lam: float = 1.0
    gamma: float = -50.0
    scale: float = 0.1
    n_samples: int = 32
    steps: int = 300
    lr: float = 2.0
    corrupt_prob: float = 0.3
    denoiser_samples: int = 20000
    smoothing: float = 0.1
    pin_first: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.gamma < 0:
            raise InvalidParameter("gamma must be negative")
        if self.lam < 0 or self.scale < 0 or self.lr <= 0 or self.steps < 0 or self.n_samples < 1:
            raise InvalidParameter("lam, scale must be >= 0; lr > 0; steps >= 0; n_samples >= 1")


def _ascend(model, grad_fn, steps, lr):
    trace = []
    for step in range(steps):
        value, grad = grad_fn(model, step)
        trace.append(value)
        model.params += lr * grad
        model.probs()  # normalisation holds after every step
    return trace


def train_standard(task: DiscreteTask, X, Y, config: DiscreteConfig):
    """Maximum likelihood by gradient ascent; returns the model and its objective trace."""
    model = task.model()

    def step(m, _):
        return float(np.mean(m.log_prob(X, Y))), likelihood_grad(m, X, Y)

    return model, _ascend(model, step, config.steps, config.lr)


def train_composed(task: DiscreteTask, denoiser: DiscreteDenoiser, X, Y, config: DiscreteConfig):
    """Gradient ascent on the composed objective with REINFORCE estimates."""
    model = task.model()

    def step(m, i):
        g, _ = reinforce_grad(
            m, denoiser, X, Y, config.lam, config.gamma, config.scale, config.n_samples, seed=[config.seed, i]
        )
        return float(config.lam * np.mean(m.log_prob(X, Y))), g

    return model, _ascend(model, step, config.steps, config.lr)


def run_discrete_experiment(task: DiscreteTask, config: DiscreteConfig, denoiser: DiscreteDenoiser | None = None):
    """Standard, standard + test-time denoiser, and composed training on one seed.

    Rates are measured on the task's held-out input ids. The default
    denoiser is estimated from corruptions of uniformly drawn valid
    sequences by flipping kinds; with ``pin_first`` position 0 is never
    flipped, so the denoiser learns to trust the kind shown there.
    """
    X, Y = task.train_ids, task.targets[task.train_ids]
    if denoiser is None:
        denoiser = DiscreteDenoiser.from_corruptions(
            task.valid,
            task.length,
            task.vocab,
            config.corrupt_prob,
            config.denoiser_samples,
            config.smoothing,
            seed=config.seed,
            corruption=kind_flip(config.corrupt_prob, range(1 if config.pin_first else 0, task.length)),
        )
    std, _ = train_standard(task, X, Y, config)
    comp, _ = train_composed(task, denoiser, X, Y, config)
    ids = task.test_ids
    preds = {
        "standard": std.argmax(ids),
        "standard+denoiser": denoiser.hard(std.argmax(ids)),
        "composed_base": comp.argmax(ids),
        "composed": denoiser.hard(comp.argmax(ids)),
    }
    want = task.targets[ids]
    arms = {
        name: {
            "valid_rate": float(np.mean(denoiser.is_valid(pred))),
            "correct_rate": float(np.mean(np.all(pred == want, axis=1))),
        }
        for name, pred in preds.items()
    }
    return {"seed": config.seed, "config": asdict(config), "arms": arms}


DISCRETE_CSV_FIELDS = ["arm", "seed", "valid_rate", "correct_rate"]


def discrete_report_rows(report: dict) -> list[dict]:
    return [{"arm": arm, "seed": report["seed"], **row} for arm, row in report["arms"].items()]


def shape_for_space(space: int) -> tuple[int, int]:
    """(length, vocab) with vocab**length == space, preferring the longest sequences."""
    for length in range(MAX_LENGTH, 0, -1):
        vocab = round(space ** (1 / length))
        if 2 <= vocab <= MAX_VOCAB and vocab**length == space:
            return length, vocab
    raise InvalidParameter(f"no length <= {MAX_LENGTH}, vocab in 2..{MAX_VOCAB} gives an output space of {space}")


def random_instance(space: int, seed: int, n_inputs: int = 3, batch: int = 4, beta: float = 0.2):
    """A random model, a denoiser over a random valid subset, and a batch (X, Y) for gradient checks.

    Targets may be invalid, so some denoiser entries are zero and the clamp is exercised.
    """
    length, vocab = shape_for_space(space)
    rng = np.random.default_rng([seed, 11])
    seqs = all_sequences(length, vocab)
    n_valid = int(rng.integers(1, space // 2 + 1))
    valid = seqs[rng.choice(space, size=n_valid, replace=False)]
    denoiser = DiscreteDenoiser.nearest_valid(valid, length, vocab, beta=beta)
    model = CategoricalSeqModel.random(n_inputs, length, vocab, seed=int(rng.integers(2**31)), scale=1.0)
    X = rng.integers(n_inputs, size=batch)
    Y = seqs[rng.integers(space, size=batch)]
    return model, denoiser, X, Y
