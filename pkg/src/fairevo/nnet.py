"""One-hidden-layer binary classifier stored as a flat genome.

Genome layout (length ``hidden*(input_dim+1) + hidden + 1``)::

    [ W1 (hidden x input_dim, row-major) | b1 (hidden) | w2 (hidden) | b2 (1) ]

``W1[j]`` holds the input weights of hidden unit ``j``; ``w2`` maps the hidden
layer to the single logit. Genomes are plain float64 arrays and are never
modified in place by this module.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fairmetrics as fm
from .errors import ConfigurationError, DataError, TrainingError

P_CLAMP = 1e-12

LOSS_ALIASES = {
    "CE": "CE", "cross_entropy": "CE",
    "FI": "FI", "f_I": "FI",
    "FG": "FG", "f_G": "FG",
}
LOSSES = ("CE", "FI", "FG")


def canonical_loss(tag: str) -> str:
    try:
        return LOSS_ALIASES[tag]
    except KeyError:
        raise ConfigurationError(f"unknown loss {tag!r}; expected one of {LOSSES}") from None


@dataclass(frozen=True)
class NetSpec:
    input_dim: int
    hidden: int = 64
    activation: str = "relu"

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden < 1:
            raise ConfigurationError("input_dim and hidden must be >= 1")
        if self.activation not in ("relu", "tanh"):
            raise ConfigurationError(f"unsupported activation {self.activation!r}")

    @property
    def n_weights(self) -> int:
        return self.hidden * (self.input_dim + 1) + self.hidden + 1

    def to_dict(self):
        return {"input_dim": self.input_dim, "hidden": self.hidden, "activation": self.activation}


@dataclass(frozen=True)
class TrainSpec:
    learning_rate: float = 0.004
    batch_size: int = 40
    epochs_per_partial: int = 1
    loss: str = "CE"
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be nonnegative")
        if self.batch_size < 1 or self.epochs_per_partial < 0:
            raise ConfigurationError("batch_size must be >= 1 and epochs_per_partial >= 0")
        object.__setattr__(self, "loss", canonical_loss(self.loss))


def unpack(genome: np.ndarray, spec: NetSpec):
    """Views ``(W1, b1, w2, b2)`` into ``genome``."""
    genome = np.asarray(genome, dtype=np.float64)
    if genome.shape != (spec.n_weights,):
        raise DataError(f"genome length {genome.shape} does not match NetSpec ({spec.n_weights})")
    h, d = spec.hidden, spec.input_dim
    a = h * d
    return genome[:a].reshape(h, d), genome[a:a + h], genome[a + h:a + 2 * h], genome[a + 2 * h]


def pack(W1, b1, w2, b2) -> np.ndarray:
    return np.concatenate([np.ravel(W1), np.ravel(b1), np.ravel(w2), np.atleast_1d(b2)]).astype(np.float64)


def init_genome(spec: NetSpec, seed) -> np.ndarray:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / (spec.input_dim + spec.hidden))
    lim2 = np.sqrt(6.0 / (spec.hidden + 1))
    W1 = rng.uniform(-lim1, lim1, size=(spec.hidden, spec.input_dim))
    w2 = rng.uniform(-lim2, lim2, size=spec.hidden)
    return pack(W1, np.zeros(spec.hidden), w2, 0.0)


def _activate(a, kind):
    if kind == "relu":
        return np.maximum(a, 0.0)
    return np.tanh(a)


def _activate_grad(a, h, kind):
    if kind == "relu":
        return (a > 0).astype(np.float64)
    return 1.0 - h * h


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))


def _check_input(X, spec):
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X2 = X[None, :] if single else X
    if X2.ndim != 2 or X2.shape[1] != spec.input_dim:
        raise DataError(f"input width {X2.shape[-1]} does not match input_dim {spec.input_dim}")
    return X2, single


def _forward_full(genome, spec, X):
    W1, b1, w2, b2 = unpack(genome, spec)
    pre = X @ W1.T + b1
    h = _activate(pre, spec.activation)
    z = h @ w2 + b2
    return pre, h, _sigmoid(z)


def forward(genome: np.ndarray, spec: NetSpec, X) -> np.ndarray | float:
    """Positive-class probability, clamped to ``[1e-12, 1-1e-12]``.

    Accepts one row (returns a float) or a matrix (returns a vector).
    """
    X2, single = _check_input(X, spec)
    _, _, p = _forward_full(genome, spec, X2)
    p = np.clip(p, P_CLAMP, 1.0 - P_CLAMP)
    return float(p[0]) if single else p


def _loss_from_probs(p, y, groups, loss, alpha):
    if loss == "CE":
        return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))
    b = fm.benefit_vector(p, y)
    if loss == "FI":
        return fm.generalized_entropy(b, alpha)
    return fm.group_entropy_ids(b, groups, alpha)


def loss_value(genome, spec: NetSpec, X, y, groups, loss: str, alpha: float = 2.0) -> float:
    """Mean cross-entropy or the individual/group entropy index of benefits.

    ``groups`` is a per-sample group-id array (only needed for ``FG``).
    """
    loss = canonical_loss(loss)
    X2, _ = _check_input(X, spec)
    if X2.shape[0] == 0:
        raise DataError("empty batch")
    p = forward(genome, spec, X2)
    return _loss_from_probs(p, np.asarray(y, dtype=np.float64), groups, loss, alpha)


def loss_and_grad(genome, spec: NetSpec, X, y, groups, loss: str, alpha: float = 2.0):
    """Loss value and its gradient with respect to the genome (backprop)."""
    loss = canonical_loss(loss)
    X2, _ = _check_input(X, spec)
    n = X2.shape[0]
    if n == 0:
        raise DataError("empty batch")
    y = np.asarray(y, dtype=np.float64)
    pre, h, p_raw = _forward_full(genome, spec, X2)
    p = np.clip(p_raw, P_CLAMP, 1.0 - P_CLAMP)
    inside = (p_raw > P_CLAMP) & (p_raw < 1.0 - P_CLAMP)

    if loss == "CE":
        value = _loss_from_probs(p, y, groups, loss, alpha)
        dz = np.where(inside, (p_raw - y) / n, 0.0)
    else:
        b = fm.benefit_vector(p, y)
        if loss == "FI":
            value, db = fm.generalized_entropy_grad(b, alpha)
        else:
            value, db = fm.group_entropy_ids_grad(b, groups, alpha)
        # d b / d p = 1
        dz = np.where(inside, db * p_raw * (1.0 - p_raw), 0.0)

    _, _, w2, _ = unpack(genome, spec)
    g_w2 = h.T @ dz
    g_b2 = dz.sum()
    dpre = np.outer(dz, w2) * _activate_grad(pre, h, spec.activation)
    g_W1 = dpre.T @ X2
    g_b1 = dpre.sum(axis=0)
    return value, pack(g_W1, g_b1, g_w2, g_b2)


def partial_train(genome, spec: NetSpec, X, y, groups, tspec: TrainSpec, alpha: float = 2.0,
                  seed=None) -> np.ndarray:
    """Mini-batch SGD for ``tspec.epochs_per_partial`` epochs; returns a new genome."""
    X2, _ = _check_input(X, spec)
    y = np.asarray(y, dtype=np.float64)
    groups = None if groups is None else np.asarray(groups)
    rng = np.random.default_rng(tspec.seed if seed is None else seed)
    g = np.array(genome, dtype=np.float64, copy=True)
    n = X2.shape[0]
    bs = tspec.batch_size
    for epoch in range(tspec.epochs_per_partial):
        perm = rng.permutation(n)
        for start in range(0, n, bs):
            idx = perm[start:start + bs]
            value, grad = loss_and_grad(
                g, spec, X2[idx], y[idx], None if groups is None else groups[idx], tspec.loss, alpha
            )
            if not (np.isfinite(value) and np.isfinite(grad).all()):
                raise TrainingError(
                    f"non-finite {tspec.loss} gradient at epoch {epoch}, batch offset {start} "
                    f"(loss={value!r}, max|w|={np.abs(g).max():.3g})"
                )
            if tspec.learning_rate:
                g -= tspec.learning_rate * grad
    return g
