#!/usr/bin/env python3
"""
Neural Core - Dense layers, attention pooling, Gaussian heads and Adam on plain numpy arrays
"""
from __future__ import annotations

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import NetworkError, ShapeMismatchError, TrainingDivergenceError

logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "tanh", "identity")
LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
LOG_2PI = math.log(2.0 * math.pi)


class ParamStore:
    """Named parameters with their gradient slots and Adam moments"""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}
        self.t = 0

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self.params:
            raise NetworkError(f"parameter {name!r} registered twice")
        self.params[name] = np.array(value, dtype=self.dtype)
        self.grads[name] = np.zeros_like(self.params[name])
        self.m[name] = np.zeros_like(self.params[name])
        self.v[name] = np.zeros_like(self.params[name])

    def names(self) -> List[str]:
        return sorted(self.params)

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def grad_norm(self) -> float:
        return math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in self.grads.values()))

    def clip_grad_norm(self, max_norm: float) -> float:
        """Scale all gradients so their global norm is at most max_norm; returns the norm before clipping"""
        norm = self.grad_norm()
        if norm > max_norm > 0:
            scale = max_norm / norm
            for g in self.grads.values():
                g *= scale
        return norm

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: self.params[name].copy() for name in self.names()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(state)
        extra = set(state) - set(self.params)
        if missing or extra:
            raise ShapeMismatchError(f"parameter names differ (missing {sorted(missing)}, unexpected {sorted(extra)})")
        for name, value in state.items():
            if value.shape != self.params[name].shape:
                raise ShapeMismatchError(f"{name}: expected {self.params[name].shape}, got {value.shape}")
            self.params[name][...] = value

    def count(self) -> int:
        return sum(p.size for p in self.params.values())


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(z: np.ndarray, dy: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return dy * (z > 0)
    if activation == "tanh":
        t = np.tanh(z)
        return dy * (1.0 - t * t)
    return dy


class DenseLayer:
    """y = act(x @ W + b) over the last axis of x"""

    def __init__(self, store: ParamStore, name: str, n_in: int, n_out: int, activation: str = "relu",
                 rng: Optional[np.random.Generator] = None, init_scale: float = 1.0, zero: bool = False):
        if activation not in ACTIVATIONS:
            raise NetworkError(f"unknown activation {activation!r}")
        rng = rng or np.random.default_rng(0)
        self.store = store
        self.name = name
        self.n_in = n_in
        self.n_out = n_out
        self.activation = activation
        self.w_name = f"{name}/W"
        self.b_name = f"{name}/b"
        if zero:
            weights = np.zeros((n_in, n_out))
        else:
            gain = 2.0 if activation == "relu" else 1.0
            weights = rng.normal(0.0, math.sqrt(gain / n_in), size=(n_in, n_out)) * init_scale
        store.add(self.w_name, weights)
        store.add(self.b_name, np.zeros(n_out))

    @property
    def W(self) -> np.ndarray:
        return self.store.params[self.w_name]

    @property
    def b(self) -> np.ndarray:
        return self.store.params[self.b_name]

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
        return dense_forward(self, x)

    def backward(self, cache: Tuple[np.ndarray, np.ndarray], dy: np.ndarray) -> np.ndarray:
        x, z = cache
        dx, dW, db = dense_backward(self, x, dy, z)
        self.store.grads[self.w_name] += dW
        self.store.grads[self.b_name] += db
        return dx


def dense_forward(layer: DenseLayer, x: np.ndarray) -> Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    """Returns (y, cache) where cache holds the input and pre-activation"""
    x = np.asarray(x)
    if x.shape[-1] != layer.n_in:
        raise ShapeMismatchError(f"{layer.name}: expected last dimension {layer.n_in}, got shape {x.shape}")
    z = x @ layer.W + layer.b
    return _activate(z, layer.activation), (x, z)


def dense_backward(layer: DenseLayer, x: np.ndarray, dy: np.ndarray,
                   z: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact reverse-mode gradients (dx, dW, db) of one dense layer"""
    x = np.asarray(x)
    if z is None:
        z = x @ layer.W + layer.b
    if dy.shape != z.shape:
        raise ShapeMismatchError(f"{layer.name}: gradient shape {dy.shape} does not match output {z.shape}")
    dz = _activation_grad(z, dy, layer.activation)
    x2 = x.reshape(-1, layer.n_in)
    dz2 = dz.reshape(-1, layer.n_out)
    return dz @ layer.W.T, x2.T @ dz2, dz2.sum(axis=0)


class AttentionPool:
    """Softmax-weighted sum of neighbor embeddings, scored by a small dense stack"""

    def __init__(self, store: ParamStore, name: str, dim: int, hidden: int = 64,
                 rng: Optional[np.random.Generator] = None, activation: str = "relu"):
        self.dim = dim
        self.hidden_layer = DenseLayer(store, f"{name}/score_hidden", dim, hidden, activation, rng)
        self.score_layer = DenseLayer(store, f"{name}/score_out", hidden, 1, "identity", rng)

    def forward(self, embeddings: np.ndarray, mask: Optional[np.ndarray] = None):
        """
        Args:
            embeddings: (B, K, D) neighbor embeddings
            mask: (B, K) bool, False for padding

        Returns:
            (pooled (B, D), weights (B, K), cache)
        """
        batch, k, dim = embeddings.shape
        if mask is None:
            mask = np.ones((batch, k), dtype=bool)
        if k == 0:
            return np.zeros((batch, dim), dtype=embeddings.dtype), np.zeros((batch, 0)), None
        h, c_hidden = self.hidden_layer.forward(embeddings)
        s, c_score = self.score_layer.forward(h)
        scores = np.where(mask, s[..., 0], -np.inf)
        top = scores.max(axis=-1, keepdims=True)
        top = np.where(np.isfinite(top), top, 0.0)
        ex = np.where(mask, np.exp(scores - top), 0.0)
        denom = ex.sum(axis=-1, keepdims=True)
        weights = ex / np.where(denom > 0, denom, 1.0)
        pooled = np.einsum("bk,bkd->bd", weights, embeddings)
        return pooled, weights, (embeddings, mask, weights, c_hidden, c_score)

    def backward(self, cache, d_pooled: np.ndarray) -> np.ndarray:
        if cache is None:
            return np.zeros((d_pooled.shape[0], 0, self.dim), dtype=d_pooled.dtype)
        embeddings, mask, weights, c_hidden, c_score = cache
        d_emb = weights[..., None] * d_pooled[:, None, :]
        d_w = np.einsum("bkd,bd->bk", embeddings, d_pooled)
        d_scores = weights * (d_w - np.sum(weights * d_w, axis=-1, keepdims=True))
        d_scores = np.where(mask, d_scores, 0.0)
        d_h = self.score_layer.backward(c_score, d_scores[..., None].astype(c_score[1].dtype))
        return d_emb + self.hidden_layer.backward(c_hidden, d_h)


def attention_pool(pool: AttentionPool, neighbor_embeddings: np.ndarray,
                   mask: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Pool one sequence (K, D) or a batch (B, K, D); empty input gives a zero vector"""
    e = np.asarray(neighbor_embeddings)
    single = e.ndim == 2
    if single:
        e = e[None]
        mask = None if mask is None else np.asarray(mask)[None]
    pooled, weights, _ = pool.forward(e, mask)
    return (pooled[0], weights[0]) if single else (pooled, weights)


class AttentionNetwork:
    """
    Self embedding, neighbor embedding conditioned on the self embedding, attention
    pooling, then three dense layers on the concatenated (self, pooled) vector.
    """

    def __init__(self, store: ParamStore, name: str, out_dim: int, self_dim: int, neighbor_dim: int,
                 hidden: int = 128, score_hidden: int = 64, activation: str = "relu",
                 rng: Optional[np.random.Generator] = None, zero_output: bool = False,
                 output_scale: float = 1.0):
        rng = rng or np.random.default_rng(0)
        self.store = store
        self.name = name
        self.hidden = hidden
        self.self_dim = self_dim
        self.neighbor_dim = neighbor_dim
        self.out_dim = out_dim
        self.self_embed = DenseLayer(store, f"{name}/self_embed", self_dim, hidden, activation, rng)
        self.neighbor_embed = DenseLayer(store, f"{name}/neighbor_embed", neighbor_dim + hidden, hidden,
                                         activation, rng)
        self.pool = AttentionPool(store, f"{name}/pool", hidden, score_hidden, rng, activation)
        self.head = [
            DenseLayer(store, f"{name}/head0", 2 * hidden, hidden, activation, rng),
            DenseLayer(store, f"{name}/head1", hidden, hidden, activation, rng),
            DenseLayer(store, f"{name}/head2", hidden, out_dim, "identity", rng,
                       init_scale=output_scale, zero=zero_output),
        ]

    def forward(self, self_x: np.ndarray, neighbors: np.ndarray, mask: Optional[np.ndarray] = None):
        """Returns (out (B, out_dim), cache)"""
        dtype = self.store.dtype
        self_x = np.asarray(self_x, dtype=dtype)
        neighbors = np.asarray(neighbors, dtype=dtype)
        if self_x.ndim != 2 or neighbors.ndim != 3 or neighbors.shape[0] != self_x.shape[0]:
            raise ShapeMismatchError(f"{self.name}: bad batch shapes {self_x.shape} / {neighbors.shape}")
        batch, k = neighbors.shape[:2]
        if mask is None:
            mask = np.ones((batch, k), dtype=bool)

        e_self, c_self = self.self_embed.forward(self_x)
        tiled = np.broadcast_to(e_self[:, None, :], (batch, k, self.hidden))
        n_in = np.concatenate([neighbors, tiled], axis=-1)
        e_nb, c_nb = self.neighbor_embed.forward(n_in)
        pooled, weights, c_pool = self.pool.forward(e_nb, mask)

        h = np.concatenate([e_self, pooled], axis=-1)
        c_head = []
        for layer in self.head:
            h, c = layer.forward(h)
            c_head.append(c)
        return h, (c_self, c_nb, c_pool, c_head, weights)

    def backward(self, cache, d_out: np.ndarray) -> None:
        """Accumulate parameter gradients for d(loss)/d(out)"""
        c_self, c_nb, c_pool, c_head, _ = cache
        d = np.asarray(d_out, dtype=self.store.dtype)
        for layer, c in zip(reversed(self.head), reversed(c_head)):
            d = layer.backward(c, d)
        d_self = d[:, :self.hidden]
        d_emb = self.pool.backward(c_pool, d[:, self.hidden:])
        d_nin = self.neighbor_embed.backward(c_nb, d_emb)
        d_self = d_self + d_nin[..., self.neighbor_dim:].sum(axis=1)
        self.self_embed.backward(c_self, d_self)

    def layers(self) -> List[DenseLayer]:
        return [self.self_embed, self.neighbor_embed, self.pool.hidden_layer, self.pool.score_layer, *self.head]


def gaussian_head(h: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Split a (B, 2d) output into mean and log_std, clamped to [LOG_STD_MIN, LOG_STD_MAX]"""
    out = np.asarray(h, dtype=np.float64)
    half = out.shape[-1] // 2
    return out[..., :half], np.clip(out[..., half:], LOG_STD_MIN, LOG_STD_MAX)


def log_std_pass_mask(h: np.ndarray) -> np.ndarray:
    """1 where the raw log_std output is inside the clamp (gradient passes), 0 elsewhere"""
    out = np.asarray(h, dtype=np.float64)
    raw = out[..., out.shape[-1] // 2:]
    return ((raw >= LOG_STD_MIN) & (raw <= LOG_STD_MAX)).astype(np.float64)


def gaussian_log_prob(mean: np.ndarray, log_std: np.ndarray, a: np.ndarray) -> np.ndarray:
    z = (np.asarray(a, dtype=np.float64) - mean) * np.exp(-log_std)
    return -np.sum(0.5 * z * z + log_std + 0.5 * LOG_2PI, axis=-1)


def gaussian_entropy(log_std: np.ndarray) -> np.ndarray:
    return np.sum(0.5 + 0.5 * LOG_2PI + log_std, axis=-1)


def gaussian_log_prob_grad(mean: np.ndarray, log_std: np.ndarray, a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(d log_prob / d mean, d log_prob / d log_std)"""
    inv_var = np.exp(-2.0 * log_std)
    diff = np.asarray(a, dtype=np.float64) - mean
    return diff * inv_var, diff * diff * inv_var - 1.0


def gaussian_sample(mean: np.ndarray, log_std: np.ndarray, rng: Optional[np.random.Generator] = None,
                    deterministic: bool = False) -> np.ndarray:
    if deterministic:
        return np.array(mean, dtype=np.float64)
    rng = rng or np.random.default_rng()
    return mean + np.exp(log_std) * rng.standard_normal(np.shape(mean))


def linear_lr(lr0: float, step: int, total_steps: int) -> float:
    """lr0 decayed linearly to 0 at total_steps"""
    if total_steps <= 0:
        return lr0
    return lr0 * max(0.0, 1.0 - step / total_steps)


def optimizer_step(store: ParamStore, lr: float, betas: Tuple[float, float] = (0.9, 0.999),
                   eps: float = 1e-8) -> None:
    """One Adam update from the gradients currently in the store"""
    for name, g in store.grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingDivergenceError(f"non-finite gradient in {name}")
    b1, b2 = betas
    store.t += 1
    c1 = 1.0 - b1 ** store.t
    c2 = 1.0 - b2 ** store.t
    for name, p in store.params.items():
        g = store.grads[name]
        m = store.m[name]
        v = store.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.dtype)


class AdamOptimizer:
    """Adam with a linearly decaying learning rate"""

    def __init__(self, store: ParamStore, lr0: float = 3e-4, total_steps: int = 300_000,
                 betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.store = store
        self.lr0 = lr0
        self.total_steps = total_steps
        self.betas = betas
        self.eps = eps

    def lr_at(self, step: int) -> float:
        return linear_lr(self.lr0, step, self.total_steps)

    def step(self, global_step: int) -> float:
        lr = self.lr_at(global_step)
        optimizer_step(self.store, lr, self.betas, self.eps)
        return lr


def gradient_check(network, inputs: Sequence[np.ndarray],
                   objective: Callable[[np.ndarray], Tuple[float, np.ndarray]], h: float = 1e-3) -> float:
    """
    Compare reverse-mode gradients with central finite differences on every parameter.

    Args:
        network: object with ``store``, ``forward(*inputs) -> (out, cache)`` and ``backward(cache, d_out)``
        objective: maps the network output to (scalar loss, d loss / d out)

    Returns:
        float: max over parameter tensors of |analytic - numeric| / (|analytic| + |numeric|)
    """
    store = network.store
    if store.dtype != np.float64:
        raise NetworkError("gradient checks need a float64 parameter store")

    store.zero_grad()
    out, cache = network.forward(*inputs)
    _, d_out = objective(out)
    network.backward(cache, d_out)
    analytic = {name: g.copy() for name, g in store.grads.items()}

    def loss_at() -> float:
        value, _ = objective(network.forward(*inputs)[0])
        return float(value)

    worst = 0.0
    for name, p in store.params.items():
        numeric = np.zeros_like(p)
        flat = p.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            plus = loss_at()
            flat[k] = orig - h
            minus = loss_at()
            flat[k] = orig
            numeric.reshape(-1)[k] = (plus - minus) / (2.0 * h)
        denom = np.linalg.norm(analytic[name]) + np.linalg.norm(numeric)
        if denom > 0:
            worst = max(worst, float(np.linalg.norm(analytic[name] - numeric) / denom))
    logger.debug(f"Gradient check over {store.count()} parameters: max relative error {worst:.3e}")
    return worst
