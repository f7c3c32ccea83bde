"""From-scratch MLP function approximators with exact reverse-mode gradients,
a diagonal-Gaussian policy head, and Adam.

Parameters are plain lists of float64 arrays so the optimizer and the
checkpoint format stay trivial.  Hidden layers are rectified-linear with the
subgradient at the kink taken as 0; outputs are linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch

LOG_TWO_PI = math.log(2.0 * math.pi)


@dataclass
class MlpParams:
    """Weight matrices (in x out) and bias vectors for each affine layer."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    @staticmethod
    def from_arrays(arrays: list[np.ndarray]) -> "MlpParams":
        return MlpParams(weights=list(arrays[0::2]), biases=list(arrays[1::2]))

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def init_mlp(sizes: tuple[int, ...], rng: np.random.Generator) -> MlpParams:
    """Fan-in-scaled uniform weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights=weights, biases=biases)


def mlp_forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Forward pass; accepts (N, in) or (in,) input.

    Returns (output, cache); the cache holds each layer's input and
    pre-activation for the matching backward pass.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != params.weights[0].shape[0]:
        raise ShapeMismatch(
            f"input width {x.shape[1]} != network input {params.weights[0].shape[0]}")
    cache = []
    act = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        pre = act @ w + b
        cache.append((act, pre))
        act = pre if i == last else np.maximum(pre, 0.0)
    return (act[0] if single else act), cache


def mlp_backward(params: MlpParams, cache: list, grad_out: np.ndarray) -> tuple[MlpParams, np.ndarray]:
    """Exact gradients of a scalar objective given d(objective)/d(output).

    Returns (parameter gradients shaped like params, gradient wrt the input).
    """
    grad = np.asarray(grad_out, dtype=float)
    single = grad.ndim == 1
    if single:
        grad = grad[None, :]
    if len(cache) != len(params.weights):
        raise ShapeMismatch("cache does not match the network depth")
    if grad.shape[1] != params.weights[-1].shape[1]:
        raise ShapeMismatch(
            f"grad width {grad.shape[1]} != network output {params.weights[-1].shape[1]}")
    g_w = [None] * len(params.weights)
    g_b = [None] * len(params.biases)
    for i in range(len(params.weights) - 1, -1, -1):
        act_in, pre = cache[i]
        if i != len(params.weights) - 1:
            grad = grad * (pre > 0.0)
        g_w[i] = act_in.T @ grad
        g_b[i] = grad.sum(axis=0)
        grad = grad @ params.weights[i].T
    return MlpParams(weights=g_w, biases=g_b), (grad[0] if single else grad)


# --- diagonal-Gaussian policy -------------------------------------------------

@dataclass
class PolicyParams:
    """Mean network plus a state-independent log standard deviation per action."""

    mlp: MlpParams
    log_std: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        return self.mlp.arrays() + [self.log_std]

    @staticmethod
    def from_arrays(arrays: list[np.ndarray]) -> "PolicyParams":
        return PolicyParams(mlp=MlpParams.from_arrays(arrays[:-1]), log_std=arrays[-1])

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.mlp.copy(), self.log_std.copy())


def init_policy(obs_dim: int, hidden: tuple[int, ...], act_dim: int,
                rng: np.random.Generator, initial_std: float = 0.5) -> PolicyParams:
    mlp = init_mlp((obs_dim,) + hidden + (act_dim,), rng)
    return PolicyParams(mlp=mlp, log_std=np.full(act_dim, math.log(initial_std)))


def init_value(state_dim: int, hidden: tuple[int, ...], rng: np.random.Generator) -> MlpParams:
    return init_mlp((state_dim,) + hidden + (1,), rng)


def gaussian_log_prob(actions: np.ndarray, means: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    std = np.exp(log_std)
    z = (actions - means) / std
    return -0.5 * (z * z).sum(axis=-1) - log_std.sum() - 0.5 * actions.shape[-1] * LOG_TWO_PI


def gaussian_entropy(log_std: np.ndarray) -> float:
    n = log_std.shape[0]
    return float(log_std.sum() + 0.5 * n * (1.0 + LOG_TWO_PI))


def policy_sample(theta: PolicyParams, obs: np.ndarray,
                  rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Sample an action and its exact log-density.

    The caller clamps the action at the environment boundary; the stored
    log-probability belongs to the unclamped sample.
    """
    mean, _ = mlp_forward(theta.mlp, obs)
    std = np.exp(theta.log_std)
    action = mean + std * rng.standard_normal(mean.shape[0])
    logp = float(gaussian_log_prob(action[None, :], mean[None, :], theta.log_std)[0])
    return action, logp


def policy_mean(theta: PolicyParams, obs: np.ndarray) -> np.ndarray:
    mean, _ = mlp_forward(theta.mlp, obs)
    return mean


# --- Adam ---------------------------------------------------------------------

@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @staticmethod
    def like(arrays: list[np.ndarray]) -> "AdamState":
        return AdamState(m=[np.zeros_like(a) for a in arrays],
                         v=[np.zeros_like(a) for a in arrays], t=0)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update; functional, returns new arrays."""
    if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise ShapeMismatch("parameter and gradient structures differ")
    t = state.t + 1
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        new_m.append(m)
        new_v.append(v)
        new_p.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
    return new_p, AdamState(m=new_m, v=new_v, t=t)


def clip_grad_norm(grads: list[np.ndarray], max_norm: float) -> tuple[list[np.ndarray], float]:
    """Scale the gradient list to a global norm of at most max_norm."""
    total = math.sqrt(sum(float((g * g).sum()) for g in grads))
    if max_norm <= 0 or total <= max_norm:
        return grads, total
    scale = max_norm / (total + 1e-12)
    return [g * scale for g in grads], total
