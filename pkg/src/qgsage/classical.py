"""Classical baseline: a small dense network with hand-rolled backprop.

tanh hidden layers, identity output. The backward pass returns the
input gradient alongside the weight gradients because the aggregation
pipeline threads each node's output into the next node's input vector
and needs to push derivatives through that link.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MLP:
    sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def n_layers(self) -> int:
        return len(self.weights)


def init_mlp(sizes: tuple[int, ...], seed: int) -> MLP:
    """Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases."""
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 2:
        raise ValueError(f"need input and output sizes, got {sizes}")
    if any(s < 1 for s in sizes):
        raise ValueError(f"layer sizes must be positive, got {sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MLP(sizes, weights, biases)


def _forward_cached(mlp: MLP, x: np.ndarray) -> list[np.ndarray]:
    """Activations per layer, input first; hidden layers tanh, last linear."""
    acts = [x]
    h = x
    last = mlp.n_layers - 1
    for l, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = w @ h + b
        h = z if l == last else np.tanh(z)
        acts.append(h)
    return acts


def mlp_forward(mlp: MLP, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (mlp.sizes[0],):
        raise ValueError(f"input of shape {x.shape}, expected ({mlp.sizes[0]},)")
    out = _forward_cached(mlp, x)[-1]
    return float(out[0])


def mlp_backward(
    mlp: MLP, x, upstream: float = 1.0
) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Gradients of upstream * output w.r.t. weights, biases, and input."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (mlp.sizes[0],):
        raise ValueError(f"input of shape {x.shape}, expected ({mlp.sizes[0]},)")
    if mlp.sizes[-1] != 1:
        raise ValueError(f"backward assumes a scalar head, got {mlp.sizes[-1]}")
    acts = _forward_cached(mlp, x)
    grads_w = [np.empty_like(w) for w in mlp.weights]
    grads_b = [np.empty_like(b) for b in mlp.biases]
    delta = np.array([float(upstream)])
    for l in range(mlp.n_layers - 1, -1, -1):
        grads_w[l] = np.outer(delta, acts[l])
        grads_b[l] = delta.copy()
        delta = mlp.weights[l].T @ delta
        if l > 0:
            delta = delta * (1.0 - acts[l] ** 2)
    return grads_w, grads_b, delta


def param_count(mlp: MLP) -> int:
    return sum(w.size for w in mlp.weights) + sum(b.size for b in mlp.biases)


def flat_params(mlp: MLP) -> np.ndarray:
    chunks = []
    for w, b in zip(mlp.weights, mlp.biases):
        chunks.append(w.ravel())
        chunks.append(b)
    return np.concatenate(chunks)


def set_flat_params(mlp: MLP, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (param_count(mlp),):
        raise ValueError(f"got {values.shape}, expected ({param_count(mlp)},)")
    cursor = 0
    for l in range(mlp.n_layers):
        w = mlp.weights[l]
        mlp.weights[l] = values[cursor : cursor + w.size].reshape(w.shape).copy()
        cursor += w.size
        b = mlp.biases[l]
        mlp.biases[l] = values[cursor : cursor + b.size].copy()
        cursor += b.size


def flat_grads(grads_w: list[np.ndarray], grads_b: list[np.ndarray]) -> np.ndarray:
    chunks = []
    for w, b in zip(grads_w, grads_b):
        chunks.append(w.ravel())
        chunks.append(b)
    return np.concatenate(chunks)


@dataclass(frozen=True)
class BaselineConfig:
    """Dense baseline shape for a benchmark case.

    reported_params is the headline figure the benchmark tables quote
    for these baselines; realized_params is what the stated layer
    sizes actually contain. The realized count is what the code builds
    and both are surfaced in run summaries.
    """

    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int
    reported_params: int

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.output_dim)

    @property
    def realized_params(self) -> int:
        total = 0
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            total += fan_in * fan_out + fan_out
        return total


def baseline_config(case: int) -> BaselineConfig:
    if case == 1:
        return BaselineConfig(8, (9, 2), 1, reported_params=284)
    if case == 2:
        return BaselineConfig(8, (8, 4), 1, reported_params=305)
    raise ValueError(f"unknown benchmark case {case}")
