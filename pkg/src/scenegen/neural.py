"""Dense-network numerics: tanh MLPs with analytic gradients, softmax
cross-entropy, Gaussian init, Adam, and finite-difference checking.

Everything runs in float64.  Forward passes accept either a single vector
or a batch (rows = samples); gradients for the weights accumulate into a
parallel gradient store so many calls can share one update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class LayerParams:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray   # (out,)


@dataclass
class Mlp:
    """Stack of fully-connected tanh layers (every layer, output included)."""
    layers: list[LayerParams]

    @property
    def in_dim(self) -> int:
        return self.layers[0].weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weights.shape[0]

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Returns (output, cache of layer activations including the input)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.in_dim:
            raise ValueError(f"input dim {x.shape[-1]} != {self.in_dim}")
        cache = [x]
        for layer in self.layers:
            x = np.tanh(x @ layer.weights.T + layer.biases)
            cache.append(x)
        return x, cache

    def backward(self, cache: list[np.ndarray], grad_y: np.ndarray,
                 grads: list[LayerParams]) -> np.ndarray:
        """Accumulates parameter grads into ``grads``; returns grad wrt input."""
        g = np.asarray(grad_y, dtype=float)
        for idx in range(len(self.layers) - 1, -1, -1):
            layer, gl = self.layers[idx], grads[idx]
            act, inp = cache[idx + 1], cache[idx]
            g = g * (1.0 - act * act)
            if g.ndim == 1:
                gl.weights += np.outer(g, inp)
                gl.biases += g
            else:
                gl.weights += g.T @ inp
                gl.biases += g.sum(axis=0)
            g = g @ layer.weights
        return g

    def zero_grads(self) -> list[LayerParams]:
        return [LayerParams(np.zeros_like(l.weights), np.zeros_like(l.biases))
                for l in self.layers]

    def param_arrays(self) -> list[np.ndarray]:
        out = []
        for l in self.layers:
            out.extend([l.weights, l.biases])
        return out


@dataclass
class Linear:
    """Affine layer without activation (VAE heads, classifier logits)."""
    weights: np.ndarray
    biases: np.ndarray

    def forward(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.weights.T + self.biases

    def backward(self, x: np.ndarray, grad_y: np.ndarray,
                 grads: "Linear") -> np.ndarray:
        g = np.asarray(grad_y, dtype=float)
        if g.ndim == 1:
            grads.weights += np.outer(g, x)
            grads.biases += g
        else:
            grads.weights += g.T @ x
            grads.biases += g.sum(axis=0)
        return g @ self.weights

    def zero_grads(self) -> "Linear":
        return Linear(np.zeros_like(self.weights), np.zeros_like(self.biases))

    def param_arrays(self) -> list[np.ndarray]:
        return [self.weights, self.biases]


def init_linear(in_dim: int, out_dim: int, rng: np.random.Generator,
                scale: float = 0.03) -> Linear:
    return Linear(weights=rng.normal(0.0, scale, size=(out_dim, in_dim)),
                  biases=rng.normal(0.0, scale, size=out_dim))


def init_mlp(dims: list[int], rng: np.random.Generator, scale: float = 0.03) -> Mlp:
    """Gaussian(0, scale^2) weights/biases for a chain of layer dims."""
    if any(d <= 0 for d in dims) or len(dims) < 2:
        raise ValueError(f"bad layer dims {dims}")
    layers = [LayerParams(weights=rng.normal(0.0, scale, size=(o, i)),
                          biases=rng.normal(0.0, scale, size=o))
              for i, o in zip(dims[:-1], dims[1:])]
    return Mlp(layers=layers)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    """(loss, grad wrt logits) for one sample."""
    if not 0 <= label < logits.shape[-1]:
        raise ValueError(f"label {label} out of range")
    p = softmax(logits)
    loss = -math.log(max(p[label], 1e-300))
    grad = p.copy()
    grad[label] -= 1.0
    return loss, grad


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(state: AdamState, params: list[np.ndarray],
              grads: list[np.ndarray]) -> None:
    """In-place Adam update with bias correction."""
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(params) != len(grads) or any(p.shape != g.shape
                                        for p, g in zip(params, grads)):
        raise ValueError("parameter/gradient shape mismatch")
    state.step += 1
    b1t = 1.0 - state.beta1 ** state.step
    b2t = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / b1t) / (np.sqrt(v / b2t) + state.eps)


def gradient_check(f, x: np.ndarray, analytic_grad: np.ndarray,
                   eps: float = 1e-6) -> float:
    """Max relative error of central differences vs the analytic gradient.

    ``f`` maps a flat vector to a scalar.
    """
    x = np.asarray(x, dtype=float)
    num = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += eps
        xm[i] -= eps
        num[i] = (f(xp) - f(xm)) / (2.0 * eps)
    denom = np.maximum(np.abs(num) + np.abs(analytic_grad), 1e-8)
    return float(np.max(np.abs(num - analytic_grad) / denom))
