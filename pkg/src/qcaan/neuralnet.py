"""Dense feed-forward networks with manual backpropagation and Adam.

Layer sizing follows two rules derived from a latent dimension q and feature
count f: the generator widens from q by repeated doubling until it reaches f,
and the discriminator mirrors those widths in reverse down to a latent layer
of width q whose activations can be extracted ("penultimate").  A "simple"
variant collapses both stacks to single layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

ACTIVATIONS = ("relu", "sigmoid", "linear")
LOSS_KINDS = ("bce_on_labels", "gan_generator", "gan_discriminator")

_LOG_CLAMP = 1e-12


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str


@dataclass(frozen=True)
class DenseNetworkSpec:
    layers: tuple
    penultimate: int | None = None  # layer index whose output is the latent extraction point

    def __post_init__(self):
        for prev, cur in zip(self.layers, self.layers[1:]):
            if prev.out_dim != cur.in_dim:
                raise NetworkError(f"layer dims do not chain: {prev} -> {cur}")
        for layer in self.layers:
            if layer.activation not in ACTIVATIONS:
                raise NetworkError(f"unknown activation {layer.activation!r}")

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def hidden_dims(self) -> list:
        return [layer.out_dim for layer in self.layers[:-1]]


def _widening_dims(f: int, q: int, rule: str) -> list:
    """Widths between q and f: 2^k*q under the doubling rule, 2*k*q under the
    linear rule, stopping at the first width >= f."""
    dims = []
    k = 1
    while True:
        width = (2 ** k) * q if rule == "doubling" else 2 * k * q
        dims.append(width)
        if width >= f:
            return dims
        k += 1


def build_generator_spec(f: int, q: int, simple: bool = False,
                         rule: str = "doubling") -> DenseNetworkSpec:
    """Noise-to-feature generator: q -> widening relu stack -> f (relu)."""
    if f < 1 or q < 1:
        raise NetworkError("f and q must be positive")
    if rule not in ("doubling", "linear"):
        raise NetworkError(f"unknown sizing rule {rule!r}")
    if simple:
        return DenseNetworkSpec((LayerSpec(q, f, "relu"),))
    if f <= q:
        raise NetworkError(f"generator sizing needs f > q (got f={f}, q={q})")
    dims = [q] + _widening_dims(f, q, rule) + [f]
    layers = tuple(LayerSpec(a, b, "relu") for a, b in zip(dims, dims[1:]))
    return DenseNetworkSpec(layers)


def build_discriminator_spec(f: int, q: int, simple: bool = False,
                             rule: str = "doubling") -> DenseNetworkSpec:
    """Feature-to-probability discriminator: f -> narrowing relu stack ->
    latent q (relu, marked penultimate) -> 1 (sigmoid)."""
    if f < 1 or q < 1:
        raise NetworkError("f and q must be positive")
    if rule not in ("doubling", "linear"):
        raise NetworkError(f"unknown sizing rule {rule!r}")
    if simple:
        layers = (LayerSpec(f, q, "relu"), LayerSpec(q, 1, "sigmoid"))
        return DenseNetworkSpec(layers, penultimate=0)
    if f <= q:
        raise NetworkError(f"discriminator sizing needs f > q (got f={f}, q={q})")
    dims = [f] + _widening_dims(f, q, rule)[::-1] + [q]
    layers = [LayerSpec(a, b, "relu") for a, b in zip(dims, dims[1:])]
    layers.append(LayerSpec(q, 1, "sigmoid"))
    return DenseNetworkSpec(tuple(layers), penultimate=len(layers) - 2)


@dataclass
class NetParams:
    weights: list
    biases: list

    @classmethod
    def initialize(cls, spec: DenseNetworkSpec, seed: int = 0,
                   relu_bias: float = 0.1) -> "NetParams":
        # Glorot-uniform weights.  Relu layers start with a small positive
        # bias: with zero biases and [0,1]-scaled inputs a narrow layer can be
        # born dead (every unit off for every input), which freezes both
        # adversarial players permanently.  Sigmoid/linear biases stay zero.
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for layer in spec.layers:
            bound = np.sqrt(6.0 / (layer.in_dim + layer.out_dim))
            weights.append(rng.uniform(-bound, bound, size=(layer.in_dim, layer.out_dim)))
            fill = relu_bias if layer.activation == "relu" else 0.0
            biases.append(np.full(layer.out_dim, fill))
        return cls(weights, biases)

    def copy(self) -> "NetParams":
        return NetParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def _activate(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return expit(z)
    return z


def _activate_grad(z, post, kind):
    if kind == "relu":
        return (z > 0).astype(float)
    if kind == "sigmoid":
        return post * (1.0 - post)
    return np.ones_like(z)


@dataclass
class ForwardResult:
    output: np.ndarray
    penultimate: np.ndarray | None
    activations: list      # post-activation per layer
    pre_activations: list  # affine outputs per layer


def forward(spec: DenseNetworkSpec, params: NetParams, x: np.ndarray) -> ForwardResult:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != spec.input_dim:
        raise NetworkError(f"input width {x.shape[1]} != spec input dim {spec.input_dim}")
    pre, post = [], []
    h = x
    for layer, w, b in zip(spec.layers, params.weights, params.biases):
        z = h @ w + b
        h = _activate(z, layer.activation)
        pre.append(z)
        post.append(h)
    penultimate = post[spec.penultimate] if spec.penultimate is not None else None
    return ForwardResult(post[-1], penultimate, post, pre)


@dataclass
class Gradients:
    weights: list
    biases: list
    d_input: np.ndarray
    loss: float


def _bce(p, y):
    p = np.clip(p, _LOG_CLAMP, 1.0 - _LOG_CLAMP)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def backprop(spec: DenseNetworkSpec, params: NetParams, x: np.ndarray,
             loss_kind: str, targets: np.ndarray | None = None) -> Gradients:
    """Exact gradients of the requested loss with respect to every weight,
    bias, and the network input.

    bce_on_labels / gan_discriminator: binary cross-entropy against
    ``targets``.  gan_generator: the non-saturating objective
    -mean(log output), i.e. cross-entropy against all-ones.
    """
    if loss_kind not in LOSS_KINDS:
        raise NetworkError(f"unknown loss kind {loss_kind!r}")
    fwd = forward(spec, params, x)
    p = fwd.activations[-1]
    n = p.size
    if loss_kind == "gan_generator":
        y = np.ones_like(p)
    else:
        if targets is None:
            raise NetworkError(f"{loss_kind} requires targets")
        y = np.asarray(targets, dtype=float).reshape(p.shape)
    loss = _bce(p, y)

    last = spec.layers[-1].activation
    if last == "sigmoid":
        # fused sigmoid + cross-entropy gradient at the pre-activation
        delta = (p - y) / n
    else:
        p_safe = np.clip(p, _LOG_CLAMP, 1.0 - _LOG_CLAMP)
        d_p = (p_safe - y) / (p_safe * (1.0 - p_safe)) / n
        delta = d_p * _activate_grad(fwd.pre_activations[-1], p, last)

    x2d = np.atleast_2d(np.asarray(x, dtype=float))
    d_weights = [None] * len(spec.layers)
    d_biases = [None] * len(spec.layers)
    for i in range(len(spec.layers) - 1, -1, -1):
        below = fwd.activations[i - 1] if i > 0 else x2d
        d_weights[i] = below.T @ delta
        d_biases[i] = delta.sum(axis=0)
        delta = delta @ params.weights[i].T
        if i > 0:
            layer = spec.layers[i - 1]
            delta = delta * _activate_grad(fwd.pre_activations[i - 1],
                                           fwd.activations[i - 1], layer.activation)
    return Gradients(d_weights, d_biases, delta, loss)


def backprop_from_output(spec: DenseNetworkSpec, params: NetParams, x: np.ndarray,
                         upstream: np.ndarray) -> Gradients:
    """Chain an upstream dLoss/dOutput through this network (used to push the
    discriminator's input gradient into the generator)."""
    fwd = forward(spec, params, x)
    delta = np.asarray(upstream, dtype=float).reshape(fwd.output.shape)
    delta = delta * _activate_grad(fwd.pre_activations[-1], fwd.activations[-1],
                                   spec.layers[-1].activation)
    x2d = np.atleast_2d(np.asarray(x, dtype=float))
    d_weights = [None] * len(spec.layers)
    d_biases = [None] * len(spec.layers)
    for i in range(len(spec.layers) - 1, -1, -1):
        below = fwd.activations[i - 1] if i > 0 else x2d
        d_weights[i] = below.T @ delta
        d_biases[i] = delta.sum(axis=0)
        delta = delta @ params.weights[i].T
        if i > 0:
            layer = spec.layers[i - 1]
            delta = delta * _activate_grad(fwd.pre_activations[i - 1],
                                           fwd.activations[i - 1], layer.activation)
    return Gradients(d_weights, d_biases, delta, np.nan)


@dataclass
class AdamState:
    m: list
    v: list
    t: int
    lr: float
    beta1: float
    beta2: float
    eps: float

    @classmethod
    def initialize(cls, params: NetParams, lr: float = 0.001, beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        zeros = lambda ps: [np.zeros_like(p) for p in ps]
        return cls(m=zeros(params.weights) + zeros(params.biases),
                   v=zeros(params.weights) + zeros(params.biases),
                   t=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params: NetParams, grads: Gradients, state: AdamState):
    """One bias-corrected Adam update; returns fresh (params, state)."""
    flat_params = params.weights + params.biases
    flat_grads = grads.weights + grads.biases
    t = state.t + 1
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(flat_params, flat_grads, state.m, state.v):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        new_params.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    k = len(params.weights)
    return (NetParams(new_params[:k], new_params[k:]),
            AdamState(new_m, new_v, t, state.lr, state.beta1, state.beta2, state.eps))
