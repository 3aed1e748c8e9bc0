"""Dense feed-forward networks with hand-written forward/backward passes.

Everything trainable in this package (data encoder, class/domain classifiers,
semantic refiner, generator, critic) is a small MLP built from these pieces.
There is no autodiff tape: gradients are derived per operation, which keeps
the two places that need gradients-of-gradients (the critic's gradient-norm
penalty and the ridge-solve path in the refiner) explicit and testable.

Training runs in float32; float64 is used by the finite-difference checks.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .matrixio import read_matrix_stream, write_matrix_stream

ACTIVATIONS = ("relu", "tanh", "identity", "softmax")


def _act_forward(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "identity":
        return z
    if name == "softmax":
        shifted = z - z.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)
    raise ValueError(f"unknown activation {name!r}")


def _act_backward(name, z, a, grad_a):
    """Gradient wrt pre-activation z, given activation output a and upstream grad."""
    if name == "relu":
        return grad_a * (z > 0)
    if name == "tanh":
        return grad_a * (1.0 - a * a)
    if name == "identity":
        return grad_a
    if name == "softmax":
        inner = (grad_a * a).sum(axis=1, keepdims=True)
        return a * (grad_a - inner)
    raise ValueError(f"unknown activation {name!r}")


def _act_prime(name, z, a):
    """Elementwise first derivative (activations with a diagonal Jacobian only)."""
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - a * a
    if name == "identity":
        return np.ones_like(z)
    raise ValueError(f"activation {name!r} has no elementwise derivative")


def _act_second(name, z, a):
    """Elementwise second derivative; relu is 0 almost everywhere."""
    if name == "tanh":
        return -2.0 * a * (1.0 - a * a)
    if name in ("relu", "identity"):
        return np.zeros_like(z)
    raise ValueError(f"activation {name!r} has no elementwise second derivative")


@dataclass
class Layer:
    weights: np.ndarray  # [n_in, n_out]
    bias: np.ndarray     # [n_out]
    activation: str


@dataclass
class ForwardCache:
    """Intermediates of one forward() call, consumed by backward()."""

    net: "FeedForwardNet"
    x: np.ndarray
    pre: list = field(default_factory=list)   # z_k per layer
    post: list = field(default_factory=list)  # a_k per layer


class FeedForwardNet:
    """A stack of affine layers with fixed activations.

    Layer dimensions must chain, and softmax may only be the final
    activation. The net owns its parameter arrays; parameters() exposes them
    in a fixed order (w0, b0, w1, b1, ...) shared with gradients and the
    Adam state.
    """

    def __init__(self, layers, dtype=np.float32):
        if not layers:
            raise ValueError("a network needs at least one layer")
        self.dtype = np.dtype(dtype)
        self.layers = []
        for i, layer in enumerate(layers):
            w = np.asarray(layer.weights, dtype=self.dtype)
            b = np.asarray(layer.bias, dtype=self.dtype)
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {i}: weights {w.shape} / bias {b.shape} do not match")
            if layer.activation not in ACTIVATIONS:
                raise ValueError(f"layer {i}: unknown activation {layer.activation!r}")
            if layer.activation == "softmax" and i != len(layers) - 1:
                raise ValueError("softmax is only allowed on the final layer")
            if i > 0 and w.shape[0] != self.layers[i - 1].weights.shape[1]:
                raise ValueError(
                    f"layer {i}: input dim {w.shape[0]} does not chain with "
                    f"previous output dim {self.layers[i - 1].weights.shape[1]}"
                )
            self.layers.append(Layer(w, b, layer.activation))

    @classmethod
    def create(cls, dims, activations, rng, dtype=np.float32):
        """Initialize weights uniform in ±1/sqrt(fan_in), biases zero.

        dims = [n_in, h1, ..., n_out]; activations has len(dims)-1 entries.
        """
        if len(activations) != len(dims) - 1:
            raise ValueError("need one activation per layer")
        layers = []
        for n_in, n_out, act in zip(dims[:-1], dims[1:], activations):
            bound = 1.0 / np.sqrt(n_in)
            w = rng.uniform(-bound, bound, size=(n_in, n_out))
            layers.append(Layer(w, np.zeros(n_out), act))
        return cls(layers, dtype=dtype)

    @property
    def n_in(self):
        return self.layers[0].weights.shape[0]

    @property
    def n_out(self):
        return self.layers[-1].weights.shape[1]

    def parameters(self):
        """Parameter arrays in fixed (w, b) per-layer order; mutated in place by the optimizer."""
        params = []
        for layer in self.layers:
            params.append(layer.weights)
            params.append(layer.bias)
        return params

    def astype(self, dtype):
        return FeedForwardNet(
            [Layer(l.weights.copy(), l.bias.copy(), l.activation) for l in self.layers],
            dtype=dtype,
        )

    def copy(self):
        return self.astype(self.dtype)

    def forward(self, x):
        """Run the net on a batch [n, n_in]; returns (output, cache)."""
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ValueError(f"batch shape {x.shape} does not match input dim {self.n_in}")
        cache = ForwardCache(net=self, x=x)
        a = x
        for layer in self.layers:
            z = a @ layer.weights + layer.bias
            a = _act_forward(layer.activation, z)
            cache.pre.append(z)
            cache.post.append(a)
        return a, cache

    def backward(self, cache, out_grad):
        """Backprop out_grad [n, n_out] through a cached forward pass.

        Returns (grads, in_grad) with grads in parameters() order.
        """
        if cache.net is not self:
            raise ValueError("cache does not belong to this network")
        out_grad = np.asarray(out_grad, dtype=self.dtype)
        if out_grad.shape != cache.post[-1].shape:
            raise ValueError(
                f"out_grad shape {out_grad.shape} does not match output {cache.post[-1].shape}"
            )
        grads = [None] * (2 * len(self.layers))
        g = out_grad
        for k in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[k]
            gz = _act_backward(layer.activation, cache.pre[k], cache.post[k], g)
            a_prev = cache.x if k == 0 else cache.post[k - 1]
            grads[2 * k] = a_prev.T @ gz
            grads[2 * k + 1] = gz.sum(axis=0)
            g = gz @ layer.weights.T
        return grads, g


def zero_grads(net):
    return [np.zeros_like(p) for p in net.parameters()]


def input_gradient(net, x):
    """Per-sample gradient of a scalar-output net wrt its input, [n, n_in]."""
    if net.n_out != 1:
        raise ValueError("input_gradient expects a scalar-output network")
    out, cache = net.forward(x)
    _, g_in = net.backward(cache, np.ones_like(out))
    return g_in


def grad_norm_penalty(net, x, norm_cols=None):
    """Mean squared deviation of the input-gradient norm from 1, with its
    gradient wrt the net's parameters.

    For a scalar-output net D, computes p = mean_b (||g_b|| - 1)^2 where
    g_b = d D(x_b) / d x_b restricted to the first `norm_cols` input columns
    (all columns if None). The parameter gradient backpropagates through the
    gradient computation itself, so activations must have an elementwise
    second derivative (tanh/identity/relu; relu contributes zero curvature).

    Returns (penalty, grads) with grads in parameters() order.
    """
    if net.n_out != 1:
        raise ValueError("penalty expects a scalar-output network")
    x = np.asarray(x, dtype=net.dtype)
    n = x.shape[0]
    n_layers = len(net.layers)
    if norm_cols is None:
        norm_cols = net.n_in

    # forward chain
    pre, post = [], []
    a = x
    for layer in net.layers:
        z = a @ layer.weights + layer.bias
        a = _act_forward(layer.activation, z)
        pre.append(z)
        post.append(a)

    # reverse chain computing per-sample input gradients; deltas[k] = dD/d a_k
    prime = [_act_prime(l.activation, pre[k], post[k]) for k, l in enumerate(net.layers)]
    deltas = [None] * (n_layers + 1)
    es = [None] * n_layers
    deltas[n_layers] = np.ones((n, 1), dtype=net.dtype)
    for k in range(n_layers - 1, -1, -1):
        es[k] = deltas[k + 1] * prime[k]
        deltas[k] = es[k] @ net.layers[k].weights.T
    g = deltas[0]

    norms = np.sqrt((g[:, :norm_cols] ** 2).sum(axis=1))
    penalty = float(((norms - 1.0) ** 2).mean())

    # d penalty / d g; rows with zero norm get zero gradient (measure-zero kink)
    safe = np.where(norms > 0, norms, 1.0)
    coef = np.where(norms > 0, 2.0 * (norms - 1.0) / (n * safe), 0.0)
    g_bar = np.zeros_like(g)
    g_bar[:, :norm_cols] = coef[:, None] * g[:, :norm_cols]

    grads = [np.zeros_like(p) for p in _net_params(net)]
    z_bar = [np.zeros_like(z) for z in pre]

    # reverse the gradient computation itself (upward over layers)
    d_bar = g_bar
    for k in range(n_layers):
        layer = net.layers[k]
        e_bar = d_bar @ layer.weights
        grads[2 * k] += d_bar.T @ es[k]
        z_bar[k] += e_bar * deltas[k + 1] * _act_second(layer.activation, pre[k], post[k])
        d_bar = e_bar * prime[k]

    # reverse the forward chain with the accumulated curvature terms
    a_bar = None
    for k in range(n_layers - 1, -1, -1):
        layer = net.layers[k]
        zb = z_bar[k]
        if a_bar is not None:
            zb = zb + a_bar * prime[k]
        a_prev = x if k == 0 else post[k - 1]
        grads[2 * k] += a_prev.T @ zb
        grads[2 * k + 1] += zb.sum(axis=0)
        a_bar = zb @ layer.weights.T

    return penalty, grads


def _net_params(net):
    return net.parameters()


def softmax_with_temperature(logits, temperature):
    """Row-wise softmax(logits / T); rows sum to 1."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = np.asarray(logits, dtype=np.result_type(logits, np.float32)) / temperature
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy of integer labels under softmax(logits).

    Returns (loss, grad_logits); grad is (softmax - onehot) / batch.
    """
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    n = logits.shape[0]
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match batch {n}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    loss = float(-log_p[np.arange(n), labels].mean())
    grad = np.exp(log_p)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad.astype(logits.dtype)


@dataclass
class AdamState:
    """Adam moments for one parameter list; shapes mirror the parameters."""

    m: list
    v: list
    step: int = 0
    learning_rate: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def adam_init(params, learning_rate, beta1=0.9, beta2=0.999, epsilon=1e-8):
    return AdamState(
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
    )


def adam_step(params, grads, state):
    """One Adam update with bias correction; params and state mutate in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter/gradient/state lengths differ")
    state.step += 1
    t = state.step
    lr_t = state.learning_rate * np.sqrt(1.0 - state.beta2**t) / (1.0 - state.beta1**t)
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr_t * m / (np.sqrt(v) + state.epsilon)


def save_checkpoint(path, net):
    """Write a net as a JSON header line followed by per-layer MTX1 blocks.

    Matrices are stored as f32 (the MTX1 payload type); f64 nets are
    narrowed on save.
    """
    header = {
        "format": "ffnet-v1",
        "layers": [
            {"n_in": int(l.weights.shape[0]), "n_out": int(l.weights.shape[1]), "activation": l.activation}
            for l in net.layers
        ],
    }
    with open(path, "wb") as fp:
        fp.write(json.dumps(header).encode("utf-8"))
        fp.write(b"\n")
        for layer in net.layers:
            write_matrix_stream(fp, layer.weights)
            write_matrix_stream(fp, layer.bias.reshape(1, -1))


def load_checkpoint(path):
    with open(path, "rb") as fp:
        header = json.loads(fp.readline().decode("utf-8"))
        if header.get("format") != "ffnet-v1":
            raise ValueError(f"{path}: not a network checkpoint")
        layers = []
        for spec in header["layers"]:
            w = read_matrix_stream(fp, name=str(path))
            b = read_matrix_stream(fp, name=str(path))
            if w.shape != (spec["n_in"], spec["n_out"]) or b.shape != (1, spec["n_out"]):
                raise ValueError(f"{path}: matrix shapes disagree with header")
            layers.append(Layer(w, b[0], spec["activation"]))
    return FeedForwardNet(layers, dtype=np.float32)
