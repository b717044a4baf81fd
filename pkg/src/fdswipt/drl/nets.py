"""Feed-forward networks with manual backpropagation and Adam.

Everything is plain float64 numpy: the networks here are a few hundred
units wide and the whole training loop must be bit-reproducible from one
seed, which rules nothing in and keeps dependencies at zero.
"""

from dataclasses import dataclass, field

import numpy as np

from ..numerics import ContractError

_ACTIVATIONS = ("relu", "sigmoid", "linear")


def _act(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    return z


def _act_grad(z, out, kind):
    if kind == "relu":
        return (z > 0.0).astype(float)
    if kind == "sigmoid":
        return out * (1.0 - out)
    return np.ones_like(z)


class Mlp:
    """Fully connected network; parameters live in ``weights``/``biases``.

    ``sizes`` lists the layer widths including input and output;
    ``activations`` names one activation per weight layer.
    """

    def __init__(self, sizes, activations, rng):
        if len(activations) != len(sizes) - 1:
            raise ContractError("need one activation per weight layer")
        if any(a not in _ACTIVATIONS for a in activations):
            raise ContractError(f"activations must be among {_ACTIVATIONS}")
        self.sizes = list(sizes)
        self.activations = list(activations)
        self.weights = []
        self.biases = []
        for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
            # He scaling for relu layers, Xavier-ish for the rest.
            std = np.sqrt(2.0 / fan_in) if act == "relu" else np.sqrt(1.0 / fan_in)
            self.weights.append(rng.standard_normal((fan_in, fan_out)) * std)
            self.biases.append(np.zeros(fan_out))

    def forward(self, x):
        """Return (output, cache); ``x`` is (batch, in_dim)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inputs = [x]
        pre = []
        out = x
        for w, b, act in zip(self.weights, self.biases, self.activations):
            z = out @ w + b
            out = _act(z, act)
            pre.append(z)
            inputs.append(out)
        return out, (inputs, pre)

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, grad_out, cache):
        """Backpropagate ``grad_out`` (batch, out_dim).

        Returns (param_grads, grad_input) where param_grads pairs up with
        :meth:`params` and grad_input is d(loss)/d(network input).
        """
        inputs, pre = cache
        grad = np.atleast_2d(np.asarray(grad_out, dtype=float))
        w_grads = [None] * len(self.weights)
        b_grads = [None] * len(self.biases)
        for layer in reversed(range(len(self.weights))):
            delta = grad * _act_grad(pre[layer], inputs[layer + 1], self.activations[layer])
            w_grads[layer] = inputs[layer].T @ delta
            b_grads[layer] = delta.sum(axis=0)
            grad = delta @ self.weights[layer].T
        grads = []
        for wg, bg in zip(w_grads, b_grads):
            grads.extend((wg, bg))
        return grads, grad

    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy_from(self, other):
        for mine, theirs in zip(self.params(), other.params()):
            mine[...] = theirs

    def clone(self):
        twin = Mlp.__new__(Mlp)
        twin.sizes = list(self.sizes)
        twin.activations = list(self.activations)
        twin.weights = [w.copy() for w in self.weights]
        twin.biases = [b.copy() for b in self.biases]
        return twin


class Adam:
    """Adam with bias correction; state is kept per parameter array."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        self.t += 1
        lr_t = self.lr * np.sqrt(1.0 - self.beta2 ** self.t) / (1.0 - self.beta1 ** self.t)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= lr_t * m / (np.sqrt(v) + self.eps)


def polyak_update(target, online, tau):
    """theta' <- (1 - tau) theta' + tau theta, applied in place."""
    if not 0.0 < tau <= 1.0:
        raise ContractError("tau must lie in (0, 1]")
    for t_param, o_param in zip(target.params(), online.params()):
        t_param *= 1.0 - tau
        t_param += tau * o_param


@dataclass
class RunningNorm:
    """Welford running mean/variance used to standardize state features."""

    dim: int
    count: float = 0.0
    mean: np.ndarray = None
    m2: np.ndarray = None

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.dim)
        if self.m2 is None:
            self.m2 = np.zeros(self.dim)

    def update(self, x):
        x = np.asarray(x, dtype=float)
        self.count += 1.0
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    @property
    def std(self):
        if self.count < 2:
            return np.ones(self.dim)
        return np.sqrt(np.maximum(self.m2 / self.count, 1e-12))

    def transform(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std
