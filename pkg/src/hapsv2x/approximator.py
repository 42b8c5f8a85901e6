"""Dense feed-forward networks with hand-written backpropagation.

Layers compute ``x @ W + b``; hidden layers use ReLU, the output layer uses
``tanh`` (actors) or is linear (critics).  Everything is float64.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = [
    "TrainingDivergenceError",
    "Mlp",
    "GradientSet",
    "Adam",
    "Sgd",
    "make_optimizer",
    "soft_update",
    "save_mlp",
    "load_mlp",
    "dumps_mlp",
    "loads_mlp",
]

FORMAT_TAG = "MLPv1"


class TrainingDivergenceError(FloatingPointError):
    """Raised when a loss or gradient stops being finite."""


_ACTIVATIONS = ("linear", "tanh", "relu")


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _act_grad(name, z, a):
    # derivative wrt the pre-activation, given pre-activation z and output a
    if name == "relu":
        return (z > 0).astype(float)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


def _views(flat: np.ndarray, layer_dims) -> tuple[list[np.ndarray], list[np.ndarray]]:
    ws, bs, off = [], [], 0
    for d_in, d_out in zip(layer_dims[:-1], layer_dims[1:]):
        ws.append(flat[off:off + d_in * d_out].reshape(d_in, d_out))
        off += d_in * d_out
        bs.append(flat[off:off + d_out])
        off += d_out
    return ws, bs


def _flat_size(layer_dims) -> int:
    return sum(a * b + b for a, b in zip(layer_dims[:-1], layer_dims[1:]))


class GradientSet:
    """Per-layer weight and bias gradients, shape-congruent with an :class:`Mlp`.

    Backed by one flat vector laid out like the network's parameters.
    """

    def __init__(self, flat: np.ndarray, layer_dims):
        self.flat = flat
        self.layer_dims = list(layer_dims)
        self.weights, self.biases = _views(flat, layer_dims)

    @classmethod
    def zeros_like(cls, net: "Mlp") -> "GradientSet":
        return cls(np.zeros_like(net.flat), net.layer_dims)

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.flat).all())

    def scaled(self, factor: float) -> "GradientSet":
        return GradientSet(self.flat * factor, self.layer_dims)


class Mlp:
    """Multi-layer perceptron.

    ``layer_dims`` lists every width including input and output, e.g.
    ``[obs_dim, 1024, 512, act_dim]``.
    """

    def __init__(self, layer_dims, output_activation="linear", rng=None,
                 final_layer_scale=1.0, hidden_activation="relu"):
        layer_dims = [int(d) for d in layer_dims]
        if len(layer_dims) < 2 or any(d < 1 for d in layer_dims):
            raise ValueError(f"invalid layer_dims {layer_dims}")
        if output_activation not in _ACTIVATIONS or hidden_activation not in _ACTIVATIONS:
            raise ValueError("unknown activation")
        self.layer_dims = layer_dims
        self.output_activation = output_activation
        self.hidden_activation = hidden_activation
        rng = np.random.default_rng(rng)
        self._bind(np.empty(_flat_size(layer_dims)))
        n = len(layer_dims) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            bound = 1.0 / np.sqrt(w.shape[0])
            w[...] = rng.uniform(-bound, bound, size=w.shape)
            b[...] = rng.uniform(-bound, bound, size=b.shape)
            if i == n - 1:
                w *= final_layer_scale
                b *= final_layer_scale

    def _bind(self, flat: np.ndarray) -> None:
        self.flat = flat
        self.weights, self.biases = _views(flat, self.layer_dims)

    @classmethod
    def from_arrays(cls, weights, biases, output_activation="linear",
                    hidden_activation="relu") -> "Mlp":
        dims = [weights[0].shape[0]] + [w.shape[1] for w in weights]
        for w, b, d_in, d_out in zip(weights, biases, dims[:-1], dims[1:]):
            if w.shape != (d_in, d_out) or np.shape(b) != (d_out,):
                raise ValueError("inconsistent layer dimensions")
        net = object.__new__(cls)
        net.layer_dims = dims
        net.output_activation = output_activation
        net.hidden_activation = hidden_activation
        net._bind(np.concatenate([a.ravel() for wb in zip(weights, biases) for a in wb]
                                 ).astype(float))
        return net

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def num_parameters(self) -> int:
        return self.flat.size

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "Mlp":
        new = object.__new__(Mlp)
        new.layer_dims = list(self.layer_dims)
        new.output_activation = self.output_activation
        new.hidden_activation = self.hidden_activation
        new._bind(self.flat.copy())
        return new

    def same_architecture(self, other: "Mlp") -> bool:
        return (self.layer_dims == other.layer_dims
                and self.output_activation == other.output_activation
                and self.hidden_activation == other.hidden_activation)

    def _activation(self, i):
        return self.output_activation if i == self.num_layers - 1 else self.hidden_activation

    def _check_input(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_dim or x.ndim > 2:
            raise ValueError(f"expected input of width {self.input_dim}, got shape {x.shape}")
        return x

    def forward(self, x, return_cache=False):
        """Evaluate the network on a vector or a ``(batch, input_dim)`` array."""
        x = self._check_input(x)
        a = x
        cache = [(None, x)]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            a = _act(self._activation(i), z)
            cache.append((z, a))
        return (a, cache) if return_cache else a

    __call__ = forward

    def backward(self, x, upstream, cache=None, params=True):
        """Reverse-mode gradients of ``sum(output * upstream)``.

        Returns ``(GradientSet, input_gradient)``.  For batched input the
        parameter gradients are summed over the batch.  With ``params=False``
        only the input gradient is computed and the first element is ``None``.
        """
        x = self._check_input(x)
        if cache is None:
            _, cache = self.forward(x, return_cache=True)
        out = cache[-1][1]
        g = np.asarray(upstream, dtype=float)
        if g.shape != out.shape:
            raise ValueError(f"upstream gradient shape {g.shape} != output shape {out.shape}")
        batched = x.ndim == 2
        grads = GradientSet.zeros_like(self) if params else None
        gw, gb = (grads.weights, grads.biases) if params else (None, None)
        for i in range(self.num_layers - 1, -1, -1):
            z, a = cache[i + 1]
            a_prev = cache[i][1]
            name = self._activation(i)
            dz = np.where(z > 0, g, 0.0) if name == "relu" else g * _act_grad(name, z, a)
            if not params:
                pass
            elif batched:
                np.matmul(a_prev.T, dz, out=gw[i])
                gb[i][...] = dz.sum(axis=0)
            else:
                np.outer(a_prev, dz, out=gw[i])
                gb[i][...] = dz
            g = dz @ self.weights[i].T
        return grads, g


class Adam:
    """Bias-corrected adaptive-moment optimizer (minimizes)."""

    def __init__(self, net: Mlp, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros_like(net.flat)
        self.v = np.zeros_like(net.flat)
        self.t = 0

    def step(self, net: Mlp, grads: GradientSet, learning_rate: float) -> None:
        g = grads.flat
        if g.shape != net.flat.shape:
            raise ValueError("gradient set does not match network shapes")
        if not np.isfinite(g.sum()):
            raise TrainingDivergenceError("non-finite gradient")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        self.m *= b1
        self.m += (1.0 - b1) * g
        self.v *= b2
        self.v += (1.0 - b2) * (g * g)
        m_hat = self.m / (1.0 - b1 ** self.t)
        v_hat = self.v / (1.0 - b2 ** self.t)
        net.flat -= learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


class Sgd:
    def __init__(self, net: Mlp | None = None):
        self.t = 0

    def step(self, net: Mlp, grads: GradientSet, learning_rate: float) -> None:
        if not np.isfinite(grads.flat.sum()):
            raise TrainingDivergenceError("non-finite gradient")
        self.t += 1
        net.flat -= learning_rate * grads.flat


def make_optimizer(kind: str, net: Mlp):
    if kind == "adam":
        return Adam(net)
    if kind == "sgd":
        return Sgd(net)
    raise ValueError(f"unknown optimizer {kind!r}")


def soft_update(target: Mlp, online: Mlp, tau: float) -> Mlp:
    """In place: target <- tau * online + (1 - tau) * target."""
    if not target.same_architecture(online):
        raise ValueError("soft_update needs congruent architectures")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if tau == 1.0:
        target.flat[...] = online.flat
    else:
        target.flat *= 1.0 - tau
        target.flat += tau * online.flat
    return target


# -- checkpoint text format -------------------------------------------------

def dumps_mlp(net: Mlp) -> str:
    lines = [f"{FORMAT_TAG} {net.num_layers}"]
    for w, b in zip(net.weights, net.biases):
        lines.append(f"dims {w.shape[0]} {w.shape[1]}")
        lines.extend(format(float(v), ".17g") for v in w.ravel(order="C"))
        lines.extend(format(float(v), ".17g") for v in b)
    return "\n".join(lines) + "\n"


def loads_mlp(text: str, output_activation="linear", hidden_activation="relu") -> Mlp:
    tokens = text.split("\n")
    it = iter(t for t in tokens if t.strip())
    header = next(it).split()
    if len(header) != 2 or header[0] != FORMAT_TAG:
        raise ValueError(f"not an {FORMAT_TAG} checkpoint: {header!r}")
    n = int(header[1])
    weights, biases, dims = [], [], []
    for _ in range(n):
        tag, d_in, d_out = next(it).split()
        if tag != "dims":
            raise ValueError(f"expected 'dims' line, got {tag!r}")
        d_in, d_out = int(d_in), int(d_out)
        w = np.array([float(next(it)) for _ in range(d_in * d_out)]).reshape(d_in, d_out)
        b = np.array([float(next(it)) for _ in range(d_out)])
        if dims and dims[-1] != d_in:
            raise ValueError("inconsistent layer dimensions")
        if not dims:
            dims.append(d_in)
        dims.append(d_out)
        weights.append(w)
        biases.append(b)
    return Mlp.from_arrays(weights, biases, output_activation, hidden_activation)


def save_mlp(net: Mlp, path) -> None:
    Path(path).write_text(dumps_mlp(net))


def load_mlp(path, output_activation="linear", hidden_activation="relu") -> Mlp:
    return loads_mlp(Path(path).read_text(), output_activation, hidden_activation)
