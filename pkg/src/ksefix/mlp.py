"""Small dense networks with hand-written backprop and Adam.

The actor/critic pair used here is tiny (three affine layers each), so the
whole training stack is plain numpy: exact reverse-mode gradients through
the layer cache, and the standard adaptive-moment update with bias
correction. Batches are row-major: inputs of shape (batch, dim) or (dim,).
"""

import numpy as np


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _activation(kind: str, scale: float):
    """Return (f, f') for an activation tag."""
    if kind == "swish":
        def f(x):
            return x * _sigmoid(x)

        def df(x):
            s = _sigmoid(x)
            return s * (1.0 + x * (1.0 - s))
    elif kind == "tanh":
        def f(x):
            return np.tanh(x)

        def df(x):
            t = np.tanh(x)
            return 1.0 - t * t
    elif kind == "tanh_scaled":
        def f(x):
            return scale * np.tanh(x)

        def df(x):
            t = np.tanh(x)
            return scale * (1.0 - t * t)
    elif kind == "linear":
        def f(x):
            return x

        def df(x):
            return np.ones_like(x)
    else:
        raise ValueError(f"unknown activation {kind!r}")
    return f, df


class Mlp:
    """Fully-connected network: affine layers with per-layer activations.

    ``activations`` entries are either a tag string or ("tanh_scaled", c).
    """

    def __init__(self, sizes, activations, rng=None):
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        self.sizes = list(sizes)
        self.activations = [a if isinstance(a, tuple) else (a, 1.0)
                            for a in activations]
        self._funcs = [_activation(kind, scale) for kind, scale in self.activations]
        self.weights = []
        self.biases = []
        rng = rng or np.random.default_rng()
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    def forward(self, x):
        """Return (output, cache); cache feeds backward()."""
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        a = x[None, :] if squeeze else x
        if a.shape[1] != self.sizes[0]:
            raise ValueError(f"input dim {a.shape[1]} != {self.sizes[0]}")
        inputs = [a]
        preacts = []
        for w, b, (f, _) in zip(self.weights, self.biases, self._funcs):
            z = a @ w.T + b
            preacts.append(z)
            a = f(z)
            inputs.append(a)
        out = a[0] if squeeze else a
        return out, (inputs, preacts, squeeze)

    def backward(self, cache, output_gradient):
        """Exact reverse-mode pass.

        Returns (weight_grads, bias_grads, input_gradient) for the batch the
        cache was built from; gradients are summed over the batch.
        """
        inputs, preacts, squeeze = cache
        g = np.asarray(output_gradient, dtype=np.float64)
        if squeeze:
            g = g[None, :]
        w_grads = [None] * len(self.weights)
        b_grads = [None] * len(self.biases)
        for layer in range(len(self.weights) - 1, -1, -1):
            _, df = self._funcs[layer]
            gz = g * df(preacts[layer])
            w_grads[layer] = gz.T @ inputs[layer]
            b_grads[layer] = gz.sum(axis=0)
            g = gz @ self.weights[layer]
        gin = g[0] if squeeze else g
        return w_grads, b_grads, gin

    # -- parameter plumbing --------------------------------------------

    def parameters(self):
        return self.weights + self.biases

    def copy(self) -> "Mlp":
        twin = Mlp.__new__(Mlp)
        twin.sizes = list(self.sizes)
        twin.activations = list(self.activations)
        twin._funcs = [_activation(kind, scale) for kind, scale in twin.activations]
        twin.weights = [w.copy() for w in self.weights]
        twin.biases = [b.copy() for b in self.biases]
        return twin

    def state_dict(self):
        return {"sizes": list(self.sizes),
                "activations": list(self.activations),
                "weights": [w.copy() for w in self.weights],
                "biases": [b.copy() for b in self.biases]}

    @classmethod
    def from_state(cls, state) -> "Mlp":
        net = cls.__new__(cls)
        net.sizes = list(state["sizes"])
        net.activations = [tuple(a) for a in state["activations"]]
        net._funcs = [_activation(kind, scale) for kind, scale in net.activations]
        net.weights = [np.array(w) for w in state["weights"]]
        net.biases = [np.array(b) for b in state["biases"]]
        return net


class Adam:
    """Adaptive-moment optimiser over a list of parameter arrays."""

    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        """One in-place update; shapes of params and grads must match."""
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if p.shape != g.shape:
                raise ValueError("gradient shape mismatch")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)

    def state_dict(self):
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
                "eps": self.eps, "t": self.t,
                "m": [m.copy() for m in self.m],
                "v": [v.copy() for v in self.v]}

    @classmethod
    def from_state(cls, state, params) -> "Adam":
        opt = cls(params, lr=state["lr"], beta1=state["beta1"],
                  beta2=state["beta2"], eps=state["eps"])
        opt.t = state["t"]
        opt.m = [np.array(m) for m in state["m"]]
        opt.v = [np.array(v) for v in state["v"]]
        return opt


def soft_update(target: Mlp, online: Mlp, tau: float):
    """Blend target <- tau * online + (1 - tau) * target, in place."""
    if target.sizes != online.sizes:
        raise ValueError("architecture mismatch in soft update")
    for tp, op in zip(target.parameters(), online.parameters()):
        tp *= 1.0 - tau
        tp += tau * op
