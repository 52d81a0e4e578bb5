"""First-order optimizers over Tensor parameter lists."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, UsageError
from .tensor import Tensor


class Adam:
    """Adam with bias-corrected first and second moments.

    ``step`` applies one update from the current ``.grad`` buffers and then
    leaves them untouched; callers zero gradients themselves. A parameter
    whose ``.grad`` is None is skipped for that step (its moments do not
    advance). A non-finite gradient aborts with the parameter's name.
    """

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
        self.params = []
        self.names = []
        for entry in params:
            if isinstance(entry, tuple):
                name, p = entry
            else:
                name, p = f"param{len(self.params)}", entry
            if not isinstance(p, Tensor):
                raise UsageError(f"Adam expects Tensor parameters, got {type(p)!r} for {name}")
            self.params.append(p)
            self.names.append(name)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for name, p, m, v in zip(self.names, self.params, self.m, self.v):
            g = p.grad
            if g is None:
                continue
            if not np.isfinite(g).all():
                raise UsageError(f"non-finite gradient for parameter '{name}'")
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            mhat = m / bc1
            vhat = v / bc2
            p.data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None
