"""Shared test utilities: finite-difference gradient checking."""

import numpy as np

from switchpe.tensor import Graph, backward, no_grad


def finite_diff_grad(f, x, h=1e-5):
    """Central-difference gradient of scalar-valued f() with respect to x.

    ``f`` must recompute the loss from the current contents of ``x`` (the
    array is perturbed in place and restored).
    """
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def max_rel_err(a, b, floor=1e-3):
    """Elementwise relative error with a floored denominator.

    The floor turns the comparison into an absolute one for entries whose
    magnitude is below it, which keeps finite-difference noise on
    near-zero gradients from registering as huge relative error.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def grad_check(make_loss, params, tol=1e-6, h=1e-5):
    """Assert reverse-mode gradients match central differences for params.

    ``make_loss`` rebuilds the scalar loss from the params' current data on
    every call. Params unreachable from the loss are treated as zero-grad.
    """
    for p in params:
        p.grad = None
    with Graph():
        loss = make_loss()
        backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    def f():
        with no_grad():
            return float(make_loss().data)

    for p, an in zip(params, analytic):
        fd = finite_diff_grad(f, p.data, h=h)
        err = max_rel_err(an, fd)
        assert err <= tol, f"gradient mismatch {err:.3e} > {tol:.1e} for shape {p.data.shape}"
