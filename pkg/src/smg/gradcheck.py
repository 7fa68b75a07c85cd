"""Central finite differences for checking analytic gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import no_grad


def numerical_gradient(f: Callable[[], float], array: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """d f / d array by central differences, perturbing ``array`` in place."""
    grad = np.zeros_like(array, dtype=np.float64)
    flat = array.reshape(-1)
    out = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            up = f()
            flat[i] = original - step
            down = f()
            flat[i] = original
            out[i] = (up - down) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-12) -> float:
    """``||a - n|| / max(||a||, ||n||)``; 0 when both are below ``floor``."""
    a, n = np.ravel(analytic), np.ravel(numeric)
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    if scale < floor:
        return 0.0
    return float(np.linalg.norm(a - n) / scale)


def model_gradient_error(model, loss_fn: Callable[[], "object"], step: float = 1e-5) -> tuple[float, dict[str, float]]:
    """Compare backprop against finite differences over every model parameter.

    ``loss_fn`` runs the forward pass and returns a scalar Tensor.  Returns
    the relative error over the concatenated parameter vector and the
    per-parameter errors.
    """
    from .tensor import backward

    model.zero_grad()
    backward(loss_fn())
    params = model.parameters()
    analytic, numeric, per_param = [], [], {}
    for name, p in params.items():
        a = np.zeros_like(p.data) if p.grad is None else p.grad.copy()
        n = numerical_gradient(lambda: loss_fn().item(), p.data, step)
        analytic.append(a.ravel())
        numeric.append(n.ravel())
        per_param[name] = relative_error(a, n)
    return relative_error(np.concatenate(analytic), np.concatenate(numeric)), per_param
