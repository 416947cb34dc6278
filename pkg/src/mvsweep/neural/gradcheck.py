"""Finite-difference gradient checking for the autodiff ops."""
import numpy as np

from mvsweep.neural.tensor import Tensor


def numeric_gradient(fn, tensors, index, step=1e-4):
    """Central-difference gradient of a scalar-valued fn w.r.t. one input."""
    target = tensors[index]
    flat = target.data.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        f_plus = fn(*tensors).item()
        flat[i] = original - step
        f_minus = fn(*tensors).item()
        flat[i] = original
        grad[i] = (f_plus - f_minus) / (2.0 * step)
    return grad.reshape(target.data.shape)


def max_relative_error(fn, tensors, step=1e-4):
    """Largest relative mismatch between autodiff and numeric gradients.

    Relative to max(|numeric|, 1) per element, so tiny gradients are
    compared absolutely. Inputs must be float64 for the step size to make
    sense.
    """
    for t in tensors:
        if t.dtype != np.float64:
            raise ValueError("gradient checks require float64 tensors")
        t.zero_grad()
    loss = fn(*tensors)
    loss.backward()
    worst = 0.0
    for i, t in enumerate(tensors):
        if not t.requires_grad:
            continue
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = numeric_gradient(fn, tensors, i, step)
        denom = np.maximum(np.abs(numeric), 1.0)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
    return worst
