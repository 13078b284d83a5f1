"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def grad_check(fn, inputs: list[Tensor], eps: float = 1e-5) -> float:
    """Max relative error between analytic and numeric gradients.

    fn maps the given leaf tensors to a scalar Tensor and is re-evaluated
    with each coordinate nudged by +/-eps. Inputs should be float64;
    single precision makes central differences meaningless.

    Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-8).
    """
    for t in inputs:
        t.zero_grad()
        if t.data.dtype != np.float64:
            raise ValueError("grad_check requires float64 inputs")
    out = fn(*inputs)
    if out.data.size != 1:
        raise ValueError(f"grad_check needs a scalar-valued function, got shape {out.shape}")
    out.backward()
    analytic = [
        t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in inputs
    ]
    max_err = 0.0
    for t, ga in zip(inputs, analytic):
        flat = t.data.reshape(-1)
        ga_flat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(fn(*inputs).data)
            flat[i] = orig - eps
            f_minus = float(fn(*inputs).data)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            err = abs(ga_flat[i] - numeric) / max(abs(ga_flat[i]), abs(numeric), 1e-8)
            max_err = max(max_err, err)
    for t in inputs:
        t.zero_grad()
    return max_err


def grad_check_sampled(
    fn, inputs: list[Tensor], rng: np.random.Generator, n_coords: int = 20, eps: float = 1e-5
) -> float:
    """grad_check over a random sample of coordinates across all inputs.

    Used for composite graphs where sweeping every parameter is too slow.
    """
    for t in inputs:
        t.zero_grad()
    out = fn(*inputs)
    if out.data.size != 1:
        raise ValueError(f"grad_check needs a scalar-valued function, got shape {out.shape}")
    out.backward()
    analytic = [
        t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in inputs
    ]
    sizes = np.array([t.data.size for t in inputs])
    total = int(sizes.sum())
    picks = rng.choice(total, size=min(n_coords, total), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    max_err = 0.0
    for pick in picks:
        which = int(np.searchsorted(offsets, pick, side="right") - 1)
        i = int(pick - offsets[which])
        t = inputs[which]
        flat = t.data.reshape(-1)
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = float(fn(*inputs).data)
        flat[i] = orig - eps
        f_minus = float(fn(*inputs).data)
        flat[i] = orig
        numeric = (f_plus - f_minus) / (2.0 * eps)
        a = analytic[which].reshape(-1)[i]
        err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        max_err = max(max_err, err)
    for t in inputs:
        t.zero_grad()
    return max_err
