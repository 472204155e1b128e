"""Pure numpy implementations of the hot kernels (fallback backend)."""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Same-padded 1-D convolution.

    x: (B, L, Cin), w: (k, Cin, Cout), b: (Cout,) -> (B, L, Cout)
    out[n, t, o] = b[o] + sum_{tau, c} w[tau, c, o] * xpad[n, t + tau - k//2, c]
    """
    batch, length, c_in = x.shape
    k, _, c_out = w.shape
    lpad = k // 2
    xp = np.zeros((batch, length + k - 1, c_in))
    xp[:, lpad : lpad + length] = x
    out = np.broadcast_to(b, (batch, length, c_out)).copy()
    for tau in range(k):
        out += xp[:, tau : tau + length, :] @ w[tau]
    return out


def conv1d_backward(
    x: np.ndarray, w: np.ndarray, grad_z: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv1d_forward w.r.t. input, weights and bias."""
    batch, length, c_in = x.shape
    k, _, c_out = w.shape
    lpad = k // 2
    xp = np.zeros((batch, length + k - 1, c_in))
    xp[:, lpad : lpad + length] = x

    grad_b = grad_z.sum(axis=(0, 1))
    grad_w = np.empty_like(w)
    grad_xp = np.zeros_like(xp)
    for tau in range(k):
        grad_w[tau] = np.tensordot(xp[:, tau : tau + length], grad_z, axes=([0, 1], [0, 1]))
        grad_xp[:, tau : tau + length, :] += grad_z @ w[tau].T
    return grad_xp[:, lpad : lpad + length, :], grad_w, grad_b


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Affine map: x (B, Din) @ w (Din, Dout) + b."""
    return x @ w + b


def dense_backward(
    x: np.ndarray, w: np.ndarray, grad_z: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return grad_z @ w.T, x.T @ grad_z, grad_z.sum(axis=0)


def adam_update(
    p: np.ndarray,
    g: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    lr: float,
    beta1: float,
    beta2: float,
    epsilon: float,
    t: int,
    scratch: np.ndarray,
) -> bool:
    """One in-place Adam update on flat views; returns False on non-finite g."""
    if not np.isfinite(g).all():
        return False
    m *= beta1
    np.multiply(g, 1.0 - beta1, out=scratch)
    m += scratch
    v *= beta2
    np.multiply(g, g, out=scratch)
    scratch *= 1.0 - beta2
    v += scratch
    corr1 = 1.0 - beta1**t
    corr2 = 1.0 - beta2**t
    np.sqrt(v, out=scratch)
    scratch /= np.sqrt(corr2)
    scratch += epsilon
    np.divide(m, scratch, out=scratch)
    scratch *= lr / corr1
    p -= scratch
    return True
