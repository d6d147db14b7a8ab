"""Categorical corruption processes: D3PM transition kernels and discrete flows.

Grid convention matches the continuous side: index T is clean data, index 0
is the uniform prior. Step matrix ``Q[i]`` moves one step away from data
(from grid i+1 down to i), and the cumulative matrix obeys

    Qbar[T] = I,      Qbar[i] = Q[i] @ Qbar[i+1],

so the marginal of a data one-hot x is ``x @ Qbar[i]`` at grid point i.
Every kernel here is the uniform-prior one, Q = (1-b) I + b 11^T / K, with b
chosen so the cumulative retention equals the cosine schedule's abar on the
grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schedules import Schedule

__all__ = [
    "TransitionKernel",
    "DegenerateStateError",
    "build_uniform_kernel",
    "forward_marginal",
    "posterior_step",
    "d3pm_cross_entropy",
    "dfm_interpolate",
    "dfm_step",
]


class DegenerateStateError(ValueError):
    """A categorical posterior had zero total mass."""


def _as_onehot(x, K: int) -> np.ndarray:
    """Accept an integer index, an index array, or one-hot rows; return (..., K)."""
    x = np.asarray(x)
    if x.ndim >= 1 and x.shape[-1] == K and np.issubdtype(x.dtype, np.floating):
        return x.astype(np.float64)
    idx = x.astype(np.int64)
    out = np.zeros(idx.shape + (K,), dtype=np.float64)
    np.put_along_axis(out.reshape(-1, K), idx.reshape(-1, 1), 1.0, axis=1)
    return out


@dataclass(frozen=True)
class TransitionKernel:
    """Per-step and cumulative row-stochastic matrices over K categories."""

    K: int
    per_step_Q: np.ndarray  # (T, K, K)
    cumulative_Qbar: np.ndarray  # (T+1, K, K)
    terminal: np.ndarray  # (K,)

    @property
    def T(self) -> int:
        return self.per_step_Q.shape[0]

    def validate(self, atol: float = 1e-10) -> None:
        for name, mats in (("Q", self.per_step_Q), ("Qbar", self.cumulative_Qbar)):
            rowsum = mats.sum(axis=-1)
            if not np.allclose(rowsum, 1.0, atol=atol):
                raise ValueError(f"{name} rows must sum to 1")
            if np.any(mats < -atol):
                raise ValueError(f"{name} has negative entries")
        dev = np.abs(self.cumulative_Qbar[0] - self.terminal[None, :]).max()
        if dev > 1e-3:
            raise ValueError(f"noise-end marginal deviates from the prior by {dev:.2e}")


def build_uniform_kernel(K: int, sched: Schedule, T: int | None = None) -> TransitionKernel:
    """Uniform-prior kernel whose cumulative retention tracks abar on the grid.

    Retention of a product of uniform-mixing steps is the product of their
    (1 - b) factors, so setting 1 - b_i = abar(t_i) / abar(t_{i+1}) lands the
    cumulative retention exactly on abar at every grid point: identity at
    the data end, uniform at the noise end.
    """
    if K < 2:
        raise ValueError("need at least two categories")
    T = T if T is not None else sched.T
    if T < 1:
        raise ValueError("T must be >= 1")
    grid = np.arange(T + 1) / T
    abar = np.asarray(sched.alpha_bar(grid), dtype=np.float64)
    eye = np.eye(K)
    flat = np.full((K, K), 1.0 / K)
    qs = np.empty((T, K, K))
    for i in range(T):
        keep = abar[i] / abar[i + 1] if abar[i + 1] > 0 else 0.0
        b = 1.0 - keep
        if not -1e-12 <= b <= 1.0 + 1e-12:
            raise ValueError(f"schedule produced mixing weight b = {b} outside [0, 1]")
        b = min(max(b, 0.0), 1.0)
        qs[i] = (1.0 - b) * eye + b * flat
    qbars = np.empty((T + 1, K, K))
    qbars[T] = eye
    for i in range(T - 1, -1, -1):
        qbars[i] = qs[i] @ qbars[i + 1]
    kernel = TransitionKernel(K=K, per_step_Q=qs, cumulative_Qbar=qbars, terminal=np.full(K, 1.0 / K))
    kernel.validate()
    return kernel


def forward_marginal(x_data, t_index: int, kernel: TransitionKernel) -> np.ndarray:
    """Marginal q(x_t | x_data) as probability rows, shape (..., K)."""
    if not 0 <= t_index <= kernel.T:
        raise ValueError(f"t_index must lie in [0, {kernel.T}]")
    onehot = _as_onehot(x_data, kernel.K)
    return onehot @ kernel.cumulative_Qbar[t_index]


def posterior_step(x_t, pred_xT, t_index: int, kernel: TransitionKernel) -> np.ndarray:
    """One-step denoising posterior q(x_{t+1} | x_t, x_T) with predicted x_T.

    p proportional to (x_t Q_t^T) * (pred_xT Qbar_{t+1}); rows normalized.
    """
    if not 0 <= t_index < kernel.T:
        raise ValueError(f"t_index must lie in [0, {kernel.T})")
    x_t_oh = _as_onehot(x_t, kernel.K)
    pred = np.asarray(pred_xT, dtype=np.float64)
    if pred.shape != x_t_oh.shape:
        pred = np.broadcast_to(pred, x_t_oh.shape)
    left = x_t_oh @ kernel.per_step_Q[t_index].T
    right = pred @ kernel.cumulative_Qbar[t_index + 1]
    raw = left * right
    denom = raw.sum(axis=-1, keepdims=True)
    if np.any(denom <= 0):
        raise DegenerateStateError("posterior has zero mass: state unreachable under the kernel")
    return raw / denom


def d3pm_cross_entropy(logits, target, weight: float = 1.0) -> float:
    """Weighted mean negative log-likelihood under a softmax over the last axis."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    K = logits.shape[-1]
    onehot = _as_onehot(target, K)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_probs = shifted - log_z
    nll = -(onehot * log_probs).sum(axis=-1)
    return float(weight * nll.mean())


def dfm_interpolate(x1, t: float, K: int, rng: np.random.Generator):
    """Sample x_t ~ Cat(t * delta_{x1} + (1 - t) / K).

    Equivalent draw: keep x1 with probability t, otherwise resample uniformly
    over all K categories (which may land back on x1), so the overall hit
    rate is t + (1 - t) / K. Accepts and returns integer indices of any shape.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    idx = np.asarray(x1, dtype=np.int64)
    scalar = idx.ndim == 0
    idx = np.atleast_1d(idx)
    keep = rng.random(idx.shape) < t
    uniform = rng.integers(0, K, size=idx.shape)
    out = np.where(keep, idx, uniform)
    return int(out[0]) if scalar else out


def dfm_step(x_t, pred_x1_probs, t: float, dt: float, rng: np.random.Generator):
    """One discrete-flow jump update.

    Draw x1_hat from the model's categorical prediction; states that already
    agree stay put, and disagreeing states jump to x1_hat with probability
    min(1, dt / (1 - t)). Accepts integer indices of any shape with matching
    probability rows (..., K).
    """
    if t + dt > 1.0 + 1e-12:
        raise ValueError("t + dt must not exceed 1")
    idx = np.asarray(x_t, dtype=np.int64)
    scalar = idx.ndim == 0
    idx = np.atleast_1d(idx)
    probs = np.asarray(pred_x1_probs, dtype=np.float64)
    probs = probs.reshape(idx.shape + (probs.shape[-1],))
    cdf = probs.cumsum(axis=-1)
    cdf /= cdf[..., -1:]
    u = rng.random(idx.shape + (1,))
    x1_hat = (u > cdf).sum(axis=-1)
    jump_p = 1.0 if 1.0 - t <= dt else dt / (1.0 - t)
    jump = rng.random(idx.shape) < jump_p
    out = np.where(idx == x1_hat, idx, np.where(jump, x1_hat, idx))
    return int(out[0]) if scalar else out
