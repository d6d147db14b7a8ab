"""Sampler-update bindings: one denoising/flow step over in-memory arrays.

Schedules are built from the same JSON-shaped dicts the run configs use;
randomness comes from an explicit integer seed so results are reproducible
and match the primary kernels exactly.
"""

from __future__ import annotations

import numpy as np

from molgen.discrete import dfm_step as _dfm_step, posterior_step as _posterior_step
from molgen.discrete import build_uniform_kernel
from molgen.schedules import (
    Schedule,
    cfm_vector_field as _cfm_vector_field,
    ddpm_step as _ddpm_step,
    euler_step as _euler_step,
)

__all__ = [
    "schedule_from_config",
    "ddpm_step",
    "euler_step",
    "cfm_vector_field",
    "dfm_step",
    "d3pm_posterior",
]


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def schedule_from_config(config: dict) -> Schedule:
    return Schedule.from_config(config)


def ddpm_step(x_t, pred_x1, t_index: int, schedule: dict, seed: int):
    """One ancestral update; the noise draw is seeded, not shared."""
    sched = schedule_from_config(schedule)
    return _ddpm_step(np.asarray(x_t, dtype=np.float64),
                      np.asarray(pred_x1, dtype=np.float64),
                      int(t_index), sched, _rng(seed))


def euler_step(x_t, v, dt: float):
    return _euler_step(np.asarray(x_t, dtype=np.float64),
                       np.asarray(v, dtype=np.float64), float(dt))


def cfm_vector_field(pred_x1, x_t, t: float):
    return _cfm_vector_field(np.asarray(pred_x1, dtype=np.float64),
                             np.asarray(x_t, dtype=np.float64), float(t))


def dfm_step(x_t, pred_x1_probs, t: float, dt: float, seed: int):
    return _dfm_step(np.asarray(x_t, dtype=np.int64),
                     np.asarray(pred_x1_probs, dtype=np.float64),
                     float(t), float(dt), _rng(seed))


def d3pm_posterior(x_t, pred_xT, t_index: int, K: int, schedule: dict):
    """Denoising posterior rows for a uniform-prior kernel built on the fly."""
    sched = schedule_from_config(schedule)
    kernel = build_uniform_kernel(int(K), sched)
    return _posterior_step(np.asarray(x_t), np.asarray(pred_xT, dtype=np.float64),
                           int(t_index), kernel)
