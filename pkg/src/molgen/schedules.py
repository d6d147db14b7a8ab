"""Continuous Gaussian interpolants, noise schedules, and sampler updates.

Time convention: t = 1 is clean data, t = 0 is pure noise. States in between
follow

    x_t = alpha(t) * eps + beta(t) * x1,       eps ~ N(0, I),

so beta climbs from 0 to 1 while alpha does the reverse. Two schedule
families are provided:

* ``vp_cosine``: variance preserving, beta(t)^2 = abar(t) with the weighted
  cosine retention

      abar(t) = cos^2( (pi/2) * ((1-t)^nu + s) / (1+s) )
                / cos^2( (pi/2) * s / (1+s) ),

  where the exponent nu reshapes the curve per data modality and s is the
  small cosine offset. abar runs from 0 at the noise end to exactly 1 at the
  data end, which makes the final ancestral update collapse onto the model
  prediction.
* ``linear_cfm``: alpha(t) = 1 - (1 - sigma_min) * t, beta(t) = t, the
  straight conditional path used for flow matching.

The deterministic flow-matching view and the denoising view are linked by
the marginal score: ``score_to_vector_field`` and ``noise_to_eps_param``
implement the algebra showing the two training targets differ only by the
time-dependent scalar s(t) = alpha_dot - (beta_dot / beta) * alpha.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .geom import kabsch_rotation, remove_com

__all__ = [
    "Schedule",
    "TimeDistribution",
    "TrackSchedules",
    "SingularTimeError",
    "interpolate",
    "invert_interpolant",
    "ddpm_loss",
    "posterior_coefficients",
    "ddpm_coefficients",
    "ddpm_step",
    "cfm_vector_field",
    "euler_step",
    "score_to_vector_field",
    "noise_to_eps_param",
    "remove_com",
    "sample_com_free_noise",
    "rotational_align",
    "sample_time",
]


class SingularTimeError(ValueError):
    """An operation was evaluated at a time where its formula is singular."""


@dataclass(frozen=True)
class Schedule:
    """Interpolation schedule (alpha, beta) with analytic time derivatives.

    ``T`` is the grid size used by discrete-step samplers built on top of
    this schedule; the continuous functions ignore it.
    """

    kind: str = "vp_cosine"  # "vp_cosine" | "linear_cfm"
    nu: float = 1.0
    s: float = 0.008
    sigma_min: float = 0.0
    T: int = 500

    def __post_init__(self):
        if self.kind not in ("vp_cosine", "linear_cfm"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.s <= 0 or self.nu <= 0:
            raise ValueError("nu and s must be positive")
        if self.sigma_min < 0 or self.sigma_min >= 1:
            raise ValueError("sigma_min must lie in [0, 1)")
        if self.T < 1:
            raise ValueError("T must be >= 1")

    # -- cosine retention ----------------------------------------------

    def _u(self, t):
        return (math.pi / 2.0) * ((1.0 - np.asarray(t)) ** self.nu + self.s) / (1.0 + self.s)

    def alpha_bar(self, t):
        """Cumulative retention beta(t)^2 for the vp_cosine family."""
        if self.kind != "vp_cosine":
            raise ValueError("alpha_bar is defined for vp_cosine schedules")
        u0 = (math.pi / 2.0) * self.s / (1.0 + self.s)
        val = np.cos(self._u(t)) ** 2 / math.cos(u0) ** 2
        return np.clip(val, 0.0, 1.0)

    # -- interpolant coefficients ---------------------------------------

    def alpha(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "vp_cosine":
            return np.sqrt(np.clip(1.0 - self.alpha_bar(t), 0.0, None))
        return 1.0 - (1.0 - self.sigma_min) * t

    def beta(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "vp_cosine":
            return np.sqrt(self.alpha_bar(t))
        return t * np.ones_like(t)

    def beta_dot(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "vp_cosine":
            u0 = (math.pi / 2.0) * self.s / (1.0 + self.s)
            u = self._u(t)
            # d/dt of (1-t)^nu is -nu (1-t)^(nu-1)
            udot = -(math.pi / 2.0) * self.nu * (1.0 - t) ** (self.nu - 1.0) / (1.0 + self.s)
            return -np.sin(u) * udot / math.cos(u0)
        return np.ones_like(t)

    def alpha_dot(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "vp_cosine":
            # alpha^2 + beta^2 = 1  =>  alpha_dot = -beta beta_dot / alpha;
            # diverges at the data endpoint where alpha -> 0
            with np.errstate(divide="ignore", invalid="ignore"):
                return -self.beta(t) * self.beta_dot(t) / self.alpha(t)
        return -(1.0 - self.sigma_min) * np.ones_like(t)

    def grid(self) -> np.ndarray:
        """T + 1 equispaced grid points from noise (0) to data (1)."""
        return np.linspace(0.0, 1.0, self.T + 1)

    def to_config(self) -> dict:
        return {
            "kind": self.kind,
            "nu": self.nu,
            "s": self.s,
            "sigma_min": self.sigma_min,
            "T": self.T,
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "Schedule":
        return cls(
            kind=cfg.get("kind", "vp_cosine"),
            nu=float(cfg.get("nu", 1.0)),
            s=float(cfg.get("s", 0.008)),
            sigma_min=float(cfg.get("sigma_min", 0.0)),
            T=int(cfg.get("T", 500)),
        )


@dataclass(frozen=True)
class TrackSchedules:
    """Per-modality schedules; the discrete tracks get their own exponents."""

    coords: Schedule
    atoms: Schedule
    bonds: Schedule
    charges: Schedule

    @classmethod
    def default_diffusion(cls, T: int = 500) -> "TrackSchedules":
        return cls(
            coords=Schedule("vp_cosine", nu=1.0, T=T),
            atoms=Schedule("vp_cosine", nu=1.5, T=T),
            bonds=Schedule("vp_cosine", nu=1.5, T=T),
            charges=Schedule("vp_cosine", nu=1.0, T=T),
        )

    @classmethod
    def default_flow(cls, T: int = 100) -> "TrackSchedules":
        sched = Schedule("linear_cfm", sigma_min=0.0, T=T)
        return cls(coords=sched, atoms=sched, bonds=sched, charges=sched)

    def to_config(self) -> dict:
        return {k: getattr(self, k).to_config() for k in ("coords", "atoms", "bonds", "charges")}

    @classmethod
    def from_config(cls, cfg: dict) -> "TrackSchedules":
        return cls(**{k: Schedule.from_config(cfg[k]) for k in ("coords", "atoms", "bonds", "charges")})


@dataclass(frozen=True)
class TimeDistribution:
    """Training-time distribution over [0, 1]."""

    kind: str = "uniform"  # "uniform" | "discrete_uniform_grid" | "beta_shaped"
    T: int = 500
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "discrete_uniform_grid", "beta_shaped"):
            raise ValueError(f"unknown time distribution {self.kind!r}")
        if self.kind == "beta_shaped" and (self.a <= 0 or self.b <= 0):
            raise ValueError("beta_shaped needs positive (a, b)")
        if self.T < 1:
            raise ValueError("T must be >= 1")

    def to_config(self) -> dict:
        return {"kind": self.kind, "T": self.T, "a": self.a, "b": self.b}

    @classmethod
    def from_config(cls, cfg: dict) -> "TimeDistribution":
        return cls(
            kind=cfg.get("kind", "uniform"),
            T=int(cfg.get("T", 500)),
            a=float(cfg.get("a", 1.0)),
            b=float(cfg.get("b", 1.0)),
        )


def sample_time(dist: TimeDistribution, rng: np.random.Generator, size=None):
    """Draw t in [0, 1]; the grid variant lands exactly on multiples of 1/T."""
    if dist.kind == "uniform":
        return rng.uniform(0.0, 1.0, size=size)
    if dist.kind == "discrete_uniform_grid":
        idx = rng.integers(0, dist.T + 1, size=size)
        return idx / dist.T
    return rng.beta(dist.a, dist.b, size=size)


# ---------------------------------------------------------------------------
# Interpolant algebra
# ---------------------------------------------------------------------------

def interpolate(x1, eps, t: float, sched: Schedule):
    """x_t = alpha(t) * eps + beta(t) * x1."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    x1 = np.asarray(x1, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x1.shape != eps.shape:
        raise ValueError("x1 and eps must share a shape")
    return float(sched.alpha(t)) * eps + float(sched.beta(t)) * x1


def invert_interpolant(x_t, eps, t: float, sched: Schedule):
    """x1 = (x_t - alpha(t) * eps) / beta(t); singular where beta(t) = 0."""
    beta = float(sched.beta(t))
    if beta <= 1e-12:
        raise SingularTimeError(f"beta({t}) ~ 0: interpolant not invertible at the noise endpoint")
    x_t = np.asarray(x_t, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    return (x_t - float(sched.alpha(t)) * eps) / beta


def ddpm_loss(pred_x1, x1, weight: float = 1.0) -> float:
    """Weighted mean squared error of the data prediction."""
    if weight <= 0:
        raise ValueError("weight must be positive")
    pred_x1 = np.asarray(pred_x1, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    if pred_x1.shape != x1.shape:
        raise ValueError("prediction and target must share a shape")
    diff = pred_x1 - x1
    return float(weight * np.mean(diff * diff))


def posterior_coefficients(abar_t: float, abar_prev: float) -> tuple[float, float, float]:
    """Gaussian posterior coefficients (f, g, var) for one ancestral update
    given the cumulative retentions at the current grid point and the one
    closer to data:

        x_next = f * pred_x1 + g * x_t + sqrt(var) * eps'

    with a = abar_t / abar_prev, b = 1 - a, and

        f = sqrt(abar_prev) * b / (1 - abar_t)
        g = sqrt(a) * (1 - abar_prev) / (1 - abar_t)
        var = b * (1 - abar_prev) / (1 - abar_t).

    Equal retentions collapse onto (f, g, var) = (0, 1, 0): a no-noise step
    keeps the state.
    """
    a = abar_t / abar_prev if abar_prev > 0 else 0.0
    b = 1.0 - a
    denom = 1.0 - abar_t
    if denom <= 0.0:
        raise SingularTimeError("degenerate retention: abar already 1 at the current point")
    f = math.sqrt(abar_prev) * b / denom
    g = math.sqrt(a) * (1.0 - abar_prev) / denom
    var = b * (1.0 - abar_prev) / denom
    return f, g, var


def ddpm_coefficients(t_index: int, sched: Schedule) -> tuple[float, float, float]:
    """(f, g, sigma) for the update from grid point t_index to t_index + 1.

    sigma is forced to 0 on the final step; since abar(1) = 1 exactly, that
    step returns pred_x1 unchanged.
    """
    if sched.kind != "vp_cosine":
        raise ValueError("ancestral updates require a vp_cosine schedule")
    T = sched.T
    if not 0 <= t_index < T:
        raise ValueError(f"t_index must lie in [0, {T}), got {t_index}")
    abar_t = float(sched.alpha_bar(t_index / T))
    abar_prev = float(sched.alpha_bar((t_index + 1) / T))
    f, g, var = posterior_coefficients(abar_t, abar_prev)
    sigma = 0.0 if t_index == T - 1 else math.sqrt(max(var, 0.0))
    return f, g, sigma


def ddpm_step(x_t, pred_x1, t_index: int, sched: Schedule, rng: np.random.Generator, noise=None):
    """One ancestral denoising update; pass `noise` to override the N(0, I) draw."""
    x_t = np.asarray(x_t, dtype=np.float64)
    pred_x1 = np.asarray(pred_x1, dtype=np.float64)
    f, g, sigma = ddpm_coefficients(t_index, sched)
    if sigma == 0.0:
        return f * pred_x1 + g * x_t
    if noise is None:
        noise = rng.standard_normal(x_t.shape)
    return f * pred_x1 + g * x_t + sigma * np.asarray(noise)


def cfm_vector_field(pred_x1, x_t, t: float):
    """v = (pred_x1 - x_t) / (1 - t); singular at the data endpoint."""
    if t >= 1.0:
        raise SingularTimeError(f"vector field undefined at t = {t} >= 1")
    pred_x1 = np.asarray(pred_x1, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    return (pred_x1 - x_t) / (1.0 - t)


def euler_step(x_t, v, dt: float):
    if dt <= 0:
        raise ValueError("dt must be positive")
    return np.asarray(x_t, dtype=np.float64) + np.asarray(v, dtype=np.float64) * dt


def score_to_vector_field(score, x_t, t: float, sched: Schedule):
    """Convert a marginal score into the flow-matching vector field.

        v = -alpha * (beta * alpha_dot - beta_dot * alpha) / beta * score
            + (beta_dot / beta) * x_t
    """
    beta = float(sched.beta(t))
    if beta <= 1e-12:
        raise SingularTimeError(f"beta({t}) ~ 0: score conversion singular at the noise endpoint")
    alpha = float(sched.alpha(t))
    alpha_dot = float(sched.alpha_dot(t))
    beta_dot = float(sched.beta_dot(t))
    score = np.asarray(score, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    coef = -alpha * (beta * alpha_dot - beta_dot * alpha) / beta
    return coef * score + (beta_dot / beta) * x_t


def noise_to_eps_param(v, x_t, t: float, sched: Schedule):
    """Recover the noise-prediction parameterization from a vector field.

        eps_hat = (v - (beta_dot / beta) * x_t) / s(t),
        s(t) = alpha_dot - (beta_dot / beta) * alpha.

    Composed with ``score_to_vector_field`` this returns -alpha * score,
    i.e. flow matching and denoising differ only by the scalar s(t).
    """
    beta = float(sched.beta(t))
    if beta <= 1e-12:
        raise SingularTimeError(f"beta({t}) ~ 0 at the noise endpoint")
    alpha = float(sched.alpha(t))
    alpha_dot = float(sched.alpha_dot(t))
    beta_dot = float(sched.beta_dot(t))
    s_t = alpha_dot - (beta_dot / beta) * alpha
    if abs(s_t) < 1e-300 or not math.isfinite(s_t):
        raise SingularTimeError(f"s({t}) = {s_t}: noise parameterization singular")
    v = np.asarray(v, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    return (v - (beta_dot / beta) * x_t) / s_t


# ---------------------------------------------------------------------------
# CoM handling and rotational alignment
# ---------------------------------------------------------------------------

def sample_com_free_noise(n_atoms: int, rng: np.random.Generator) -> np.ndarray:
    """Gaussian noise projected onto the zero-center-of-mass subspace."""
    eps = rng.standard_normal((n_atoms, 3))
    return eps - eps.mean(axis=0, keepdims=True)


def rotational_align(noise: np.ndarray, data: np.ndarray) -> np.ndarray:
    """Rotate `noise` by the proper rotation that best matches `data`.

    Both inputs must be centered. Never increases the squared distance; on
    rank-degenerate inputs (collinear points) the rotation is undefined and
    the noise is returned unchanged with a warning.
    """
    noise = np.asarray(noise, dtype=np.float64)
    data = np.asarray(data, dtype=np.float64)
    r, degenerate = kabsch_rotation(noise, data)
    if degenerate:
        warnings.warn("rotational_align: degenerate point set, falling back to identity")
        return noise.copy()
    return noise @ r.T
