"""Continuous interpolants: schedules, oracle rollouts, and the score link.

Run:  python demos/01_interpolants.py
"""

import numpy as np

from molgen.schedules import (
    Schedule,
    cfm_vector_field,
    ddpm_step,
    euler_step,
    interpolate,
    noise_to_eps_param,
    score_to_vector_field,
)

rng = np.random.default_rng(0)

# Two schedule families share one interface: x_t = alpha(t) eps + beta(t) x1.
vp = Schedule("vp_cosine", nu=1.0, T=500)
lin = Schedule("linear_cfm", sigma_min=0.0, T=100)

t = np.linspace(0, 1, 5)
print("vp_cosine  alpha(t):", np.round(vp.alpha(t), 4))
print("vp_cosine  beta(t): ", np.round(vp.beta(t), 4))
print("variance preservation max|a^2+b^2-1|:",
      float(np.abs(vp.alpha(t) ** 2 + vp.beta(t) ** 2 - 1).max()))

# A perfect denoiser drives both samplers exactly back to the data.
x1 = rng.standard_normal((6, 3))
x = rng.standard_normal((6, 3))
for i in range(vp.T):
    x = ddpm_step(x, x1, i, vp, rng)
print("\nDDPM oracle rollout error (500 steps):", float(np.abs(x - x1).max()))

x = rng.standard_normal((6, 3))
steps = 100
for k in range(steps):
    x = euler_step(x, cfm_vector_field(x1, x, k / steps), 1.0 / steps)
print("flow oracle rollout error (100 steps):", float(np.abs(x - x1).max()))

# The flow field and the noise-prediction view differ by one scalar: feeding
# the marginal score through both conversions returns -alpha(t) * score.
score = rng.standard_normal(8)
xt = rng.standard_normal(8)
for t_val in (0.25, 0.5, 0.75):
    v = score_to_vector_field(score, xt, t_val, vp)
    eps_hat = noise_to_eps_param(v, xt, t_val, vp)
    print(f"t={t_val}: max|eps_hat + alpha*score| =",
          float(np.abs(eps_hat + float(vp.alpha(t_val)) * score).max()))

# Sampling a 1-D Gaussian mixture purely from its analytic score.
mus, sig2, w = np.array([-1.0, 1.0]), 0.25, np.array([0.5, 0.5])
x = rng.standard_normal(10_000)
for k in range(100):
    tv = max(k / 100, 1e-3)
    a, b = float(lin.alpha(tv)), float(lin.beta(tv))
    var = a * a + b * b * sig2
    centered = x[:, None] - b * mus[None, :]
    post = np.exp(-0.5 * centered ** 2 / var) * w
    post /= post.sum(axis=1, keepdims=True)
    score_x = (post * (-centered / var)).sum(axis=1)
    x = euler_step(x, score_to_vector_field(score_x, x, tv, lin), 0.01)
print("\nmixture sampling:  mean", round(float(x.mean()), 3),
      " (target 0.0)   var", round(float(x.var()), 3),
      f" (target {float(w @ (mus ** 2 + sig2)):.3f})")
