"""Training utilities: corruption of molecule tracks, losses, optimizer.

One training step draws, per molecule, either the fully-noised branch (all
four tracks corrupted at independent continuous/discrete times) or the
structure-only branch (discrete tracks kept clean at t = 1, coordinates
noised), each with probability one half. The loss is a weighted sum of the
coordinate MSE and the per-track cross-entropies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .discrete import TransitionKernel, dfm_interpolate, forward_marginal
from .molecule import Molecule
from .nn import ModelState, self_conditioned_forward
from .schedules import (
    Schedule,
    TimeDistribution,
    TrackSchedules,
    interpolate,
    remove_com,
    rotational_align,
    sample_com_free_noise,
    sample_time,
)

__all__ = [
    "LossWeights",
    "TrackKernels",
    "SGDMomentum",
    "Adam",
    "noisy_discrete_state",
    "dual_time_training_step",
]


@dataclass(frozen=True)
class LossWeights:
    coords: float = 3.0
    atoms: float = 0.4
    bonds: float = 2.0
    charges: float = 1.0

    def to_config(self) -> dict:
        return {"coords": self.coords, "atoms": self.atoms,
                "bonds": self.bonds, "charges": self.charges}

    @classmethod
    def from_config(cls, cfg: dict) -> "LossWeights":
        return cls(**{k: float(v) for k, v in cfg.items()})


@dataclass
class TrackKernels:
    """Discrete-diffusion kernels per categorical track (None for flow runs)."""

    atoms: TransitionKernel | None = None
    bonds: TransitionKernel | None = None
    charges: TransitionKernel | None = None


class SGDMomentum:
    """Gradient descent with momentum at a fixed step size.

    ``clip_norm`` bounds the global gradient norm before the update; the
    rare huge-gradient batch otherwise derails small toy runs.
    """

    def __init__(self, state: ModelState, lr: float = 0.005, momentum: float = 0.9,
                 clip_norm: float | None = 10.0):
        self.state = state
        self.lr = lr
        self.momentum = momentum
        self.clip_norm = clip_norm
        self.velocity = {k: np.zeros_like(t.data) for k, t in state.params.items()}

    def step(self) -> None:
        scale = 1.0
        if self.clip_norm is not None:
            sq = sum(float((t.grad * t.grad).sum())
                     for t in self.state.params.values() if t.grad is not None)
            norm = np.sqrt(sq)
            if norm > self.clip_norm:
                scale = self.clip_norm / norm
        for name, t in self.state.params.items():
            if t.grad is None:
                continue
            v = self.velocity[name]
            v *= self.momentum
            v -= self.lr * scale * t.grad
            t.data = t.data + v

    def zero_grad(self) -> None:
        self.state.zero_grad()

    def load_velocity(self, tensors: dict[str, np.ndarray]) -> None:
        for name, arr in tensors.items():
            if name in self.velocity:
                self.velocity[name] = np.array(arr, dtype=np.float64)

    def state_tensors(self) -> dict[str, np.ndarray]:
        return {f"velocity.{k}": v for k, v in self.velocity.items()}

    def load_state_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        self.load_velocity({k[len("velocity."):]: v for k, v in tensors.items()
                            if k.startswith("velocity.")})


class Adam:
    """Adam with optional global-norm clipping.

    The plain momentum optimizer stalls well short of the accuracy the
    end-to-end run needs (attention blocks want per-parameter step sizes),
    so toy training uses this instead; SGDMomentum stays available.
    """

    def __init__(self, state: ModelState, lr: float = 0.002, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8,
                 clip_norm: float | None = 10.0):
        self.state = state
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.step_count = 0
        self.m = {k: np.zeros_like(t.data) for k, t in state.params.items()}
        self.v = {k: np.zeros_like(t.data) for k, t in state.params.items()}

    def step(self) -> None:
        scale = 1.0
        if self.clip_norm is not None:
            sq = sum(float((t.grad * t.grad).sum())
                     for t in self.state.params.values() if t.grad is not None)
            norm = np.sqrt(sq)
            if norm > self.clip_norm:
                scale = self.clip_norm / norm
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for name, t in self.state.params.items():
            if t.grad is None:
                continue
            g = scale * t.grad
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            t.data = t.data - self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self) -> None:
        self.state.zero_grad()

    def state_tensors(self) -> dict[str, np.ndarray]:
        out = {"adam_step": np.array([float(self.step_count)])}
        for k, arr in self.m.items():
            out[f"adam_m.{k}"] = arr
        for k, arr in self.v.items():
            out[f"adam_v.{k}"] = arr
        return out

    def load_state_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        if "adam_step" in tensors:
            self.step_count = int(tensors["adam_step"][0])
        for k, arr in tensors.items():
            if k.startswith("adam_m."):
                self.m[k[len("adam_m."):]] = np.array(arr, dtype=np.float64)
            elif k.startswith("adam_v."):
                self.v[k[len("adam_v."):]] = np.array(arr, dtype=np.float64)


def _onehot(indices: np.ndarray, K: int) -> np.ndarray:
    out = np.zeros(indices.shape + (K,))
    np.put_along_axis(out.reshape(-1, K), indices.reshape(-1, 1), 1.0, axis=1)
    return out


def _symmetric_bond_onehot(upper_idx: np.ndarray, n: int, B: int) -> np.ndarray:
    """Expand upper-triangle category indices into a symmetric one-hot tensor."""
    full = np.zeros((n, n), dtype=np.int64)
    iu, ju = np.triu_indices(n, k=1)
    full[iu, ju] = upper_idx
    full[ju, iu] = upper_idx
    return _onehot(full, B)


def noisy_discrete_state(mol: Molecule, t_disc: float, objective: str,
                         kernels: TrackKernels, rng: np.random.Generator,
                         scheds: TrackSchedules | None = None):
    """Corrupt the three categorical tracks at time t_disc.

    Diffusion runs sample from the kernel marginal at the nearest grid
    index; flow runs use the uniform interpolation. Bonds are treated as
    unordered pairs: only the upper triangle is stochastic and the result
    is mirrored, with the diagonal pinned to "none".
    """
    n = mol.n_atoms
    A = mol.vocab.n_elements
    B = mol.vocab.n_bond_types
    K = mol.vocab.n_charges
    atom_idx = mol.element_indices
    iu, ju = np.triu_indices(n, k=1)
    bond_idx_upper = mol.bond_indices[iu, ju]
    charge_idx = np.argmax(mol.charges, axis=1)

    if objective == "diffusion":
        def corrupt(idx, kernel):
            t_index = int(round(t_disc * kernel.T))
            probs = forward_marginal(idx, t_index, kernel)
            return _sample_rows(probs, rng)
        atom_t = corrupt(atom_idx, kernels.atoms)
        bond_t = corrupt(bond_idx_upper, kernels.bonds) if bond_idx_upper.size else bond_idx_upper
        charge_t = corrupt(charge_idx, kernels.charges)
    else:
        atom_t = dfm_interpolate(atom_idx, t_disc, A, rng)
        bond_t = dfm_interpolate(bond_idx_upper, t_disc, B, rng) if bond_idx_upper.size else bond_idx_upper
        charge_t = dfm_interpolate(charge_idx, t_disc, K, rng)

    return _onehot(atom_t, A), _symmetric_bond_onehot(bond_t, n, B), _onehot(charge_t, K)


def _sample_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cdf = probs.cumsum(axis=-1)
    cdf /= cdf[..., -1:]
    u = rng.random(probs.shape[:-1] + (1,))
    return (u > cdf).sum(axis=-1)


def _cross_entropy_loss(logits: Tensor, target_onehot: np.ndarray,
                        mask: np.ndarray | None = None) -> Tensor:
    """Mean NLL over rows (or over mask-selected rows for bond pairs)."""
    logp = ad.log_softmax(logits)
    picked = ad.mul(logp, Tensor(target_onehot))
    if mask is None:
        return ad.neg(ad.mean_reduce(ad.sum_reduce(picked, axis=-1)))
    m = Tensor(mask)
    total = ad.sum_reduce(ad.mul(ad.sum_reduce(picked, axis=-1, keepdims=True), m))
    return ad.neg(ad.mul(total, 1.0 / float(mask.sum())))


def dual_time_training_step(
    mols: list[Molecule],
    state: ModelState,
    scheds: TrackSchedules,
    kernels: TrackKernels,
    time_dist: TimeDistribution,
    opt: SGDMomentum,
    rng: np.random.Generator,
    weights: LossWeights = LossWeights(),
    objective: str = "diffusion",
    sc_drop: float = 0.5,
    rot_align: bool = True,
) -> dict[str, float]:
    """One optimizer update over a molecule batch; returns per-track losses."""
    if not mols:
        raise ValueError("empty batch")
    losses = {"coords": 0.0, "atoms": 0.0, "bonds": 0.0, "charges": 0.0}
    per_mol_totals: list[Tensor] = []
    for mol in mols:
        n = mol.n_atoms
        x1 = remove_com(mol.coords)
        noise_all = rng.random() < 0.5
        t_cont = float(sample_time(time_dist, rng))
        if noise_all:
            t_disc = float(sample_time(time_dist, rng))
            atoms_t, bonds_t, charges_t = noisy_discrete_state(
                mol, t_disc, objective, kernels, rng, scheds)
        else:
            t_disc = 1.0
            atoms_t, bonds_t, charges_t = mol.atom_types, mol.bonds, mol.charges
        eps = sample_com_free_noise(n, rng)
        if rot_align and n >= 3:
            eps = rotational_align(eps, x1)
        x_t = interpolate(x1, eps, t_cont, scheds.coords)

        out = self_conditioned_forward(
            state, x_t, atoms_t, bonds_t, charges_t, t_cont, t_disc,
            rng=rng, drop_prob=sc_drop)

        diff = ad.sub(out.pred_coords, Tensor(x1))
        loss_x = ad.mul(ad.mean_reduce(ad.mul(diff, diff)), weights.coords)
        loss_a = ad.mul(_cross_entropy_loss(out.atom_logits, mol.atom_types), weights.atoms)
        pair_mask = np.triu(np.ones((n, n)), k=1)[:, :, None]
        if pair_mask.sum() > 0:
            loss_b = ad.mul(_cross_entropy_loss(out.bond_logits, mol.bonds, pair_mask), weights.bonds)
        else:
            loss_b = Tensor(0.0)
        loss_c = ad.mul(_cross_entropy_loss(out.charge_logits, mol.charges), weights.charges)

        total = ad.add(ad.add(loss_x, loss_a), ad.add(loss_b, loss_c))
        per_mol_totals.append(total)
        losses["coords"] += loss_x.item()
        losses["atoms"] += loss_a.item()
        losses["bonds"] += loss_b.item()
        losses["charges"] += loss_c.item()

    batch_loss = per_mol_totals[0]
    for t in per_mol_totals[1:]:
        batch_loss = ad.add(batch_loss, t)
    batch_loss = ad.mul(batch_loss, 1.0 / len(mols))

    opt.zero_grad()
    batch_loss.backward()
    opt.step()

    out = {k: v / len(mols) for k, v in losses.items()}
    out["total"] = sum(out.values())
    return out
