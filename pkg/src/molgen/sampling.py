"""Generation chains: ancestral denoising, flow ODE integration, conditioning.

Coordinates always live in the zero-center-of-mass subspace during a chain;
every noise draw is CoM-projected and every model prediction is re-centered
before it enters an update. Bonds are sampled on the upper triangle and
mirrored, keeping the bond tensor exactly symmetric at every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discrete import dfm_step, posterior_step
from .molecule import Molecule, Vocabulary
from .nn import ModelState, self_conditioned_forward
from .schedules import (
    TrackSchedules,
    cfm_vector_field,
    ddpm_step,
    euler_step,
    remove_com,
    sample_com_free_noise,
)
from .training import TrackKernels, _onehot, _sample_rows, _symmetric_bond_onehot

__all__ = [
    "Predictor",
    "ModelPredictor",
    "OraclePredictor",
    "SizeSampler",
    "ddpm_generate",
    "fm_generate",
    "generate_conditional",
]


def _softmax_np(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class Predictor:
    """Callable denoiser interface used by the chains: given the current
    noisy tracks and times, return predicted clean coordinates and per-track
    category probabilities (all plain arrays)."""

    def predict(self, coords, atoms, bonds, charges, t_cont, t_disc):
        raise NotImplementedError


class ModelPredictor(Predictor):
    def __init__(self, state: ModelState):
        self.state = state

    def predict(self, coords, atoms, bonds, charges, t_cont, t_disc):
        out = self_conditioned_forward(self.state, coords, atoms, bonds, charges, t_cont, t_disc)
        return (
            out.pred_coords.data,
            _softmax_np(out.atom_logits.data),
            _softmax_np(out.bond_logits.data),
            _softmax_np(out.charge_logits.data),
        )


class OraclePredictor(Predictor):
    """Replays a fixed target molecule; the diagnostic 'perfect denoiser'."""

    def __init__(self, target: Molecule):
        self.coords = remove_com(target.coords)
        self.atoms = np.array(target.atom_types)
        self.bonds = np.array(target.bonds)
        self.charges = np.array(target.charges)

    def predict(self, coords, atoms, bonds, charges, t_cont, t_disc):
        return self.coords, self.atoms, self.bonds, self.charges


class SizeSampler:
    """Draws atom counts from an empirical histogram or a fixed size."""

    def __init__(self, sizes: np.ndarray, weights: np.ndarray | None = None):
        self.sizes = np.asarray(sizes, dtype=np.int64)
        if self.sizes.size == 0 or np.any(self.sizes < 1):
            raise ValueError("histogram must contain positive sizes")
        if weights is None:
            weights = np.ones_like(self.sizes, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != self.sizes.shape or np.any(weights < 0) or weights.sum() <= 0:
            raise ValueError("invalid histogram weights")
        self.probs = weights / weights.sum()

    @classmethod
    def fixed(cls, n: int) -> "SizeSampler":
        return cls(np.asarray([n]))

    @classmethod
    def from_json_dict(cls, payload: dict) -> "SizeSampler":
        return cls(np.asarray(payload["sizes"]), np.asarray(payload.get("counts", None)))

    def draw(self, rng: np.random.Generator) -> int:
        return int(rng.choice(self.sizes, p=self.probs))


@dataclass
class _ChainState:
    coords: np.ndarray
    atom_idx: np.ndarray
    bond_idx_upper: np.ndarray
    charge_idx: np.ndarray


def _init_chain(n: int, vocab: Vocabulary, rng: np.random.Generator,
                template: Molecule | None) -> _ChainState:
    coords = sample_com_free_noise(n, rng)
    iu, ju = np.triu_indices(n, k=1)
    if template is not None:
        return _ChainState(coords, template.element_indices.copy(),
                           template.bond_indices[iu, ju].copy(),
                           np.argmax(template.charges, axis=1).copy())
    return _ChainState(
        coords,
        rng.integers(0, vocab.n_elements, n),
        rng.integers(0, vocab.n_bond_types, iu.size),
        rng.integers(0, vocab.n_charges, n),
    )


def _tracks_onehot(chain: _ChainState, vocab: Vocabulary):
    n = chain.coords.shape[0]
    return (
        _onehot(chain.atom_idx, vocab.n_elements),
        _symmetric_bond_onehot(chain.bond_idx_upper, n, vocab.n_bond_types),
        _onehot(chain.charge_idx, vocab.n_charges),
    )


def _finish(chain: _ChainState, vocab: Vocabulary, name: str) -> Molecule:
    atoms, bonds, charges = _tracks_onehot(chain, vocab)
    return Molecule(coords=chain.coords, atom_types=atoms, bonds=bonds,
                    charges=charges, vocab=vocab, name=name)


def ddpm_generate(predictor: Predictor, n_atoms: int, vocab: Vocabulary,
                  scheds: TrackSchedules, kernels: TrackKernels,
                  rng: np.random.Generator, template: Molecule | None = None,
                  name: str = "") -> Molecule:
    """Full ancestral chain from pure noise to a sampled molecule.

    With `template` set, the discrete tracks are clamped to the template at
    every step (conditional structure generation) and only coordinates move.
    """
    T = scheds.coords.T
    chain = _init_chain(n_atoms, vocab, rng, template)
    n = n_atoms
    iu, ju = np.triu_indices(n, k=1)
    for i in range(T):
        t = i / T
        t_disc = 1.0 if template is not None else t
        atoms, bonds, charges = _tracks_onehot(chain, vocab)
        pred_coords, pa, pb, pc = predictor.predict(chain.coords, atoms, bonds, charges, t, t_disc)
        chain.coords = ddpm_step(chain.coords, remove_com(pred_coords), i,
                                 scheds.coords, rng, noise=sample_com_free_noise(n, rng))
        if template is None:
            chain.atom_idx = _sample_rows(
                posterior_step(chain.atom_idx, pa, i, kernels.atoms), rng)
            if iu.size:
                chain.bond_idx_upper = _sample_rows(
                    posterior_step(chain.bond_idx_upper, pb[iu, ju], i, kernels.bonds), rng)
            chain.charge_idx = _sample_rows(
                posterior_step(chain.charge_idx, pc, i, kernels.charges), rng)
    return _finish(chain, vocab, name)


def fm_generate(predictor: Predictor, n_atoms: int, vocab: Vocabulary,
                scheds: TrackSchedules, rng: np.random.Generator,
                steps: int | None = None, template: Molecule | None = None,
                name: str = "") -> Molecule:
    """Euler integration of the flow from t = 0 to 1 with jump updates on
    the discrete tracks."""
    S = steps if steps is not None else scheds.coords.T
    dt = 1.0 / S
    chain = _init_chain(n_atoms, vocab, rng, template)
    n = n_atoms
    iu, ju = np.triu_indices(n, k=1)
    for k in range(S):
        t = k / S
        t_disc = 1.0 if template is not None else t
        atoms, bonds, charges = _tracks_onehot(chain, vocab)
        pred_coords, pa, pb, pc = predictor.predict(chain.coords, atoms, bonds, charges, t, t_disc)
        v = cfm_vector_field(remove_com(pred_coords), chain.coords, t)
        chain.coords = euler_step(chain.coords, v, dt)
        if template is None:
            chain.atom_idx = dfm_step(chain.atom_idx, pa, t, dt, rng)
            if iu.size:
                chain.bond_idx_upper = dfm_step(chain.bond_idx_upper, pb[iu, ju], t, dt, rng)
            chain.charge_idx = dfm_step(chain.charge_idx, pc, t, dt, rng)
    return _finish(chain, vocab, name)


def generate_conditional(predictor: Predictor, template: Molecule,
                         scheds: TrackSchedules, kernels: TrackKernels | None,
                         rng: np.random.Generator, objective: str = "diffusion",
                         steps: int | None = None, name: str = "") -> Molecule:
    """Generate coordinates for a fixed 2D graph; the output graph is the
    template graph by construction."""
    if objective == "diffusion":
        mol = ddpm_generate(predictor, template.n_atoms, template.vocab, scheds,
                            kernels or TrackKernels(), rng, template=template, name=name)
    else:
        mol = fm_generate(predictor, template.n_atoms, template.vocab, scheds,
                          rng, steps=steps, template=template, name=name)
    return mol
