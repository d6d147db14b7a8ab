import numpy as np
import pytest

from molgen.discrete import build_uniform_kernel
from molgen.geom import kabsch_rmsd
from molgen.molecule import default_vocabulary
from molgen.sampling import (
    ModelPredictor,
    OraclePredictor,
    SizeSampler,
    ddpm_generate,
    fm_generate,
    generate_conditional,
)
from molgen.schedules import TrackSchedules, remove_com
from molgen.toydata import template_molecule
from molgen.training import TrackKernels

VOCAB = default_vocabulary()


def kernels_for(scheds):
    return TrackKernels(
        atoms=build_uniform_kernel(VOCAB.n_elements, scheds.atoms),
        bonds=build_uniform_kernel(VOCAB.n_bond_types, scheds.bonds),
        charges=build_uniform_kernel(VOCAB.n_charges, scheds.charges))


class TestSizeSampler:
    def test_fixed(self, rng):
        s = SizeSampler.fixed(8)
        assert all(s.draw(rng) == 8 for _ in range(10))

    def test_histogram_proportions(self, rng):
        s = SizeSampler.from_json_dict({"sizes": [6, 10], "counts": [3, 1]})
        draws = np.array([s.draw(rng) for _ in range(20000)])
        assert abs((draws == 6).mean() - 0.75) < 0.02

    def test_invalid_histogram(self):
        with pytest.raises(ValueError):
            SizeSampler(np.array([0, 5]))
        with pytest.raises(ValueError):
            SizeSampler(np.array([3]), np.array([-1.0]))


class TestOracleChains:
    def test_ddpm_oracle_recovers_molecule(self, rng):
        scheds = TrackSchedules.default_diffusion(200)
        kernels = kernels_for(scheds)
        target = template_molecule(8, VOCAB)
        predictor = OraclePredictor(target)
        mol = ddpm_generate(predictor, target.n_atoms, VOCAB, scheds, kernels, rng)
        assert mol.graph_equal(target)
        assert kabsch_rmsd(mol.coords, target.coords) < 1e-6

    def test_fm_oracle_recovers_molecule(self, rng):
        scheds = TrackSchedules.default_flow(100)
        target = template_molecule(9, VOCAB)
        predictor = OraclePredictor(target)
        mol = fm_generate(predictor, target.n_atoms, VOCAB, scheds, rng, steps=100)
        assert mol.graph_equal(target)
        assert kabsch_rmsd(mol.coords, target.coords) < 1e-6

    def test_fm_single_step_is_prediction(self, rng):
        # one Euler step from t = 0 with dt = 1 lands exactly on the data
        scheds = TrackSchedules.default_flow(1)
        target = template_molecule(6, VOCAB)
        predictor = OraclePredictor(target)
        mol = fm_generate(predictor, target.n_atoms, VOCAB, scheds, rng, steps=1)
        assert np.abs(remove_com(mol.coords) - remove_com(target.coords)).max() < 1e-9

    def test_chain_coords_stay_com_free(self, rng):
        scheds = TrackSchedules.default_diffusion(50)
        kernels = kernels_for(scheds)
        target = template_molecule(7, VOCAB)
        mol = ddpm_generate(OraclePredictor(target), 7, VOCAB, scheds, kernels, rng)
        assert np.abs(mol.coords.mean(axis=0)).max() < 1e-9


class TestConditional:
    def test_graph_clamped_to_template(self, rng):
        scheds = TrackSchedules.default_diffusion(50)
        kernels = kernels_for(scheds)
        template = template_molecule(10, VOCAB)
        out = generate_conditional(OraclePredictor(template), template, scheds,
                                   kernels, rng, objective="diffusion")
        assert out.graph_equal(template)

    def test_oracle_coordinates_exact(self, rng):
        scheds = TrackSchedules.default_diffusion(100)
        kernels = kernels_for(scheds)
        template = template_molecule(8, VOCAB)
        out = generate_conditional(OraclePredictor(template), template, scheds,
                                   kernels, rng, objective="diffusion")
        assert kabsch_rmsd(out.coords, template.coords) < 1e-6

    def test_flow_route_also_clamps(self, rng):
        scheds = TrackSchedules.default_flow(20)
        template = template_molecule(6, VOCAB)
        out = generate_conditional(OraclePredictor(template), template, scheds,
                                   None, rng, objective="flow_matching", steps=20)
        assert out.graph_equal(template)


class TestModelPredictorChains:
    def test_untrained_model_produces_valid_onehots(self, rng):
        from molgen.nn import DenoiserConfig, init_model
        cfg = DenoiserConfig(n_elements=VOCAB.n_elements, n_bond_types=VOCAB.n_bond_types,
                             n_charges=VOCAB.n_charges, layers=1, d_node=16, d_edge=8, heads=2)
        state = init_model(cfg, rng)
        scheds = TrackSchedules.default_diffusion(10)
        kernels = kernels_for(scheds)
        mol = ddpm_generate(ModelPredictor(state), 5, VOCAB, scheds, kernels, rng)
        assert mol.n_atoms == 5
        assert np.allclose(mol.atom_types.sum(axis=1), 1.0)
        assert np.allclose(mol.bonds, mol.bonds.transpose(1, 0, 2))

    def test_deterministic_given_seed(self):
        from molgen.nn import DenoiserConfig, init_model
        cfg = DenoiserConfig(n_elements=VOCAB.n_elements, n_bond_types=VOCAB.n_bond_types,
                             n_charges=VOCAB.n_charges, layers=1, d_node=16, d_edge=8, heads=2)
        state = init_model(cfg, np.random.default_rng(0))
        scheds = TrackSchedules.default_flow(10)
        outs = []
        for _ in range(2):
            rng = np.random.Generator(np.random.PCG64(99))
            outs.append(fm_generate(ModelPredictor(state), 6, VOCAB, scheds, rng, steps=10))
        assert np.array_equal(outs[0].coords, outs[1].coords)
        assert outs[0].graph_equal(outs[1])
