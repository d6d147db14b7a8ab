import json
import os
import stat
import sys
import textwrap

import numpy as np
import pytest

from molgen.cli import main
from molgen.config import ConfigError, apply_overrides, validate_config
from molgen.molio import parse_sdf_v2000, write_sdf
from molgen.toydata import synthetic_dataset, template_molecule

SEED_CFG = {"schema_version": 1, "seed": 7}


def write_cfg(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload), "utf-8")
    return str(path)


@pytest.fixture()
def templates_sdf(tmp_path, vocab):
    mols = [template_molecule(n, vocab) for n in (6, 8)]
    path = tmp_path / "templates.sdf"
    path.write_text(write_sdf(mols), "utf-8")
    return str(path)


@pytest.fixture()
def dataset_sdf(tmp_path, vocab):
    mols = synthetic_dataset(12, np.random.default_rng(0), vocab=vocab)
    path = tmp_path / "train.sdf"
    path.write_text(write_sdf(mols), "utf-8")
    return str(path)


class TestConfigValidation:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            validate_config({**SEED_CFG, "count": 1, "bogus": 2,
                             "output": {"sdf": "x"}}, "sample")

    def test_missing_seed_rejected(self):
        with pytest.raises(ConfigError, match="seed"):
            validate_config({"schema_version": 1, "count": 1,
                             "output": {"sdf": "x"}}, "sample")

    def test_wrong_schema_version(self):
        with pytest.raises(ConfigError, match="schema_version"):
            validate_config({"schema_version": 99, "seed": 1, "count": 1,
                             "output": {"sdf": "x"}}, "sample")

    def test_type_checking(self):
        with pytest.raises(ConfigError, match="count"):
            validate_config({**SEED_CFG, "count": "five", "output": {"sdf": "x"}}, "sample")

    def test_choices_enforced(self):
        with pytest.raises(ConfigError, match="objective"):
            validate_config({**SEED_CFG, "count": 1, "objective": "vae",
                             "output": {"sdf": "x"}}, "sample")

    def test_defaults_filled(self):
        cfg = validate_config({**SEED_CFG, "count": 2, "output": {"sdf": "x"}}, "sample")
        assert cfg["objective"] == "diffusion"
        assert cfg["schedules"]["atoms"]["nu"] == 1.5
        assert cfg["model"]["kind"] == "zero_init"

    def test_dotted_overrides(self):
        cfg = apply_overrides({"a": {"b": 1}}, ["a.b=5", "a.c=hello"])
        assert cfg["a"]["b"] == 5
        assert cfg["a"]["c"] == "hello"


class TestSampleCommand:
    def _cfg(self, tmp_path, out_name="out.sdf", **over):
        payload = {
            "schema_version": 1,
            "seed": 123,
            "count": 3,
            "steps": 8,
            "sizes": {"fixed": 5},
            "model": {"kind": "zero_init", "config": {"layers": 1, "d_node": 16, "d_edge": 8, "heads": 2}},
            "output": {"sdf": str(tmp_path / out_name),
                       "summary": str(tmp_path / (out_name + ".json"))},
        }
        payload.update(over)
        return payload

    def test_byte_identical_given_seed(self, tmp_path):
        cfg_a = write_cfg(tmp_path, "a.json", self._cfg(tmp_path, "a.sdf"))
        cfg_b = write_cfg(tmp_path, "b.json", self._cfg(tmp_path, "b.sdf"))
        assert main(["sample", "--config", cfg_a]) == 0
        assert main(["sample", "--config", cfg_b]) == 0
        assert (tmp_path / "a.sdf").read_bytes() == (tmp_path / "b.sdf").read_bytes()

    def test_fixed_size_respected(self, tmp_path, vocab):
        cfg = write_cfg(tmp_path, "c.json", self._cfg(tmp_path, "c.sdf"))
        assert main(["sample", "--config", cfg]) == 0
        mols = parse_sdf_v2000((tmp_path / "c.sdf").read_text(), vocab)
        assert len(mols) == 3
        assert all(m.n_atoms == 5 for m in mols)

    def test_flow_objective_runs(self, tmp_path, vocab):
        cfg = write_cfg(tmp_path, "f.json",
                        self._cfg(tmp_path, "f.sdf", objective="flow_matching", steps=5))
        assert main(["sample", "--config", cfg]) == 0
        assert len(parse_sdf_v2000((tmp_path / "f.sdf").read_text(), vocab)) == 3

    def test_histogram_sizes(self, tmp_path, vocab):
        hist = tmp_path / "hist.json"
        hist.write_text(json.dumps({"sizes": [4], "counts": [1]}))
        cfg = write_cfg(tmp_path, "h.json",
                        self._cfg(tmp_path, "h.sdf", sizes={"histogram": str(hist)}))
        assert main(["sample", "--config", cfg]) == 0
        mols = parse_sdf_v2000((tmp_path / "h.sdf").read_text(), vocab)
        assert all(m.n_atoms == 4 for m in mols)

    def test_oracle_steps_one_fm_returns_template(self, tmp_path, vocab, templates_sdf):
        cfg = write_cfg(tmp_path, "o.json", self._cfg(
            tmp_path, "o.sdf", objective="flow_matching", steps=1, count=2,
            model={"kind": "oracle", "oracle_sdf": templates_sdf}))
        assert main(["sample", "--config", cfg]) == 0
        mols = parse_sdf_v2000((tmp_path / "o.sdf").read_text(), vocab)
        want = [template_molecule(6, vocab), template_molecule(8, vocab)]
        for got, ref in zip(mols, want):
            assert got.graph_equal(ref)

    def test_schema_error_exit_code(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "bad.json", {"schema_version": 1})
        assert main(["sample", "--config", cfg]) == 2
        assert "config error" in capsys.readouterr().err

    def test_env_var_config(self, tmp_path, monkeypatch):
        cfg = write_cfg(tmp_path, "env.json", self._cfg(tmp_path, "env.sdf"))
        monkeypatch.setenv("MOLGEN_CONFIG", cfg)
        assert main(["sample"]) == 0
        assert (tmp_path / "env.sdf").exists()

    def test_set_override(self, tmp_path, vocab):
        cfg = write_cfg(tmp_path, "s.json", self._cfg(tmp_path, "s.sdf"))
        assert main(["sample", "--config", cfg, "--set", "count=1"]) == 0
        assert len(parse_sdf_v2000((tmp_path / "s.sdf").read_text(), vocab)) == 1


class TestSampleCondCommand:
    def _cfg(self, tmp_path, templates_sdf, **over):
        payload = {
            "schema_version": 1,
            "seed": 5,
            "steps": 40,
            "template_sdf": templates_sdf,
            "multiplicity": 2,
            "model": {"kind": "oracle", "oracle_sdf": templates_sdf},
            "output": {"sdf": str(tmp_path / "cond.sdf")},
        }
        payload.update(over)
        return payload

    def test_graphs_match_templates_and_multiplicity(self, tmp_path, vocab, templates_sdf):
        cfg = write_cfg(tmp_path, "cond.json", self._cfg(tmp_path, templates_sdf))
        assert main(["sample-cond", "--config", cfg]) == 0
        mols = parse_sdf_v2000((tmp_path / "cond.sdf").read_text(), vocab)
        refs = [template_molecule(6, vocab), template_molecule(8, vocab)]
        assert len(mols) == 4  # 2 templates x multiplicity 2
        for i, mol in enumerate(mols):
            assert mol.graph_equal(refs[i // 2])

    def test_oracle_coordinates_recovered(self, tmp_path, vocab, templates_sdf):
        from molgen.geom import kabsch_rmsd
        cfg = write_cfg(tmp_path, "cond2.json", self._cfg(tmp_path, templates_sdf, steps=100))
        assert main(["sample-cond", "--config", cfg]) == 0
        mols = parse_sdf_v2000((tmp_path / "cond.sdf").read_text(), vocab)
        refs = [template_molecule(6, vocab), template_molecule(8, vocab)]
        for i, mol in enumerate(mols):
            assert kabsch_rmsd(mol.coords, refs[i // 2].coords) < 1e-6


class TestTrainToyCommand:
    def _cfg(self, tmp_path, dataset_sdf, steps=3, **over):
        payload = {
            "schema_version": 1,
            "seed": 11,
            "data_sdf": dataset_sdf,
            "steps": steps,
            "batch_size": 2,
            "objective": "flow_matching",
            "schedules": {k: {"kind": "linear_cfm", "T": 20} for k in
                          ("coords", "atoms", "bonds", "charges")},
            "time_distribution": {"kind": "uniform"},
            "model": {"kind": "zero_init",
                      "config": {"layers": 1, "d_node": 16, "d_edge": 8, "heads": 2}},
            "output": {"checkpoint": str(tmp_path / "model.bin"),
                       "loss_csv": str(tmp_path / "loss.csv")},
        }
        payload.update(over)
        return payload

    def test_loss_csv_rows_match_steps(self, tmp_path, dataset_sdf):
        cfg = write_cfg(tmp_path, "t.json", self._cfg(tmp_path, dataset_sdf, steps=4))
        assert main(["train-toy", "--config", cfg]) == 0
        rows = (tmp_path / "loss.csv").read_text().strip().splitlines()
        assert len(rows) == 5  # header + 4 steps

    def test_adam_optimizer_option(self, tmp_path, dataset_sdf):
        cfg = write_cfg(tmp_path, "ta.json", self._cfg(tmp_path, dataset_sdf, steps=3,
                                                       optimizer="adam", lr=0.002))
        assert main(["train-toy", "--config", cfg]) == 0
        rows = (tmp_path / "loss.csv").read_text().strip().splitlines()
        assert len(rows) == 4

    def test_adam_resume_bit_exact(self, tmp_path, dataset_sdf):
        full = self._cfg(tmp_path, dataset_sdf, steps=4, optimizer="adam", lr=0.002)
        full["output"] = {"checkpoint": str(tmp_path / "af.bin"),
                          "loss_csv": str(tmp_path / "af.csv")}
        assert main(["train-toy", "--config", write_cfg(tmp_path, "af.json", full)]) == 0
        part = self._cfg(tmp_path, dataset_sdf, steps=2, optimizer="adam", lr=0.002)
        part["output"] = {"checkpoint": str(tmp_path / "ap.bin"),
                          "loss_csv": str(tmp_path / "ap.csv")}
        assert main(["train-toy", "--config", write_cfg(tmp_path, "ap.json", part)]) == 0
        rest = self._cfg(tmp_path, dataset_sdf, steps=4, optimizer="adam", lr=0.002)
        rest["resume"] = str(tmp_path / "ap.bin")
        rest["output"] = {"checkpoint": str(tmp_path / "ar.bin"),
                          "loss_csv": str(tmp_path / "ar.csv")}
        assert main(["train-toy", "--config", write_cfg(tmp_path, "ar.json", rest)]) == 0
        assert (tmp_path / "ar.bin").read_bytes() == (tmp_path / "af.bin").read_bytes()

    def test_resume_reproduces_losses_bit_exact(self, tmp_path, dataset_sdf):
        full = self._cfg(tmp_path, dataset_sdf, steps=5)
        full["output"] = {"checkpoint": str(tmp_path / "full.bin"),
                          "loss_csv": str(tmp_path / "full.csv")}
        assert main(["train-toy", "--config", write_cfg(tmp_path, "full.json", full)]) == 0

        part = self._cfg(tmp_path, dataset_sdf, steps=3)
        part["output"] = {"checkpoint": str(tmp_path / "part.bin"),
                          "loss_csv": str(tmp_path / "part.csv")}
        assert main(["train-toy", "--config", write_cfg(tmp_path, "part.json", part)]) == 0

        rest = self._cfg(tmp_path, dataset_sdf, steps=5)
        rest["resume"] = str(tmp_path / "part.bin")
        rest["output"] = {"checkpoint": str(tmp_path / "rest.bin"),
                          "loss_csv": str(tmp_path / "rest.csv")}
        assert main(["train-toy", "--config", write_cfg(tmp_path, "rest.json", rest)]) == 0

        full_rows = (tmp_path / "full.csv").read_text().strip().splitlines()[1:]
        rest_rows = (tmp_path / "rest.csv").read_text().strip().splitlines()[1:]
        assert rest_rows == full_rows[3:]
        assert (tmp_path / "rest.bin").read_bytes() == (tmp_path / "full.bin").read_bytes()

    def test_empty_dataset_rejected(self, tmp_path):
        empty = tmp_path / "empty.sdf"
        empty.write_text("")
        cfg = write_cfg(tmp_path, "e.json", self._cfg(tmp_path, str(empty)))
        assert main(["train-toy", "--config", cfg]) != 0


class TestEvalCommand:
    def test_self_comparison(self, tmp_path, vocab, dataset_sdf):
        out_json = tmp_path / "report.json"
        cfg = write_cfg(tmp_path, "eval.json", {
            "schema_version": 1,
            "generated_sdf": dataset_sdf,
            "reference_sdf": dataset_sdf,
            "metrics": {
                "stability": True,
                "distributional": True,
                "coverage": {"enabled": True, "delta": 0.75},
                "relaxation": {"enabled": True, "relaxed_sdf": dataset_sdf},
            },
            "output": {"json": str(out_json), "text": str(tmp_path / "report.txt")},
        })
        assert main(["eval", "--config", cfg]) == 0
        report = json.loads(out_json.read_text())
        assert report["stability"]["molecule_stability"] == 1.0
        assert report["distributional"]["w_angles"] == pytest.approx(0.0, abs=1e-12)
        assert report["coverage"]["cov_recall_mean"] == 1.0
        assert report["coverage"]["amr_precision_mean"] == pytest.approx(0.0, abs=1e-12)
        assert report["relaxation"]["bond_length_delta"] == 0.0
        assert report["relaxation"]["median_delta_e"] is None
        assert "2D stability" in (tmp_path / "report.txt").read_text()

    def test_missing_reference_is_schema_error(self, tmp_path, dataset_sdf):
        cfg = write_cfg(tmp_path, "eval2.json", {
            "schema_version": 1,
            "generated_sdf": dataset_sdf,
            "metrics": {"distributional": True},
            "output": {"json": str(tmp_path / "r.json")},
        })
        assert main(["eval", "--config", cfg]) == 2

    def test_hand_computed_two_molecule_report(self, tmp_path, vocab):
        from molgen.metrics import stability_report
        from molgen.molecule import default_valence_table, Molecule
        good = template_molecule(6, vocab)
        coords = np.zeros((5, 3))
        coords[1:] = np.eye(3).tolist() + [[1.0, 1.0, 0.0]]
        bad = Molecule.from_graph(["N", "H", "H", "H", "H"], coords,
                                  [(0, i, "single") for i in range(1, 5)], None, vocab, "bad")
        gen = tmp_path / "two.sdf"
        gen.write_text(write_sdf([good, bad]), "utf-8")
        out_json = tmp_path / "two.json"
        cfg = write_cfg(tmp_path, "eval3.json", {
            "schema_version": 1,
            "generated_sdf": str(gen),
            "metrics": {"stability": True},
            "output": {"json": str(out_json)},
        })
        assert main(["eval", "--config", cfg]) == 0
        report = json.loads(out_json.read_text())
        assert report["stability"]["molecule_stability"] == 0.5
        assert report["stability"]["atom_stability"] == pytest.approx(10 / 11)


def fake_relaxer(tmp_path, body) -> str:
    script = tmp_path / "relaxer.py"
    script.write_text(textwrap.dedent(body))
    return f"{sys.executable} {script} {{input_xyz}} {{output_xyz}} {{energy_json}}"


IDENTITY_RELAXER = """
import json, shutil, sys
inp, out, energy = sys.argv[1:4]
shutil.copy(inp, out)
json.dump({"e_initial": 0.0, "e_optimized": 0.0}, open(energy, "w"))
"""

BROKEN_RELAXER = """
import json, sys
inp, out, energy = sys.argv[1:4]
lines = open(inp).read().splitlines()
n = int(lines[0])
open(out, "w").write("\\n".join([str(n - 1), ""] + lines[2:1 + n]) + "\\n")
json.dump({"e_initial": 0.0, "e_optimized": 0.0}, open(energy, "w"))
"""


class TestRelaxCommand:
    def _cfg(self, tmp_path, input_sdf, command, **over):
        payload = {
            "schema_version": 1,
            "input_sdf": input_sdf,
            "relaxer": {"command": command, "timeout": 30.0},
            "output": {
                "initial_sdf": str(tmp_path / "init.sdf"),
                "relaxed_sdf": str(tmp_path / "relaxed.sdf"),
                "energies_json": str(tmp_path / "energies.json"),
                "summary": str(tmp_path / "relax_summary.json"),
            },
        }
        payload.update(over)
        return payload

    def test_identity_relaxer_round_trip(self, tmp_path, vocab, dataset_sdf):
        cmd = fake_relaxer(tmp_path, IDENTITY_RELAXER)
        cfg = write_cfg(tmp_path, "rx.json", self._cfg(tmp_path, dataset_sdf, cmd))
        assert main(["relax", "--config", cfg]) == 0
        init = parse_sdf_v2000((tmp_path / "init.sdf").read_text(), vocab)
        relaxed = parse_sdf_v2000((tmp_path / "relaxed.sdf").read_text(), vocab)
        assert len(init) == len(relaxed) == 12
        for a, b in zip(init, relaxed):
            assert a.graph_equal(b)
            assert np.abs(a.coords - b.coords).max() < 1e-6
        energies = json.loads((tmp_path / "energies.json").read_text())
        assert all(e["e_initial"] == 0.0 and e["e_optimized"] == 0.0 for e in energies)
        summary = json.loads((tmp_path / "relax_summary.json").read_text())
        assert summary["n_failed"] == 0

    def test_wrong_atom_count_excluded_not_fatal(self, tmp_path, vocab, dataset_sdf):
        cmd = fake_relaxer(tmp_path, BROKEN_RELAXER)
        cfg = write_cfg(tmp_path, "rx2.json", self._cfg(tmp_path, dataset_sdf, cmd))
        assert main(["relax", "--config", cfg]) == 0
        summary = json.loads((tmp_path / "relax_summary.json").read_text())
        assert summary["n_failed"] == 12
        assert all("atom count" in f["reason"] or "mismatch" in f["reason"]
                   for f in summary["failures"])

    def test_timeout_honored(self, tmp_path, vocab):
        import time
        mols = [template_molecule(6, vocab)]
        one = tmp_path / "one.sdf"
        one.write_text(write_sdf(mols), "utf-8")
        cmd = fake_relaxer(tmp_path, "import time, sys\ntime.sleep(30)\n")
        cfg = write_cfg(tmp_path, "rx4.json", self._cfg(
            tmp_path, str(one), cmd,
            relaxer={"command": cmd, "timeout": 1.0}))
        t0 = time.time()
        assert main(["relax", "--config", cfg]) == 0
        elapsed = time.time() - t0
        assert elapsed < 2.0  # 1 s timeout honored within +- 1 s
        summary = json.loads((tmp_path / "relax_summary.json").read_text())
        assert summary["n_failed"] == 1
        assert "timeout" in summary["failures"][0]["reason"]

    def test_hartree_conversion(self, tmp_path, vocab, dataset_sdf):
        body = IDENTITY_RELAXER.replace('"e_initial": 0.0, "e_optimized": 0.0',
                                        '"e_initial": 1.0, "e_optimized": 0.5')
        cmd = fake_relaxer(tmp_path, body)
        cfg = write_cfg(tmp_path, "rx3.json", self._cfg(
            tmp_path, dataset_sdf, cmd,
            relaxer={"command": cmd, "timeout": 30.0, "energy_units": "hartree"}))
        assert main(["relax", "--config", cfg]) == 0
        energies = json.loads((tmp_path / "energies.json").read_text())
        assert energies[0]["e_initial"] == pytest.approx(627.509)
        assert energies[0]["e_optimized"] == pytest.approx(313.7545)
