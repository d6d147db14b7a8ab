"""Command-line harness: sample, sample-cond, train-toy, eval, relax.

Every command is a pure function of (config, input files, seed): rerunning
with the same inputs produces byte-identical outputs. Per-item failures
(e.g. one molecule's relaxer run) are recorded in a machine-readable summary
without aborting the batch; schema errors abort before any work with exit
status 2.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, apply_overrides, validate_config
from .discrete import build_uniform_kernel
from .metrics import (
    CoverageConfig,
    coverage_amr,
    relaxation_report,
    render_table,
    stability_report,
    w_angles,
    w_torsions,
    connected_valid,
)
from .molecule import ValenceTable, default_valence_table, default_vocabulary
from .molio import ParseError, parse_sdf_v2000, write_sdf
from .nn import DenoiserConfig, ModelState, init_model, load_model, save_model
from .relax import RelaxerFailure, RelaxerHook
from .sampling import (
    ModelPredictor,
    OraclePredictor,
    SizeSampler,
    ddpm_generate,
    fm_generate,
    generate_conditional,
)
from .schedules import Schedule, TimeDistribution, TrackSchedules
from .training import Adam, LossWeights, SGDMomentum, TrackKernels, dual_time_training_step

CONFIG_ENV_VAR = "MOLGEN_CONFIG"


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

def _read_config(args) -> dict:
    path = args.config or os.environ.get(CONFIG_ENV_VAR)
    if not path:
        raise ConfigError(f"no config given (use --config or ${CONFIG_ENV_VAR})")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from None
    return apply_overrides(cfg, args.set or [])


def _schedules_from(cfg: dict, steps: int | None) -> TrackSchedules:
    tracks = {}
    for key in ("coords", "atoms", "bonds", "charges"):
        sc = dict(cfg["schedules"][key])
        if steps is not None:
            sc["T"] = steps
        tracks[key] = Schedule.from_config(sc)
    return TrackSchedules(**tracks)


def _effective_steps(cfg: dict) -> int:
    if cfg["steps"] is not None:
        return cfg["steps"]
    return 500 if cfg["objective"] == "diffusion" else 100


def _kernels_for(vocab, scheds: TrackSchedules) -> TrackKernels:
    return TrackKernels(
        atoms=build_uniform_kernel(vocab.n_elements, scheds.atoms),
        bonds=build_uniform_kernel(vocab.n_bond_types, scheds.bonds),
        charges=build_uniform_kernel(vocab.n_charges, scheds.charges),
    )


def _build_model(cfg: dict, vocab) -> tuple[str, ModelState | None, list]:
    """Returns (kind, state or None, oracle templates)."""
    mcfg = cfg["model"]
    kind = mcfg["kind"]
    if kind == "checkpoint":
        if not mcfg["path"]:
            raise ConfigError("model.kind=checkpoint requires model.path")
        state, _, _ = load_model(mcfg["path"])
        return kind, state, []
    if kind == "oracle":
        if not mcfg["oracle_sdf"]:
            raise ConfigError("model.kind=oracle requires model.oracle_sdf")
        templates = parse_sdf_v2000(Path(mcfg["oracle_sdf"]).read_text("utf-8"), vocab)
        return kind, None, templates
    arch = DenoiserConfig(
        n_elements=vocab.n_elements,
        n_bond_types=vocab.n_bond_types,
        n_charges=vocab.n_charges,
        **mcfg["config"],
    )
    state = init_model(arch, np.random.Generator(np.random.PCG64(mcfg["init_seed"])))
    return kind, state, []


def _write_summary(path: str | None, payload: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_sample(cfg: dict) -> int:
    vocab = default_vocabulary(kekulized=cfg["kekulized"])
    steps = _effective_steps(cfg)
    scheds = _schedules_from(cfg, steps)
    kind, state, templates = _build_model(cfg, vocab)
    rng = np.random.Generator(np.random.PCG64(cfg["seed"]))

    if cfg["sizes"]["histogram"]:
        payload = json.loads(Path(cfg["sizes"]["histogram"]).read_text("utf-8"))
        sizes = SizeSampler.from_json_dict(payload)
    elif cfg["sizes"]["fixed"]:
        sizes = SizeSampler.fixed(cfg["sizes"]["fixed"])
    elif kind != "oracle":
        raise ConfigError("sizes.fixed or sizes.histogram required (non-oracle models)")
    else:
        sizes = None

    diffusion = cfg["objective"] == "diffusion"
    kernels = _kernels_for(vocab, scheds) if diffusion else TrackKernels()
    mols = []
    for i in range(cfg["count"]):
        if kind == "oracle":
            template = templates[i % len(templates)]
            predictor = OraclePredictor(template)
            n = template.n_atoms
        else:
            predictor = ModelPredictor(state)
            n = sizes.draw(rng)
        name = f"sample_{i:05d}"
        if diffusion:
            mols.append(ddpm_generate(predictor, n, vocab, scheds, kernels, rng, name=name))
        else:
            mols.append(fm_generate(predictor, n, vocab, scheds, rng, steps=steps, name=name))
    Path(cfg["output"]["sdf"]).write_text(write_sdf(mols), "utf-8")
    _write_summary(cfg["output"]["summary"], {
        "command": "sample", "count": len(mols), "failures": [], "steps": steps,
    })
    return 0


def cmd_sample_cond(cfg: dict) -> int:
    vocab = default_vocabulary(kekulized=cfg["kekulized"])
    steps = _effective_steps(cfg)
    scheds = _schedules_from(cfg, steps)
    kind, state, _ = _build_model(cfg, vocab)
    templates = parse_sdf_v2000(Path(cfg["template_sdf"]).read_text("utf-8"), vocab)
    rng = np.random.Generator(np.random.PCG64(cfg["seed"]))
    diffusion = cfg["objective"] == "diffusion"
    kernels = _kernels_for(vocab, scheds) if diffusion else None

    mols = []
    for ti, template in enumerate(templates):
        # the oracle coordinate denoiser replays the template's own structure
        predictor = OraclePredictor(template) if kind == "oracle" else ModelPredictor(state)
        for k in range(cfg["multiplicity"]):
            name = f"{template.name or f'template_{ti}'}_conf{k}"
            mols.append(generate_conditional(
                predictor, template, scheds, kernels, rng,
                objective=cfg["objective"], steps=steps, name=name))
    Path(cfg["output"]["sdf"]).write_text(write_sdf(mols), "utf-8")
    _write_summary(cfg["output"]["summary"], {
        "command": "sample-cond", "templates": len(templates),
        "multiplicity": cfg["multiplicity"], "count": len(mols), "failures": [],
    })
    return 0


def _step_rng(seed: int, step: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=seed, spawn_key=(step,))))


def cmd_train_toy(cfg: dict) -> int:
    vocab = default_vocabulary(kekulized=cfg["kekulized"])
    dataset = parse_sdf_v2000(Path(cfg["data_sdf"]).read_text("utf-8"), vocab)
    if not dataset:
        raise ConfigError("empty training dataset")
    scheds = _schedules_from(cfg, None)
    diffusion = cfg["objective"] == "diffusion"
    kernels = _kernels_for(vocab, scheds) if diffusion else TrackKernels()
    time_dist = TimeDistribution.from_config(cfg["time_distribution"])
    weights = LossWeights.from_config(cfg["loss_weights"])

    def make_opt(state):
        if cfg["optimizer"] == "adam":
            return Adam(state, lr=cfg["lr"], clip_norm=cfg["clip_norm"])
        return SGDMomentum(state, lr=cfg["lr"], momentum=cfg["momentum"],
                           clip_norm=cfg["clip_norm"])

    start_step = 0
    if cfg["resume"]:
        state, extra, extra_tensors = load_model(cfg["resume"])
        start_step = int(extra.get("step", 0))
        opt = make_opt(state)
        opt.load_state_tensors(extra_tensors)
    else:
        kind, state, _ = _build_model(cfg, vocab)
        if kind != "zero_init":
            raise ConfigError("train-toy starts from model.kind=zero_init (or use resume)")
        opt = make_opt(state)

    rows = []
    for step in range(start_step, cfg["steps"]):
        rng = _step_rng(cfg["seed"], step)
        idx = rng.integers(0, len(dataset), size=cfg["batch_size"])
        batch = [dataset[int(i)] for i in idx]
        losses = dual_time_training_step(
            batch, state, scheds, kernels, time_dist, opt, rng,
            weights=weights, objective=cfg["objective"],
            sc_drop=cfg["sc_drop"], rot_align=cfg["rot_align"])
        rows.append([step, losses["total"], losses["coords"], losses["atoms"],
                     losses["bonds"], losses["charges"]])

    with open(cfg["output"]["loss_csv"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "total", "coords", "atoms", "bonds", "charges"])
        for row in rows:
            writer.writerow([row[0]] + [repr(v) for v in row[1:]])
    save_model(state, cfg["output"]["checkpoint"],
               extra={"step": cfg["steps"]},
               extra_tensors=opt.state_tensors())
    return 0


def _load_valence_table(cfg: dict) -> ValenceTable:
    if cfg.get("valence_table"):
        return ValenceTable.from_file(cfg["valence_table"])
    return default_valence_table()


def _group_conformers(mols):
    groups: dict[str, list] = {}
    order: list[str] = []
    for mol in mols:
        if mol.name not in groups:
            groups[mol.name] = []
            order.append(mol.name)
        groups[mol.name].append(mol)
    return order, groups


def cmd_eval(cfg: dict) -> int:
    vocab = default_vocabulary(kekulized=cfg["kekulized"])
    gen = parse_sdf_v2000(Path(cfg["generated_sdf"]).read_text("utf-8"), vocab)
    ref = None
    if cfg["reference_sdf"]:
        ref = parse_sdf_v2000(Path(cfg["reference_sdf"]).read_text("utf-8"), vocab)
    metrics_cfg = cfg["metrics"]
    if metrics_cfg["distributional"] and ref is None:
        raise ConfigError("metrics.distributional requires reference_sdf")
    if metrics_cfg["coverage"]["enabled"] and ref is None:
        raise ConfigError("metrics.coverage requires reference_sdf")
    if metrics_cfg["relaxation"]["enabled"] and not metrics_cfg["relaxation"]["relaxed_sdf"]:
        raise ConfigError("metrics.relaxation requires relaxed_sdf")

    table = _load_valence_table(cfg)
    report: dict = {}
    text_blocks: list[str] = []

    if metrics_cfg["stability"]:
        stab = stability_report(gen, table)
        report["stability"] = stab.to_dict()
        text_blocks.append("== 2D stability ==\n" + render_table(
            ["metric", "value"],
            [["atom_stability", stab.atom_stability],
             ["molecule_stability", stab.molecule_stability],
             ["connected_validity", stab.connected_validity]]))

    if metrics_cfg["distributional"]:
        angle_w1 = w_angles(gen, ref)
        gen_valid = [m for m in gen if connected_valid(m, table)]
        torsion_w1 = w_torsions(gen_valid, ref) if gen_valid else None
        report["distributional"] = {"w_angles": angle_w1, "w_torsions": torsion_w1,
                                    "n_valid_for_torsions": len(gen_valid)}
        text_blocks.append("== 3D distributional ==\n" + render_table(
            ["metric", "value"],
            [["w_angles", angle_w1],
             ["w_torsions", torsion_w1 if torsion_w1 is not None else float("nan")]]))

    if metrics_cfg["coverage"]["enabled"]:
        gen_order, gen_groups = _group_conformers(gen)
        ref_order, ref_groups = _group_conformers(ref)
        if set(gen_order) != set(ref_order):
            raise ConfigError("mismatched conformer groupings between generated and reference")
        cov_cfg = CoverageConfig(delta=metrics_cfg["coverage"]["delta"],
                                 gen_per_ref=metrics_cfg["coverage"]["gen_per_ref"])
        result = coverage_amr([gen_groups[n] for n in ref_order],
                              [ref_groups[n] for n in ref_order], cov_cfg)
        report["coverage"] = result.to_dict()
        text_blocks.append("== conformer ensembles ==\n" + render_table(
            ["metric", "mean", "median"],
            [["coverage_recall", result.cov_recall_mean, result.cov_recall_median],
             ["amr_recall", result.amr_recall_mean, result.amr_recall_median],
             ["coverage_precision", result.cov_precision_mean, result.cov_precision_median],
             ["amr_precision", result.amr_precision_mean, result.amr_precision_median]]))

    if metrics_cfg["relaxation"]["enabled"]:
        relaxed = parse_sdf_v2000(
            Path(metrics_cfg["relaxation"]["relaxed_sdf"]).read_text("utf-8"), vocab)
        if len(relaxed) != len(gen):
            raise ConfigError("relaxed_sdf must align 1:1 with generated_sdf")
        energies = None
        if metrics_cfg["relaxation"]["energies_json"]:
            payload = json.loads(Path(metrics_cfg["relaxation"]["energies_json"]).read_text("utf-8"))
            energies = [(float(e["e_initial"]), float(e["e_optimized"])) for e in payload]
            if len(energies) != len(gen):
                raise ConfigError("energies_json must align 1:1 with generated_sdf")
        pairs = []
        kept_energies = [] if energies is not None else None
        excluded = []
        for i, (a, b) in enumerate(zip(gen, relaxed)):
            if a.graph_equal(b):
                pairs.append((a, b))
                if energies is not None:
                    kept_energies.append(energies[i])
            else:
                excluded.append({"index": i, "name": a.name, "reason": "graph mismatch"})
        if not pairs:
            raise ConfigError("no usable (initial, relaxed) pairs")
        relax_rep = relaxation_report(pairs, kept_energies)
        report["relaxation"] = relax_rep.to_dict()
        report["relaxation"]["excluded"] = excluded
        report["relaxation"]["n_excluded"] = len(excluded)
        text_blocks.append("== relaxation ==\n" + render_table(
            ["metric", "value"],
            [["bond_length_delta", relax_rep.bond_length_delta],
             ["bond_angle_delta", relax_rep.bond_angle_delta],
             ["torsion_delta", relax_rep.torsion_delta],
             ["median_delta_e", relax_rep.median_delta_e if relax_rep.median_delta_e is not None else float("nan")],
             ["mean_delta_e", relax_rep.mean_delta_e if relax_rep.mean_delta_e is not None else float("nan")]]))

    Path(cfg["output"]["json"]).write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", "utf-8")
    if cfg["output"]["text"]:
        Path(cfg["output"]["text"]).write_text("\n".join(text_blocks), "utf-8")
    return 0


def cmd_relax(cfg: dict) -> int:
    vocab = default_vocabulary(kekulized=cfg["kekulized"])
    mols = parse_sdf_v2000(Path(cfg["input_sdf"]).read_text("utf-8"), vocab)
    hook = RelaxerHook(command=cfg["relaxer"]["command"],
                       timeout=cfg["relaxer"]["timeout"],
                       energy_units=cfg["relaxer"]["energy_units"])
    kept_initial = []
    kept_relaxed = []
    energies = []
    failures = []
    for i, mol in enumerate(mols):
        try:
            relaxed, e_init, e_opt = hook.run(mol)
        except RelaxerFailure as exc:
            failures.append({"index": i, "name": mol.name, "reason": str(exc)})
            continue
        kept_initial.append(mol)
        kept_relaxed.append(relaxed)
        energies.append({"name": mol.name, "e_initial": e_init, "e_optimized": e_opt})
    Path(cfg["output"]["initial_sdf"]).write_text(write_sdf(kept_initial), "utf-8")
    Path(cfg["output"]["relaxed_sdf"]).write_text(write_sdf(kept_relaxed), "utf-8")
    Path(cfg["output"]["energies_json"]).write_text(
        json.dumps(energies, indent=2, sort_keys=True) + "\n", "utf-8")
    _write_summary(cfg["output"]["summary"], {
        "command": "relax", "n_input": len(mols), "n_relaxed": len(kept_initial),
        "n_failed": len(failures), "failures": failures,
    })
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "sample": cmd_sample,
    "sample-cond": cmd_sample_cond,
    "train-toy": cmd_train_toy,
    "eval": cmd_eval,
    "relax": cmd_relax,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="molgen",
        description="molecule generation and benchmark toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help=f"JSON config path (or ${CONFIG_ENV_VAR})")
        p.add_argument("--set", action="append", metavar="PATH=VALUE",
                       help="override a config leaf via dotted path")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = _read_config(args)
        cfg = validate_config(raw, args.command)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, OSError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
