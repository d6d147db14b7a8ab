"""External structure-relaxation hook.

Relaxation itself (force field or semi-empirical optimization) is consumed
through a user-supplied command, never implemented here. The command
template receives three placeholders:

    {input_xyz}    path of the structure to relax (written by us)
    {output_xyz}   path where the command must write the relaxed structure
    {energy_json}  path where the command must write
                   {"e_initial": <num>, "e_optimized": <num>}

The relaxed XYZ must keep the atom count and element sequence of the input.
Energies cross the boundary in kcal/mol; commands that report Hartree
declare ``energy_units: "hartree"`` and are converted.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .molecule import Molecule
from .molio import ParseError, parse_xyz, write_xyz

__all__ = ["RelaxerHook", "RelaxerFailure", "HARTREE_TO_KCAL"]

HARTREE_TO_KCAL = 627.509


class RelaxerFailure(RuntimeError):
    """Per-molecule relaxer breakdown; callers record it and keep going."""


@dataclass(frozen=True)
class RelaxerHook:
    command: str
    timeout: float = 60.0
    energy_units: str = "kcal/mol"  # or "hartree"

    def __post_init__(self):
        for ph in ("{input_xyz}", "{output_xyz}", "{energy_json}"):
            if ph not in self.command:
                raise ValueError(f"relaxer command must contain the {ph} placeholder")
        if self.energy_units not in ("kcal/mol", "hartree"):
            raise ValueError(f"unknown energy units {self.energy_units!r}")

    def run(self, mol: Molecule) -> tuple[Molecule, float, float]:
        """Relax one molecule; returns (relaxed, E_initial, E_optimized) in
        kcal/mol. Raises RelaxerFailure on any per-molecule problem."""
        with tempfile.TemporaryDirectory(prefix="molgen_relax_") as tmp:
            tmp = Path(tmp)
            in_path = tmp / "input.xyz"
            out_path = tmp / "output.xyz"
            energy_path = tmp / "energy.json"
            in_path.write_text(write_xyz(mol), encoding="utf-8")
            argv = shlex.split(self.command.format(
                input_xyz=str(in_path), output_xyz=str(out_path),
                energy_json=str(energy_path)))
            try:
                proc = subprocess.run(argv, capture_output=True, timeout=self.timeout)
            except subprocess.TimeoutExpired:
                raise RelaxerFailure(f"timeout after {self.timeout} s") from None
            except OSError as exc:
                raise RelaxerFailure(f"could not launch relaxer: {exc}") from None
            if proc.returncode != 0:
                tail = proc.stderr.decode("utf-8", "replace").strip()[-500:]
                raise RelaxerFailure(f"exit status {proc.returncode}: {tail}")
            if not out_path.exists():
                raise RelaxerFailure("relaxer produced no output structure")
            try:
                relaxed = parse_xyz(out_path.read_text(encoding="utf-8"), mol.vocab)
            except ParseError as exc:
                raise RelaxerFailure(f"relaxed structure unreadable: {exc}") from None
            if relaxed.n_atoms != mol.n_atoms:
                raise RelaxerFailure(
                    f"atom count drifted: {mol.n_atoms} in, {relaxed.n_atoms} out")
            if relaxed.symbols != mol.symbols:
                raise RelaxerFailure("element sequence changed during relaxation")
            try:
                payload = json.loads(energy_path.read_text(encoding="utf-8"))
                e_init = float(payload["e_initial"])
                e_opt = float(payload["e_optimized"])
            except (OSError, KeyError, ValueError, TypeError) as exc:
                raise RelaxerFailure(f"energy file unreadable: {exc}") from None
            if self.energy_units == "hartree":
                e_init *= HARTREE_TO_KCAL
                e_opt *= HARTREE_TO_KCAL
            # graph copied from the input; the relaxer only moves coordinates
            return mol.with_coords(relaxed.coords), e_init, e_opt
