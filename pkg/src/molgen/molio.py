"""XYZ and MOL/SDF V2000 readers and writers.

Parsing is lossless: coordinates are taken verbatim (never re-centered) and
records keep their file order. SDF records are separated by ``$$$$`` lines;
formal charges default to 0 unless ``M  CHG`` lines say otherwise, matching
V2000 semantics where a charge property block supersedes the atom columns.
"""

from __future__ import annotations

import numpy as np

from .molecule import Molecule, Vocabulary, default_vocabulary

__all__ = [
    "ParseError",
    "parse_xyz",
    "write_xyz",
    "parse_sdf_v2000",
    "write_sdf_v2000",
    "write_sdf",
]

# V2000 bond code -> vocabulary bond name
_BOND_CODE_TO_NAME = {1: "single", 2: "double", 3: "triple", 4: "aromatic"}
_BOND_NAME_TO_CODE = {v: k for k, v in _BOND_CODE_TO_NAME.items()}


class ParseError(ValueError):
    """Malformed molecule file; message carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _parse_float(token: str, line_no: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"malformed {what} {token!r}", line_no) from None


# ---------------------------------------------------------------------------
# XYZ
# ---------------------------------------------------------------------------

def parse_xyz(text: str, vocab: Vocabulary | None = None) -> Molecule:
    """Parse one XYZ block: count line, comment line, then `symbol x y z` rows."""
    vocab = vocab or default_vocabulary()
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ParseError("missing atom count line", 1)
    try:
        declared = int(lines[0].strip())
    except ValueError:
        raise ParseError(f"malformed atom count {lines[0].strip()!r}", 1) from None
    if declared < 1:
        raise ParseError("atom count must be >= 1", 1)
    name = lines[1].strip() if len(lines) > 1 else ""

    symbols: list[str] = []
    coords: list[list[float]] = []
    for off, raw in enumerate(lines[2:]):
        line_no = off + 3
        if not raw.strip():
            continue
        parts = raw.split()
        if len(parts) < 4:
            raise ParseError(f"expected `symbol x y z`, got {raw!r}", line_no)
        sym = parts[0]
        if sym not in vocab.elements:
            raise ParseError(f"unknown element symbol {sym!r}", line_no)
        xyz = [_parse_float(p, line_no, "coordinate") for p in parts[1:4]]
        symbols.append(sym)
        coords.append(xyz)
        if len(symbols) == declared:
            break
    if len(symbols) != declared:
        raise ParseError(
            f"atom count mismatch: declared {declared}, found {len(symbols)}",
            len(lines),
        )
    return Molecule.from_graph(symbols, np.asarray(coords), [], None, vocab, name)


def write_xyz(mol: Molecule) -> str:
    """Serialize to XYZ with 10 decimal places (round-trips to 1e-6 and better)."""
    out = [str(mol.n_atoms), mol.name]
    for sym, (x, y, z) in zip(mol.symbols, mol.coords):
        out.append(f"{sym} {x:.10f} {y:.10f} {z:.10f}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# MOL / SDF V2000
# ---------------------------------------------------------------------------

def _parse_mol_block(lines: list[str], base: int, vocab: Vocabulary) -> Molecule:
    """Parse one V2000 molblock. `base` is the 0-based file offset of the block."""

    def err(msg: str, local: int) -> ParseError:
        return ParseError(msg, base + local + 1)

    if len(lines) < 4:
        raise err("truncated block: missing counts line", len(lines))
    name = lines[0].strip()
    counts = lines[3]
    if len(counts) < 6:
        raise err(f"malformed counts line {counts!r}", 3)
    try:
        n_atoms = int(counts[0:3])
        n_bonds = int(counts[3:6])
    except ValueError:
        raise err(f"malformed counts line {counts!r}", 3) from None
    if n_atoms < 1:
        raise err("molecule must contain at least one atom", 3)

    atom_end = 4 + n_atoms
    bond_end = atom_end + n_bonds
    if len(lines) < bond_end:
        raise err("truncated block: atom/bond lines missing", len(lines))

    symbols: list[str] = []
    coords = np.zeros((n_atoms, 3))
    for i in range(n_atoms):
        raw = lines[4 + i]
        local = 4 + i
        if len(raw) < 34:
            # short line: tolerate whitespace-separated fallback
            parts = raw.split()
            if len(parts) < 4:
                raise err(f"malformed atom line {raw!r}", local)
            xs, ys, zs, sym = parts[0], parts[1], parts[2], parts[3]
        else:
            xs, ys, zs = raw[0:10], raw[10:20], raw[20:30]
            sym = raw[31:34].strip()
        if sym not in vocab.elements:
            raise err(f"unknown element symbol {sym!r}", local)
        coords[i, 0] = _parse_float(xs.strip(), base + local + 1, "coordinate")
        coords[i, 1] = _parse_float(ys.strip(), base + local + 1, "coordinate")
        coords[i, 2] = _parse_float(zs.strip(), base + local + 1, "coordinate")
        symbols.append(sym)

    bond_pairs: list[tuple[int, int, str]] = []
    for k in range(n_bonds):
        raw = lines[atom_end + k]
        local = atom_end + k
        if len(raw) < 9:
            parts = raw.split()
            if len(parts) < 3:
                raise err(f"malformed bond line {raw!r}", local)
            fields = parts[:3]
        else:
            fields = [raw[0:3], raw[3:6], raw[6:9]]
        try:
            a, b, code = (int(f) for f in fields)
        except ValueError:
            raise err(f"malformed bond line {raw!r}", local) from None
        if not (1 <= a <= n_atoms and 1 <= b <= n_atoms):
            raise err(f"bond atom index out of range: {a}-{b} with {n_atoms} atoms", local)
        bname = _BOND_CODE_TO_NAME.get(code)
        if bname is None or bname not in vocab.bond_names:
            raise err(f"unsupported bond code {code}", local)
        bond_pairs.append((a - 1, b - 1, bname))

    charge_ints = [0] * n_atoms
    for k in range(bond_end, len(lines)):
        raw = lines[k]
        if raw.startswith("M  CHG"):
            parts = raw.split()
            try:
                count = int(parts[2])
                vals = [int(p) for p in parts[3 : 3 + 2 * count]]
            except (IndexError, ValueError):
                raise err(f"malformed M  CHG line {raw!r}", k) from None
            if len(vals) != 2 * count:
                raise err(f"M  CHG declares {count} pairs, fewer found", k)
            for idx, chg in zip(vals[0::2], vals[1::2]):
                if not 1 <= idx <= n_atoms:
                    raise err(f"M  CHG atom index {idx} out of range", k)
                charge_ints[idx - 1] = chg
        elif raw.startswith("M  END"):
            break

    return Molecule.from_graph(symbols, coords, bond_pairs, charge_ints, vocab, name)


def parse_sdf_v2000(text: str, vocab: Vocabulary | None = None) -> list[Molecule]:
    """Parse an SDF file (one or more V2000 records separated by `$$$$`)."""
    vocab = vocab or default_vocabulary()
    lines = text.splitlines()
    mols: list[Molecule] = []
    block: list[str] = []
    base = 0
    for i, raw in enumerate(lines):
        if raw.strip() == "$$$$":
            if any(l.strip() for l in block):
                mols.append(_parse_mol_block(block, base, vocab))
            block = []
            base = i + 1
        else:
            block.append(raw)
    if any(l.strip() for l in block):
        mols.append(_parse_mol_block(block, base, vocab))
    if not mols:
        raise ParseError("no molecule records found", 1)
    return mols


def write_sdf_v2000(mol: Molecule) -> str:
    """Serialize a single molecule as one SDF record (terminated by `$$$$`).

    Coordinates are written with 6 decimals, which is above the V2000 habit of
    4 but still fits the 10-column field for coordinates below 1000 Angstrom.
    """
    for sym in mol.symbols:
        if sym not in mol.vocab.elements:
            raise ValueError(f"element {sym!r} outside vocabulary")
    bond_idx = mol.bond_indices
    pairs = [
        (i, j)
        for i in range(mol.n_atoms)
        for j in range(i + 1, mol.n_atoms)
        if bond_idx[i, j] != 0
    ]
    lines = [mol.name, "  molgen", ""]
    lines.append(f"{mol.n_atoms:3d}{len(pairs):3d}  0  0  0  0  0  0  0  0999 V2000")
    for sym, (x, y, z) in zip(mol.symbols, mol.coords):
        lines.append(f"{x:10.6f}{y:10.6f}{z:10.6f} {sym:<3s} 0  0  0  0  0  0  0  0  0  0  0  0")
    for i, j in pairs:
        code = _BOND_NAME_TO_CODE[mol.vocab.bond_names[bond_idx[i, j]]]
        lines.append(f"{i + 1:3d}{j + 1:3d}{code:3d}  0")
    charged = [(i + 1, int(c)) for i, c in enumerate(mol.charge_ints) if c != 0]
    for k in range(0, len(charged), 8):
        chunk = charged[k : k + 8]
        body = "".join(f"{idx:4d}{chg:4d}" for idx, chg in chunk)
        lines.append(f"M  CHG{len(chunk):3d}{body}")
    lines.append("M  END")
    lines.append("$$$$")
    return "\n".join(lines) + "\n"


def write_sdf(mols: list[Molecule]) -> str:
    """Serialize a list of molecules as a multi-record SDF."""
    return "".join(write_sdf_v2000(m) for m in mols)
