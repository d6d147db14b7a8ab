"""Equivariant denoising transformer over molecule tracks.

The network consumes a noisy molecule state (coordinates, atom types, bonds,
charges) plus two time variables (one for the continuous track, one for the
discrete tracks) and predicts the clean state. Blocks follow a fixed recipe:

    fused invariant feature -> QK-normalized attention
        -> per-track gated feed-forwards -> one structure update layer

Scalars (types, bonds, charges, all logits) are built exclusively from
rotation-invariant quantities, so they are SE(3)-invariant; the coordinate
update combines relative-position and cross-product directions with scalar
gates, making predicted coordinates SE(3)-equivariant but deliberately not
reflection-equivariant (the cross term is a pseudovector and flips sign
under mirroring).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = [
    "DenoiserConfig",
    "ModelState",
    "DenoiserOutput",
    "init_model",
    "expected_param_count",
    "zero_output_heads",
    "adaptive_layer_norm",
    "e3_norm",
    "fused_feature",
    "qk_norm_attention",
    "egnn_structure_layer",
    "denoiser_forward",
    "self_conditioned_forward",
    "save_model",
    "load_model",
]


@dataclass(frozen=True)
class DenoiserConfig:
    """Architecture hyperparameters; the parameter count is a pure function
    of this record."""

    n_elements: int
    n_bond_types: int
    n_charges: int
    layers: int = 2
    d_node: int = 32
    d_edge: int = 16
    heads: int = 4
    d_time: int = 32
    ff_mult: int = 4
    vector_features: int = 1
    self_conditioning: bool = True

    def __post_init__(self):
        if self.d_node % self.heads != 0:
            raise ValueError("d_node must be divisible by heads")

    def to_config(self) -> dict:
        return {
            "n_elements": self.n_elements,
            "n_bond_types": self.n_bond_types,
            "n_charges": self.n_charges,
            "layers": self.layers,
            "d_node": self.d_node,
            "d_edge": self.d_edge,
            "heads": self.heads,
            "d_time": self.d_time,
            "ff_mult": self.ff_mult,
            "vector_features": self.vector_features,
            "self_conditioning": self.self_conditioning,
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "DenoiserConfig":
        return cls(**cfg)


@dataclass
class ModelState:
    """Named parameter tensors plus the config that shaped them."""

    config: DenoiserConfig
    params: dict[str, Tensor]

    def param_count(self) -> int:
        return sum(int(t.data.size) for t in self.params.values())

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None


@dataclass
class DenoiserOutput:
    pred_coords: Tensor
    atom_logits: Tensor
    bond_logits: Tensor
    charge_logits: Tensor

    def numpy(self) -> dict[str, np.ndarray]:
        return {
            "pred_coords": self.pred_coords.data,
            "atom_logits": self.atom_logits.data,
            "bond_logits": self.bond_logits.data,
            "charge_logits": self.charge_logits.data,
        }


# ---------------------------------------------------------------------------
# parameter layout
# ---------------------------------------------------------------------------

_SIN_DIM = 32  # per time variable; two variables are concatenated


def _param_shapes(cfg: DenoiserConfig) -> list[tuple[str, tuple, str]]:
    """(name, shape, init) triples; init is 'fan_in', 'zeros', or 'ones'."""
    n, e, tau = cfg.d_node, cfg.d_edge, cfg.d_time
    A, B, K = cfg.n_elements, cfg.n_bond_types, cfg.n_charges
    ff = cfg.ff_mult
    shapes: list[tuple[str, tuple, str]] = [
        ("embed.atom.w", (A, n), "fan_in"),
        ("embed.charge.w", (K, n), "fan_in"),
        ("embed.bond.w", (B, e), "fan_in"),
        ("time.w1", (2 * _SIN_DIM, tau), "fan_in"),
        ("time.b1", (tau,), "zeros"),
        ("time.w2", (tau, tau), "fan_in"),
        ("time.b2", (tau,), "zeros"),
    ]

    def adaln(prefix: str, dim: int):
        shapes.extend([
            (f"{prefix}.gw", (tau, dim), "zeros"),
            (f"{prefix}.gb", (dim,), "zeros"),
            (f"{prefix}.dw", (tau, dim), "zeros"),
            (f"{prefix}.db", (dim,), "zeros"),
        ])

    def mlp2(prefix: str, d_in: int, d_hidden: int, d_out: int, zero_out: bool):
        shapes.extend([
            (f"{prefix}.w1", (d_in, d_hidden), "fan_in"),
            (f"{prefix}.b1", (d_hidden,), "zeros"),
            (f"{prefix}.w2", (d_hidden, d_out), "zeros" if zero_out else "fan_in"),
            (f"{prefix}.b2", (d_out,), "zeros"),
        ])

    for i in range(cfg.layers):
        pre = f"block{i}"
        adaln(f"{pre}.adaln_h", n)
        adaln(f"{pre}.adaln_e", e)
        shapes.append((f"{pre}.fuse.w", (2 * n + e + 2, n), "fan_in"))
        shapes.append((f"{pre}.fuse.b", (n,), "zeros"))
        for w in ("wq", "wk", "wv", "wo"):
            shapes.append((f"{pre}.attn.{w}", (n, n), "fan_in"))
        adaln(f"{pre}.ffn_h.adaln", n)
        shapes.extend([
            (f"{pre}.ffn_h.w1", (n, ff * n), "fan_in"),
            (f"{pre}.ffn_h.w2", (n, ff * n), "fan_in"),
            (f"{pre}.ffn_h.w3", (ff * n, n), "fan_in"),
        ])
        shapes.append((f"{pre}.edge_proj.w", (n, e), "fan_in"))
        shapes.append((f"{pre}.edge_proj.b", (e,), "zeros"))
        adaln(f"{pre}.ffn_e.adaln", e)
        shapes.extend([
            (f"{pre}.ffn_e.w1", (e, ff * e), "fan_in"),
            (f"{pre}.ffn_e.w2", (e, ff * e), "fan_in"),
            (f"{pre}.ffn_e.w3", (ff * e, e), "fan_in"),
        ])
        shapes.append((f"{pre}.struct.e3_gain", (1,), "ones"))
        # structure gates start at zero so layer 0 is the identity on coords
        mlp2(f"{pre}.struct.phi_d", 2 * n + 1 + e, n, 1, zero_out=True)
        mlp2(f"{pre}.struct.phi_x", 2 * n + 1 + e, n, 1, zero_out=True)

    mlp2("head.atom", n, n, A, zero_out=False)
    mlp2("head.charge", n, n, K, zero_out=False)
    mlp2("head.bond", e + 1, e, B, zero_out=False)

    if cfg.self_conditioning:
        shapes.append(("selfcond.coord.w_sc", (1,), "zeros"))
        shapes.append(("selfcond.coord.w_in", (1,), "zeros"))
        mlp2("selfcond.atom", 2 * A, A, A, zero_out=True)
        mlp2("selfcond.bond", 2 * B, B, B, zero_out=True)
        mlp2("selfcond.charge", 2 * K, K, K, zero_out=True)
    return shapes


def expected_param_count(cfg: DenoiserConfig) -> int:
    """Closed-form parameter count for a config (kept in sync by a test)."""
    n, e, tau = cfg.d_node, cfg.d_edge, cfg.d_time
    A, B, K = cfg.n_elements, cfg.n_bond_types, cfg.n_charges
    ff = cfg.ff_mult
    adaln = lambda d: 2 * (tau * d + d)
    mlp2 = lambda din, dh, dout: din * dh + dh + dh * dout + dout
    total = A * n + K * n + B * e
    total += 2 * _SIN_DIM * tau + tau + tau * tau + tau
    per_block = (
        adaln(n) + adaln(e)
        + (2 * n + e + 2) * n + n
        + 4 * n * n
        + adaln(n) + 3 * ff * n * n
        + n * e + e
        + adaln(e) + 3 * ff * e * e
        + 1
        + 2 * mlp2(2 * n + 1 + e, n, 1)
    )
    total += cfg.layers * per_block
    total += mlp2(n, n, A) + mlp2(n, n, K) + mlp2(e + 1, e, B)
    if cfg.self_conditioning:
        total += 2 + mlp2(2 * A, A, A) + mlp2(2 * B, B, B) + mlp2(2 * K, K, K)
    return total


def init_model(cfg: DenoiserConfig, rng: np.random.Generator) -> ModelState:
    params: dict[str, Tensor] = {}
    for name, shape, init in _param_shapes(cfg):
        if init == "zeros":
            data = np.zeros(shape)
        elif init == "ones":
            data = np.ones(shape)
        else:
            fan_in = shape[0] if len(shape) > 1 else 1
            data = rng.standard_normal(shape) / np.sqrt(fan_in)
        params[name] = Tensor(data, requires_grad=True)
    return ModelState(config=cfg, params=params)


def zero_output_heads(state: ModelState) -> None:
    """Zero the final projection of every output head (diagnostic helper)."""
    for track in ("atom", "charge", "bond"):
        for leaf in ("w2", "b2"):
            t = state.params[f"head.{track}.{leaf}"]
            t.data = np.zeros_like(t.data)


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def _sinusoidal(t: float, dim: int = _SIN_DIM) -> np.ndarray:
    half = dim // 2
    freqs = np.exp(np.linspace(0.0, np.log(1000.0), half))
    ang = t * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)])


def _mlp2(x: Tensor, p: dict[str, Tensor], prefix: str) -> Tensor:
    hidden = ad.silu(ad.linear(x, p[f"{prefix}.w1"], p[f"{prefix}.b1"]))
    return ad.linear(hidden, p[f"{prefix}.w2"], p[f"{prefix}.b2"])


def adaptive_layer_norm(h: Tensor, temb: Tensor, p: dict[str, Tensor], prefix: str) -> Tensor:
    """gamma(temb) * layer_norm(h) + delta(temb); the modulation projections
    start at zero so this opens as a plain layer norm."""
    gamma = ad.add(ad.linear(temb, p[f"{prefix}.gw"], p[f"{prefix}.gb"]), 1.0)
    delta = ad.linear(temb, p[f"{prefix}.dw"], p[f"{prefix}.db"])
    return ad.add(ad.mul(ad.layer_norm(h), gamma), delta)


def e3_norm(vectors: Tensor, gain: Tensor, eps: float = 1e-6) -> Tensor:
    """Scale a vector set by gain / RMS vector norm.

    Works on (N, 3) or (N, V, 3); the RMS is taken over atoms separately per
    channel and floored at eps, so zero input maps to zero output.
    """
    sq = ad.sum_reduce(ad.mul(vectors, vectors), axis=-1, keepdims=True)
    rms = ad.clamp_min(ad.sqrt(ad.mean_reduce(sq, axis=0, keepdims=True)), eps)
    return ad.mul(ad.div(vectors, rms), gain)


def _pairwise(x: Tensor, n: int, d: int) -> tuple[Tensor, Tensor]:
    xi = ad.broadcast_to(ad.reshape(x, (n, 1, d)), (n, n, d))
    xj = ad.broadcast_to(ad.reshape(x, (1, n, d)), (n, n, d))
    return xi, xj


def fused_feature(h_norm: Tensor, e_norm: Tensor, coords: Tensor,
                  p: dict[str, Tensor], prefix: str) -> Tensor:
    """Per-node invariant summary m_i = mean_j f(h_i, h_j, e_ij, d_ij, <x_i, x_j>).

    Coordinates must be centered; distances and dot products are the only
    geometric inputs, so the output is rotation-invariant.
    """
    n, d = h_norm.data.shape
    hi, hj = _pairwise(h_norm, n, d)
    xi, xj = _pairwise(coords, n, 3)
    dist = ad.vector_norm(ad.sub(xi, xj))
    dots = ad.reshape(ad.matmul(coords, ad.transpose(coords, (1, 0))), (n, n, 1))
    pair = ad.concat([hi, hj, e_norm, dist, dots], axis=-1)
    f = ad.silu(ad.linear(pair, p[f"{prefix}.w"], p[f"{prefix}.b"]))
    return ad.mean_reduce(f, axis=1)


def qk_norm_attention(m: Tensor, p: dict[str, Tensor], prefix: str, heads: int) -> Tensor:
    """Multi-head attention with L2-normalized queries and keys per head."""
    n, d = m.data.shape
    if d % heads != 0:
        raise ValueError("feature dim not divisible by heads")
    dh = d // heads

    def split(x):
        return ad.transpose(ad.reshape(x, (n, heads, dh)), (1, 0, 2))

    q = split(ad.matmul(m, p[f"{prefix}.wq"]))
    k = split(ad.matmul(m, p[f"{prefix}.wk"]))
    v = split(ad.matmul(m, p[f"{prefix}.wv"]))
    q = ad.div(q, ad.clamp_min(ad.vector_norm(q), 1e-12))
    k = ad.div(k, ad.clamp_min(ad.vector_norm(k), 1e-12))
    logits = ad.mul(ad.matmul(q, ad.transpose(k, (0, 2, 1))), float(np.sqrt(dh)))
    attn = ad.softmax(logits)
    out = ad.matmul(attn, v)
    out = ad.reshape(ad.transpose(out, (1, 0, 2)), (n, d))
    return ad.matmul(out, p[f"{prefix}.wo"])


def egnn_structure_layer(coords: Tensor, h: Tensor, e: Tensor,
                         p: dict[str, Tensor], prefix: str) -> Tensor:
    """Single coordinate update with relative-position and cross-product terms.

        x_i' = x_i + sum_{j != i} (x_i - x_j)/(d_ij + 1) * phi_d(...)
                     + (x_i - xbar) x (x_j - xbar) / (|...| + 1) * phi_x(...)

    Invariant inputs pass through layer norm, the coordinates through an RMS
    equivariant norm; the +1 denominators keep coincident and collinear
    configurations finite without masking.
    """
    n = coords.data.shape[0]
    dn = h.data.shape[-1]
    h_n = ad.layer_norm(h)
    e_n = ad.layer_norm(e)
    # the update is built from centered coordinates so the layer commutes
    # with translations on its own, not only inside the centered model
    centered = ad.sub(coords, ad.mean_reduce(coords, axis=0, keepdims=True))
    x_n = e3_norm(centered, p[f"{prefix}.e3_gain"])

    xi, xj = _pairwise(x_n, n, 3)
    diff = ad.sub(xi, xj)
    d = ad.vector_norm(diff)
    d2 = ad.mul(d, d)
    hi, hj = _pairwise(h_n, n, dn)
    feats = ad.concat([hi, hj, d2, e_n], axis=-1)
    gate_d = _mlp2(feats, p, f"{prefix}.phi_d")
    gate_x = _mlp2(feats, p, f"{prefix}.phi_x")

    mask = Tensor((1.0 - np.eye(n))[:, :, None])
    dist_term = ad.mul(ad.mul(ad.div(diff, ad.add(d, 1.0)), gate_d), mask)

    xbar = ad.mean_reduce(x_n, axis=0, keepdims=True)
    rel = ad.sub(x_n, xbar)
    ri, rj = _pairwise(rel, n, 3)
    cross = ad.cross_product(ri, rj)
    cnorm = ad.vector_norm(cross)
    cross_term = ad.mul(ad.mul(ad.div(cross, ad.add(cnorm, 1.0)), gate_x), mask)

    update = ad.sum_reduce(ad.add(dist_term, cross_term), axis=1)
    return ad.add(coords, update)


# ---------------------------------------------------------------------------
# full model
# ---------------------------------------------------------------------------

def _time_embedding(p: dict[str, Tensor], t_cont: float, t_disc: float) -> Tensor:
    feats = np.concatenate([_sinusoidal(t_cont), _sinusoidal(t_disc)])[None, :]
    hidden = ad.silu(ad.linear(Tensor(feats), p["time.w1"], p["time.b1"]))
    return ad.linear(hidden, p["time.w2"], p["time.b2"])


def denoiser_forward(state: ModelState, coords, atoms, bonds, charges,
                     t_cont: float, t_disc: float) -> DenoiserOutput:
    """Predict the clean molecule from one noisy state.

    Input coordinates are centered internally and the centroid is restored
    on the predicted coordinates, so translation equivariance is exact.
    """
    cfg = state.config
    p = state.params
    coords = coords if isinstance(coords, Tensor) else Tensor(coords)
    atoms = atoms if isinstance(atoms, Tensor) else Tensor(atoms)
    bonds = bonds if isinstance(bonds, Tensor) else Tensor(bonds)
    charges = charges if isinstance(charges, Tensor) else Tensor(charges)
    n = coords.data.shape[0]

    centroid = ad.mean_reduce(coords, axis=0, keepdims=True)
    xc = ad.sub(coords, centroid)
    temb = _time_embedding(p, t_cont, t_disc)

    h = ad.add(ad.matmul(atoms, p["embed.atom.w"]), ad.matmul(charges, p["embed.charge.w"]))
    e = ad.matmul(bonds, p["embed.bond.w"])

    for i in range(cfg.layers):
        pre = f"block{i}"
        h_n = adaptive_layer_norm(h, temb, p, f"{pre}.adaln_h")
        e_n = adaptive_layer_norm(e, temb, p, f"{pre}.adaln_e")
        m = fused_feature(h_n, e_n, xc, p, f"{pre}.fuse")
        mha = qk_norm_attention(m, p, f"{pre}.attn", cfg.heads)

        ffn_in = adaptive_layer_norm(mha, temb, p, f"{pre}.ffn_h.adaln")
        h = ad.add(h, ad.swiglu(ffn_in, p[f"{pre}.ffn_h.w1"], p[f"{pre}.ffn_h.w2"], p[f"{pre}.ffn_h.w3"]))

        mi, mj = _pairwise(mha, n, cfg.d_node)
        e_in = ad.linear(ad.add(mi, mj), p[f"{pre}.edge_proj.w"], p[f"{pre}.edge_proj.b"])
        e_ff = adaptive_layer_norm(e_in, temb, p, f"{pre}.ffn_e.adaln")
        e = ad.add(e, ad.swiglu(e_ff, p[f"{pre}.ffn_e.w1"], p[f"{pre}.ffn_e.w2"], p[f"{pre}.ffn_e.w3"]))

        xc = egnn_structure_layer(xc, h, e, p, f"{pre}.struct")

    h_out = ad.layer_norm(h)
    atom_logits = _mlp2(h_out, p, "head.atom")
    charge_logits = _mlp2(h_out, p, "head.charge")

    xi, xj = _pairwise(xc, n, 3)
    d = ad.vector_norm(ad.sub(xi, xj))
    z = _mlp2(ad.concat([e, d], axis=-1), p, "head.bond")
    bond_logits = ad.mul(ad.add(z, ad.transpose(z, (1, 0, 2))), 0.5)

    pred_coords = ad.add(xc, centroid)
    return DenoiserOutput(pred_coords, atom_logits, bond_logits, charge_logits)


def self_conditioned_forward(state: ModelState, coords, atoms, bonds, charges,
                             t_cont: float, t_disc: float,
                             rng: np.random.Generator | None = None,
                             drop_prob: float = 0.0) -> DenoiserOutput:
    """Two-pass wrapper feeding the first prediction back through residual maps.

    The coordinate feedback is a bias-free mix of centered vector channels
    (scalar weights keep rotation equivariance); discrete feedback consumes
    the raw logits. With probability ``drop_prob`` the first pass is skipped
    and the feedback is zeroed, the usual training regularization. Gradients
    flow through both passes.
    """
    cfg = state.config
    if not cfg.self_conditioning:
        return denoiser_forward(state, coords, atoms, bonds, charges, t_cont, t_disc)
    p = state.params
    coords = coords if isinstance(coords, Tensor) else Tensor(coords)
    atoms = atoms if isinstance(atoms, Tensor) else Tensor(atoms)
    bonds = bonds if isinstance(bonds, Tensor) else Tensor(bonds)
    charges = charges if isinstance(charges, Tensor) else Tensor(charges)
    n = coords.data.shape[0]

    if drop_prob > 0.0 and rng is not None and rng.random() < drop_prob:
        sc_coords = Tensor(np.zeros((n, 3)))
        sc_atoms = Tensor(np.zeros_like(atoms.data))
        sc_bonds = Tensor(np.zeros_like(bonds.data))
        sc_charges = Tensor(np.zeros_like(charges.data))
    else:
        first = denoiser_forward(state, coords, atoms, bonds, charges, t_cont, t_disc)
        sc_coords, sc_atoms = first.pred_coords, first.atom_logits
        sc_bonds, sc_charges = first.bond_logits, first.charge_logits

    c = ad.mean_reduce(coords, axis=0, keepdims=True)
    coord_fb = ad.add(
        ad.mul(ad.sub(sc_coords, c), p["selfcond.coord.w_sc"]),
        ad.mul(ad.sub(coords, c), p["selfcond.coord.w_in"]),
    )
    coords2 = ad.add(coords, coord_fb)
    atoms2 = ad.add(atoms, _mlp2(ad.concat([sc_atoms, atoms], axis=-1), p, "selfcond.atom"))
    bonds2 = ad.add(bonds, _mlp2(ad.concat([sc_bonds, bonds], axis=-1), p, "selfcond.bond"))
    charges2 = ad.add(charges, _mlp2(ad.concat([sc_charges, charges], axis=-1), p, "selfcond.charge"))
    return denoiser_forward(state, coords2, atoms2, bonds2, charges2, t_cont, t_disc)


# ---------------------------------------------------------------------------
# serialization: versioned binary container of named float64 tensors
# ---------------------------------------------------------------------------
#
# Layout (all integers little-endian):
#   magic   4 bytes  b"MGT1"
#   u32     config JSON length, then that many UTF-8 bytes
#   u32     tensor count
#   per tensor:
#     u16   name length, then UTF-8 name
#     u8    ndim
#     i64 * ndim   dims
#     f64 * prod(dims)   row-major values

_MAGIC = b"MGT1"


def _write_container(fh, meta: dict, tensors: dict[str, np.ndarray]) -> None:
    fh.write(_MAGIC)
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    fh.write(struct.pack("<I", len(blob)))
    fh.write(blob)
    fh.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        nb = name.encode("utf-8")
        fh.write(struct.pack("<H", len(nb)))
        fh.write(nb)
        fh.write(struct.pack("<B", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}q", *arr.shape))
        fh.write(arr.tobytes())


def _read_container(fh) -> tuple[dict, dict[str, np.ndarray]]:
    if fh.read(4) != _MAGIC:
        raise ValueError("not a model container (bad magic)")
    (meta_len,) = struct.unpack("<I", fh.read(4))
    meta = json.loads(fh.read(meta_len).decode("utf-8"))
    (count,) = struct.unpack("<I", fh.read(4))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", fh.read(2))
        name = fh.read(name_len).decode("utf-8")
        (ndim,) = struct.unpack("<B", fh.read(1))
        dims = struct.unpack(f"<{ndim}q", fh.read(8 * ndim)) if ndim else ()
        size = int(np.prod(dims)) if ndim else 1
        data = np.frombuffer(fh.read(8 * size), dtype="<f8").reshape(dims)
        tensors[name] = np.array(data, dtype=np.float64)
    return meta, tensors


def save_model(state: ModelState, path, extra: dict | None = None,
               extra_tensors: dict[str, np.ndarray] | None = None) -> None:
    meta = {"config": state.config.to_config(), "extra": extra or {}}
    tensors = {name: t.data for name, t in state.params.items()}
    for name, arr in (extra_tensors or {}).items():
        tensors[f"__extra__.{name}"] = arr
    with open(path, "wb") as fh:
        _write_container(fh, meta, tensors)


def load_model(path) -> tuple[ModelState, dict, dict[str, np.ndarray]]:
    """Returns (state, extra_meta, extra_tensors); round-trips exactly."""
    with open(path, "rb") as fh:
        meta, tensors = _read_container(fh)
    cfg = DenoiserConfig.from_config(meta["config"])
    params: dict[str, Tensor] = {}
    extra_tensors: dict[str, np.ndarray] = {}
    for name, arr in tensors.items():
        if name.startswith("__extra__."):
            extra_tensors[name[len("__extra__."):]] = arr
        else:
            params[name] = Tensor(arr, requires_grad=True)
    expected = [name for name, _, _ in _param_shapes(cfg)]
    if list(params.keys()) != expected:
        missing = set(expected) - set(params)
        surplus = set(params) - set(expected)
        raise ValueError(f"parameter set mismatch: missing={missing}, surplus={surplus}")
    return ModelState(config=cfg, params=params), meta.get("extra", {}), extra_tensors
