"""Model configuration, parameter containers, and checkpoint files.

Checkpoints use the "grains-model/1" format: a JSON header line (config,
vocabulary, block index) followed by raw little-endian float64 blocks.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .neural import Linear, Mlp, init_linear, init_mlp
from .scene import Vocabulary

MODEL_FORMAT = "grains-model/1"

POSITION_MODES = ("relative", "absolute", "center_translation")
WALL_ROOT_MODES = ("full", "wall_only", "none")

# classifier classes, fixed order
NODE_CLASSES = ("leaf", "support", "cooccur", "surround", "wall")


class CheckpointError(Exception):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    code_dim: int = 250
    hidden_dim: int = 750
    root_code_dim: int = 350
    root_hidden_dim: int = 1050
    relpos_dim: int = 28
    latent_dim: int | None = None
    position_mode: str = "relative"
    labels_enabled: bool = True
    wall_root_mode: str = "full"
    kl_weight: float = 1e-3
    classifier_weight: float = 1.0
    size_scale: float = 5.0
    offset_scale: float = 5.0
    init_scale: float = 0.03

    def __post_init__(self):
        if self.position_mode not in POSITION_MODES:
            raise ValueError(f"unknown position_mode {self.position_mode!r}")
        if self.wall_root_mode not in WALL_ROOT_MODES:
            raise ValueError(f"unknown wall_root_mode {self.wall_root_mode!r}")
        for d in (self.vocab_size, self.code_dim, self.hidden_dim,
                  self.root_code_dim, self.root_hidden_dim, self.relpos_dim):
            if d <= 0:
                raise ValueError("dimensions must be positive")

    @property
    def leaf_dim(self) -> int:
        return 3 + self.vocab_size

    @property
    def top_code_dim(self) -> int:
        """Dimension of the code the VAE head operates on."""
        return self.root_code_dim if self.wall_root_mode == "full" else self.code_dim

    @property
    def z_dim(self) -> int:
        return self.latent_dim if self.latent_dim is not None else self.top_code_dim


@dataclass
class ModelParams:
    config: ModelConfig
    vocab: Vocabulary
    box_enc: Mlp
    box_dec: Mlp
    supp_enc: Mlp
    supp_dec: Mlp
    coocc_enc: Mlp
    coocc_dec: Mlp
    surr_enc: Mlp
    surr_dec: Mlp
    wall_enc: Mlp
    wall_dec: Mlp
    root_enc: Mlp
    root_dec: Mlp
    vae_mu: Linear
    vae_logvar: Linear
    vae_expand: Mlp
    clsfr_hidden: Mlp
    clsfr_out: Linear

    MODULE_NAMES = ("box_enc", "box_dec", "supp_enc", "supp_dec",
                    "coocc_enc", "coocc_dec", "surr_enc", "surr_dec",
                    "wall_enc", "wall_dec", "root_enc", "root_dec",
                    "vae_mu", "vae_logvar", "vae_expand",
                    "clsfr_hidden", "clsfr_out")

    def modules(self) -> list[tuple[str, Mlp | Linear]]:
        return [(name, getattr(self, name)) for name in self.MODULE_NAMES]

    def param_arrays(self) -> list[np.ndarray]:
        out = []
        for _, m in self.modules():
            out.extend(m.param_arrays())
        return out

    def zero_grads(self) -> dict[str, Mlp | Linear]:
        return {name: m.zero_grads() for name, m in self.modules()}

    @staticmethod
    def grad_arrays(grads: dict) -> list[np.ndarray]:
        out = []
        for name in ModelParams.MODULE_NAMES:
            g = grads[name]
            if isinstance(g, list):
                for layer in g:
                    out.extend([layer.weights, layer.biases])
            else:
                out.extend(g.param_arrays())
        return out


def init_model(config: ModelConfig, vocab: Vocabulary, seed: int = 0) -> ModelParams:
    if len(vocab) != config.vocab_size:
        raise ValueError("vocabulary size does not match config")
    rng = np.random.default_rng(seed)
    n, h, r = config.code_dim, config.hidden_dim, config.relpos_dim
    rn, rh = config.root_code_dim, config.root_hidden_dim
    k, s = config.leaf_dim, config.init_scale

    def mlp(dims):
        return init_mlp(dims, rng, s)

    return ModelParams(
        config=config, vocab=vocab,
        box_enc=mlp([k, n]), box_dec=mlp([n, k]),
        supp_enc=mlp([2 * n + r, h, n]), supp_dec=mlp([n, h, 2 * n + r]),
        coocc_enc=mlp([2 * n + r, h, n]), coocc_dec=mlp([n, h, 2 * n + r]),
        surr_enc=mlp([3 * n + 2 * r, h, n]), surr_dec=mlp([n, h, 3 * n + 2 * r]),
        wall_enc=mlp([2 * n + r, h, n]), wall_dec=mlp([n, h, 2 * n + r]),
        root_enc=mlp([5 * n + 4 * r, rh, rn]), root_dec=mlp([rn, rh, 5 * n + 4 * r]),
        vae_mu=init_linear(config.top_code_dim, config.z_dim, rng, s),
        vae_logvar=init_linear(config.top_code_dim, config.z_dim, rng, s),
        vae_expand=mlp([config.z_dim, config.top_code_dim]),
        clsfr_hidden=mlp([n, h]),
        clsfr_out=init_linear(h, len(NODE_CLASSES), rng, s))


# --- checkpoint I/O -------------------------------------------------------

def save_model(params: ModelParams, path: str | Path) -> None:
    blocks = []
    arrays = []
    for name, m in params.modules():
        for i, arr in enumerate(m.param_arrays()):
            blocks.append({"name": f"{name}.{i}", "shape": list(arr.shape)})
            arrays.append(np.ascontiguousarray(arr, dtype="<f8"))
    header = {
        "format_version": MODEL_FORMAT,
        "config": asdict(params.config),
        "vocabulary": list(params.vocab.names),
        "blocks": blocks,
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header).encode("utf-8"))
        f.write(b"\n")
        for arr in arrays:
            f.write(arr.tobytes())


def load_model(path: str | Path) -> ModelParams:
    path = Path(path)
    with open(path, "rb") as f:
        header_line = f.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"{path}: bad checkpoint header: {e}") from e
        if header.get("format_version") != MODEL_FORMAT:
            raise CheckpointError(f"{path}: unsupported checkpoint format")
        config = ModelConfig(**header["config"])
        vocab = Vocabulary(tuple(header["vocabulary"]))
        if len(vocab) != config.vocab_size:
            raise CheckpointError(f"{path}: vocabulary does not match config")
        params = init_model(config, vocab, seed=0)
        for name, m in params.modules():
            for i, arr in enumerate(m.param_arrays()):
                want = next(b for b in header["blocks"] if b["name"] == f"{name}.{i}")
                if list(arr.shape) != want["shape"]:
                    raise CheckpointError(f"{path}: block {name}.{i} shape mismatch")
                raw = f.read(arr.size * 8)
                if len(raw) != arr.size * 8:
                    raise CheckpointError(f"{path}: truncated checkpoint")
                arr[...] = np.frombuffer(raw, dtype="<f8").reshape(arr.shape)
    return params
