"""Hyperparameters, parameter tensors and the model bundle."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..corpus import Vocabulary

VARIANTS = ("base2", "rl3", "rpl3", "ri2")
# variants whose encoder reads a reordered copy of the source
NEEDS_REORDERING = ("rl3", "ri2")


@dataclass
class HyperParams:
    src_vocab_size: int
    tgt_vocab_size: int
    d_emb: int = 32
    d_h: int = 32
    d_a: int = 32
    d_out: int = 32
    encoder_variant: str = "base2"
    max_decode_len: int = 50
    # concatenate each word with the reordered-layer state of its own rank
    # instead of the state at the same index
    own_word_states: bool = False
    init_scale: float = 0.1

    def __post_init__(self):
        self.encoder_variant = self.encoder_variant.lower()
        if self.encoder_variant not in VARIANTS:
            raise ValueError(f"unknown encoder variant {self.encoder_variant!r}; "
                             f"expected one of {', '.join(VARIANTS)}")
        for name in ("src_vocab_size", "tgt_vocab_size", "d_emb", "d_h", "d_a", "d_out",
                     "max_decode_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def n_layers(self) -> int:
        return 3 if self.encoder_variant in ("rl3", "rpl3") else 2

    @property
    def enc_width(self) -> int:
        return self.n_layers * self.d_h

    @property
    def needs_reordering(self) -> bool:
        return self.encoder_variant in NEEDS_REORDERING

    def to_dict(self) -> dict:
        return asdict(self)


def param_shapes(hp: HyperParams) -> dict[str, tuple[int, int]]:
    E, H, A, O, D = hp.d_emb, hp.d_h, hp.d_a, hp.d_out, hp.enc_width
    shapes = {
        "src_emb": (hp.src_vocab_size, E),
        "tgt_emb": (hp.tgt_vocab_size, E),
    }
    layers = ["enc_fwd", "enc_bwd"] + (["enc_third"] if hp.n_layers == 3 else [])
    for name in layers:
        shapes[f"{name}.W"] = (E, 3 * H)
        shapes[f"{name}.U"] = (H, 3 * H)
        shapes[f"{name}.b"] = (1, 3 * H)
    shapes.update({
        "init.W": (D, H),
        "init.b": (1, H),
        "dec.W": (E + D, 3 * H),
        "dec.U": (H, 3 * H),
        "dec.b": (1, 3 * H),
        "att.Ws": (H, A),
        "att.Wh": (D, A),
        "att.v": (A, 1),
        "out.W": (E + H + D, O),
        "out.b": (1, O),
        "out.Wy": (O, hp.tgt_vocab_size),
        "out.by": (1, hp.tgt_vocab_size),
    })
    return shapes


def init_params(hp: HyperParams, seed: int = 0) -> dict[str, np.ndarray]:
    """Uniform(-init_scale, init_scale) weights, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(hp).items():
        if name.endswith(".b") or name.endswith(".by"):
            params[name] = np.zeros(shape)
        else:
            params[name] = rng.uniform(-hp.init_scale, hp.init_scale, size=shape)
    return params


@dataclass
class Model:
    hp: HyperParams
    params: dict[str, np.ndarray]
    source_vocab: Vocabulary
    target_vocab: Vocabulary
    meta: dict = field(default_factory=dict)

    @property
    def variant(self) -> str:
        return self.hp.encoder_variant


def copy_params(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: v.copy() for k, v in params.items()}
