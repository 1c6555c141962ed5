"""Baseline encoder-decoder transformer.

Forward passes are written against the autodiff tape so the same code
serves training and inference; inference wraps parameters as constants
and reads back plain arrays.  Post-norm residual order throughout:
X' = Ln(X + Mh(X)), then Ln(X' + Fnn(X')).

Positions are 1-based.  Token ids live in [1, vocab_size]; id 1 is the
start token and id 2 is EOS.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import container
from .errors import (
    DimensionMismatch,
    PositionOutOfRange,
    SequenceTooLong,
    TokenOutOfRange,
)
from .tensor import Rng

START_TOKEN = 1
EOS_TOKEN = 2
MASK_VALUE = -1e30  # finite stand-in for -inf; softmax result equal to 1e-12


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int  # 0 = matrix-input model (no embedding table)
    d_model: int
    n_heads: int
    n_layers: int
    d_ff: int
    n_max: int = 64
    m_max: int = 64
    eps: float = 1e-5
    out_dim: int = 0  # 0 = d_model; used by matrix-input output head

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise DimensionMismatch(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}"
            )
        if min(self.d_model, self.n_heads, self.d_ff, self.n_max, self.m_max) < 1:
            raise DimensionMismatch("all model dimensions must be >= 1")
        if self.n_layers < 0 or self.eps <= 0:
            raise DimensionMismatch("n_layers must be >= 0 and eps > 0")

    @property
    def d_k(self) -> int:
        return self.d_model // self.n_heads

    @property
    def output_dim(self) -> int:
        return self.out_dim or self.d_model

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "n_layers": self.n_layers,
            "d_ff": self.d_ff,
            "n_max": self.n_max,
            "m_max": self.m_max,
            "eps": self.eps,
            "out_dim": self.out_dim,
        }


def init_params(cfg: ModelConfig, rng: Rng, decoder: bool = True) -> dict[str, np.ndarray]:
    """Gaussian init with std 1/sqrt(d) on projections, keeping pre-softmax
    scores O(1); LayerNorm gains start at 1."""
    g = rng.generator
    d, dk, h, df = cfg.d_model, cfg.d_k, cfg.n_heads, cfg.d_ff
    std = 1.0 / np.sqrt(d)
    p: dict[str, np.ndarray] = {}
    if cfg.vocab_size:
        p["embed"] = g.normal(0.0, std, (cfg.vocab_size, d))
    else:
        p["w_out"] = g.normal(0.0, std, (d, cfg.output_dim))
        p["b_out"] = np.zeros((1, cfg.output_dim))

    def block(prefix: str, cross: bool):
        for i in range(h):
            p[f"{prefix}.wq{i}"] = g.normal(0.0, std, (d, dk))
            p[f"{prefix}.wk{i}"] = g.normal(0.0, std, (d, dk))
            p[f"{prefix}.wv{i}"] = g.normal(0.0, std, (d, dk))
        p[f"{prefix}.wo"] = g.normal(0.0, std, (h * dk, d))
        if cross:
            for i in range(h):
                p[f"{prefix}.cq{i}"] = g.normal(0.0, std, (d, dk))
                p[f"{prefix}.ck{i}"] = g.normal(0.0, std, (d, dk))
                p[f"{prefix}.cv{i}"] = g.normal(0.0, std, (d, dk))
            p[f"{prefix}.co"] = g.normal(0.0, std, (h * dk, d))

    for l in range(cfg.n_layers):
        block(f"enc{l}", cross=False)
        p[f"enc{l}.w1"] = g.normal(0.0, std, (d, df))
        p[f"enc{l}.b1"] = np.zeros((1, df))
        p[f"enc{l}.w2"] = g.normal(0.0, 1.0 / np.sqrt(df), (df, d))
        p[f"enc{l}.b2"] = np.zeros((1, d))
        for site in ("ln1", "ln2"):
            p[f"enc{l}.{site}.g"] = np.ones((1, d))
            p[f"enc{l}.{site}.b"] = np.zeros((1, d))
        if decoder and cfg.vocab_size:
            block(f"dec{l}", cross=True)
            p[f"dec{l}.w1"] = g.normal(0.0, std, (d, df))
            p[f"dec{l}.b1"] = np.zeros((1, df))
            p[f"dec{l}.w2"] = g.normal(0.0, 1.0 / np.sqrt(df), (df, d))
            p[f"dec{l}.b2"] = np.zeros((1, d))
            for site in ("ln1", "ln2", "ln3"):
                p[f"dec{l}.{site}.g"] = np.ones((1, d))
                p[f"dec{l}.{site}.b"] = np.zeros((1, d))
    return p


def as_nodes(params: dict[str, np.ndarray], tape: ad.Tape, trainable: bool) -> dict[str, ad.Node]:
    if trainable:
        return {k: tape.param(k, v) for k, v in params.items()}
    return {k: tape.constant(v) for k, v in params.items()}


# ---------------------------------------------------------------------------
# fixed encodings and masks


def positional_encoding(i: int, d: int, n_max: int | None = None) -> np.ndarray:
    """Sinusoidal encoding of 1-based position i in dimension d."""
    if i < 1 or (n_max is not None and i > n_max):
        raise PositionOutOfRange(f"position {i} outside [1, {n_max}]")
    k = np.arange(d, dtype=np.float64)
    expo = np.where(k % 2 == 0, k, k - 1) / d
    angle = i / np.power(10000.0, expo)
    return np.where(k % 2 == 0, np.sin(angle), np.cos(angle))


def positional_matrix(n: int, d: int, n_max: int | None = None) -> np.ndarray:
    return np.stack([positional_encoding(i, d, n_max) for i in range(1, n + 1)])


def causal_mask(n: int) -> np.ndarray:
    """Additive mask: MASK_VALUE strictly above the diagonal."""
    return np.triu(np.full((n, n), MASK_VALUE), k=1)


def check_tokens(tokens, cfg: ModelConfig, limit: int | None = None) -> np.ndarray:
    ids = np.asarray(tokens, dtype=np.int64).reshape(-1)
    if np.any(ids < 1) or np.any(ids > cfg.vocab_size):
        raise TokenOutOfRange(f"token ids must lie in [1, {cfg.vocab_size}]")
    cap = cfg.n_max if limit is None else limit
    if ids.size > cap:
        raise SequenceTooLong(f"sequence of length {ids.size} exceeds {cap}")
    return ids


def embed_tokens(p: dict[str, ad.Node], cfg: ModelConfig, tokens) -> ad.Node:
    """Embedding rows plus positional encodings (1-based)."""
    ids = check_tokens(tokens, cfg)
    emb = ad.embedding_rows(p["embed"], ids - 1)
    return ad.add(emb, positional_matrix(ids.size, cfg.d_model, cfg.n_max))


# ---------------------------------------------------------------------------
# attention and layers (tape-level)


def attention_head(q, k, v, d_k: int, mask: np.ndarray | None = None,
                   collect: list | None = None) -> ad.Node:
    """softmax(q k^T / sqrt(d_k) [+ mask]) v."""
    scores = ad.scale(ad.matmul(q, ad.transpose(k)), 1.0 / np.sqrt(d_k))
    if mask is not None:
        scores = ad.add(scores, ad.wrap(mask))
    attn = ad.softmax_rows(scores)
    if collect is not None:
        collect.append(attn.value.copy())
    return ad.matmul(attn, v)


def multi_head(p: dict[str, ad.Node], prefix: str, x, cfg: ModelConfig,
               mask: np.ndarray | None = None, grading=None,
               collect: list | None = None, kv=None, cross: bool = False) -> ad.Node:
    """Concat(head_1..head_h) W_O; optional graded scaling hooks.

    `grading` is None or an object with per-head weight rows and a variant
    tag (see graded.AttentionGrading).  `kv` supplies separate key/value
    source for cross-attention.
    """
    tag = "c" if cross else "w"
    kv = x if kv is None else kv
    heads = []
    for i in range(cfg.n_heads):
        q = ad.matmul(x, p[f"{prefix}.{tag}q{i}"])
        k = ad.matmul(kv, p[f"{prefix}.{tag}k{i}"])
        v = ad.matmul(kv, p[f"{prefix}.{tag}v{i}"])
        if grading is not None:
            q, k, v = grading.apply(i, q, k, v)
        heads.append(attention_head(q, k, v, cfg.d_k, mask, collect))
    concat = heads[0] if len(heads) == 1 else ad.hstack(heads)
    return ad.matmul(concat, p[f"{prefix}.{tag}o" if cross else f"{prefix}.wo"])


def feed_forward(p: dict[str, ad.Node], prefix: str, x) -> ad.Node:
    hidden = ad.relu(ad.add_rowvec(ad.matmul(x, p[f"{prefix}.w1"]), p[f"{prefix}.b1"]))
    return ad.add_rowvec(ad.matmul(hidden, p[f"{prefix}.w2"]), p[f"{prefix}.b2"])


def layer_norm(p: dict[str, ad.Node], site: str, x, eps: float) -> ad.Node:
    return ad.layer_norm_rows(x, p[f"{site}.g"], p[f"{site}.b"], eps)


def encoder_layer(p, l: int, x, cfg: ModelConfig, grading=None,
                  collect: list | None = None) -> ad.Node:
    pre = f"enc{l}"
    attn = multi_head(p, pre, x, cfg, grading=grading, collect=collect)
    x1 = layer_norm(p, f"{pre}.ln1", ad.add(x, attn), cfg.eps)
    ff = feed_forward(p, pre, x1)
    if grading is not None:
        ff = grading.graded_ffn(ff)
    return layer_norm(p, f"{pre}.ln2", ad.add(x1, ff), cfg.eps)


def encoder(p, x, cfg: ModelConfig, grading=None, collect=None) -> ad.Node:
    """Stack of n_layers encoder layers (identity when n_layers = 0)."""
    for l in range(cfg.n_layers):
        x = encoder_layer(p, l, x, cfg, grading,
                          collect[l] if collect is not None else None)
    return x


def decoder_layer(p, l: int, y, z, cfg: ModelConfig) -> ad.Node:
    pre = f"dec{l}"
    mask = causal_mask(y.shape[0])
    y1 = layer_norm(p, f"{pre}.ln1", ad.add(y, multi_head(p, pre, y, cfg, mask=mask)), cfg.eps)
    ca = multi_head(p, pre, y1, cfg, kv=z, cross=True)
    y2 = layer_norm(p, f"{pre}.ln2", ad.add(y1, ca), cfg.eps)
    return layer_norm(p, f"{pre}.ln3", ad.add(y2, feed_forward(p, pre, y2)), cfg.eps)


def decoder(p, y, z, cfg: ModelConfig) -> ad.Node:
    for l in range(cfg.n_layers):
        y = decoder_layer(p, l, y, z, cfg)
    return y


# ---------------------------------------------------------------------------
# inference wrappers


def encode(params: dict[str, np.ndarray], cfg: ModelConfig, x: np.ndarray) -> np.ndarray:
    """Run the encoder on an already-embedded n x d matrix."""
    tape = ad.Tape()
    with ad.recording(tape):
        p = as_nodes(params, tape, trainable=False)
        out = encoder(p, tape.constant(x), cfg)
    return out.value


def encode_tokens(params, cfg: ModelConfig, tokens) -> np.ndarray:
    tape = ad.Tape()
    with ad.recording(tape):
        p = as_nodes(params, tape, trainable=False)
        out = encoder(p, embed_tokens(p, cfg, tokens), cfg)
    return out.value


def generate(params: dict[str, np.ndarray], cfg: ModelConfig, tokens,
             m_max: int | None = None, eos: int = EOS_TOKEN) -> list[int]:
    """Greedy decoding: argmax over softmax(W_e z_t); ties break to the
    lowest token id; stops at EOS or after m_max tokens."""
    cap = cfg.m_max if m_max is None else m_max
    tape = ad.Tape()
    with ad.recording(tape):
        p = as_nodes(params, tape, trainable=False)
        z = encoder(p, embed_tokens(p, cfg, tokens), cfg)
        out: list[int] = []
        generated = [START_TOKEN]
        while len(out) < cap:
            ids = check_tokens(generated, cfg, limit=cfg.m_max + 1)
            emb = ad.add(
                ad.embedding_rows(p["embed"], ids - 1),
                positional_matrix(ids.size, cfg.d_model, cfg.m_max + 1),
            )
            dec = decoder(p, emb, z, cfg)
            logits = dec.value[-1] @ params["embed"].T
            token = int(np.argmax(logits)) + 1  # argmax returns the first max
            out.append(token)
            generated.append(token)
            if token == eos:
                break
    return out


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_KIND = "transformer-checkpoint"


def save_checkpoint(path, params: dict[str, np.ndarray], cfg: ModelConfig,
                    extra: dict | None = None) -> None:
    meta = {"kind": CHECKPOINT_KIND, "config": cfg.to_dict(), "extra": extra or {}}
    container.save_arrays(path, params, meta)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], ModelConfig, dict]:
    arrays, meta = container.load_arrays(path)
    if meta.get("kind") != CHECKPOINT_KIND:
        raise ValueError(f"{path}: not a checkpoint container")
    cfg = ModelConfig(**meta["config"])
    return arrays, cfg, meta.get("extra", {})
