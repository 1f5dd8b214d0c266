"""Structure-aware encoder-decoder transformer for code summarization.

The encoder stacks modules of two layers each: a distance-weighted layer
(RDW) that gates a reciprocal-distance mix of the activations into its
input, followed by a structural relative-position layer (SRPEi) whose
attention adds clipped sequential and tree-distance embeddings to keys and
values and is modulated by the multi-view relation matrix. Each module
outputs the position-wise sum of its two layers' outputs. The decoder is a
standard masked transformer with cross-attention; its output projection is
tied to the target embedding.

All forward passes operate on one example (no batch axis) in float64, so
results are bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import ArtifactMismatchError, ConfigError, FormatError, ShapeError
from .structure import StructuralEncodings, sequential_relpos
from .tensor import (
    NEG_INF,
    Tensor,
    add,
    concat,
    cross_entropy,
    dropout,
    embed,
    gather,
    layernorm,
    matmul,
    no_grad,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax_masked,
    transpose,
)

LAYER_TAGS = ("RDW", "SRPEi", "PLAIN")
MASK_MODES = ("multiply", "neg_inf")
SRPE_PLACEMENTS = ("SRPEi_only", "RDW_only", "all")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; defaults follow the full-scale setup
    (3 encoder modules = 6 encoder layers, 6 decoder layers, width 512)."""

    src_vocab_size: int
    tgt_vocab_size: int
    d_model: int = 512
    n_heads: int = 8
    n_script_modules: int = 3
    n_decoder_layers: int = 6
    ffn_dim: int = 2048
    dropout_p: float = 0.2
    l: int = 8
    k: int = 32
    mask_mode: str = "multiply"
    layer_plan: tuple[str, ...] = ()
    srpe_placement: str = "SRPEi_only"
    pad_id: int = 0
    bos_id: int = 1
    eos_id: int = 2

    def __post_init__(self):
        if self.d_model <= 0 or self.n_heads <= 0 or self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model {self.d_model} must be a positive multiple of n_heads {self.n_heads}"
            )
        if self.src_vocab_size < 1 or self.tgt_vocab_size < 1:
            raise ConfigError("vocabulary sizes must be positive")
        if self.n_script_modules < 1 or self.n_decoder_layers < 1:
            raise ConfigError("layer counts must be positive")
        if self.ffn_dim < 1:
            raise ConfigError("ffn_dim must be positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p!r}")
        if self.l < 1 or self.k < 1:
            raise ConfigError("clip thresholds l and k must be >= 1")
        if self.mask_mode not in MASK_MODES:
            raise ConfigError(f"mask_mode must be one of {MASK_MODES}, got {self.mask_mode!r}")
        if self.srpe_placement not in SRPE_PLACEMENTS:
            raise ConfigError(
                f"srpe_placement must be one of {SRPE_PLACEMENTS}, got {self.srpe_placement!r}"
            )
        if not self.layer_plan:
            object.__setattr__(
                self, "layer_plan", ("RDW", "SRPEi") * self.n_script_modules
            )
        else:
            object.__setattr__(self, "layer_plan", tuple(self.layer_plan))
        if len(self.layer_plan) != 2 * self.n_script_modules:
            raise ConfigError(
                f"layer_plan length {len(self.layer_plan)} != 2 * {self.n_script_modules}"
            )
        for tag in self.layer_plan:
            if tag not in LAYER_TAGS:
                raise ConfigError(f"unknown layer tag {tag!r}; valid: {LAYER_TAGS}")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    @property
    def n_encoder_layers(self) -> int:
        return 2 * self.n_script_modules

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["layer_plan"] = list(self.layer_plan)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        if not isinstance(obj, dict):
            raise FormatError("model config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise FormatError(f"unknown model config keys: {sorted(unknown)}")
        kwargs = dict(obj)
        if "layer_plan" in kwargs and kwargs["layer_plan"] is not None:
            kwargs["layer_plan"] = tuple(kwargs["layer_plan"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise FormatError(f"invalid model config: {exc}") from exc


@dataclass(frozen=True)
class RelPosEmbeddings:
    """Per-layer lookup tables for relative attention.

    Sequential tables have 2k+1 rows indexed by clamp(j-i, -k, k)+k;
    structural tables have l+1 rows indexed by min(d_ij, l), so all pairs
    at clipped distance share one row. Tables are shared across heads.
    """

    w_k_seq: Tensor | None
    w_v_seq: Tensor | None
    w_k_str: Tensor | None
    w_v_str: Tensor | None


@dataclass
class EncoderState:
    """Encoder output plus the per-example inputs the decoder needs."""

    h: Tensor
    bundle: StructuralEncodings
    mask: np.ndarray | None  # 1.0 for real positions, 0.0 for padding


def ablation_layer_plan(n_script_modules: int, drop: str | None) -> tuple[str, ...]:
    """Layer plan for the standard ablations: drop='rdw' replaces RDW
    layers with PLAIN, drop='srpei' replaces SRPEi layers, None is full."""
    plans = {
        None: ("RDW", "SRPEi"),
        "rdw": ("PLAIN", "SRPEi"),
        "srpei": ("RDW", "PLAIN"),
    }
    if drop not in plans:
        raise ConfigError(f"unknown ablation {drop!r}; valid: no-rdw, no-srpei")
    return plans[drop] * n_script_modules


def _pad_additive(mask: np.ndarray | None, n_queries: int, n_keys: int) -> np.ndarray | None:
    """Additive attention mask dropping padded key columns."""
    if mask is None:
        return None
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != (n_keys,):
        raise ShapeError(f"padding mask shape {mask.shape} != ({n_keys},)")
    row = np.where(mask > 0, 0.0, NEG_INF)
    return np.broadcast_to(row[None, :], (n_queries, n_keys)).copy()


def _causal_additive(n: int) -> np.ndarray:
    out = np.zeros((n, n))
    out[np.triu_indices(n, k=1)] = NEG_INF
    return out


class ScriptModel:
    """The full network: parameters, per-example forward passes, decoding."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.params: dict[str, Tensor] = {}
        self._rng = np.random.default_rng(seed)
        self._build_params()

    # -- parameter construction ------------------------------------------

    def _add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self.params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        t = Tensor(data, requires_grad=True)
        self.params[name] = t
        return t

    def _linear_init(self, fan_in: int, fan_out: int) -> np.ndarray:
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        return self._rng.uniform(-limit, limit, size=(fan_in, fan_out))

    def _table_init(self, rows: int, cols: int) -> np.ndarray:
        return self._rng.normal(0.0, 0.02, size=(rows, cols))

    def _add_attention(self, prefix: str, kv_dim: int) -> None:
        cfg = self.config
        for h in range(cfg.n_heads):
            self._add(f"{prefix}.q{h}", self._linear_init(cfg.d_model, cfg.d_head))
            self._add(f"{prefix}.k{h}", self._linear_init(kv_dim, cfg.d_head))
            self._add(f"{prefix}.v{h}", self._linear_init(kv_dim, cfg.d_head))
        self._add(f"{prefix}.out_w", self._linear_init(cfg.d_model, cfg.d_model))
        self._add(f"{prefix}.out_b", np.zeros(cfg.d_model))

    def _add_ffn(self, prefix: str) -> None:
        cfg = self.config
        self._add(f"{prefix}.w1", self._linear_init(cfg.d_model, cfg.ffn_dim))
        self._add(f"{prefix}.b1", np.zeros(cfg.ffn_dim))
        self._add(f"{prefix}.w2", self._linear_init(cfg.ffn_dim, cfg.d_model))
        self._add(f"{prefix}.b2", np.zeros(cfg.d_model))

    def _add_layernorm(self, name: str) -> None:
        self._add(f"{name}_g", np.ones(self.config.d_model))
        self._add(f"{name}_b", np.zeros(self.config.d_model))

    def _layer_uses_structural(self, tag: str) -> bool:
        placement = self.config.srpe_placement
        if tag == "SRPEi":
            return placement in ("SRPEi_only", "all")
        if tag == "RDW":
            return placement in ("RDW_only", "all")
        return False

    def _build_params(self) -> None:
        cfg = self.config
        d = cfg.d_model
        self._add("src_embed", self._rng.normal(0.0, d ** -0.5, size=(cfg.src_vocab_size, d)))
        self._add("tgt_embed", self._rng.normal(0.0, d ** -0.5, size=(cfg.tgt_vocab_size, d)))
        self._add("out_bias", np.zeros(cfg.tgt_vocab_size))
        for ly, tag in enumerate(cfg.layer_plan):
            base = f"enc{ly}"
            if tag == "RDW":
                self._add(f"{base}.fc1_w", self._linear_init(d, d))
                self._add(f"{base}.fc1_b", np.zeros(d))
                self._add(f"{base}.fc2_w", self._linear_init(d, d))
                self._add(f"{base}.fc2_b", np.zeros(d))
            self._add_attention(f"{base}.attn", d)
            self._add(f"{base}.seq_k", self._table_init(2 * cfg.k + 1, cfg.d_head))
            self._add(f"{base}.seq_v", self._table_init(2 * cfg.k + 1, cfg.d_head))
            if self._layer_uses_structural(tag):
                self._add(f"{base}.str_k", self._table_init(cfg.l + 1, cfg.d_head))
                self._add(f"{base}.str_v", self._table_init(cfg.l + 1, cfg.d_head))
            self._add_ffn(f"{base}.ffn")
            self._add_layernorm(f"{base}.ln1")
            self._add_layernorm(f"{base}.ln2")
        self._add_layernorm("enc_final")
        for ly in range(cfg.n_decoder_layers):
            base = f"dec{ly}"
            self._add_attention(f"{base}.self", d)
            self._add(f"{base}.seq_k", self._table_init(2 * cfg.k + 1, cfg.d_head))
            self._add(f"{base}.seq_v", self._table_init(2 * cfg.k + 1, cfg.d_head))
            self._add_attention(f"{base}.cross", d)
            self._add_ffn(f"{base}.ffn")
            self._add_layernorm(f"{base}.ln1")
            self._add_layernorm(f"{base}.ln2")
            self._add_layernorm(f"{base}.ln3")

    def rel_tables(self, base: str, structural: bool) -> RelPosEmbeddings:
        return RelPosEmbeddings(
            w_k_seq=self.params.get(f"{base}.seq_k"),
            w_v_seq=self.params.get(f"{base}.seq_v"),
            w_k_str=self.params.get(f"{base}.str_k") if structural else None,
            w_v_str=self.params.get(f"{base}.str_v") if structural else None,
        )

    # -- state ------------------------------------------------------------

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        mine = set(self.params)
        theirs = set(state)
        if mine != theirs:
            missing = sorted(mine - theirs)
            extra = sorted(theirs - mine)
            raise ArtifactMismatchError(
                f"parameter names do not match this configuration; missing {missing[:5]}, unexpected {extra[:5]}"
            )
        for name, t in self.params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ArtifactMismatchError(
                    f"parameter {name!r} has shape {arr.shape}, expected {t.data.shape}"
                )
            t.data = arr.copy()

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    # -- attention ---------------------------------------------------------

    def relative_attention(
        self,
        prefix: str,
        x_q: Tensor,
        x_kv: Tensor,
        *,
        tables: RelPosEmbeddings | None = None,
        seq_idx: np.ndarray | None = None,
        str_idx: np.ndarray | None = None,
        a_mv: np.ndarray | None = None,
        additive_mask: np.ndarray | None = None,
        training: bool = False,
        rng: np.random.Generator | None = None,
        capture: list | None = None,
    ) -> Tensor:
        """Multi-head attention with optional clipped relative-position
        terms on keys and values and optional relation-matrix masking.

        Per head: e_ij = q_i (k_j + a_k[ij] + b_k[ij])^T / sqrt(d_head),
        then softmax (gated by a_mv per mask_mode), then
        z_i = sum_j alpha_ij (v_j + a_v[ij] + b_v[ij]).
        """
        cfg = self.config
        use_seq = tables is not None and tables.w_k_seq is not None and seq_idx is not None
        use_str = tables is not None and tables.w_k_str is not None and str_idx is not None
        inv_sqrt = 1.0 / math.sqrt(cfg.d_head)
        gate_additive = additive_mask
        scale_matrix = None
        if a_mv is not None:
            if cfg.mask_mode == "multiply":
                scale_matrix = a_mv
            else:
                keep = np.where(a_mv > 0, 0.0, NEG_INF)
                gate_additive = keep if additive_mask is None else keep + additive_mask
        heads = []
        for h in range(cfg.n_heads):
            q = matmul(x_q, self.params[f"{prefix}.q{h}"])
            k = matmul(x_kv, self.params[f"{prefix}.k{h}"])
            v = matmul(x_kv, self.params[f"{prefix}.v{h}"])
            e = matmul(q, transpose(k, (1, 0)))
            if use_seq:
                e = add(e, _rel_scores(q, tables.w_k_seq, seq_idx))
            if use_str:
                e = add(e, _rel_scores(q, tables.w_k_str, str_idx))
            e = scale(e, inv_sqrt)
            alpha = softmax_masked(e, additive_mask=gate_additive, scale_matrix=scale_matrix)
            if capture is not None:
                capture.append(alpha.data.copy())
            alpha = dropout(alpha, cfg.dropout_p, rng, training)
            z = matmul(alpha, v)
            if use_seq:
                z = add(z, _rel_values(alpha, tables.w_v_seq, seq_idx))
            if use_str:
                z = add(z, _rel_values(alpha, tables.w_v_str, str_idx))
            heads.append(z)
        cat = concat(heads, axis=1)
        return _affine(cat, self.params[f"{prefix}.out_w"], self.params[f"{prefix}.out_b"])

    def _ffn(self, prefix: str, x: Tensor) -> Tensor:
        p = self.params
        hidden = relu(_affine(x, p[f"{prefix}.w1"], p[f"{prefix}.b1"]))
        return _affine(hidden, p[f"{prefix}.w2"], p[f"{prefix}.b2"])

    def _block_tail(
        self,
        base: str,
        x: Tensor,
        attn_out: Tensor,
        training: bool,
        rng: np.random.Generator | None,
    ) -> Tensor:
        p = self.params
        cfg = self.config
        x = layernorm(
            add(x, dropout(attn_out, cfg.dropout_p, rng, training)),
            p[f"{base}.ln1_g"],
            p[f"{base}.ln1_b"],
        )
        f = self._ffn(f"{base}.ffn", x)
        return layernorm(
            add(x, dropout(f, cfg.dropout_p, rng, training)),
            p[f"{base}.ln2_g"],
            p[f"{base}.ln2_b"],
        )

    # -- encoder layers -----------------------------------------------------

    def rdw_layer(
        self,
        layer_idx: int,
        h_prev: Tensor,
        bundle: StructuralEncodings,
        *,
        mask: np.ndarray | None = None,
        training: bool = False,
        rng: np.random.Generator | None = None,
        capture: list | None = None,
    ) -> Tensor:
        """Distance-weighted layer: a sigmoid gate of FC1(H) + FC2(M_bar H)
        is summed into H, then a standard attention + FFN block runs."""
        p = self.params
        base = f"enc{layer_idx}"
        n = h_prev.shape[0]
        m_bar = bundle.distance_weights
        if m_bar.shape != (n, n):
            raise ShapeError(f"distance weights shape {m_bar.shape} != ({n}, {n})")
        mixed = matmul(Tensor(m_bar), h_prev)
        h_hat = sigmoid(
            add(
                _affine(h_prev, p[f"{base}.fc1_w"], p[f"{base}.fc1_b"]),
                _affine(mixed, p[f"{base}.fc2_w"], p[f"{base}.fc2_b"]),
            )
        )
        x = add(h_prev, h_hat)
        structural = self._layer_uses_structural("RDW")
        attn = self.relative_attention(
            f"{base}.attn",
            x,
            x,
            tables=self.rel_tables(base, structural),
            seq_idx=self._seq_idx(n),
            str_idx=bundle.bucket_ids if structural else None,
            additive_mask=_pad_additive(mask, n, n),
            training=training,
            rng=rng,
            capture=capture,
        )
        return self._block_tail(base, x, attn, training, rng)

    def srpei_layer(
        self,
        layer_idx: int,
        h: Tensor,
        bundle: StructuralEncodings,
        *,
        mask: np.ndarray | None = None,
        training: bool = False,
        rng: np.random.Generator | None = None,
        capture: list | None = None,
    ) -> Tensor:
        """Relation-gated layer: relative attention with sequential and
        (by placement) structural terms, modulated by the multi-view
        matrix, then the FFN block."""
        base = f"enc{layer_idx}"
        n = h.shape[0]
        structural = self._layer_uses_structural("SRPEi")
        attn = self.relative_attention(
            f"{base}.attn",
            h,
            h,
            tables=self.rel_tables(base, structural),
            seq_idx=self._seq_idx(n),
            str_idx=bundle.bucket_ids if structural else None,
            a_mv=bundle.multiview,
            additive_mask=_pad_additive(mask, n, n),
            training=training,
            rng=rng,
            capture=capture,
        )
        return self._block_tail(base, h, attn, training, rng)

    def plain_layer(
        self,
        layer_idx: int,
        h: Tensor,
        *,
        mask: np.ndarray | None = None,
        training: bool = False,
        rng: np.random.Generator | None = None,
        capture: list | None = None,
    ) -> Tensor:
        """Vanilla transformer block with sequential relative positions
        only; used by ablation layer plans."""
        base = f"enc{layer_idx}"
        n = h.shape[0]
        attn = self.relative_attention(
            f"{base}.attn",
            h,
            h,
            tables=self.rel_tables(base, False),
            seq_idx=self._seq_idx(n),
            additive_mask=_pad_additive(mask, n, n),
            training=training,
            rng=rng,
            capture=capture,
        )
        return self._block_tail(base, h, attn, training, rng)

    def _seq_idx(self, n: int) -> np.ndarray:
        return sequential_relpos(n, self.config.k) + self.config.k

    # -- full passes ---------------------------------------------------------

    def script_encoder(
        self,
        src_ids: np.ndarray,
        bundle: StructuralEncodings,
        mask: np.ndarray | None = None,
        *,
        training: bool = False,
        rng: np.random.Generator | None = None,
        capture: list | None = None,
    ) -> EncoderState:
        """Embed tokens and run the stacked two-layer modules; each module
        contributes the position-wise sum of its two layer outputs."""
        cfg = self.config
        p = self.params
        src_ids = np.asarray(src_ids, dtype=np.int64)
        n = src_ids.shape[0]
        for name, arr in (
            ("distance weights", bundle.distance_weights),
            ("bucket ids", bundle.bucket_ids),
            ("multiview", bundle.multiview),
        ):
            if arr.shape != (n, n):
                raise ShapeError(f"{name} shape {arr.shape} != ({n}, {n})")
        x = scale(embed(p["src_embed"], src_ids), math.sqrt(cfg.d_model))
        x = dropout(x, cfg.dropout_p, rng, training)
        common = dict(mask=mask, training=training, rng=rng, capture=capture)
        for module_idx in range(cfg.n_script_modules):
            first, second = (
                cfg.layer_plan[2 * module_idx],
                cfg.layer_plan[2 * module_idx + 1],
            )
            h = self._run_layer(first, 2 * module_idx, x, bundle, common)
            h_prime = self._run_layer(second, 2 * module_idx + 1, h, bundle, common)
            x = add(h, h_prime)
        x = layernorm(x, p["enc_final_g"], p["enc_final_b"])
        return EncoderState(h=x, bundle=bundle, mask=mask)

    def _run_layer(
        self, tag: str, layer_idx: int, x: Tensor, bundle: StructuralEncodings, common: dict
    ) -> Tensor:
        if tag == "RDW":
            return self.rdw_layer(layer_idx, x, bundle, **common)
        if tag == "SRPEi":
            return self.srpei_layer(layer_idx, x, bundle, **common)
        return self.plain_layer(layer_idx, x, **common)

    def decode(
        self,
        tgt_in_ids: np.ndarray,
        state: EncoderState,
        *,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Teacher-forced decoder pass returning (m, tgt_vocab) logits."""
        cfg = self.config
        p = self.params
        tgt_in_ids = np.asarray(tgt_in_ids, dtype=np.int64)
        m = tgt_in_ids.shape[0]
        if m == 0:
            raise ShapeError("decoder prefix must be non-empty")
        n_src = state.h.shape[0]
        y = scale(embed(p["tgt_embed"], tgt_in_ids), math.sqrt(cfg.d_model))
        y = dropout(y, cfg.dropout_p, rng, training)
        causal = _causal_additive(m)
        cross_mask = _pad_additive(state.mask, m, n_src)
        seq_idx = self._seq_idx(m)
        for ly in range(cfg.n_decoder_layers):
            base = f"dec{ly}"
            sa = self.relative_attention(
                f"{base}.self",
                y,
                y,
                tables=self.rel_tables(base, False),
                seq_idx=seq_idx,
                additive_mask=causal,
                training=training,
                rng=rng,
            )
            y = layernorm(
                add(y, dropout(sa, cfg.dropout_p, rng, training)),
                p[f"{base}.ln1_g"],
                p[f"{base}.ln1_b"],
            )
            ca = self.relative_attention(
                f"{base}.cross",
                y,
                state.h,
                additive_mask=cross_mask,
                training=training,
                rng=rng,
            )
            y = layernorm(
                add(y, dropout(ca, cfg.dropout_p, rng, training)),
                p[f"{base}.ln2_g"],
                p[f"{base}.ln2_b"],
            )
            f = self._ffn(f"{base}.ffn", y)
            y = layernorm(
                add(y, dropout(f, cfg.dropout_p, rng, training)),
                p[f"{base}.ln3_g"],
                p[f"{base}.ln3_b"],
            )
        logits = add(matmul(y, transpose(p["tgt_embed"], (1, 0))), p["out_bias"])
        return logits

    def forward_loss(
        self,
        src_ids: np.ndarray,
        bundle: StructuralEncodings,
        tgt_ids: np.ndarray,
        *,
        mask: np.ndarray | None = None,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Mean next-token cross-entropy for one (code, summary) example.

        tgt_ids must start with BOS and end with EOS; the decoder input is
        tgt_ids[:-1] and the prediction targets are tgt_ids[1:].
        """
        tgt_ids = np.asarray(tgt_ids, dtype=np.int64)
        if tgt_ids.shape[0] < 2:
            raise ShapeError("summary encoding must contain at least BOS and EOS")
        state = self.script_encoder(src_ids, bundle, mask, training=training, rng=rng)
        logits = self.decode(tgt_ids[:-1], state, training=training, rng=rng)
        return cross_entropy(logits, tgt_ids[1:])

    # -- generation ------------------------------------------------------------

    def decoder_step(self, prefix_ids, state: EncoderState) -> np.ndarray:
        """Probability distribution over the next token after the prefix."""
        return np.exp(self._next_log_probs(tuple(prefix_ids), state))

    def _next_log_probs(self, prefix_ids: tuple[int, ...], state: EncoderState) -> np.ndarray:
        with no_grad():
            logits = self.decode(np.asarray(prefix_ids, dtype=np.int64), state).data[-1]
        z = logits - logits.max()
        return z - np.log(np.exp(z).sum())

    def beam_search(
        self,
        state: EncoderState,
        beam_size: int = 5,
        max_len: int = 50,
        length_penalty: float = 1.0,
    ) -> list[int]:
        """Length-normalized beam search; returns generated ids without
        BOS/EOS. Ties in score are broken toward the smaller token ids, so
        decoding is fully deterministic. beam_size=1 is greedy decoding."""
        if beam_size < 1:
            raise ConfigError(f"beam_size must be >= 1, got {beam_size}")
        if max_len < 1:
            raise ConfigError(f"max_len must be >= 1, got {max_len}")
        cfg = self.config
        bos, eos = cfg.bos_id, cfg.eos_id
        active: list[tuple[tuple[int, ...], float]] = [((bos,), 0.0)]
        finished: list[tuple[tuple[int, ...], float]] = []
        for _ in range(max_len):
            if not active:
                break
            candidates: list[tuple[tuple[int, ...], float]] = []
            for seq, lp in active:
                logp = self._next_log_probs(seq, state)
                for tid in range(cfg.tgt_vocab_size):
                    candidates.append((seq + (tid,), lp + float(logp[tid])))
            candidates.sort(key=lambda c: (-c[1], c[0]))
            selected = candidates[:beam_size]
            active = []
            for seq, lp in selected:
                if seq[-1] == eos:
                    finished.append((seq, lp))
                else:
                    active.append((seq, lp))
        finished.extend(active)

        def norm_score(item: tuple[tuple[int, ...], float]) -> float:
            seq, lp = item
            gen_len = len(seq) - 1
            return lp / (gen_len ** length_penalty)

        finished.sort(key=lambda item: (-norm_score(item), item[0]))
        best = finished[0][0]
        out = list(best[1:])
        if out and out[-1] == eos:
            out.pop()
        return out

    def greedy_decode(self, state: EncoderState, max_len: int = 50) -> list[int]:
        return self.beam_search(state, beam_size=1, max_len=max_len)


# -- module-level helpers ----------------------------------------------------


def _affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return add(matmul(x, w), b)


def _rel_scores(q: Tensor, table: Tensor, idx: np.ndarray) -> Tensor:
    """Pairwise scores q_i . table[idx[i, j]] via one batched matmul."""
    n_q, dh = q.shape
    r = gather(table, idx)  # (n_q, n_k, dh)
    q3 = reshape(q, (n_q, 1, dh))
    e3 = matmul(q3, transpose(r, (0, 2, 1)))  # (n_q, 1, n_k)
    return reshape(e3, idx.shape)


def _rel_values(alpha: Tensor, table: Tensor, idx: np.ndarray) -> Tensor:
    """Attention-weighted sums of table rows: sum_j alpha_ij table[idx[i, j]]."""
    n_q, n_k = alpha.shape
    r = gather(table, idx)  # (n_q, n_k, dh)
    a3 = reshape(alpha, (n_q, 1, n_k))
    z3 = matmul(a3, r)  # (n_q, 1, dh)
    return reshape(z3, (n_q, r.shape[2]))


def save_model_sidecar(path, config: ModelConfig, extra: dict | None = None) -> None:
    """Write the JSON sidecar describing a checkpoint's architecture."""
    payload = {"model_config": config.to_dict()}
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model_sidecar(path) -> tuple[ModelConfig, dict]:
    """Read a sidecar back; returns the config and the full payload."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid sidecar JSON: {exc}") from exc
    if "model_config" not in payload:
        raise FormatError("sidecar missing 'model_config'")
    return ModelConfig.from_dict(payload["model_config"]), payload


__all__ = [
    "ModelConfig",
    "RelPosEmbeddings",
    "EncoderState",
    "ScriptModel",
    "ablation_layer_plan",
    "save_model_sidecar",
    "load_model_sidecar",
]
