"""Dataset loading, vocabularies, and deterministic padded batching.

Datasets are JSON Lines files, one example per line, holding either
MiniLang source under "code" or an interchange tree under "ast", plus a
"summary" string. Code tokens come from the tree leaves; summaries are
lowercased and whitespace-split. Vocabularies are built from the training
split only, with fixed reserved ids and frequency-then-lexicographic
ranking.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .astcore import Ast, ast_from_json, leaf_tokens
from .minilang import parse_minilang
from .errors import EmptyCorpusError, FormatError, MiniLangSyntaxError
from .structure import StructuralEncodings, encode_structure

PAD_ID, BOS_ID, EOS_ID, UNK_ID, STR_ID, NUM_ID = 0, 1, 2, 3, 4, 5
PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN = "<pad>", "<bos>", "<eos>", "<unk>"
RESERVED_TOKENS = (PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN, "STR", "NUM")

MAX_SOURCE_TOKENS = 400
MAX_SUMMARY_TOKENS = 50


@dataclass(frozen=True)
class Example:
    """One (code, summary) pair with its tree and structural matrices."""

    code_tokens: tuple[str, ...]
    summary_tokens: tuple[str, ...]
    ast: Ast
    bundle: StructuralEncodings


class Vocabulary:
    """Token <-> id bijection with fixed reserved ids.

    Ids 0..5 are PAD, BOS, EOS, UNK, STR, NUM; corpus tokens follow ranked
    by descending frequency with lexicographic tie-breaks.
    """

    def __init__(self, corpus_tokens: Sequence[str]):
        self.id_to_token: list[str] = list(RESERVED_TOKENS) + list(corpus_tokens)
        if len(set(self.id_to_token)) != len(self.id_to_token):
            raise FormatError("vocabulary contains duplicate tokens")
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def encode(self, tokens: Iterable[str], add_sentence_marks: bool = False) -> np.ndarray:
        ids = [self.token_to_id.get(tok, UNK_ID) for tok in tokens]
        if add_sentence_marks:
            ids = [BOS_ID] + ids + [EOS_ID]
        return np.asarray(ids, dtype=np.int64)

    def decode(self, ids: Iterable[int], strip_special: bool = True) -> list[str]:
        out = []
        for i in ids:
            tok = self.id_to_token[int(i)]
            if strip_special and tok in (PAD_TOKEN, BOS_TOKEN, EOS_TOKEN):
                continue
            out.append(tok)
        return out

    def digest(self) -> str:
        payload = json.dumps(self.id_to_token, separators=(",", ":")).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"tokens": self.id_to_token}, fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid vocabulary JSON: {exc}") from exc
        tokens = obj.get("tokens") if isinstance(obj, dict) else None
        if not isinstance(tokens, list) or tokens[: len(RESERVED_TOKENS)] != list(RESERVED_TOKENS):
            raise FormatError("vocabulary file must list tokens starting with the reserved set")
        vocab = cls.__new__(cls)
        vocab.id_to_token = list(tokens)
        vocab.token_to_id = {tok: i for i, tok in enumerate(tokens)}
        return vocab


def _ranked_tokens(counts: Counter, min_freq: int, max_size: int | None) -> list[str]:
    eligible = [
        (tok, cnt)
        for tok, cnt in counts.items()
        if cnt >= min_freq and tok not in RESERVED_TOKENS
    ]
    eligible.sort(key=lambda item: (-item[1], item[0]))
    if max_size is not None:
        eligible = eligible[:max_size]
    return [tok for tok, _ in eligible]


def build_vocab(
    train_split: Sequence[Example], min_freq: int = 1, max_size: int | None = None
) -> tuple[Vocabulary, Vocabulary]:
    """Source and target vocabularies from the training split.

    max_size bounds the number of non-reserved tokens kept; tokens below
    min_freq encode to UNK.
    """
    if not train_split:
        raise EmptyCorpusError("cannot build vocabularies from an empty split")
    src_counts: Counter = Counter()
    tgt_counts: Counter = Counter()
    for ex in train_split:
        src_counts.update(ex.code_tokens)
        tgt_counts.update(ex.summary_tokens)
    return (
        Vocabulary(_ranked_tokens(src_counts, min_freq, max_size)),
        Vocabulary(_ranked_tokens(tgt_counts, min_freq, max_size)),
    )


def summary_tokens(text: str) -> tuple[str, ...]:
    """Lowercased whitespace tokenization used for summaries and metrics."""
    return tuple(text.lower().split())


def example_from_record(
    record: dict,
    distance_clip: int = 8,
    view_weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3),
) -> Example:
    """Build one Example from a parsed dataset line."""
    if not isinstance(record, dict):
        raise FormatError("dataset line must be a JSON object")
    if "summary" not in record or not isinstance(record["summary"], str):
        raise FormatError("dataset line requires a string 'summary'")
    has_code = "code" in record
    has_ast = "ast" in record
    if has_code == has_ast:
        raise FormatError("dataset line must carry exactly one of 'code' or 'ast'")
    if has_code:
        if not isinstance(record["code"], str):
            raise FormatError("'code' must be a string")
        ast = parse_minilang(record["code"])
    else:
        ast = ast_from_json(record["ast"])
    tokens, alignment = leaf_tokens(ast)
    bundle = encode_structure(ast, alignment, distance_clip, view_weights)
    if len(tokens) > MAX_SOURCE_TOKENS:
        keep = MAX_SOURCE_TOKENS
        tokens = tokens[:keep]
        bundle = StructuralEncodings(
            distances=bundle.distances[:keep, :keep],
            distance_weights=bundle.distance_weights[:keep, :keep],
            bucket_ids=bundle.bucket_ids[:keep, :keep],
            multiview=bundle.multiview[:keep, :keep],
        )
    summary = summary_tokens(record["summary"])[:MAX_SUMMARY_TOKENS]
    return Example(
        code_tokens=tuple(tokens),
        summary_tokens=summary,
        ast=ast,
        bundle=bundle,
    )


def load_dataset(
    path,
    distance_clip: int = 8,
    view_weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3),
) -> list[Example]:
    """Read a JSON Lines dataset; blank lines are skipped."""
    examples: list[Example] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"line {lineno}: invalid JSON: {exc}") from exc
            try:
                examples.append(
                    example_from_record(record, distance_clip, view_weights)
                )
            except (FormatError, MiniLangSyntaxError) as exc:
                raise FormatError(f"line {lineno}: {exc}") from exc
    return examples


def toy_corpus_path():
    """Filesystem path of the bundled 32-example corpus."""
    from pathlib import Path

    return Path(__file__).resolve().parent / "data" / "toy_corpus.jsonl"


@dataclass(frozen=True)
class EncodedExample:
    """An Example with both sides mapped to vocabulary ids."""

    src_ids: np.ndarray  # (n,) code token ids
    tgt_ids: np.ndarray  # (m,) BOS ... EOS
    bundle: StructuralEncodings
    summary_tokens: tuple[str, ...]


def encode_examples(
    split: Sequence[Example], src_vocab: Vocabulary, tgt_vocab: Vocabulary
) -> list[EncodedExample]:
    out = []
    for ex in split:
        out.append(
            EncodedExample(
                src_ids=src_vocab.encode(ex.code_tokens),
                tgt_ids=tgt_vocab.encode(ex.summary_tokens, add_sentence_marks=True),
                bundle=ex.bundle,
                summary_tokens=ex.summary_tokens,
            )
        )
    return out


@dataclass(frozen=True)
class Batch:
    """Padded id matrices, masks, and zero-padded structural blocks.

    Padded rows/columns of every structural matrix are zero, so padded
    positions receive no structural weight; masks are 1.0 at real
    positions.
    """

    src_ids: np.ndarray  # (B, n_max)
    src_mask: np.ndarray  # (B, n_max) floats in {0, 1}
    src_lens: tuple[int, ...]
    tgt_ids: np.ndarray  # (B, m_max)
    tgt_lens: tuple[int, ...]
    m_bar: np.ndarray  # (B, n_max, n_max)
    buckets: np.ndarray  # (B, n_max, n_max) int
    a_mv: np.ndarray  # (B, n_max, n_max)
    example_indices: tuple[int, ...]

    def __len__(self) -> int:
        return self.src_ids.shape[0]

    def example_bundle(self, i: int) -> StructuralEncodings:
        """Padded-size structural bundle for one row of the batch."""
        n = self.src_ids.shape[1]
        return StructuralEncodings(
            distances=np.zeros((n, n), dtype=np.int64),
            distance_weights=self.m_bar[i],
            bucket_ids=self.buckets[i],
            multiview=self.a_mv[i],
        )


def make_batches(
    split: Sequence[EncodedExample],
    batch_size: int,
    sort_by_length: bool = False,
    shuffle_seed: int | None = None,
) -> list[Batch]:
    """Chunk encoded examples into padded batches.

    Order is deterministic: an optional seeded shuffle, then an optional
    stable sort by source length, then contiguous chunks.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = list(range(len(split)))
    if shuffle_seed is not None:
        rng = np.random.default_rng(shuffle_seed)
        rng.shuffle(order)
    if sort_by_length:
        order.sort(key=lambda i: len(split[i].src_ids))
    batches = []
    for start in range(0, len(order), batch_size):
        chunk = order[start : start + batch_size]
        batches.append(_pad_batch(split, chunk))
    return batches


def _pad_batch(split: Sequence[EncodedExample], indices: list[int]) -> Batch:
    rows = [split[i] for i in indices]
    n_max = max(len(r.src_ids) for r in rows)
    m_max = max(len(r.tgt_ids) for r in rows)
    b = len(rows)
    src_ids = np.full((b, n_max), PAD_ID, dtype=np.int64)
    src_mask = np.zeros((b, n_max))
    tgt_ids = np.full((b, m_max), PAD_ID, dtype=np.int64)
    m_bar = np.zeros((b, n_max, n_max))
    buckets = np.zeros((b, n_max, n_max), dtype=np.int64)
    a_mv = np.zeros((b, n_max, n_max))
    src_lens = []
    tgt_lens = []
    for i, r in enumerate(rows):
        n = len(r.src_ids)
        m = len(r.tgt_ids)
        src_ids[i, :n] = r.src_ids
        src_mask[i, :n] = 1.0
        tgt_ids[i, :m] = r.tgt_ids
        m_bar[i, :n, :n] = r.bundle.distance_weights
        buckets[i, :n, :n] = r.bundle.bucket_ids
        a_mv[i, :n, :n] = r.bundle.multiview
        src_lens.append(n)
        tgt_lens.append(m)
    return Batch(
        src_ids=src_ids,
        src_mask=src_mask,
        src_lens=tuple(src_lens),
        tgt_ids=tgt_ids,
        tgt_lens=tuple(tgt_lens),
        m_bar=m_bar,
        buckets=buckets,
        a_mv=a_mv,
        example_indices=tuple(indices),
    )
