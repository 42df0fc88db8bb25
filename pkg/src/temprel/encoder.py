"""Event-pair representations: typed markers, hashed windows, and MLP1.

The pair representation is built in three steps: wrap each event mention
in typed marker tokens (with one context sentence on each side), pool a
hashed-embedding window around each left marker into a fixed-width vector,
and map the concatenation of the two pooled vectors through MLP1.  The
hashed featurizer is a deterministic, trainable stand-in for a pretrained
encoder; precomputed pair vectors can be loaded instead.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import EventPairInstance
from .errors import ConfigError, DataError, FormatError, InputError
from .nn import MLP

E1_LEFT = "<E1:L>"
E1_RIGHT = "<E1:R>"
E2_LEFT = "<E2:L>"
E2_RIGHT = "<E2:R>"
MARKER_TOKENS = (E1_LEFT, E1_RIGHT, E2_LEFT, E2_RIGHT)


@dataclass
class MarkedSequence:
    """Token sequence with the four markers inserted and context attached."""

    tokens: list[str]
    e1_marker_pos: int
    e2_marker_pos: int


def insert_markers(inst: EventPairInstance) -> MarkedSequence:
    """Wrap both event spans in typed markers, keeping argument roles.

    Marker types follow the event's role (e1 vs e2), not its surface
    order, so an instance whose second argument appears first in the text
    still gets ``<E2:L>/<E2:R>`` around that earlier mention.
    """
    spans = [(inst.e1_span, E1_LEFT, E1_RIGHT), (inst.e2_span, E2_LEFT, E2_RIGHT)]
    (first_span, first_l, first_r), (second_span, second_l, second_r) = sorted(
        spans, key=lambda s: s[0][0]
    )
    if first_span[1] > second_span[0]:
        raise InputError(f"{inst.id}: event spans overlap")

    toks = inst.tokens
    out = list(inst.context_before)
    left_pos = {}
    out.extend(toks[: first_span[0]])
    left_pos[first_l] = len(out)
    out.append(first_l)
    out.extend(toks[first_span[0] : first_span[1]])
    out.append(first_r)
    out.extend(toks[first_span[1] : second_span[0]])
    left_pos[second_l] = len(out)
    out.append(second_l)
    out.extend(toks[second_span[0] : second_span[1]])
    out.append(second_r)
    out.extend(toks[second_span[1] :])
    out.extend(inst.context_after)
    return MarkedSequence(
        tokens=out, e1_marker_pos=left_pos[E1_LEFT], e2_marker_pos=left_pos[E2_LEFT]
    )


def strip_markers(tokens: list[str]) -> list[str]:
    """Remove the four marker tokens, recovering the plain token sequence."""
    return [t for t in tokens if t not in MARKER_TOKENS]


@dataclass
class FeaturizerConfig:
    n_buckets: int = 4096
    d_e: int = 64
    window_radius: int = 5
    pooling: str = "window"  # "window" or "span"

    def __post_init__(self):
        if self.n_buckets <= len(MARKER_TOKENS):
            raise ConfigError(f"n_buckets must exceed {len(MARKER_TOKENS)}, got {self.n_buckets}")
        if self.pooling not in ("window", "span"):
            raise ConfigError(f"pooling must be 'window' or 'span', got {self.pooling!r}")


class Featurizer:
    """Hashed-token embedding table with window (or span) mean pooling.

    Marker tokens own reserved buckets 0..3; every other token hashes via
    CRC-32 into the remaining buckets, so markers can never collide with
    vocabulary.
    """

    # Window means average ~2*radius+1 embeddings, which shrinks the input
    # scale; the wide init keeps pooled features at a trainable magnitude.
    EMBED_INIT = 1.0

    def __init__(self, config: FeaturizerConfig, rng: np.random.Generator):
        self.config = config
        self.embedding = rng.uniform(
            -self.EMBED_INIT, self.EMBED_INIT, size=(config.n_buckets, config.d_e)
        )

    def bucket(self, token: str) -> int:
        if token in MARKER_TOKENS:
            return MARKER_TOKENS.index(token)
        n_free = self.config.n_buckets - len(MARKER_TOKENS)
        return len(MARKER_TOKENS) + zlib.crc32(token.encode("utf-8")) % n_free

    def _pool_positions(self, seq: MarkedSequence, marker_pos: int, right_marker: str) -> range:
        if self.config.pooling == "span":
            return range(marker_pos, seq.tokens.index(right_marker) + 1)
        r = self.config.window_radius
        return range(max(0, marker_pos - r), min(len(seq.tokens), marker_pos + r + 1))

    def pooled_indices(self, seq: MarkedSequence) -> tuple[list[int], list[int]]:
        """Bucket ids pooled for e1 and for e2."""
        e1 = self._pool_positions(seq, seq.e1_marker_pos, E1_RIGHT)
        e2 = self._pool_positions(seq, seq.e2_marker_pos, E2_RIGHT)
        buckets = [self.bucket(t) for t in seq.tokens]
        return [buckets[i] for i in e1], [buckets[i] for i in e2]


@dataclass
class FeatureBatch:
    """Padded bucket indices and mean weights for a batch of sequences.

    Index arrays are (B, L); padding rows carry weight zero and point at
    bucket 0, so gathers and scatter-adds stay branch-free.
    """

    e1_idx: np.ndarray
    e1_w: np.ndarray
    e2_idx: np.ndarray
    e2_w: np.ndarray

    def __len__(self) -> int:
        return self.e1_idx.shape[0]

    def take(self, rows: np.ndarray) -> "FeatureBatch":
        return FeatureBatch(
            self.e1_idx[rows], self.e1_w[rows], self.e2_idx[rows], self.e2_w[rows]
        )


def featurize_batch(featurizer: Featurizer, seqs: list[MarkedSequence]) -> FeatureBatch:
    """Precompute pooling indices for many sequences (tokens never change)."""
    per_seq = [featurizer.pooled_indices(s) for s in seqs]
    width = max((max(len(a), len(b)) for a, b in per_seq), default=1)
    n = len(per_seq)
    e1_idx = np.zeros((n, width), dtype=np.int64)
    e2_idx = np.zeros((n, width), dtype=np.int64)
    e1_w = np.zeros((n, width))
    e2_w = np.zeros((n, width))
    for i, (a, b) in enumerate(per_seq):
        e1_idx[i, : len(a)] = a
        e1_w[i, : len(a)] = 1.0 / len(a)
        e2_idx[i, : len(b)] = b
        e2_w[i, : len(b)] = 1.0 / len(b)
    return FeatureBatch(e1_idx, e1_w, e2_idx, e2_w)


class PairEncoder:
    """Featurizer plus MLP1: marked sequence -> pair representation h."""

    def __init__(
        self,
        featurizer: Featurizer,
        mlp1: MLP,
    ):
        if mlp1.d_in != 2 * featurizer.config.d_e:
            raise ConfigError(
                f"MLP1 input width {mlp1.d_in} != concatenated embedding width "
                f"{2 * featurizer.config.d_e}"
            )
        self.featurizer = featurizer
        self.mlp1 = mlp1

    @property
    def d_h(self) -> int:
        return self.mlp1.d_out

    def pooled(self, fb: FeatureBatch) -> np.ndarray:
        """Weighted-mean embeddings, concatenated: (B, 2 * d_e)."""
        E = self.featurizer.embedding
        x1 = (E[fb.e1_idx] * fb.e1_w[:, :, None]).sum(axis=1)
        x2 = (E[fb.e2_idx] * fb.e2_w[:, :, None]).sum(axis=1)
        return np.concatenate([x1, x2], axis=1)

    def forward(self, fb: FeatureBatch) -> np.ndarray:
        return self.mlp1.forward(self.pooled(fb))

    def forward_cached(self, fb: FeatureBatch):
        x = self.pooled(fb)
        h, cache = self.mlp1.forward_cached(x)
        return h, (fb, cache)

    def backward(self, cache, grad_h: np.ndarray):
        """Gradients for MLP1 and the embedding table."""
        fb, mlp_cache = cache
        mlp_grads, gx = self.mlp1.backward(mlp_cache, grad_h)
        d_e = self.featurizer.config.d_e
        dE = np.zeros_like(self.featurizer.embedding)
        np.add.at(dE, fb.e1_idx, gx[:, None, :d_e] * fb.e1_w[:, :, None])
        np.add.at(dE, fb.e2_idx, gx[:, None, d_e:] * fb.e2_w[:, :, None])
        return dE, mlp_grads

    def params(self) -> list[np.ndarray]:
        return [self.featurizer.embedding] + self.mlp1.params()


def encode_pair(seq: MarkedSequence, encoder: PairEncoder) -> np.ndarray:
    """Pair representation h for a single marked sequence."""
    fb = featurize_batch(encoder.featurizer, [seq])
    return encoder.forward(fb)[0]


def load_precomputed(path: str | Path) -> dict[str, np.ndarray]:
    """Load id -> vector records (JSON Lines: ``{"id": ..., "vector": [...]}``).

    All vectors must share one width; duplicate ids are rejected.
    """
    out: dict[str, np.ndarray] = {}
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                key, vec = rec["id"], np.asarray(rec["vector"], dtype=float)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{lineno}: bad embedding record: {exc}") from exc
            if vec.ndim != 1:
                raise FormatError(f"{path}:{lineno}: vector must be one-dimensional")
            if key in out:
                raise FormatError(f"{path}:{lineno}: duplicate id {key!r}")
            if width is None:
                width = vec.shape[0]
            elif vec.shape[0] != width:
                raise FormatError(
                    f"{path}:{lineno}: vector width {vec.shape[0]} != {width}"
                )
            out[key] = vec
    return out


def lookup_precomputed(table: dict[str, np.ndarray], ids: list[str]) -> np.ndarray:
    """Stack vectors for the given ids; a missing id raises DataError."""
    rows = []
    for key in ids:
        try:
            rows.append(table[key])
        except KeyError:
            raise DataError(f"no precomputed representation for id {key!r}") from None
    return np.stack(rows) if rows else np.zeros((0, 0))
