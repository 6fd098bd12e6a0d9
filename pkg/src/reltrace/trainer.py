"""CBOW negative-sampling trainer with incremental vocabulary expansion.

Models train from scratch on a first corpus slice and are then updated in
place with later slices: new tokens clearing a frequency threshold are
appended to the vocabulary (existing rows never move), frequencies
accumulate, and no post-hoc alignment is ever applied. Each session decays
the learning rate linearly over its own token budget.

Corpora are plain text or gzip, one sentence per line, whitespace tokens;
multiword entities arrive pre-joined (e.g. "united::states") and are
treated as opaque tokens.
"""

from __future__ import annotations

import collections
import concurrent.futures
import gzip
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .store import (EmbeddingModel, attach_freqs, load_freqs, load_model,
                    save_freqs, save_model)


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 300
    window: int = 5
    negative: int = 10
    epochs: int = 5
    min_count: int = 100
    expand_threshold: float = 15
    lr_initial: float = 0.025
    lr_min: float = 1e-4
    seed: int = 1
    unigram_power: float = 0.75
    table_size: int = 10_000_000
    workers: int = 1

    def __post_init__(self) -> None:
        if self.dim < 1 or self.epochs < 1 or self.window < 1:
            raise ValueError("dim, epochs and window must be >= 1")
        if self.negative < 1:
            raise ValueError("negative must be >= 1")
        if not (0 < self.lr_min < self.lr_initial):
            raise ValueError("need 0 < lr_min < lr_initial")
        if self.min_count < 0 or self.expand_threshold < 0:
            raise ValueError("frequency floors must be non-negative")
        if self.table_size < 1 or self.workers < 1:
            raise ValueError("table_size and workers must be >= 1")


@dataclass
class TrainState:
    """Mutable training state; `model.vectors` are the input vectors."""

    model: EmbeddingModel
    output_weights: np.ndarray
    neg_table: np.ndarray
    config: TrainConfig
    tokens_seen: int = 0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))


def iter_sentences(source):
    """Yield token lists from a corpus source.

    Accepts a path (plain text or .gz) or an in-memory iterable of lines /
    pre-split token lists. Blank lines are skipped. The source must be
    re-iterable (paths always are; pass lists, not generators, for
    in-memory corpora).
    """
    if isinstance(source, (str, os.PathLike)):
        opener = gzip.open if str(source).endswith(".gz") else open
        with opener(source, "rt", encoding="utf-8") as f:
            for line in f:
                toks = line.split()
                if toks:
                    yield toks
    else:
        for line in source:
            toks = line.split() if isinstance(line, str) else list(line)
            if toks:
                yield toks


def count_tokens(source) -> tuple[collections.Counter, dict[str, int]]:
    """One counting pass: frequencies and first-occurrence order."""
    freqs: collections.Counter = collections.Counter()
    first_seen: dict[str, int] = {}
    pos = 0
    for sent in iter_sentences(source):
        for tok in sent:
            freqs[tok] += 1
            if tok not in first_seen:
                first_seen[tok] = pos
            pos += 1
    return freqs, first_seen


def build_vocab(source, min_count: int) -> tuple[list[str], np.ndarray]:
    """Tokens with corpus frequency >= min_count, ordered by descending
    frequency then first occurrence; counts are full corpus counts."""
    freqs, first_seen = count_tokens(source)
    kept = [t for t, c in freqs.items() if c >= min_count]
    kept.sort(key=lambda t: (-freqs[t], first_seen[t]))
    return kept, np.array([freqs[t] for t in kept], dtype=np.int64)


def build_neg_table(freqs: np.ndarray, power: float, table_size: int) -> np.ndarray:
    """Index table approximating draws proportional to freq**power."""
    if len(freqs) == 0:
        return np.empty(0, dtype=np.int64)
    weights = np.asarray(freqs, dtype=np.float64) ** power
    total = weights.sum()
    if total <= 0:
        return np.empty(0, dtype=np.int64)
    bounds = np.round(np.cumsum(weights) / total * table_size).astype(np.int64)
    counts = np.diff(np.concatenate([[0], bounds]))
    return np.repeat(np.arange(len(freqs), dtype=np.int64), counts)


def init_state(vocab: list[str], freqs: np.ndarray, config: TrainConfig) -> TrainState:
    """Fresh state: input vectors uniform in [-0.5/dim, 0.5/dim], output
    weights zero."""
    if not vocab:
        raise ValueError("cannot initialize from an empty vocabulary")
    rng = np.random.default_rng(config.seed)
    bound = 0.5 / config.dim
    vectors = rng.uniform(-bound, bound, size=(len(vocab), config.dim)).astype(np.float32)
    model = EmbeddingModel(list(vocab), vectors, np.asarray(freqs, dtype=np.int64))
    output = np.zeros((len(vocab), config.dim), dtype=np.float32)
    table = build_neg_table(model.freqs, config.unigram_power, config.table_size)
    return TrainState(model, output, table, config, tokens_seen=0, rng=rng)


def sample_negatives(state: TrainState, center: int, rng: np.random.Generator) -> np.ndarray:
    """Draw config.negative indices from the unigram table, rejecting the
    center token (bounded retries keep pathological tables from looping)."""
    table = state.neg_table
    n = state.config.negative
    if len(table) == 0:
        return np.empty(0, dtype=np.int64)
    draws = table[rng.integers(0, len(table), size=n)]
    for i in range(n):
        attempts = 0
        while draws[i] == center and attempts < 100:
            draws[i] = table[rng.integers(0, len(table))]
            attempts += 1
    return draws[draws != center]


def cbow_loss(state: TrainState, context: list[int], center: int,
              neg_indices: np.ndarray) -> float:
    """Negative-sampling loss of one window under the current weights."""
    h = state.model.vectors[context].astype(np.float64).mean(axis=0)
    rows = np.concatenate([[center], neg_indices]).astype(np.int64)
    scores = state.output_weights[rows].astype(np.float64) @ h
    # -log sigma(s_pos) - sum log sigma(-s_neg), via stable softplus
    return float(np.logaddexp(0.0, -scores[0]) + np.logaddexp(0.0, scores[1:]).sum())


def cbow_step(state: TrainState, context: list[int], center: int, lr: float,
              neg_indices: np.ndarray | None = None,
              rng: np.random.Generator | None = None) -> float:
    """One CBOW-NS update; returns the window loss before the update.

    The input-side gradient is distributed equally over the context rows
    (each row receives gradient/len(context)), which is the exact analytic
    gradient of the mean-combined objective. Duplicate context or negative
    indices accumulate additively.
    """
    if neg_indices is None:
        neg_indices = sample_negatives(state, center, rng or state.rng)
    vectors = state.model.vectors
    output = state.output_weights
    ctx = np.asarray(context, dtype=np.int64)
    h = vectors[ctx].mean(axis=0, dtype=np.float64)

    rows = np.concatenate([[center], neg_indices]).astype(np.int64)
    l2 = output[rows].astype(np.float64)
    scores = l2 @ h
    loss = float(np.logaddexp(0.0, -scores[0]) + np.logaddexp(0.0, scores[1:]).sum())

    labels = np.zeros(len(rows))
    labels[0] = 1.0
    g = (labels - expit(scores)) * lr
    neu = g @ l2                                     # input gradient, old weights
    np.add.at(output, rows, np.outer(g, h).astype(output.dtype))
    np.add.at(vectors, ctx, (neu / len(ctx)).astype(vectors.dtype))
    return loss


def _session_token_count(state: TrainState, source) -> int:
    """In-vocabulary token occurrences in the corpus (one counting pass)."""
    index = state.model._index
    return sum(1 for sent in iter_sentences(source) for t in sent if t in index)


def _train_sentences(state: TrainState, sentences, lr_span: tuple[float, float, int],
                     rng: np.random.Generator, counter: list[int]) -> float:
    """Run windows over tokenized sentences; returns summed loss.

    ``lr_span`` is (lr_initial, lr_min, budget); ``counter`` is a shared
    single-cell processed-token count (racy in parallel mode by design).
    """
    lr_initial, lr_min, budget = lr_span
    window = state.config.window
    index = state.model._index
    total_loss = 0.0
    for sent in sentences:
        words = [index[t] for t in sent if t in index]
        if not words:
            continue
        done = counter[0]
        lr = lr_initial + (lr_min - lr_initial) * min(done / budget, 1.0)
        lr = max(lr, lr_min)
        for i, center in enumerate(words):
            ctx = words[max(0, i - window):i] + words[i + 1:i + 1 + window]
            if not ctx:
                continue
            total_loss += cbow_step(state, ctx, center, lr, rng=rng)
        counter[0] = done + len(words)
        state.tokens_seen += len(words)
    return total_loss


def train_session(state: TrainState, source, epoch_losses: list[float] | None = None) -> TrainState:
    """Run config.epochs passes over the corpus, learning rate decaying
    linearly from lr_initial to lr_min over the whole session's in-vocab
    token budget. Out-of-vocabulary tokens neither train nor occupy window
    slots; windows clip at sentence boundaries.

    Single-worker mode is deterministic for a fixed seed. With
    config.workers > 1, per-epoch sentence shards train concurrently
    without locking (updates may interleave; bitwise reproducibility is
    given up for throughput).
    """
    per_epoch = _session_token_count(state, source)
    if per_epoch == 0:
        return state
    budget = per_epoch * state.config.epochs
    span = (state.config.lr_initial, state.config.lr_min, budget)
    counter = [0]
    workers = state.config.workers
    for _ in range(state.config.epochs):
        if workers == 1:
            loss = _train_sentences(state, iter_sentences(source), span, state.rng, counter)
        else:
            shards: list[list[list[str]]] = [[] for _ in range(workers)]
            for i, sent in enumerate(iter_sentences(source)):
                shards[i % workers].append(sent)
            rngs = state.rng.spawn(workers)
            with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_train_sentences, state, shard, span, r, counter)
                           for shard, r in zip(shards, rngs)]
                loss = sum(f.result() for f in futures)
        if epoch_losses is not None:
            epoch_losses.append(loss)
    return state


def expand_vocab(state: TrainState, source) -> tuple[TrainState, list[str]]:
    """Append new tokens whose new-corpus frequency clears
    config.expand_threshold; existing rows and indices never move.

    New input rows are drawn from the session rng with the init_state
    scheme, new output rows are zero; stored frequencies accumulate and the
    sampling table is rebuilt.
    """
    freqs, first_seen = count_tokens(source)
    model = state.model
    threshold = state.config.expand_threshold
    added = [t for t, c in freqs.items()
             if c >= threshold and t not in model._index]
    added.sort(key=lambda t: (-freqs[t], first_seen[t]))

    new_freqs = model.freqs.copy()
    for t, c in freqs.items():
        i = model._index.get(t)
        if i is not None:
            new_freqs[i] += c
    if added:
        dim = state.config.dim
        bound = 0.5 / dim
        new_rows = state.rng.uniform(-bound, bound, size=(len(added), dim)).astype(np.float32)
        vectors = np.vstack([model.vectors, new_rows])
        tokens = model.tokens + added
        new_freqs = np.concatenate(
            [new_freqs, np.array([freqs[t] for t in added], dtype=np.int64)])
        state.model = EmbeddingModel(tokens, vectors, new_freqs)
        state.output_weights = np.vstack(
            [state.output_weights,
             np.zeros((len(added), dim), dtype=state.output_weights.dtype)])
    else:
        state.model = EmbeddingModel(model.tokens, model.vectors, new_freqs)
    state.neg_table = build_neg_table(
        state.model.freqs, state.config.unigram_power, state.config.table_size)
    return state, added


def incremental_update(state: TrainState, source) -> TrainState:
    """One time-slice update: expand the vocabulary, then train a session.
    No alignment of any kind; the result is that slice's snapshot."""
    state, _ = expand_vocab(state, source)
    return train_session(state, source)


def train_from_scratch(source, config: TrainConfig) -> TrainState:
    """build_vocab + init_state + train_session on one corpus."""
    vocab, freqs = build_vocab(source, config.min_count)
    state = init_state(vocab, freqs, config)
    return train_session(state, source)


def save_snapshot(state: TrainState, path: str, fmt: str = "binary") -> None:
    """Persist the input vectors plus the frequency sidecar.

    The output layer and sampling table are reconstructible artifacts of
    continued training and are not part of the interchange formats; a
    snapshot loaded from disk restarts them (zeros / rebuilt table).
    """
    save_model(state.model, path, fmt)
    save_freqs(state.model, path + ".freqs")


def load_snapshot(path: str, config: TrainConfig, fmt: str = "binary") -> TrainState:
    """Load a snapshot for further incremental training."""
    model = attach_freqs(load_model(path, fmt), load_freqs(path + ".freqs"))
    output = np.zeros_like(model.vectors)
    table = build_neg_table(model.freqs, config.unigram_power, config.table_size)
    return TrainState(model, output, table, config,
                      rng=np.random.default_rng(config.seed))
