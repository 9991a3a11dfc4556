"""MLM training loop: shuffle, mask, batch, one Adam step per batch."""

from __future__ import annotations

import numpy as np

from . import bpe
from .corpora import Corpus
from .model import (
    IGNORE_INDEX,
    ModelState,
    TrainConfig,
    adam_step,
    apply_masking,
    loss_and_grads,
)
from .util import make_rng


def encode_corpus(tok: bpe.TokenizerModel, corpus: Corpus, max_positions: int):
    """Token id arrays for every sentence, length-checked up front."""
    encoded = []
    for s in corpus.sentences:
        ids = np.asarray(bpe.encode(tok, s.text), dtype=np.int64)
        if ids.size > max_positions:
            raise ValueError(
                f"sentence encodes to {ids.size} tokens, over the "
                f"position limit {max_positions}: {s.text!r}"
            )
        encoded.append(ids)
    return encoded


def pad_batch(seqs, labels, pad_id: int):
    """Right-pad sequences with PAD and labels with the ignore marker."""
    batch = len(seqs)
    width = max(s.size for s in seqs)
    ids = np.full((batch, width), pad_id, dtype=np.int64)
    labs = np.full((batch, width), IGNORE_INDEX, dtype=np.int64)
    mask = np.zeros((batch, width), dtype=bool)
    for row, (s, lab) in enumerate(zip(seqs, labels)):
        ids[row, : s.size] = s
        labs[row, : s.size] = lab
        mask[row, : s.size] = True
    return ids, labs, mask


def train(state: ModelState, corpus: Corpus, tok: bpe.TokenizerModel, cfg: TrainConfig) -> ModelState:
    """Run cfg.epochs passes over the corpus, updating state in place.

    Each epoch reshuffles the sentence order and redraws the mask
    positions.  A batch with zero masked positions takes no optimizer
    step.  Per-batch losses are appended to state.loss_history.
    """
    if len(corpus.sentences) == 0:
        raise ValueError("corpus is empty")
    if state.config.vocab_size != tok.vocab_size:
        raise ValueError(
            f"model vocab {state.config.vocab_size} != tokenizer vocab {tok.vocab_size}"
        )
    encoded = encode_corpus(tok, corpus, state.config.max_positions)
    rng = make_rng(cfg.seed)
    n = len(encoded)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            chosen = order[start : start + cfg.batch_size]
            seqs, labels = [], []
            for i in chosen:
                masked, lab = apply_masking(encoded[i], cfg.mask_probability, rng, tok.mask_id)
                seqs.append(masked)
                labels.append(lab)
            ids, labs, mask = pad_batch(seqs, labels, tok.pad_id)
            loss, grads, n_masked = loss_and_grads(state, ids, mask, labs, dropout_rng=rng)
            if n_masked == 0:
                continue
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss {loss} at epoch {epoch + 1}, "
                    f"batch starting {start} (seed {cfg.seed})"
                )
            adam_step(state, grads, cfg.learning_rate)
            state.loss_history.append(loss)
    return state
