"""Forward-only decoding over a frozen model.

Beam search keeps, at every step, the K most likely expansions of the
live prefixes; expansions that choose EOS retire as finished hypotheses.
Scores are raw probability products (no length normalization), so
extending a hypothesis never increases its likelihood, which both
justifies the early-stop rule and makes beam width 1 coincide with
greedy decoding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import net
from .net import SeqModel
from .vocab import tokenize

DEFAULT_MAX_TYPE_LEN = 32


@dataclass(frozen=True)
class BeamHypothesis:
    """A decoded token sequence and its accumulated log probability."""

    ids: tuple
    log_prob: float
    finished: bool

    @property
    def likelihood(self) -> float:
        return math.exp(self.log_prob)


def _sort_key(hyp: BeamHypothesis):
    return (-hyp.log_prob, hyp.ids)


def beam_generate(model: SeqModel, x_ids, k: int, max_len: int = DEFAULT_MAX_TYPE_LEN):
    """Top-k hypotheses for the input sequence, sorted by likelihood.

    Each hypothesis is EOS-terminated or truncated at ``max_len``
    generated tokens.  Ties break on token ids so results are total-order
    deterministic.
    """
    if k < 1:
        raise ValueError("beam width must be at least 1")
    vocab = model.vocab
    h_x = net.encode(model, x_ids)

    live = [(0.0, (vocab.bos_id,))]
    done: list[BeamHypothesis] = []
    for _ in range(max_len):
        expansions = []
        for log_prob, ids in live:
            probs = net.decode_step(model, h_x, np.array(ids))
            with np.errstate(divide="ignore"):
                logp = np.log(probs)
            for token_id in range(len(vocab)):
                if token_id == vocab.bos_id:
                    continue
                expansions.append((log_prob + logp[token_id], ids + (token_id,)))
        expansions.sort(key=lambda e: (-e[0], e[1]))
        selected = expansions[:k]
        live = []
        for log_prob, ids in selected:
            if ids[-1] == vocab.eos_id:
                done.append(BeamHypothesis(ids, log_prob, True))
            else:
                live.append((log_prob, ids))
        done.sort(key=_sort_key)
        done = done[:k]
        if not live:
            break
        if len(done) >= k and done[-1].log_prob > live[0][0]:
            break

    results = done + [BeamHypothesis(ids, lp, False) for lp, ids in live]
    results.sort(key=_sort_key)
    return results[:k]


def greedy_decode(model: SeqModel, x_ids, max_len: int = DEFAULT_MAX_TYPE_LEN):
    """Single most-probable-next-token rollout; equals beam width 1."""
    return beam_generate(model, x_ids, 1, max_len)[0]


def _source_text(func) -> str:
    return func.function.source_text if hasattr(func, "function") else func


def likelihood_from_ids(model: SeqModel, x_ids, y_ids) -> float:
    """Product of teacher-forced next-token probabilities of ``y_ids``."""
    h_x = net.encode(model, x_ids)
    return math.exp(float(net.sequence_log_probs(model, h_x, y_ids).sum()))


def likelihood(model: SeqModel, func, type_text: str) -> float:
    """Generative likelihood of a type given a type-missed function.

    The product runs over every decoding step of the tokenized type,
    including the closing EOS.
    """
    x_ids = tokenize(_source_text(func), model.vocab, model.dims.max_seq_len)
    y_ids = tokenize(type_text, model.vocab, DEFAULT_MAX_TYPE_LEN)
    return likelihood_from_ids(model, x_ids, y_ids)


def similarity(model: SeqModel, func, type_text: str) -> float:
    """Cosine of averaged encoder states (function, sentinels included)
    and averaged decoder states (type)."""
    x_ids = tokenize(_source_text(func), model.vocab, model.dims.max_seq_len)
    y_ids = tokenize(type_text, model.vocab, DEFAULT_MAX_TYPE_LEN)
    h_x = net.encode(model, x_ids)
    h_y, _ = net.decoder_fwd(model, h_x, np.asarray(y_ids[:-1], dtype=np.int64))
    return net.similarity_from_states(h_x, h_y)
