"""Dataset construction and the two training procedures.

The generation model trains with teacher-forced cross entropy on masked
annotations; the similarity model trains with a contrastive objective
whose negatives mix beam-generated candidates with import-visible
user-defined types.  Both loops use Adam and are bitwise reproducible
for a fixed seed: shuffling, sampling, and updates all run off a single
seeded generator in a fixed order.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import imports as imports_mod
from . import net, typelang
from .decoding import DEFAULT_MAX_TYPE_LEN
from .inference import generate_candidates
from .net import SeqModel
from .source import (
    PythonFunction,
    TrainingPair,
    TypeMissedFunction,
    TypeSlot,
    mask_annotations,
)
from .vocab import tokenize

log = logging.getLogger(__name__)

ORIGIN_GENERATED = "generated"
ORIGIN_VISIBLE = "visible"

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class NonFiniteLoss(RuntimeError):
    """Training aborted because a loss went NaN or infinite."""


class EmptyCandidateUniverse(ValueError):
    """No negative candidates exist from either source."""


@dataclass(frozen=True)
class Hyperparams:
    epochs: int = 3
    learning_rate: float = 1e-5
    batch_size: int = 8
    beam_k: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.learning_rate <= 0:
            raise ValueError("epochs must be >= 0 and learning_rate positive")
        if self.batch_size < 1 or self.beam_k < 1:
            raise ValueError("batch_size and beam_k must be positive")


@dataclass(frozen=True)
class ContrastiveInstance:
    """Anchor function, its gold type, and sampled negative types."""

    anchor: TypeMissedFunction
    positive: str
    negatives: tuple
    negative_origins: tuple


@dataclass(frozen=True)
class DatasetInstance:
    """One serialized dataset row: a pair plus its file's visible types."""

    uid: str
    pair: TrainingPair
    visible_types: tuple
    unseen: bool = False


# ---------------------------------------------------------------------------
# Dataset builders
# ---------------------------------------------------------------------------


def build_generation_dataset(corpus) -> list[TrainingPair]:
    """All masking pairs over a corpus of functions, in corpus order."""
    pairs = []
    for function in corpus:
        pairs.extend(mask_annotations(function))
    return pairs


def _visible_for_pair(index, pair: TrainingPair) -> list[str]:
    if index is None:
        return []
    try:
        return imports_mod.visible_types(index, pair.input.function.file_path).sorted_names()
    except imports_mod.FileNotIndexed:
        return []


def build_contrastive_dataset(
    pairs,
    gen: SeqModel,
    index,
    k: int,
    seed: int,
    visible_lists=None,
) -> list[ContrastiveInstance]:
    """Contrastive instances with K sampled negatives per pair.

    Source one is the trained generation model's beam candidates; source
    two is the user-defined types visible from the pair's file (resolved
    through ``index``, or supplied directly via ``visible_lists``).  The
    union minus the positive is sampled uniformly with the given seed;
    when fewer than K remain, all are kept.  Pairs whose entire universe
    equals the positive are skipped.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    instances = []
    for i, pair in enumerate(pairs):
        generated = generate_candidates(gen, pair.input, k)
        if visible_lists is not None:
            visible = list(visible_lists[i])
        else:
            visible = _visible_for_pair(index, pair)
        if not generated and not visible:
            raise EmptyCandidateUniverse(
                f"pair {i}: no generated candidates and no visible types"
            )

        positive_key = None
        parsed_pos = typelang.try_parse_type(pair.expected_type)
        if parsed_pos is not None:
            positive_key = typelang.comparison_key(parsed_pos)

        universe = []
        seen = set()
        for origin, text in [(ORIGIN_GENERATED, t) for t in generated] + [
            (ORIGIN_VISIBLE, t) for t in sorted(visible)
        ]:
            parsed = typelang.try_parse_type(text)
            if parsed is None:
                continue
            key = typelang.comparison_key(parsed)
            if key == positive_key or key in seen:
                continue
            seen.add(key)
            universe.append((origin, text))

        if not universe:
            log.warning("pair %d: candidate universe is only the positive; skipped", i)
            continue
        if len(universe) > k:
            chosen = sorted(rng.choice(len(universe), size=k, replace=False))
            universe = [universe[j] for j in chosen]
        instances.append(
            ContrastiveInstance(
                anchor=pair.input,
                positive=pair.expected_type,
                negatives=tuple(text for _, text in universe),
                negative_origins=tuple(origin for origin, _ in universe),
            )
        )
    return instances


# ---------------------------------------------------------------------------
# Adam optimizer
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    def step(self, tensors: dict, grads: dict, lr: float) -> None:
        self.t += 1
        bc1 = 1.0 - ADAM_BETA1 ** self.t
        bc2 = 1.0 - ADAM_BETA2 ** self.t
        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            m = self.m[name]
            v = self.v[name]
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * (g * g)
            tensors[name] -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)


def _check_finite(loss: float, context: str) -> None:
    if not math.isfinite(loss):
        raise NonFiniteLoss(f"{context}: loss={loss}")


def _batches(n: int, batch_size: int, rng) -> list[np.ndarray]:
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


# ---------------------------------------------------------------------------
# Training loops
# ---------------------------------------------------------------------------


def train_generative(model: SeqModel, pairs, hyper: Hyperparams) -> SeqModel:
    """Fine-tune on masked-annotation pairs; returns updated parameters."""
    model = model.copy()
    if hyper.epochs == 0 or not pairs:
        return model
    encoded = [
        (
            tokenize(p.input.function.source_text, model.vocab, model.dims.max_seq_len),
            tokenize(p.expected_type, model.vocab, DEFAULT_MAX_TYPE_LEN),
        )
        for p in pairs
    ]
    rng = np.random.Generator(np.random.PCG64(hyper.seed))
    adam = AdamState()
    for epoch in range(hyper.epochs):
        epoch_loss = 0.0
        for batch in _batches(len(encoded), hyper.batch_size, rng):
            grads = net.zero_grads(model)
            batch_loss = 0.0
            for idx in batch:
                x_ids, y_ids = encoded[idx]
                loss, _ = net.generation_loss_and_grads(model, x_ids, y_ids, grads)
                batch_loss += loss
            _check_finite(batch_loss, f"generative epoch {epoch}")
            scale = 1.0 / len(batch)
            for g in grads.values():
                g *= scale
            adam.step(model.tensors, grads, hyper.learning_rate)
            epoch_loss += batch_loss
        log.info(
            "generative epoch %d: mean loss %.6f", epoch, epoch_loss / len(encoded)
        )
    return model


def mean_generation_loss(model: SeqModel, pairs) -> float:
    """Mean teacher-forced loss over pairs, no updates (for curves/tests)."""
    total = 0.0
    for p in pairs:
        x_ids = tokenize(p.input.function.source_text, model.vocab, model.dims.max_seq_len)
        y_ids = tokenize(p.expected_type, model.vocab, DEFAULT_MAX_TYPE_LEN)
        h_x = net.encode(model, x_ids)
        total += -float(net.sequence_log_probs(model, h_x, y_ids).sum())
    return total / len(pairs)


def train_contrastive(model: SeqModel, instances, hyper: Hyperparams) -> SeqModel:
    """Fine-tune with InfoNCE so gold types outscore sampled negatives."""
    model = model.copy()
    if hyper.epochs == 0 or not instances:
        return model
    encoded = []
    for inst in instances:
        anchor_ids = tokenize(
            inst.anchor.function.source_text, model.vocab, model.dims.max_seq_len
        )
        pos_ids = tokenize(inst.positive, model.vocab, DEFAULT_MAX_TYPE_LEN)
        neg_ids = [tokenize(t, model.vocab, DEFAULT_MAX_TYPE_LEN) for t in inst.negatives]
        encoded.append((anchor_ids, pos_ids, neg_ids))
    rng = np.random.Generator(np.random.PCG64(hyper.seed))
    adam = AdamState()
    for epoch in range(hyper.epochs):
        epoch_loss = 0.0
        for batch in _batches(len(encoded), hyper.batch_size, rng):
            grads = net.zero_grads(model)
            batch_loss = 0.0
            for idx in batch:
                anchor_ids, pos_ids, neg_ids = encoded[idx]
                loss, _, _ = net.contrastive_loss_and_grads(
                    model, anchor_ids, pos_ids, neg_ids, grads
                )
                batch_loss += loss
            _check_finite(batch_loss, f"contrastive epoch {epoch}")
            scale = 1.0 / len(batch)
            for g in grads.values():
                g *= scale
            adam.step(model.tensors, grads, hyper.learning_rate)
            epoch_loss += batch_loss
        log.info(
            "contrastive epoch %d: mean loss %.6f", epoch, epoch_loss / len(encoded)
        )
    return model


# ---------------------------------------------------------------------------
# JSONL serialization
# ---------------------------------------------------------------------------


def instance_to_record(inst: DatasetInstance) -> dict:
    pair = inst.pair
    fn = pair.input.function
    slot = pair.input.slot
    return {
        "id": inst.uid,
        "function": fn.source_text,
        "function_name": fn.name,
        "line_span": list(fn.line_span),
        "slot": {
            "kind": slot.var_kind,
            "name": slot.var_name,
            "index": slot.occurrence_index,
        },
        "expected_type": pair.expected_type,
        "category": pair.category,
        "file_path": fn.file_path,
        "visible_types": list(inst.visible_types),
        "unseen": inst.unseen,
    }


def record_to_instance(record: dict) -> DatasetInstance:
    slot = TypeSlot(
        record["slot"]["kind"], record["slot"]["name"], record["slot"]["index"]
    )
    fn = PythonFunction(
        record["file_path"],
        record["function_name"],
        record["function"],
        tuple(record.get("line_span", (1, 1))),
    )
    pair = TrainingPair(
        TypeMissedFunction(fn, slot), record["expected_type"], record["category"]
    )
    return DatasetInstance(
        record["id"],
        pair,
        tuple(record.get("visible_types", ())),
        record.get("unseen", False),
    )


def contrastive_to_record(inst: ContrastiveInstance) -> dict:
    fn = inst.anchor.function
    slot = inst.anchor.slot
    return {
        "function": fn.source_text,
        "function_name": fn.name,
        "slot": {
            "kind": slot.var_kind,
            "name": slot.var_name,
            "index": slot.occurrence_index,
        },
        "expected_type": inst.positive,
        "file_path": fn.file_path,
        "negatives": list(inst.negatives),
        "negative_origins": list(inst.negative_origins),
    }


def dump_jsonl(records, path) -> None:
    from .checkpoint import atomic_write_text

    lines = [json.dumps(r, sort_keys=True) for r in records]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def load_jsonl(path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
