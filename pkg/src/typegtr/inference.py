"""Two-stage generate-then-rank inference.

Stage one generates candidate types with beam search.  Stage two builds
a pool from the admissible generated candidates plus every visible
user-defined type, scores each pool member by generative likelihood plus
contextual similarity, and ranks the pool by score.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from . import typelang
from .decoding import DEFAULT_MAX_TYPE_LEN, beam_generate, likelihood, similarity
from .net import SeqModel
from .source import TypeSlot
from .typelang import TypeExpr
from .vocab import detokenize, tokenize

log = logging.getLogger(__name__)

ORIGIN_GENERATED = "generated"
ORIGIN_VISIBLE = "visible"

MODE_FULL = "full"
MODE_GENERATING_ONLY = "generating-only"
MODE_RANKING_ONLY = "ranking-only"

MODES = (MODE_FULL, MODE_GENERATING_ONLY, MODE_RANKING_ONLY)


class EmptyPool(ValueError):
    """No candidate survived pool construction."""


@dataclass(frozen=True)
class Candidate:
    """A pool member with its two score components.

    ``score`` is exactly ``lik + sim`` of the stored values.
    """

    type_expr: TypeExpr
    origin: str
    lik: float
    sim: float

    @property
    def score(self) -> float:
        return self.lik + self.sim

    @property
    def text(self) -> str:
        return typelang.render(self.type_expr)


@dataclass(frozen=True)
class RankedPrediction:
    """Candidates for one slot, sorted by score descending."""

    slot: TypeSlot
    candidates: tuple

    def top(self, k: int) -> tuple:
        return self.candidates[:k]


def generate_candidates(gen: SeqModel, func, k: int) -> list[str]:
    """Detokenized beam outputs in rank order.

    Outputs that fail to parse as type expressions are dropped with a
    diagnostic; duplicates (after normalization) keep their first, most
    likely occurrence.  Returned texts are canonically rendered.
    """
    text = func.function.source_text if hasattr(func, "function") else func
    x_ids = tokenize(text, gen.vocab, gen.dims.max_seq_len)
    seen = set()
    texts = []
    for hyp in beam_generate(gen, x_ids, k, DEFAULT_MAX_TYPE_LEN):
        raw = detokenize(hyp.ids, gen.vocab).strip()
        parsed = typelang.try_parse_type(raw)
        if parsed is None:
            log.debug("dropping unparseable beam output %r", raw)
            continue
        key = typelang.comparison_key(parsed)
        if key in seen:
            continue
        seen.add(key)
        texts.append(typelang.render(parsed))
    return texts


def _visible_names(visible) -> list[str]:
    if hasattr(visible, "sorted_names"):
        return visible.sorted_names()
    return sorted(visible)


def build_pool(generated, visible) -> list[tuple[TypeExpr, str]]:
    """Candidate pool: admissible generated types plus all visible types.

    A generated candidate stays only if its base is a builtin or it is
    found among the visible user-defined types.  Visible types are never
    filtered.  Deduplication is by normalized text; a candidate that is
    both generated and visible keeps the generated origin.
    """
    names = _visible_names(visible)
    pool = []
    seen = set()
    for text in generated:
        parsed = typelang.try_parse_type(text)
        if parsed is None:
            log.debug("dropping unparseable candidate %r", text)
            continue
        if not typelang.is_admissible(parsed, names):
            continue
        key = typelang.comparison_key(parsed)
        if key not in seen:
            seen.add(key)
            pool.append((parsed, ORIGIN_GENERATED))
    for name in names:
        parsed = typelang.try_parse_type(name)
        if parsed is None:
            continue
        key = typelang.comparison_key(parsed)
        if key not in seen:
            seen.add(key)
            pool.append((parsed, ORIGIN_VISIBLE))
    if not pool:
        raise EmptyPool("no admissible generated candidates and no visible types")
    return pool


def score_candidate(
    gen: SeqModel,
    simm: SeqModel,
    func,
    cand: TypeExpr,
    origin: str = ORIGIN_GENERATED,
    use_lik: bool = True,
    use_sim: bool = True,
) -> Candidate:
    """Score one candidate: likelihood from the generation model plus
    similarity from the similarity model.

    Visible-origin candidates also get a (teacher-forced) likelihood.
    Disabled terms are stored as 0.0 so ``score`` stays ``lik + sim``.
    """
    text = typelang.render(cand)
    lik = likelihood(gen, func, text) if use_lik else 0.0
    sim = similarity(simm, func, text) if use_sim else 0.0
    return Candidate(cand, origin, lik, sim)


def rank(
    gen: SeqModel,
    simm: SeqModel,
    func,
    pool,
    use_lik: bool = True,
    use_sim: bool = True,
) -> RankedPrediction:
    """Score and sort a pool; output is a permutation of the pool.

    Ties break by likelihood descending, then canonical text ascending,
    so rankings are deterministic.
    """
    slot = func.slot if hasattr(func, "slot") else TypeSlot("ret")
    scored = [
        score_candidate(gen, simm, func, cand, origin, use_lik, use_sim)
        for cand, origin in pool
    ]
    scored.sort(key=lambda c: (-c.score, -c.lik, c.text))
    return RankedPrediction(slot, tuple(scored))


def infer(
    gen: SeqModel,
    simm: SeqModel,
    func,
    visible,
    beam_k: int,
    mode: str = MODE_FULL,
) -> RankedPrediction:
    """Run one slot through the selected pipeline mode.

    An empty pool (nothing generated parses and nothing is visible)
    yields an empty prediction rather than an error, so corpus-level
    runs never abort; empty predictions count as misses downstream.
    """
    slot = func.slot if hasattr(func, "slot") else TypeSlot("ret")
    if mode == MODE_FULL:
        generated = generate_candidates(gen, func, beam_k)
        try:
            pool = build_pool(generated, visible)
        except EmptyPool:
            return RankedPrediction(slot, ())
        return rank(gen, simm, func, pool)
    if mode == MODE_GENERATING_ONLY:
        generated = generate_candidates(gen, func, beam_k)
        pool = []
        seen = set()
        for text in generated:
            parsed = typelang.parse_type(text)
            key = typelang.comparison_key(parsed)
            if key not in seen:
                seen.add(key)
                pool.append((parsed, ORIGIN_GENERATED))
        if not pool:
            return RankedPrediction(slot, ())
        return rank(gen, simm, func, pool, use_sim=False)
    if mode == MODE_RANKING_ONLY:
        pool = []
        for name in _visible_names(visible):
            parsed = typelang.try_parse_type(name)
            if parsed is not None:
                pool.append((parsed, ORIGIN_VISIBLE))
        if not pool:
            return RankedPrediction(slot, ())
        return rank(gen, simm, func, pool, use_lik=False)
    raise ValueError(f"unknown inference mode {mode!r}")


def prediction_to_record(uid: str, file_path: str, pred: RankedPrediction) -> dict:
    return {
        "id": uid,
        "file_path": file_path,
        "slot": {
            "kind": pred.slot.var_kind,
            "name": pred.slot.var_name,
            "index": pred.slot.occurrence_index,
        },
        "ranked": [
            {
                "type": c.text,
                "score": c.score,
                "lik": c.lik,
                "sim": c.sim,
                "origin": c.origin,
            }
            for c in pred.candidates
        ],
    }


def record_to_prediction(record: dict) -> RankedPrediction:
    slot = TypeSlot(
        record["slot"]["kind"], record["slot"]["name"], record["slot"]["index"]
    )
    candidates = tuple(
        Candidate(typelang.parse_type(r["type"]), r["origin"], r["lik"], r["sim"])
        for r in record["ranked"]
    )
    return RankedPrediction(slot, candidates)
