"""Top-k exact/base match metrics, category breakdowns, and ablations.

Buckets follow the usual reporting layout: overall, per type category
(elementary / generic / user-defined, with unseen user-defined types
tracked separately), and per variable category (locals, arguments,
returns).  Reference row for the public ManyTypes4Py benchmark at full
scale, kept for documentation only: 242,954 training instances, a
10,000-instance test subset, 579 of them with unseen types.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from . import typelang
from .inference import RankedPrediction, infer
from .source import VarKind
from .typelang import TypeCategory, TypeExpr

MANYTYPES4PY_TRAINING_INSTANCES = 242_954
MANYTYPES4PY_TEST_INSTANCES = 10_000
MANYTYPES4PY_TEST_UNSEEN = 579

DEFAULT_KS = (1, 3, 5)

BUCKETS = ("all", "ele", "gen", "usr", "unseen", "var", "arg", "ret")
_BUCKET_LABELS = {
    "all": "All",
    "ele": "Ele",
    "gen": "Gen",
    "usr": "Usr",
    "unseen": "Unseen",
    "var": "Var",
    "arg": "Arg",
    "ret": "Ret",
}
_CATEGORY_BUCKET = {
    TypeCategory.ELEMENTARY: "ele",
    TypeCategory.GENERIC: "gen",
    TypeCategory.USER_DEFINED: "usr",
}
_KIND_BUCKET = {VarKind.LOCAL: "var", VarKind.ARG: "arg", VarKind.RET: "ret"}


@dataclass(frozen=True)
class EvalInstance:
    """One scored prediction with its gold annotation and bucket labels."""

    uid: str
    gold: TypeExpr
    prediction: RankedPrediction
    type_category: str
    var_kind: str
    unseen: bool = False


@dataclass(frozen=True)
class MetricsReport:
    """Exact/base match ratios per k and bucket, plus bucket counts."""

    ks: tuple
    counts: dict
    em: dict
    bm: dict

    def to_json(self) -> str:
        payload = {
            "ks": list(self.ks),
            "counts": self.counts,
            "em": {str(k): self.em[k] for k in self.ks},
            "bm": {str(k): self.bm[k] for k in self.ks},
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def format_table(self) -> str:
        header = ["metric"] + [_BUCKET_LABELS[b] for b in BUCKETS]
        rows = [header]
        rows.append(["count"] + [str(self.counts[b]) for b in BUCKETS])
        for name, table in (("EM", self.em), ("BM", self.bm)):
            for k in self.ks:
                rows.append(
                    [f"{name}@{k} (%)"]
                    + [f"{100.0 * table[k][b]:.1f}" for b in BUCKETS]
                )
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        return "\n".join(
            "  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows
        )


def _buckets_of(inst: EvalInstance) -> list[str]:
    buckets = ["all", _CATEGORY_BUCKET[inst.type_category], _KIND_BUCKET[inst.var_kind]]
    if inst.unseen:
        buckets.append("unseen")
    return buckets


def _match_ranks(inst: EvalInstance) -> tuple[int | None, int | None]:
    """1-based rank of the first exact and first base match, if any."""
    em_rank = bm_rank = None
    for i, cand in enumerate(inst.prediction.candidates, start=1):
        exact, base = typelang.match(cand.type_expr, inst.gold)
        if base and bm_rank is None:
            bm_rank = i
        if exact and em_rank is None:
            em_rank = i
            break
    return em_rank, bm_rank


def evaluate(instances, ks=DEFAULT_KS) -> MetricsReport:
    """Top-k EM/BM: the fraction of instances whose first k candidates
    contain an exact (resp. base) match.  Pure fold over instances."""
    if not ks:
        raise ValueError("ks must be nonempty")
    ks = tuple(sorted(ks))
    counts = {b: 0 for b in BUCKETS}
    em_hits = {k: {b: 0 for b in BUCKETS} for k in ks}
    bm_hits = {k: {b: 0 for b in BUCKETS} for k in ks}
    for inst in instances:
        buckets = _buckets_of(inst)
        em_rank, bm_rank = _match_ranks(inst)
        for b in buckets:
            counts[b] += 1
            for k in ks:
                if em_rank is not None and em_rank <= k:
                    em_hits[k][b] += 1
                if bm_rank is not None and bm_rank <= k:
                    bm_hits[k][b] += 1
    em = {
        k: {b: (em_hits[k][b] / counts[b] if counts[b] else 0.0) for b in BUCKETS}
        for k in ks
    }
    bm = {
        k: {b: (bm_hits[k][b] / counts[b] if counts[b] else 0.0) for b in BUCKETS}
        for k in ks
    }
    return MetricsReport(ks, counts, em, bm)


def make_eval_instance(dataset_instance, prediction: RankedPrediction) -> EvalInstance:
    pair = dataset_instance.pair
    return EvalInstance(
        uid=dataset_instance.uid,
        gold=typelang.parse_type(pair.expected_type),
        prediction=prediction,
        type_category=pair.category,
        var_kind=pair.input.slot.var_kind,
        unseen=dataset_instance.unseen,
    )


def ablate(mode: str, gen, simm, instances, beam_k: int = 5, ks=DEFAULT_KS) -> MetricsReport:
    """Metrics for one pipeline mode over dataset instances.

    ``full`` is the standard two-stage pipeline; ``generating-only``
    ranks raw beam candidates by likelihood without visible types;
    ``ranking-only`` ranks only visible types by similarity.  Instances
    with an empty pool get an empty prediction and count as misses.
    """
    evals = []
    for inst in instances:
        pred = infer(gen, simm, inst.pair.input, inst.visible_types, beam_k, mode)
        evals.append(make_eval_instance(inst, pred))
    return evaluate(evals, ks)


def _item_labels(item) -> tuple[str, str, bool]:
    """(category, var_kind, unseen) for a pair, dataset row, or eval row."""
    if hasattr(item, "type_category"):
        return item.type_category, item.var_kind, item.unseen
    unseen = getattr(item, "unseen", False)
    pair = item.pair if hasattr(item, "pair") else item
    return pair.category, pair.input.slot.var_kind, unseen


def summarize_dataset(items) -> dict:
    """Distribution table: counts and percentages per type and variable
    category, plus the unseen count."""
    total = 0
    by_category = {b: 0 for b in ("ele", "gen", "usr")}
    by_kind = {b: 0 for b in ("var", "arg", "ret")}
    unseen = 0
    for item in items:
        category, kind, item_unseen = _item_labels(item)
        total += 1
        by_category[_CATEGORY_BUCKET[category]] += 1
        by_kind[_KIND_BUCKET[kind]] += 1
        if item_unseen:
            unseen += 1

    def pct(n):
        return 100.0 * n / total if total else 0.0

    return {
        "total": total,
        "by_type_category": {b: by_category[b] for b in by_category},
        "by_variable_category": {b: by_kind[b] for b in by_kind},
        "unseen": unseen,
        "percent_type_category": {b: pct(n) for b, n in by_category.items()},
        "percent_variable_category": {b: pct(n) for b, n in by_kind.items()},
    }


def format_summary(summary: dict) -> str:
    lines = [f"instances: {summary['total']}"]
    for label, counts_key, pct_key in (
        ("type categories", "by_type_category", "percent_type_category"),
        ("variable categories", "by_variable_category", "percent_variable_category"),
    ):
        parts = [
            f"{_BUCKET_LABELS[b]} {n} ({summary[pct_key][b]:.1f}%)"
            for b, n in summary[counts_key].items()
        ]
        lines.append(f"{label}: " + ", ".join(parts))
    lines.append(f"unseen gold types: {summary['unseen']}")
    return "\n".join(lines)
