"""Synthetic training corpus with deterministic cue-to-type structure.

Each generated function carries exactly one annotation whose value is a
pure function of a cue identifier placed in the body (the callee next to
the annotated slot), so a small model can learn the mapping.  Projects
define user-defined classes in a models module; flow files import the
classes they annotate plus a couple of distractors, which makes the
import-visibility machinery meaningful end to end.

Some classes are deliberately scarce: "rare" classes appear at most
three times and "drifter" classes exactly once, keeping their names
under any reasonable vocabulary count threshold.  Those names can never
be generated token-by-token and must be recovered through the ranking
stage, mirroring the unseen-type situation at full scale.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

N_PROJECTS = 6

REGULAR_CLASSES = [
    ["OrderLedger", "CacheProbe", "SignalBatch", "RouteTable"],
    ["TokenBucket", "MetricWindow", "ShardCursor", "QueueLease"],
    ["AuditTrail", "ConfigSnapshot", "RetryBudget", "SessionVault"],
    ["GraphFrontier", "DeltaJournal", "ProbeHarness", "LatchRegistry"],
    ["TraceBundle", "QuotaMeter", "MergePlanner", "EpochClock"],
    ["FanoutRouter", "DriftMonitor", "ReplayBuffer", "AnchorIndex"],
]

RARE_CLASSES = [
    "SpoolNexus",
    "PivotHarbor",
    "CrestLattice",
    "QuillMatrix",
    "FjordSampler",
    "GlyphTurbine",
]
RARE_USES = 3

DRIFTER_CLASSES = [
    "OnyxConduit",
    "HelixWarden",
    "IvoryGasket",
    "UmberPylon",
    "ZestCarousel",
    "NovaTrellis",
    "OpalFulcrum",
    "VerdantSluice",
    "LilacBulwark",
    "EmberPallet",
]

ELEMENTARY_CUES = [
    ("as_text", "str"),
    ("as_count", "int"),
    ("as_ratio", "float"),
    ("as_flag", "bool"),
    ("as_blob", "bytes"),
]

GENERIC_CUES = [
    ("as_name_list", "List[str]"),
    ("as_size_map", "Dict[str, int]"),
    ("as_span_pair", "Tuple[int, int]"),
    ("as_maybe_label", "Optional[str]"),
    ("as_size_list", "List[int]"),
]

_VERBS = ["scan", "merge", "fold", "drain", "stage", "route", "probe", "sync"]
_NOUNS = ["buffer", "queue", "ledger", "packet", "frame", "shard", "batch", "stream"]
FUNCTION_NAMES = [f"{v}_{n}" for v in _VERBS for n in _NOUNS]

ARG_NAMES = ["payload", "source", "raw", "item", "blob", "chunk"]
RESULT_NAMES = ["result", "value", "parsed", "outcome"]
FILLER_LOCALS = ["staged", "checked", "probe"]
FILLER_HELPERS = ["validate", "prepare", "refresh"]
FILLER_WORDS = ["empty", "stale", "missing"]

CATEGORY_WEIGHTS = {"ele": 0.35, "gen": 0.25, "usr": 0.40}
KIND_WEIGHTS = {"var": 0.5, "arg": 0.3, "ret": 0.2}


def snake_case(name: str) -> str:
    return re.sub(r"(?<!^)(?=[A-Z])", "_", name).lower()


def class_cue(name: str) -> str:
    return f"load_{snake_case(name)}"


@dataclass(frozen=True)
class FunctionSpec:
    category: str  # ele | gen | usr
    kind: str  # var | arg | ret
    gold: str
    cue: str
    project: int


@dataclass
class CorpusManifest:
    root: str
    n_functions: int
    classes_by_project: list
    rare_classes: list
    drifter_classes: list


def _plan_specs(n_functions: int, rng) -> list[FunctionSpec]:
    n_usr = int(round(CATEGORY_WEIGHTS["usr"] * n_functions))
    n_gen = int(round(CATEGORY_WEIGHTS["gen"] * n_functions))
    n_ele = n_functions - n_usr - n_gen

    pending = []

    def pick_kind():
        r = rng.random()
        if r < KIND_WEIGHTS["var"]:
            return "var"
        if r < KIND_WEIGHTS["var"] + KIND_WEIGHTS["arg"]:
            return "arg"
        return "ret"

    usr_golds = []
    for p, name in enumerate(RARE_CLASSES):
        usr_golds.extend([(name, p)] * RARE_USES)
    for i, name in enumerate(DRIFTER_CLASSES):
        usr_golds.append((name, i % N_PROJECTS))
    regular = [
        (name, p) for p in range(N_PROJECTS) for name in REGULAR_CLASSES[p]
    ]
    i = 0
    while len(usr_golds) < n_usr:
        usr_golds.append(regular[i % len(regular)])
        i += 1
    usr_golds = usr_golds[:n_usr]
    for name, project in usr_golds:
        pending.append(FunctionSpec("usr", pick_kind(), name, class_cue(name), project))

    for j in range(n_gen):
        cue, gold = GENERIC_CUES[j % len(GENERIC_CUES)]
        pending.append(FunctionSpec("gen", pick_kind(), gold, cue, int(rng.integers(N_PROJECTS))))
    for j in range(n_ele):
        cue, gold = ELEMENTARY_CUES[j % len(ELEMENTARY_CUES)]
        pending.append(FunctionSpec("ele", pick_kind(), gold, cue, int(rng.integers(N_PROJECTS))))

    order = rng.permutation(len(pending))
    return [pending[k] for k in order]


def _filler(rng, arg: str) -> str:
    roll = rng.random()
    if roll < 0.4:
        return ""
    if roll < 0.7:
        word = FILLER_WORDS[int(rng.integers(len(FILLER_WORDS)))]
        return f'    if not {arg}:\n        raise ValueError("{word}")\n'
    local = FILLER_LOCALS[int(rng.integers(len(FILLER_LOCALS)))]
    helper = FILLER_HELPERS[int(rng.integers(len(FILLER_HELPERS)))]
    return f"    {local} = {helper}({arg})\n"


def _function_text(spec: FunctionSpec, fname: str, rng) -> str:
    arg = ARG_NAMES[int(rng.integers(len(ARG_NAMES)))]
    res = RESULT_NAMES[int(rng.integers(len(RESULT_NAMES)))]
    filler = _filler(rng, arg)
    if spec.kind == "var":
        return (
            f"def {fname}({arg}):\n"
            f"{filler}"
            f"    {res}: {spec.gold} = {spec.cue}({arg})\n"
            f"    return {res}\n"
        )
    if spec.kind == "arg":
        return (
            f"def {fname}({arg}: {spec.gold}):\n"
            f"{filler}"
            f"    {res} = {spec.cue}({arg})\n"
            f"    return {res}\n"
        )
    return (
        f"def {fname}({arg}) -> {spec.gold}:\n"
        f"{filler}"
        f"    return {spec.cue}({arg})\n"
    )


def _models_source(project: int) -> str:
    classes = list(REGULAR_CLASSES[project]) + [RARE_CLASSES[project]]
    classes += [
        name
        for i, name in enumerate(DRIFTER_CLASSES)
        if i % N_PROJECTS == project
    ]
    blocks = []
    for name in classes:
        blocks.append(
            f"class {name}:\n"
            f"    def __init__(self, payload):\n"
            f"        self.payload = payload\n"
        )
    return "\n\n".join(blocks) + "\n"


def generate_corpus(
    root,
    n_functions: int = 2000,
    seed: int = 0,
    funcs_per_file: int = 25,
) -> CorpusManifest:
    """Write a synthetic multi-project corpus under ``root``.

    Deterministic for a given (n_functions, seed).
    """
    root = Path(root)
    rng = np.random.Generator(np.random.PCG64(seed))
    specs = _plan_specs(n_functions, rng)

    # Distribute specs to per-project files in planning order.
    per_project: list[list[FunctionSpec]] = [[] for _ in range(N_PROJECTS)]
    for spec in specs:
        per_project[spec.project].append(spec)

    manifest = CorpusManifest(
        root=str(root),
        n_functions=n_functions,
        classes_by_project=[list(c) for c in REGULAR_CLASSES],
        rare_classes=list(RARE_CLASSES),
        drifter_classes=list(DRIFTER_CLASSES),
    )

    for project, project_specs in enumerate(per_project):
        pkg = root / f"app{project}"
        pkg.mkdir(parents=True, exist_ok=True)
        (pkg / "__init__.py").write_text("", encoding="utf-8")
        (pkg / "models.py").write_text(_models_source(project), encoding="utf-8")

        project_classes = list(REGULAR_CLASSES[project])
        files = [
            project_specs[i:i + funcs_per_file]
            for i in range(0, len(project_specs), funcs_per_file)
        ]
        for file_idx, file_specs in enumerate(files):
            names = list(FUNCTION_NAMES)
            order = rng.permutation(len(names))
            used_classes = sorted(
                {s.gold for s in file_specs if s.category == "usr"}
            )
            distractors = [c for c in project_classes if c not in used_classes]
            d_order = rng.permutation(len(distractors))
            imported = sorted(used_classes + [distractors[i] for i in d_order[:2]])

            chunks = []
            if imported:
                chunks.append(
                    f"from app{project}.models import " + ", ".join(imported) + "\n"
                )
            for i, spec in enumerate(file_specs):
                fname = names[order[i % len(names)]]
                if i >= len(names):
                    fname = f"{fname}_{i // len(names)}"
                chunks.append(_function_text(spec, fname, rng))
            (pkg / f"flow{file_idx}.py").write_text(
                "\n".join(chunks), encoding="utf-8"
            )
    return manifest
