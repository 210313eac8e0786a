"""End-to-end pipeline steps shared by the CLI commands.

Every step reads and writes declared artifacts under the configured
working directory, atomically, so interrupted runs never leave partial
checkpoints or datasets behind:

    index.json                     project import/type index
    dataset/{train,test}.jsonl     masked-annotation instances
    dataset/diagnostics.jsonl      skipped files and functions
    dataset/summary.{txt,json}     corpus distribution tables
    checkpoints/{gen,sim}.ckpt     model checkpoints
    contrastive.jsonl              sampled negatives per anchor
    predictions-<mode>.jsonl       ranked candidates per test instance
    report-<mode>.{txt,json}       metrics reports
    config.txt                     resolved configuration
"""

from __future__ import annotations

import dataclasses
import json
import logging
from pathlib import Path

import numpy as np

from . import evaluation, imports, inference, net, synthetic, training, typelang
from .checkpoint import atomic_write_text, load_model, save_model
from .config import RunConfig
from .source import extract_functions
from .training import DatasetInstance, dump_jsonl, load_jsonl
from .vocab import build_vocab

log = logging.getLogger(__name__)


class MissingPrerequisite(FileNotFoundError):
    """A required input artifact for this command does not exist."""


def _require(path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise MissingPrerequisite(f"{what} not found: {path}")
    return path


def _dataset_dir(cfg: RunConfig) -> Path:
    return Path(cfg.workdir) / "dataset"


def _gen_ckpt(cfg: RunConfig) -> Path:
    return Path(cfg.checkpoints_dir) / "gen.ckpt"


def _sim_ckpt(cfg: RunConfig) -> Path:
    return Path(cfg.checkpoints_dir) / "sim.ckpt"


# ---------------------------------------------------------------------------
# Corpus loading and dataset building
# ---------------------------------------------------------------------------


def load_corpus(corpus_path):
    """Load a corpus from a directory tree or a JSONL file.

    JSONL records look like {"repo": ..., "file_path": ..., "source": ...};
    the repo name, when present, prefixes the file path.
    Returns (functions, diagnostics, index).
    """
    corpus_path = Path(corpus_path)
    if corpus_path.is_file():
        sources = []
        for record in load_jsonl(corpus_path):
            rel = record["file_path"]
            if record.get("repo"):
                rel = f"{record['repo']}/{rel}"
            sources.append((rel, record["source"]))
    else:
        sources = list(imports.walk_python_files(corpus_path))

    index = imports.index_sources(sources, root=str(corpus_path))
    functions = []
    diagnostics = list(index.diagnostics)
    for rel, text in sources:
        if text is None:
            continue
        funcs, diags = extract_functions(text, rel)
        functions.extend(funcs)
        diagnostics.extend(diags)
    return functions, diagnostics, index


def build_dataset_instances(functions, index, test_fraction: float, seed: int):
    """Mask annotations, attach visible types, split, and flag unseen golds."""
    pairs = training.build_generation_dataset(functions)
    instances = []
    for n, pair in enumerate(pairs):
        file_path = pair.input.function.file_path
        try:
            visible = imports.visible_types(index, file_path).sorted_names()
        except imports.FileNotIndexed:
            visible = []
        instances.append(DatasetInstance(f"i{n:06d}", pair, tuple(visible)))

    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(len(instances))
    n_test = int(round(test_fraction * len(instances)))
    test_ids = set(order[:n_test].tolist())
    train = [inst for i, inst in enumerate(instances) if i not in test_ids]
    test = [inst for i, inst in enumerate(instances) if i in test_ids]

    train_golds = {
        typelang.normalized_text(parsed)
        for inst in train
        if (parsed := typelang.try_parse_type(inst.pair.expected_type)) is not None
    }
    flagged = []
    for inst in test:
        unseen = False
        if inst.pair.category == typelang.TypeCategory.USER_DEFINED:
            parsed = typelang.try_parse_type(inst.pair.expected_type)
            unseen = parsed is not None and typelang.normalized_text(parsed) not in train_golds
        flagged.append(
            DatasetInstance(inst.uid, inst.pair, inst.visible_types, unseen)
        )
    return train, flagged


def run_build_dataset(cfg: RunConfig) -> None:
    corpus_root = _require(cfg.corpus_root, "corpus")
    functions, diagnostics, index = load_corpus(corpus_root)
    log.info("corpus: %d functions, %d diagnostics", len(functions), len(diagnostics))

    train, test = build_dataset_instances(functions, index, cfg.test_fraction, cfg.seed)
    out = _dataset_dir(cfg)
    dump_jsonl([training.instance_to_record(i) for i in train], out / "train.jsonl")
    dump_jsonl([training.instance_to_record(i) for i in test], out / "test.jsonl")
    dump_jsonl(
        [{"file_path": d.file_path, "error": d.error} for d in diagnostics],
        out / "diagnostics.jsonl",
    )
    atomic_write_text(Path(cfg.workdir) / "index.json", index.to_json())

    summary = {
        "train": evaluation.summarize_dataset(train),
        "test": evaluation.summarize_dataset(test),
    }
    atomic_write_text(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True))
    text = "\n\n".join(
        f"[{split}]\n" + evaluation.format_summary(summary[split])
        for split in ("train", "test")
    )
    atomic_write_text(out / "summary.txt", text + "\n")
    atomic_write_text(Path(cfg.workdir) / "config.txt", cfg.resolved_text())
    log.info("dataset: %d train / %d test instances", len(train), len(test))


def _load_instances(path) -> list[DatasetInstance]:
    return [training.record_to_instance(r) for r in load_jsonl(path)]


# ---------------------------------------------------------------------------
# Training steps
# ---------------------------------------------------------------------------


def run_train_gen(cfg: RunConfig) -> None:
    train_path = _require(_dataset_dir(cfg) / "train.jsonl", "training dataset")
    instances = _load_instances(train_path)
    pairs = [inst.pair for inst in instances]
    texts = [p.input.function.source_text for p in pairs] + [p.expected_type for p in pairs]
    vocab = build_vocab(texts, min_count=cfg.vocab_min_count)
    log.info("vocabulary: %d tokens", len(vocab))

    model = net.init_params(vocab, cfg.dims(), cfg.seed)
    trained = training.train_generative(model, pairs, cfg.gen_hyperparams())
    save_model(trained, _gen_ckpt(cfg))
    log.info("generation checkpoint: %s", _gen_ckpt(cfg))


def _select_anchors(instances, limit: int, seed: int):
    if limit <= 0 or limit >= len(instances):
        return instances
    rng = np.random.Generator(np.random.PCG64(seed))
    chosen = sorted(rng.choice(len(instances), size=limit, replace=False).tolist())
    return [instances[i] for i in chosen]


def run_train_sim(cfg: RunConfig) -> None:
    gen_path = _require(_gen_ckpt(cfg), "generation checkpoint")
    train_path = _require(_dataset_dir(cfg) / "train.jsonl", "training dataset")
    gen = load_model(gen_path)
    instances = _select_anchors(
        _load_instances(train_path), cfg.sim_anchors, cfg.seed + 2
    )
    contrastive = training.build_contrastive_dataset(
        [inst.pair for inst in instances],
        gen,
        None,
        k=cfg.beam_k,
        seed=cfg.seed + 3,
        visible_lists=[inst.visible_types for inst in instances],
    )
    dump_jsonl(
        [training.contrastive_to_record(c) for c in contrastive],
        Path(cfg.workdir) / "contrastive.jsonl",
    )
    log.info("contrastive dataset: %d instances", len(contrastive))

    sim = training.train_contrastive(gen.copy(), contrastive, cfg.sim_hyperparams())
    save_model(sim, _sim_ckpt(cfg))
    log.info("similarity checkpoint: %s", _sim_ckpt(cfg))


# ---------------------------------------------------------------------------
# Inference and evaluation steps
# ---------------------------------------------------------------------------


def _load_models(cfg: RunConfig):
    gen = load_model(_require(_gen_ckpt(cfg), "generation checkpoint"))
    simm = load_model(_require(_sim_ckpt(cfg), "similarity checkpoint"))
    return gen, simm


def run_infer(cfg: RunConfig, mode: str | None = None) -> None:
    mode = mode or cfg.mode
    gen, simm = _load_models(cfg)
    test = _load_instances(_require(_dataset_dir(cfg) / "test.jsonl", "test dataset"))
    records = []
    for inst in test:
        pred = inference.infer(
            gen, simm, inst.pair.input, inst.visible_types, cfg.beam_k, mode
        )
        records.append(
            inference.prediction_to_record(inst.uid, inst.pair.input.function.file_path, pred)
        )
    dump_jsonl(records, Path(cfg.workdir) / f"predictions-{mode}.jsonl")
    log.info("predictions (%s): %d instances", mode, len(records))


def run_eval(cfg: RunConfig, mode: str | None = None) -> evaluation.MetricsReport:
    mode = mode or cfg.mode
    test = _load_instances(_require(_dataset_dir(cfg) / "test.jsonl", "test dataset"))
    pred_path = _require(
        Path(cfg.workdir) / f"predictions-{mode}.jsonl", f"predictions for mode {mode}"
    )
    by_id = {r["id"]: inference.record_to_prediction(r) for r in load_jsonl(pred_path)}
    evals = []
    for inst in test:
        pred = by_id.get(inst.uid, inference.RankedPrediction(inst.pair.input.slot, ()))
        evals.append(evaluation.make_eval_instance(inst, pred))
    report = evaluation.evaluate(evals, cfg.ks)
    atomic_write_text(Path(cfg.workdir) / f"report-{mode}.json", report.to_json() + "\n")
    atomic_write_text(
        Path(cfg.workdir) / f"report-{mode}.txt", report.format_table() + "\n"
    )
    return report


def run_ablate(cfg: RunConfig) -> dict:
    """Run and evaluate all three pipeline modes on the test split."""
    reports = {}
    for mode in inference.MODES:
        run_infer(cfg, mode)
        reports[mode] = run_eval(cfg, mode)
    return reports


def run_demo(cfg: RunConfig) -> evaluation.MetricsReport:
    """Full synthetic pipeline: corpus, dataset, both models, inference,
    and the final report on held-out instances."""
    corpus_root = Path(cfg.workdir) / "corpus"
    synthetic.generate_corpus(corpus_root, cfg.demo_functions, cfg.seed)
    cfg = dataclasses.replace(cfg, corpus_root=str(corpus_root))
    run_build_dataset(cfg)
    run_train_gen(cfg)
    run_train_sim(cfg)
    run_infer(cfg, "full")
    return run_eval(cfg, "full")
