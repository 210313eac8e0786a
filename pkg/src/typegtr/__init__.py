"""Generate-then-rank type inference for Python functions.

A small encoder-decoder model proposes candidate types for a ``<TYPE>``
placeholder with beam search; the candidates, pooled with user-defined
types visible through import analysis, are ranked by generative
likelihood plus contextual similarity from a contrastively trained
similarity model.
"""

from .evaluation import EvalInstance, MetricsReport, ablate, evaluate, summarize_dataset
from .imports import ProjectIndex, VisibleTypeSet, index_project, visible_types
from .inference import (
    Candidate,
    RankedPrediction,
    build_pool,
    generate_candidates,
    infer,
    rank,
    score_candidate,
)
from .net import ModelDims, SeqModel, infonce_loss, init_params
from .decoding import BeamHypothesis, beam_generate, likelihood, similarity
from .source import (
    PythonFunction,
    TrainingPair,
    TypeMissedFunction,
    TypeSlot,
    enumerate_slots,
    extract_functions,
    insert_placeholder,
    mask_annotations,
)
from .training import (
    ContrastiveInstance,
    Hyperparams,
    build_contrastive_dataset,
    build_generation_dataset,
    train_contrastive,
    train_generative,
)
from .typelang import TypeExpr, base_of, classify, is_admissible, match, parse_type

__version__ = "0.1.0"

__all__ = [
    "BeamHypothesis",
    "Candidate",
    "ContrastiveInstance",
    "EvalInstance",
    "Hyperparams",
    "MetricsReport",
    "ModelDims",
    "ProjectIndex",
    "PythonFunction",
    "RankedPrediction",
    "SeqModel",
    "TrainingPair",
    "TypeExpr",
    "TypeMissedFunction",
    "TypeSlot",
    "VisibleTypeSet",
    "ablate",
    "base_of",
    "beam_generate",
    "build_contrastive_dataset",
    "build_generation_dataset",
    "build_pool",
    "classify",
    "enumerate_slots",
    "evaluate",
    "extract_functions",
    "generate_candidates",
    "index_project",
    "infer",
    "infonce_loss",
    "init_params",
    "insert_placeholder",
    "is_admissible",
    "likelihood",
    "mask_annotations",
    "match",
    "parse_type",
    "rank",
    "score_candidate",
    "similarity",
    "summarize_dataset",
    "train_contrastive",
    "train_generative",
    "visible_types",
]
