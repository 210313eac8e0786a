"""Run configuration: plain ``key = value`` sections, env and flag overrides.

Precedence for the seed: ``--seed`` flag, then the ``TIGER_SEED``
environment variable, then the config file, then the default.  Other
flags simply win over their config-file equivalents.
"""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, replace
from pathlib import Path

from .net import ModelDims
from .training import Hyperparams

SEED_ENV_VAR = "TIGER_SEED"


class ConfigError(ValueError):
    """Unparseable configuration file or value."""


@dataclass(frozen=True)
class RunConfig:
    """Resolved run settings.

    Defaults are the desk-scale values used by the synthetic demo; they
    deliberately override the full-scale fine-tuning defaults carried by
    :class:`~typegtr.training.Hyperparams` (training a model from
    scratch on a small corpus needs a larger learning rate), and the
    resolved config written next to run outputs documents that.
    """

    # paths
    corpus_root: str = "corpus"
    workdir: str = "work"
    checkpoints: str = ""  # empty -> <workdir>/checkpoints
    # model
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 128
    max_seq_len: int = 256
    vocab_min_count: int = 4
    # training
    epochs: int = 3
    lr: float = 1e-3
    batch: int = 8
    seed: int = 0
    sim_epochs: int = 8
    sim_lr: float = 1.5e-3
    sim_anchors: int = 0  # 0 -> use every training pair as an anchor
    # inference / evaluation
    beam_k: int = 5
    ks: tuple = (1, 3, 5)
    mode: str = "full"
    # dataset
    test_fraction: float = 0.15
    # demo
    demo_functions: int = 2000

    @property
    def checkpoints_dir(self) -> str:
        return self.checkpoints or str(Path(self.workdir) / "checkpoints")

    def dims(self) -> ModelDims:
        return ModelDims(
            d_model=self.d_model,
            n_layers=self.n_layers,
            n_heads=self.n_heads,
            d_ff=self.d_ff,
            max_seq_len=self.max_seq_len,
        )

    def gen_hyperparams(self) -> Hyperparams:
        return Hyperparams(
            epochs=self.epochs,
            learning_rate=self.lr,
            batch_size=self.batch,
            beam_k=self.beam_k,
            seed=self.seed,
        )

    def sim_hyperparams(self) -> Hyperparams:
        return Hyperparams(
            epochs=self.sim_epochs if self.sim_epochs >= 0 else self.epochs,
            learning_rate=self.sim_lr if self.sim_lr > 0 else self.lr,
            batch_size=self.batch,
            beam_k=self.beam_k,
            seed=self.seed + 1,
        )

    def resolved_text(self) -> str:
        """Canonical dump of every setting, written next to run outputs."""
        lines = ["[paths]"]
        lines.append(f"corpus_root = {self.corpus_root}")
        lines.append(f"workdir = {self.workdir}")
        lines.append(f"checkpoints = {self.checkpoints_dir}")
        lines.append("")
        lines.append("[model]")
        for key in ("d_model", "n_layers", "n_heads", "d_ff", "max_seq_len", "vocab_min_count"):
            lines.append(f"{key} = {getattr(self, key)}")
        lines.append("")
        lines.append("[train]")
        lines.append(f"epochs = {self.epochs}")
        lines.append(f"lr = {self.lr}")
        lines.append(f"batch = {self.batch}")
        lines.append(f"seed = {self.seed}")
        lines.append("")
        lines.append("[sim]")
        lines.append(f"epochs = {self.sim_epochs if self.sim_epochs >= 0 else self.epochs}")
        lines.append(f"lr = {self.sim_lr if self.sim_lr > 0 else self.lr}")
        lines.append(f"anchors = {self.sim_anchors}")
        lines.append("")
        lines.append("[infer]")
        lines.append(f"beam_k = {self.beam_k}")
        lines.append(f"ks = {','.join(str(k) for k in self.ks)}")
        lines.append(f"mode = {self.mode}")
        lines.append("")
        lines.append("[dataset]")
        lines.append(f"test_fraction = {self.test_fraction}")
        lines.append("")
        lines.append("[demo]")
        lines.append(f"functions = {self.demo_functions}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.resolved_text().encode("utf-8")).hexdigest()[:16]


_FIELD_MAP = {
    ("paths", "corpus_root"): ("corpus_root", str),
    ("paths", "workdir"): ("workdir", str),
    ("paths", "checkpoints"): ("checkpoints", str),
    ("model", "d_model"): ("d_model", int),
    ("model", "n_layers"): ("n_layers", int),
    ("model", "n_heads"): ("n_heads", int),
    ("model", "d_ff"): ("d_ff", int),
    ("model", "max_seq_len"): ("max_seq_len", int),
    ("model", "vocab_min_count"): ("vocab_min_count", int),
    ("train", "epochs"): ("epochs", int),
    ("train", "lr"): ("lr", float),
    ("train", "batch"): ("batch", int),
    ("train", "seed"): ("seed", int),
    ("sim", "epochs"): ("sim_epochs", int),
    ("sim", "lr"): ("sim_lr", float),
    ("sim", "anchors"): ("sim_anchors", int),
    ("infer", "beam_k"): ("beam_k", int),
    ("infer", "mode"): ("mode", str),
    ("dataset", "test_fraction"): ("test_fraction", float),
    ("demo", "functions"): ("demo_functions", int),
}


def _parse_ks(raw: str) -> tuple:
    try:
        ks = tuple(sorted(int(part) for part in raw.replace(" ", "").split(",") if part))
    except ValueError as exc:
        raise ConfigError(f"bad ks value {raw!r}") from exc
    if not ks or any(k < 1 for k in ks):
        raise ConfigError(f"bad ks value {raw!r}")
    return ks


def load_config(path) -> RunConfig:
    """Parse a config file into a RunConfig; unknown keys are rejected."""
    parser = configparser.ConfigParser()
    try:
        read = parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    if not read:
        raise ConfigError(f"config file {path} not found")
    values = {}
    for section in parser.sections():
        for key, raw in parser[section].items():
            if (section, key) == ("infer", "ks"):
                values["ks"] = _parse_ks(raw)
                continue
            if (section, key) not in _FIELD_MAP:
                raise ConfigError(f"unknown config key [{section}] {key}")
            field_name, conv = _FIELD_MAP[(section, key)]
            try:
                values[field_name] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from exc
    return RunConfig(**values)


def apply_overrides(config: RunConfig, args, env=None) -> RunConfig:
    """Merge CLI flags and the seed env var onto a config (flags win)."""
    env = os.environ if env is None else env
    updates = {}
    if env.get(SEED_ENV_VAR):
        try:
            updates["seed"] = int(env[SEED_ENV_VAR])
        except ValueError as exc:
            raise ConfigError(f"bad {SEED_ENV_VAR} value {env[SEED_ENV_VAR]!r}") from exc
    for attr, field_name in (
        ("seed", "seed"),
        ("beam_k", "beam_k"),
        ("epochs", "epochs"),
        ("lr", "lr"),
        ("batch", "batch"),
        ("mode", "mode"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            updates[field_name] = value
    if updates:
        config = replace(config, **updates)
    if config.mode not in ("full", "generating-only", "ranking-only"):
        raise ConfigError(f"unknown mode {config.mode!r}")
    return config
