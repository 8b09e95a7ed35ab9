"""Run configuration: flat ``key=value`` text with ``#`` comments.

Every key is listed in :data:`SCHEMA`; unknown or repeated keys, bad values
and lines without ``=`` raise :class:`~s5lab.errors.FormatError` carrying the
1-based line number.
"""

import os
from dataclasses import dataclass, fields
from pathlib import Path

from s5lab.errors import FormatError
from s5lab.train.model import ModelConfig
from s5lab.train.optim import OptimizerConfig

SEED_ENV = "S5_SEED"


@dataclass
class RunConfig:
    # model
    depth: int = 2
    H: int = 32
    P: int = 32
    J: int = 1
    conj_sym: bool = True
    bidirectional: bool = False
    discretization: str = "zoh"
    prenorm: bool = True
    delta_min: float = 0.001
    delta_max: float = 0.1
    # optimization
    lr: float = 0.004
    ssm_lr: float = 0.001
    weight_decay: float = 0.01
    warmup: int = 0
    epochs: int = 10
    batch: int = 32
    c_in_ssm_group: bool = False
    b_in_global_group: bool = False
    seed: int = 0
    workers: int = 1
    # data: "mnist" (IDX files) or "irregular" (generated)
    dataset: str = "mnist"
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    train_limit: int = 0
    test_limit: int = 0
    classes: int = 4
    seq_len: int = 128
    train_items: int = 1000
    test_items: int = 500
    # outputs
    checkpoint: str = "model.s5ckpt"
    metrics: str = "metrics.csv"
    # directory used to resolve relative paths; not a schema key
    base_dir: str = "."

    def path(self, value):
        p = Path(value)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def model_config(self):
        classes = 10 if self.dataset == "mnist" else self.classes
        return ModelConfig(input_size=1, classes=classes, depth=self.depth, H=self.H, P=self.P,
                           J=self.J, conj_sym=self.conj_sym, bidirectional=self.bidirectional,
                           discretization=self.discretization, prenorm=self.prenorm,
                           delta_min=self.delta_min, delta_max=self.delta_max, seed=self.seed)

    def optimizer_config(self):
        return OptimizerConfig(lr=self.lr, ssm_lr=self.ssm_lr, weight_decay=self.weight_decay,
                               epochs=self.epochs, warmup=self.warmup,
                               c_in_ssm_group=self.c_in_ssm_group,
                               b_in_global_group=self.b_in_global_group)


SCHEMA = {f.name: f.type for f in fields(RunConfig) if f.name != "base_dir"}
CHOICES = {
    "discretization": ("zoh", "bilinear", "direct-discrete"),
    "dataset": ("mnist", "irregular"),
}
POSITIVE = {"depth", "H", "P", "J", "epochs", "batch", "workers", "classes", "seq_len",
            "train_items", "test_items"}


def _convert(kind, raw):
    if kind is bool:
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"expected true/false, got {raw!r}")
    return kind(raw)


def parse_config(text, base_dir="."):
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise FormatError(f"line {lineno}: expected key=value, got {body!r}", line=lineno)
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in SCHEMA:
            raise FormatError(f"line {lineno}: unknown key {key!r}", line=lineno)
        if key in values:
            raise FormatError(f"line {lineno}: key {key!r} given twice", line=lineno)
        try:
            value = _convert(SCHEMA[key], raw)
        except ValueError as exc:
            raise FormatError(f"line {lineno}: bad value for {key}: {exc}", line=lineno) from None
        if key in CHOICES and value not in CHOICES[key]:
            raise FormatError(f"line {lineno}: {key} must be one of {', '.join(CHOICES[key])}",
                              line=lineno)
        if key in POSITIVE and value < 1:
            raise FormatError(f"line {lineno}: {key} must be >= 1", line=lineno)
        values[key] = value
    return RunConfig(base_dir=str(base_dir), **values)


def load_config(path, environ=None):
    """Parse ``path``; ``S5_SEED`` in the environment overrides ``seed``."""
    path = Path(path)
    cfg = parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)
    env = os.environ if environ is None else environ
    if env.get(SEED_ENV, "").strip():
        try:
            cfg.seed = int(env[SEED_ENV])
        except ValueError:
            raise FormatError(f"{SEED_ENV} must be an integer, got {env[SEED_ENV]!r}") from None
    return cfg


def format_config(cfg):
    """Text that :func:`parse_config` reads back to ``cfg``."""
    out = []
    for key, kind in SCHEMA.items():
        v = getattr(cfg, key)
        out.append(f"{key}={str(v).lower() if kind is bool else v}")
    return "\n".join(out) + "\n"
