"""Run configuration: a YAML file, command-line overrides on top.

Relative paths resolve against the config file's directory, so a checked-in
config works from any working directory.  The config hash covers only the
parameters that shape output values (never paths, worker counts or transport
settings), which keeps output trees comparable across checkouts and machines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

import yaml

from ._util import sha256_hex
from .errors import ConfigurationError

PROVIDER_KINDS = ("mock", "remote")
YEAR_MODES = ("any", "every")
RATING_MODES = ("raw", "normalized")
STANCE_MODES = ("chain", "top_level_only")
ASSIGNMENT_MODES = ("rotation", "kmeans")


@dataclass
class RunConfig:
    posts_path: Path
    comments_path: Path
    ratings_path: Path
    triplets_path: Path
    out_dir: Path
    provider: str = "mock"
    remote_url: str | None = None
    remote_timeout: float = 30.0
    remote_retries: int = 2
    batch_size: int = 64
    max_in_flight: int = 8
    dim: int = 768
    min_words: int = 3
    min_user_comments: int = 10
    year_mode: str = "any"
    ratings_mode: str = "raw"
    ridge_lambda: float = 1e-6
    train_fraction: float = 0.9
    stance_mode: str = "chain"
    neighbor_k: int = 7
    k_min: int = 2
    k_max: int = 30
    assignment: str = "rotation"
    max_sweeps: int = 200
    high_bias_threshold: float = 0.5
    low_cred_threshold: float = 0.5
    seed: int = 0
    workers: int = 1
    strict: bool = False

    def validate(self):
        problems = []
        for name in ("posts_path", "comments_path", "ratings_path", "triplets_path"):
            value = getattr(self, name)
            if value is None:
                problems.append(f"{name.removesuffix('_path')} path is not set")
            elif not Path(value).is_file():
                problems.append(f"{name.removesuffix('_path')} file does not exist: {value}")
        if self.out_dir is None:
            problems.append("out_dir is not set")
        if self.provider not in PROVIDER_KINDS:
            problems.append(f"provider must be one of {PROVIDER_KINDS}, got {self.provider!r}")
        if self.provider == "remote" and not self.remote_url:
            problems.append("provider 'remote' needs a base URL (remote_url or ECHOSCOPE_REMOTE_URL)")
        if self.dim < 1:
            problems.append(f"dim must be positive, got {self.dim}")
        if self.min_words < 0:
            problems.append(f"min_words must be nonnegative, got {self.min_words}")
        if self.min_user_comments < 1:
            problems.append(f"min_user_comments must be positive, got {self.min_user_comments}")
        if self.year_mode not in YEAR_MODES:
            problems.append(f"year_mode must be one of {YEAR_MODES}, got {self.year_mode!r}")
        if self.ratings_mode not in RATING_MODES:
            problems.append(f"ratings_mode must be one of {RATING_MODES}, got {self.ratings_mode!r}")
        if self.ridge_lambda < 0:
            problems.append(f"ridge_lambda must be nonnegative, got {self.ridge_lambda}")
        if not 0.0 < self.train_fraction <= 1.0:
            problems.append(f"train_fraction must be in (0, 1], got {self.train_fraction}")
        if self.stance_mode not in STANCE_MODES:
            problems.append(f"stance_mode must be one of {STANCE_MODES}, got {self.stance_mode!r}")
        if self.neighbor_k < 1:
            problems.append(f"neighbor_k must be positive, got {self.neighbor_k}")
        if self.k_min < 2:
            problems.append(f"k_min must be at least 2, got {self.k_min}")
        if self.k_max < self.k_min:
            problems.append(f"k_max must be at least k_min, got {self.k_max} < {self.k_min}")
        if self.assignment not in ASSIGNMENT_MODES:
            problems.append(f"assignment must be one of {ASSIGNMENT_MODES}, got {self.assignment!r}")
        if self.max_sweeps < 1:
            problems.append(f"max_sweeps must be positive, got {self.max_sweeps}")
        if self.batch_size < 1:
            problems.append(f"batch_size must be positive, got {self.batch_size}")
        if self.max_in_flight < 1:
            problems.append(f"max_in_flight must be positive, got {self.max_in_flight}")
        if self.workers < 1:
            problems.append(f"workers must be positive, got {self.workers}")
        if problems:
            raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(problems))

    def semantic_hash(self) -> str:
        """Hash of everything that determines output values.

        Paths, worker counts and remote transport settings are excluded: they
        change where inputs come from or how fast the run goes, never what a
        given input produces.
        """
        payload = {
            "provider": self.provider,
            "dim": self.dim,
            "min_words": self.min_words,
            "min_user_comments": self.min_user_comments,
            "year_mode": self.year_mode,
            "ratings_mode": self.ratings_mode,
            "ridge_lambda": self.ridge_lambda,
            "train_fraction": self.train_fraction,
            "stance_mode": self.stance_mode,
            "neighbor_k": self.neighbor_k,
            "k_min": self.k_min,
            "k_max": self.k_max,
            "assignment": self.assignment,
            "max_sweeps": self.max_sweeps,
            "high_bias_threshold": self.high_bias_threshold,
            "low_cred_threshold": self.low_cred_threshold,
            "seed": self.seed,
        }
        return sha256_hex(json.dumps(payload, sort_keys=True))


_SECTION_KEYS = {
    "paths": {"posts", "comments", "ratings", "triplets", "out_dir"},
    "provider": {"kind", "base_url", "timeout", "retries", "batch_size", "max_in_flight"},
    "embedding": {"dim"},
    "pruning": {"min_words", "min_user_comments", "year_mode"},
    "ratings": {"mode"},
    "negation": {"ridge_lambda", "train_fraction"},
    "stance": {"mode"},
    "clustering": {"neighbor_k", "k_min", "k_max", "assignment", "max_sweeps"},
    "thresholds": {"high_bias", "low_cred"},
}
_TOP_KEYS = set(_SECTION_KEYS) | {"seed", "workers", "strict"}


def _reject_unknown(data: dict, path: Path):
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"{path}: unknown config keys: {sorted(unknown)}")
    for section, allowed in _SECTION_KEYS.items():
        block = data.get(section)
        if block is None:
            continue
        if not isinstance(block, dict):
            raise ConfigurationError(f"{path}: section {section!r} must be a mapping")
        extra = set(block) - allowed
        if extra:
            raise ConfigurationError(f"{path}: unknown keys in {section!r}: {sorted(extra)}")


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Read a YAML config and apply non-None overrides on top."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file does not exist: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: invalid YAML: {exc}")
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: config root must be a mapping")
    _reject_unknown(data, path)
    base = path.parent

    def rel(p):
        return None if p is None else (base / p).resolve() if not Path(p).is_absolute() else Path(p)

    paths = data.get("paths") or {}
    provider = data.get("provider") or {}
    embedding = data.get("embedding") or {}
    pruning = data.get("pruning") or {}
    ratings = data.get("ratings") or {}
    negation = data.get("negation") or {}
    stance = data.get("stance") or {}
    clustering = data.get("clustering") or {}
    thresholds = data.get("thresholds") or {}

    kwargs = {
        "posts_path": rel(paths.get("posts")),
        "comments_path": rel(paths.get("comments")),
        "ratings_path": rel(paths.get("ratings")),
        "triplets_path": rel(paths.get("triplets")),
        "out_dir": rel(paths.get("out_dir")),
        "provider": provider.get("kind", "mock"),
        "remote_url": provider.get("base_url"),
        "remote_timeout": float(provider.get("timeout", 30.0)),
        "remote_retries": int(provider.get("retries", 2)),
        "batch_size": int(provider.get("batch_size", 64)),
        "max_in_flight": int(provider.get("max_in_flight", 8)),
        "dim": int(embedding.get("dim", 768)),
        "min_words": int(pruning.get("min_words", 3)),
        "min_user_comments": int(pruning.get("min_user_comments", 10)),
        "year_mode": pruning.get("year_mode", "any"),
        "ratings_mode": ratings.get("mode", "raw"),
        "ridge_lambda": float(negation.get("ridge_lambda", 1e-6)),
        "train_fraction": float(negation.get("train_fraction", 0.9)),
        "stance_mode": stance.get("mode", "chain"),
        "neighbor_k": int(clustering.get("neighbor_k", 7)),
        "k_min": int(clustering.get("k_min", 2)),
        "k_max": int(clustering.get("k_max", 30)),
        "assignment": clustering.get("assignment", "rotation"),
        "max_sweeps": int(clustering.get("max_sweeps", 200)),
        "high_bias_threshold": float(thresholds.get("high_bias", 0.5)),
        "low_cred_threshold": float(thresholds.get("low_cred", 0.5)),
        "seed": int(data.get("seed", 0)),
        "workers": int(data.get("workers", 1)),
        "strict": bool(data.get("strict", False)),
    }
    cfg = RunConfig(**kwargs)
    if overrides:
        known = {f.name for f in fields(RunConfig)}
        for key, value in overrides.items():
            if key not in known:
                raise ConfigurationError(f"unknown override: {key}")
            if value is not None:
                if key.endswith(("_path", "_dir")):
                    value = Path(value).resolve()
                setattr(cfg, key, value)
    return cfg
