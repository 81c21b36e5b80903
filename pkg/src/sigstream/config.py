"""Experiment configuration: a flat ``key = value`` text file.

One key per line, ``#`` starts a comment, unknown keys are a hard error.
Every key has a documented default, so an empty file is a valid experiment.
Derived defaults: c_size = 0 means one update per chunk (3 claims per
exploitation user), sgd_lr_t0 = 0 means ten times the initial training set
size, and svm_max_passes = 0 means ten times the training set size.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .featurestore import SplitConfig, SynthConfig
from .stream_engine import StreamEvalConfig


@dataclass
class ExperimentConfig:
    # synthetic data (used when dataset is empty)
    dim: int = 64
    writer_count: int = 24
    genuine_per_writer: int = 32
    skilled_per_writer: int = 20
    genuine_noise_sigma: float = 0.25
    skilled_offset_scale: float = 1.0
    skilled_noise_sigma: float = 0.35
    drift_velocity_sigma: float = 0.0
    synth_seed: int = 1

    # user split
    dev_user_count: int = 10
    dev_genuine_per_user: int = 12
    exploit_user_count: int = 10
    refs_per_user: int = 12
    claims_per_user: int = 20

    # classifiers
    svm_c: float = 1.0
    svm_gamma: float = 2.0 ** -11
    svm_tol: float = 1e-3
    svm_max_passes: int = 0
    sgd_reg: float = 1e-4
    sgd_lr0: float = 1e-2
    sgd_lr_t0: float = 0.0
    sgd_epochs: int = 20

    # stream evaluation
    c_size: int = 0
    w_size: int = 60
    w_step: int = 30
    run_count: int = 5
    static_sgd: bool = False
    snapshots: int = 0

    # experiment plumbing
    dataset: str = ""
    output_dir: str = "out"
    master_seed: int = 42

    def validate(self) -> None:
        self.synth_config().validate()
        self.split_config(seed=0).validate()
        if self.svm_c <= 0 or self.svm_gamma <= 0 or self.svm_tol <= 0:
            raise ConfigError("svm_c, svm_gamma and svm_tol must be positive")
        if self.svm_max_passes < 0:
            raise ConfigError("svm_max_passes must be >= 0 (0 means 10x training size)")
        if self.sgd_reg <= 0 or self.sgd_lr0 <= 0:
            raise ConfigError("sgd_reg and sgd_lr0 must be positive")
        if self.sgd_lr_t0 < 0:
            raise ConfigError("sgd_lr_t0 must be >= 0 (0 means 10x training size)")
        if self.sgd_epochs < 0:
            raise ConfigError("sgd_epochs must be >= 0")
        if self.run_count < 1:
            raise ConfigError("run_count must be >= 1")
        if self.snapshots < 0:
            raise ConfigError("snapshots must be >= 0")
        self.stream_config(seed=0).validate()

    def synth_config(self) -> SynthConfig:
        return SynthConfig(
            writer_count=self.writer_count,
            genuine_per_writer=self.genuine_per_writer,
            skilled_per_writer=self.skilled_per_writer,
            dim=self.dim,
            genuine_noise_sigma=self.genuine_noise_sigma,
            skilled_offset_scale=self.skilled_offset_scale,
            skilled_noise_sigma=self.skilled_noise_sigma,
            drift_velocity_sigma=self.drift_velocity_sigma,
            seed=self.synth_seed,
        )

    def split_config(self, seed: int) -> SplitConfig:
        return SplitConfig(
            dev_user_count=self.dev_user_count,
            dev_genuine_per_user=self.dev_genuine_per_user,
            exploit_user_count=self.exploit_user_count,
            refs_per_user=self.refs_per_user,
            claims_per_user=self.claims_per_user,
            seed=seed,
        )

    def effective_c_size(self) -> int:
        return self.c_size if self.c_size > 0 else 3 * self.exploit_user_count

    def stream_config(self, seed: int) -> StreamEvalConfig:
        return StreamEvalConfig(
            c_size=self.effective_c_size(),
            w_size=self.w_size,
            w_step=self.w_step,
            run_count=self.run_count,
            seed=seed,
        )


_BOOL_VALUES = {"true": True, "false": False, "1": True, "0": False,
                "yes": True, "no": False}


def _parse_value(raw: str, target_type: type, key: str):
    raw = raw.strip()
    if target_type is bool:
        if raw.lower() not in _BOOL_VALUES:
            raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
        return _BOOL_VALUES[raw.lower()]
    if target_type is int:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if target_type is float:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    return raw


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Parse a config file onto the defaults; None yields pure defaults."""
    cfg = ExperimentConfig()
    if path is None:
        cfg.validate()
        return cfg
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    type_map = {"int": int, "float": float, "str": str, "bool": bool}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in types:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        target = type_map[types[key]] if isinstance(types[key], str) else types[key]
        setattr(cfg, key, _parse_value(raw, target, key))
    cfg.validate()
    return cfg
