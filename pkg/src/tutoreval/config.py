"""Run configuration: one YAML file, validated before any work starts."""
from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from tutoreval.rubric import DIMENSIONS, LABELS


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class InputsConfig(_Strict):
    submissions: Path
    feedback: Path
    ratings: Optional[Path] = None
    problems: Optional[Path] = None


class JudgeConfig(_Strict):
    backend: Literal["fixture", "remote"] = "fixture"
    transcript: Optional[Path] = None
    url: Optional[str] = None
    model: Optional[str] = None
    # name of the environment variable holding the key; keys are never read from the file
    api_key_env: Optional[str] = None
    max_retries: int = Field(3, ge=0)
    timeout: float = Field(60.0, gt=0)
    prompt_dir: Optional[Path] = None


class ThresholdsConfig(_Strict):
    min_undesired_n: int = Field(15, ge=1)
    likert_cutoff: int = Field(4, ge=2, le=5)


class TutorProfileConfig(_Strict):
    rel_prob: float = Field(0.8, ge=0, le=1)
    succ_prob: float = Field(0.6, ge=0, le=1)
    desired_prob: float | dict[str, float] = 0.9


class SynthConfig(_Strict):
    n_students: int = 40
    n_problems: int = 3
    assignments: int = 2
    mean_attempts: float = 3.0
    abandon_prob: float = 0.1
    max_sentences: int = 4
    rating_prob: float = 0.5
    tutors: Optional[dict[str, TutorProfileConfig]] = None
    beta: Optional[dict[str, float]] = None


class RunConfig(_Strict):
    inputs: Optional[InputsConfig] = None
    judge: JudgeConfig = JudgeConfig()
    cache_dir: Optional[Path] = None
    out_dir: Path = Path("out")
    rubric: dict[str, list[int]] = {}
    baseline_tutor: str = "baseline"
    thresholds: ThresholdsConfig = ThresholdsConfig()
    parallelism: int = Field(1, ge=1)
    seed: int = Field(42, ge=0, lt=2**64)
    synth: SynthConfig = SynthConfig()

    @field_validator("rubric")
    @classmethod
    def _rubric(cls, v: dict[str, list[int]]) -> dict[str, list[int]]:
        for dim, labels in v.items():
            if dim not in DIMENSIONS:
                raise ValueError(f"unknown rubric dimension {dim!r}")
            if not labels or not set(labels) <= set(LABELS):
                raise ValueError(f"desired labels for {dim} must be a non-empty subset of {list(LABELS)}")
        return v

    @model_validator(mode="after")
    def _judge(self) -> "RunConfig":
        if self.judge.backend == "remote" and (not self.judge.url or not self.judge.model):
            raise ValueError("judge.url and judge.model are required for the remote backend")
        return self

    def resolve(self, base: Path) -> "RunConfig":
        """Make relative paths relative to the config file's directory."""

        def fix(p):
            return None if p is None else (p if p.is_absolute() else (base / p))

        data = self.model_copy(deep=True)
        if data.inputs:
            for name in ("submissions", "feedback", "ratings", "problems"):
                setattr(data.inputs, name, fix(getattr(data.inputs, name)))
        data.judge.transcript = fix(data.judge.transcript)
        data.judge.prompt_dir = fix(data.judge.prompt_dir)
        data.cache_dir = fix(data.cache_dir)
        data.out_dir = fix(data.out_dir)
        return data

    def snapshot(self) -> dict:
        return self.model_dump(mode="json")


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig().resolve(Path.cwd())
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cfg.resolve(path.parent.resolve())
