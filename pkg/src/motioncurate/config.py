"""Declarative run configuration: one file, flat keys, CLI overrides on top."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import yaml

from .core import PipelineConfig

RUN_KEYS = ("backend_url", "backend_token", "workers", "output_dir", "model_tag")


@dataclass
class RunSettings:
    pipeline: PipelineConfig
    backend_url: Optional[str] = None
    backend_token: Optional[str] = None
    workers: int = 1
    output_dir: str = "out"
    model_tag: str = "llm"


def load_config(path: Optional[Path], overrides: dict[str, Any] | None = None) -> RunSettings:
    """Read YAML/JSON config, apply overrides, reject unknown keys."""
    raw: dict[str, Any] = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        raw = (json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)) or {}
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value

    pipeline_fields = {f.name for f in dataclasses.fields(PipelineConfig)}
    pipeline_kwargs = {}
    run_kwargs: dict[str, Any] = {}
    for key, value in raw.items():
        if key in pipeline_fields:
            pipeline_kwargs[key] = value
        elif key in RUN_KEYS:
            run_kwargs[key] = value
        else:
            raise ValueError(f"unknown config key {key!r}")
    return RunSettings(pipeline=PipelineConfig(**pipeline_kwargs), **run_kwargs)
