#!/usr/bin/env python3
"""
models.py

Pydantic models for run configuration, loss weighting and reports.

Configuration is assembled in layers: model defaults, then the task preset
from configs/, then an optional user config file, then command-line flags.

License: GPL-3.0
"""

import logging
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from libs.config_manager import env_threads, load_config_file, load_preset

logger = logging.getLogger(__name__)


class LossConfig(BaseModel):
    """Term weights, repulsion margin and the optional size/angle blend."""

    weight_size: float = Field(0.0, ge=0.0, description="weight of the triangle-size loss")
    weight_boundary: float = Field(0.0, ge=0.0, description="weight of the boundary-repulsion loss")
    weight_angle: float = Field(0.0, ge=0.0, description="weight of the angle loss")
    weight_curvature: float = Field(0.0, ge=0.0, description="weight of the curvature-alignment loss")
    epsilon: float = Field(0.01, gt=0.0, description="repulsion margin in domain units")
    blend_t: Optional[float] = Field(None, ge=0.0, le=1.0,
                                     description="t in t*angle + (1-t)*size; None disables blending")

    @model_validator(mode="after")
    def require_a_term(self):
        if not any(w > 0 for w in self.term_weights().values()):
            raise ValueError("at least one loss weight must be positive")
        return self

    def term_weights(self) -> Dict[str, float]:
        size, angle = self.weight_size, self.weight_angle
        if self.blend_t is not None:
            size *= 1.0 - self.blend_t
            angle *= self.blend_t
        return {"size": size, "boundary": self.weight_boundary, "angle": angle,
                "curvature": self.weight_curvature}


class RunConfig(BaseModel):
    """Every setting of one run. Flags mirror these keys one-to-one."""

    model_config = {"extra": "forbid"}

    task: Literal["size", "align", "blend", "custom"] = "custom"
    input: Optional[str] = Field(None, description="OBJ patch or point file")
    fields: Optional[str] = Field(None, description="per-vertex field table")
    output_dir: str = "out"
    alpha: float = Field(1000.0, gt=0.0, description="sigmoid sharpness (1000)")
    k: int = Field(80, ge=3, description="nearest neighbours for candidates (80)")
    epsilon: float = Field(0.01, gt=0.0, description="boundary repulsion margin (0.01)")
    lr: float = Field(1e-4, gt=0.0, description="Adam learning rate (1e-4)")
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps_adam: float = Field(1e-8, gt=0.0)
    iterations: int = Field(1000, ge=0)
    seed: int = 0
    snapshot_every: int = Field(0, ge=0, description="0 disables snapshots")
    log_every: int = Field(50, ge=1)
    weight_size: float = Field(0.0, ge=0.0)
    weight_boundary: float = Field(0.0, ge=0.0)
    weight_angle: float = Field(0.0, ge=0.0)
    weight_curvature: float = Field(0.0, ge=0.0)
    blend_t: Optional[float] = Field(None, ge=0.0, le=1.0)
    target_area: Optional[float] = Field(None, gt=0.0, description="None: domain area / expected faces")
    n_vertices: int = Field(200, ge=3)
    init: Literal["uv", "random", "uniform-surface"] = "random"
    weight_init_scale: float = Field(0.05, ge=0.0, description="weights ~ U[0, scale * diagonal]")
    normalize_uv: bool = True
    uv_edge_length: float = Field(0.05, gt=0.0)
    cut_boundary: bool = True
    threads: int = Field(default_factory=env_threads, ge=1)
    surface: Literal["patch", "plane", "catenoid"] = "plane"
    field: Literal["constant", "rotating", "catenoid-curvature", "catenoid-meridian", "file"] = "constant"
    baseline: Literal["none", "sa"] = "none"

    @field_validator("input", "fields")
    @classmethod
    def empty_path_is_none(cls, v):
        if v is not None and not str(v).strip():
            return None
        return v

    @model_validator(mode="after")
    def check_consistency(self):
        if self.surface == "patch" and not self.input:
            raise ValueError("surface 'patch' needs an input OBJ")
        if self.init == "uv" and self.surface != "patch":
            raise ValueError("init 'uv' needs surface 'patch'")
        # a patch directory pairs every <stem>.obj with its own <stem>.fields
        if self.field == "file" and not self.fields and not (self.input and Path(self.input).is_dir()):
            raise ValueError("field 'file' needs a fields table")
        if self.field.startswith("catenoid") and self.surface != "catenoid":
            raise ValueError(f"field {self.field!r} needs surface 'catenoid'")
        if self.task == "blend" and self.blend_t is None:
            raise ValueError("task 'blend' needs blend_t")
        return self

    def loss_config(self) -> LossConfig:
        return LossConfig(weight_size=self.weight_size, weight_boundary=self.weight_boundary,
                          weight_angle=self.weight_angle, weight_curvature=self.weight_curvature,
                          epsilon=self.epsilon, blend_t=self.blend_t if self.task == "blend" else None)


class MetricsReport(BaseModel):
    """Evaluation measures of one mesh; None where a measure does not apply."""

    vertices: int
    faces: int
    angle_mean: Optional[float] = None
    angle_std: Optional[float] = None
    area_cv: Optional[float] = None
    size_rmse: Optional[float] = None
    alignment_error: Optional[float] = None
    curvature_alignment_error: Optional[float] = None
    angle_mean_interior: Optional[float] = None
    angle_std_interior: Optional[float] = None
    area_cv_interior: Optional[float] = None
    size_rmse_interior: Optional[float] = None
    alignment_error_interior: Optional[float] = None
    curvature_alignment_error_interior: Optional[float] = None

    @classmethod
    def from_values(cls, values: Dict[str, Any]) -> "MetricsReport":
        data = dict(values)
        data["vertices"] = int(data.get("vertices", 0))
        data["faces"] = int(data.get("faces", 0))
        return cls(**data)

    def as_dict(self) -> Dict[str, Any]:
        return self.model_dump()


def resolve_config(task: Optional[str] = None, config_path: Optional[Union[str, Path]] = None,
                   overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Layer the task preset, a config file and explicit overrides over the
    model defaults.

    Raises:
        ConfigurationError: unknown preset or malformed config file.
        pydantic.ValidationError: the merged values are invalid.
    """
    allowed = set(RunConfig.model_fields)
    values: Dict[str, Any] = {}
    if task and task != "custom":
        values.update(load_preset(task, allowed))
    if config_path:
        values.update(load_config_file(config_path, allowed))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    if task:
        values["task"] = task
    config = RunConfig(**values)
    logger.debug("resolved configuration: %s", config.model_dump())
    return config
