from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field


class TargetSpec(BaseModel):
    """One simulated object: alive from ``spawn`` to ``despawn`` (inclusive) along a piecewise-linear path."""

    spawn: int = Field(..., ge=1)
    despawn: int = Field(..., ge=1)
    waypoints: List[Tuple[int, float, float]] = Field(..., min_length=1, description="(frame, cx, cy) path knots")
    size: Tuple[float, float] = Field(..., description="Box width and height in pixels")


class OcclusionWindow(BaseModel):
    target: int = Field(..., ge=0, description="Index into ScenarioSpec.targets")
    start: int = Field(..., ge=1)
    end: int = Field(..., ge=1)
    mode: Literal["drop", "low"] = Field("drop", description="Drop the detection or emit it with a low score")


class ScoreModel(BaseModel):
    tracked: Tuple[float, float] = (0.7, 0.95)
    occluded: Tuple[float, float] = (0.21, 0.29)


class ScenarioSpec(BaseModel):
    name: str = "custom"
    num_frames: int = Field(..., ge=1)
    width: int = Field(320, ge=1)
    height: int = Field(160, ge=1)
    stride: int = Field(4, ge=1)
    targets: List[TargetSpec]
    occlusion_windows: List[OcclusionWindow] = Field(default_factory=list)
    det_noise_std: float = Field(0.0, ge=0.0, description="Gaussian noise on box centres, pixels")
    size_noise_std: float = Field(0.0, ge=0.0, description="Log-normal sigma of the box size jitter")
    emb_dim: int = Field(32, ge=1)
    emb_noise_std: float = Field(0.05, ge=0.0, description="Expected norm of the additive embedding noise")
    score_model: ScoreModel = Field(default_factory=ScoreModel)
    seed: int = 0
    expected: Optional[str] = Field(None, description="Documented tracker behaviour on this scenario")


class PresetInfo(BaseModel):
    name: str
    num_frames: int
    num_targets: int
    expected: str
