from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Strategy(str, Enum):
    SIMPLETRACK = "simpletrack"
    BYTE = "byte"
    JDE = "jde"


class Similarity(str, Enum):
    """Association cost used by the SimpleTrack pipeline."""

    IOU = "iou"
    GIOU = "giou"
    EMBEDDING = "embedding"
    EMBEDDING_MOTION = "embedding_motion"
    EMBEDDING_IOU = "embedding_iou"
    EMBEDDING_GIOU = "embedding_giou"


class TrackerConfig(BaseModel):
    """Tracker hyper-parameters; defaults are the published SimpleTrack settings."""

    tau_high: float = Field(0.3, ge=0.0, le=1.0, description="Score above which a detection is high-confidence")
    tau_low: float = Field(0.2, ge=0.0, le=1.0, description="Score at or below which a detection is discarded")
    eps_init: float = Field(0.6, ge=0.0, le=1.0, description="Minimum score to start a new track")
    eps_retrieval: float = Field(0.1, ge=0.0, le=1.0, description="Cosine distance below which a lost track is retrieved")
    lambda1: float = Field(1.0, ge=0.0, description="Weight of the embedding distance")
    lambda2: float = Field(0.5, ge=0.0, description="Weight of the GIoU distance")
    match_thresh_high: float = Field(0.8, ge=0.0, description="Gate for the high-confidence association")
    match_thresh_low: float = Field(0.4, ge=0.0, description="Gate for the low-confidence association")
    max_time_lost: int = Field(30, ge=0, description="Frames a lost track is kept before removal")
    ema_alpha: float = Field(0.9, ge=0.0, le=1.0, description="Weight of the old embedding memory")
    strategy: Strategy = Strategy.SIMPLETRACK
    retrieval_enabled: bool = True
    similarity: Optional[Similarity] = Field(None, description="Cost override; unset means embedding_giou")
    two_stage: bool = Field(True, description="Run the low-confidence association")
    em_weight: float = Field(0.98, ge=0.0, le=1.0, description="Appearance share of the embedding+motion cost")
    gate_threshold: float = Field(9.4877, gt=0.0, description="Mahalanobis gate (chi-square 95%, 4 dof)")
    jde_embedding_thresh: float = Field(0.4, ge=0.0)
    jde_iou_thresh: float = Field(0.5, ge=0.0)
    kalman_std_weight_position: float = Field(1.0 / 20, gt=0.0)
    kalman_std_weight_velocity: float = Field(1.0 / 160, gt=0.0)

    @model_validator(mode="after")
    def check_score_thresholds(self):
        if self.tau_low > self.tau_high:
            raise ValueError(f"tau_low ({self.tau_low}) must not exceed tau_high ({self.tau_high})")
        return self

    @property
    def effective_similarity(self) -> Similarity:
        return self.similarity or Similarity.EMBEDDING_GIOU


class RunManifest(BaseModel):
    """Everything needed to reproduce a run; never holds timestamps."""

    command: str
    argv: List[str] = Field(default_factory=list)
    version: str
    config: Optional[TrackerConfig] = None
    inputs: Dict[str, str] = Field(default_factory=dict)
    outputs: Dict[str, str] = Field(default_factory=dict)
    seed: Optional[int] = None
    extra: Dict[str, Any] = Field(default_factory=dict)


class TrackResponse(BaseModel):
    records: List["ResultRecordOut"]
    manifest: RunManifest
    warnings: List[str] = Field(default_factory=list)


class ResultRecordOut(BaseModel):
    model_config = ConfigDict(from_attributes=True)

    frame: int
    id: int
    x: float
    y: float
    w: float
    h: float
    score: float


TrackResponse.model_rebuild()
