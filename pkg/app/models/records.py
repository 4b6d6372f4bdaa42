from collections import defaultdict
from typing import Dict, List

from pydantic import BaseModel, Field

from app.models.geometry import BoundingBox


class ResultRecord(BaseModel):
    """One tracker output row: frame, identity, top-left box and confidence."""

    frame: int
    id: int
    x: float
    y: float
    w: float
    h: float
    score: float = 1.0

    class Config:
        from_attributes = True

    @property
    def box(self) -> BoundingBox:
        return BoundingBox(self.x, self.y, self.w, self.h)

    @classmethod
    def from_box(cls, frame: int, track_id: int, box: BoundingBox, score: float) -> "ResultRecord":
        return cls(frame=frame, id=track_id, x=box.x, y=box.y, w=box.w, h=box.h, score=score)


class GroundTruthRecord(BaseModel):
    frame: int
    id: int
    x: float
    y: float
    w: float
    h: float
    consider: int = 1
    cls: int = 1
    visibility: float = Field(1.0, ge=0.0, le=1.0)

    @property
    def box(self) -> BoundingBox:
        return BoundingBox(self.x, self.y, self.w, self.h)


class GroundTruth(BaseModel):
    records: List[GroundTruthRecord] = Field(default_factory=list)

    def by_frame(self) -> Dict[int, List[GroundTruthRecord]]:
        frames: Dict[int, List[GroundTruthRecord]] = defaultdict(list)
        for rec in self.records:
            frames[rec.frame].append(rec)
        return dict(frames)

    @property
    def num_objects(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> List[int]:
        return sorted({rec.id for rec in self.records})


def results_by_frame(records: List[ResultRecord]) -> Dict[int, List[ResultRecord]]:
    frames: Dict[int, List[ResultRecord]] = defaultdict(list)
    for rec in records:
        frames[rec.frame].append(rec)
    return dict(frames)
