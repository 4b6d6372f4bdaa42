from pydantic import BaseModel, Field


class BenchReport(BaseModel):
    """Median construction time per cost matrix, in nanoseconds."""

    num_tracks: int = Field(..., ge=1)
    num_dets: int = Field(..., ge=1)
    emb_dim: int = Field(..., ge=1)
    iterations: int = Field(..., ge=1)
    warmup: int = Field(0, ge=0)
    seed: int = 0
    eg_ns: int
    em_ns: int
    iou_ns: int

    @property
    def eg_over_em(self) -> float:
        return self.eg_ns / self.em_ns if self.em_ns else float("inf")
