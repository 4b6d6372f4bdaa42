from typing import Optional

from pydantic import BaseModel, Field


class MetricsReport(BaseModel):
    """CLEAR and identity metrics for one sequence (or an aggregate of several)."""

    name: Optional[str] = None
    mota: float
    idf1: float = Field(..., ge=0.0, le=1.0)
    idp: float = Field(..., ge=0.0, le=1.0)
    idr: float = Field(..., ge=0.0, le=1.0)
    idsw: int = Field(..., ge=0)
    fp: int = Field(..., ge=0)
    fn: int = Field(..., ge=0)
    num_gt: int = Field(..., ge=0)
    num_res: int = Field(0, ge=0)
    num_matches: int = Field(0, ge=0)
    idtp: int = Field(0, ge=0)
    idfp: int = Field(0, ge=0)
    idfn: int = Field(0, ge=0)
    # reserved, never computed here
    hota: Optional[float] = None

    class Config:
        from_attributes = True
