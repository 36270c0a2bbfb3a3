"""Request/response models for the colorization service."""

from typing import List, Optional

from pydantic import BaseModel, Field


class ScribblePointModel(BaseModel):
    x: int
    y: int
    a: float = Field(ge=0.0, le=1.0)
    b: float = Field(ge=0.0, le=1.0)


class ScribblePayload(BaseModel):
    resolution: List[int] = Field(min_length=2, max_length=2)
    radius: int = 2
    points: List[ScribblePointModel]


class SessionCreated(BaseModel):
    id: str
    n_frames: int
    resolution: List[int]


class StatusResponse(BaseModel):
    status: str
    progress: float
    frames_done: int
    n_frames: int
    version: int


class ColorizeAccepted(BaseModel):
    status: str
    version: int


class PointError(BaseModel):
    index: int
    message: str


class ScribbleRejection(BaseModel):
    detail: str
    point_errors: List[PointError] = []
