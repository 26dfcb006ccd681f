"""
Seeded message-delay models, in scheduler ticks.
"""
from __future__ import annotations

from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class DelayKind(str, Enum):
    IMMEDIATE = "immediate"
    FIXED = "fixed"
    UNIFORM = "uniform"


class DelayModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: DelayKind = DelayKind.IMMEDIATE
    lo: int = Field(0, ge=0)
    hi: int = Field(0, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_bounds(self) -> DelayModel:
        if self.lo > self.hi:
            raise ValueError(f"delay bounds lo={self.lo} > hi={self.hi}")
        if self.kind == DelayKind.IMMEDIATE and (self.lo or self.hi):
            raise ValueError("immediate delay takes no bounds")
        if self.kind == DelayKind.FIXED and self.lo != self.hi:
            raise ValueError("fixed delay needs lo == hi")
        return self

    @classmethod
    def immediate(cls, seed: int = 0) -> DelayModel:
        return cls(kind=DelayKind.IMMEDIATE, seed=seed)

    @classmethod
    def fixed(cls, d: int, seed: int = 0) -> DelayModel:
        return cls(kind=DelayKind.FIXED, lo=d, hi=d, seed=seed)

    @classmethod
    def uniform(cls, lo: int, hi: int, seed: int = 0) -> DelayModel:
        return cls(kind=DelayKind.UNIFORM, lo=lo, hi=hi, seed=seed)

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> DelayModel:
        """'immediate' | 'fixed:T' | 'uniform:LO:HI'."""
        parts = text.strip().lower().split(":")
        try:
            if parts == ["immediate"]:
                return cls.immediate(seed)
            if parts[0] == "fixed" and len(parts) == 2:
                return cls.fixed(int(parts[1]), seed)
            if parts[0] == "uniform" and len(parts) == 3:
                return cls.uniform(int(parts[1]), int(parts[2]), seed)
        except ValueError as e:
            raise ValueError(f"invalid delay {text!r}: {e}") from e
        raise ValueError(f"invalid delay {text!r}; expected immediate, fixed:T or uniform:LO:HI")

    def with_seed(self, seed: int) -> DelayModel:
        return self.model_copy(update={"seed": seed})

    def scaled(self, factor: int) -> DelayModel:
        return self.model_copy(update={"lo": self.lo * factor, "hi": self.hi * factor})

    @property
    def max_delay(self) -> int:
        return self.hi

    def label(self) -> str:
        if self.kind == DelayKind.IMMEDIATE:
            return "immediate"
        if self.kind == DelayKind.FIXED:
            return f"fixed:{self.lo}"
        return f"uniform:{self.lo}:{self.hi}"


class DelaySampler:
    """Draws one delay per message, in send order, from a private generator."""

    def __init__(self, model: DelayModel, stream: int = 0):
        self.model = model
        self._rng = np.random.default_rng([model.seed, stream])

    def draw(self) -> int:
        if self.model.kind == DelayKind.IMMEDIATE:
            return 0
        if self.model.kind == DelayKind.FIXED:
            return self.model.lo
        return int(self._rng.integers(self.model.lo, self.model.hi + 1))
