"""
Request handles for non-blocking operations.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any


class RequestKind(str, Enum):
    POINT_TO_POINT = "point-to-point"
    REDUCE = "reduce"
    BROADCAST = "broadcast"
    ALLREDUCE = "allreduce"
    NULL = "null"


class RequestState(str, Enum):
    NULL = "null"
    PENDING = "pending"
    COMPLETE = "complete"


@dataclass(eq=False)
class Request:
    kind: RequestKind
    owner: int
    state: RequestState = RequestState.PENDING
    result: Any = None
    freed: bool = False
    # completion observed by a test/wait or by free_on_complete
    released: bool = False

    @classmethod
    def null(cls, owner: int = -1) -> Request:
        return cls(kind=RequestKind.NULL, owner=owner, state=RequestState.NULL)

    @property
    def done(self) -> bool:
        return self.state != RequestState.PENDING

    def _complete(self, result: Any = None) -> None:
        if self.state == RequestState.PENDING:
            self.state = RequestState.COMPLETE
            if result is not None:
                self.result = result
