from .delays import DelayKind, DelayModel, DelaySampler
from .requests import Request, RequestKind, RequestState
from .runtime import Comm, Runtime, SchedulerMode, spawn_ranks

__all__ = [
    "Comm",
    "DelayKind",
    "DelayModel",
    "DelaySampler",
    "Request",
    "RequestKind",
    "RequestState",
    "Runtime",
    "SchedulerMode",
    "spawn_ranks",
]
