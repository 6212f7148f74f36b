"""Actions the controller issues to assisted systems."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any


class ActionKind(str, Enum):
    CREATE_SLICE = "CreateSlice"
    RECONFIGURE_SLICE = "ReconfigureSlice"
    MIGRATE_VNF = "MigrateVnf"
    SET_SPLIT = "SetSplit"


class TargetSystem(str, Enum):
    VRAN = "vRAN"
    CORE_5G = "Core5G"
    MEC = "MEC"
    AI_APP = "AiApp"


@dataclass(frozen=True)
class Action:
    """Desired-state description; applying the same action twice is a no-op."""

    kind: ActionKind
    target: TargetSystem
    issued_at: int = 0
    flow: str | None = None
    reserved_bps: float | None = None
    vnf: str | None = None
    node: str | None = None
    k: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ActionKind(self.kind))
        object.__setattr__(self, "target", TargetSystem(self.target))

    def params(self) -> dict[str, Any]:
        keys = ("flow", "reserved_bps", "vnf", "node", "k")
        return {key: getattr(self, key) for key in keys if getattr(self, key) is not None}

    def describe(self) -> str:
        inner = " ".join(f"{k}={v}" for k, v in self.params().items())
        return f"{self.kind.value}({inner})"

    @classmethod
    def from_dict(cls, doc: dict[str, Any], issued_at: int = 0) -> "Action":
        kind = ActionKind(doc["kind"])
        target = doc.get("target") or default_target(kind, doc.get("vnf")).value
        if kind is ActionKind.CREATE_SLICE or kind is ActionKind.RECONFIGURE_SLICE:
            return cls(kind, target, issued_at, flow=doc["member"], reserved_bps=float(doc["reserved_bps"]))
        if kind is ActionKind.MIGRATE_VNF:
            return cls(kind, target, issued_at, vnf=doc["vnf"], node=doc["node"])
        return cls(kind, target, issued_at, flow=doc.get("flow"), k=int(doc["k"]))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind.value, "target": self.target.value}
        params = self.params()
        if "flow" in params and self.kind in (ActionKind.CREATE_SLICE, ActionKind.RECONFIGURE_SLICE):
            params["member"] = params.pop("flow")
        out.update(params)
        return out


def default_target(kind: ActionKind, vnf: str | None = None) -> TargetSystem:
    if kind in (ActionKind.CREATE_SLICE, ActionKind.RECONFIGURE_SLICE):
        return TargetSystem.VRAN
    if kind is ActionKind.SET_SPLIT:
        return TargetSystem.AI_APP
    return TargetSystem.MEC if vnf == "AppServer" else TargetSystem.CORE_5G
