from __future__ import annotations

import enum
from dataclasses import dataclass


class ModeKind(str, enum.Enum):
    N = "N"
    E = "E"
    TRIPPED = "Tripped"


@dataclass(frozen=True)
class Mode:
    kind: ModeKind
    entered_at: float = 0.0

    @property
    def is_tripped(self) -> bool:
        return self.kind is ModeKind.TRIPPED


class Branch(str, enum.Enum):
    """Active IPBC control branch (selector 2)."""

    VOLTAGE = "VoltageLoop"
    POWER = "PowerCurrentLoop"
