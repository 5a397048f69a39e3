"""Per-iteration error events."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class Failure(enum.IntEnum):
    """Which of the four operations of an iteration misbehaved (at most one)."""

    NONE = 0
    RV1 = 1  # Rv1 retrieves R1 and also R2
    P1 = 2  # patch pulse on R1 creates no excitation
    RV2 = 3  # Rv2 retrieves R2 and also R1
    P2 = 4  # patch pulse on R2 creates no excitation


@dataclass(frozen=True)
class IterationEvents:
    failure: Failure = Failure.NONE
    accum_triggered: bool = False

    @property
    def code(self) -> int:
        """Compact integer encoding ``2 * failure + accum`` in ``0..9``."""
        return 2 * int(self.failure) + int(self.accum_triggered)

    @classmethod
    def from_code(cls, code: int) -> "IterationEvents":
        return cls(Failure(code // 2), bool(code % 2))


IDEAL_EVENTS = IterationEvents()
