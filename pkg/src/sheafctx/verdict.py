from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class Verdict:
    """Outcome of a decision procedure, truthy iff the property holds."""

    holds: bool
    witness: Any = None
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return self.holds
