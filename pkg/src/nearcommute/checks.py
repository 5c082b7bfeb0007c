"""Measured-vs-predicted inequality records.

A BoundCheck stores both sides of an inequality so tests can assert
``lhs <= rhs`` with an explicit slack, instead of trusting a boolean.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["BoundCheck", "PASS_SLACK_FLOOR"]

# A check passes when slack >= -PASS_SLACK_FLOOR * max(1, rhs).
PASS_SLACK_FLOOR = 1e-9


@dataclass(frozen=True)
class BoundCheck:
    """One inequality instance: lhs <= rhs with slack = rhs - lhs."""

    lhs: float
    rhs: float
    context: str = ""

    def __post_init__(self):
        for name in ("lhs", "rhs"):
            v = getattr(self, name)
            if not (v == v and abs(v) != float("inf")):
                raise ValueError(f"{name} is not finite in check {self.context!r}")

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -PASS_SLACK_FLOOR * max(1.0, self.rhs)

    def require(self) -> "BoundCheck":
        if not self.passed:
            raise AssertionError(
                f"bound violated [{self.context}]: lhs={self.lhs:.6e} > rhs={self.rhs:.6e}"
            )
        return self

    def as_dict(self) -> dict:
        return {
            "context": self.context,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "passed": self.passed,
        }
