"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations

from typing import Sequence


class ChaosEvalError(Exception):
    """Base class for all toolkit errors."""


class UsageError(ChaosEvalError):
    """Invalid command line arguments or configuration."""


class DataFormatError(ChaosEvalError):
    """Input rows violate the pinned AVA CSV dialect.

    Collects every problem found in a file so one failed load reports all
    offending lines, each naming the line number and the field at fault.
    """

    def __init__(self, source: str, problems: Sequence[str]):
        self.source = str(source)
        self.problems = list(problems)
        summary = f"{self.source}: {len(self.problems)} invalid row(s)"
        super().__init__("\n  ".join([summary, *self.problems]))
