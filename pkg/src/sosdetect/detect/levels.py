# sosdetect/detect/levels.py
# !/usr/bin/env python3

"""
Pyramid level selections for resolution ablations.

A selection is an explicit set of levels plus an optional open-ended tail
("2.." means level 2 and everything coarser). The named conditions are
    high   = {0}   original resolution only
    medium = {1}   first down-sampled level only
    low    = 2..   every level from the second down-sampling on
"""

import logging
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, Optional, Union

from .._exceptions import ConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LevelSet:
    levels: FrozenSet[int] = field(default_factory=frozenset)
    open_from: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "levels", frozenset(int(lv) for lv in self.levels))
        if any(lv < 0 for lv in self.levels) or (
            self.open_from is not None and self.open_from < 0
        ):
            raise ValueError("Pyramid levels must be >= 0")

    @property
    def is_empty(self) -> bool:
        return not self.levels and self.open_from is None

    def includes(self, level: int) -> bool:
        return level in self.levels or (self.open_from is not None and level >= self.open_from)

    def describe(self) -> str:
        parts = [str(lv) for lv in sorted(self.levels)]
        if self.open_from is not None:
            parts.append(f"{self.open_from}..")
        return ",".join(parts)


NAMED_LEVEL_SETS = {
    "high": LevelSet(frozenset({0})),
    "medium": LevelSet(frozenset({1})),
    "low": LevelSet(frozenset(), open_from=2),
}


def parse_levels(text: str) -> LevelSet:
    """
    Parses "high", "medium", "low", or a comma list of levels where an entry
    "n.." selects level n and above, e.g. "0", "2..", "0,2".
    """
    text = text.strip().lower()
    if text in NAMED_LEVEL_SETS:
        return NAMED_LEVEL_SETS[text]
    levels = set()
    open_from = None
    for item in filter(None, (part.strip() for part in text.split(","))):
        try:
            if item.endswith(".."):
                start = int(item[:-2])
                open_from = start if open_from is None else min(open_from, start)
            else:
                levels.add(int(item))
        except ValueError:
            raise ConfigError(f"Invalid level selection '{text}': bad entry '{item}'")
    try:
        selection = LevelSet(frozenset(levels), open_from)
    except ValueError as e:
        raise ConfigError(f"Invalid level selection '{text}': {e}")
    if selection.is_empty:
        raise ConfigError(f"Level selection '{text}' is empty")
    return selection


def as_level_set(levels: Union[LevelSet, Iterable[int]]) -> LevelSet:
    if isinstance(levels, LevelSet):
        return levels
    return LevelSet(frozenset(levels))
