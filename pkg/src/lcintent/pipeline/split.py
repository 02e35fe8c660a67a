"""Train/test partition by recording location."""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import UnassignedLocation, ValidationError

# held-out locations per dataset kind when none are given
DEFAULT_TEST_COUNT = {"straight": 2, "ramp": 3}


@dataclass(frozen=True)
class SplitSpec:
    train_locations: frozenset
    test_locations: frozenset

    def __post_init__(self):
        object.__setattr__(self, "train_locations", frozenset(int(v) for v in self.train_locations))
        object.__setattr__(self, "test_locations", frozenset(int(v) for v in self.test_locations))
        if not self.train_locations or not self.test_locations:
            raise ValidationError("both sides of a location split need at least one location")
        if self.train_locations & self.test_locations:
            raise UnassignedLocation(f"locations on both sides: {sorted(self.train_locations & self.test_locations)}")

    def side(self, location_id: int) -> str:
        if location_id in self.train_locations:
            return "train"
        if location_id in self.test_locations:
            return "test"
        raise UnassignedLocation(f"location {location_id} is in neither side of the split")


def default_split(locations, kind: str = "straight", n_test=None) -> SplitSpec:
    """The highest-numbered locations form the test side."""
    locs = sorted(set(int(v) for v in locations))
    n_test = DEFAULT_TEST_COUNT.get(kind, 2) if n_test is None else int(n_test)
    n_test = min(n_test, len(locs) - 1)
    if n_test < 1:
        raise ValidationError("a location split needs at least two locations")
    return SplitSpec(frozenset(locs[:-n_test]), frozenset(locs[-n_test:]))


def location_split(recordings, spec: SplitSpec) -> tuple:
    """``(train, test)`` lists of recordings."""
    train, test = [], []
    for rec in recordings:
        (train if spec.side(rec.location_id) == "train" else test).append(rec)
    return train, test
