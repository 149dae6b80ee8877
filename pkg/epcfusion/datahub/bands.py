"""Score to band mapping and the five-partition merge."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidConfig, OutOfRange

BANDS = ('A', 'B', 'C', 'D', 'E', 'F', 'G')
PARTITIONS = ('AB', 'C', 'D', 'E', 'FG')
SCORE_MIN, SCORE_MAX = 1.0, 100.0

DEFAULT_THRESHOLDS = (('A', 92.0), ('B', 81.0), ('C', 69.0), ('D', 55.0), ('E', 39.0), ('F', 21.0), ('G', 1.0))
DEFAULT_MERGE = (('A', 'AB'), ('B', 'AB'), ('C', 'C'), ('D', 'D'), ('E', 'E'), ('F', 'FG'), ('G', 'FG'))


@dataclass(frozen=True)
class BandTable:
    """Ordered (band, min_score) thresholds A..G and the band -> partition merge.

    The defaults are the published EPC banding; both SAP and EI use it."""
    thresholds: tuple[tuple[str, float], ...] = DEFAULT_THRESHOLDS
    merge_map: tuple[tuple[str, str], ...] = DEFAULT_MERGE
    _mins: np.ndarray = field(init=False, repr=False, compare=False)
    _partition_of_band: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        names = tuple(band for band, _ in self.thresholds)
        if names != BANDS:
            raise InvalidConfig(f"band thresholds must list {BANDS} in order, got {names}")
        mins = np.array([float(score) for _, score in self.thresholds])
        if np.any(np.diff(mins) >= 0):
            raise InvalidConfig("band thresholds must be strictly decreasing")
        if mins[-1] > SCORE_MIN or mins[0] > SCORE_MAX:
            raise InvalidConfig("band thresholds must cover [1, 100] without gaps")
        merge = dict(self.merge_map)
        if set(merge) != set(BANDS) or not set(merge.values()) <= set(PARTITIONS):
            raise InvalidConfig(f"merge map must send every band to one of {PARTITIONS}")
        object.__setattr__(self, '_mins', mins)
        object.__setattr__(self, '_partition_of_band',
                           np.array([PARTITIONS.index(merge[b]) for b in BANDS]))

    @classmethod
    def from_mapping(cls, thresholds: dict[str, float] | None = None,
                     merge_map: dict[str, str] | None = None) -> "BandTable":
        kwargs = {}
        if thresholds:
            kwargs['thresholds'] = tuple((band, float(thresholds[band])) for band in BANDS)
        if merge_map:
            kwargs['merge_map'] = tuple((band, merge_map[band]) for band in BANDS)
        try:
            return cls(**kwargs)
        except KeyError as e:
            raise InvalidConfig(f"band table misses band {e}") from e

    def band_indices(self, scores) -> np.ndarray:
        """Band index (0 = A .. 6 = G) per score; scores outside [1, 100] are
        clipped, which is what predictions need."""
        s = np.clip(np.asarray(scores, dtype=np.float64), SCORE_MIN, SCORE_MAX)
        return np.argmax(s[..., None] >= self._mins, axis=-1)

    def partition_indices(self, scores) -> np.ndarray:
        """Merged partition index (0 = AB .. 4 = FG) per score."""
        return self._partition_of_band[self.band_indices(scores)]

    def partition_of(self, band: str) -> str:
        return PARTITIONS[self._partition_of_band[BANDS.index(band)]]

    def to_dict(self) -> dict:
        return {'thresholds': dict(self.thresholds), 'merge_map': dict(self.merge_map)}


def map_score_to_band(score: float, table: BandTable) -> str:
    """First band whose minimum score is at or below *score*."""
    if not (SCORE_MIN <= score <= SCORE_MAX):
        raise OutOfRange(f"score {score} outside [1, 100]")
    return BANDS[int(table.band_indices(score))]
