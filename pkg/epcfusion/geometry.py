"""Footprint polygons to fixed-length boundary sequences and spatial numerics.

The pipeline per building is: equal arc-length resampling of the exterior
ring (``L`` points, starting at the first stored vertex, in stored traversal
order) -> translation to the centroid of the samples -> scaling by the
largest radius -> principal-axis orientation of the centred samples.
"""

import math
from dataclasses import dataclass

import numpy as np
import shapely
from shapely.geometry import LinearRing, Polygon

from .errors import DegenerateGeometry

BOUNDARY_LENGTH = 128
SCALE_EPS = 1e-8
TIE_BREAK = 1e-9
ANGLE_EPS = 1e-12


@dataclass(frozen=True)
class FootprintPolygon:
    uprn: str
    points: tuple[tuple[float, float], ...]
    height: float = 0.0
    is_closed: bool = False
    holes: tuple[tuple[tuple[float, float], ...], ...] = ()

    @classmethod
    def from_points(cls, uprn, points, height=0.0, holes=()) -> "FootprintPolygon":
        """Build and validate a polygon; a repeated closing vertex is dropped."""
        pts = [(float(x), float(y)) for x, y in points]
        is_closed = len(pts) > 1 and pts[0] == pts[-1]
        if is_closed:
            pts = pts[:-1]
        polygon = cls(str(uprn), tuple(pts), float(height), is_closed,
                      tuple(tuple((float(x), float(y)) for x, y in ring) for ring in holes))
        polygon.validate()
        return polygon

    def validate(self):
        coords = np.asarray(self.points, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise DegenerateGeometry(f"{self.uprn}: points must be (x, y) pairs")
        if not np.all(np.isfinite(coords)):
            raise DegenerateGeometry(f"{self.uprn}: non-finite coordinates")
        if len({tuple(p) for p in coords.tolist()}) < 3:
            raise DegenerateGeometry(f"{self.uprn}: fewer than 3 distinct vertices")
        if not math.isfinite(self.height) or self.height < 0:
            raise DegenerateGeometry(f"{self.uprn}: height must be finite and >= 0")
        if self.ring().length <= 0:
            raise DegenerateGeometry(f"{self.uprn}: zero perimeter")

    def ring(self) -> LinearRing:
        return LinearRing(self.points)

    def shape(self) -> Polygon:
        return Polygon(self.points, [ring for ring in self.holes if len(ring) >= 3])

    @property
    def is_simple(self) -> bool:
        """False for self-intersecting exterior rings (accepted, but reported)."""
        return bool(self.ring().is_simple)

    def exterior_coordinates(self) -> list[list[float]]:
        """Closed exterior ring, GeoJSON style."""
        ring = [list(p) for p in self.points]
        return ring + [ring[0]]


@dataclass(frozen=True)
class BoundarySequence:
    points: np.ndarray            # (L, 2), unitless
    r_max: float                  # metres
    centroid: tuple[float, float]  # metres

    @property
    def length(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True)
class SpatialFeatures:
    footprint_area: float  # m²
    height: float          # m
    orientation: float     # radians in [0, pi)

    def as_array(self) -> np.ndarray:
        return np.array([self.footprint_area, self.height, self.orientation], dtype=np.float64)


SPATIAL_FEATURES = ('area', 'height', 'orientation')


def resample_boundary(polygon: FootprintPolygon, L: int = BOUNDARY_LENGTH) -> np.ndarray:
    """L points on the closed exterior ring at arc-length spacing perimeter / L."""
    if L < 3:
        raise ValueError("L must be at least 3")
    ring = polygon.ring()
    perimeter = ring.length
    if not perimeter > 0:
        raise DegenerateGeometry(f"{polygon.uprn}: zero perimeter")
    # LinearRing keeps the stored vertex order and starts at the first vertex.
    distances = perimeter * np.arange(L, dtype=np.float64) / L
    samples = shapely.line_interpolate_point(ring, distances)
    return shapely.get_coordinates(samples).astype(np.float64)


def normalize_boundary(seq: np.ndarray) -> BoundarySequence:
    """Centre on the sample mean and scale by 1 / (r_max + eps)."""
    points = np.asarray(seq, dtype=np.float64)
    mu = points.mean(axis=0)
    centred = points - mu
    r_max = float(np.max(np.linalg.norm(centred, axis=1)))
    if r_max == 0.0:
        raise DegenerateGeometry("all boundary points are identical")
    return BoundarySequence(centred / (r_max + SCALE_EPS), r_max, (float(mu[0]), float(mu[1])))


def principal_orientation(centred: np.ndarray) -> float:
    """Angle of the dominant eigenvector of XᵀX, folded into [0, pi).

    Square-like spectra (relative eigen gap below 1e-9) have no meaningful
    axis and return 0."""
    x = np.asarray(centred, dtype=np.float64)
    eigvals, eigvecs = np.linalg.eigh(x.T @ x)
    lam_small, lam_big = eigvals
    if (lam_big - lam_small) < TIE_BREAK * (lam_big + lam_small):
        return 0.0
    v = eigvecs[:, 1]
    theta = math.atan2(v[1], v[0]) % math.pi
    # An axis at pi - tiny is the same axis as 0.
    return 0.0 if math.pi - theta < ANGLE_EPS else theta


def footprint_area(polygon: FootprintPolygon) -> float:
    """Absolute shoelace area of the exterior ring minus its holes."""
    area = abs(polygon.shape().area)
    if not area > 0:
        raise DegenerateGeometry(f"{polygon.uprn}: zero footprint area")
    return float(area)


def build_spatial_features(polygon: FootprintPolygon, height: float | None = None,
                           L: int = BOUNDARY_LENGTH) -> tuple[SpatialFeatures, BoundarySequence]:
    height = polygon.height if height is None else float(height)
    if not math.isfinite(height) or height < 0:
        raise DegenerateGeometry(f"{polygon.uprn}: height must be finite and >= 0")
    boundary = normalize_boundary(resample_boundary(polygon, L))
    # Orientation from the centred (unscaled) samples; scaling does not move the axis.
    theta = principal_orientation(boundary.points)
    return SpatialFeatures(footprint_area(polygon), height, theta), boundary
