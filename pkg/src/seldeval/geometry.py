"""Directions on the unit sphere and angular distances.

Conventions used throughout the package: azimuth is in degrees,
counter-clockwise positive with 0 pointing front, normalized to
[-180, 180); elevation is in degrees in [-90, 90], positive up. All
public angles are degrees; radians never appear in the API. The metric
values themselves are rotation-invariant, so the convention only matters
for interpreting input files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .errors import DegenerateMean

# Elevation this close to +/-90 deg is treated as a pole when converting
# back from a unit vector (azimuth is then meaningless and canonicalized).
_POLE_EPS_DEG = 1e-9


class Direction:
    """A direction of arrival given as an azimuth/elevation pair.

    The Cartesian unit vector is precomputed on construction since every
    distance computation needs it.
    """

    __slots__ = ("azimuth", "elevation", "unit")

    def __init__(self, azimuth: float, elevation: float):
        azimuth = float(azimuth)
        elevation = float(elevation)
        if not (math.isfinite(azimuth) and math.isfinite(elevation)):
            raise ValueError(f"direction angles must be finite, got ({azimuth}, {elevation})")
        if abs(elevation) > 90.0:
            raise ValueError(f"elevation {elevation} outside [-90, 90]")
        azimuth = ((azimuth + 180.0) % 360.0) - 180.0
        if azimuth >= 180.0:  # float wrap can land exactly on 180
            azimuth -= 360.0
        self.azimuth = azimuth
        self.elevation = elevation
        az = math.radians(azimuth)
        el = math.radians(elevation)
        cos_el = math.cos(el)
        self.unit = (cos_el * math.cos(az), cos_el * math.sin(az), math.sin(el))

    @classmethod
    def from_unit_vector(cls, x: float, y: float, z: float) -> "Direction":
        """Build a Direction from a (not necessarily unit) Cartesian vector."""
        norm = math.sqrt(x * x + y * y + z * z)
        if norm == 0.0 or not math.isfinite(norm):
            raise ValueError("cannot derive a direction from a zero or non-finite vector")
        zc = z / norm
        zc = max(-1.0, min(1.0, zc))
        elevation = math.degrees(math.asin(zc))
        if 90.0 - abs(elevation) < _POLE_EPS_DEG:
            return cls(0.0, elevation)
        return cls(math.degrees(math.atan2(y, x)), elevation)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Direction):
            return NotImplemented
        return self.azimuth == other.azimuth and self.elevation == other.elevation

    def __hash__(self) -> int:
        return hash((self.azimuth, self.elevation))

    def __repr__(self) -> str:
        return f"Direction({self.azimuth:g}, {self.elevation:g})"


@dataclass(frozen=True)
class UnitVector3:
    """Cartesian position vector, unit-norm when built from a Direction."""

    x: float
    y: float
    z: float

    @classmethod
    def from_direction(cls, d: Direction) -> "UnitVector3":
        return cls(*d.unit)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


def _angle_between_units(ua: tuple, ub: tuple) -> float:
    # Shared by angular_distance and the distance-matrix builder so both
    # produce bitwise-identical values for the same pair. Equal vectors
    # short-circuit to exactly 0: the self dot product of a float unit
    # vector can land just below 1 and arccos would report ~1e-6 deg.
    if ua == ub:
        return 0.0
    dot = ua[0] * ub[0] + ua[1] * ub[1] + ua[2] * ub[2]
    if dot > 1.0:
        dot = 1.0
    elif dot < -1.0:
        dot = -1.0
    return math.degrees(math.acos(dot))


def angular_distance(a: Direction, b: Direction) -> float:
    """Great-circle angle between two directions, in degrees in [0, 180].

    Computed as the arccosine of the dot product of the two unit vectors;
    the dot product is clamped to [-1, 1] to guard against floating-point
    overshoot. Symmetric in its arguments.
    """
    return _angle_between_units(a.unit, b.unit)


def cartesian_distance(a: UnitVector3, b: UnitVector3) -> float:
    """Euclidean distance between two position vectors."""
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)


def spherical_mean(directions: Iterable[Direction]) -> Direction:
    """Direction of the normalized sum of unit vectors.

    Raises DegenerateMean when the vector sum has norm <= 1e-9 (for
    example an exactly antipodal pair), in which case callers are expected
    to fall back to the first element and record a warning.
    """
    sx = sy = sz = 0.0
    count = 0
    for d in directions:
        ux, uy, uz = d.unit
        sx += ux
        sy += uy
        sz += uz
        count += 1
    if count == 0:
        raise ValueError("spherical_mean needs at least one direction")
    norm = math.sqrt(sx * sx + sy * sy + sz * sz)
    if norm <= 1e-9:
        raise DegenerateMean(f"unit vectors of {count} directions cancel out (norm {norm:.3e})")
    return Direction.from_unit_vector(sx, sy, sz)
