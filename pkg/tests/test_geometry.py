import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seldeval.errors import DegenerateMean
from seldeval.geometry import (
    Direction,
    UnitVector3,
    angular_distance,
    cartesian_distance,
    spherical_mean,
)

directions = st.builds(
    Direction,
    st.floats(min_value=-180.0, max_value=179.999999, allow_nan=False),
    st.floats(min_value=-90.0, max_value=90.0, allow_nan=False),
)


class TestDirection:
    def test_azimuth_normalized_into_range(self):
        assert Direction(180.0, 0.0).azimuth == -180.0
        assert Direction(540.0, 0.0).azimuth == -180.0
        assert Direction(-190.0, 0.0).azimuth == 170.0
        assert Direction(0.0, 0.0).azimuth == 0.0

    def test_elevation_out_of_range_rejected_not_clamped(self):
        with pytest.raises(ValueError):
            Direction(0.0, 90.0001)
        with pytest.raises(ValueError):
            Direction(0.0, -91.0)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            Direction(float("nan"), 0.0)
        with pytest.raises(ValueError):
            Direction(0.0, float("inf"))

    @given(directions)
    @settings(max_examples=200)
    def test_unit_vector_round_trip(self, d):
        back = Direction.from_unit_vector(*d.unit)
        if 90.0 - abs(d.elevation) < 1e-9:
            assert back.azimuth == 0.0
        else:
            assert abs(back.azimuth - d.azimuth) < 1e-9
        assert abs(back.elevation - d.elevation) < 1e-9

    def test_pole_azimuth_canonicalized(self):
        pole = Direction(123.0, 90.0)
        assert Direction.from_unit_vector(*pole.unit).azimuth == 0.0

    @given(directions)
    @settings(max_examples=100)
    def test_unit_norm_within_1e12(self, d):
        assert abs(UnitVector3.from_direction(d).norm() - 1.0) < 1e-12


class TestAngularDistance:
    def test_identity(self):
        assert angular_distance(Direction(0, 0), Direction(0, 0)) == 0.0

    def test_antipodal(self):
        assert angular_distance(Direction(0, 0), Direction(180, 0)) == pytest.approx(180.0, abs=1e-9)

    def test_pinned_value(self):
        # arccos(sin 40 sin 20 + cos 40 cos 20 cos 30) evaluated at 40-digit
        # precision before the implementation existed.
        got = angular_distance(Direction(30, 40), Direction(60, 20))
        assert got == pytest.approx(32.51492007556037, abs=1e-6)

    @given(directions, directions)
    @settings(max_examples=300)
    def test_symmetry_exact(self, a, b):
        assert angular_distance(a, b) == angular_distance(b, a)

    @given(directions, directions, directions)
    @settings(max_examples=200)
    def test_triangle_inequality(self, a, b, c):
        assert angular_distance(a, c) <= angular_distance(a, b) + angular_distance(b, c) + 1e-6

    @given(directions, directions)
    @settings(max_examples=300)
    def test_range(self, a, b):
        d = angular_distance(a, b)
        assert 0.0 <= d <= 180.0

    def test_zero_iff_equal_unit_vectors(self):
        a = Direction(33.0, -12.0)
        assert angular_distance(a, Direction(33.0, -12.0)) == 0.0
        # separation above the arccos resolution limit (~1e-6 deg)
        assert angular_distance(a, Direction(33.0, -12.0001)) > 0.0

    @given(
        st.floats(min_value=-180.0, max_value=179.999999, allow_nan=False),
        st.floats(min_value=-180.0, max_value=179.999999, allow_nan=False),
    )
    @settings(max_examples=200)
    def test_equator_equals_wrapped_azimuth_difference(self, az1, az2):
        d = angular_distance(Direction(az1, 0.0), Direction(az2, 0.0))
        diff = abs(az1 - az2) % 360.0
        if diff > 180.0:
            diff = 360.0 - diff
        assert d == pytest.approx(diff, abs=1e-6)


class TestCartesianDistance:
    def test_identical(self):
        v = UnitVector3(0.5, 0.5, 0.1)
        assert cartesian_distance(v, v) == 0.0

    def test_antipodal_units(self):
        assert cartesian_distance(UnitVector3(1, 0, 0), UnitVector3(-1, 0, 0)) == 2.0

    def test_orthogonal_units(self):
        got = cartesian_distance(UnitVector3(1, 0, 0), UnitVector3(0, 1, 0))
        assert got == pytest.approx(math.sqrt(2.0), abs=1e-12)

    @given(directions, directions)
    @settings(max_examples=100)
    def test_symmetric(self, a, b):
        va, vb = UnitVector3.from_direction(a), UnitVector3.from_direction(b)
        assert cartesian_distance(va, vb) == cartesian_distance(vb, va)


class TestSphericalMean:
    def test_singleton(self):
        mean = spherical_mean([Direction(10, 0)])
        assert mean.azimuth == pytest.approx(10.0, abs=1e-9)
        assert mean.elevation == pytest.approx(0.0, abs=1e-9)

    def test_symmetric_equator_pair(self):
        mean = spherical_mean([Direction(10, 0), Direction(30, 0)])
        assert mean.azimuth == pytest.approx(20.0, abs=1e-9)
        assert mean.elevation == pytest.approx(0.0, abs=1e-9)

    def test_antipodal_pair_degenerate(self):
        with pytest.raises(DegenerateMean):
            spherical_mean([Direction(0, 0), Direction(180, 0)])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            spherical_mean([])

    @given(
        st.lists(directions, min_size=1, max_size=6),
        st.floats(min_value=-179.0, max_value=179.0, allow_nan=False),
    )
    @settings(max_examples=100)
    def test_rotation_equivariance(self, dirs, shift):
        try:
            mean = spherical_mean(dirs)
        except DegenerateMean:
            return
        rotated = [Direction(d.azimuth + shift, d.elevation) for d in dirs]
        try:
            rotated_mean = spherical_mean(rotated)
        except DegenerateMean:
            return
        expected = Direction(mean.azimuth + shift, mean.elevation)
        # tolerance floor: arccos of a float dot product resolves ~1e-6 deg
        assert angular_distance(rotated_mean, expected) < 5e-6
