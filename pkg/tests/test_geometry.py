import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from satlearn.errors import ConfigurationError
from satlearn.geometry import (
    ConstellationSpec,
    GeometryConstants,
    SatelliteState,
    build_walker,
    doppler_shift_hz,
    geocentric_angle,
    los_distance_km,
    max_slant_range_km,
    orbital_period_s,
    position_vector_km,
    relative_speed_km_s,
    write_positions_csv,
)

C = GeometryConstants()


def sat(lat, lon, alt=550.0, vel=(0.0, 0.0, 0.0), plane=0, slot=0):
    return SatelliteState(plane, slot, lat, lon, alt, vel)


class TestSpecValidation:
    def test_star_50_5(self):
        spec = ConstellationSpec(50, 5, 1, 85.0, 550.0, "star")
        assert spec.satellites_per_plane == 10
        assert len(build_walker(spec)) == 50

    def test_delta_42_7(self):
        spec = ConstellationSpec(42, 7, 1, 53.0, 550.0, "delta")
        assert spec.satellites_per_plane == 6
        states = build_walker(spec)
        assert len(states) == 42
        assert sorted({s.plane_index for s in states}) == list(range(7))

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(total_satellites=10, planes=3),  # not divisible
            dict(planes=0),
            dict(altitude_km=0.0),
            dict(inclination_deg=181.0),
            dict(pattern="ring"),
        ],
    )
    def test_invalid_specs(self, kwargs):
        base = dict(
            total_satellites=12, planes=3, phasing=1, inclination_deg=53.0,
            altitude_km=550.0, pattern="delta",
        )
        base.update(kwargs)
        with pytest.raises(ConfigurationError):
            ConstellationSpec(**base)

    def test_bad_constants(self):
        with pytest.raises(ConfigurationError):
            GeometryConstants(earth_radius_km=-1.0)

    def test_state_coordinate_ranges(self):
        with pytest.raises(ValueError):
            sat(91.0, 0.0)
        with pytest.raises(ValueError):
            sat(0.0, -180.0)


class TestWalker:
    def test_in_plane_spacing(self):
        spec = ConstellationSpec(42, 7, 1, 53.0, 550.0, "delta")
        states = [s for s in build_walker(spec) if s.plane_index == 0]
        # evenly spaced slots: consecutive LoS distances all equal
        dists = [
            los_distance_km(states[k], states[(k + 1) % 6]) for k in range(6)
        ]
        assert max(dists) - min(dists) < 1e-6

    def test_periodicity(self):
        spec = ConstellationSpec(24, 3, 1, 60.0, 700.0, "delta")
        period = orbital_period_s(700.0)
        before = build_walker(spec, 123.0)
        after = build_walker(spec, 123.0 + period)
        for a, b in zip(before, after):
            assert abs(a.latitude_deg - b.latitude_deg) < 1e-9
            assert abs(a.longitude_deg - b.longitude_deg) < 1e-9

    def test_circular_speed_invariant(self):
        spec = ConstellationSpec(20, 4, 2, 97.0, 800.0, "star")
        a = C.earth_radius_km + 800.0
        expected = math.sqrt(C.mu_km3_s2 / a)
        for s in build_walker(spec, 456.0):
            speed = math.hypot(*s.velocity_km_s)
            assert abs(speed - expected) / expected < 1e-9

    def test_altitude_preserved(self):
        spec = ConstellationSpec(12, 2, 0, 45.0, 613.0, "delta")
        for t in (0.0, 59.0, 4001.0):
            assert all(s.altitude_km == 613.0 for s in build_walker(spec, t))

    def test_same_plane_distance_constant_over_time(self):
        spec = ConstellationSpec(50, 5, 1, 85.0, 550.0, "star")
        ref = None
        for t in np.linspace(0.0, orbital_period_s(550.0), 7):
            plane0 = [s for s in build_walker(spec, t) if s.plane_index == 0]
            d = los_distance_km(plane0[2], plane0[3])
            if ref is None:
                ref = d
            else:
                assert abs(d - ref) / ref < 1e-6

    def test_positions_csv(self, tmp_path):
        spec = ConstellationSpec(6, 2, 0, 50.0, 550.0, "delta")
        path = tmp_path / "positions.csv"
        write_positions_csv(path, spec, [0.0, 60.0])
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "plane,slot,t_s,latitude_deg,longitude_deg,altitude_km"
        assert len(lines) == 1 + 2 * 6


class TestClosedForms:
    def test_geocentric_identical(self):
        assert geocentric_angle(sat(10.0, 20.0), sat(10.0, 20.0)) == 0.0

    def test_geocentric_quarter_turn(self):
        assert geocentric_angle(sat(0.0, 0.0), sat(0.0, 90.0)) == pytest.approx(math.pi / 2, rel=1e-12)

    def test_geocentric_antipodal(self):
        assert geocentric_angle(sat(45.0, 0.0), sat(-45.0, 180.0)) == pytest.approx(math.pi, rel=1e-12)

    def test_los_collinear(self):
        d = los_distance_km(sat(0.0, 0.0, 500.0), sat(0.0, 0.0, 700.0))
        assert d == pytest.approx(200.0, rel=1e-12)

    def test_los_chord_oracle(self):
        # equal altitudes: chord = 2 (r_E + h) sin(phi / 2)
        u, v = sat(0.0, 0.0), sat(0.0, 60.0)
        chord = 2.0 * (C.earth_radius_km + 550.0) * math.sin(math.radians(60.0) / 2.0)
        assert los_distance_km(u, v) == pytest.approx(chord, rel=1e-12)
        assert chord == pytest.approx(6921.0, rel=1e-12)

    def test_los_planar_embedding_oracle(self):
        # independent evaluation: embed both satellites in their common plane
        for phi_deg, hu, hv in [(30.0, 550.0, 1200.0), (97.0, 300.0, 800.0)]:
            u, v = sat(0.0, 0.0, hu), sat(0.0, phi_deg, hv)
            ru, rv = C.earth_radius_km + hu, C.earth_radius_km + hv
            phi = math.radians(phi_deg)
            pu = np.array([ru, 0.0])
            pv = np.array([rv * math.cos(phi), rv * math.sin(phi)])
            assert los_distance_km(u, v) == pytest.approx(float(np.linalg.norm(pu - pv)), rel=1e-12)

    def test_max_slant_grazing(self):
        assert max_slant_range_km(0.0, 0.0) == 0.0

    def test_max_slant_tangent_oracle(self):
        # tangent length from a shell of radius r_E + h to the grazing point
        tangent = lambda h: math.sqrt((C.earth_radius_km + h) ** 2 - C.earth_radius_km**2)
        assert max_slant_range_km(550.0, 550.0) == pytest.approx(2 * tangent(550.0), rel=1e-12)
        assert max_slant_range_km(550.0, 1200.0) == pytest.approx(
            tangent(550.0) + tangent(1200.0), rel=1e-12
        )
        assert max_slant_range_km(550.0, 550.0) == pytest.approx(5407.6242473, rel=1e-9)
        assert max_slant_range_km(550.0, 1200.0) == pytest.approx(6794.0932876, rel=1e-9)

    def test_doppler_zero_relative_motion(self):
        u = sat(0.0, 0.0, vel=(1.0, 2.0, 3.0))
        v = sat(0.0, 10.0, vel=(1.0, 2.0, 3.0))
        assert doppler_shift_hz(u, v, 2.4e9) == 0.0

    @pytest.mark.parametrize("speed,expected", [(7.5, 60e3), (14.0, 112e3)])
    def test_doppler_along_los(self, speed, expected):
        constants = GeometryConstants(light_speed_km_s=3e5)
        u = sat(0.0, 0.0)
        v = sat(0.0, 10.0)
        pu = np.array(position_vector_km(u, constants))
        pv = np.array(position_vector_km(v, constants))
        direction = (pu - pv) / np.linalg.norm(pu - pv)
        u = sat(0.0, 0.0, vel=tuple(speed * direction))
        assert doppler_shift_hz(u, v, 2.4e9, constants) == pytest.approx(expected, rel=1e-12)

    def test_doppler_coincident_positions(self):
        with pytest.raises(ValueError):
            doppler_shift_hz(sat(1.0, 2.0), sat(1.0, 2.0), 2.4e9)

    def test_relative_speed_projected_leq_raw(self):
        u = sat(10.0, 0.0, vel=(3.0, -1.0, 2.0))
        v = sat(0.0, 40.0, vel=(-2.0, 5.0, 0.5))
        projected, raw = relative_speed_km_s(u, v)
        assert 0.0 <= projected <= raw + 1e-15


@settings(max_examples=60, deadline=None)
@given(
    lat_u=st.floats(-90, 90), lon_u=st.floats(-180, 180),
    lat_v=st.floats(-90, 90), lon_v=st.floats(-180, 180),
    h_u=st.floats(200, 2000), h_v=st.floats(200, 2000),
)
def test_symmetry_and_triangle_bounds(lat_u, lon_u, lat_v, lon_v, h_u, h_v):
    u = sat(lat_u, lon_u, h_u, vel=(1.0, 0.0, 0.0))
    v = sat(lat_v, lon_v, h_v, vel=(0.0, 1.0, 0.0))
    assert geocentric_angle(u, v) == geocentric_angle(v, u)
    assert 0.0 <= geocentric_angle(u, v) <= math.pi
    d_uv, d_vu = los_distance_km(u, v), los_distance_km(v, u)
    assert d_uv == d_vu
    assert d_uv <= (2 * C.earth_radius_km + h_u + h_v) + 1e-9
    assert d_uv >= abs(h_u - h_v) - 1e-9
    if d_uv > 0:
        assert doppler_shift_hz(u, v, 2.4e9) == doppler_shift_hz(v, u, 2.4e9)
