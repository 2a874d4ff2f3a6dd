"""Walker constellation construction and closed-form inter-satellite geometry.

Positions are propagated on Keplerian circular orbits around a spherical
Earth (no J2, no drag). Latitude/longitude are geocentric coordinates in the
inertial frame; only relative geometry between satellites is ever consumed,
so Earth rotation is irrelevant here.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .errors import ConfigurationError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class GeometryConstants:
    """Physical constants in km / s units, overridable per run."""

    earth_radius_km: float = 6371.0
    mu_km3_s2: float = 398600.4418
    light_speed_km_s: float = 299792.458

    def __post_init__(self):
        if min(self.earth_radius_km, self.mu_km3_s2, self.light_speed_km_s) <= 0:
            raise ConfigurationError("geometry constants must be strictly positive")


DEFAULT_CONSTANTS = GeometryConstants()


@dataclass(frozen=True)
class ConstellationSpec:
    """Walker pattern T/P/F: `total_satellites` in `planes` evenly spaced planes.

    `pattern` controls the RAAN spread of the planes: "star" spreads them
    over 180 degrees, "delta" over 360 degrees. `phasing` is the integer F
    of the i:T/P/F convention; adjacent planes are offset in argument of
    latitude by F * 360 / T degrees.
    """

    total_satellites: int
    planes: int
    phasing: int
    inclination_deg: float
    altitude_km: float
    pattern: str = "delta"

    def __post_init__(self):
        if self.planes < 1:
            raise ConfigurationError("planes must be >= 1")
        if self.total_satellites < 1 or self.total_satellites % self.planes != 0:
            raise ConfigurationError(
                f"total_satellites ({self.total_satellites}) must be a positive "
                f"multiple of planes ({self.planes})"
            )
        if self.altitude_km <= 0:
            raise ConfigurationError("altitude_km must be > 0")
        if not 0.0 <= self.inclination_deg <= 180.0:
            raise ConfigurationError("inclination_deg must lie in [0, 180]")
        if self.pattern not in ("star", "delta"):
            raise ConfigurationError(f"unknown pattern {self.pattern!r} (star|delta)")

    @property
    def satellites_per_plane(self) -> int:
        return self.total_satellites // self.planes


@dataclass(frozen=True)
class SatelliteState:
    """Position (geocentric lat/lon/alt) and inertial velocity of one satellite."""

    plane_index: int
    slot_index: int
    latitude_deg: float
    longitude_deg: float
    altitude_km: float
    velocity_km_s: tuple[float, float, float]

    def __post_init__(self):
        if not -90.0 <= self.latitude_deg <= 90.0:
            raise ValueError(f"latitude {self.latitude_deg} outside [-90, 90]")
        if not -180.0 < self.longitude_deg <= 180.0:
            raise ValueError(f"longitude {self.longitude_deg} outside (-180, 180]")


def orbital_period_s(altitude_km: float, constants: GeometryConstants = DEFAULT_CONSTANTS) -> float:
    """Circular-orbit period 2*pi*sqrt(a^3/mu) with a = r_E + h."""
    a = constants.earth_radius_km + altitude_km
    return TWO_PI * math.sqrt(a**3 / constants.mu_km3_s2)


def build_walker(
    spec: ConstellationSpec,
    t: float = 0.0,
    constants: GeometryConstants = DEFAULT_CONSTANTS,
) -> list[SatelliteState]:
    """Propagate the Walker constellation to time `t` (seconds).

    Satellites within a plane are spaced 360/K degrees apart in argument of
    latitude; positions follow uniform circular motion at the mean motion of
    the shared orbit altitude.
    """
    a = constants.earth_radius_km + spec.altitude_km
    n = math.sqrt(constants.mu_km3_s2 / a**3)  # rad/s
    speed = a * n
    inc = math.radians(spec.inclination_deg)
    cos_i, sin_i = math.cos(inc), math.sin(inc)
    raan_span = math.pi if spec.pattern == "star" else TWO_PI

    states = []
    for i in range(spec.planes):
        raan = raan_span * i / spec.planes
        cos_o, sin_o = math.cos(raan), math.sin(raan)
        for k in range(spec.satellites_per_plane):
            u = (
                TWO_PI * k / spec.satellites_per_plane
                + TWO_PI * spec.phasing * i / spec.total_satellites
                + n * t
            )
            cos_u, sin_u = math.cos(u), math.sin(u)
            # in-plane frame -> inertial: R_z(raan) @ R_x(inc)
            px = a * (cos_o * cos_u - sin_o * cos_i * sin_u)
            py = a * (sin_o * cos_u + cos_o * cos_i * sin_u)
            pz = a * (sin_i * sin_u)
            vx = speed * (-cos_o * sin_u - sin_o * cos_i * cos_u)
            vy = speed * (-sin_o * sin_u + cos_o * cos_i * cos_u)
            vz = speed * (sin_i * cos_u)

            lat = math.degrees(math.asin(max(-1.0, min(1.0, pz / a))))
            lon = math.degrees(math.atan2(py, px))
            if lon <= -180.0:
                lon += 360.0
            states.append(
                SatelliteState(
                    plane_index=i,
                    slot_index=k,
                    latitude_deg=lat,
                    longitude_deg=lon,
                    altitude_km=spec.altitude_km,
                    velocity_km_s=(vx, vy, vz),
                )
            )
    return states


def position_vector_km(
    state: SatelliteState, constants: GeometryConstants = DEFAULT_CONSTANTS
) -> tuple[float, float, float]:
    """Cartesian position reconstructed from geocentric lat/lon/alt."""
    r = constants.earth_radius_km + state.altitude_km
    lat = math.radians(state.latitude_deg)
    lon = math.radians(state.longitude_deg)
    return (
        r * math.cos(lat) * math.cos(lon),
        r * math.cos(lat) * math.sin(lon),
        r * math.sin(lat),
    )


def geocentric_angle(u: SatelliteState, v: SatelliteState) -> float:
    """Central angle (radians) between the two sub-satellite directions."""
    if u.latitude_deg == v.latitude_deg and u.longitude_deg == v.longitude_deg:
        return 0.0
    lat_u, lat_v = math.radians(u.latitude_deg), math.radians(v.latitude_deg)
    dlon = math.radians(u.longitude_deg - v.longitude_deg)
    c = math.sin(lat_u) * math.sin(lat_v) + math.cos(lat_u) * math.cos(lat_v) * math.cos(dlon)
    return math.acos(max(-1.0, min(1.0, c)))


def los_distance_km(
    u: SatelliteState, v: SatelliteState, constants: GeometryConstants = DEFAULT_CONSTANTS
) -> float:
    """Line-of-sight distance via the law of cosines on the geocentric angle."""
    hu = constants.earth_radius_km + u.altitude_km
    hv = constants.earth_radius_km + v.altitude_km
    phi = geocentric_angle(u, v)
    return math.sqrt(max(0.0, hu * hu + hv * hv - 2.0 * hu * hv * math.cos(phi)))


def max_slant_range_km(
    altitude_u_km: float,
    altitude_v_km: float,
    constants: GeometryConstants = DEFAULT_CONSTANTS,
) -> float:
    """Longest Earth-grazing chord between the two orbit shells."""
    r = constants.earth_radius_km
    return math.sqrt(altitude_u_km * (altitude_u_km + 2.0 * r)) + math.sqrt(
        altitude_v_km * (altitude_v_km + 2.0 * r)
    )


def relative_speed_km_s(
    u: SatelliteState, v: SatelliteState, constants: GeometryConstants = DEFAULT_CONSTANTS
) -> tuple[float, float]:
    """(line-of-sight projected, unprojected) relative speed between u and v.

    The projected value drives the Doppler shift; the raw magnitude is kept
    for debug output. Raises ValueError for coincident positions, where the
    line of sight is undefined.
    """
    pu = position_vector_km(u, constants)
    pv = position_vector_km(v, constants)
    d = (pu[0] - pv[0], pu[1] - pv[1], pu[2] - pv[2])
    dist = math.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2)
    if dist == 0.0:
        raise ValueError("coincident satellite positions: line of sight undefined")
    rv = (
        u.velocity_km_s[0] - v.velocity_km_s[0],
        u.velocity_km_s[1] - v.velocity_km_s[1],
        u.velocity_km_s[2] - v.velocity_km_s[2],
    )
    raw = math.sqrt(rv[0] ** 2 + rv[1] ** 2 + rv[2] ** 2)
    projected = abs(rv[0] * d[0] + rv[1] * d[1] + rv[2] * d[2]) / dist
    return projected, raw


def doppler_shift_hz(
    u: SatelliteState,
    v: SatelliteState,
    carrier_frequency_hz: float,
    constants: GeometryConstants = DEFAULT_CONSTANTS,
) -> float:
    """|relative speed along the line of sight| * f_c / c, always >= 0."""
    projected, _ = relative_speed_km_s(u, v, constants)
    return projected * carrier_frequency_hz / constants.light_speed_km_s


def write_positions_csv(
    path,
    spec: ConstellationSpec,
    timestamps: list[float],
    constants: GeometryConstants = DEFAULT_CONSTANTS,
) -> None:
    """Dump (plane, slot, t, lat, lon, alt) rows for every sampled timestamp."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["plane", "slot", "t_s", "latitude_deg", "longitude_deg", "altitude_km"])
        for t in timestamps:
            for s in build_walker(spec, t, constants):
                writer.writerow(
                    [s.plane_index, s.slot_index, repr(t), repr(s.latitude_deg), repr(s.longitude_deg), repr(s.altitude_km)]
                )
