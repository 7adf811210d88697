"""WGS84 <-> UTM conversion in a fixed zone, plus the planar bounding box.

The projection is the standard transverse Mercator series expansion
parameterized by the first eccentricity (Snyder, "Map Projections - A
Working Manual", USGS PP 1395, eqs. 8-9..8-25), accurate to well under a
meter anywhere inside a zone. Everything downstream works in kilometers in
one fixed zone; Porto sits entirely in zone 29N.

Both directions accept scalars or numpy arrays and are vectorized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = ["BoundingBox", "UtmConverter"]

_K0 = 0.9996
_R = 6378137.0  # WGS84 semi-major axis, meters
_F = 1.0 / 298.257223563
_E = _F * (2.0 - _F)  # first eccentricity squared
_E2 = _E * _E
_E3 = _E2 * _E
_E_P2 = _E / (1.0 - _E)

_SQRT_E = math.sqrt(1.0 - _E)
_E1 = (1.0 - _SQRT_E) / (1.0 + _SQRT_E)
_E1_2 = _E1 * _E1
_E1_3 = _E1_2 * _E1
_E1_4 = _E1_3 * _E1
_E1_5 = _E1_4 * _E1

_M1 = 1.0 - _E / 4.0 - 3.0 * _E2 / 64.0 - 5.0 * _E3 / 256.0
_M2 = 3.0 * _E / 8.0 + 3.0 * _E2 / 32.0 + 45.0 * _E3 / 1024.0
_M3 = 15.0 * _E2 / 256.0 + 45.0 * _E3 / 1024.0
_M4 = 35.0 * _E3 / 3072.0

_P2 = 3.0 / 2.0 * _E1 - 27.0 / 32.0 * _E1_3 + 269.0 / 512.0 * _E1_5
_P3 = 21.0 / 16.0 * _E1_2 - 55.0 / 32.0 * _E1_4
_P4 = 151.0 / 96.0 * _E1_3 - 417.0 / 128.0 * _E1_5
_P5 = 1097.0 / 512.0 * _E1_4


class UtmConverter:
    """Projects WGS84 degrees to a fixed UTM zone and back, in kilometers."""

    def __init__(self, zone: int, northern: bool = True):
        if not (isinstance(zone, int) and 1 <= zone <= 60):
            raise ConfigError(f"UTM zone must be an integer in [1, 60], got {zone}")
        self.zone = zone
        self.northern = northern
        self._central = math.radians(zone * 6 - 183)

    def lonlat_to_km(self, lon, lat):
        """(lon, lat) degrees -> (x, y) kilometers of easting/northing."""
        lat_rad = np.radians(np.asarray(lat, dtype=np.float64))
        lon_rad = np.radians(np.asarray(lon, dtype=np.float64))
        sin_lat = np.sin(lat_rad)
        cos_lat = np.cos(lat_rad)
        tan_lat = sin_lat / cos_lat

        n = _R / np.sqrt(1.0 - _E * sin_lat * sin_lat)
        c = _E_P2 * cos_lat * cos_lat
        t = tan_lat * tan_lat
        a = cos_lat * (lon_rad - self._central)
        a2 = a * a
        a3 = a2 * a
        a4 = a3 * a
        a5 = a4 * a
        a6 = a5 * a

        m = _R * (
            _M1 * lat_rad
            - _M2 * np.sin(2.0 * lat_rad)
            + _M3 * np.sin(4.0 * lat_rad)
            - _M4 * np.sin(6.0 * lat_rad)
        )
        easting = (
            _K0
            * n
            * (
                a
                + a3 / 6.0 * (1.0 - t + c)
                + a5 / 120.0 * (5.0 - 18.0 * t + t * t + 72.0 * c - 58.0 * _E_P2)
            )
            + 500000.0
        )
        northing = _K0 * (
            m
            + n
            * tan_lat
            * (
                a2 / 2.0
                + a4 / 24.0 * (5.0 - t + 9.0 * c + 4.0 * c * c)
                + a6 / 720.0 * (61.0 - 58.0 * t + t * t + 600.0 * c - 330.0 * _E_P2)
            )
        )
        if not self.northern:
            northing = northing + 10000000.0
        return easting / 1000.0, northing / 1000.0

    def km_to_lonlat(self, x_km, y_km):
        """(x, y) kilometers of easting/northing -> (lon, lat) degrees."""
        x = np.asarray(x_km, dtype=np.float64) * 1000.0 - 500000.0
        y = np.asarray(y_km, dtype=np.float64) * 1000.0
        if not self.northern:
            y = y - 10000000.0

        m = y / _K0
        mu = m / (_R * _M1)
        p_rad = (
            mu
            + _P2 * np.sin(2.0 * mu)
            + _P3 * np.sin(4.0 * mu)
            + _P4 * np.sin(6.0 * mu)
            + _P5 * np.sin(8.0 * mu)
        )
        p_sin = np.sin(p_rad)
        p_cos = np.cos(p_rad)
        p_tan = p_sin / p_cos

        ep_sin = 1.0 - _E * p_sin * p_sin
        ep_sin_sqrt = np.sqrt(ep_sin)
        n = _R / ep_sin_sqrt
        r = (1.0 - _E) / ep_sin  # R1 / N1

        t = p_tan * p_tan
        t2 = t * t
        c = _E_P2 * p_cos * p_cos
        c2 = c * c

        d = x / (n * _K0)
        d2 = d * d
        d3 = d2 * d
        d4 = d3 * d
        d5 = d4 * d
        d6 = d5 * d

        lat_rad = p_rad - (p_tan / r) * (
            d2 / 2.0
            - d4 / 24.0 * (5.0 + 3.0 * t + 10.0 * c - 4.0 * c2 - 9.0 * _E_P2)
            + d6 / 720.0 * (61.0 + 90.0 * t + 298.0 * c + 45.0 * t2 - 252.0 * _E_P2 - 3.0 * c2)
        )
        lon_rad = self._central + (
            d
            - d3 / 6.0 * (1.0 + 2.0 * t + c)
            + d5 / 120.0 * (5.0 - 2.0 * c + 28.0 * t - 3.0 * c2 + 8.0 * _E_P2 + 24.0 * t2)
        ) / p_cos
        return np.degrees(lon_rad), np.degrees(lat_rad)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned planar box in projected kilometers."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ConfigError(
                f"degenerate bounding box [{self.x_min}, {self.x_max}] x "
                f"[{self.y_min}, {self.y_max}]"
            )

    @classmethod
    def from_degrees(
        cls, converter: UtmConverter, west: float, south: float, east: float, north: float
    ) -> "BoundingBox":
        """Axis-aligned km hull covering the four corners of a degree box."""
        lons = np.array([west, east, west, east])
        lats = np.array([south, south, north, north])
        xs, ys = converter.lonlat_to_km(lons, lats)
        return cls(float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max()))

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.x_max - self.x_min, self.y_max - self.y_min)
