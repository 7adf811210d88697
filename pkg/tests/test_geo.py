import numpy as np
import pytest
from hypothesis import given, strategies as st

import geodesy_oracle as oracle
from citygwr.errors import ConfigError
from citygwr.geo import BoundingBox, UtmConverter

# Frozen with the independent oracle before the implementation was written:
# oracle.latlon_to_utm(41.1579, -8.6291, 29)
PORTO_REF_LONLAT = (-8.6291, 41.1579)
PORTO_REF_EASTING_M = 531118.7262369456
PORTO_REF_NORTHING_M = 4556351.990304532


def test_porto_reference_point():
    conv = UtmConverter(29)
    x_km, y_km = conv.lonlat_to_km(*PORTO_REF_LONLAT)
    assert abs(float(x_km) * 1000.0 - PORTO_REF_EASTING_M) < 0.5  # meters
    assert abs(float(y_km) * 1000.0 - PORTO_REF_NORTHING_M) < 0.5
    # coarse sanity on the advertised magnitudes
    assert float(x_km) == pytest.approx(530.0, abs=2.0)
    assert float(y_km) == pytest.approx(4557.0, abs=2.0)


def test_latitude_hundredth_degree_is_about_1_11_km():
    conv = UtmConverter(29)
    _, y1 = conv.lonlat_to_km(-8.61, 41.15)
    _, y2 = conv.lonlat_to_km(-8.61, 41.16)
    assert float(y2 - y1) == pytest.approx(1.1101283203810453, abs=1e-3)


def test_forward_agrees_with_oracle_on_grid():
    conv = UtmConverter(29)
    lats = np.linspace(40.8, 41.5, 8)
    lons = np.linspace(-8.9, -8.2, 8)
    for lat in lats:
        for lon in lons:
            x_km, y_km = conv.lonlat_to_km(lon, lat)
            e_ref, n_ref = oracle.latlon_to_utm(lat, lon, 29)
            assert abs(float(x_km) * 1000.0 - e_ref) < 0.05  # 5 cm
            assert abs(float(y_km) * 1000.0 - n_ref) < 0.05


def test_inverse_agrees_with_oracle_on_grid():
    conv = UtmConverter(29)
    for e in np.linspace(480000, 580000, 6):
        for n in np.linspace(4520000, 4600000, 6):
            lon, lat = conv.km_to_lonlat(e / 1000.0, n / 1000.0)
            lat_ref, lon_ref = oracle.utm_to_latlon(e, n, 29)
            assert abs(float(lat) - lat_ref) < 1e-7
            assert abs(float(lon) - lon_ref) < 1e-7


@given(
    lon=st.floats(min_value=-8.9, max_value=-8.2),
    lat=st.floats(min_value=40.8, max_value=41.5),
)
def test_roundtrip_within_bounding_box(lon, lat):
    conv = UtmConverter(29)
    x, y = conv.lonlat_to_km(lon, lat)
    lon2, lat2 = conv.km_to_lonlat(x, y)
    assert abs(float(lon2) - lon) < 1e-6
    assert abs(float(lat2) - lat) < 1e-6


def test_vectorized_matches_scalar():
    conv = UtmConverter(29)
    lons = np.array([-8.6291, -8.5, -8.8])
    lats = np.array([41.1579, 41.0, 41.3])
    xs, ys = conv.lonlat_to_km(lons, lats)
    for k in range(3):
        x, y = conv.lonlat_to_km(lons[k], lats[k])
        assert float(xs[k]) == float(x)
        assert float(ys[k]) == float(y)


def test_southern_hemisphere_roundtrip():
    conv = UtmConverter(33, northern=False)
    x, y = conv.lonlat_to_km(18.4, -33.9)  # Cape Town-ish
    lon, lat = conv.km_to_lonlat(x, y)
    assert float(lat) == pytest.approx(-33.9, abs=1e-6)
    assert float(lon) == pytest.approx(18.4, abs=1e-6)


def test_invalid_zone_rejected():
    with pytest.raises(ConfigError):
        UtmConverter(0)
    with pytest.raises(ConfigError):
        UtmConverter(61)


def test_bounding_box_from_degrees_and_contains():
    conv = UtmConverter(29)
    bbox = BoundingBox.from_degrees(conv, -8.80, 40.90, -8.30, 41.45)
    x, y = conv.lonlat_to_km(*PORTO_REF_LONLAT)
    assert bbox.contains(float(x), float(y))
    # the null island origin projects far outside greater Porto
    x0, y0 = conv.lonlat_to_km(0.0, 0.0)
    assert not bbox.contains(float(x0), float(y0))


def test_degenerate_bounding_box_rejected():
    with pytest.raises(ConfigError):
        BoundingBox(1.0, 1.0, 1.0, 2.0)
