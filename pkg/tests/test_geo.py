import json
import math

import numpy as np
import pytest

from gridsight.geo import (
    EARTH_RADIUS_M,
    FixtureProvider,
    ImageRequest,
    ProviderConfigError,
    ProviderError,
    StreetSpec,
    fetch_images,
    interpolate_street,
    street_length_m,
)


def haversine_m(a, b):
    """Great-circle distance oracle."""
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    dlat, dlon = lat2 - lat1, lon2 - lon1
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(h))


def initial_bearing_deg(a, b):
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    dlon = lon2 - lon1
    x = math.sin(dlon) * math.cos(lat2)
    y = math.cos(lat1) * math.sin(lat2) - math.sin(lat1) * math.cos(lat2) * math.cos(dlon)
    return math.degrees(math.atan2(x, y)) % 360.0


class TestInterpolation:
    def test_degenerate_street_single_point(self):
        spec = StreetSpec(start=(37.4, -122.1), end=(37.4, -122.1), interval=10)
        points = interpolate_street(spec)
        assert len(points) == 1
        assert points[0].lat == 37.4 and points[0].lon == -122.1

    def test_one_km_north(self):
        lat0 = 37.0
        dlat = 1000.0 / (math.pi * EARTH_RADIUS_M / 180.0)
        spec = StreetSpec(start=(lat0, -122.0), end=(lat0 + dlat, -122.0), interval=100.0)
        points = interpolate_street(spec)
        assert len(points) == 11
        for p in points:
            assert abs(p.heading - 0.0) <= 0.1 or abs(p.heading - 360.0) <= 0.1

    def test_one_km_east_at_equator(self):
        dlon = 1000.0 / (math.pi * EARTH_RADIUS_M / 180.0)
        spec = StreetSpec(start=(0.0, 10.0), end=(0.0, 10.0 + dlon), interval=100.0)
        points = interpolate_street(spec)
        assert len(points) == 11
        for p in points:
            assert abs(p.heading - 90.0) <= 0.1

    def test_spacing_against_haversine_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            lat0 = float(rng.uniform(-60, 60))
            lon0 = float(rng.uniform(-179, 179))
            bearing = rng.uniform(0, 2 * math.pi)
            dist = float(rng.uniform(200, 5000))
            dlat = dist * math.cos(bearing) / (math.pi * EARTH_RADIUS_M / 180)
            dlon = dist * math.sin(bearing) / (math.pi * EARTH_RADIUS_M / 180) / math.cos(math.radians(lat0))
            interval = float(rng.uniform(20, 120))
            spec = StreetSpec(start=(lat0, lon0), end=(lat0 + dlat, lon0 + dlon), interval=interval)
            points = interpolate_street(spec)

            for a, b in zip(points[:-1], points[1:]):
                gap = haversine_m((a.lat, a.lon), (b.lat, b.lon))
                # the final gap may be the short leg to the appended endpoint
                assert gap <= interval + 1.0
            for a, b in zip(points[:-2], points[1:-1]):
                gap = haversine_m((a.lat, a.lon), (b.lat, b.lon))
                assert abs(gap - interval) <= 1.0

    def test_point_count_formula_exact(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            lat0 = float(rng.uniform(-50, 50))
            spec = StreetSpec(
                start=(lat0, 20.0),
                end=(lat0 + rng.uniform(0.001, 0.04), 20.0 + rng.uniform(0.0, 0.02)),
                interval=float(rng.uniform(10, 80)),
            )
            d = street_length_m(spec)
            base = math.floor(d / spec.interval) + 1
            extra = 1 if d - (base - 1) * spec.interval > spec.interval / 2 else 0
            assert len(interpolate_street(spec)) == base + extra

    def test_headings_follow_trajectory_against_bearing_oracle(self):
        spec = StreetSpec(start=(37.0, -122.0), end=(37.02, -121.97), interval=150.0)
        points = interpolate_street(spec)
        want = initial_bearing_deg(spec.start, spec.end)
        for p in points:
            assert abs(p.heading - want) <= 0.5

    def test_fixed_heading_mode(self):
        spec = StreetSpec(start=(37.0, -122.0), end=(37.01, -122.0), interval=200.0)
        points = interpolate_street(spec, fixed_heading=0.0)
        assert all(p.heading == 0.0 for p in points)

    def test_invalid_coordinates_rejected(self):
        with pytest.raises(ValueError):
            StreetSpec(start=(91.0, 0.0), end=(0.0, 0.0), interval=5)
        with pytest.raises(ValueError):
            StreetSpec(start=(float("nan"), 0.0), end=(0.0, 0.0), interval=5)


class TestImageRequest:
    def test_fov_bounds(self):
        with pytest.raises(ValueError):
            ImageRequest(lat=0, lon=0, fov=150)

    def test_heading_wraps(self):
        assert ImageRequest(lat=0, lon=0, heading=370.0).heading == pytest.approx(10.0)

    def test_size_cap(self):
        with pytest.raises(ValueError):
            ImageRequest(lat=0, lon=0, width=1024)


class FlakyProvider:
    """Fails on chosen request indices, otherwise returns tiny PNG bytes."""

    PNG = bytes.fromhex("89504e470d0a1a0a0000000d49484452000000010000000108020000009077"
                        "53de0000000c4944415408d763f8cfc0000000030001a5f645400000000049454e44ae426082")

    def __init__(self, fail_at=()):
        self.fail_at = set(fail_at)
        self.calls = 0

    def fetch(self, request):
        idx = self.calls
        self.calls += 1
        if idx in self.fail_at:
            raise ProviderError("synthetic outage")
        return self.PNG + idx.to_bytes(2, "little")  # unique content per request


class TestFetch:
    def _requests(self, n):
        return [ImageRequest(lat=37.0 + i * 1e-4, lon=-122.0, heading=10.0 * i) for i in range(n)]

    def test_fixture_provider_rows_match_geotags(self, tmp_path):
        fixtures = []
        for i in range(5):
            p = tmp_path / f"fix{i}.png"
            p.write_bytes(FlakyProvider.PNG + bytes([i]))
            fixtures.append(p)
        provider = FixtureProvider(fixtures)
        reqs = self._requests(5)
        report = fetch_images(provider, reqs, tmp_path / "out", label=1, jobs=1)
        assert len(report.records) == 5
        assert not report.failures
        from pathlib import Path

        for req, rec in zip(reqs, report.records):
            assert rec.lat == req.lat and rec.lon == req.lon
            assert rec.label == 1
            assert Path(rec.path).exists()

    def test_partial_failures_reported(self, tmp_path):
        provider = FlakyProvider(fail_at={2, 7})
        report = fetch_images(provider, self._requests(10), tmp_path, jobs=1)
        assert len(report.records) == 8
        assert sorted(f["request_index"] for f in report.failures) == [2, 7]

    def test_identical_request_idempotent(self, tmp_path):
        provider = FixtureProvider([self._write_fixture(tmp_path)])
        req = ImageRequest(lat=37.5, lon=-122.5, heading=0.0)
        report = fetch_images(provider, [req, req, req], tmp_path / "imgs", jobs=1)
        assert len(report.records) == 1
        files = list((tmp_path / "imgs").glob("*.png"))
        assert len(files) == 1

    def _write_fixture(self, tmp_path):
        p = tmp_path / "fixture.png"
        p.write_bytes(FlakyProvider.PNG)
        return p

    def test_manifest_rows_schema_valid(self, tmp_path):
        from gridsight.manifest import read_manifest, write_manifest

        provider = FixtureProvider([self._write_fixture(tmp_path)])
        report = fetch_images(provider, self._requests(3), tmp_path / "o", jobs=1)
        manifest = tmp_path / "manifest.jsonl"
        write_manifest(manifest, report.records)
        back = read_manifest(manifest)
        assert [r.id for r in back] == [r.id for r in report.records]
        for line in manifest.read_text().splitlines():
            row = json.loads(line)
            assert set(row) == {"id", "path", "lat", "lon", "heading", "pitch", "fov", "label", "flipped", "split"}

    def test_config_error_surfaces_immediately(self, tmp_path):
        class BadAuth:
            def fetch(self, request):
                raise ProviderConfigError("bad key")

        with pytest.raises(ProviderConfigError):
            fetch_images(BadAuth(), self._requests(2), tmp_path, jobs=1)

    def test_concurrent_fetch_complete(self, tmp_path):
        provider = FlakyProvider()
        report = fetch_images(provider, self._requests(12), tmp_path, jobs=4)
        assert len(report.records) == 12
