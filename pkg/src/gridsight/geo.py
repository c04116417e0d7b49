"""Street trajectory interpolation and image acquisition.

Geometry uses an equirectangular approximation (streets are far shorter than
50 km, where the error against true geodesics stays below 0.1%).  Image
providers are pluggable: a live HTTP client and a file-fixture provider share
one interface so the pipeline and its tests never need network access.
"""

import hashlib
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .manifest import SampleRecord


def _try_fetch(provider, request):
    try:
        return provider.fetch(request)
    except (ProviderError, ProviderConfigError) as exc:
        return exc

EARTH_RADIUS_M = 6_371_000.0


@dataclass
class StreetSpec:
    start: tuple[float, float]  # (lat, lon) degrees
    end: tuple[float, float]
    interval: float = 10.0  # meters
    label: int = 0

    def __post_init__(self):
        for lat, lon in (self.start, self.end):
            if not (math.isfinite(lat) and math.isfinite(lon)):
                raise ValueError("street endpoints must be finite")
            if abs(lat) > 90 or abs(lon) > 180:
                raise ValueError(f"coordinates out of range: ({lat}, {lon})")
        if self.interval <= 0:
            raise ValueError("sampling interval must be positive")


@dataclass
class ImageRequest:
    lat: float
    lon: float
    heading: float = 0.0
    pitch: float = 0.0
    fov: float = 90.0
    width: int = 640
    height: int = 640

    def __post_init__(self):
        if not (0 < self.fov <= 120):
            raise ValueError("field of view must lie in (0, 120]")
        if self.width > 640 or self.height > 640:
            raise ValueError("maximum request size is 640x640")
        self.heading = self.heading % 360.0


def _local_meters(origin_lat: float):
    """Meters per degree of latitude and longitude near a latitude."""
    m_per_deg_lat = math.pi * EARTH_RADIUS_M / 180.0
    m_per_deg_lon = m_per_deg_lat * math.cos(math.radians(origin_lat))
    return m_per_deg_lat, m_per_deg_lon


def street_length_m(spec: StreetSpec) -> float:
    m_lat, m_lon = _local_meters((spec.start[0] + spec.end[0]) / 2.0)
    dy = (spec.end[0] - spec.start[0]) * m_lat
    dx = (spec.end[1] - spec.start[1]) * m_lon
    return math.hypot(dx, dy)


def _bearing_deg(dx_east: float, dy_north: float) -> float:
    return math.degrees(math.atan2(dx_east, dy_north)) % 360.0


def interpolate_street(spec: StreetSpec, fixed_heading: float | None = None) -> list[ImageRequest]:
    """Sample points every `interval` meters from start toward end.

    The end point is appended when it sits more than interval/2 beyond the
    last regular sample.  Headings follow the travel direction (the bearing
    to the next point; the final point inherits its predecessor's), unless a
    fixed heading is requested.
    """
    lat0, lon0 = spec.start
    lat1, lon1 = spec.end
    m_lat, m_lon = _local_meters((lat0 + lat1) / 2.0)
    dy = (lat1 - lat0) * m_lat
    dx = (lon1 - lon0) * m_lon
    dist = math.hypot(dx, dy)

    if dist == 0.0:
        heading = fixed_heading if fixed_heading is not None else 0.0
        return [ImageRequest(lat=lat0, lon=lon0, heading=heading)]

    n_regular = int(math.floor(dist / spec.interval)) + 1
    fractions = [i * spec.interval / dist for i in range(n_regular)]
    if dist - (n_regular - 1) * spec.interval > spec.interval / 2.0:
        fractions.append(1.0)

    points = [(lat0 + f * (lat1 - lat0), lon0 + f * (lon1 - lon0)) for f in fractions]
    # a street is one straight segment, so the point-to-next bearing is the
    # travel bearing everywhere and the last point inherits it unchanged
    heading = fixed_heading if fixed_heading is not None else _bearing_deg(dx, dy)
    return [ImageRequest(lat=lat, lon=lon, heading=heading) for lat, lon in points]


# ---------------------------------------------------------------------------
# providers


class ProviderError(Exception):
    """A single request failed; fetch records it and moves on."""


class ProviderConfigError(Exception):
    """Authentication or configuration problems; fetch aborts immediately."""


class FixtureProvider:
    """Serves canned image files, cycling through them per request."""

    def __init__(self, paths):
        self.paths = [Path(p) for p in paths]
        if not self.paths:
            raise ProviderConfigError("fixture provider needs at least one file")
        self._cursor = 0
        self._lock = threading.Lock()

    def fetch(self, request: ImageRequest) -> bytes:
        with self._lock:
            path = self.paths[self._cursor % len(self.paths)]
            self._cursor += 1
        try:
            return path.read_bytes()
        except OSError as exc:
            raise ProviderError(f"fixture {path} unreadable: {exc}") from exc


class HttpProvider:
    """Minimal street-imagery HTTP client.

    The API key is read from the environment variable named in the config
    and is never logged or echoed back in errors.
    """

    def __init__(self, base_url: str, api_key_env: str = "STREET_IMAGERY_KEY", timeout: float = 10.0):
        if not base_url:
            raise ProviderConfigError("base_url is required")
        key = os.environ.get(api_key_env, "")
        if not key:
            raise ProviderConfigError(f"environment variable {api_key_env} is not set")
        self.base_url = base_url
        self._key = key
        self.timeout = timeout

    def fetch(self, request: ImageRequest) -> bytes:
        import requests as http

        params = {
            "location": f"{request.lat:.7f},{request.lon:.7f}",
            "heading": f"{request.heading:.2f}",
            "pitch": f"{request.pitch:.2f}",
            "fov": f"{request.fov:.1f}",
            "size": f"{request.width}x{request.height}",
            "key": self._key,
        }
        try:
            resp = http.get(self.base_url, params=params, timeout=self.timeout)
        except http.RequestException as exc:
            raise ProviderError(f"request failed: {type(exc).__name__}") from exc
        if resp.status_code in (401, 403):
            raise ProviderConfigError(f"provider rejected credentials (HTTP {resp.status_code})")
        if resp.status_code != 200:
            raise ProviderError(f"HTTP {resp.status_code}")
        return resp.content


@dataclass
class FetchReport:
    records: list[SampleRecord] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)


def fetch_images(provider, requests: list[ImageRequest], out_dir, label: int = 0, jobs: int = 4) -> FetchReport:
    """Download one image per request into out_dir and build manifest rows.

    Requests run on up to `jobs` worker threads; the manifest is assembled
    afterward in request order by a single writer.  File names embed the
    geotag and a content hash, so re-fetching identical imagery is
    idempotent: the same file is reused and no duplicate manifest row is
    emitted.  Per-request failures are collected, not fatal.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = FetchReport()
    seen_ids: set[str] = set()

    results: list = [None] * len(requests)
    if jobs <= 1 or len(requests) <= 1:
        for idx, req in enumerate(requests):
            results[idx] = _try_fetch(provider, req)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_try_fetch, provider, req): idx for idx, req in enumerate(requests)}
            for fut in futures:
                results[futures[fut]] = fut.result()

    for idx, (req, outcome) in enumerate(zip(requests, results)):
        if isinstance(outcome, Exception):
            if isinstance(outcome, ProviderConfigError):
                raise outcome
            report.failures.append({"request_index": idx, "lat": req.lat, "lon": req.lon, "error": str(outcome)})
            continue
        payload = outcome
        digest = hashlib.sha1(payload).hexdigest()[:10]
        sample_id = f"sv_{req.lat:.6f}_{req.lon:.6f}_h{req.heading:05.1f}_{digest}"
        if sample_id in seen_ids:
            continue
        seen_ids.add(sample_id)
        suffix = ".png" if payload[:8] == b"\x89PNG\r\n\x1a\n" else ".jpg"
        path = out_dir / f"{sample_id}{suffix}"
        if not path.exists():
            path.write_bytes(payload)
        report.records.append(
            SampleRecord(
                id=sample_id,
                path=str(path),
                lat=req.lat,
                lon=req.lon,
                heading=req.heading,
                pitch=req.pitch,
                fov=req.fov,
                label=label,
            )
        )
    return report
