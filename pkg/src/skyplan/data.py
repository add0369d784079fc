"""Topology and traffic ingestion, projection, and synthetic scenarios.

File formats (UTF-8, comma-separated, mandatory header row):

* ``topology.csv``: ``bs_id,lon,lat`` with unique integer ids and
  relative-degree coordinates.
* ``traffic.csv``: ``bs_id,day,hour,bytes`` with days starting at 1 and
  hours 1..24.  On load every entry is raised by a constant baseline so
  no station-hour has zero demand; cells absent from the file are
  filled with the baseline alone and counted in a gap report.

The real city-wide dataset this format mirrors is not bundled;
``synth_scenario`` generates statistically similar inputs (stations
drawn from a Gaussian mixture, day-periodic traffic with seeded noise)
and keeps the ground truth for use as test oracles.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ValidationError

DEFAULT_BASELINE_BYTES = 500.0
HOURS_PER_DAY = 24
METERS_PER_DEGREE = 111_319.49   # equatorial meters per degree of arc


@dataclass(frozen=True)
class BaseStation:
    id: int
    lon: float
    lat: float

    def __post_init__(self):
        if not (math.isfinite(self.lon) and math.isfinite(self.lat)):
            raise ValidationError(f"station {self.id}: coordinates must be finite")


@dataclass(frozen=True)
class Bounds:
    """Inclusive lon/lat rectangle."""

    lon_min: float
    lat_min: float
    lon_max: float
    lat_max: float

    def __post_init__(self):
        if self.lon_min > self.lon_max or self.lat_min > self.lat_max:
            raise ValidationError("bounds must satisfy min <= max per axis")

    @classmethod
    def from_string(cls, text: str) -> "Bounds":
        """Parse ``lon1,lat1,lon2,lat2`` (corners in either order)."""
        parts = text.split(",")
        if len(parts) != 4:
            raise ValidationError(f"bounds need 4 numbers, got {text!r}")
        try:
            lon1, lat1, lon2, lat2 = (float(p) for p in parts)
        except ValueError as exc:
            raise ValidationError(f"bad bounds {text!r}") from exc
        return cls(min(lon1, lon2), min(lat1, lat2), max(lon1, lon2), max(lat1, lat2))

    def contains(self, lon: float, lat: float) -> bool:
        return (self.lon_min <= lon <= self.lon_max
                and self.lat_min <= lat <= self.lat_max)


@dataclass
class TrafficMatrix:
    """Per-station, per-day, per-hour traffic amounts in bytes.

    ``values[s, d, h]`` is station ``station_ids[s]`` on day ``d+1`` at
    hour ``h+1``, baseline already included.  ``gaps`` lists the
    (bs_id, day, hour) cells that were absent from the source file.
    """

    station_ids: tuple[int, ...]
    values: np.ndarray
    baseline: float = 0.0
    gaps: list[tuple[int, int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = len(self.station_ids)
        if self.values.ndim != 3 or self.values.shape[0] != n \
                or self.values.shape[2] != HOURS_PER_DAY:
            raise ValidationError("values must be (n_stations, n_days, 24)")
        if np.any(self.values < 0):
            raise ValidationError("traffic amounts must be nonnegative")

    @property
    def n_days(self) -> int:
        return self.values.shape[1]

    @property
    def gap_count(self) -> int:
        return len(self.gaps)

    def index_of(self, bs_id: int) -> int:
        try:
            return self.station_ids.index(bs_id)
        except ValueError:
            raise ValidationError(f"unknown station id {bs_id}") from None


def _open_rows(path):
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    return fh


def load_topology(path) -> list[BaseStation]:
    """Read and validate a topology CSV; duplicate ids are rejected."""
    stations: list[BaseStation] = []
    seen: set[int] = set()
    with _open_rows(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["bs_id", "lon", "lat"]:
            raise ValidationError(f"{path}:1: expected header 'bs_id,lon,lat'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValidationError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                bs_id = int(row[0])
                lon, lat = float(row[1]), float(row[2])
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: malformed row {row!r}") from exc
            if bs_id in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate station id {bs_id}")
            seen.add(bs_id)
            stations.append(BaseStation(bs_id, lon, lat))
    return stations


def save_topology(stations, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bs_id", "lon", "lat"])
        for s in stations:
            writer.writerow([s.id, repr(float(s.lon)), repr(float(s.lat))])


def load_traffic(path, baseline: float = DEFAULT_BASELINE_BYTES,
                 station_ids=None, n_days: int | None = None,
                 ignore_unknown: bool = False) -> TrafficMatrix:
    """Read a traffic CSV into a dense matrix, adding ``baseline`` everywhere.

    With ``station_ids`` (e.g. from the topology) the matrix is aligned
    to exactly that id set; rows for other ids are rejected, or skipped
    when ``ignore_unknown`` is set (the case after an area filter).
    Without ``station_ids`` the ids found in the file define the
    matrix.  Cells with no source row hold the baseline alone and are
    reported as gaps.
    """
    if baseline < 0:
        raise ValidationError("baseline must be >= 0")
    entries: dict[tuple[int, int, int], float] = {}
    max_day = 0
    with _open_rows(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["bs_id", "day", "hour", "bytes"]:
            raise ValidationError(f"{path}:1: expected header 'bs_id,day,hour,bytes'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValidationError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                bs_id, day, hour = int(row[0]), int(row[1]), int(row[2])
                amount = float(row[3])
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: malformed row {row!r}") from exc
            if day < 1:
                raise ValidationError(f"{path}:{lineno}: day must be >= 1")
            if not 1 <= hour <= HOURS_PER_DAY:
                raise ValidationError(f"{path}:{lineno}: hour must be in 1..24")
            if amount < 0:
                raise ValidationError(f"{path}:{lineno}: negative bytes for station {bs_id}")
            key = (bs_id, day, hour)
            if key in entries:
                raise ValidationError(f"{path}:{lineno}: duplicate entry for {key}")
            entries[key] = amount
            max_day = max(max_day, day)

    if station_ids is None:
        ids = tuple(sorted({k[0] for k in entries}))
    else:
        ids = tuple(int(i) for i in station_ids)
        alien = {k[0] for k in entries} - set(ids)
        if alien:
            if not ignore_unknown:
                raise ValidationError(
                    f"{path}: traffic for unknown station ids {sorted(alien)}")
            entries = {k: v for k, v in entries.items() if k[0] not in alien}
            max_day = max((k[1] for k in entries), default=0)
    days = n_days if n_days is not None else max_day
    if days < 1:
        raise ValidationError(f"{path}: no traffic rows and no n_days given")

    index = {bs_id: i for i, bs_id in enumerate(ids)}
    values = np.full((len(ids), days, HOURS_PER_DAY), baseline, dtype=float)
    filled = np.zeros((len(ids), days, HOURS_PER_DAY), dtype=bool)
    for (bs_id, day, hour), amount in entries.items():
        if day > days:
            raise ValidationError(f"{path}: day {day} exceeds n_days={days}")
        values[index[bs_id], day - 1, hour - 1] = amount + baseline
        filled[index[bs_id], day - 1, hour - 1] = True

    gaps = [
        (ids[s], d + 1, h + 1)
        for s, d, h in zip(*np.nonzero(~filled))
    ]
    return TrafficMatrix(station_ids=ids, values=values, baseline=baseline, gaps=gaps)


def save_traffic(matrix: TrafficMatrix, path) -> None:
    """Write every cell of the matrix as stored (baseline included).

    Loading the result with ``baseline=0`` reproduces the matrix
    losslessly.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bs_id", "day", "hour", "bytes"])
        for s, bs_id in enumerate(matrix.station_ids):
            for d in range(matrix.n_days):
                for h in range(HOURS_PER_DAY):
                    writer.writerow([bs_id, d + 1, h + 1, repr(float(matrix.values[s, d, h]))])


def write_gap_report(matrix: TrafficMatrix, path) -> None:
    lines = [f"gaps {matrix.gap_count}"]
    for bs_id, day, hour in sorted(matrix.gaps):
        lines.append(f"{bs_id},{day},{hour}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def filter_area(stations, bounds: Bounds) -> list[BaseStation]:
    """Stations inside or on the boundary of the rectangle."""
    return [s for s in stations if bounds.contains(s.lon, s.lat)]


def mean_reference(stations) -> tuple[float, float]:
    if not stations:
        raise ValidationError("cannot take a reference of zero stations")
    return (sum(s.lon for s in stations) / len(stations),
            sum(s.lat for s in stations) / len(stations))


def project_to_meters(stations, reference: tuple[float, float]) -> np.ndarray:
    """Equirectangular projection: meters east/north of the reference point."""
    if len(stations) == 0:
        raise ValidationError("cannot project zero stations")
    ref_lon, ref_lat = reference
    cos_lat = math.cos(math.radians(ref_lat))
    out = np.empty((len(stations), 2))
    for i, s in enumerate(stations):
        out[i, 0] = (s.lon - ref_lon) * cos_lat * METERS_PER_DEGREE
        out[i, 1] = (s.lat - ref_lat) * METERS_PER_DEGREE
    return out


def unproject_from_meters(xy: np.ndarray, reference: tuple[float, float]) -> np.ndarray:
    """Inverse of ``project_to_meters``; returns (N, 2) lon/lat degrees."""
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    ref_lon, ref_lat = reference
    cos_lat = math.cos(math.radians(ref_lat))
    out = np.empty_like(xy)
    out[:, 0] = ref_lon + xy[:, 0] / (cos_lat * METERS_PER_DEGREE)
    out[:, 1] = ref_lat + xy[:, 1] / METERS_PER_DEGREE
    return out


# ---------------------------------------------------------------------------
# Synthetic scenarios
# ---------------------------------------------------------------------------

DEFAULT_REGION = Bounds(111.055, 13.03, 111.07, 13.05)


@dataclass
class SynthScenario:
    """Generated stations and traffic plus the generating ground truth."""

    stations: list[BaseStation]
    traffic: TrafficMatrix
    labels: np.ndarray          # true mixture component per station
    means: np.ndarray           # (K, 2) true component means, lon/lat degrees
    covariances: np.ndarray     # (K, 2, 2)
    weights: np.ndarray         # (K,)


def _random_spd(rng: np.random.Generator, scale: float) -> np.ndarray:
    angle = rng.uniform(0.0, math.pi)
    rot = np.array([[math.cos(angle), -math.sin(angle)],
                    [math.sin(angle), math.cos(angle)]])
    stds = rng.uniform(0.3, 0.7, size=2) * scale
    return rot @ np.diag(stds ** 2) @ rot.T


def synth_scenario(seed: int, k_true: int = 8, n_stations: int = 200,
                   days: int = 8, noise: float = 0.05,
                   region: Bounds = DEFAULT_REGION,
                   base_bytes: float = 5e8) -> SynthScenario:
    """Stations from a seeded Gaussian mixture, traffic from a daily cycle.

    Station positions follow a ``k_true``-component mixture whose means
    lie inside ``region``.  Traffic repeats a shared diurnal profile,
    scaled per station and perturbed multiplicatively by seeded noise;
    with ``noise=0`` every day is identical.
    """
    if k_true < 1 or n_stations < k_true or days < 1:
        raise ValidationError("need k_true >= 1, n_stations >= k_true, days >= 1")
    rng = np.random.default_rng(seed)

    lon_span = region.lon_max - region.lon_min
    lat_span = region.lat_max - region.lat_min
    margin = 0.12
    scale = min(lon_span, lat_span) / 10.0

    # Component means keep a minimum mutual distance so the mixture is
    # actually clusterable (the ground truth doubles as a test oracle).
    min_sep = 3.5 * scale
    means_list: list[np.ndarray] = []
    attempts = 0
    while len(means_list) < k_true:
        candidate = np.array([
            rng.uniform(region.lon_min + margin * lon_span,
                        region.lon_max - margin * lon_span),
            rng.uniform(region.lat_min + margin * lat_span,
                        region.lat_max - margin * lat_span),
        ])
        attempts += 1
        far_enough = all(np.linalg.norm(candidate - m) >= min_sep for m in means_list)
        if far_enough or attempts > 200 * k_true:
            means_list.append(candidate)
    means = np.array(means_list)
    covariances = np.array([_random_spd(rng, scale) for _ in range(k_true)])
    weights = rng.uniform(0.8, 1.2, k_true)
    weights /= weights.sum()

    labels = rng.choice(k_true, size=n_stations, p=weights)
    positions = np.array([
        rng.multivariate_normal(means[k], covariances[k]) for k in labels
    ])
    stations = [BaseStation(i + 1, float(positions[i, 0]), float(positions[i, 1]))
                for i in range(n_stations)]

    hours = np.arange(HOURS_PER_DAY)
    profile = 0.3 + 0.7 * 0.5 * (1.0 + np.cos(2.0 * math.pi * (hours - 19) / 24.0))
    station_scale = base_bytes * 10.0 ** rng.uniform(-0.5, 0.5, n_stations)
    values = station_scale[:, None, None] * profile[None, None, :] \
        * np.ones((1, days, 1))
    if noise > 0:
        factor = 1.0 + noise * rng.standard_normal((n_stations, days, HOURS_PER_DAY))
        values = values * np.maximum(factor, 0.05)

    traffic = TrafficMatrix(
        station_ids=tuple(s.id for s in stations),
        values=values,
        baseline=0.0,
    )
    return SynthScenario(stations=stations, traffic=traffic, labels=labels,
                         means=means, covariances=covariances, weights=weights)
