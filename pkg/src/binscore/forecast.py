"""Grid-based forecasts, observations and their CSV formats.

A rate forecast gives the expected number of events per space-magnitude
bin. Under a Poisson model the probability of at least one event in a bin
is ``1 - exp(-rate)``; summing rates over the magnitude layers of a spatial
cell gives the probability for the whole cell.

CSV formats (UTF-8, ``.`` decimal separator, header row required):

* rate forecast: ``lon_min,lon_max,lat_min,lat_max,mag_min,mag_max,rate,mask``
  with ``mask`` 1 for an included bin and 0 for a masked one;
* binary forecast: ``bin_id,prob,mask``;
* observations: ``bin_id,observed`` with ``observed`` in {0, 1}.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, DomainError
from .numerics import TRUTH_DOMAIN, check_probability, make_stream

RATE_HEADER = ["lon_min", "lon_max", "lat_min", "lat_max", "mag_min", "mag_max", "rate", "mask"]
BINARY_HEADER = ["bin_id", "prob", "mask"]
OBSERVATION_HEADER = ["bin_id", "observed"]


@dataclass(frozen=True, order=True)
class GridBin:
    lon_min: float
    lon_max: float
    lat_min: float
    lat_max: float
    mag_min: float
    mag_max: float

    def __post_init__(self):
        for lo, hi, axis in (
            (self.lon_min, self.lon_max, "lon"),
            (self.lat_min, self.lat_max, "lat"),
            (self.mag_min, self.mag_max, "mag"),
        ):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise DataError(f"bin {axis} range must satisfy min < max, got [{lo}, {hi}]")

    @property
    def key(self) -> tuple:
        return (self.lon_min, self.lon_max, self.lat_min, self.lat_max, self.mag_min, self.mag_max)

    @property
    def cell(self) -> tuple:
        """Spatial part of the key."""
        return (self.lon_min, self.lon_max, self.lat_min, self.lat_max)

    @property
    def bin_id(self) -> str:
        return format_key(self.key)


def format_key(key: Sequence[float]) -> str:
    # repr() is the shortest string that round-trips a double.
    return ":".join(repr(float(v)) for v in key)


@dataclass
class RateForecast:
    bins: list[GridBin]
    rates: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.rates = np.asarray(self.rates, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if len(self.bins) != self.rates.shape[0] or self.mask.shape != self.rates.shape:
            raise DataError("bins, rates and mask must have the same length")
        if not np.all(np.isfinite(self.rates)) or np.any(self.rates < 0):
            raise DataError("rates must be finite and non-negative")

    def __len__(self) -> int:
        return len(self.bins)


@dataclass
class BinaryForecast:
    """Per-bin event probabilities. ``mask[i]`` is True when bin ``i`` is
    part of the forecast; N is the number of unmasked bins."""

    bin_ids: tuple
    probs: np.ndarray
    mask: np.ndarray = None
    name: str = ""

    def __post_init__(self):
        self.bin_ids = tuple(str(b) for b in self.bin_ids)
        self.probs = np.asarray(self.probs, dtype=float)
        if self.mask is None:
            self.mask = np.ones(self.probs.shape, dtype=bool)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.probs.ndim != 1 or len(self.bin_ids) != self.probs.shape[0]:
            raise DataError("bin_ids and probs must be one-dimensional and of equal length")
        if self.mask.shape != self.probs.shape:
            raise DataError("mask must match probs in length")
        if len(set(self.bin_ids)) != len(self.bin_ids):
            raise DataError(f"duplicate bin id {_first_duplicate(self.bin_ids)!r}")
        bad = np.isnan(self.probs) | (self.probs < 0) | (self.probs > 1)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise DataError(f"probability of bin {self.bin_ids[i]!r} outside [0, 1]: {self.probs[i]}")

    @property
    def n(self) -> int:
        return int(self.mask.sum())

    def active(self) -> tuple[tuple, np.ndarray]:
        ids = tuple(b for b, m in zip(self.bin_ids, self.mask) if m)
        return ids, self.probs[self.mask]

    def as_dict(self) -> dict:
        ids, probs = self.active()
        return dict(zip(ids, probs))


@dataclass
class ObservationField:
    bin_ids: tuple
    values: np.ndarray

    def __post_init__(self):
        self.bin_ids = tuple(str(b) for b in self.bin_ids)
        self.values = np.asarray(self.values)
        if self.values.ndim != 1 or len(self.bin_ids) != self.values.shape[0]:
            raise DataError("bin_ids and values must be one-dimensional and of equal length")
        if not np.all((self.values == 0) | (self.values == 1)):
            raise DataError("observed values must be 0 or 1")
        self.values = self.values.astype(np.int8)
        if len(set(self.bin_ids)) != len(self.bin_ids):
            raise DataError(f"duplicate bin id {_first_duplicate(self.bin_ids)!r}")

    @property
    def x_s(self) -> int:
        """Number of active bins."""
        return int(self.values.sum())

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def as_dict(self) -> dict:
        return dict(zip(self.bin_ids, self.values))


def _first_duplicate(items: Iterable):
    seen = set()
    for it in items:
        if it in seen:
            return it
        seen.add(it)
    return None


def rate_to_probability(rate):
    """Probability of at least one event for a Poisson count with mean ``rate``."""
    r = np.asarray(rate, dtype=float)
    if not np.all(np.isfinite(r)) or np.any(r < 0):
        raise DomainError(f"rate must be finite and non-negative, got {rate!r}")
    p = -np.expm1(-r)
    return float(p) if p.ndim == 0 else p


def aggregate_magnitudes(f: RateForecast) -> BinaryForecast:
    """Collapse the magnitude layers of every spatial cell into one
    probability ``1 - exp(-sum of unmasked rates)``.

    Every spatial cell must carry the same set of magnitude layers. A cell
    is masked only if all of its layers are masked.
    """
    cells: dict[tuple, list[int]] = {}
    for i, b in enumerate(f.bins):
        cells.setdefault(b.cell, []).append(i)
    layer_sets = {}
    for cell, idx in cells.items():
        layers = tuple(sorted((f.bins[i].mag_min, f.bins[i].mag_max) for i in idx))
        layer_sets.setdefault(layers, cell)
    if len(layer_sets) > 1:
        a, b = list(layer_sets.values())[:2]
        raise DataError(
            f"inconsistent spatial grid: cells {format_key(a)} and {format_key(b)} "
            "have different magnitude layers"
        )
    ordered = sorted(cells)
    probs = np.empty(len(ordered))
    mask = np.empty(len(ordered), dtype=bool)
    for j, cell in enumerate(ordered):
        idx = np.asarray(cells[cell])
        keep = f.mask[idx]
        mask[j] = bool(keep.any())
        probs[j] = -math.expm1(-math.fsum(f.rates[idx][keep])) if mask[j] else 0.0
    return BinaryForecast(tuple(format_key(c) for c in ordered), probs, mask)


def scale_forecast(f: BinaryForecast, omega: float) -> BinaryForecast:
    """Multiply every probability by ``omega``; masked bins are carried along."""
    omega = float(omega)
    if not (omega > 0 and math.isfinite(omega)):
        raise DomainError(f"omega must be positive and finite, got {omega}")
    scaled = f.probs * omega
    over = f.mask & (scaled > 1.0)
    if np.any(over):
        i = int(np.flatnonzero(over)[0])
        raise DomainError(
            f"omega={omega} pushes bin {f.bin_ids[i]!r} to probability {scaled[i]} > 1"
        )
    scaled = np.where(f.mask, scaled, np.minimum(scaled, 1.0))
    return BinaryForecast(f.bin_ids, scaled, f.mask.copy(), name=f.name)


def synthetic_truth(n_bins: int, low: float = 1e-6, high: float = 2e-2, seed: int = 0) -> BinaryForecast:
    """Log-uniform probabilities on ``[low, high]``, one per bin.

    Stands in for a real smoothed-seismicity forecast. The default range
    covers the per-bin probabilities of a five-year regional earthquake
    forecast summed over magnitudes.
    """
    if isinstance(n_bins, bool) or int(n_bins) != n_bins or n_bins < 1:
        raise DomainError(f"n_bins must be a positive integer, got {n_bins!r}")
    low = check_probability(low, "low")
    high = check_probability(high, "high")
    if not 0.0 < low < high < 1.0:
        raise DomainError(f"need 0 < low < high < 1, got low={low}, high={high}")
    rng = make_stream(seed, 0, domain=TRUTH_DOMAIN)
    u = rng.random(int(n_bins))
    probs = np.exp(math.log(low) + u * (math.log(high) - math.log(low)))
    probs = np.clip(probs, low, high)
    ids = tuple(f"bin{i:06d}" for i in range(int(n_bins)))
    return BinaryForecast(ids, probs, name="truth")


def draw_bernoulli(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return (rng.random(probs.shape[0]) < probs).astype(np.int8)


def simulate_observations(truth: BinaryForecast, seed: int, replicate: int = 0) -> ObservationField:
    """Independent Bernoulli draws for the unmasked bins of ``truth``.

    Replicate ``r`` uses random stream ``r`` of ``seed``.
    """
    ids, probs = truth.active()
    values = draw_bernoulli(probs, make_stream(seed, replicate))
    return ObservationField(ids, values)


def align(*forecasts: BinaryForecast, strict: bool = False) -> tuple[tuple, list[np.ndarray]]:
    """Restrict forecasts to the bins they all include.

    Bins are matched by id. With ``strict=True`` any difference in the sets
    of unmasked bins raises :class:`DataError`.
    """
    if not forecasts:
        raise DataError("nothing to align")
    maps = [f.as_dict() for f in forecasts]
    first_ids, _ = forecasts[0].active()
    common = set(maps[0])
    for i, m in enumerate(maps[1:], start=1):
        if strict and set(m) != common:
            diff = sorted(set(m).symmetric_difference(common))[:3]
            raise DataError(f"forecast {i} covers different bins than forecast 0, e.g. {diff}")
        common &= set(m)
    ids = tuple(b for b in first_ids if b in common)
    if not ids:
        raise DataError("forecasts share no unmasked bins")
    arrays = [np.fromiter((m[b] for b in ids), dtype=float, count=len(ids)) for m in maps]
    return ids, arrays


def align_observations(ids: Sequence[str], obs: ObservationField, strict: bool = False) -> np.ndarray:
    """Observed values for ``ids`` in that order."""
    m = obs.as_dict()
    missing = [b for b in ids if b not in m]
    if missing:
        raise DataError(f"{len(missing)} forecast bins have no observation, e.g. {missing[0]!r}")
    if strict and len(m) != len(ids):
        raise DataError("observations cover bins that the forecasts do not")
    return np.fromiter((m[b] for b in ids), dtype=np.int8, count=len(ids))


# ---------------------------------------------------------------- CSV I/O


def _open_rows(path, header: list[str]):
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            raise DataError(f"{path}: no bins (file is empty)")
        if [c.strip() for c in first] != header:
            raise DataError(f"{path}:1: expected header {','.join(header)}, got {','.join(first)}")
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{reader.line_num}: expected {len(header)} fields, got {len(row)}")
            rows.append((reader.line_num, [c.strip() for c in row]))
    if not rows:
        raise DataError(f"{path}: no bins")
    return path, rows


def _float(path, line, text, what):
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"{path}:{line}: {what} is not a number: {text!r}") from None
    if not math.isfinite(v):
        raise DataError(f"{path}:{line}: {what} must be finite, got {text!r}")
    return v


def _flag(path, line, text, what):
    if text not in ("0", "1"):
        raise DataError(f"{path}:{line}: {what} must be 0 or 1, got {text!r}")
    return text == "1"


def _check_overlaps(path, bins: list[GridBin]) -> None:
    # sweep over longitude; only cells whose lon ranges intersect are compared
    cells = sorted({b.cell for b in bins})
    active: list[tuple] = []
    for cell in cells:
        active = [c for c in active if c[1] > cell[0]]
        for other in active:
            if other[2] < cell[3] and cell[2] < other[3]:
                raise DataError(f"{path}: overlapping bins {format_key(other)} and {format_key(cell)}")
        active.append(cell)
    by_cell: dict[tuple, list[tuple]] = {}
    for b in bins:
        by_cell.setdefault(b.cell, []).append((b.mag_min, b.mag_max))
    for cell, layers in by_cell.items():
        layers.sort()
        for (lo1, hi1), (lo2, hi2) in zip(layers, layers[1:]):
            if lo2 < hi1:
                raise DataError(
                    f"{path}: overlapping magnitude bins [{lo1}, {hi1}] and [{lo2}, {hi2}] "
                    f"in cell {format_key(cell)}"
                )


def load_rate_forecast(path) -> RateForecast:
    path, rows = _open_rows(path, RATE_HEADER)
    bins, rates, mask = [], [], []
    seen: dict[tuple, int] = {}
    for line, row in rows:
        vals = [_float(path, line, t, name) for t, name in zip(row[:6], RATE_HEADER[:6])]
        try:
            b = GridBin(*vals)
        except DataError as exc:
            raise DataError(f"{path}:{line}: {exc}") from None
        if b.key in seen:
            raise DataError(f"{path}:{line}: duplicate bin {b.bin_id} (first seen on line {seen[b.key]})")
        seen[b.key] = line
        rate = _float(path, line, row[6], "rate")
        if rate < 0:
            raise DataError(f"{path}:{line}: rate must be non-negative, got {row[6]!r}")
        bins.append(b)
        rates.append(rate)
        mask.append(_flag(path, line, row[7], "mask"))
    _check_overlaps(path, bins)
    return RateForecast(bins, np.asarray(rates), np.asarray(mask, dtype=bool))


def write_rate_forecast(f: RateForecast, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RATE_HEADER)
        for b, r, m in zip(f.bins, f.rates, f.mask):
            w.writerow([*(repr(float(v)) for v in b.key), repr(float(r)), int(m)])


def load_binary_forecast(path, name: str | None = None) -> BinaryForecast:
    path, rows = _open_rows(path, BINARY_HEADER)
    ids, probs, mask = [], [], []
    seen: dict[str, int] = {}
    for line, row in rows:
        bid = row[0]
        if not bid:
            raise DataError(f"{path}:{line}: empty bin_id")
        if bid in seen:
            raise DataError(f"{path}:{line}: duplicate bin {bid!r} (first seen on line {seen[bid]})")
        seen[bid] = line
        p = _float(path, line, row[1], "prob")
        if not 0.0 <= p <= 1.0:
            raise DataError(f"{path}:{line}: prob must lie in [0, 1], got {row[1]!r}")
        ids.append(bid)
        probs.append(p)
        mask.append(_flag(path, line, row[2], "mask"))
    return BinaryForecast(tuple(ids), np.asarray(probs), np.asarray(mask, dtype=bool), name=name or Path(path).stem)


def write_binary_forecast(f: BinaryForecast, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BINARY_HEADER)
        for b, p, m in zip(f.bin_ids, f.probs, f.mask):
            w.writerow([b, repr(float(p)), int(m)])


def load_observations(path) -> ObservationField:
    path, rows = _open_rows(path, OBSERVATION_HEADER)
    ids, values = [], []
    seen: dict[str, int] = {}
    for line, row in rows:
        bid = row[0]
        if not bid:
            raise DataError(f"{path}:{line}: empty bin_id")
        if bid in seen:
            raise DataError(f"{path}:{line}: duplicate bin {bid!r} (first seen on line {seen[bid]})")
        seen[bid] = line
        ids.append(bid)
        values.append(int(_flag(path, line, row[1], "observed")))
    return ObservationField(tuple(ids), np.asarray(values, dtype=np.int8))


def write_observations(obs: ObservationField, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OBSERVATION_HEADER)
        for b, v in zip(obs.bin_ids, obs.values):
            w.writerow([b, int(v)])
