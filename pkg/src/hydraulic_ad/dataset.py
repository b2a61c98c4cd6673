"""Loading, writing and synthesising hydraulic condition-monitoring cycles.

A dataset directory holds one whitespace-separated text file per sensor
(``PS1.txt`` ... ``SE.txt``, one row per 60 s cycle) plus ``profile.txt``
with five integer condition codes per row. The profile column order
defaults to ``cool valv pump hydr stab`` and can be overridden with a
``manifest.json`` file in the same directory::

    {"profile_columns": ["cool", "valv", "pump", "hydr", "stab"]}
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np
import pandas as pd

from .exceptions import DataError, FormatError
from .numerics import make_rng

logger = logging.getLogger(__name__)

CYCLE_SECONDS = 60

NORMAL = 0
ANOMALY = 1
FAULT_NAMES = ("none", "weak", "severe")
CONDITION_NAMES = ("cool", "valv", "pump", "hydr", "stab")
CONDITION_VALUES = {
    "cool": (3, 20, 100),
    "valv": (100, 90, 80, 73),
    "pump": (0, 1, 2),
    "hydr": (130, 115, 100, 90),
    "stab": (0, 1),
}


@dataclass(frozen=True)
class SensorSpec:
    id: str
    quantity: str
    unit: str
    rate: int

    @property
    def samples_per_cycle(self) -> int:
        return self.rate * CYCLE_SECONDS


SENSORS: tuple[SensorSpec, ...] = (
    *(SensorSpec(f"PS{i}", "pressure", "bar", 100) for i in range(1, 7)),
    SensorSpec("EPS1", "motor power", "W", 100),
    SensorSpec("FS1", "volume flow", "l/min", 10),
    SensorSpec("FS2", "volume flow", "l/min", 10),
    *(SensorSpec(f"TS{i}", "temperature", "C", 1) for i in range(1, 5)),
    SensorSpec("VS1", "vibration", "mm/s", 1),
    SensorSpec("CE", "cooling efficiency", "%", 1),
    SensorSpec("CP", "cooling power", "kW", 1),
    SensorSpec("SE", "efficiency factor", "%", 1),
)
SENSOR_IDS = tuple(s.id for s in SENSORS)
SENSOR_BY_ID = {s.id: s for s in SENSORS}


@dataclass(frozen=True)
class Cycle:
    """One 60-second operating cycle."""

    index: int
    channels: Mapping[str, np.ndarray]
    conditions: Mapping[str, int]

    @property
    def pump(self) -> int:
        return int(self.conditions["pump"])


class Dataset:
    """Ordered, immutable collection of cycles.

    Channel data is held as one ``(n_cycles, samples_per_cycle)`` array per
    sensor; :class:`Cycle` objects are row views into those arrays.
    """

    def __init__(self, channels: Mapping[str, np.ndarray], profile: np.ndarray,
                 profile_columns=CONDITION_NAMES):
        profile = np.asarray(profile, dtype=np.int64)
        if profile.ndim != 2 or profile.shape[1] != len(CONDITION_NAMES):
            raise FormatError(f"profile must have {len(CONDITION_NAMES)} columns, got shape {profile.shape}")
        order = [list(profile_columns).index(name) for name in CONDITION_NAMES]
        self.profile = profile[:, order]
        self.profile.setflags(write=False)
        n = self.profile.shape[0]
        self.channels: dict[str, np.ndarray] = {}
        for spec in SENSORS:
            if spec.id not in channels:
                raise FormatError(f"missing channel {spec.id}")
            arr = np.asarray(channels[spec.id], dtype=float)
            if arr.shape != (n, spec.samples_per_cycle):
                raise FormatError(
                    f"{spec.id}: expected shape {(n, spec.samples_per_cycle)}, got {arr.shape}"
                )
            arr.setflags(write=False)
            self.channels[spec.id] = arr

    def __len__(self) -> int:
        return self.profile.shape[0]

    def __getitem__(self, i: int) -> Cycle:
        if not -len(self) <= i < len(self):
            raise IndexError(i)
        i %= len(self)
        return Cycle(
            index=i,
            channels={sid: arr[i] for sid, arr in self.channels.items()},
            conditions={name: int(v) for name, v in zip(CONDITION_NAMES, self.profile[i])},
        )

    def __iter__(self) -> Iterator[Cycle]:
        return (self[i] for i in range(len(self)))

    @property
    def cycles(self) -> list[Cycle]:
        return list(self)

    @property
    def pump(self) -> np.ndarray:
        return self.profile[:, CONDITION_NAMES.index("pump")]

    def labels(self) -> np.ndarray:
        """Binary label per cycle: 0 normal (no leakage), 1 anomaly."""
        return leakage_labels(self.pump)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset({k: v[idx] for k, v in self.channels.items()}, self.profile[idx])


def _check_pump(code) -> int:
    if code not in CONDITION_VALUES["pump"]:
        raise DataError(f"pump code must be one of {CONDITION_VALUES['pump']}, got {code}")
    return int(code)


def leakage_labels(pump_codes) -> np.ndarray:
    codes = np.asarray(pump_codes)
    bad = ~np.isin(codes, CONDITION_VALUES["pump"])
    if bad.any():
        raise DataError(f"invalid pump code {codes[bad][0]!r}")
    return (codes != 0).astype(int)


def leakage_label(cycle: Cycle) -> int:
    """0 (normal) for no leakage, 1 (anomaly) for weak or severe leakage."""
    return NORMAL if _check_pump(cycle.pump) == 0 else ANOMALY


def fault_type(cycle: Cycle) -> str:
    return FAULT_NAMES[_check_pump(cycle.pump)]


# --------------------------------------------------------------------------
# text files

def _read_table(path: Path, n_cols: int, what: str, dtype=float) -> np.ndarray:
    try:
        frame = pd.read_csv(path, sep=r"\s+", header=None, dtype=dtype, engine="c",
                            float_precision="round_trip")
    except (ValueError, pd.errors.ParserError):
        frame = None
    if frame is not None and frame.shape[1] == n_cols and not frame.isna().to_numpy().any():
        return frame.to_numpy(dtype=dtype)
    # slow path: locate the offending row/token
    conv = float if dtype is float else int
    rows = []
    with open(path) as fh:
        for row_idx, line in enumerate(fh):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != n_cols:
                raise FormatError(
                    f"{what}: row {row_idx} has {len(tokens)} values, expected {n_cols}"
                )
            try:
                rows.append([conv(t) for t in tokens])
            except ValueError:
                for col, tok in enumerate(tokens):
                    try:
                        conv(tok)
                    except ValueError:
                        raise FormatError(
                            f"{what}: unparseable token {tok!r} at row {row_idx}, column {col}"
                        ) from None
    arr = np.asarray(rows, dtype=dtype)
    if arr.size and not np.all(np.isfinite(arr)):
        r = int(np.argwhere(~np.isfinite(arr))[0, 0])
        raise FormatError(f"{what}: non-finite value in row {r}")
    return arr.reshape(-1, n_cols)


def _profile_columns(directory: Path, override=None) -> tuple[str, ...]:
    if override is not None:
        cols = tuple(override)
    else:
        manifest = directory / "manifest.json"
        if not manifest.exists():
            return CONDITION_NAMES
        cols = tuple(json.loads(manifest.read_text())["profile_columns"])
    if sorted(cols) != sorted(CONDITION_NAMES):
        raise FormatError(f"profile columns must be a permutation of {CONDITION_NAMES}, got {cols}")
    return cols


def load_dataset(directory, profile_columns=None, max_workers: int = 4) -> Dataset:
    """Read the 17 sensor files and ``profile.txt`` from ``directory``."""
    directory = Path(directory)
    for spec in SENSORS:
        if not (directory / f"{spec.id}.txt").is_file():
            raise FileNotFoundError(f"missing sensor file for {spec.id}: {directory / (spec.id + '.txt')}")
    profile_path = directory / "profile.txt"
    if not profile_path.is_file():
        raise FileNotFoundError(f"missing profile file: {profile_path}")
    columns = _profile_columns(directory, profile_columns)

    def read(spec: SensorSpec) -> np.ndarray:
        return _read_table(directory / f"{spec.id}.txt", spec.samples_per_cycle, spec.id)

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        arrays = dict(zip(SENSOR_IDS, pool.map(read, SENSORS)))
    profile = _read_table(profile_path, len(CONDITION_NAMES), "profile", dtype=int)

    counts = {sid: a.shape[0] for sid, a in arrays.items()}
    counts["profile"] = profile.shape[0]
    if len(set(counts.values())) != 1:
        raise FormatError(f"row counts differ across files: {counts}")
    for j, name in enumerate(columns):
        bad = ~np.isin(profile[:, j], CONDITION_VALUES[name])
        if bad.any():
            r = int(np.flatnonzero(bad)[0])
            raise DataError(f"profile row {r}: {name}={profile[r, j]} not in {CONDITION_VALUES[name]}")
    logger.info("loaded %d cycles from %s", profile.shape[0], directory)
    return Dataset(arrays, profile, profile_columns=columns)


def write_dataset(dataset: Dataset, directory) -> None:
    """Write ``dataset`` in the on-disk layout read by :func:`load_dataset`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for sid, arr in dataset.channels.items():
        np.savetxt(directory / f"{sid}.txt", arr, fmt="%.17g", delimiter="\t")
    np.savetxt(directory / "profile.txt", dataset.profile, fmt="%d", delimiter="\t")


# --------------------------------------------------------------------------
# synthetic data

# (baseline level, between-cycle level sd, within-cycle noise sd)
_BASELINES = {
    "PS1": (160.0, 2.0, 1.5), "PS2": (110.0, 2.0, 1.5), "PS3": (2.0, 0.05, 0.05),
    "PS4": (3.0, 0.5, 0.2), "PS5": (9.0, 0.2, 0.05), "PS6": (8.9, 0.2, 0.05),
    "EPS1": (2500.0, 30.0, 20.0), "FS1": (6.2, 0.1, 0.3), "FS2": (9.6, 0.1, 0.05),
    "TS1": (45.0, 1.0, 0.2), "TS2": (50.0, 1.0, 0.2), "TS3": (47.0, 1.0, 0.2),
    "TS4": (40.0, 1.0, 0.2), "VS1": (0.6, 0.02, 0.02), "CE": (31.0, 1.0, 0.3),
    "CP": (1.8, 0.05, 0.02), "SE": (55.0, 1.0, 0.5),
}

#: Leakage mean shift per channel, in units of the channel's between-cycle
#: level sd, as (weak, severe). Shifts are downward.
DEFAULT_MEAN_SHIFT = {
    "PS1": (6.0, 12.0), "PS2": (6.0, 12.0), "PS3": (6.0, 12.0),
    "PS4": (4.0, 8.0), "PS5": (4.0, 8.0), "PS6": (4.0, 8.0),
    "EPS1": (4.0, 8.0), "SE": (4.0, 8.0),
}
#: Leakage multiplier of the within-cycle noise sd, as (weak, severe).
DEFAULT_NOISE_GAIN = {
    "PS1": (2.0, 3.0), "PS2": (2.0, 3.0), "PS3": (2.0, 3.0),
    "FS1": (2.0, 3.0), "FS2": (2.0, 3.0),
}


def generate_synthetic(n_normal: int, n_weak: int, n_severe: int, seed: int = 0,
                       mean_shift: Mapping[str, tuple[float, float]] | None = None,
                       noise_gain: Mapping[str, tuple[float, float]] | None = None) -> Dataset:
    """Synthesise cycles with the real 17-channel schema.

    Each channel is a per-sensor baseline plus a per-cycle level offset, a
    smooth within-cycle profile and white noise. Leakage cycles lower the
    pressure, motor-power and efficiency levels and add ripple to PS1-PS3
    and the two flow channels, per :data:`DEFAULT_MEAN_SHIFT` and
    :data:`DEFAULT_NOISE_GAIN` (overridable per channel). The other
    condition variables are drawn uniformly from their enumerations.
    """
    counts = (n_normal, n_weak, n_severe)
    if any(int(c) != c or c < 0 for c in counts):
        raise ValueError(f"counts must be non-negative integers, got {counts}")
    shift = {**DEFAULT_MEAN_SHIFT, **(mean_shift or {})}
    gain = {**DEFAULT_NOISE_GAIN, **(noise_gain or {})}
    rng = make_rng(seed)
    pump = np.repeat(np.arange(3), counts)
    pump = pump[rng.permutation(pump.size)]
    n = pump.size

    profile = np.zeros((n, len(CONDITION_NAMES)), dtype=np.int64)
    for j, name in enumerate(CONDITION_NAMES):
        profile[:, j] = pump if name == "pump" else rng.choice(CONDITION_VALUES[name], size=n)

    channels = {}
    for spec in SENSORS:
        base, level_sd, noise_sd = _BASELINES[spec.id]
        t = np.linspace(0.0, 2 * math.pi, spec.samples_per_cycle, endpoint=False)
        level = base + level_sd * rng.standard_normal(n)
        noise = np.full(n, noise_sd)
        if spec.id in shift:
            weak, severe = shift[spec.id]
            level -= level_sd * np.select([pump == 1, pump == 2], [weak, severe], 0.0)
        if spec.id in gain:
            weak, severe = gain[spec.id]
            noise *= np.select([pump == 1, pump == 2], [weak, severe], 1.0)
        amp = 2.0 * level_sd
        phase = rng.uniform(0, 0.2, size=n)
        arr = level[:, None] + amp * np.sin(t[None, :] + phase[:, None])
        arr += noise[:, None] * rng.standard_normal((n, spec.samples_per_cycle))
        channels[spec.id] = arr
    return Dataset(channels, profile)
