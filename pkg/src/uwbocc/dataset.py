"""On-disk dataset container, segmentation, split logic, and epoch planning.

Storage layout is one binary .cir file per sample plus a JSON manifest that
carries all metadata and the radar configuration.  The .cir format is fixed
and bit-exact: magic "UWBC", a format version, the matrix dimensions, then
the complex samples as little-endian float32 (real, imag) pairs with the
fast-time index varying fastest.  See docs/formats.md.
"""

from __future__ import annotations

import enum
import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .core import ActivityLabel, CirMatrix, SampleRecord
from .errors import ConfigError, DataError
from .simulate import RadarConfig

__all__ = [
    "Split",
    "ManifestRecord",
    "DatasetManifest",
    "SplitAssignment",
    "EpochPlan",
    "write_cir",
    "read_cir",
    "write_dataset",
    "read_manifest",
    "read_dataset",
    "segment_recording",
    "make_split",
    "build_epoch_plan",
]

_MAGIC = b"UWBC"
_FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIII")  # magic, version, n_fast, m_slow


class Split(enum.Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


@dataclass(frozen=True)
class ManifestRecord:
    """One dataset entry: where its matrix lives plus its metadata."""

    file: str
    label: ActivityLabel
    car: str
    seat: str | None = None
    participant: str | None = None
    segment_index: int = 0

    def sort_key(self):
        """Deterministic recording order: participant, seat, segment, file."""
        return (self.participant or "", self.seat or "", self.segment_index, self.file)


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[ManifestRecord, ...]
    radar: RadarConfig

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        paths = [r.file for r in self.records]
        if len(set(paths)) != len(paths):
            dupes = sorted({p for p in paths if paths.count(p) > 1})
            raise DataError(f"duplicate file paths in manifest: {dupes[:5]}")

    def by_class(self) -> dict[ActivityLabel, list[ManifestRecord]]:
        """Records grouped per class, each group in recording order."""
        groups: dict[ActivityLabel, list[ManifestRecord]] = {}
        for rec in self.records:
            groups.setdefault(rec.label, []).append(rec)
        for recs in groups.values():
            recs.sort(key=ManifestRecord.sort_key)
        return groups


def write_cir(path, data: np.ndarray) -> None:
    """Write one complex matrix in the .cir binary format (single precision)."""
    data = np.asarray(data)
    if data.ndim != 2:
        raise DataError(f"cir matrix must be 2-d, got shape {data.shape}")
    n, m = data.shape
    with open(path, "wb") as handle:
        handle.write(_HEADER.pack(_MAGIC, _FORMAT_VERSION, n, m))
        handle.write(np.asarray(data, dtype="<c8").tobytes(order="F"))


def read_cir(path) -> np.ndarray:
    """Read a .cir file back into a complex128 matrix of shape (n_fast, m_slow)."""
    try:
        with open(path, "rb") as handle:
            header = handle.read(_HEADER.size)
            if len(header) < _HEADER.size:
                raise DataError(f"corrupt header in {path}: file shorter than {_HEADER.size} bytes")
            magic, version, n, m = _HEADER.unpack(header)
            if magic != _MAGIC:
                raise DataError(f"corrupt header in {path}: bad magic {magic!r}")
            if version != _FORMAT_VERSION:
                raise DataError(f"{path}: unsupported format version {version}")
            payload = handle.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    expected = n * m * 8
    if len(payload) != expected:
        raise DataError(
            f"shape mismatch in {path}: header says {n}x{m} "
            f"({expected} payload bytes) but file has {len(payload)}"
        )
    flat = np.frombuffer(payload, dtype="<c8")
    return flat.reshape((n, m), order="F").astype(np.complex128)


def _record_to_json(rec: ManifestRecord) -> dict:
    return {
        "file": rec.file,
        "label": rec.label.value,
        "car": rec.car,
        "seat": rec.seat,
        "participant": rec.participant,
        "segment_index": rec.segment_index,
    }


def _record_from_json(obj: dict, where: str) -> ManifestRecord:
    try:
        label = ActivityLabel.from_string(obj["label"])
        return ManifestRecord(
            file=obj["file"],
            label=label,
            car=obj["car"],
            seat=obj.get("seat"),
            participant=obj.get("participant"),
            segment_index=int(obj.get("segment_index", 0)),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"bad manifest record in {where}: {exc}") from None


def write_dataset(records, manifest_path, radar: RadarConfig | None = None) -> DatasetManifest:
    """Write SampleRecords as .cir files plus a manifest.json next to them.

    File names are derived from record order and metadata, so writing the
    same records twice produces byte-identical trees.  Returns the manifest.
    """
    records = list(records)
    if not records:
        raise DataError("refusing to write an empty dataset")
    radar = radar or RadarConfig(
        n_fast=records[0].cir.n_fast,
        m_slow=records[0].cir.m_slow,
        dt_fast=records[0].cir.dt_fast,
        dt_slow=records[0].cir.dt_slow,
    )
    manifest_path = os.fspath(manifest_path)
    directory = os.path.dirname(manifest_path) or "."
    os.makedirs(directory, exist_ok=True)

    entries = []
    for i, rec in enumerate(records):
        name = f"{i:05d}_{rec.label.value}.cir"
        write_cir(os.path.join(directory, name), rec.cir.data)
        entries.append(ManifestRecord(name, rec.label, rec.car, rec.seat,
                                      rec.participant, rec.segment_index))
    manifest = DatasetManifest(tuple(entries), radar)
    doc = {
        "format": "uwbocc-dataset",
        "version": _FORMAT_VERSION,
        "radar": {
            "center_freq": radar.center_freq,
            "bandwidth": radar.bandwidth,
            "rolloff": radar.rolloff,
            "dt_fast": radar.dt_fast,
            "dt_slow": radar.dt_slow,
            "n_fast": radar.n_fast,
            "m_slow": radar.m_slow,
        },
        "records": [_record_to_json(r) for r in manifest.records],
    }
    with open(manifest_path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return manifest


def read_manifest(manifest_path) -> DatasetManifest:
    manifest_path = os.fspath(manifest_path)
    try:
        with open(manifest_path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise DataError(f"cannot read manifest {manifest_path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest {manifest_path} is not valid JSON: {exc}") from None
    if doc.get("format") != "uwbocc-dataset":
        raise DataError(f"{manifest_path}: not a dataset manifest (format field missing or wrong)")
    try:
        radar = RadarConfig(**doc["radar"])
    except (KeyError, TypeError, ConfigError) as exc:
        raise DataError(f"{manifest_path}: bad radar section: {exc}") from None
    records = tuple(_record_from_json(obj, manifest_path) for obj in doc.get("records", []))
    return DatasetManifest(records, radar)


def read_dataset(manifest_path) -> tuple[DatasetManifest, list[SampleRecord]]:
    """Load a dataset: parse the manifest, then read every .cir file."""
    manifest = read_manifest(manifest_path)
    directory = os.path.dirname(os.fspath(manifest_path)) or "."
    samples = []
    for rec in manifest.records:
        path = os.path.join(directory, rec.file)
        if not os.path.exists(path):
            raise DataError(f"manifest references missing file {path}")
        data = read_cir(path)
        if data.shape != (manifest.radar.n_fast, manifest.radar.m_slow):
            raise DataError(
                f"{path}: shape {data.shape} does not match the manifest's "
                f"({manifest.radar.n_fast}, {manifest.radar.m_slow})"
            )
        cir = CirMatrix(data, manifest.radar.dt_fast, manifest.radar.dt_slow)
        samples.append(SampleRecord(cir, rec.label, rec.car, rec.seat,
                                    rec.participant, rec.segment_index))
    return manifest, samples


def segment_recording(stream: CirMatrix, window: float, label: ActivityLabel,
                      car: str, seat: str | None = None,
                      participant: str | None = None) -> list[SampleRecord]:
    """Cut a long recording into non-overlapping fixed-duration samples.

    window must be a positive integer multiple of the repetition interval;
    the trailing remainder shorter than one window is dropped.  Segment
    indices count from 0 in temporal order.
    """
    ratio = window / stream.dt_slow
    w = int(round(ratio))
    if w < 1 or abs(ratio - w) > 1e-9 * max(ratio, 1.0):
        raise ConfigError(
            f"window {window} s is not a positive integer multiple of the "
            f"repetition interval {stream.dt_slow} s"
        )
    n_segments = stream.m_slow // w
    out = []
    for k in range(n_segments):
        chunk = stream.data[:, k * w:(k + 1) * w].copy()
        cir = CirMatrix(chunk, stream.dt_fast, stream.dt_slow)
        out.append(SampleRecord(cir, label, car, seat, participant, k))
    return out


@dataclass(frozen=True)
class SplitAssignment:
    """Partition of manifest records into train/validation/test."""

    assignment: dict

    def records(self, split: Split) -> list[ManifestRecord]:
        return [rec for rec, s in self.assignment.items() if s is split]

    def counts(self) -> dict[str, dict[str, int]]:
        """Per-class, per-split record counts (string keyed, for reports)."""
        table: dict[str, dict[str, int]] = {}
        for rec, split in self.assignment.items():
            row = table.setdefault(rec.label.value, {s.value: 0 for s in Split})
            row[split.value] += 1
        return table


# Empty-class train/validation proportion of the non-test remainder, taken
# from the published per-split counts (66 train / 100 validation).
_EMPTY_TRAIN_FRACTION = 66 / 166


def make_split(manifest: DatasetManifest, test_per_class: int = 150,
               empty_test: int = 20, *, empty_train: int | None = None,
               car1_validation: dict | int | None = None) -> SplitAssignment:
    """Assign every record to train, validation, or test, car-disjointly.

    Occupied classes: every record not from car2 goes to Train; car2 records
    are ordered deterministically (participant, seat, segment, file) and the
    last test_per_class go to Test, the rest to Validation.  Optionally the
    last car1_validation records of car1 per class (an int, or a mapping
    from class to int) move from Train to Validation; the published split
    does this, holding out part of the car1 data to steer early stopping.

    Empty class (car2 only): first empty_train records to Train, last
    empty_test to Test, the middle to Validation.  empty_train defaults to
    66/166 of the non-test remainder, the published proportion.

    Deterministic: equal inputs give equal assignments.
    """
    if test_per_class < 0 or empty_test < 0:
        raise ConfigError("test counts must be >= 0")
    assignment: dict[ManifestRecord, Split] = {}
    deficits = []

    for label, recs in sorted(manifest.by_class().items(), key=lambda kv: kv[0].value):
        if label is ActivityLabel.EMPTY:
            total = len(recs)
            if total < empty_test:
                deficits.append(f"{label.value}: {total} records < {empty_test} test")
                continue
            remainder = total - empty_test
            n_train = empty_train if empty_train is not None else round(remainder * _EMPTY_TRAIN_FRACTION)
            if n_train > remainder:
                raise ConfigError(f"empty_train {n_train} exceeds the {remainder} non-test empty records")
            for i, rec in enumerate(recs):
                if i < n_train:
                    assignment[rec] = Split.TRAIN
                elif i >= total - empty_test:
                    assignment[rec] = Split.TEST
                else:
                    assignment[rec] = Split.VALIDATION
            continue

        car2 = [r for r in recs if r.car == "car2"]
        car1 = [r for r in recs if r.car != "car2"]
        if len(car2) < test_per_class:
            deficits.append(f"{label.value}: {len(car2)} car2 records < {test_per_class} test")
        n_val1 = 0
        if car1_validation is not None:
            n_val1 = car1_validation if isinstance(car1_validation, int) else int(
                car1_validation.get(label, car1_validation.get(label.value, 0)))
            if n_val1 > len(car1):
                raise ConfigError(
                    f"car1_validation asks for {n_val1} {label.value} records, car1 has {len(car1)}")
        for i, rec in enumerate(car1):
            assignment[rec] = Split.VALIDATION if i >= len(car1) - n_val1 else Split.TRAIN
        cut = max(len(car2) - test_per_class, 0)
        for i, rec in enumerate(car2):
            assignment[rec] = Split.TEST if i >= cut else Split.VALIDATION

    if deficits:
        raise DataError("insufficient samples for the requested split: " + "; ".join(sorted(deficits)))

    split = SplitAssignment(assignment)
    for rec in split.records(Split.TRAIN):
        assert not (rec.car == "car2" and rec.label.occupied), "car2 occupied record leaked into train"
    for rec in split.records(Split.TEST):
        assert rec.car == "car2", "non-car2 record leaked into test"
    return split


@dataclass(frozen=True)
class EpochPlan:
    """Ordered draw schedule for one training epoch.

    Each entry pairs a training record with a draw index; the index counts
    that record's reuses, so (record, draw) is unique and can seed the noise
    generator for the draw.  Occupied records appear reuse_occupied times
    and empty records reuse_empty times, rebalancing the class masses.
    """

    entries: tuple
    reuse_occupied: int = 200
    reuse_empty: int = 3000

    def __len__(self):
        return len(self.entries)


def build_epoch_plan(split: SplitAssignment, seed: int,
                     reuse_occupied: int = 200, reuse_empty: int = 3000) -> EpochPlan:
    """Expand the training records into a seeded, shuffled draw schedule."""
    if reuse_occupied < 1 or reuse_empty < 1:
        raise ConfigError("reuse factors must be >= 1")
    train = sorted(split.records(Split.TRAIN), key=ManifestRecord.sort_key)
    occupied = [r for r in train if r.label.occupied]
    empty = [r for r in train if not r.label.occupied]
    if not occupied or not empty:
        raise DataError(
            f"epoch plan needs both classes in train: {len(occupied)} occupied, {len(empty)} empty")
    entries = [(rec, k) for rec in occupied for k in range(reuse_occupied)]
    entries += [(rec, k) for rec in empty for k in range(reuse_empty)]
    order = np.random.default_rng(seed).permutation(len(entries))
    return EpochPlan(tuple(entries[i] for i in order), reuse_occupied, reuse_empty)
