"""Binary container round trips, segmentation, split logic, epoch plans."""

import numpy as np
import pytest

from uwbocc.core import ActivityLabel, CirMatrix, SampleRecord
from uwbocc.dataset import (
    DatasetManifest,
    EpochPlan,
    ManifestRecord,
    Split,
    build_epoch_plan,
    make_split,
    read_cir,
    read_dataset,
    read_manifest,
    segment_recording,
    write_cir,
    write_dataset,
)
from uwbocc.errors import ConfigError, DataError
from uwbocc.simulate import RadarConfig

B, T, M, E = (ActivityLabel.BREATHING, ActivityLabel.TALKING,
              ActivityLabel.MOVING, ActivityLabel.EMPTY)


def random_records(rng, label, count, n=4, m=6, car="car1"):
    out = []
    for i in range(count):
        data = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
        cir = CirMatrix(data, 0.5e-9, 0.1)
        if label.occupied:
            out.append(SampleRecord(cir, label, car, "front", f"p{i:03d}", 0))
        else:
            out.append(SampleRecord(cir, label, "car2", None, None, i))
    return out


class TestCirFormat:
    def test_round_trip_bit_exact_in_single_precision(self, tmp_path):
        rng = np.random.default_rng(0)
        for i in range(10):
            data = (rng.standard_normal((8, 12)) + 1j * rng.standard_normal((8, 12)))
            stored = data.astype(np.complex64).astype(np.complex128)
            path = tmp_path / f"{i}.cir"
            write_cir(path, data)
            assert np.array_equal(read_cir(path), stored)

    def test_header_layout(self, tmp_path):
        path = tmp_path / "x.cir"
        write_cir(path, np.zeros((3, 5), dtype=np.complex128))
        raw = path.read_bytes()
        assert raw[:4] == b"UWBC"
        assert int.from_bytes(raw[4:8], "little") == 1
        assert int.from_bytes(raw[8:12], "little") == 3
        assert int.from_bytes(raw[12:16], "little") == 5
        assert len(raw) == 16 + 3 * 5 * 8

    def test_fast_time_varies_fastest(self, tmp_path):
        # payload order must walk down each column before moving to the next
        data = np.arange(6, dtype=np.complex128).reshape(2, 3)  # rows=fast time
        path = tmp_path / "order.cir"
        write_cir(path, data)
        payload = np.frombuffer(path.read_bytes()[16:], dtype="<c8")
        assert np.array_equal(payload.real, [0, 3, 1, 4, 2, 5])

    def test_truncated_file_names_the_file(self, tmp_path):
        path = tmp_path / "broken.cir"
        write_cir(path, np.ones((4, 4), dtype=np.complex128))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(DataError, match="broken.cir"):
            read_cir(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "notcir.cir"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(DataError, match="magic"):
            read_cir(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            read_cir(tmp_path / "absent.cir")


class TestDatasetRoundTrip:
    def test_write_read_preserves_everything(self, tmp_path):
        rng = np.random.default_rng(3)
        records = random_records(rng, B, 4) + random_records(rng, E, 3)
        manifest_path = tmp_path / "manifest.json"
        write_dataset(records, manifest_path, RadarConfig(n_fast=4, m_slow=6))
        manifest, loaded = read_dataset(manifest_path)
        assert len(loaded) == 7
        for orig, back in zip(records, loaded):
            assert np.array_equal(back.cir.data, orig.cir.data.astype(np.complex64))
            assert back.label is orig.label
            assert (back.car, back.seat, back.participant, back.segment_index) == (
                orig.car, orig.seat, orig.participant, orig.segment_index)
        assert manifest.radar.n_fast == 4

    def test_unknown_label_in_manifest(self, tmp_path):
        rng = np.random.default_rng(1)
        manifest_path = tmp_path / "manifest.json"
        write_dataset(random_records(rng, E, 1), manifest_path, RadarConfig(n_fast=4, m_slow=6))
        text = manifest_path.read_text().replace('"empty"', '"sleeping"')
        manifest_path.write_text(text)
        with pytest.raises(DataError, match="sleeping"):
            read_manifest(manifest_path)

    def test_missing_cir_file_reported(self, tmp_path):
        rng = np.random.default_rng(1)
        manifest_path = tmp_path / "manifest.json"
        write_dataset(random_records(rng, E, 2), manifest_path, RadarConfig(n_fast=4, m_slow=6))
        (tmp_path / "00001_empty.cir").unlink()
        with pytest.raises(DataError, match="00001_empty.cir"):
            read_dataset(manifest_path)

    def test_duplicate_paths_rejected(self):
        rec = ManifestRecord("a.cir", E, "car2")
        with pytest.raises(DataError, match="duplicate"):
            DatasetManifest((rec, rec), RadarConfig(n_fast=4, m_slow=6))

    def test_rewrite_is_byte_identical(self, tmp_path):
        rng = np.random.default_rng(9)
        records = random_records(rng, T, 3)
        a, b = tmp_path / "a" / "manifest.json", tmp_path / "b" / "manifest.json"
        write_dataset(records, a, RadarConfig(n_fast=4, m_slow=6))
        write_dataset(records, b, RadarConfig(n_fast=4, m_slow=6))
        assert a.read_bytes() == b.read_bytes()
        for name in ("00000_talking.cir", "00002_talking.cir"):
            assert (a.parent / name).read_bytes() == (b.parent / name).read_bytes()


class TestSegmentation:
    def make_stream(self, m_total, n=4, dt_slow=0.1):
        data = np.arange(n * m_total, dtype=np.float64).reshape(n, m_total) + 0j
        return CirMatrix(data, 0.5e-9, dt_slow)

    def test_two_minutes_into_twelve_segments(self):
        stream = self.make_stream(1200)
        segments = segment_recording(stream, 10.0, B, "car1", "front", "p001")
        assert len(segments) == 12
        assert all(s.cir.m_slow == 100 for s in segments)
        assert [s.segment_index for s in segments] == list(range(12))

    def test_five_minutes_empty_into_thirty(self):
        stream = self.make_stream(3000)
        segments = segment_recording(stream, 10.0, E, "car2")
        assert len(segments) == 30

    def test_sub_window_recording_gives_nothing(self):
        stream = self.make_stream(99)
        assert segment_recording(stream, 10.0, B, "car1") == []

    def test_columns_conserved_with_remainder(self):
        stream = self.make_stream(1234)
        segments = segment_recording(stream, 10.0, M, "car1")
        total = sum(s.cir.m_slow for s in segments)
        assert total + 1234 % 100 == 1234
        # non-overlapping and in temporal order
        recon = np.concatenate([s.cir.data for s in segments], axis=1)
        assert np.array_equal(recon, stream.data[:, :total])

    def test_non_integer_window_rejected(self):
        stream = self.make_stream(100)
        with pytest.raises(ConfigError):
            segment_recording(stream, 0.25, B, "car1")

    def test_window_below_one_repetition_rejected(self):
        stream = self.make_stream(100)
        with pytest.raises(ConfigError):
            segment_recording(stream, 0.05, B, "car1")


def table_style_manifest():
    """Manifest whose per-car counts mirror the published dataset."""
    counts = {
        B: (512, 559),  # car1 total, car2 total
        T: (512, 556),
        M: (541, 560),
    }
    records = []
    for label, (c1, c2) in counts.items():
        for car, total in (("car1", c1), ("car2", c2)):
            for i in range(total):
                records.append(ManifestRecord(
                    file=f"{label.value}_{car}_{i:04d}.cir", label=label, car=car,
                    seat="front", participant=f"{car}_{label.value[:2]}{i // 12:03d}",
                    segment_index=i % 12))
    for i in range(186):
        records.append(ManifestRecord(f"empty_{i:04d}.cir", E, "car2", None, None, i))
    return DatasetManifest(tuple(records), RadarConfig())


class TestMakeSplit:
    def test_published_counts_reproduced(self):
        manifest = table_style_manifest()
        split = make_split(manifest, test_per_class=150, empty_test=20,
                           car1_validation={B: 144, T: 145, M: 161})
        counts = split.counts()
        assert counts["breathing"] == {"train": 368, "validation": 144 + 409, "test": 150}
        assert counts["talking"] == {"train": 367, "validation": 145 + 406, "test": 150}
        assert counts["moving"] == {"train": 380, "validation": 161 + 410, "test": 150}
        assert counts["empty"] == {"train": 66, "validation": 100, "test": 20}

    def test_default_sends_all_car1_to_train(self):
        manifest = table_style_manifest()
        split = make_split(manifest, test_per_class=150, empty_test=20)
        counts = split.counts()
        assert counts["breathing"]["train"] == 512
        assert counts["breathing"]["test"] == 150

    def test_car_disjointness(self):
        split = make_split(table_style_manifest(), 150, 20,
                           car1_validation={B: 144, T: 145, M: 161})
        for rec in split.records(Split.TRAIN):
            if rec.label.occupied:
                assert rec.car == "car1"
        for rec in split.records(Split.TEST):
            assert rec.car == "car2"

    def test_partition_is_exhaustive_and_disjoint(self):
        manifest = table_style_manifest()
        split = make_split(manifest, 150, 20)
        assert len(split.assignment) == len(manifest.records)
        assert set(split.assignment) == set(manifest.records)

    def test_test_set_takes_the_last_records(self):
        manifest = table_style_manifest()
        split = make_split(manifest, 150, 20)
        test_files = {r.file for r in split.records(Split.TEST) if r.label is B}
        groups = manifest.by_class()
        expected = {r.file for r in groups[B] if r.car == "car2"}
        expected = {r.file for r in sorted([x for x in groups[B] if x.car == "car2"],
                                           key=ManifestRecord.sort_key)[-150:]}
        assert test_files == expected

    def test_car1_only_manifest_is_insufficient(self):
        records = [ManifestRecord(f"b{i}.cir", B, "car1", "front", f"p{i:03d}", 0)
                   for i in range(200)]
        records += [ManifestRecord(f"e{i}.cir", E, "car2", None, None, i) for i in range(30)]
        manifest = DatasetManifest(tuple(records), RadarConfig())
        with pytest.raises(DataError, match="breathing"):
            make_split(manifest, test_per_class=150, empty_test=20)

    def test_determinism(self):
        manifest = table_style_manifest()
        a = make_split(manifest, 150, 20, car1_validation=100)
        b = make_split(manifest, 150, 20, car1_validation=100)
        assert a.assignment == b.assignment


class TestEpochPlan:
    def small_split(self, n_occ=3, n_empty=2):
        records = [ManifestRecord(f"b{i}.cir", B, "car1", "front", f"p{i}", 0)
                   for i in range(n_occ)]
        records += [ManifestRecord(f"e{i}.cir", E, "car2", None, None, i)
                    for i in range(n_empty)]
        manifest = DatasetManifest(tuple(records), RadarConfig())
        return make_split(manifest, test_per_class=0, empty_test=0, empty_train=n_empty)

    def test_multiplicities(self):
        plan = build_epoch_plan(self.small_split(), seed=0, reuse_occupied=5, reuse_empty=11)
        from collections import Counter
        uses = Counter(rec.file for rec, _ in plan.entries)
        assert uses == {"b0.cir": 5, "b1.cir": 5, "b2.cir": 5, "e0.cir": 11, "e1.cir": 11}
        draws = Counter(plan.entries)
        assert all(v == 1 for v in draws.values())  # (record, draw) unique

    def test_published_plan_length(self):
        # (368+367+380) occupied * 200 + 66 empty * 3000 = 421,000 draws
        records = []
        for label, n in ((B, 368), (T, 367), (M, 380)):
            records += [ManifestRecord(f"{label.value}{i}.cir", label, "car1",
                                       "front", f"p{i}", 0) for i in range(n)]
        records += [ManifestRecord(f"e{i}.cir", E, "car2", None, None, i) for i in range(66)]
        manifest = DatasetManifest(tuple(records), RadarConfig())
        split = make_split(manifest, test_per_class=0, empty_test=0, empty_train=66)
        plan = build_epoch_plan(split, seed=1)
        assert len(plan) == 421_000

    def test_tiny_plan_length(self):
        plan = build_epoch_plan(self.small_split(1, 1), seed=0)
        assert len(plan) == 3200

    def test_class_mass_ratio(self):
        plan = build_epoch_plan(self.small_split(3, 2), seed=0, reuse_occupied=7, reuse_empty=13)
        occ = sum(1 for rec, _ in plan.entries if rec.label.occupied)
        emp = len(plan.entries) - occ
        assert emp * (7 * 3) == occ * (13 * 2) * 1  # emp/occ == 13*2/(7*3)

    def test_seeded_shuffle_reproducible_and_seed_sensitive(self):
        split = self.small_split()
        a = build_epoch_plan(split, seed=5)
        b = build_epoch_plan(split, seed=5)
        c = build_epoch_plan(split, seed=6)
        assert a.entries == b.entries
        assert a.entries != c.entries

    def test_needs_both_classes(self):
        records = [ManifestRecord("b0.cir", B, "car1", "front", "p0", 0)]
        manifest = DatasetManifest(tuple(records), RadarConfig())
        split = make_split(manifest, test_per_class=0, empty_test=0)
        with pytest.raises(DataError, match="both classes"):
            build_epoch_plan(split, seed=0)
