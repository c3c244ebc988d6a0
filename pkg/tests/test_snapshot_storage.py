"""Tests for snapshot file formats and the per-run snapshot store"""

import json
import struct

import numpy as np
import pytest

from src.errors import MalformedSnapshot
from src.snapshot import FieldSnapshot
from src.snapshot_storage import (
    MAGIC,
    SnapshotStore,
    decode_gfld,
    encode_gfld,
    read_csv_snapshot,
    read_snapshot,
    write_csv_snapshot,
    write_snapshot,
)


class TestSnapshotFiles:
    """Test cases for GFLD and CSV snapshot files"""

    @pytest.fixture
    def snapshot(self):
        rng = np.random.default_rng(30)
        return FieldSnapshot(rng.standard_normal((5, 4)), [0.25, 0.75])

    def test_gfld_layout(self, snapshot):
        """Test the header fields and total size"""
        payload = encode_gfld(snapshot)
        magic, version, n_f, m_f, n_d = struct.unpack_from("<4sIIII", payload, 0)
        assert (magic, version, n_f, m_f, n_d) == (MAGIC, 1, 5, 4, 2)
        assert len(payload) == 20 + 8 * 2 + 8 * 20

    def test_gfld_file_is_bit_exact(self, tmp_path, snapshot):
        """Test that a written file reads back identical values"""
        path = write_snapshot(tmp_path / "a.gfld", snapshot)
        loaded = read_snapshot(path)
        assert np.array_equal(loaded.field, snapshot.field)
        assert np.array_equal(loaded.params, snapshot.params)
        assert not list(tmp_path.glob(".tmp_*"))

    def test_bad_magic(self, snapshot):
        """Test magic check"""
        payload = b"XXXX" + encode_gfld(snapshot)[4:]
        with pytest.raises(MalformedSnapshot):
            decode_gfld(payload)

    def test_bad_version(self, snapshot):
        """Test version check"""
        payload = bytearray(encode_gfld(snapshot))
        payload[4:8] = struct.pack("<I", 9)
        with pytest.raises(MalformedSnapshot):
            decode_gfld(bytes(payload))

    def test_truncated_payload(self, snapshot):
        """Test size check"""
        with pytest.raises(MalformedSnapshot):
            decode_gfld(encode_gfld(snapshot)[:-8])
        with pytest.raises(MalformedSnapshot):
            decode_gfld(b"GFL")

    def test_missing_file(self, tmp_path):
        """Test an unreadable path"""
        with pytest.raises(MalformedSnapshot):
            read_snapshot(tmp_path / "missing.gfld")

    def test_csv_with_sidecar(self, tmp_path, snapshot):
        """Test the CSV format and its metadata sidecar"""
        path = write_csv_snapshot(tmp_path / "f.csv", snapshot)
        with open(tmp_path / "f.json", "r", encoding="utf-8") as f:
            metadata = json.load(f)
        assert metadata == {"n_f": 5, "m_f": 4, "xi": [0.25, 0.75]}
        loaded = read_snapshot(path)
        assert np.array_equal(loaded.field, snapshot.field)
        assert np.array_equal(loaded.params, snapshot.params)

    def test_csv_is_bit_exact(self, tmp_path):
        """Test that values needing 17 significant digits survive the CSV round trip"""
        rng = np.random.default_rng(12)
        field = np.vstack([[0.1 + 0.2, 1.0 / 3.0, 2.0 ** -40, -np.pi], rng.standard_normal((3, 4)) * 1e-7])
        path = write_csv_snapshot(tmp_path / "exact.csv", FieldSnapshot(field, [0.1 + 0.2]))
        loaded = read_csv_snapshot(path)
        assert np.array_equal(loaded.field, field)
        assert loaded.params[0] == 0.1 + 0.2

    def test_csv_without_sidecar(self, tmp_path):
        """Test a bare CSV matrix"""
        path = tmp_path / "bare.csv"
        path.write_text("1,2\n3,4\n5,6\n", encoding="utf-8")
        loaded = read_csv_snapshot(path)
        assert loaded.shape == (3, 2)
        assert loaded.params.size == 0

    def test_csv_shape_mismatch(self, tmp_path, snapshot):
        """Test that a sidecar disagreeing with the matrix is rejected"""
        path = write_csv_snapshot(tmp_path / "f.csv", snapshot)
        (tmp_path / "f.json").write_text(json.dumps({"n_f": 3, "m_f": 4, "xi": []}), encoding="utf-8")
        with pytest.raises(MalformedSnapshot):
            read_snapshot(path)


class TestSnapshotStore:
    """Test cases for SnapshotStore"""

    @pytest.fixture
    def store(self, tmp_path):
        return SnapshotStore(tmp_path)

    def test_save_and_load(self, store):
        """Test storage by point id"""
        snapshots = {i: FieldSnapshot(np.full((2, 2), float(i + 1)), [i / 10]) for i in (3, 0, 1)}
        assert store.save_all(snapshots) == 3
        assert store.point_ids() == [0, 1, 3]
        assert store.path_for(3).name == "point_00003.gfld"
        assert store.exists(1) and not store.exists(2)
        assert np.array_equal(store.load(3).field, snapshots[3].field)

    def test_missing_point(self, store):
        """Test loading an absent point"""
        assert store.point_ids() == []
        with pytest.raises(MalformedSnapshot):
            store.load(0)
