"""Snapshot file formats and per-run snapshot storage

Binary layout (little-endian): magic b"GFLD", u32 version, u32 n_f, u32 m_f,
u32 n_d, n_d float64 parameter coordinates, then n_f·m_f float64 values in
row-major order. CSV snapshots hold the bare matrix; the parameter point and
shape live in a `<name>.json` sidecar next to it.
"""

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
import pandas as pd

from src.config import SNAPSHOT_DIR
from src.errors import MalformedSnapshot
from src.snapshot import FieldSnapshot

MAGIC = b"GFLD"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIII")

PathLike = Union[str, Path]


def atomic_write(path: Path, payload: bytes):
    """Write to a temporary file in the target folder, then rename over the target"""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=str(path.parent), prefix=".tmp_", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp_name, path)
    except Exception:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise


def encode_gfld(snapshot: FieldSnapshot) -> bytes:
    n_f, m_f = snapshot.shape
    params = snapshot.params
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, n_f, m_f, params.size)
    return (
        header
        + params.astype("<f8").tobytes()
        + np.ascontiguousarray(snapshot.field).astype("<f8").tobytes(order="C")
    )


def decode_gfld(payload: bytes, source: str = "<bytes>") -> FieldSnapshot:
    """
    Parse a GFLD payload

    Raises:
        MalformedSnapshot: bad magic, unknown version, or a size that does not
            match the header
    """
    if len(payload) < _HEADER.size:
        raise MalformedSnapshot(f"{source}: truncated header ({len(payload)} bytes)")
    magic, version, n_f, m_f, n_d = _HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        raise MalformedSnapshot(f"{source}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise MalformedSnapshot(f"{source}: unsupported version {version}")
    if n_f < 1 or m_f < 1:
        raise MalformedSnapshot(f"{source}: empty field shape {n_f}x{m_f}")
    expected = _HEADER.size + 8 * n_d + 8 * n_f * m_f
    if len(payload) != expected:
        raise MalformedSnapshot(f"{source}: expected {expected} bytes, found {len(payload)}")
    offset = _HEADER.size
    params = np.frombuffer(payload, dtype="<f8", count=n_d, offset=offset)
    offset += 8 * n_d
    values = np.frombuffer(payload, dtype="<f8", count=n_f * m_f, offset=offset)
    try:
        return FieldSnapshot(values.reshape((n_f, m_f)).astype(np.float64), params.astype(np.float64))
    except Exception as e:
        raise MalformedSnapshot(f"{source}: {e}")


def write_gfld(path: PathLike, snapshot: FieldSnapshot) -> Path:
    path = Path(path)
    atomic_write(path, encode_gfld(snapshot))
    return path


def read_gfld(path: PathLike) -> FieldSnapshot:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise MalformedSnapshot(f"{path}: cannot read ({e})")
    return decode_gfld(payload, source=str(path))


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def write_csv_snapshot(path: PathLike, snapshot: FieldSnapshot) -> Path:
    """Matrix as a header-less CSV plus a JSON sidecar with shape and parameters"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(snapshot.field).to_csv(path, header=False, index=False, float_format="%.17g")
    metadata = {
        "n_f": snapshot.shape[0],
        "m_f": snapshot.shape[1],
        "xi": [float(x) for x in snapshot.params],
    }
    with open(_sidecar_path(path), "w", encoding="utf-8") as f:
        json.dump(metadata, f, indent=2)
    return path


def read_csv_snapshot(path: PathLike) -> FieldSnapshot:
    path = Path(path)
    try:
        frame = pd.read_csv(path, header=None, float_precision="round_trip")
    except Exception as e:
        raise MalformedSnapshot(f"{path}: cannot parse CSV ({e})")
    matrix = frame.to_numpy(dtype=np.float64)
    params: List[float] = []
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        try:
            with open(sidecar, "r", encoding="utf-8") as f:
                metadata = json.load(f)
        except json.JSONDecodeError as e:
            raise MalformedSnapshot(f"{sidecar}: invalid JSON ({e})")
        expected = (metadata.get("n_f"), metadata.get("m_f"))
        if None not in expected and tuple(expected) != matrix.shape:
            raise MalformedSnapshot(
                f"{path}: sidecar shape {expected[0]}x{expected[1]} does not match "
                f"{matrix.shape[0]}x{matrix.shape[1]}"
            )
        params = metadata.get("xi", [])
    try:
        return FieldSnapshot(matrix, np.asarray(params, dtype=np.float64))
    except Exception as e:
        raise MalformedSnapshot(f"{path}: {e}")


def read_snapshot(path: PathLike) -> FieldSnapshot:
    """Read either format, chosen by file extension"""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_csv_snapshot(path)
    return read_gfld(path)


def write_snapshot(path: PathLike, snapshot: FieldSnapshot) -> Path:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return write_csv_snapshot(path, snapshot)
    return write_gfld(path, snapshot)


class SnapshotStore:
    """Snapshots of one campaign, one GFLD file per sample point"""

    def __init__(self, results_dir: PathLike):
        self.directory = Path(results_dir) / SNAPSHOT_DIR

    def path_for(self, point_id: int) -> Path:
        return self.directory / f"point_{point_id:05d}.gfld"

    def save(self, point_id: int, snapshot: FieldSnapshot) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        return write_gfld(self.path_for(point_id), snapshot)

    def save_all(self, snapshots: Dict[int, FieldSnapshot]) -> int:
        for point_id in sorted(snapshots):
            self.save(point_id, snapshots[point_id])
        return len(snapshots)

    def load(self, point_id: int) -> FieldSnapshot:
        path = self.path_for(point_id)
        if not path.exists():
            raise MalformedSnapshot(f"No snapshot stored for point {point_id} ({path})")
        return read_gfld(path)

    def exists(self, point_id: int) -> bool:
        return self.path_for(point_id).exists()

    def point_ids(self) -> List[int]:
        if not self.directory.exists():
            return []
        ids = []
        for path in self.directory.glob("point_*.gfld"):
            try:
                ids.append(int(path.stem.split("_", 1)[1]))
            except ValueError:
                continue
        return sorted(ids)

