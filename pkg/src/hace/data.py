"""Feature datasets and their on-disk formats.

Binary layout (little-endian): magic ``HACEFEAT``, u32 version, u32 S,
u32 D, u32 label width in bytes (always 4), then S records of D float32
values followed by a u32 label. CSV alternative: header
``label,f0,...,f{D-1}``.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"HACEFEAT"
VERSION = 1
LABEL_WIDTH = 4
_HEADER = struct.Struct("<8sIIII")


class FeatureFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FeatureDataset:
    x: np.ndarray
    y: np.ndarray
    split: str = "train"

    def __post_init__(self):
        if self.split not in ("train", "test"):
            raise ValueError(f"split must be 'train' or 'test', got {self.split!r}")
        if self.x.ndim != 2 or self.y.shape != (self.x.shape[0],):
            raise FeatureFormatError(f"inconsistent shapes x={self.x.shape} y={self.y.shape}")
        if not np.all(np.isfinite(self.x)):
            raise FeatureFormatError("non-finite feature value")

    @property
    def S(self) -> int:
        return self.x.shape[0]

    @property
    def D(self) -> int:
        return self.x.shape[1]

    def check_labels(self, n: int) -> None:
        if self.S and (self.y.min() < 0 or self.y.max() >= n):
            bad = self.y[(self.y < 0) | (self.y >= n)]
            raise FeatureFormatError(f"label {int(bad[0])} out of range [0, {n})")

    def normalized(self) -> FeatureDataset:
        norms = np.linalg.norm(self.x, axis=1, keepdims=True)
        return FeatureDataset(self.x / np.where(norms > 0, norms, 1.0), self.y, self.split)


def save_features(ds: FeatureDataset, path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["label"] + [f"f{j}" for j in range(ds.D)])
            for xi, yi in zip(ds.x.astype(np.float32), ds.y):
                w.writerow([int(yi)] + [repr(float(v)) for v in xi])
        return
    rec = np.dtype([("x", "<f4", (ds.D,)), ("y", "<u4")])
    body = np.empty(ds.S, dtype=rec)
    body["x"] = ds.x
    body["y"] = ds.y
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, ds.S, ds.D, LABEL_WIDTH))
        fh.write(body.tobytes())


def load_features(
    path: str | Path, n_classes: int | None = None, normalize: bool = False, split: str = "train"
) -> FeatureDataset:
    """Read a binary or CSV feature file (chosen by the ``.csv`` suffix)."""
    path = Path(path)
    if path.suffix == ".csv":
        x, y = _read_csv(path)
    else:
        x, y = _read_binary(path)
    if not np.all(np.isfinite(x)):
        rows = np.flatnonzero(~np.isfinite(x).all(axis=1))
        raise FeatureFormatError(f"{path}: non-finite feature in row {int(rows[0])}")
    ds = FeatureDataset(x.astype(np.float64), y.astype(np.int64), split)
    if n_classes is not None:
        ds.check_labels(n_classes)
    return ds.normalized() if normalize else ds


def _read_binary(path: Path) -> tuple[np.ndarray, np.ndarray]:
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FeatureFormatError(f"{path}: truncated header")
    magic, version, S, D, width = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FeatureFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FeatureFormatError(f"{path}: unsupported version {version}")
    if width != LABEL_WIDTH:
        raise FeatureFormatError(f"{path}: unsupported label width {width}")
    rec = np.dtype([("x", "<f4", (D,)), ("y", "<u4")])
    if len(raw) != _HEADER.size + S * rec.itemsize:
        raise FeatureFormatError(f"{path}: expected {S} records of {D} features")
    body = np.frombuffer(raw, dtype=rec, offset=_HEADER.size, count=S)
    return body["x"].reshape(S, D), body["y"]


def _read_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FeatureFormatError(f"{path}: empty file")
    header = rows[0]
    expected = ["label"] + [f"f{j}" for j in range(len(header) - 1)]
    if header != expected or len(header) < 2:
        raise FeatureFormatError(f"{path}: malformed header {header[:4]}...")
    try:
        arr = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
    except ValueError as err:
        raise FeatureFormatError(f"{path}: {err}") from None
    if arr.size == 0:
        arr = arr.reshape(0, len(header))
    if arr.shape[1] != len(header):
        raise FeatureFormatError(f"{path}: ragged rows")
    labels = arr[:, 0]
    if np.any(labels != np.round(labels)):
        raise FeatureFormatError(f"{path}: non-integer label")
    return arr[:, 1:], labels.astype(np.int64)


def pair_splits(train: FeatureDataset, test: FeatureDataset) -> tuple[FeatureDataset, FeatureDataset]:
    if train.D != test.D:
        raise FeatureFormatError(f"feature dimension mismatch: train D={train.D}, test D={test.D}")
    return (
        FeatureDataset(train.x, train.y, "train"),
        FeatureDataset(test.x, test.y, "test"),
    )
