"""Bit-exact reading and writing of IDX image/label files (the MNIST container format).

Layout is big-endian throughout: a 4-byte magic number (0x00000803 for image
files, 0x00000801 for label files), one 4-byte unsigned size per dimension,
then the raw u8 payload in row-major order.  Gzip-compressed files are
detected by their 0x1F 0x8B prefix and decompressed transparently on read.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import BadMagic, DimensionMismatch, Oversized, Truncated

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

_GZIP_PREFIX = b"\x1f\x8b"


@dataclass(frozen=True)
class ImageDataset:
    """A stack of equally sized 8-bit grayscale images, shape (count, H, W)."""

    images: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.images, dtype=np.uint8)
        if arr.ndim != 3:
            raise DimensionMismatch(f"expected (count, H, W) array, got shape {arr.shape}")
        object.__setattr__(self, "images", arr)

    @classmethod
    def from_list(cls, images: Sequence[np.ndarray]) -> "ImageDataset":
        """Stack a sequence of 2-D images, rejecting mixed shapes."""
        if not images:
            return cls(np.zeros((0, 0, 0), dtype=np.uint8))
        shape = np.asarray(images[0]).shape
        for n, img in enumerate(images):
            if np.asarray(img).shape != shape:
                raise DimensionMismatch(
                    f"image {n} has shape {np.asarray(img).shape}, expected {shape}"
                )
        return cls(np.stack([np.asarray(img, dtype=np.uint8) for img in images]))

    @property
    def count(self) -> int:
        return self.images.shape[0]

    def __len__(self) -> int:
        return self.count

    def __getitem__(self, n: int) -> np.ndarray:
        return self.images[n]


@dataclass(frozen=True)
class LabelVector:
    """An ordered vector of unsigned 8-bit labels."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels, dtype=np.uint8).reshape(-1)
        object.__setattr__(self, "labels", arr)

    @property
    def count(self) -> int:
        return self.labels.shape[0]

    def __len__(self) -> int:
        return self.count


def _maybe_decompress(data: bytes) -> bytes:
    if data[:2] == _GZIP_PREFIX:
        return gzip.decompress(data)
    return data


def _read_header(data: bytes, magic: int, ndims: int, what: str) -> tuple[int, ...]:
    need = 4 * (1 + ndims)
    if len(data) < 4:
        raw = struct.unpack(">I", data.ljust(4, b"\0"))[0]
        raise BadMagic(f"{what}: stream too short for a magic number (got 0x{raw:08x})")
    got = struct.unpack(">I", data[:4])[0]
    if got != magic:
        raise BadMagic(f"{what}: expected magic 0x{magic:08x}, got 0x{got:08x}")
    if len(data) < need:
        raise Truncated(f"{what}: header needs {need} bytes, stream has {len(data)}")
    return struct.unpack(f">{ndims}I", data[4:need])


def read_idx_images(data: bytes) -> ImageDataset:
    """Decode an IDX image stream into a dataset, byte layout checked exactly.

    Raises BadMagic, Truncated (payload shorter than the header promises) or
    Oversized (trailing bytes after the payload).
    """
    data = _maybe_decompress(bytes(data))
    count, height, width = _read_header(data, IMAGE_MAGIC, 3, "images")
    payload = data[16:]
    expected = count * height * width
    if len(payload) < expected:
        raise Truncated(f"images: payload has {len(payload)} bytes, header promises {expected}")
    if len(payload) > expected:
        raise Oversized(f"images: {len(payload) - expected} trailing bytes after payload")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(count, height, width)
    return ImageDataset(pixels)


def write_idx_images(dataset: ImageDataset) -> bytes:
    """Encode a dataset as an IDX image stream (inverse of read_idx_images)."""
    arr = dataset.images
    count, height, width = arr.shape
    header = struct.pack(">IIII", IMAGE_MAGIC, count, height, width)
    return header + arr.tobytes()


def read_idx_labels(data: bytes) -> LabelVector:
    """Decode an IDX label stream; same error contract as read_idx_images."""
    data = _maybe_decompress(bytes(data))
    (count,) = _read_header(data, LABEL_MAGIC, 1, "labels")
    payload = data[8:]
    if len(payload) < count:
        raise Truncated(f"labels: payload has {len(payload)} bytes, header promises {count}")
    if len(payload) > count:
        raise Oversized(f"labels: {len(payload) - count} trailing bytes after payload")
    return LabelVector(np.frombuffer(payload, dtype=np.uint8))


def write_idx_labels(vector: LabelVector) -> bytes:
    """Encode a label vector as an IDX label stream."""
    header = struct.pack(">II", LABEL_MAGIC, vector.count)
    return header + vector.labels.tobytes()


def load_idx_images(path: str | Path) -> ImageDataset:
    return read_idx_images(Path(path).read_bytes())


def load_idx_labels(path: str | Path) -> LabelVector:
    return read_idx_labels(Path(path).read_bytes())


def save_idx_images(path: str | Path, dataset: ImageDataset) -> None:
    Path(path).write_bytes(write_idx_images(dataset))


def save_idx_labels(path: str | Path, vector: LabelVector) -> None:
    Path(path).write_bytes(write_idx_labels(vector))
