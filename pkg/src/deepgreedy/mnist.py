"""Reader for the IDX container used by the MNIST digit files.

Layout (all header integers big-endian, unsigned 32 bit)::

    images: magic 0x00000803 | count | rows | cols | count*rows*cols pixel bytes
    labels: magic 0x00000801 | count | count label bytes
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IdxFormatError, IdxRangeError, IdxTruncationError, InvalidArgumentError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class IdxImageSet:
    pixels: np.ndarray  # (count, rows, cols) uint8

    @property
    def count(self) -> int:
        return self.pixels.shape[0]

    @property
    def rows(self) -> int:
        return self.pixels.shape[1]

    @property
    def cols(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class IdxLabelSet:
    labels: np.ndarray  # (count,) uint8

    @property
    def count(self) -> int:
        return self.labels.shape[0]


def _header(data: bytes, n_fields: int, magic: int, kind: str) -> tuple[int, ...]:
    size = 4 * n_fields
    if len(data) < size:
        raise IdxTruncationError(f"{kind} header needs {size} bytes, got {len(data)}")
    fields = struct.unpack(f">{n_fields}I", data[:size])
    if fields[0] != magic:
        raise IdxFormatError(f"bad {kind} magic 0x{fields[0]:08x}, expected 0x{magic:08x}")
    return fields


def parse_idx_images(data: bytes) -> IdxImageSet:
    _, count, rows, cols = _header(data, 4, IMAGE_MAGIC, "image")
    need = count * rows * cols
    payload = memoryview(data)[16:]
    if len(payload) < need:
        raise IdxTruncationError(f"image payload has {len(payload)} bytes, header declares {need}")
    pixels = np.frombuffer(payload[:need], dtype=np.uint8).reshape(count, rows, cols).copy()
    return IdxImageSet(pixels)


def parse_idx_labels(data: bytes) -> IdxLabelSet:
    _, count = _header(data, 2, LABEL_MAGIC, "label")
    payload = memoryview(data)[8:]
    if len(payload) < count:
        raise IdxTruncationError(f"label payload has {len(payload)} bytes, header declares {count}")
    labels = np.frombuffer(payload[:count], dtype=np.uint8).copy()
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        raise IdxRangeError(f"label {labels[bad[0]]} at index {bad[0]} is not a digit")
    return IdxLabelSet(labels)


def serialize_idx_images(images: IdxImageSet) -> bytes:
    header = struct.pack(">4I", IMAGE_MAGIC, images.count, images.rows, images.cols)
    return header + np.ascontiguousarray(images.pixels, dtype=np.uint8).tobytes()


def serialize_idx_labels(labels: IdxLabelSet) -> bytes:
    return struct.pack(">2I", LABEL_MAGIC, labels.count) + labels.labels.astype(np.uint8).tobytes()


def load_idx_pair(images_path, labels_path) -> tuple[IdxImageSet, IdxLabelSet]:
    images = parse_idx_images(Path(images_path).read_bytes())
    labels = parse_idx_labels(Path(labels_path).read_bytes())
    if images.count != labels.count:
        raise IdxFormatError(
            f"{images_path} holds {images.count} images but {labels_path} has {labels.count} labels"
        )
    return images, labels


def pool_image(image, factor: int) -> np.ndarray:
    """Non-overlapping ``factor x factor`` mean pooling, scaled to [0, 1]."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise InvalidArgumentError(f"expected a 2-D image, got shape {img.shape}")
    rows, cols = img.shape
    if factor < 1 or rows % factor or cols % factor:
        raise InvalidArgumentError(f"pool factor {factor} does not divide {rows}x{cols}")
    blocks = img.reshape(rows // factor, factor, cols // factor, factor)
    return (blocks.mean(axis=(1, 3)) / 255.0).ravel()


def pool_images(images: IdxImageSet, factor: int) -> np.ndarray:
    """Pool every image of a set; returns ``(count, features)``."""
    if factor < 1 or images.rows % factor or images.cols % factor:
        raise InvalidArgumentError(
            f"pool factor {factor} does not divide {images.rows}x{images.cols}"
        )
    r, c = images.rows // factor, images.cols // factor
    blocks = images.pixels.astype(float).reshape(images.count, r, factor, c, factor)
    return blocks.mean(axis=(2, 4)).reshape(images.count, r * c) / 255.0
