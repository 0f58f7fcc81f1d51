# SPDX-License-Identifier: Apache-2.0

"""IDX and binary NetPBM ingestion"""

import gzip
import struct
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from fedsfr.data.dataset import ImageDataset
from fedsfr.exceptions import FormatError
from fedsfr.logging import logger
from fedsfr.tensor import Tensor

IDX_IMAGES_MAGIC = 0x00000803
MAX_IDX_ELEMENTS = 1 << 31
NETPBM_SUFFIXES = {"pgm": (".pgm",), "ppm": (".ppm",)}


def _read_bytes(path: Union[str, Path]) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as file:
        return file.read()  # type: ignore[no-any-return]


def parse_idx(payload: bytes) -> Tensor:
    """Parses a big-endian unsigned-byte IDX image file into an (n, 1, rows, cols) array in [0, 1]"""
    if len(payload) < 16:
        raise FormatError("IDX header truncated")
    magic, count, rows, cols = struct.unpack(">IIII", payload[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise FormatError(f"Bad IDX magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
    elements = count * rows * cols
    if elements > MAX_IDX_ELEMENTS:
        raise FormatError(f"IDX dimensions {count}x{rows}x{cols} overflow")
    if len(payload) - 16 != elements:
        raise FormatError(f"IDX payload has {len(payload) - 16} bytes, header declares {elements}")
    pixels = np.frombuffer(payload, dtype=np.uint8, offset=16)
    return pixels.reshape(count, 1, rows, cols).astype(np.float64) / 255.0


def load_idx(path: Union[str, Path]) -> ImageDataset:
    images = parse_idx(_read_bytes(path))
    logger.debug("Loaded %d images of shape %s from %s", images.shape[0], images.shape[1:], path)
    return ImageDataset.from_array(images)


def _header_tokens(payload: bytes, count: int) -> Tuple[List[bytes], int]:
    tokens: List[bytes] = []
    cursor = 0
    while len(tokens) < count:
        while cursor < len(payload) and payload[cursor : cursor + 1].isspace():
            cursor += 1
        if payload[cursor : cursor + 1] == b"#":
            while cursor < len(payload) and payload[cursor : cursor + 1] not in (b"\n", b"\r"):
                cursor += 1
            continue
        start = cursor
        while cursor < len(payload) and not payload[cursor : cursor + 1].isspace():
            cursor += 1
        if start == cursor:
            raise FormatError("NetPBM header truncated")
        tokens.append(payload[start:cursor])
    # exactly one whitespace byte separates the header from the raster
    return tokens, cursor + 1


def parse_netpbm(payload: bytes) -> Tensor:
    """Parses a binary P5 (gray) or P6 (RGB) image with maxval 255 into a (C, H, W) array in [0, 1]"""
    tokens, offset = _header_tokens(payload, 4)
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"Unsupported NetPBM magic {magic!r}")
    try:
        width, height, maxval = (int(token) for token in tokens[1:])
    except ValueError as e:
        raise FormatError(f"Malformed NetPBM header: {e}") from e
    if maxval != 255:
        raise FormatError(f"Unsupported NetPBM maxval {maxval}")
    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    raster = payload[offset:]
    if len(raster) != expected:
        raise FormatError(f"NetPBM raster has {len(raster)} bytes, header declares {expected}")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels)
    return pixels.transpose(2, 0, 1).astype(np.float64) / 255.0


def load_image_dir(path: Union[str, Path], format: Optional[str] = None) -> ImageDataset:
    """Loads every .pgm / .ppm file of a directory, in file-name order

    Args:
        path (str): Directory
        format (Optional[str]): "pgm" or "ppm" to restrict the suffixes read, both when None

    Returns:
        ImageDataset: Images of one uniform shape
    """
    suffixes = NETPBM_SUFFIXES[format] if format else NETPBM_SUFFIXES["pgm"] + NETPBM_SUFFIXES["ppm"]
    files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() in suffixes)
    images = [parse_netpbm(_read_bytes(file)) for file in files]
    shapes = {image.shape for image in images}
    if len(shapes) > 1:
        raise FormatError(f"Images in {path} have mixed shapes: {sorted(shapes)}")
    if not images:
        raise FormatError(f"No {'/'.join(suffixes)} images in {path}")
    logger.debug("Loaded %d images of shape %s from %s", len(images), images[0].shape, path)
    return ImageDataset.from_array(np.stack(images))
