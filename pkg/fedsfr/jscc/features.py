# SPDX-License-Identifier: Apache-2.0

"""Wire form of feature payloads: u32 vector count, then per vector a u32 length and little-endian f64 values"""

import struct
from typing import List, Sequence

import numpy as np

from fedsfr.exceptions import FormatError
from fedsfr.tensor import Tensor


def pack_features(vectors: Sequence[Tensor]) -> bytes:
    chunks = [struct.pack("<I", len(vectors))]
    for vector in vectors:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.ndim != 1:
            raise FormatError(f"Feature vectors must be one-dimensional, got shape {vector.shape}")
        chunks.append(struct.pack("<I", vector.shape[0]))
        chunks.append(vector.astype("<f8").tobytes())
    return b"".join(chunks)


def unpack_features(payload: bytes) -> List[Tensor]:
    if len(payload) < 4:
        raise FormatError("Feature payload truncated before its count")
    (count,) = struct.unpack_from("<I", payload, 0)
    cursor = 4
    vectors = []
    for _ in range(count):
        if cursor + 4 > len(payload):
            raise FormatError(f"Feature payload truncated at byte {cursor}")
        (length,) = struct.unpack_from("<I", payload, cursor)
        cursor += 4
        end = cursor + 8 * length
        if end > len(payload):
            raise FormatError(f"Feature payload truncated at byte {cursor}")
        vectors.append(np.frombuffer(payload[cursor:end], dtype="<f8").astype(np.float64))
        cursor = end
    if cursor != len(payload):
        raise FormatError(f"{len(payload) - cursor} trailing bytes after feature payload")
    return vectors
