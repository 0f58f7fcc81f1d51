# SPDX-License-Identifier: Apache-2.0

"""FSFR checkpoint files

Layout, little-endian throughout::

    b"FSFR" | u16 version | u16 network count
    per network:
        u8 rank | u32 input dims[rank] | u32 layer count
        per layer: u8 kind id | u8 dim count | u32 dims[dim count]
        per parameterized layer: f64 payload[param_count]
"""

import struct
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from fedsfr.exceptions import FormatError
from fedsfr.tensor.layers import layer_from_dims
from fedsfr.tensor.network import Network

MAGIC = b"FSFR"
VERSION = 1


def encode_checkpoint(networks: Sequence[Network]) -> bytes:
    chunks = [MAGIC, struct.pack("<HH", VERSION, len(networks))]
    for net in networks:
        chunks.append(struct.pack("<B", len(net.input_shape)))
        chunks.append(struct.pack(f"<{len(net.input_shape)}I", *net.input_shape))
        chunks.append(struct.pack("<I", len(net.layers)))
        for layer in net.layers:
            dims = layer.dims
            chunks.append(struct.pack("<BB", int(layer.kind), len(dims)))
            chunks.append(struct.pack(f"<{len(dims)}I", *dims))
        for params in net.params:
            chunks.append(params.astype("<f8").tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.cursor = 0

    def take(self, size: int) -> bytes:
        if self.cursor + size > len(self.payload):
            raise FormatError(f"Checkpoint truncated at byte {self.cursor}")
        chunk = self.payload[self.cursor : self.cursor + size]
        self.cursor += size
        return chunk

    def unpack(self, fmt: str) -> Tuple[int, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(payload: bytes) -> List[Network]:
    reader = _Reader(payload)
    if reader.take(4) != MAGIC:
        raise FormatError("Not an FSFR checkpoint (bad magic)")
    version, count = reader.unpack("<HH")
    if version != VERSION:
        raise FormatError(f"Unsupported checkpoint version {version}")

    networks = []
    for _ in range(count):
        (rank,) = reader.unpack("<B")
        input_shape = reader.unpack(f"<{rank}I")
        (n_layers,) = reader.unpack("<I")
        layers = []
        for _ in range(n_layers):
            kind, n_dims = reader.unpack("<BB")
            try:
                layers.append(layer_from_dims(kind, reader.unpack(f"<{n_dims}I")))
            except (ValueError, TypeError) as e:
                raise FormatError(f"Invalid layer table entry: {e}") from e
        skeleton = Network(input_shape, layers)
        params = [np.frombuffer(reader.take(8 * n), dtype="<f8").astype(np.float64) for _, n in skeleton.boundaries]
        networks.append(Network(input_shape, layers, params))
    if reader.cursor != len(payload):
        raise FormatError(f"{len(payload) - reader.cursor} trailing bytes after checkpoint")
    return networks


def write_checkpoint(path: Union[str, Path], networks: Sequence[Network]) -> None:
    with open(path, "wb") as file:
        file.write(encode_checkpoint(networks))


def read_checkpoint(path: Union[str, Path]) -> List[Network]:
    with open(path, "rb") as file:
        return decode_checkpoint(file.read())
