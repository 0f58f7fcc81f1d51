# SPDX-License-Identifier: Apache-2.0

import struct

import pytest

from fedsfr.exceptions import FormatError
from fedsfr.tensor.checkpoint import (
    MAGIC,
    decode_checkpoint,
    encode_checkpoint,
    read_checkpoint,
    write_checkpoint,
)


def test_checkpoint_preserves_layer_table_and_parameters(desk_model, tmp_path):
    path = tmp_path / "model.ckpt"
    write_checkpoint(path, [desk_model.encoder, desk_model.decoder])
    encoder, decoder = read_checkpoint(path)

    assert encoder.signature == desk_model.encoder.signature
    assert decoder.signature == desk_model.decoder.signature
    assert encoder.flatten().values.tobytes() == desk_model.encoder.flatten().values.tobytes()
    assert decoder.flatten().values.tobytes() == desk_model.decoder.flatten().values.tobytes()


def test_checkpoint_header(desk_model):
    payload = encode_checkpoint([desk_model.encoder])
    assert payload[:4] == MAGIC
    assert struct.unpack("<HH", payload[4:8]) == (1, 1)


def test_bad_magic_is_rejected(desk_model):
    payload = encode_checkpoint([desk_model.encoder])
    with pytest.raises(FormatError, match="magic"):
        decode_checkpoint(b"XXXX" + payload[4:])


def test_unknown_version_is_rejected(desk_model):
    payload = encode_checkpoint([desk_model.encoder])
    with pytest.raises(FormatError, match="version"):
        decode_checkpoint(MAGIC + struct.pack("<HH", 9, 1) + payload[8:])


def test_truncated_checkpoint_is_rejected(desk_model):
    payload = encode_checkpoint([desk_model.encoder])
    with pytest.raises(FormatError, match="truncated"):
        decode_checkpoint(payload[:-3])


def test_trailing_bytes_are_rejected(desk_model):
    payload = encode_checkpoint([desk_model.encoder])
    with pytest.raises(FormatError, match="trailing"):
        decode_checkpoint(payload + b"\x00")


def test_unknown_layer_kind_is_rejected():
    payload = MAGIC + struct.pack("<HH", 1, 1) + struct.pack("<B", 1) + struct.pack("<I", 4)
    payload += struct.pack("<I", 1) + struct.pack("<BB", 99, 0)
    with pytest.raises(FormatError):
        decode_checkpoint(payload)


def test_empty_checkpoint():
    assert decode_checkpoint(MAGIC + struct.pack("<HH", 1, 0)) == []
