# SPDX-License-Identifier: Apache-2.0

import gzip
import struct

import numpy as np
import pytest

from fedsfr.data import (
    ImageDataset,
    PartitionSpec,
    load_idx,
    load_image_dir,
    minibatches,
    parse_idx,
    parse_netpbm,
    partition,
    synth_dataset,
)
from fedsfr.exceptions import BudgetError, DegenerateInputError, FormatError

PIXELS = bytes([0, 255, 51, 102, 255, 255, 0, 0, 17, 34, 68, 136, 1, 2, 3, 4])


def idx_payload(count=4, rows=2, cols=2, pixels=PIXELS, magic=0x00000803) -> bytes:
    return struct.pack(">IIII", magic, count, rows, cols) + pixels


def test_parse_idx_fixture():
    images = parse_idx(idx_payload())
    assert images.shape == (4, 1, 2, 2)
    assert images[0, 0].tolist() == [[0.0, 1.0], [0.2, 0.4]]
    assert images[1, 0].tolist() == [[1.0, 1.0], [0.0, 0.0]]
    assert images[3, 0, 1, 1] == 4 / 255


def test_load_idx_plain_and_gzip(tmp_path):
    plain = tmp_path / "images.idx"
    plain.write_bytes(idx_payload())
    packed = tmp_path / "images.idx.gz"
    with gzip.open(packed, "wb") as file:
        file.write(idx_payload())

    first, second = load_idx(plain), load_idx(packed)
    assert len(first) == 4
    assert first.shape == (1, 2, 2)
    assert first.ids.tolist() == [0, 1, 2, 3]
    assert first.images.tobytes() == second.images.tobytes()


def test_idx_rejects_bad_magic():
    with pytest.raises(FormatError, match="magic"):
        parse_idx(idx_payload(magic=0x00000801))


def test_idx_rejects_truncation():
    with pytest.raises(FormatError):
        parse_idx(idx_payload(pixels=PIXELS[:-1]))
    with pytest.raises(FormatError):
        parse_idx(b"\x00\x00\x08\x03")


def test_idx_rejects_dimension_overflow():
    with pytest.raises(FormatError, match="overflow"):
        parse_idx(idx_payload(count=2**20, rows=2**10, cols=2**10, pixels=b""))


def test_idx_with_no_images_is_valid():
    dataset = ImageDataset.from_array(parse_idx(idx_payload(count=0, pixels=b"")))
    assert len(dataset) == 0
    assert dataset.shape == (1, 2, 2)


def test_parse_p5_with_comment():
    image = parse_netpbm(b"P5\n# two by two\n2 2\n255\n" + bytes([0, 255, 51, 102]))
    assert image.shape == (1, 2, 2)
    assert image[0].tolist() == [[0.0, 1.0], [0.2, 0.4]]


def test_parse_p6_channels():
    image = parse_netpbm(b"P6 1 1 255\n" + bytes([255, 0, 0]))
    assert image.shape == (3, 1, 1)
    assert image[:, 0, 0].tolist() == [1.0, 0.0, 0.0]


def test_netpbm_rejects_unsupported_inputs():
    with pytest.raises(FormatError, match="maxval"):
        parse_netpbm(b"P5 1 1 65535\n" + bytes([0, 0]))
    with pytest.raises(FormatError, match="magic"):
        parse_netpbm(b"P2 1 1 255\n0")
    with pytest.raises(FormatError):
        parse_netpbm(b"P5 2 2 255\n" + bytes([0, 0, 0]))


def test_load_image_dir(tmp_path):
    (tmp_path / "b.pgm").write_bytes(b"P5 2 2 255\n" + bytes([255] * 4))
    (tmp_path / "a.pgm").write_bytes(b"P5 2 2 255\n" + bytes([0] * 4))
    (tmp_path / "notes.txt").write_text("ignored")
    dataset = load_image_dir(tmp_path)
    assert len(dataset) == 2
    assert dataset.images[0].max() == 0.0
    assert dataset.images[1].min() == 1.0


def test_load_image_dir_rejects_mixed_shapes(tmp_path):
    (tmp_path / "a.pgm").write_bytes(b"P5 2 2 255\n" + bytes(4))
    (tmp_path / "b.pgm").write_bytes(b"P5 3 1 255\n" + bytes(3))
    with pytest.raises(FormatError, match="mixed"):
        load_image_dir(tmp_path)


def test_load_image_dir_rejects_empty_dir(tmp_path):
    with pytest.raises(FormatError):
        load_image_dir(tmp_path, format="ppm")


def test_dataset_rejects_out_of_range_pixels():
    with pytest.raises(ValueError):
        ImageDataset.from_array(np.full((1, 1, 2, 2), 1.5))


def test_dataset_is_read_only():
    dataset = ImageDataset.from_array(np.zeros((2, 1, 2, 2)))
    with pytest.raises(ValueError):
        dataset.images[0, 0, 0, 0] = 1.0


def test_dataset_leaves_the_source_array_writable():
    source = np.zeros((2, 1, 2, 2))
    dataset = ImageDataset.from_array(source)
    source[0, 0, 0, 0] = 1.0
    assert source.flags.writeable
    assert dataset.images[0, 0, 0, 0] == 0.0


def test_synth_dataset_is_reproducible():
    first = synth_dataset(np.random.default_rng(5), 10, (3, 8, 8), "gaussian-blobs")
    second = synth_dataset(np.random.default_rng(5), 10, (3, 8, 8), "gaussian-blobs")
    assert first.images.tobytes() == second.images.tobytes()


@pytest.mark.parametrize("kind", ["gaussian-blobs", "stripes"])
def test_synth_dataset_range(kind, rng):
    dataset = synth_dataset(rng, 1000, (1, 8, 8), kind)
    assert len(dataset) == 1000
    assert dataset.images.min() >= 0.0 and dataset.images.max() <= 1.0
    assert 0.05 < float(dataset.images.mean()) < 0.95


def test_synth_dataset_rejects_bad_arguments(rng):
    with pytest.raises(DegenerateInputError):
        synth_dataset(rng, 0, (1, 8, 8), "stripes")
    with pytest.raises(ValueError):
        synth_dataset(rng, 4, (1, 8, 8), "noise")


def test_partition_is_disjoint_and_weighted(rng):
    dataset = ImageDataset.from_array(np.zeros((41_000, 1, 1, 1)))
    shards, test = partition(dataset, PartitionSpec(k=50, client_size=800, public_size=128, test_size=1000), rng)

    assert len(shards) == 50
    assert [s.client_id for s in shards] == list(range(50))
    train_ids = np.concatenate([s.data.ids for s in shards])
    assert train_ids.size == 40_000
    assert np.unique(train_ids).size == 40_000
    assert not set(train_ids.tolist()) & set(test.ids.tolist())
    assert len(test) == 1000
    assert sum(s.weight for s in shards) == pytest.approx(1.0, abs=1e-12)

    for shard in shards:
        assert np.unique(shard.public).size == 128
        assert set(shard.public_data.ids.tolist()) <= set(shard.data.ids.tolist())


def test_partition_single_client(rng):
    dataset = ImageDataset.from_array(np.zeros((30, 1, 1, 1)))
    (shard,), test = partition(dataset, PartitionSpec(k=1, client_size=20, public_size=5), rng)
    assert shard.weight == 1.0
    assert len(shard.data) == 20
    assert len(test) == 0


def test_partition_rejects_infeasible_sizes(rng):
    dataset = ImageDataset.from_array(np.zeros((30, 1, 1, 1)))
    with pytest.raises(BudgetError):
        partition(dataset, PartitionSpec(k=4, client_size=8, public_size=2), rng)
    with pytest.raises(BudgetError):
        partition(dataset, PartitionSpec(k=2, client_size=8, public_size=9), rng)


def test_minibatches_keep_short_tail(rng):
    batches = list(minibatches(10, 4, rng))
    assert [b.size for b in batches] == [4, 4, 2]
    assert sorted(np.concatenate(batches).tolist()) == list(range(10))


def test_minibatches_one_chunk_per_epoch(rng):
    batches = list(minibatches(10, 16, rng, epochs=3))
    assert [b.size for b in batches] == [10, 10, 10]


def test_minibatches_reject_bad_arguments(rng):
    with pytest.raises(DegenerateInputError):
        list(minibatches(0, 4, rng))
    with pytest.raises(ValueError):
        list(minibatches(10, 0, rng))
