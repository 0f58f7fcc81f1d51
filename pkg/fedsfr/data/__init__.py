# SPDX-License-Identifier: Apache-2.0

from fedsfr.data.dataset import ImageDataset
from fedsfr.data.ingest import load_idx, load_image_dir, parse_idx, parse_netpbm
from fedsfr.data.partition import ClientShard, PartitionSpec, minibatches, partition
from fedsfr.data.synthetic import synth_dataset

__all__ = [
    "ClientShard",
    "ImageDataset",
    "PartitionSpec",
    "load_idx",
    "load_image_dir",
    "minibatches",
    "parse_idx",
    "parse_netpbm",
    "partition",
    "synth_dataset",
]
