# SPDX-License-Identifier: Apache-2.0

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import numpy.typing as npt

from fedsfr.exceptions import ShapeMismatchError
from fedsfr.tensor import Shape, Tensor


@dataclass(frozen=True)
class ImageDataset:
    """An immutable stack of C x H x W images with values in [0, 1].

    `images` has shape (n, C, H, W); `ids` are the positions in the source the images came from.
    """

    images: Tensor
    ids: npt.NDArray[np.int64]
    split: str = "train"

    def __post_init__(self) -> None:
        if self.images.ndim != 4:
            raise ShapeMismatchError(f"Images must be stacked as (n, C, H, W), got {self.images.shape}")
        if self.ids.shape != (self.images.shape[0],):
            raise ShapeMismatchError(f"{self.ids.shape[0]} ids for {self.images.shape[0]} images")
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise ValueError("Pixel values must lie in [0, 1]")
        self.images.setflags(write=False)

    @classmethod
    def from_array(cls, images: Tensor, split: str = "train") -> "ImageDataset":
        images = np.array(images, dtype=np.float64, copy=True)
        return cls(images=images, ids=np.arange(images.shape[0], dtype=np.int64), split=split)

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @property
    def shape(self) -> Shape:
        return tuple(self.images.shape[1:])

    def subset(self, positions: Sequence[int], split: str = "") -> "ImageDataset":
        positions = np.asarray(positions, dtype=np.int64)
        return ImageDataset(images=self.images[positions], ids=self.ids[positions], split=split or self.split)
