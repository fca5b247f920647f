"""Domain sample pools and unpaired batch assembly.

Pools expose nothing but index -> image, so the trainer cannot consume
pairing metadata even when the underlying files were synthesized as
triples: each domain is drawn independently.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .imageops import augment, load_image, to_model_range
from .networks import batch_to_torch
from .rng import SeededRng


class ImagePool:
    """In-memory list of same-shaped images addressable only by index."""

    def __init__(self, images: list[np.ndarray]):
        if not images:
            raise ValueError("empty pool")
        self._images = images

    def __len__(self) -> int:
        return len(self._images)

    def __getitem__(self, idx: int) -> np.ndarray:
        return self._images[idx]

    @classmethod
    def from_paths(cls, paths: list[Path]) -> "ImagePool":
        return cls([load_image(p) for p in paths])


class DomainPools:
    """The three independent sample collections (meshfaces, clean, meshes)."""

    def __init__(self, pool_x: ImagePool, pool_y: ImagePool, pool_z: ImagePool):
        self.x = pool_x
        self.y = pool_y
        self.z = pool_z

    @classmethod
    def from_directory(cls, root: str | Path) -> "DomainPools":
        """Ingest a directory of synthesized triples <stem>_{x,y,z}.png."""
        root = Path(root)
        xs = sorted(root.glob("*_x.png"))
        ys = sorted(root.glob("*_y.png"))
        zs = sorted(root.glob("*_z.png"))
        if not xs or not ys or not zs:
            raise FileNotFoundError(f"no *_x/_y/_z.png triples under {root}")
        return cls(ImagePool.from_paths(xs), ImagePool.from_paths(ys), ImagePool.from_paths(zs))


def sample_unpaired_batch(pools: DomainPools, rng: SeededRng, n: int, crop: int,
                          replace: bool = True) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Draw n samples per domain independently, augmenting each sample with a
    fresh mirror/crop, and return model-range NCHW tensors."""
    if n < 1:
        raise ValueError("batch size must be >= 1")
    if not replace and n > min(len(pools.x), len(pools.y), len(pools.z)):
        raise ValueError("batch larger than a pool and replacement disabled")

    def draw(pool) -> list[np.ndarray]:
        idx = rng.choice(len(pool), size=n, replace=replace)
        return [augment(pool[int(i)], crop, rng) for i in idx]

    bx = [to_model_range(im) for im in draw(pools.x)]
    by = [to_model_range(im) for im in draw(pools.y)]
    bz = [to_model_range(im) for im in draw(pools.z)]
    return batch_to_torch(bx), batch_to_torch(by), batch_to_torch(bz)
