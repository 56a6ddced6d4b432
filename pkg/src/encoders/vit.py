"""
Image modality encoder: minimal vision transformer without a class token
"""

from typing import Sequence, Union

import numpy as np
import torch
import torch.nn as nn
from einops import rearrange

from ..molkit import MoleculeImage
from ..utils.errors import BadPatchGrid
from .transformer import Transformer


class ViTEncoder(nn.Module):
    """
    Patch projection (W_img) + learned positions + transformer + mean pool

    Images are channel-last (B, H, W, C), matching MoleculeImage.pixels.
    """

    def __init__(self, image_size: int = 32, patch_size: int = 8, channels: int = 3,
                 dim: int = 64, depth: int = 2, heads: int = 4):
        super().__init__()
        if patch_size <= 0 or image_size % patch_size:
            raise BadPatchGrid(f"patch size {patch_size} does not tile image size {image_size}")
        self.image_size = image_size
        self.patch_size = patch_size
        self.channels = channels
        num_patches = (image_size // patch_size) ** 2

        self.patch_proj = nn.Linear(patch_size * patch_size * channels, dim)
        self.pos_embedding = nn.Parameter(torch.randn(1, num_patches, dim) * 0.02)
        self.transformer = Transformer(dim, depth, heads, mlp_dim=2 * dim)

    def forward(self, images: Union[torch.Tensor, Sequence[MoleculeImage]]) -> torch.Tensor:
        if not isinstance(images, torch.Tensor):
            images = torch.as_tensor(np.stack([img.pixels for img in images]),
                                     dtype=self.patch_proj.weight.dtype)
        if images.dim() == 3:
            images = images.unsqueeze(0)
        _, h, w, c = images.shape
        if (h, w, c) != (self.image_size, self.image_size, self.channels):
            raise BadPatchGrid(
                f"expected {self.image_size}x{self.image_size}x{self.channels} images, got {h}x{w}x{c}"
            )
        patches = rearrange(images, "b (h p1) (w p2) c -> b (h w) (p1 p2 c)",
                            p1=self.patch_size, p2=self.patch_size)
        x = self.patch_proj(patches) + self.pos_embedding
        x = self.transformer(x)
        return x.mean(dim=1)


def vit_encode(img: MoleculeImage, encoder: ViTEncoder) -> torch.Tensor:
    return encoder([img])[0]
