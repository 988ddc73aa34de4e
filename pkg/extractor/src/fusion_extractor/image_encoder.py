"""4096-d image embeddings from the penultimate layer of a VGG-16.

Preprocessing is the canonical ImageNet recipe: convert to RGB, resize the
short side to 256, center-crop 224x224, scale to [0, 1], normalize per
channel. The embedding is the activation after the second 4096-wide
fully-connected layer and its ReLU, i.e. the last hidden state before the
classification head.

As with the text side, weights are randomly initialized from a pinned seed
because the pipeline runs offline; the mapping is deterministic for a fixed
seed and library version, and pretrained weights can be dropped in where
downloads are allowed.
"""

from __future__ import annotations

import numpy as np
import torch
from PIL import Image
from torchvision import models, transforms

IMAGE_DIM = 4096
IMAGE_SEED = 202


class ImageEncoder:
    dim = IMAGE_DIM

    def __init__(self, seed: int = IMAGE_SEED):
        torch.manual_seed(seed)
        self.model = models.vgg16(weights=None).eval()
        self.identifier = f"vgg16-fc7-random-seed{seed}"
        self._preprocess = transforms.Compose(
            [
                transforms.Resize(256),
                transforms.CenterCrop(224),
                transforms.ToTensor(),
                transforms.Normalize(
                    mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]
                ),
            ]
        )

    def embed(self, image: Image.Image) -> np.ndarray:
        x = self._preprocess(image.convert("RGB")).unsqueeze(0)
        with torch.no_grad():
            h = self.model.features(x)
            h = self.model.avgpool(h)
            h = torch.flatten(h, 1)
            # classifier[:-2] stops after the second 4096-wide Linear + ReLU;
            # the dropout module inside is identity in eval mode.
            for layer in self.model.classifier[:-2]:
                h = layer(h)
        return h[0].numpy().astype(np.float32, copy=False)
