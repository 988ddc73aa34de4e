"""768-d text embeddings from a deterministic BERT-style encoder.

The pipeline runs fully offline and no pretrained weights ship with this
package, so the encoder is a compact BERT architecture initialized from a
pinned seed. For a fixed seed and library version the mapping from text to
vector is a frozen, documented function, which is the property the
downstream benchmark relies on; deployments with network access can swap in
a pretrained checkpoint without touching callers.

Pooling contract: the embedding is the arithmetic mean of the final-layer
hidden states of the content tokens only; the boundary markers added around
the sequence are excluded from the average. Empty text maps to the zero
vector without running the model.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np
import torch
from transformers import BertConfig, BertModel

TEXT_DIM = 768
TEXT_SEED = 101
VOCAB_SIZE = 8192
MAX_TOKENS = 128

PAD_ID = 0
CLS_ID = 1
SEP_ID = 2
_RESERVED_IDS = 4

_WORD = re.compile(r"\w+|[^\w\s]")


class TextEncoder:
    dim = TEXT_DIM

    def __init__(self, seed: int = TEXT_SEED):
        torch.manual_seed(seed)
        config = BertConfig(
            vocab_size=VOCAB_SIZE,
            hidden_size=TEXT_DIM,
            num_hidden_layers=2,
            num_attention_heads=12,
            intermediate_size=1536,
            max_position_embeddings=MAX_TOKENS,
        )
        self.model = BertModel(config).eval()
        self.identifier = f"bert-{TEXT_DIM}x2-random-seed{seed}"

    def token_ids(self, text: str) -> list[int]:
        """Hash lowercased word and punctuation tokens into the content id range."""
        ids = []
        for word in _WORD.findall(text.lower()):
            digest = hashlib.sha256(word.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:8], "little") % (VOCAB_SIZE - _RESERVED_IDS)
            ids.append(bucket + _RESERVED_IDS)
        return ids[: MAX_TOKENS - 2]

    def input_ids(self, text: str) -> list[int]:
        return [CLS_ID, *self.token_ids(text), SEP_ID]

    def embed(self, text: str) -> np.ndarray:
        if not self.token_ids(text):
            return np.zeros(TEXT_DIM, dtype=np.float32)
        ids = torch.tensor([self.input_ids(text)], dtype=torch.long)
        with torch.no_grad():
            hidden = self.model(input_ids=ids).last_hidden_state[0]
        pooled = hidden[1:-1].mean(dim=0)
        return pooled.numpy().astype(np.float32, copy=False)
