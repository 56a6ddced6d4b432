"""
Text modality encoder

Tokens attend only within their own segment and positions restart at every
segment boundary. Each segment is mean-pooled and the segment vectors are
summed, so a description repeating a segment twice encodes to exactly twice
the single-segment vector.
"""

from typing import List, Sequence, Tuple

import torch
import torch.nn as nn

from ..molkit import VOCAB, TextDescription
from ..molkit.text import MAX_TOKENS, PAD_ID
from ..utils.errors import TokenOutOfVocab
from .transformer import Transformer


def truncate(desc: TextDescription, max_len: int = MAX_TOKENS) -> TextDescription:
    if len(desc.token_ids) <= max_len:
        return desc
    segments = tuple((s, min(e, max_len)) for s, e in desc.segments if s < max_len)
    return TextDescription(desc.token_ids[:max_len], segments)


class TextEncoder(nn.Module):
    def __init__(self, vocab_size: int = len(VOCAB), dim: int = 64, depth: int = 2,
                 heads: int = 4, max_len: int = MAX_TOKENS):
        super().__init__()
        self.vocab_size = vocab_size
        self.max_len = max_len
        self.token_embedding = nn.Embedding(vocab_size, dim)
        self.pos_embedding = nn.Embedding(max_len, dim)
        self.transformer = Transformer(dim, depth, heads, mlp_dim=2 * dim)

    def _pack(self, descs: Sequence[TextDescription]) -> Tuple[torch.Tensor, ...]:
        batch = len(descs)
        length = max(len(d.token_ids) for d in descs)
        tokens = torch.full((batch, length), PAD_ID, dtype=torch.long)
        positions = torch.zeros((batch, length), dtype=torch.long)
        segment_id = torch.full((batch, length), -1, dtype=torch.long)
        pool = torch.zeros((batch, length))
        for b, desc in enumerate(descs):
            tokens[b, :len(desc.token_ids)] = torch.as_tensor(desc.token_ids, dtype=torch.long)
            for s_idx, (start, end) in enumerate(desc.segments):
                positions[b, start:end] = torch.arange(end - start)
                segment_id[b, start:end] = s_idx
                pool[b, start:end] = 1.0 / (end - start)
        same_segment = segment_id.unsqueeze(2) == segment_id.unsqueeze(1)
        mask = same_segment & (segment_id.unsqueeze(2) >= 0)
        # padding rows attend to themselves only
        mask = mask | torch.eye(length, dtype=torch.bool).unsqueeze(0)
        return tokens, positions, mask, pool

    def forward(self, descs: Sequence[TextDescription]) -> torch.Tensor:
        descs: List[TextDescription] = [truncate(d, self.max_len) for d in descs]
        for d in descs:
            if not d.token_ids or not d.segments:
                raise TokenOutOfVocab("empty text description")
            if max(d.token_ids) >= self.vocab_size or min(d.token_ids) < 0:
                raise TokenOutOfVocab(f"token id outside vocabulary of size {self.vocab_size}")

        tokens, positions, mask, pool = self._pack(descs)
        device = self.token_embedding.weight.device
        x = self.token_embedding(tokens.to(device)) + self.pos_embedding(positions.to(device))
        h = self.transformer(x, mask.to(device))
        pool = pool.to(device=device, dtype=h.dtype)
        return torch.einsum("bn,bnd->bd", pool, h)


def text_encode(t: TextDescription, encoder: TextEncoder) -> torch.Tensor:
    return encoder([t])[0]
