import typing as t
from dataclasses import dataclass

import numpy as np

from ..exceptions import DimensionError
from ..tensor import Tensor
from .prompt import Prompt


@dataclass(frozen=True)
class TextEmbeddings:
    """Embedded prompt(s): (S, D) or batched (N, S, D)."""
    values: np.ndarray

    @property
    def length(self):
        return self.values.shape[-2]

    @property
    def dim(self):
        return self.values.shape[-1]

    def as_tensor(self) -> Tensor:
        return Tensor(self.values)

    @classmethod
    def stack(cls, embeddings: t.Sequence['TextEmbeddings']):
        return cls(np.stack([embedding.values for embedding in embeddings]))


class TextEncoder:
    """Frozen stand-in for a pre-trained text encoder.

    A word table and a positional table drawn once from a recorded seed. The
    tables are read-only arrays, not parameters, so no loss can train them.
    """

    def __init__(self, vocab_size: int, max_length: int = 16, dim: int = 32, seed: int = 0):
        self.vocab_size = vocab_size
        self.max_length = max_length
        self.dim = dim
        self.seed = seed

        rng = np.random.default_rng(seed)
        self.word_embedding = rng.standard_normal((vocab_size, dim)) / np.sqrt(dim)
        self.positional_embedding = 0.5 * rng.standard_normal((max_length, dim)) / np.sqrt(dim)
        self.word_embedding.flags.writeable = False
        self.positional_embedding.flags.writeable = False

    def config(self):
        return {
            'vocab_size': self.vocab_size,
            'max_length': self.max_length,
            'dim': self.dim,
            'seed': self.seed
        }

    @classmethod
    def from_config(cls, config: t.Mapping[str, int]):
        return cls(**config)

    def encode(self, prompt: Prompt) -> TextEmbeddings:
        """values[s] = word_embedding[token_ids[s]] + positional_embedding[s]."""
        if prompt.max_length != self.max_length:
            raise DimensionError(
                f'Prompt has {prompt.max_length} positions, the encoder expects {self.max_length}.'
            )
        token_ids = np.asarray(prompt.token_ids, dtype=int)
        if token_ids.max(initial=0) >= self.vocab_size:
            raise DimensionError('Prompt uses a token id outside the embedding table.')
        return TextEmbeddings(self.word_embedding[token_ids] + self.positional_embedding)

    def encode_batch(self, prompts: t.Sequence[Prompt]) -> TextEmbeddings:
        return TextEmbeddings.stack([self.encode(prompt) for prompt in prompts])
