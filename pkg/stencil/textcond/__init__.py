from .vocabulary import Vocabulary, DEFAULT_VOCABULARY, PAD, BOS, EOS, UNLABELED, tokenize
from .prompt import (
    Binding,
    GLOBAL,
    Prompt,
    DEFAULT_MAX_LENGTH,
    build_prompt_from_layout,
    build_text_prompt,
    null_prompt,
    rebind,
    positions_of
)
from .encoder import TextEncoder, TextEmbeddings


def encode(prompt: Prompt, encoder: TextEncoder) -> TextEmbeddings:
    return encoder.encode(prompt)
