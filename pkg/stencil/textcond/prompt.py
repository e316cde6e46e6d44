from __future__ import annotations
import typing as t
from dataclasses import dataclass, replace

from ..exceptions import ContractError, MissingConceptError, PromptOverflowError
from .vocabulary import Vocabulary, UNLABELED, tokenize

if t.TYPE_CHECKING:
    from ..layout import LabelMap


DEFAULT_MAX_LENGTH = 16


@dataclass(frozen=True)
class Binding:
    """What a token position attends through: a class mask, or everywhere (Global)."""
    class_id: t.Optional[int] = None

    @classmethod
    def concept(cls, class_id: int):
        return cls(class_id=int(class_id))

    @property
    def is_global(self):
        return self.class_id is None

    def __str__(self):
        return 'G' if self.is_global else f'C{self.class_id}'


GLOBAL = Binding()


@dataclass(frozen=True)
class Prompt:
    """Fixed-length token sequence with one binding per position.

    `length` counts the tokens from BOS to EOS inclusive; everything after it is
    PAD. The null prompt is all PAD with length 0.
    """
    token_ids: t.Tuple[int, ...]
    bindings: t.Tuple[Binding, ...]
    words: t.Tuple[str, ...]
    length: int

    def __post_init__(self):
        if not len(self.token_ids) == len(self.bindings) == len(self.words):
            raise ContractError('token_ids, bindings and words must have the same length.')
        if not 0 <= self.length <= len(self.token_ids):
            raise ContractError(f'Prompt length {self.length} is outside the sequence.')
        reserved = [0, self.length - 1] if self.length else []
        reserved += range(self.length, len(self.token_ids))
        for position in reserved:
            if not self.bindings[position].is_global:
                raise ContractError(f'Special token at position {position} must be Global.')

    @property
    def max_length(self):
        return len(self.token_ids)

    @property
    def text(self):
        """The words between BOS and EOS."""
        return ' '.join(self.words[1:self.length - 1])

    def concept_classes(self) -> t.Set[int]:
        return {binding.class_id for binding in self.bindings if not binding.is_global}

    def binding_table(self) -> t.List[t.Tuple[int, str, str]]:
        return [
            (position, self.words[position], str(self.bindings[position]))
            for position in range(self.length)
        ]


def _assemble(
    vocab: Vocabulary,
    body: t.List[t.Tuple[int, Binding]],
    max_length: int
) -> Prompt:
    token_count = len(body) + 2
    if token_count > max_length:
        raise PromptOverflowError(token_count, max_length)
    tokens = [(vocab.bos_id, GLOBAL)] + body + [(vocab.eos_id, GLOBAL)]
    tokens += [(vocab.pad_id, GLOBAL)] * (max_length - token_count)
    return Prompt(
        token_ids=tuple(token_id for token_id, _ in tokens),
        bindings=tuple(binding for _, binding in tokens),
        words=tuple(vocab.word(token_id) for token_id, _ in tokens),
        length=token_count
    )


def build_prompt_from_layout(
    label_map: LabelMap,
    vocab: Vocabulary,
    extra_text: str = '',
    max_length: int = DEFAULT_MAX_LENGTH,
    concept_text: t.Mapping[int, str] = None
) -> Prompt:
    """Stack the concept of every class in the label map, then append extra text.

    Concepts come in ascending class-id order and every word of a concept is
    bound to its class; extra text and special tokens are Global.

    :param concept_text: Replaces the stacked words of a class (e.g. describing
        an unseen object, or an attribute plus the concept); the replacement words
        stay bound to that class.
    :raises MissingConceptError: If a class in the map has no concept.
    :raises PromptOverflowError: If the tokens do not fit in max_length.
    :raises OutOfVocabularyError: For unknown words in extra or replacement text.
    """
    concept_text = concept_text or {}
    body: t.List[t.Tuple[int, Binding]] = []
    for class_id in sorted(label_map.classes()):
        if class_id == UNLABELED:
            continue
        if class_id in concept_text:
            words = concept_text[class_id]
        elif class_id in vocab.concepts:
            words = vocab.concepts[class_id]
        else:
            raise MissingConceptError(class_id)
        body += [(token_id, Binding.concept(class_id)) for token_id in tokenize(words, vocab)]
    body += [(token_id, GLOBAL) for token_id in tokenize(extra_text, vocab)]
    return _assemble(vocab, body, max_length)


def build_text_prompt(text: str, vocab: Vocabulary, max_length: int = DEFAULT_MAX_LENGTH) -> Prompt:
    """Prompt for plain text conditioning (every position Global)."""
    return _assemble(vocab, [(token_id, GLOBAL) for token_id in tokenize(text, vocab)], max_length)


def null_prompt(vocab: Vocabulary, max_length: int = DEFAULT_MAX_LENGTH) -> Prompt:
    """All-PAD, all-Global prompt used for the unconditional branch."""
    return Prompt(
        token_ids=(vocab.pad_id,) * max_length,
        bindings=(GLOBAL,) * max_length,
        words=(vocab.word(vocab.pad_id),) * max_length,
        length=0
    )


def rebind(prompt: Prompt, span: t.Tuple[int, int], binding: Binding) -> Prompt:
    """Replace the bindings of positions [start, stop).

    :raises ContractError: If the span touches BOS, EOS or padding.
    """
    start, stop = span
    if start == stop:
        return prompt
    if not 1 <= start < stop <= prompt.length - 1:
        raise ContractError(
            f'Cannot rebind positions [{start}, {stop}); only [1, {prompt.length - 1}) may be rebound.'
        )
    bindings = list(prompt.bindings)
    bindings[start:stop] = [binding] * (stop - start)
    return replace(prompt, bindings=tuple(bindings))


def positions_of(prompt: Prompt, word: str) -> t.List[int]:
    """Positions between BOS and EOS holding word."""
    word = word.lower()
    return [position for position in range(1, prompt.length - 1) if prompt.words[position] == word]
