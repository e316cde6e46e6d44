from __future__ import annotations
import json
import typing as t
from dataclasses import dataclass
from pathlib import Path

from ..exceptions import ContractError, FormatError, OutOfVocabularyError, StencilIOError
from ..settings import DEFAULT_VOCABULARY_PATH
from ..utilities import LazyLoader


PAD, BOS, EOS = '<pad>', '<bos>', '<eos>'

# Label value that carries no concept and contributes no layout channel.
UNLABELED = 255


@dataclass(frozen=True)
class Vocabulary:
    """Closed word vocabulary plus the concept string of every semantic class.

    words maps word -> token id (dense over [0, size)); concepts maps class id
    -> one or more space-separated words; specials maps pad/bos/eos -> id.
    """
    words: t.Mapping[str, int]
    concepts: t.Mapping[int, str]
    specials: t.Mapping[str, int]

    def __post_init__(self):
        ids = sorted(self.words.values())
        if ids != list(range(len(ids))):
            raise ContractError('Token ids must be dense over [0, size).')
        for key in ('pad', 'bos', 'eos'):
            if key not in self.specials:
                raise ContractError(f'Missing special token "{key}".')
            if not 0 <= self.specials[key] < len(ids):
                raise ContractError(f'Special token "{key}" has no entry.')
        for class_id, concept in self.concepts.items():
            if not 0 <= class_id < UNLABELED:
                raise ContractError(f'Class id {class_id} is outside 0-{UNLABELED - 1}.')
            for word in concept.split():
                if word not in self.words:
                    raise ContractError(
                        f'Concept "{concept}" of class {class_id} uses unknown word "{word}".'
                    )
        object.__setattr__(self, '_id_to_word', {i: w for w, i in self.words.items()})

    @property
    def size(self):
        return len(self.words)

    @property
    def pad_id(self):
        return self.specials['pad']

    @property
    def bos_id(self):
        return self.specials['bos']

    @property
    def eos_id(self):
        return self.specials['eos']

    def word(self, token_id: int) -> str:
        return self._id_to_word[token_id]

    def concept(self, class_id: int) -> str:
        return self.concepts[class_id]

    def class_of_concept(self, concept: str) -> t.Optional[int]:
        concept = ' '.join(concept.lower().split())
        for class_id, text in self.concepts.items():
            if text == concept:
                return class_id
        return None

    def to_json(self):
        return {
            'words': dict(self.words),
            'concepts': {str(class_id): concept for class_id, concept in sorted(self.concepts.items())},
            'specials': dict(self.specials)
        }

    @classmethod
    def from_json(cls, obj: t.Mapping[str, t.Any]):
        try:
            return cls(
                words={word: int(token_id) for word, token_id in obj['words'].items()},
                concepts={int(class_id): concept for class_id, concept in obj['concepts'].items()},
                specials={key: int(token_id) for key, token_id in obj['specials'].items()}
            )
        except (KeyError, TypeError, ValueError, AttributeError) as ex:
            raise FormatError(f'Malformed vocabulary: {ex}') from ex

    @classmethod
    def load(cls, path: t.Union[str, Path]):
        try:
            with open(path, 'r', encoding='utf-8') as vocabulary_file:
                obj = json.load(vocabulary_file)
        except OSError as ex:
            raise StencilIOError(f'Cannot read vocabulary {path}: {ex}') from ex
        except json.JSONDecodeError as ex:
            raise FormatError(f'Vocabulary {path} is not JSON: {ex}') from ex
        return cls.from_json(obj)

    def save(self, path: t.Union[str, Path]):
        with open(path, 'w', encoding='utf-8') as vocabulary_file:
            json.dump(self.to_json(), vocabulary_file, indent=2)


DEFAULT_VOCABULARY = LazyLoader(lambda: Vocabulary.load(DEFAULT_VOCABULARY_PATH))


def tokenize(text: str, vocab: Vocabulary) -> t.List[int]:
    """Lowercase, split on whitespace and look every word up.

    :raises OutOfVocabularyError: Naming the first unknown word.
    """
    token_ids = []
    for word in text.lower().split():
        if word not in vocab.words:
            raise OutOfVocabularyError(word)
        token_ids.append(vocab.words[word])
    return token_ids
