import typing as t
from dataclasses import dataclass

import numpy as np

from ..exceptions import ContractError, UsageError
from ..tensor import take
from .scores import ScoreMaps


@dataclass(frozen=True)
class Share:
    """Channel dst takes the rectified map of channel src."""
    src: int
    dst: int

    def channels(self) -> t.Tuple[int, ...]:
        return (self.src, self.dst)

    def writes(self) -> t.Tuple[int, ...]:
        return (self.dst,)

    def apply(self, index: np.ndarray):
        index[self.dst] = index[self.src]


@dataclass(frozen=True)
class Swap:
    """Channels a and b exchange their rectified maps."""
    a: int
    b: int

    def __post_init__(self):
        # Swap{a,b} and Swap{b,a} are the same directive.
        if self.a > self.b:
            a, b = self.b, self.a
            object.__setattr__(self, 'a', a)
            object.__setattr__(self, 'b', b)

    def channels(self) -> t.Tuple[int, ...]:
        return (self.a, self.b)

    def writes(self) -> t.Tuple[int, ...]:
        return (self.a, self.b)

    def apply(self, index: np.ndarray):
        index[self.a], index[self.b] = index[self.b], index[self.a]


Directive = t.Union[Share, Swap]


@dataclass(frozen=True)
class AttentionOverride:
    directives: t.Tuple[Directive, ...] = ()

    def __bool__(self):
        return bool(self.directives)

    def index_map(self, channels: int) -> np.ndarray:
        """Source channel of every output channel after applying the directives in order.

        :raises ContractError: On an out-of-range channel, or when one channel is
            written by two different directives.
        """
        index = np.arange(channels)
        writers: t.Dict[int, Directive] = {}
        for directive in self.directives:
            for channel in directive.channels():
                if not 0 <= channel < channels:
                    raise ContractError(f'Channel {channel} is outside 0-{channels - 1}.', details=str(directive))
            for channel in directive.writes():
                if channel in writers and writers[channel] != directive:
                    raise ContractError(
                        f'Channel {channel} is overridden by both {writers[channel]} and {directive}.'
                    )
                writers[channel] = directive
            directive.apply(index)
        return index


def apply_overrides(scores: ScoreMaps, overrides: t.Optional[AttentionOverride]) -> ScoreMaps:
    """Share/swap channels of already-rectified scores as one gather along the token axis."""
    if not overrides:
        return scores
    index = overrides.index_map(scores.channels)
    if np.array_equal(index, np.arange(scores.channels)):
        return scores
    return ScoreMaps(take(scores.values, index, axis=scores.values.ndim - 3))


def parse_overrides(text: str, resolve: t.Callable[[str], t.List[int]]) -> AttentionOverride:
    """Parse "swap:a,b|share:src,dst".

    Every operand is resolved to one or more prompt positions. Operands with
    several positions pair up in order; a single Share source may feed several
    destinations.

    :raises UsageError: On a malformed directive or operands that do not pair up.
    """
    directives: t.List[Directive] = []
    for part in filter(None, (part.strip() for part in text.split('|'))):
        kind, _, operands = part.partition(':')
        kind = kind.strip().lower()
        operands = [operand.strip() for operand in operands.split(',')]
        if kind not in ('swap', 'share') or len(operands) != 2 or not all(operands):
            raise UsageError(f'Malformed override "{part}"; expected "swap:a,b" or "share:src,dst".')

        first, second = resolve(operands[0]), resolve(operands[1])
        if kind == 'share' and len(first) == 1:
            first = first * len(second)
        if len(first) != len(second):
            raise UsageError(
                f'Override "{part}" pairs {len(first)} position(s) with {len(second)}.',
                details={'first': first, 'second': second}
            )
        kind_cls = Swap if kind == 'swap' else Share
        directives += [kind_cls(a, b) for a, b in zip(first, second)]
    return AttentionOverride(tuple(directives))
