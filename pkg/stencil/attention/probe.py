import math
import typing as t
from dataclasses import dataclass

import numpy as np

from ..exceptions import ContractError


@dataclass(frozen=True)
class AttentionEvent:
    layer: str
    step: t.Optional[int]
    scores: np.ndarray
    weights: np.ndarray
    output: np.ndarray
    layout: t.Optional[np.ndarray]
    strength: float


class AttentionProbe:
    """Observer called by every cross-attention layer of a forward pass.

    Samplers call `set_step` before each denoiser evaluation so events carry the
    sampler step they belong to.
    """

    def __init__(self):
        self.step: t.Optional[int] = None

    def set_step(self, step: t.Optional[int]):
        self.step = step

    def __call__(self, event: AttentionEvent):
        raise NotImplementedError


class CompositeProbe(AttentionProbe):
    def __init__(self, probes: t.Sequence[AttentionProbe]):
        super().__init__()
        self.probes = list(probes)

    def set_step(self, step: t.Optional[int]):
        super().set_step(step)
        for probe in self.probes:
            probe.set_step(step)

    def __call__(self, event: AttentionEvent):
        for probe in self.probes:
            probe(event)


class MaskGuard(AttentionProbe):
    """Assert that no masked token receives weight under hard rectification.

    A token is masked at a position when its score there is -inf.
    """

    def __init__(self):
        super().__init__()
        self.checked = 0

    def __call__(self, event: AttentionEvent):
        if event.layout is None or not math.isinf(event.strength):
            return
        masked = np.isneginf(event.scores)
        leaked = event.weights[masked]
        if np.any(leaked != 0.0):
            raise ContractError(
                f'Masked tokens received attention weight in layer {event.layer}.',
                details={'layer': event.layer, 'step': event.step, 'max_weight': float(np.abs(leaked).max())}
            )
        self.checked += 1


class AttentionCapture(AttentionProbe):
    """Keep the events of selected layers and steps, keyed by (layer, step).

    :param layers: Layer names to keep, all when None.
    :param steps: Sampler steps to keep, all when None.
    """

    def __init__(self, layers: t.Iterable[str] = None, steps: t.Iterable[int] = None):
        super().__init__()
        self.layers = None if layers is None else set(layers)
        self.steps = None if steps is None else set(steps)
        self.events: t.Dict[t.Tuple[str, t.Optional[int]], AttentionEvent] = {}
        self.seen_layers: t.List[str] = []

    def __call__(self, event: AttentionEvent):
        if event.layer not in self.seen_layers:
            self.seen_layers.append(event.layer)
        if self.layers is not None and event.layer not in self.layers:
            return
        if self.steps is not None and event.step not in self.steps:
            return
        # The first branch of a step (conditional) is kept.
        self.events.setdefault((event.layer, event.step), event)
