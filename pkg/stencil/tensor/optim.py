import typing as t
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import DimensionError, TrainingDivergenceError
from .tensor import Tensor


# The 1e-6 base rate used for billion-parameter backbones is far too small for
# the toy denoiser; 1e-4 is the default here.
DEFAULT_LR = 1e-4


@dataclass
class AdamState:
    step: int = 0
    m: t.Dict[str, np.ndarray] = field(default_factory=dict)
    v: t.Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: t.Mapping[str, Tensor],
    grads: t.Mapping[str, t.Optional[np.ndarray]],
    state: AdamState,
    lr: float = DEFAULT_LR,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8
) -> AdamState:
    """Apply one bias-corrected Adam update to params in place.

    :param params: Parameters by name.
    :param grads: Gradients by name; a missing or None gradient counts as zero.
    :param state: Moments and timestep, updated in place and returned.
    :raises TrainingDivergenceError: If any gradient is not finite.
    :raises DimensionError: If a gradient's shape differs from its parameter's.
    """
    for name, grad in grads.items():
        if grad is None:
            continue
        if grad.shape != params[name].shape:
            raise DimensionError(f'{name}: gradient shape {grad.shape} != parameter shape {params[name].shape}.')
        if not np.all(np.isfinite(grad)):
            raise TrainingDivergenceError(f'Non-finite gradient for {name}.', details={'step': state.step})

    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step
    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(param.data)
        m = state.m.get(name, np.zeros_like(param.data))
        v = state.v.get(name, np.zeros_like(param.data))
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        state.m[name], state.v[name] = m, v
        param.data -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
    return state


class Adam:
    def __init__(
        self,
        named_params: t.Iterable[t.Tuple[str, Tensor]],
        lr: float = DEFAULT_LR,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8
    ):
        self.params = dict(named_params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.state = AdamState()

    def zero_grad(self):
        for param in self.params.values():
            param.zero_grad()

    def step(self):
        adam_step(
            self.params,
            {name: param.grad for name, param in self.params.items()},
            self.state,
            lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps
        )
