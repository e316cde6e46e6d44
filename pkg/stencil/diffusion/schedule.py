import typing as t
from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigError, ContractError, DimensionError
from ..utilities import from_section, to_section


@dataclass(frozen=True)
class NoiseSchedule:
    """Linear beta schedule over T training steps.

    alpha_bar[t] = prod_{s <= t} (1 - beta_s), so alpha_bar at t=0 equals alpha_0.
    By convention t = -1 denotes the clean sample, with alpha_bar = 1.
    """
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02

    def __post_init__(self):
        if self.T < 2:
            raise ConfigError(f'T must be at least 2, got {self.T}.')
        if not 0.0 < self.beta_start < self.beta_end < 1.0:
            raise ConfigError('Betas must satisfy 0 < beta_start < beta_end < 1.')
        betas = np.linspace(self.beta_start, self.beta_end, self.T)
        alpha_bars = np.cumprod(1.0 - betas)
        for array in (betas, alpha_bars):
            array.flags.writeable = False
        object.__setattr__(self, 'betas', betas)
        object.__setattr__(self, 'alphas', 1.0 - betas)
        object.__setattr__(self, 'alpha_bars', alpha_bars)

    def alpha_bar(self, t: t.Union[int, np.ndarray]) -> t.Union[float, np.ndarray]:
        """alpha_bar at t, with alpha_bar(-1) = 1.

        :raises ContractError: If t is outside [-1, T).
        """
        steps = np.asarray(t)
        if steps.min() < -1 or steps.max() >= self.T:
            raise ContractError(f'Timestep outside [-1, {self.T}).', details=steps.tolist())
        values = np.where(steps < 0, 1.0, self.alpha_bars[np.clip(steps, 0, None)])
        return float(values) if values.ndim == 0 else values

    def to_json(self):
        return to_section(self)

    @classmethod
    def from_json(cls, obj: t.Optional[t.Mapping[str, t.Any]]):
        return from_section(cls, obj, 'schedule')


def q_sample(schedule: NoiseSchedule, z0: np.ndarray, t: t.Union[int, np.ndarray], noise: np.ndarray) -> np.ndarray:
    """z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) noise.

    :param t: One step, or one per sample of a batch (first axis).
    :raises ContractError: If t is outside [0, T).
    :raises DimensionError: If noise and z0 differ in shape.
    """
    z0, noise = np.asarray(z0, dtype=np.float64), np.asarray(noise, dtype=np.float64)
    if z0.shape != noise.shape:
        raise DimensionError(f'Noise shape {noise.shape} != z0 shape {z0.shape}.')
    steps = np.asarray(t)
    if steps.min() < 0 or steps.max() >= schedule.T:
        raise ContractError(f'Timestep outside [0, {schedule.T}).', details=steps.tolist())
    alpha_bar = schedule.alpha_bars[steps]
    if alpha_bar.ndim == 1:
        alpha_bar = alpha_bar.reshape((-1,) + (1,) * (z0.ndim - 1))
    return np.sqrt(alpha_bar) * z0 + np.sqrt(1.0 - alpha_bar) * noise
