import math
import typing as t
from dataclasses import dataclass

import numpy as np

from ..exceptions import ContractError, DimensionError, TrainingDivergenceError
from ..tensor import Tensor, as_tensor
from .schedule import NoiseSchedule, q_sample


DEFAULT_P_UNCOND = 0.1

# model(z_t, t, text, layout=..., strength=...) -> predicted noise
NoiseModel = t.Callable[..., Tensor]


@dataclass
class TrainingBatch:
    """Clean images with their conditioning.

    text is (N, S, D); layout is (N, S, H, W), or None when training without layouts.
    """
    z0: np.ndarray
    text: np.ndarray
    layout: t.Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.text) != len(self.z0) or (self.layout is not None and len(self.layout) != len(self.z0)):
            raise DimensionError('Images, texts and layouts must have the same batch size.')


def drop_conditioning(
    batch: TrainingBatch,
    null_text: np.ndarray,
    drop: np.ndarray
) -> TrainingBatch:
    """Replace the prompt of dropped samples by the null prompt and their layout by all ones."""
    if not drop.any():
        return batch
    text = np.where(drop[:, None, None], null_text, batch.text)
    layout = None if batch.layout is None else np.where(drop[:, None, None, None], 1.0, batch.layout)
    return TrainingBatch(batch.z0, text, layout)


def training_loss(
    model: NoiseModel,
    batch: TrainingBatch,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
    p_uncond: float = DEFAULT_P_UNCOND,
    null_text: np.ndarray = None,
    strength: float = math.inf,
    t: np.ndarray = None,
    noise: np.ndarray = None
) -> Tensor:
    """Mean squared error between the injected noise and the model's prediction.

    t is drawn uniformly from [0, T) and noise from a standard normal unless
    given. With probability p_uncond a sample is trained unconditionally.

    :raises TrainingDivergenceError: If the loss is not finite.
    """
    if not 0.0 <= p_uncond <= 1.0:
        raise ContractError(f'p_uncond must lie in [0, 1], got {p_uncond}.')
    n = len(batch.z0)
    if t is None:
        t = rng.integers(0, schedule.T, size=n)
    if noise is None:
        noise = rng.standard_normal(batch.z0.shape)
    if p_uncond > 0.0 and null_text is not None:
        batch = drop_conditioning(batch, null_text, rng.random(n) < p_uncond)

    z_t = q_sample(schedule, batch.z0, t, noise)
    prediction = as_tensor(model(Tensor(z_t), t, batch.text, layout=batch.layout, strength=strength))
    error = prediction - noise
    loss = (error * error).mean()
    if not math.isfinite(loss.item()):
        raise TrainingDivergenceError(f'Non-finite training loss {loss.item()}.')
    return loss


def cfg_eps(eps_cond: np.ndarray, eps_uncond: np.ndarray, scale: float) -> np.ndarray:
    """eps_uncond + scale * (eps_cond - eps_uncond)."""
    eps_cond, eps_uncond = np.asarray(eps_cond), np.asarray(eps_uncond)
    if eps_cond.shape != eps_uncond.shape:
        raise DimensionError(f'Guidance branches differ in shape: {eps_cond.shape} != {eps_uncond.shape}.')
    return eps_uncond + scale * (eps_cond - eps_uncond)
