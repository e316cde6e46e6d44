import logging
import math
import typing as t
from dataclasses import dataclass

import numpy as np
from tqdm import tqdm

from .. import settings
from ..attention import AttentionOverride, AttentionProbe, CompositeProbe, MaskGuard
from ..exceptions import ConfigError, ContractError
from ..layout import ConceptLayout
from ..tensor import as_tensor, no_grad
from ..textcond import TextEmbeddings
from ..utilities import Timer, from_section, to_section
from .objective import NoiseModel, cfg_eps
from .schedule import NoiseSchedule


logger = logging.getLogger(__name__)

METHODS = ('ddpm', 'ddim', 'plms')
PLMS_MIN_STEPS = 4


@dataclass(frozen=True)
class SamplerConfig:
    method: str = 'plms'
    steps: int = 50
    scale: float = 2.0
    seed: int = 0
    eta: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f'Unknown sampler "{self.method}"; choose one of {", ".join(METHODS)}.')
        if self.steps < 1:
            raise ConfigError(f'steps must be positive, got {self.steps}.')
        if self.scale < 0:
            raise ConfigError(f'The guidance scale must be >= 0, got {self.scale}.')
        if self.eta < 0:
            raise ConfigError(f'eta must be >= 0, got {self.eta}.')

    def to_json(self):
        return to_section(self)

    @classmethod
    def from_json(cls, obj: t.Optional[t.Mapping[str, t.Any]]):
        return from_section(cls, obj, 'sampler')


@dataclass
class SampleConditioning:
    """Both guidance branches: text plus optional layout, and the null text.

    The unconditional branch never sees the layout or the overrides.
    """
    text: TextEmbeddings
    null_text: TextEmbeddings
    layout: t.Optional[ConceptLayout] = None
    strength: float = math.inf
    overrides: t.Optional[AttentionOverride] = None


def sampling_timesteps(T: int, steps: int) -> t.List[t.Tuple[int, int]]:
    """(t, t_prev) pairs of a uniform-stride schedule, ending at t_prev = -1 (clean sample).

    :raises ContractError: If steps is not in [1, T].
    """
    if not 1 <= steps <= T:
        raise ContractError(f'steps must lie in [1, {T}], got {steps}.')
    timesteps = [step * (T // steps) for step in range(steps)][::-1]
    return list(zip(timesteps, timesteps[1:] + [-1]))


def predict_z0(schedule: NoiseSchedule, z_t: np.ndarray, eps: np.ndarray, t: int, clip: bool = True) -> np.ndarray:
    alpha_bar = schedule.alpha_bar(t)
    z0 = (z_t - math.sqrt(1.0 - alpha_bar) * eps) / math.sqrt(alpha_bar)
    return np.clip(z0, -1.0, 1.0) if clip else z0


def _check_transition(t: int, t_prev: int):
    if not t > t_prev >= -1:
        raise ContractError(f'A sampler step needs t > t_prev >= -1, got t={t}, t_prev={t_prev}.')


def ddim_step(
    schedule: NoiseSchedule,
    z_t: np.ndarray,
    eps: np.ndarray,
    t: int,
    t_prev: int,
    eta: float = 0.0,
    rng: np.random.Generator = None,
    clip: bool = True
) -> np.ndarray:
    """Move z_t to t_prev along the predicted clean sample; deterministic when eta = 0.

    The predicted clean sample is clamped to [-1, 1] when clip is set.
    """
    _check_transition(t, t_prev)
    alpha_bar, alpha_bar_prev = schedule.alpha_bar(t), schedule.alpha_bar(t_prev)
    z0 = predict_z0(schedule, z_t, eps, t, clip)
    sigma = eta * math.sqrt((1.0 - alpha_bar_prev) / (1.0 - alpha_bar) * (1.0 - alpha_bar / alpha_bar_prev))
    z_prev = math.sqrt(alpha_bar_prev) * z0 + math.sqrt(max(1.0 - alpha_bar_prev - sigma ** 2, 0.0)) * eps
    if sigma > 0.0:
        z_prev = z_prev + sigma * rng.standard_normal(z_t.shape)
    return z_prev


def ddpm_step(
    schedule: NoiseSchedule,
    z_t: np.ndarray,
    eps: np.ndarray,
    t: int,
    t_prev: int,
    rng: np.random.Generator,
    clip: bool = True
) -> np.ndarray:
    """Ancestral step: draw z_{t_prev} from the Gaussian posterior given the clamped clean prediction."""
    _check_transition(t, t_prev)
    alpha_bar, alpha_bar_prev = schedule.alpha_bar(t), schedule.alpha_bar(t_prev)
    alpha = alpha_bar / alpha_bar_prev
    beta = 1.0 - alpha
    z0 = predict_z0(schedule, z_t, eps, t, clip)
    mean = (
        math.sqrt(alpha_bar_prev) * beta / (1.0 - alpha_bar) * z0
        + math.sqrt(alpha) * (1.0 - alpha_bar_prev) / (1.0 - alpha_bar) * z_t
    )
    if t_prev < 0:
        return mean
    variance = beta * (1.0 - alpha_bar_prev) / (1.0 - alpha_bar)
    return mean + math.sqrt(variance) * rng.standard_normal(z_t.shape)


def plms_eps(eps: np.ndarray, history: t.Sequence[np.ndarray]) -> np.ndarray:
    """Linear multistep combination of the current and up to three previous predictions."""
    if len(history) == 0:
        return eps
    if len(history) == 1:
        return (3.0 * eps - history[-1]) / 2.0
    if len(history) == 2:
        return (23.0 * eps - 16.0 * history[-1] + 5.0 * history[-2]) / 12.0
    return (55.0 * eps - 59.0 * history[-1] + 37.0 * history[-2] - 9.0 * history[-3]) / 24.0


class GuidedNoise:
    """Classifier-free guided noise prediction; counts denoiser calls per branch."""

    def __init__(
        self,
        model: NoiseModel,
        conditioning: SampleConditioning,
        scale: float,
        probe: AttentionProbe = None
    ):
        self.model = model
        self.conditioning = conditioning
        self.scale = scale
        self.probe = probe
        self.calls = {'cond': 0, 'uncond': 0}

    def __call__(self, z: np.ndarray, t: int, step: int) -> np.ndarray:
        if self.probe is not None:
            self.probe.set_step(step)
        conditioning = self.conditioning
        eps_cond = as_tensor(self.model(
            z, t, conditioning.text,
            layout=conditioning.layout,
            strength=conditioning.strength,
            overrides=conditioning.overrides,
            probe=self.probe
        )).data
        self.calls['cond'] += 1
        if self.scale == 1.0:
            return eps_cond
        eps_uncond = as_tensor(self.model(z, t, conditioning.null_text)).data
        self.calls['uncond'] += 1
        return cfg_eps(eps_cond, eps_uncond, self.scale)


def _progress(pairs, method: str, progress: bool):
    return tqdm(pairs, desc=f'{method} sampling', disable=not progress, leave=False)


def ddim_sample(
    noise_fn: GuidedNoise,
    z: np.ndarray,
    schedule: NoiseSchedule,
    config: SamplerConfig,
    rng: np.random.Generator,
    progress: bool = False
) -> np.ndarray:
    for step, (t, t_prev) in enumerate(_progress(sampling_timesteps(schedule.T, config.steps), 'ddim', progress)):
        z = ddim_step(schedule, z, noise_fn(z, t, step), t, t_prev, eta=config.eta, rng=rng)
    return z


def ddpm_sample(
    noise_fn: GuidedNoise,
    z: np.ndarray,
    schedule: NoiseSchedule,
    config: SamplerConfig,
    rng: np.random.Generator,
    progress: bool = False
) -> np.ndarray:
    for step, (t, t_prev) in enumerate(_progress(sampling_timesteps(schedule.T, config.steps), 'ddpm', progress)):
        z = ddpm_step(schedule, z, noise_fn(z, t, step), t, t_prev, rng)
    return z


def plms_sample(
    noise_fn: GuidedNoise,
    z: np.ndarray,
    schedule: NoiseSchedule,
    config: SamplerConfig,
    rng: np.random.Generator = None,
    progress: bool = False
) -> np.ndarray:
    """Pseudo linear multistep sampling on DDIM transitions.

    The first step uses an improved-Euler warmup (two evaluations), the next two
    use lower-order multistep coefficients, then the four-term formula.
    Fewer than four steps fall back to DDIM.
    """
    if config.steps < PLMS_MIN_STEPS:
        logger.warning('PLMS needs at least %d steps, got %d; sampling with DDIM instead.', PLMS_MIN_STEPS, config.steps)
        return ddim_sample(noise_fn, z, schedule, config, rng, progress)

    history: t.List[np.ndarray] = []
    for step, (t, t_prev) in enumerate(_progress(sampling_timesteps(schedule.T, config.steps), 'plms', progress)):
        eps = noise_fn(z, t, step)
        if not history:
            z_euler = ddim_step(schedule, z, eps, t, t_prev)
            eps_prime = (eps + noise_fn(z_euler, t_prev, step)) / 2.0
        else:
            eps_prime = plms_eps(eps, history)
        z = ddim_step(schedule, z, eps_prime, t, t_prev)
        history = (history + [eps])[-3:]
    return z


_SAMPLERS = {'ddim': ddim_sample, 'ddpm': ddpm_sample, 'plms': plms_sample}


def sample(
    model: NoiseModel,
    conditioning: SampleConditioning,
    schedule: NoiseSchedule,
    config: SamplerConfig,
    shape: t.Tuple[int, ...],
    probe: AttentionProbe = None,
    progress: bool = False
) -> np.ndarray:
    """Draw samples in [-1, 1] of the given (N, C, H, W) shape, reproducibly from config.seed.

    Under hard rectification with mask checks enabled, every attention layer is
    asserted to give masked tokens zero weight.
    """
    if config.steps > schedule.T:
        raise ContractError(f'steps ({config.steps}) exceeds T ({schedule.T}).')
    if settings.CHECK_MASKS and conditioning.layout is not None and math.isinf(conditioning.strength):
        probe = MaskGuard() if probe is None else CompositeProbe([probe, MaskGuard()])

    rng = np.random.default_rng(config.seed)
    z = rng.standard_normal(shape)
    noise_fn = GuidedNoise(model, conditioning, config.scale, probe)
    with no_grad(), Timer('sample.%s', config.method):
        z = _SAMPLERS[config.method](noise_fn, z, schedule, config, rng, progress)
    logger.debug('Sampled %s with %s denoiser calls.', shape, noise_fn.calls)
    # The autoencoder is the identity: the clean latent is the image.
    return np.clip(z, -1.0, 1.0)


def to_image(z: np.ndarray) -> np.ndarray:
    """(C, H, W) -> (H, W, C)."""
    return np.transpose(z, (1, 2, 0))


def from_image(image: np.ndarray) -> np.ndarray:
    """(H, W, C) -> (C, H, W)."""
    return np.transpose(image, (2, 0, 1))
