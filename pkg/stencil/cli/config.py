import json
import math
import typing as t
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..denoiser import DenoiserConfig
from ..diffusion import DEFAULT_P_UNCOND, NoiseSchedule, SamplerConfig, TrainingConfig
from ..exceptions import ConfigError, StencilIOError
from ..settings import DEFAULT_VOCABULARY_PATH
from ..textcond import TextEncoder, Vocabulary


_KEYS = (
    'denoiser', 'schedule', 'sampler', 'training', 'text_encoder',
    'vocabulary', 'manifest', 'out_dir', 'seed', 'lambda', 'p_uncond'
)


def parse_strength(value: t.Any) -> float:
    """A positive number, "inf" or null (both meaning +inf).

    :raises ConfigError: Otherwise.
    """
    if value is None or (isinstance(value, str) and value.strip().lower() in ('inf', '+inf', 'infinity')):
        return math.inf
    try:
        strength = float(value)
    except (TypeError, ValueError) as ex:
        raise ConfigError(f'lambda must be a positive number or "inf", got {value!r}.') from ex
    if not strength > 0:
        raise ConfigError(f'lambda must be positive, got {value!r}.')
    return strength


@dataclass(frozen=True)
class RunConfig:
    denoiser: DenoiserConfig = field(default_factory=DenoiserConfig)
    schedule: NoiseSchedule = field(default_factory=NoiseSchedule)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    text_encoder_seed: int = 0
    vocabulary: Path = DEFAULT_VOCABULARY_PATH
    manifest: t.Optional[Path] = None
    out_dir: Path = Path('runs')
    seed: int = 0
    strength: float = math.inf
    p_uncond: float = DEFAULT_P_UNCOND

    def __post_init__(self):
        if self.schedule.T != self.denoiser.timesteps:
            raise ConfigError(
                f'schedule.T ({self.schedule.T}) must equal denoiser.timesteps ({self.denoiser.timesteps}).'
            )
        if self.sampler.steps > self.schedule.T:
            raise ConfigError(f'sampler.steps ({self.sampler.steps}) exceeds schedule.T ({self.schedule.T}).')
        if not 0.0 <= self.p_uncond <= 1.0:
            raise ConfigError(f'p_uncond must lie in [0, 1], got {self.p_uncond}.')

    def load_vocabulary(self) -> Vocabulary:
        return Vocabulary.load(self.vocabulary)

    def text_encoder(self, vocab: Vocabulary) -> TextEncoder:
        return TextEncoder(vocab.size, self.denoiser.max_length, self.denoiser.text_dim, self.text_encoder_seed)

    def with_overrides(self, **changes) -> 'RunConfig':
        return replace(self, **{key: value for key, value in changes.items() if value is not None})

    @classmethod
    def from_json(cls, obj: t.Any, base_dir: Path = Path('.')) -> 'RunConfig':
        """Build a run configuration; relative paths resolve against base_dir.

        :raises ConfigError: On unknown keys, invalid values or missing referenced files.
        """
        if not isinstance(obj, dict):
            raise ConfigError('A run configuration must be a JSON object.')
        unknown = sorted(set(obj) - set(_KEYS))
        if unknown:
            raise ConfigError(f'Unknown configuration keys: {", ".join(unknown)}.', details={'unknown': unknown})

        text_encoder = obj.get('text_encoder') or {}
        if not isinstance(text_encoder, dict) or set(text_encoder) - {'seed'}:
            raise ConfigError('text_encoder accepts only {"seed": int}.')

        def resolve(key: str) -> t.Optional[Path]:
            if obj.get(key) is None:
                return None
            path = Path(obj[key])
            return path if path.is_absolute() else base_dir / path

        try:
            config = cls(
                denoiser=DenoiserConfig.from_json(obj.get('denoiser')),
                schedule=NoiseSchedule.from_json(obj.get('schedule')),
                sampler=SamplerConfig.from_json(obj.get('sampler')),
                training=TrainingConfig.from_json(obj.get('training')),
                text_encoder_seed=int(text_encoder.get('seed', 0)),
                vocabulary=resolve('vocabulary') or DEFAULT_VOCABULARY_PATH,
                manifest=resolve('manifest'),
                out_dir=resolve('out_dir') or Path('runs'),
                seed=int(obj.get('seed', 0)),
                strength=parse_strength(obj.get('lambda')),
                p_uncond=float(obj.get('p_uncond', DEFAULT_P_UNCOND))
            )
        except (TypeError, ValueError) as ex:
            raise ConfigError(f'Invalid configuration: {ex}') from ex
        for key, path in (('vocabulary', config.vocabulary), ('manifest', config.manifest)):
            if path is not None and not Path(path).exists():
                raise ConfigError(f'{key} file {path} does not exist.')
        return config

    @classmethod
    def load(cls, path: t.Union[str, Path, None]) -> 'RunConfig':
        if path is None:
            return cls()
        path = Path(path)
        try:
            with open(path, 'r', encoding='utf-8') as config_file:
                obj = json.load(config_file)
        except OSError as ex:
            raise StencilIOError(f'Cannot read config {path}: {ex}') from ex
        except json.JSONDecodeError as ex:
            raise ConfigError(f'Config {path} is not JSON: {ex}') from ex
        return cls.from_json(obj, path.parent)

    def to_json(self):
        return {
            'denoiser': self.denoiser.to_json(),
            'schedule': self.schedule.to_json(),
            'sampler': self.sampler.to_json(),
            'training': self.training.to_json(),
            'text_encoder': {'seed': self.text_encoder_seed},
            'vocabulary': str(self.vocabulary),
            'manifest': None if self.manifest is None else str(self.manifest),
            'out_dir': str(self.out_dir),
            'seed': self.seed,
            'lambda': 'inf' if math.isinf(self.strength) else self.strength,
            'p_uncond': self.p_uncond
        }
