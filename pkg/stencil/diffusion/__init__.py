from .schedule import NoiseSchedule, q_sample
from .objective import DEFAULT_P_UNCOND, TrainingBatch, drop_conditioning, training_loss, cfg_eps
from .samplers import (
    METHODS,
    SamplerConfig,
    SampleConditioning,
    GuidedNoise,
    sampling_timesteps,
    predict_z0,
    ddim_step,
    ddpm_step,
    plms_eps,
    ddim_sample,
    ddpm_sample,
    plms_sample,
    sample,
    to_image,
    from_image
)
from .training import MODES, TrainingConfig, Example, PreparedExample, prepare_example, Trainer
