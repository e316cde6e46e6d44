import os

from . import DATA_DIR


DEBUG = bool(int(os.environ.get('DEBUG', '0')))

LOG_LEVEL = os.environ.get('STENCIL_LOG_LEVEL', 'INFO').upper()

# Assert during sampling that no masked token receives attention weight.
CHECK_MASKS = bool(int(os.environ.get('STENCIL_CHECK_MASKS', '1' if DEBUG else '0')))

DEFAULT_VOCABULARY_PATH = DATA_DIR.joinpath('vocabulary.json')


def get_worker_count(default: int = 1):
    """
    Get the number of evaluation workers from the environment.

    :param default: Used when STENCIL_WORKERS is unset.
    :raises ValueError: If STENCIL_WORKERS is not a positive integer.
    :return: The worker count.
    """
    workers = int(os.environ.get('STENCIL_WORKERS', default))
    if workers < 1:
        raise ValueError('STENCIL_WORKERS must be >= 1.')
    return workers
