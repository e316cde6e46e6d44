from timeit import default_timer
import logging


class Timer:
    """Log how long a block took, e.g. `with Timer('sample.%s', method): ...`.

    A block left through an exception is logged at WARNING with the exception's type.
    """

    def __init__(self, name: str, *name_args, log_level: int = logging.DEBUG):
        self.logger = logging.getLogger(f'timer.{name % name_args}')
        self.log_level = log_level
        self.start: float = None
        self.elapsed: float = None

    def __enter__(self):
        self.logger.log(self.log_level, 'Starting timer.')
        self.start = default_timer()
        return self

    def __exit__(self, exc_type, exc, traceback):
        self.elapsed = default_timer() - self.start
        if exc_type is None:
            self.logger.log(self.log_level, 'Stopped timer. %.4f seconds elapsed.', self.elapsed)
        else:
            self.logger.warning('Stopped timer on %s after %.4f seconds.', exc_type.__name__, self.elapsed)

    def rate(self, count: int) -> float:
        """count per second over the timed block (or so far, while it runs)."""
        elapsed = self.elapsed if self.elapsed is not None else default_timer() - self.start
        return count / elapsed if elapsed > 0 else float('inf')
