from .timer import Timer
from .lazy_loader import LazyLoader
from .multithreading import multithread
from .config import from_section, to_section
