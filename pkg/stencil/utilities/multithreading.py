import typing as t
from concurrent.futures import ThreadPoolExecutor


T = t.TypeVar('T')
R = t.TypeVar('R')


def multithread(task: t.Callable[..., R], items: t.Sequence[T], max_workers: int = None, **kwargs) -> t.List[R]:
    """Run task over items on a thread pool and return the results in item order.

    The order of the returned list never depends on completion order, so a
    reduction over it is deterministic.

    :param task: Called as task(item, **kwargs).
    :param items: Work items.
    :param max_workers: Pool size, defaults to one thread per item.
    :return: Results, results[i] belonging to items[i].
    """
    if not items:
        return []
    if max_workers is None or max_workers > len(items):
        max_workers = len(items)
    if max_workers == 1:
        return [task(item, **kwargs) for item in items]

    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = [executor.submit(task, item, **kwargs) for item in items]

    return [future.result() for future in futures]
