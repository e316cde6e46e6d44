import threading
import time
from unittest import TestCase

from stencil.utilities import multithread


class MultithreadTests(TestCase):
    def test_order(self):
        # Earlier items sleep longer, so they finish last.
        def task(item, scale):
            time.sleep((5 - item) * 0.01)
            return item * scale

        self.assertEqual(multithread(task, [0, 1, 2, 3, 4], scale=10), [0, 10, 20, 30, 40])

    def test_single_worker__inline(self):
        threads = multithread(lambda _: threading.current_thread(), [1, 2, 3], max_workers=1)
        self.assertTrue(all(thread is threading.current_thread() for thread in threads))

    def test_empty(self):
        self.assertEqual(multithread(lambda item: item, []), [])

    def test_error(self):
        def task(item):
            if item == 2:
                raise KeyError(item)
            return item

        with self.assertRaises(KeyError):
            multithread(task, [1, 2, 3], max_workers=2)
