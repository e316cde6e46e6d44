import logging
from unittest import TestCase
from unittest.mock import patch

from stencil.utilities import Timer


class TimerTests(TestCase):
    def test_logs_elapsed(self):
        with self.assertLogs('timer.sample.ddim', level='INFO') as logs:
            with Timer('sample.%s', 'ddim', log_level=logging.INFO) as timer:
                pass
        self.assertGreaterEqual(timer.elapsed, 0.0)
        self.assertIn('Stopped timer.', logs.output[-1])

    def test_logs_failure(self):
        with self.assertLogs('timer.train', level='WARNING') as logs:
            with self.assertRaises(KeyError):
                with Timer('train'):
                    raise KeyError('step')
        self.assertIn('KeyError', logs.output[-1])

    @patch('stencil.utilities.timer.default_timer', side_effect=[10.0, 12.0])
    def test_rate(self, _):
        with Timer('eval') as timer:
            pass
        self.assertEqual(timer.elapsed, 2.0)
        self.assertEqual(timer.rate(10), 5.0)
