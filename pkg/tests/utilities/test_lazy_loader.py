from unittest import TestCase
from unittest.mock import patch

from stencil.utilities.lazy_loader import LazyLoader


class LazyLoaderTests(TestCase):
    def setUp(self):
        self.value = ['background', 'red']
        self.load = lambda: self.value
        self.lazy_loader = LazyLoader(self.load)

    def test_init(self):
        self.assertIsNone(self.lazy_loader._value)
        self.assertFalse(self.lazy_loader._did_load)
        self.assertEqual(self.lazy_loader._load, self.load)

    def test_lazy_load(self):
        value = self.lazy_loader.lazy_load()
        self.assertIs(value, self.value)

        value = self.lazy_loader()
        self.assertIs(value, self.value)

    def test_lazy_load__called_once(self):
        with patch.object(self.lazy_loader, '_load') as _load:
            _load.return_value = self.value

            # First call = load value and return.
            value = self.lazy_loader.lazy_load()
            self.assertEqual(value, self.value)

            # Second call = return cached value.
            value = self.lazy_loader.lazy_load()
            self.assertEqual(value, self.value)

            _load.assert_called_once()

    def test_lazy_load__caches_none(self):
        with patch.object(self.lazy_loader, '_load', return_value=None) as _load:
            self.lazy_loader()
            self.lazy_loader()
            _load.assert_called_once()

    def test_reset(self):
        with patch.object(self.lazy_loader, '_load', return_value=self.value) as _load:
            self.lazy_loader()
            self.lazy_loader.reset()
            self.assertIsNone(self.lazy_loader._value)
            self.lazy_loader()
            self.assertEqual(_load.call_count, 2)
