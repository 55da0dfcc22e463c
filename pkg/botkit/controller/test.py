"""Controller Unit Tests"""
import os
import tempfile
import unittest
from unittest import mock

import numpy as np

from botkit.backbone import build_backbone, init_params, write_params
from botkit.errors import ConfigurationError, ResolutionError, ShapeError
from botkit.tensor import Tensor, read_tensor, write_tensor
from .config import Settings, get_settings
from .infer import infer, load_input, parse_shape, random_input, run_forward
from .verify import verify

class TestSettings(unittest.TestCase):
    """Test configuration loading."""
    def setUp(self):
        """Scratch directory for TOML files"""
        self.directory = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.directory.name, 'botkit.toml')

    def tearDown(self):
        """Remove the scratch directory"""
        self.directory.cleanup()

    def test_defaults(self):
        """No file and no environment"""
        with mock.patch.dict(os.environ, {}, clear=True):
            settings = Settings()
        self.assertEqual(settings.threads, 1)
        self.assertEqual(settings.dtype, 'float32')
        self.assertEqual(settings.verify_h, 1e-5)

    def test_file_then_environment(self):
        """The environment overrides the file"""
        with open(self.path, 'w', encoding='utf-8') as file:
            file.write('[botkit]\nthreads = 3\nverify_seeds = 2\n')
        with mock.patch.dict(os.environ, {'BOTKIT_THREADS': '4'}, clear=True):
            settings = get_settings(self.path)
        self.assertEqual(settings.threads, 4)
        self.assertEqual(settings.verify_seeds, 2)

    def test_invalid_values(self):
        """Out-of-range values are configuration errors"""
        with open(self.path, 'w', encoding='utf-8') as file:
            file.write('[botkit]\nthreads = 0\n')
        with mock.patch.dict(os.environ, {}, clear=True):
            with self.assertRaises(ConfigurationError):
                get_settings(self.path)
        with open(self.path, 'w', encoding='utf-8') as file:
            file.write('threads = [\n')
        with self.assertRaises(ConfigurationError):
            get_settings(self.path)

class TestInfer(unittest.TestCase):
    """Test inference runs."""
    def setUp(self):
        """Reduced-width BoTNet and a scratch directory"""
        self.arch = build_backbone('botnet', 50, None, 64, width_divisor=8, n_classes=10)
        self.directory = tempfile.TemporaryDirectory()

    def tearDown(self):
        """Remove the scratch directory"""
        self.directory.cleanup()

    def path(self, name):
        """Scratch file path"""
        return os.path.join(self.directory.name, name)

    def test_parse_shape(self):
        """NxCxHxW strings"""
        self.assertEqual(parse_shape('1x3x224x224'), (1, 3, 224, 224))
        for text in ('1x3x224', 'ax3x4x4', '0x3x4x4'):
            with self.assertRaises(ShapeError):
                parse_shape(text)

    def test_repeatable(self):
        """Two runs with one seed write identical files"""
        x = load_input(random_shape=(2, 3, 64, 64), seed=1)
        first = infer(self.arch, x, 1, output_path=self.path('a.botk'))
        again = load_input(random_shape=(2, 3, 64, 64), seed=1)
        second = infer(self.arch, again, 1, output_path=self.path('b.botk'))
        with open(self.path('a.botk'), 'rb') as a, open(self.path('b.botk'), 'rb') as b:
            self.assertEqual(a.read(), b.read())
        self.assertEqual(first.digest, second.digest)
        self.assertEqual(first.output_shape, [2, 10])

    def test_thread_count(self):
        """Worker count does not change the output bits"""
        x = random_input((3, 3, 64, 64), seed=2)
        params = init_params(self.arch, 2, 'float32')
        single = run_forward(self.arch, params, x, threads=1).numpy()
        pooled = run_forward(self.arch, params, x, threads=4).numpy()
        np.testing.assert_array_equal(single, pooled)

    def test_batch_matches_samples(self):
        """Each row equals the forward of its sample alone"""
        x = random_input((2, 3, 64, 64), seed=3)
        params = init_params(self.arch, 3, 'float32')
        batch = run_forward(self.arch, params, x, threads=2).numpy()
        alone = run_forward(self.arch, params, Tensor(x.numpy()[1:]), threads=1).numpy()
        np.testing.assert_array_equal(batch[1:], alone)

    def test_files(self):
        """Input tensor and parameter bundle from disk"""
        x = random_input((1, 3, 64, 64), seed=4, dtype='float64')
        write_tensor(self.path('x.botk'), x)
        write_params(self.path('p.botkp'), init_params(self.arch, 5))
        summary = infer(
            self.arch, load_input(self.path('x.botk')), params_path=self.path('p.botkp'),
            output_path=self.path('y.botk'),
        )
        output = read_tensor(self.path('y.botk'))
        self.assertEqual(output.dtype, 'float64')
        self.assertEqual(summary.dtype, 'float64')
        self.assertEqual(len(summary.top1), 1)
        self.assertEqual(summary.top1[0], int(output.numpy()[0].argmax()))

    def test_resolution_mismatch(self):
        """Position tables pin the input size"""
        with self.assertRaises(ResolutionError) as context:
            infer(self.arch, load_input(random_shape=(1, 3, 96, 96)))
        self.assertIn('position-encoding resolution dependency', str(context.exception))

    def test_headless(self):
        """Feature extractors return c5"""
        arch = build_backbone('resnet', 50, None, 64, width_divisor=8, n_classes=None)
        summary = infer(arch, load_input(random_shape=(1, 3, 64, 64)))
        self.assertEqual(summary.output_shape, [1, 256, 2, 2])

    def test_missing_input(self):
        """Either a file or a shape"""
        with self.assertRaises(ShapeError):
            load_input()
        with self.assertRaises(ShapeError):
            infer(self.arch, Tensor(np.zeros((3, 64, 64))))

class TestVerify(unittest.TestCase):
    """Test the verification suites."""
    def test_unknown_suite(self):
        """Suite names are checked"""
        with self.assertRaises(ConfigurationError):
            verify('speed')

    def test_oracle(self):
        """Vectorized layers match the loop oracles"""
        report = verify('oracle', seed=7)
        self.assertTrue(report.passed, [row for row in report.rows if row.status != 'pass'])
        self.assertEqual(len(report.rows), 6)

    def test_invariants(self):
        """Structural invariants over a small matrix"""
        report = verify('invariants', seed=3, depths=[50])
        self.assertTrue(report.passed)
        self.assertIn('invariants/empty_replacement[50]', [row.name for row in report.rows])

    def test_empty_matrix(self):
        """No depths leaves only the layer invariants"""
        report = verify('invariants', seed=3, depths=[])
        self.assertTrue(report.passed)
        self.assertFalse(any('empty_replacement' in row.name for row in report.rows))

    def test_grad(self):
        """Gradient checks with one seed"""
        report = verify('grad', seed=7, settings=Settings(verify_seeds=1))
        self.assertTrue(report.passed, [row for row in report.rows if row.status != 'pass'])
        self.assertEqual(len(report.rows), 10)
        for row in report.rows:
            self.assertLess(row.measured, 1e-6)

    def test_cost(self):
        """Published figures within tolerance"""
        report = verify('cost', seed=0)
        self.assertTrue(report.passed, [row for row in report.rows if row.status != 'pass'])

    def test_repeatable(self):
        """Same seed, same report"""
        self.assertEqual(verify('oracle', seed=5).json(), verify('oracle', seed=5).json())

if __name__ == '__main__':
    unittest.main()
