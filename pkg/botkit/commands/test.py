"""Commands Unit Tests"""
import io
import json
import os
import tempfile
import unittest
from unittest import mock

from botkit.audit import LOGGER
from botkit.backbone import build_backbone, dump_arch, load_arch
from botkit.controller import Settings
from botkit.tensor import read_tensor
from .common import EXIT_FAILURE, EXIT_INVALID, EXIT_SUCCESS, execute, has_own_resolution, resolve_arch
from .compare import cmd_compare
from .describe import cmd_describe
from .infer import cmd_infer
from .verify import cmd_verify

def run(command):
    """Executes a command against captured streams."""
    stdout, stderr = io.StringIO(), io.StringIO()
    code = execute(command, 'test', stdout, stderr)
    return code, stdout.getvalue(), stderr.getvalue()

class TestResolveArch(unittest.TestCase):
    """Test architecture arguments."""
    def test_family_depth(self):
        """Split at the first dash"""
        self.assertEqual(resolve_arch('botnet-50').name, 'BoTNet-50')
        self.assertEqual(resolve_arch('botnet_s1-S1-59').depths, [3, 4, 6, 6])
        self.assertEqual(resolve_arch(family='resnet', depth='101').depths, [3, 4, 23, 3])

    def test_named_models(self):
        """Model names resolve before the family-depth split"""
        arch = resolve_arch('t7-320')
        self.assertEqual(arch.name, 'T7-320 (BoTNet-S1-128)')
        self.assertEqual(tuple(arch.input_res), (320, 320))
        self.assertEqual(tuple(resolve_arch('T7-320', res=384).input_res), (384, 384))
        self.assertEqual(resolve_arch('S0', width_divisor=8).stem_channels, 8)
        self.assertTrue(has_own_resolution('T3'))
        self.assertFalse(has_own_resolution('botnet-50'))

    def test_document_resolution(self):
        """A document keeps its resolution unless one is given"""
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'arch.json')
            dump_arch(path, build_backbone('botnet', 50, None, 1024))
            self.assertEqual(tuple(resolve_arch(path).input_res), (1024, 1024))
            self.assertEqual(tuple(resolve_arch(path, res=512).input_res), (512, 512))

class TestExecute(unittest.TestCase):
    """Test exit codes and streams."""
    def test_codes(self):
        """Input errors exit 2, other failures 1"""
        def invalid():
            return cmd_describe('botnet-50', replacement='1,1')

        def broken():
            raise RuntimeError('boom')

        code, stdout, stderr = run(invalid)
        self.assertEqual(code, EXIT_INVALID)
        self.assertEqual(stdout, '')
        self.assertIn('replacement flags', stderr)
        code, stdout, stderr = run(broken)
        self.assertEqual(code, EXIT_FAILURE)
        self.assertEqual(stdout, '')
        self.assertIn('boom', stderr)

class TestDescribe(unittest.TestCase):
    """Test the describe command."""
    def test_botnet_table(self):
        """BoT50 at 1024: MHSA in c5 and 20.9M parameters"""
        code, stdout, stderr = run(lambda: cmd_describe(family='botnet', depth='50', res=1024))
        self.assertEqual(code, EXIT_SUCCESS)
        self.assertEqual(stderr, '')
        c5 = [line for line in stdout.splitlines() if line.startswith('c5')][0]
        self.assertIn('MHSA x3', c5)
        self.assertIn('20.90x10^6', stdout)

    def test_zero_flags(self):
        """ResNet with explicit zero flags"""
        plain = json.loads(cmd_describe('resnet-50', output_format='json')[0])
        flagged = json.loads(cmd_describe(family='resnet', depth=50, replacement='0,0,0', output_format='json')[0])
        self.assertEqual(plain['totals'], flagged['totals'])

    def test_named_model(self):
        """T3 is BoTNet-S1-59 at 224"""
        report = json.loads(cmd_describe('T3', output_format='json')[0])
        plain = json.loads(cmd_describe(family='botnet_s1', depth='S1-59', output_format='json')[0])
        self.assertEqual(report['totals'], plain['totals'])

    def test_json_document(self):
        """--json writes a document that rebuilds the architecture"""
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'arch.json')
            cmd_describe('botnet-50', res=1024, json_path=path)
            self.assertEqual(load_arch(path), build_backbone('botnet', 50, None, 1024))

class TestCompare(unittest.TestCase):
    """Test the compare command."""
    def test_table(self):
        """BoT50 against R50 at 1024"""
        report = json.loads(cmd_compare('botnet-50', 'resnet-50', 1024, 'json')[0])
        self.assertEqual(report['totals']['madds_delta'], 17_576_230_912)

    def test_named_models(self):
        """Named models at one resolution compare without --res"""
        code, stdout, stderr = run(lambda: cmd_compare('T4', 'S2', output_format='json'))
        self.assertEqual(code, EXIT_SUCCESS, stderr)
        self.assertIn('madds_delta', json.loads(stdout)['totals'])
        code, _, stderr = run(lambda: cmd_compare('T5', 'S4'))
        self.assertEqual(code, EXIT_INVALID)
        self.assertIn('mismatched resolutions', stderr)

    def test_identity(self):
        """x against x"""
        code, stdout, _ = run(lambda: cmd_compare('resnet-50', 'resnet-50'))
        self.assertEqual(code, EXIT_SUCCESS)
        self.assertIn('+0', stdout)

class TestVerify(unittest.TestCase):
    """Test the verify command."""
    def test_empty_matrix(self):
        """Invariants with no depths pass"""
        code, stdout, _ = run(lambda: cmd_verify('invariants', 0, Settings(), []))
        self.assertEqual(code, EXIT_SUCCESS)
        self.assertTrue(json.loads(stdout)['passed'])

    def test_failure_exit(self):
        """A failing row makes the command exit 1"""
        with mock.patch('botkit.commands.verify.verify') as verify:
            verify.return_value.passed = False
            verify.return_value.json.return_value = '{"passed": false}'
            code, stdout, _ = run(lambda: cmd_verify('cost'))
        self.assertEqual(code, EXIT_FAILURE)
        self.assertIn('false', stdout)

class TestInfer(unittest.TestCase):
    """Test the infer command."""
    def setUp(self):
        """Scratch directory"""
        self.directory = tempfile.TemporaryDirectory()

    def tearDown(self):
        """Remove the scratch directory"""
        self.directory.cleanup()

    def path(self, name):
        """Scratch file path"""
        return os.path.join(self.directory.name, name)

    def test_repeatable_across_threads(self):
        """Same seed, one or four workers, identical files and summaries"""
        outputs = []
        for threads, name in ((1, 'a.botk'), (4, 'b.botk')):
            code, stdout, _ = run(lambda threads=threads, name=name: cmd_infer(
                'botnet-50', seed=1, random_shape='2x3x64x64', output_path=self.path(name),
                settings=Settings(threads=threads), width_divisor=8,
            ))
            self.assertEqual(code, EXIT_SUCCESS)
            outputs.append(stdout.replace(name, ''))
        self.assertEqual(outputs[0], outputs[1])
        with open(self.path('a.botk'), 'rb') as a, open(self.path('b.botk'), 'rb') as b:
            self.assertEqual(a.read(), b.read())

    def test_shape_contract(self):
        """ResNet logits are N x 1000"""
        code, stdout, _ = run(lambda: cmd_infer(
            'resnet-50', random_shape='1x3x64x64', output_path=self.path('y.botk'), width_divisor=8,
        ))
        self.assertEqual(code, EXIT_SUCCESS)
        self.assertEqual(json.loads(stdout)['output_shape'], [1, 1000])
        self.assertEqual(read_tensor(self.path('y.botk')).shape, (1, 1000))

    def test_resolution_mismatch(self):
        """Exit 2 naming the position-encoding resolution dependency"""
        code, stdout, stderr = run(lambda: cmd_infer(
            'botnet-50', random_shape='1x3x96x96', res=64, output_path=self.path('y.botk'), width_divisor=8,
        ))
        self.assertEqual(code, EXIT_INVALID)
        self.assertEqual(stdout, '')
        self.assertIn('position-encoding resolution dependency', stderr)
        self.assertFalse(os.path.exists(self.path('y.botk')))

    def test_named_model_keeps_resolution(self):
        """A named model is not rebuilt for the input size"""
        code, stdout, stderr = run(lambda: cmd_infer(
            'T3', random_shape='1x3x64x64', output_path=self.path('y.botk'), width_divisor=8,
        ))
        self.assertEqual(code, EXIT_INVALID)
        self.assertEqual(stdout, '')
        self.assertIn('position-encoding resolution dependency', stderr)

    def test_missing_input(self):
        """A missing input file is invalid input"""
        code, stdout, stderr = run(lambda: cmd_infer(
            'resnet-50', input_path=self.path('missing.botk'), output_path=self.path('y.botk'), width_divisor=8,
        ))
        self.assertEqual(code, EXIT_INVALID)
        self.assertEqual(stdout, '')
        self.assertIn('missing.botk', stderr)
        self.assertFalse(os.path.exists(self.path('y.botk')))

class TestMain(unittest.TestCase):
    """Test the argument parser end to end."""
    def test_describe(self):
        """describe through main with a scratch log directory"""
        from botkit.main import main # pylint: disable=import-outside-toplevel
        handlers = list(LOGGER.handlers)
        with tempfile.TemporaryDirectory() as directory:
            with mock.patch.dict(os.environ, {'BOTKIT_LOG_DIR': directory}):
                with mock.patch('sys.stdout', new_callable=io.StringIO) as stdout:
                    code = main(['describe', 'resnet-50', '--format', 'json'])
            for handler in list(LOGGER.handlers):
                if handler not in handlers:
                    handler.close()
                    LOGGER.removeHandler(handler)
        self.assertEqual(code, EXIT_SUCCESS)
        self.assertEqual(json.loads(stdout.getvalue())['totals']['params'], 25_557_032)

if __name__ == '__main__':
    unittest.main()
