"""Backbone Unit Tests"""
import json
import os
import tempfile
import unittest

import numpy as np

from botkit.errors import ConfigurationError, ParameterError, ResolutionError
from botkit.schema import NLInsertion, ReplacementConfig
from botkit.tensor import Tensor
from .builder import PRESETS, build_backbone, build_preset, preset_key
from .document import dump_arch, dumps_arch, load_arch, loads_arch
from .forward import forward_classifier, forward_features
from .params import init_params, read_params, write_params
from .shapes import stage_shapes

class TestBuild(unittest.TestCase):
    """Test architecture construction."""
    def test_botnet50_c5(self):
        """BoT50 at 1024: three BoT blocks, the first attending at 64x64"""
        arch = build_backbone('botnet', 50, [1, 1, 1], 1024)
        c5 = arch.blockgroups[3]
        self.assertEqual([block.kind for block in c5], ['bot'] * 3)
        self.assertEqual((c5[0].attention.fm_h, c5[0].attention.fm_w), (64, 64))
        self.assertEqual(c5[0].stride, 2)
        for block in c5[1:]:
            self.assertEqual((block.attention.fm_h, block.attention.fm_w), (32, 32))
        self.assertEqual(c5[0].attention.heads, 4)
        self.assertEqual(c5[0].attention.d_model, 512)

    def test_empty_replacement_is_resnet(self):
        """Flags [0,0,0] give the plain ResNet structure"""
        for depth in (50, 101, 152):
            botnet = build_backbone('botnet', depth, [0, 0, 0], 1024)
            resnet = build_backbone('resnet', depth, None, 1024)
            self.assertEqual(botnet.structure(), resnet.structure())

    def test_s1_59(self):
        """BoTNet-S1-59 at 224: [3,4,6,6], stride-1 c5 attending at 14x14"""
        arch = build_backbone('botnet_s1', 'S1-59', None, 224)
        self.assertEqual(arch.depths, [3, 4, 6, 6])
        self.assertEqual(arch.name, 'BoTNet-S1-59')
        for block in arch.blockgroups[3]:
            self.assertEqual(block.kind, 'bot')
            self.assertEqual(block.stride, 1)
            self.assertEqual((block.attention.fm_h, block.attention.fm_w), (14, 14))
        self.assertEqual(arch.activation, 'silu')
        self.assertTrue(all(block.se == 16 for block in arch.blockgroups[0]))

    def test_s1_tables_follow_input(self):
        """Every c5 table of an S1 net has 2r - 1 rows with r = input / 16"""
        for res in (224, 256, 512):
            arch = build_backbone('botnet_s1', 50, None, res)
            for block in arch.blockgroups[3]:
                self.assertEqual(block.attention.fm_h, res // 16)

    def test_named_depths(self):
        """Blockgroup tables"""
        expected = {
            ('resnet', 101): [3, 4, 23, 3],
            ('resnet', 152): [3, 8, 36, 3],
            ('botnet_s1', 'S1-77'): [3, 4, 6, 12],
            ('botnet_s1', 'S1-110'): [3, 4, 23, 6],
            ('botnet_s1', 'S1-128'): [3, 4, 23, 12],
            ('senet', 350): [4, 40, 60, 12],
        }
        for (family, depth), depths in expected.items():
            self.assertEqual(build_backbone(family, depth, None, 224).depths, depths)

    def test_errors(self):
        """Unknown names, bad resolutions and bad flags are configuration errors"""
        with self.assertRaises(ConfigurationError):
            build_backbone('botnet', 34)
        with self.assertRaises(ConfigurationError):
            build_backbone('vgg', 16)
        with self.assertRaises(ConfigurationError):
            build_backbone('botnet', 50, None, 1000)
        with self.assertRaises(ConfigurationError):
            build_backbone('botnet_s1', 50, [0, 1, 1], 224)
        with self.assertRaises(ConfigurationError):
            build_backbone('botnet', 50, [1, 1], 224)
        with self.assertRaises(ConfigurationError):
            build_backbone('resnet', 50, [0, 0, 1], 224)

    def test_replacement_ablation(self):
        """Partial flags replace exactly the chosen blocks"""
        arch = build_backbone('botnet', 50, [0, 1, 1], 1024)
        self.assertEqual([block.kind for block in arch.blockgroups[3]], ['conv_bottleneck', 'bot', 'bot'])

    def test_insertions(self):
        """Insertions add blocks between the pre-final and final blocks by default"""
        base = build_backbone('resnet', 50, None, 1024)
        replacement = ReplacementConfig(nl_insertions=[NLInsertion(group='c4'), NLInsertion(group='c5', kind='bot')])
        arch = build_backbone('resnet', 50, replacement, 1024)
        c4 = arch.blockgroups[2]
        self.assertEqual(len(c4), 7)
        self.assertEqual(c4[5].kind, 'nl_insert')
        self.assertEqual((c4[5].in_channels, c4[5].mid_channels), (1024, 512))
        c5 = arch.blockgroups[3]
        self.assertEqual(c5[2].kind, 'bot')
        self.assertEqual((c5[2].attention.fm_h, c5[2].mid_channels), (32, 512))
        self.assertEqual(stage_shapes(arch), stage_shapes(base))

    def test_width_divisor(self):
        """Reduced width divides every channel count"""
        arch = build_backbone('botnet', 50, None, 1024, width_divisor=8)
        self.assertEqual(arch.stem_channels, 8)
        self.assertEqual(arch.blockgroups[3][0].attention.d_model, 64)
        with self.assertRaises(ConfigurationError):
            build_backbone('botnet', 50, None, 1024, width_divisor=3)

class TestPresets(unittest.TestCase):
    """Test the named ImageNet models."""
    def test_table(self):
        """Every model builds at its resolution with its blockgroups"""
        expected = {
            'S0': (160, [3, 4, 6, 3]),
            'S1': (224, [3, 4, 23, 3]),
            'S2': (224, [3, 8, 36, 3]),
            'S3': (288, [3, 8, 36, 3]),
            'S4': (320, [4, 40, 60, 12]),
            'S5': (384, [4, 40, 60, 12]),
            'T3': (224, [3, 4, 6, 6]),
            'T4': (224, [3, 4, 23, 6]),
            'T5': (256, [3, 4, 23, 12]),
            'T6': (320, [3, 4, 6, 12]),
            'T7-320': (320, [3, 4, 23, 12]),
            'T7': (384, [3, 4, 23, 12]),
        }
        self.assertEqual(sorted(PRESETS), sorted(expected))
        for name, (res, depths) in expected.items():
            arch = build_preset(name)
            with self.subTest(name=name):
                self.assertEqual(tuple(arch.input_res), (res, res))
                self.assertEqual(arch.depths, depths)
                self.assertEqual([len(blocks) for blocks in arch.blockgroups], depths)

    def test_families(self):
        """SENets gate every group; BoTNets attend in c5 at stride one"""
        senet = build_preset('S5')
        self.assertEqual(senet.name, 'S5 (SENet-350)')
        self.assertTrue(all(block.se == 16 for blocks in senet.blockgroups for block in blocks))
        botnet = build_preset('t7')
        self.assertEqual(botnet.name, 'T7 (BoTNet-S1-128)')
        self.assertEqual(botnet.activation, 'silu')
        self.assertEqual(botnet.se_groups, ['c2', 'c3', 'c4'])
        c5 = botnet.blockgroups[3]
        self.assertTrue(all(block.kind == 'bot' for block in c5))
        self.assertEqual((c5[0].stride, c5[0].attention.fm_h, c5[-1].attention.fm_w), (1, 24, 24))

    def test_overrides(self):
        """Resolution and width can be changed; unknown names cannot be built"""
        arch = build_preset('T7-320', 384, width_divisor=8)
        self.assertEqual(tuple(arch.input_res), (384, 384))
        self.assertEqual(arch.stem_channels, 8)
        self.assertIsNone(preset_key('T8'))
        self.assertIsNone(preset_key(None))
        with self.assertRaises(ConfigurationError):
            build_preset('T8')

class TestStageShapes(unittest.TestCase):
    """Test shape inference."""
    def test_resnet50_1024(self):
        """R50 at 1024 follows the stage table"""
        self.assertEqual(stage_shapes(build_backbone('resnet', 50, None, 1024)), [
            ('c1', 512, 512, 64), ('c2', 256, 256, 256), ('c3', 128, 128, 512),
            ('c4', 64, 64, 1024), ('c5', 32, 32, 2048),
        ])

    def test_resnet50_224(self):
        """R50 at 224 ends at 7x7x2048"""
        self.assertEqual(stage_shapes(build_backbone('resnet', 50))[-1], ('c5', 7, 7, 2048))

    def test_s1_224(self):
        """BoT-S1-50 at 224 ends at 14x14"""
        self.assertEqual(stage_shapes(build_backbone('botnet_s1', 50))[-1], ('c5', 14, 14, 2048))

    def test_resolution_dependency(self):
        """Attention networks only infer shapes at their own resolution"""
        arch = build_backbone('botnet', 50, None, 1024)
        with self.assertRaises(ResolutionError):
            stage_shapes(arch, 512)
        self.assertEqual(stage_shapes(build_backbone('resnet', 50), 512)[-1], ('c5', 16, 16, 2048))

    def test_resolution_dependency_without_positions(self):
        """Attention without position tables is still pinned to its featuremaps"""
        arch = build_backbone('botnet', 50, None, 224, pos_mode='none')
        with self.assertRaises(ResolutionError) as context:
            stage_shapes(arch, 256)
        self.assertEqual(context.exception.expected, (224, 224))
        self.assertEqual(context.exception.actual, (256, 256))
        self.assertIn('featuremap 256x256 does not match 224x224', str(context.exception))

    def test_inference_matches_forward(self):
        """Inferred shapes equal executed shapes across families"""
        archs = [
            build_backbone('resnet', 50, None, 64, width_divisor=8),
            build_backbone('botnet', 50, None, 64, width_divisor=8),
            build_backbone('botnet_s1', 50, None, 64, width_divisor=8),
            build_backbone('senet', 50, None, 96, width_divisor=8),
            build_backbone('botnet', 50, [0, 1, 1], 96, width_divisor=8, pos_mode='absolute'),
        ]
        for arch in archs:
            params = init_params(arch, seed=1, dtype='float32')
            x = Tensor(np.random.default_rng(0).standard_normal((1, 3) + arch.input_res), dtype='float32')
            features = forward_features(arch, params, x)
            measured = [(name, *tensor.shape[2:], tensor.shape[1]) for name, tensor in features.items()]
            with self.subTest(arch=arch.name):
                self.assertEqual(measured, stage_shapes(arch))

class TestForward(unittest.TestCase):
    """Test end-to-end forwards."""
    def test_resnet50_logits(self):
        """R50 at 224 gives 1x1000 finite logits"""
        arch = build_backbone('resnet', 50)
        params = init_params(arch, seed=1, dtype='float32')
        x = Tensor(np.random.default_rng(1).standard_normal((1, 3, 224, 224)), dtype='float32')
        logits = forward_classifier(arch, params, x)
        self.assertEqual(logits.shape, (1, 1000))
        self.assertTrue(np.isfinite(logits.numpy()).all())

    def test_botnet50_stage_table_reduced(self):
        """Reduced-width BoT50 at 1024 keeps the stage resolutions"""
        arch = build_backbone('botnet', 50, None, 1024, width_divisor=8, n_classes=None)
        params = init_params(arch, seed=2, dtype='float32')
        x = Tensor(np.random.default_rng(2).standard_normal((1, 3, 1024, 1024)), dtype='float32')
        features = forward_features(arch, params, x)
        self.assertEqual(
            [(name, tensor.shape[1:]) for name, tensor in features.items()],
            [('c1', (8, 512, 512)), ('c2', (32, 256, 256)), ('c3', (64, 128, 128)),
             ('c4', (128, 64, 64)), ('c5', (256, 32, 32))],
        )

    def test_resolution_mismatch(self):
        """An input at another resolution names the position-encoding dependency"""
        arch = build_backbone('botnet', 50, None, 64, width_divisor=8)
        params = init_params(arch, dtype='float32')
        with self.assertRaises(ResolutionError) as context:
            forward_classifier(arch, params, Tensor(np.zeros((1, 3, 96, 96), dtype=np.float32)))
        self.assertIn('position-encoding resolution dependency', str(context.exception))

    def test_missing_parameter(self):
        """Absent records are parameter errors"""
        arch = build_backbone('resnet', 50, None, 64, width_divisor=8)
        params = init_params(arch, dtype='float32')
        del params['c3.1.conv2']
        with self.assertRaises(ParameterError):
            forward_classifier(arch, params, Tensor(np.zeros((1, 3, 64, 64), dtype=np.float32)))

    def test_insertions_run(self):
        """Inserted non-local and BoT blocks execute"""
        replacement = ReplacementConfig(
            flags=[1, 1, 1],
            nl_insertions=[NLInsertion(group='c4'), NLInsertion(group='c4', position=2, kind='bot')],
        )
        arch = build_backbone('botnet', 50, replacement, 64, width_divisor=8, value_projection=True)
        params = init_params(arch, seed=3, dtype='float32')
        self.assertEqual(arch.blockgroups[2][2].kind, 'bot')
        self.assertEqual(arch.blockgroups[2][6].kind, 'nl_insert')
        self.assertIn('c4.6.nl.g', params)
        x = Tensor(np.random.default_rng(3).standard_normal((2, 3, 64, 64)), dtype='float32')
        self.assertEqual(forward_classifier(arch, params, x).shape, (2, 1000))

class TestParams(unittest.TestCase):
    """Test parameter generation and bundles."""
    def test_seeded(self):
        """The same seed draws the same values; names are shared across archs"""
        small = build_backbone('resnet', 50, None, 64, width_divisor=8)
        first, second = init_params(small, seed=4), init_params(small, seed=4)
        for name, tensor in first.items():
            np.testing.assert_array_equal(tensor.numpy(), second[name].numpy())
        botnet = init_params(build_backbone('botnet', 50, None, 64, width_divisor=8), seed=4)
        np.testing.assert_array_equal(botnet['c4.0.conv2'].numpy(), first['c4.0.conv2'].numpy())
        self.assertNotIn('c5.0.conv2', botnet)
        self.assertEqual(botnet['c5.1.mhsa.r_h'].shape, (3, 16))

    def test_bundle_round_trip(self):
        """Bundles restore every record bit for bit"""
        params = init_params(build_backbone('botnet', 50, None, 64, width_divisor=16), seed=5, dtype='float32')
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'params.botkp')
            write_params(path, params)
            restored = read_params(path)
        self.assertEqual(sorted(restored), sorted(params))
        for name, tensor in params.items():
            self.assertEqual(restored[name].numpy().tobytes(), tensor.numpy().tobytes())

class TestDocument(unittest.TestCase):
    """Test the JSON form."""
    def test_round_trip(self):
        """Documents rebuild the same architecture"""
        archs = [
            build_backbone('botnet', 50, [0, 1, 1], 1024),
            build_backbone('botnet_s1', 'S1-110', None, 256),
            build_backbone('resnet', 101, ReplacementConfig(nl_insertions=[NLInsertion(group='c4')]), 224),
            build_backbone('senet', 50, None, 224, width_divisor=4, n_classes=10),
        ]
        for arch in archs:
            with self.subTest(arch=arch.name):
                self.assertEqual(loads_arch(dumps_arch(arch)), arch)

    def test_file_round_trip(self):
        """Documents survive a file"""
        arch = build_backbone('botnet', 50, None, 1024)
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'arch.json')
            dump_arch(path, arch)
            with open(path, encoding='utf-8') as file:
                payload = json.load(file)
            restored = load_arch(path)
        self.assertEqual(payload['blockgroups'], [3, 4, 6, 3])
        self.assertEqual(payload['replacement_flags'], [1, 1, 1])
        self.assertEqual(restored, arch)

    def test_unknown_field(self):
        """Unknown fields are rejected"""
        payload = json.loads(dumps_arch(build_backbone('resnet', 50)))
        payload['dropout'] = 0.1
        with self.assertRaises(ConfigurationError):
            loads_arch(json.dumps(payload))
