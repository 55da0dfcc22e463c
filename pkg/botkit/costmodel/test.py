"""Cost Model Unit Tests"""
import json
import unittest

from botkit.backbone import build_backbone
from botkit.errors import ConfigurationError, ResolutionError
from botkit.schema import COMPONENTS, CostReport, NLInsertion, ReplacementConfig
from .compare import compare
from .counter import block_params, count_madds, count_params
from .measure import measure_costs
from .render import render_compare, render_cost

def within(value: float, target: float, tolerance: float) -> bool:
    """Relative closeness."""
    return abs(value - target) <= tolerance * abs(target)

def stride_one_delta(res: int, width_divisor: int = 1) -> int:
    """Multiply-adds BoT-S1-50 spends over BoT50: c5 runs at the c4 side s instead
    of t = s / 2 after its first block. Both nets agree everywhere else."""
    mid, c4 = 512 // width_divisor, 1024 // width_divisor
    s = res // 16
    t = s // 2
    grown = s * s - t * t

    def mhsa(side):
        positions = side * side
        return 3 * positions * mid * mid + 2 * positions * positions * mid + positions * (4 * side - 2) * mid

    first = 4 * mid * mid * grown + 4 * mid * c4 * grown
    rest = 8 * mid * mid * grown + mhsa(s) - mhsa(t)
    return first + 2 * rest

class TestParams(unittest.TestCase):
    """Test parameter counts."""
    def test_resnet50(self):
        """R50 with a 1000-class head"""
        report = count_params(build_backbone('resnet', 50, None, 224))
        self.assertEqual(report.totals.params, 25_557_032)
        self.assertTrue(within(report.totals.params, 25.5e6, 0.01))

    def test_botnet50(self):
        """BoT50 and BoT-S1-50 differ only by their position tables"""
        bot_224 = count_params(build_backbone('botnet', 50, None, 224)).totals.params
        bot_1024 = count_params(build_backbone('botnet', 50, None, 1024)).totals.params
        s1_224 = count_params(build_backbone('botnet_s1', 50, None, 224)).totals.params
        self.assertEqual(bot_1024, 20_903_208)
        self.assertEqual(bot_224, 20_852_008)
        self.assertEqual(s1_224, 20_859_176)
        for count in (bot_224, bot_1024, s1_224):
            self.assertTrue(within(count, 20.8e6, 0.01))

    def test_block_delta(self):
        """Replacing one 3x3 convolution at width 512 saves 1,572,864 minus the tables"""
        arch = build_backbone('botnet', 50, None, 1024)
        resnet = build_backbone('resnet', 50, None, 1024)
        bot, conv = arch.blockgroups[3][1], resnet.blockgroups[3][1]
        self.assertEqual(block_params(conv) - block_params(bot), 512 * 512 * 9 - 3 * 512 * 512 - 126 * 128)

    def test_empty_replacement(self):
        """botnet with flags [0,0,0] counts exactly as resnet"""
        for depth in (50, 101, 152):
            botnet = count_params(build_backbone('botnet', depth, [0, 0, 0], 224))
            resnet = count_params(build_backbone('resnet', depth, None, 224))
            self.assertEqual(botnet.totals.params, resnet.totals.params)
            self.assertEqual([row.params for row in botnet.rows], [row.params for row in resnet.rows])

    def test_bot_smaller(self):
        """BoT variants have fewer parameters than their convolutional counterparts"""
        for depth in (50, 101, 152):
            botnet = count_params(build_backbone('botnet', depth, None, 1024)).totals.params
            resnet = count_params(build_backbone('resnet', depth, None, 1024)).totals.params
            self.assertLess(botnet, resnet)

    def test_resolution_invariance(self):
        """Convolutional parameter counts do not depend on the input"""
        arch = build_backbone('resnet', 50, None, 224)
        self.assertEqual(count_madds(arch, 224).totals.params, count_madds(arch, 512).totals.params)

    def test_totals(self):
        """Totals are row sums"""
        report = count_madds(build_backbone('botnet', 50, None, 224))
        self.assertEqual(report.totals.params, sum(row.params for row in report.rows))
        self.assertEqual(report.totals.madds, sum(row.madds for row in report.rows))
        for row in report.rows:
            self.assertEqual(row.madds, sum(row.components.values()))
        self.assertEqual(set(report.rows[0].components), set(COMPONENTS))

class TestMadds(unittest.TestCase):
    """Test multiply-add counts."""
    def test_224(self):
        """Classifiers at 224"""
        resnet = count_madds(build_backbone('resnet', 50, None, 224)).totals.madds
        botnet = count_madds(build_backbone('botnet', 50, None, 224)).totals.madds
        s1 = count_madds(build_backbone('botnet_s1', 50, None, 224)).totals.madds
        self.assertTrue(within(resnet, 3.86e9, 0.10))
        self.assertTrue(within(botnet, 3.79e9, 0.10))
        self.assertLess(botnet, resnet)
        self.assertLess(resnet, s1)
        self.assertTrue(within(botnet - resnet, -0.07e9, 0.25))
        self.assertEqual(botnet - resnet, -64_626_688)

    def test_stride_one_delta(self):
        """Stride-1 c5 quadruples the c5 1x1 convolutions and shortcut"""
        botnet = count_madds(build_backbone('botnet', 50, None, 224)).totals.madds
        s1 = count_madds(build_backbone('botnet_s1', 50, None, 224)).totals.madds
        self.assertEqual(s1 - botnet, 1_393_487_872)

    def test_stride_one_delta_by_term(self):
        """The S1 excess is exactly the c5 terms evaluated at the larger side"""
        self.assertEqual(stride_one_delta(224), 1_393_487_872)
        for res in (224, 256, 384):
            botnet = count_madds(build_backbone('botnet', 50, None, res)).totals.madds
            s1 = count_madds(build_backbone('botnet_s1', 50, None, res)).totals.madds
            self.assertEqual(s1 - botnet, stride_one_delta(res), res)

    def test_1024(self):
        """Backbones at 1024"""
        resnet = count_madds(build_backbone('resnet', 50, None, 1024)).totals.madds
        botnet = count_madds(build_backbone('botnet', 50, None, 1024)).totals.madds
        self.assertTrue(within(resnet, 85.4e9, 0.10))
        self.assertTrue(within(botnet, 102.98e9, 0.10))
        self.assertTrue(within(botnet - resnet, 17.58e9, 0.10))
        self.assertEqual(botnet - resnet, 17_576_230_912)

    def test_conv_scaling(self):
        """Doubling the side multiplies every convolutional stage by four"""
        arch = build_backbone('resnet', 50, None, 224)
        small, large = count_madds(arch, 256), count_madds(arch, 512)
        for stage in ('c1', 'c2', 'c3', 'c4', 'c5'):
            self.assertEqual(large.row(stage).madds, 4 * small.row(stage).madds)
        self.assertEqual(large.row('head').madds, small.row('head').madds)

    def test_attention_scaling(self):
        """Attention logits grow sixteenfold when the side doubles"""
        small = count_madds(build_backbone('botnet', 50, None, 256))
        large = count_madds(build_backbone('botnet', 50, None, 512))
        self.assertEqual(large.component('attn_content'), 16 * small.component('attn_content'))
        for stage in ('c1', 'c2', 'c3', 'c4'):
            self.assertEqual(large.row(stage).madds, 4 * small.row(stage).madds)
        self.assertGreater(large.row('c5').madds, 4 * small.row('c5').madds)

    def test_monotone(self):
        """More pixels never cost less"""
        arch = build_backbone('resnet', 50, None, 224)
        costs = [count_madds(arch, res).totals.madds for res in (224, 256, 320, 512)]
        self.assertEqual(costs, sorted(costs))

    def test_resolution_errors(self):
        """Invalid or mismatched resolutions"""
        with self.assertRaises(ConfigurationError):
            count_madds(build_backbone('resnet', 50, None, 224), 230)
        with self.assertRaises(ResolutionError):
            count_madds(build_backbone('botnet', 50, None, 1024), 224)

    def test_position_modes(self):
        """Absolute tables cost n^2 d, none costs nothing"""
        relative = count_madds(build_backbone('botnet', 50, None, 224))
        absolute = count_madds(build_backbone('botnet', 50, None, 224, pos_mode='absolute'))
        none = count_madds(build_backbone('botnet', 50, None, 224, pos_mode='none'))
        self.assertEqual(none.component('attn_position'), 0)
        self.assertEqual(absolute.component('attn_position'), (196 ** 2 + 2 * 49 ** 2) * 512)
        self.assertEqual(relative.component('attn_position'), (196 * 54 + 2 * 49 * 26) * 512)
        self.assertEqual(relative.component('attn_content'), none.component('attn_content'))

    def test_annotations(self):
        """Published figures ride along with full-width named backbones only"""
        report = count_madds(build_backbone('botnet', 50, None, 1024))
        self.assertIn(121e9, [note.value for note in report.annotations])
        reduced = count_madds(build_backbone('botnet', 50, None, 1024, width_divisor=8))
        self.assertEqual(reduced.annotations, [])

class TestMeasure(unittest.TestCase):
    """Test the closed form against a metered forward."""
    def check(self, arch):
        """Rows agree exactly"""
        counted, measured = count_madds(arch), measure_costs(arch, seed=3)
        self.assertEqual([row.stage for row in measured.rows], [row.stage for row in counted.rows])
        for row in counted.rows:
            self.assertEqual(measured.row(row.stage).params, row.params, row.stage)
            self.assertEqual(measured.row(row.stage).madds, row.madds, row.stage)
        self.assertEqual(measured.totals, counted.totals)

    def test_botnet(self):
        """Relative BoTNet with a stride-2 BoT block"""
        self.check(build_backbone('botnet', 50, None, 64, width_divisor=8))

    def test_resnet(self):
        """Plain ResNet"""
        self.check(build_backbone('resnet', 50, None, 64, width_divisor=8))

    def test_senet(self):
        """SE gates on every group"""
        self.check(build_backbone('senet', 50, None, 64, width_divisor=8))

    def test_s1_absolute(self):
        """Stride-1 c5 with absolute tables"""
        self.check(build_backbone('botnet_s1', 50, None, 64, width_divisor=8, pos_mode='absolute'))

    def test_content_free(self):
        """Position-only logits"""
        self.check(build_backbone('botnet', 50, None, 64, width_divisor=8, content_logits=False))

    def test_insertions(self):
        """Inserted NL and BoT blocks"""
        replacement = ReplacementConfig(
            flags=[False, False, False],
            nl_insertions=[NLInsertion(group='c4'), NLInsertion(group='c4', position=2, kind='bot')],
        )
        arch = build_backbone('resnet', 50, replacement, 64, width_divisor=8, value_projection=True)
        self.check(arch)

    def test_stride_one_delta(self):
        """The metered S1 excess matches the term-by-term c5 delta"""
        botnet = measure_costs(build_backbone('botnet', 50, None, 64, width_divisor=8), seed=4)
        s1 = measure_costs(build_backbone('botnet_s1', 50, None, 64, width_divisor=8), seed=4)
        self.assertEqual(s1.totals.madds - botnet.totals.madds, stride_one_delta(64, 8))
        for stage in ('c1', 'c2', 'c3', 'c4', 'head'):
            self.assertEqual(s1.row(stage).madds, botnet.row(stage).madds, stage)

    def test_headless(self):
        """Feature extractors have no head row"""
        arch = build_backbone('resnet', 50, None, 64, width_divisor=8, n_classes=None)
        self.assertIsNone(count_madds(arch).row('head'))
        self.check(arch)

class TestCompare(unittest.TestCase):
    """Test comparisons."""
    def test_identity(self):
        """An architecture against itself"""
        arch = build_backbone('botnet', 50, None, 224)
        report = compare(arch, arch)
        for row in report.rows + [report.totals]:
            self.assertEqual(row.params_delta, 0)
            self.assertEqual(row.madds_delta, 0)
            self.assertEqual(row.madds_ratio, 1.0)

    def test_only_c5_differs(self):
        """BoT50 against R50 at 1024"""
        report = compare(build_backbone('botnet', 50, None, 1024), build_backbone('resnet', 50, None, 1024))
        changed = [row.stage for row in report.rows if row.params_delta or row.madds_delta]
        self.assertEqual(changed, ['c5'])
        self.assertEqual(report.totals.madds_delta, 17_576_230_912)

    def test_shared_resolution(self):
        """Convolutional networks can be compared at any valid resolution"""
        report = compare(build_backbone('resnet', 101, None, 224), build_backbone('resnet', 50, None, 224), 512)
        self.assertEqual(tuple(report.resolution), (512, 512))
        self.assertGreater(report.totals.madds_delta, 0)

    def test_mismatch(self):
        """Architectures built for different inputs"""
        with self.assertRaises(ConfigurationError):
            compare(build_backbone('botnet', 50, None, 224), build_backbone('resnet', 50, None, 1024))
        with self.assertRaises(ResolutionError):
            compare(build_backbone('botnet', 50, None, 224), build_backbone('resnet', 50, None, 224), 1024)

class TestRender(unittest.TestCase):
    """Test text and JSON output."""
    def test_describe(self):
        """BoT50 table"""
        report = count_madds(build_backbone('botnet', 50, None, 1024))
        text = render_cost(report)
        self.assertIn('MHSA x3', text)
        self.assertIn('20.90x10^6', text)
        self.assertIn('512x512', text)
        self.assertIn('20,903,208', text)

    def test_compare(self):
        """Delta table"""
        report = compare(build_backbone('botnet', 50, None, 1024), build_backbone('resnet', 50, None, 1024))
        self.assertIn('+17,576,230,912', render_compare(report))

    def test_json(self):
        """Reports survive JSON"""
        report = count_madds(build_backbone('botnet_s1', 50, None, 224))
        payload = json.loads(report.json())
        self.assertEqual(payload['convention'], 'botkit-madds-v1')
        self.assertEqual(CostReport.parse_obj(payload), report)

if __name__ == '__main__':
    unittest.main()
