"""Schema Unit Tests"""
import unittest

from pydantic import ValidationError

from .arch import BlockSpec, MHSAConfig, NLInsertion

class TestMHSAConfig(unittest.TestCase):
    """Test attention configurations."""
    def test_derived(self):
        """Head width, scale and positions"""
        config = MHSAConfig(d_model=512, heads=4, fm_h=14, fm_w=12)
        self.assertEqual(config.d_head, 128)
        self.assertAlmostEqual(config.logit_scale, 128 ** -0.5)
        self.assertEqual(config.positions, 168)

    def test_invalid(self):
        """Uneven heads, empty maps and logit-free attention"""
        for values in (
                {'d_model': 10, 'heads': 4, 'fm_h': 2, 'fm_w': 2},
                {'d_model': 8, 'heads': 4, 'fm_h': 0, 'fm_w': 2},
                {'d_model': 8, 'fm_h': 2, 'fm_w': 2, 'pos_mode': 'rotary'},
                {'d_model': 8, 'fm_h': 2, 'fm_w': 2, 'pos_mode': 'none', 'content_logits': False},
                {'d_model': 8, 'fm_h': 2, 'fm_w': 2, 'dropout': 0.1},
            ):
            with self.assertRaises(ValidationError):
                MHSAConfig(**values)

    def test_frozen(self):
        """Configs cannot be mutated"""
        config = MHSAConfig(d_model=8, fm_h=2, fm_w=2)
        with self.assertRaises(TypeError):
            config.heads = 2

class TestBlockSpec(unittest.TestCase):
    """Test block placement rules."""
    def test_projection(self):
        """Shortcut projections on stride or width change"""
        self.assertTrue(BlockSpec(in_channels=64, mid_channels=64, out_channels=256).has_projection)
        self.assertFalse(BlockSpec(in_channels=256, mid_channels=64, out_channels=256).has_projection)
        self.assertTrue(BlockSpec(in_channels=256, mid_channels=64, out_channels=256, stride=2).has_projection)

    def test_bot(self):
        """BoT blocks need attention sized to the mid width"""
        attention = MHSAConfig(d_model=512, fm_h=4, fm_w=4)
        BlockSpec(kind='bot', in_channels=2048, mid_channels=512, out_channels=2048, attention=attention)
        with self.assertRaises(ValidationError):
            BlockSpec(kind='bot', in_channels=2048, mid_channels=512, out_channels=2048)
        with self.assertRaises(ValidationError):
            BlockSpec(in_channels=2048, mid_channels=512, out_channels=2048, attention=attention)
        with self.assertRaises(ValidationError):
            BlockSpec(
                kind='bot', in_channels=2048, mid_channels=512, out_channels=2048, attention=attention, se=16
            )

    def test_nonlocal(self):
        """Non-local blocks halve an even width and keep the resolution"""
        BlockSpec(kind='nl_insert', in_channels=1024, mid_channels=512, out_channels=1024)
        for values in (
                {'in_channels': 1024, 'mid_channels': 256, 'out_channels': 1024},
                {'in_channels': 1024, 'mid_channels': 512, 'out_channels': 1024, 'stride': 2},
            ):
            with self.assertRaises(ValidationError):
                BlockSpec(kind='nl_insert', **values)

    def test_bottleneck_widths(self):
        """Expansion 4, strides 1 or 2"""
        with self.assertRaises(ValidationError):
            BlockSpec(in_channels=64, mid_channels=64, out_channels=128)
        with self.assertRaises(ValidationError):
            BlockSpec(in_channels=64, mid_channels=64, out_channels=256, stride=3)

class TestNLInsertion(unittest.TestCase):
    """Test insertion points."""
    def test_known(self):
        """Groups c2 to c5, kinds nl or bot"""
        self.assertEqual(NLInsertion(group='c4', position=2).kind, 'nl')
        with self.assertRaises(ValidationError):
            NLInsertion(group='c6')
        with self.assertRaises(ValidationError):
            NLInsertion(group='c4', kind='se')

if __name__ == '__main__':
    unittest.main()
