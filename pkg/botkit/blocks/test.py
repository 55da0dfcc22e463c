"""Blocks Unit Tests"""
import unittest

import numpy as np

from botkit.attention import mhsa2d, MHSAParams
from botkit.errors import ConfigurationError, ParameterError, ResolutionError
from botkit.schema import BlockSpec, MHSAConfig
from botkit.tensor import (
    Tensor,
    activation,
    add,
    avg_pool2d,
    batchnorm_affine,
    check_function,
    conv2d,
)
from . import apply_block
from .bot import bot_block
from .bottleneck import bottleneck_block
from .params import init_block_params, subtree
from .se import se_gate

def bot_spec(in_channels, mid, fm_h, fm_w, stride=1, heads=2, pos_mode='relative', kind='relu'):
    """A BoT block spec attending at fm_h x fm_w."""
    return BlockSpec(
        kind='bot', in_channels=in_channels, mid_channels=mid, out_channels=4 * mid, stride=stride,
        attention=MHSAConfig(d_model=mid, heads=heads, fm_h=fm_h, fm_w=fm_w, pos_mode=pos_mode),
        activation=kind,
    )

def zero_branch(params, channels):
    """Zero final conv and a BN3 that maps zero to zero."""
    params = dict(params)
    params['conv3'] = Tensor(np.zeros(params['conv3'].shape))
    params['bn3.mean'] = Tensor(np.zeros(channels))
    params['bn3.beta'] = Tensor(np.zeros(channels))
    return params

def bn(x, params, name):
    """Inference BN from records."""
    return batchnorm_affine(x, *(params[f'{name}.{field}'] for field in ('gamma', 'beta', 'mean', 'var')))

class TestBottleneck(unittest.TestCase):
    """Test the convolutional bottleneck."""
    def setUp(self):
        """Random input and an identity-shortcut spec"""
        self.rng = np.random.default_rng(0)
        self.spec = BlockSpec(in_channels=16, mid_channels=4, out_channels=16)
        self.params = init_block_params(self.spec, seed=1)
        self.x = Tensor(self.rng.standard_normal((2, 16, 5, 5)))

    def test_zero_branch(self):
        """A zero final conv leaves act(x)"""
        params = zero_branch(self.params, 16)
        result = bottleneck_block(self.x, self.spec, params).numpy()
        np.testing.assert_array_equal(result, np.maximum(self.x.numpy(), 0.0))

    def test_c2_shape(self):
        """c2 geometry: 1x256x256x256 stays 1x256x256x256"""
        spec = BlockSpec(in_channels=256, mid_channels=64, out_channels=256)
        params = init_block_params(spec, dtype='float32')
        x = Tensor(np.ones((1, 256, 256, 256), dtype=np.float32))
        self.assertEqual(bottleneck_block(x, spec, params).shape, (1, 256, 256, 256))

    def test_composition_oracle(self):
        """Projection block against the op sequence, bit for bit"""
        spec = BlockSpec(in_channels=8, mid_channels=4, out_channels=16, stride=2, activation='silu')
        params = init_block_params(spec, seed=2)
        x = Tensor(self.rng.standard_normal((1, 8, 6, 6)))
        y = activation(bn(conv2d(x, params['conv1']), params, 'bn1'), 'silu')
        y = activation(bn(conv2d(y, params['conv2'], stride=2, pad=1), params, 'bn2'), 'silu')
        y = bn(conv2d(y, params['conv3']), params, 'bn3')
        expected = activation(add(y, bn(conv2d(x, params['shortcut'], stride=2), params, 'shortcut_bn')), 'silu')
        result = bottleneck_block(x, spec, params)
        self.assertEqual(result.shape, (1, 16, 3, 3))
        np.testing.assert_array_equal(result.numpy(), expected.numpy())

    def test_channel_mismatch(self):
        """Input channels must match the block"""
        with self.assertRaises(ConfigurationError):
            bottleneck_block(Tensor(np.zeros((1, 8, 4, 4))), self.spec, self.params)

    def test_spec_rules(self):
        """out == 4 * mid and no attention on conv blocks"""
        with self.assertRaises(ValueError):
            BlockSpec(in_channels=8, mid_channels=4, out_channels=8)
        with self.assertRaises(ValueError):
            BlockSpec(
                in_channels=8, mid_channels=4, out_channels=16,
                attention=MHSAConfig(d_model=4, heads=2, fm_h=2, fm_w=2),
            )
        with self.assertRaises(ValueError):
            BlockSpec(kind='bot', in_channels=8, mid_channels=4, out_channels=16, se=16,
                      attention=MHSAConfig(d_model=4, heads=2, fm_h=2, fm_w=2))

class TestBot(unittest.TestCase):
    """Test the BoT block."""
    def setUp(self):
        """Random generator"""
        self.rng = np.random.default_rng(3)

    def test_single_position_matches_convolution(self):
        """At 1x1 the block equals a bottleneck whose 3x3 kernel is Wv at the center"""
        spec = bot_spec(16, 4, 1, 1)
        params = init_block_params(spec, seed=4)
        conv_spec = BlockSpec(in_channels=16, mid_channels=4, out_channels=16)
        kernel = np.zeros((4, 4, 3, 3))
        kernel[:, :, 1, 1] = params['mhsa.wv'].numpy()[:, :, 0, 0]
        conv_params = {name: tensor for name, tensor in params.items() if not name.startswith('mhsa.')}
        conv_params['conv2'] = Tensor(kernel)
        x = Tensor(self.rng.standard_normal((2, 16, 1, 1)))
        np.testing.assert_allclose(
            bot_block(x, spec, params).numpy(), bottleneck_block(x, conv_spec, conv_params).numpy(),
            rtol=0, atol=1e-12
        )

    def test_c5_first_block_shape(self):
        """Stride 2 on 1x1024x64x64 gives 1x2048x32x32"""
        spec = bot_spec(1024, 512, 64, 64, stride=2, heads=4)
        params = init_block_params(spec, dtype='float32')
        x = Tensor(self.rng.standard_normal((1, 1024, 64, 64)).astype(np.float32))
        self.assertEqual(bot_block(x, spec, params).shape, (1, 2048, 32, 32))

    def test_zero_branch(self):
        """A zero final conv leaves act(projected shortcut)"""
        spec = bot_spec(8, 4, 4, 4, stride=2)
        params = zero_branch(init_block_params(spec, seed=5), 16)
        x = Tensor(self.rng.standard_normal((1, 8, 4, 4)))
        projected = bn(conv2d(x, params['shortcut'], stride=2), params, 'shortcut_bn')
        np.testing.assert_array_equal(bot_block(x, spec, params).numpy(), np.maximum(projected.numpy(), 0.0))

    def test_strided_composition(self):
        """Strided block equals attention, 2x2 pooling and a strided projection"""
        spec = bot_spec(8, 4, 4, 6, stride=2)
        params = init_block_params(spec, seed=6)
        x = Tensor(self.rng.standard_normal((2, 8, 4, 6)))
        y = activation(bn(conv2d(x, params['conv1']), params, 'bn1'), 'relu')
        y = avg_pool2d(mhsa2d(y, MHSAParams.from_records(subtree(params, 'mhsa.')), spec.attention))
        y = bn(conv2d(activation(bn(y, params, 'bn2'), 'relu'), params['conv3']), params, 'bn3')
        expected = activation(add(y, bn(conv2d(x, params['shortcut'], stride=2), params, 'shortcut_bn')), 'relu')
        np.testing.assert_array_equal(bot_block(x, spec, params).numpy(), expected.numpy())

    def test_zero_tables_single_head(self):
        """Zero tables with one head reproduce the content-only block exactly"""
        spec = bot_spec(8, 4, 3, 3, heads=1)
        params = init_block_params(spec, seed=7)
        params['mhsa.r_h'] = Tensor(np.zeros((5, 4)))
        params['mhsa.r_w'] = Tensor(np.zeros((5, 4)))
        content_only = bot_spec(8, 4, 3, 3, heads=1, pos_mode='none')
        x = Tensor(self.rng.standard_normal((1, 8, 3, 3)))
        np.testing.assert_array_equal(
            bot_block(x, spec, params).numpy(), bot_block(x, content_only, params).numpy()
        )

    def test_resolution_mismatch(self):
        """Tables sized for 4x4 refuse a 6x6 featuremap"""
        spec = bot_spec(8, 4, 4, 4)
        params = init_block_params(spec)
        with self.assertRaises(ResolutionError):
            bot_block(Tensor(np.zeros((1, 8, 6, 6))), spec, params)

    def test_dispatch(self):
        """apply_block routes on the block kind"""
        spec = bot_spec(8, 4, 2, 2)
        params = init_block_params(spec, seed=8)
        x = Tensor(self.rng.standard_normal((1, 8, 2, 2)))
        np.testing.assert_array_equal(apply_block(x, spec, params).numpy(), bot_block(x, spec, params).numpy())

class TestSeGate(unittest.TestCase):
    """Test the squeeze-excitation gate."""
    def setUp(self):
        """Random weights for 32 channels at ratio 16"""
        self.rng = np.random.default_rng(9)
        self.params = {
            'w1': Tensor(self.rng.standard_normal((2, 32))),
            'w2': Tensor(self.rng.standard_normal((32, 2))),
        }

    def test_zero_excitation(self):
        """W2 = 0 halves the input"""
        params = {'w1': self.params['w1'], 'w2': Tensor(np.zeros((32, 2)))}
        x = self.rng.standard_normal((2, 32, 3, 3))
        np.testing.assert_array_equal(se_gate(Tensor(x), params).numpy(), x / 2)

    def test_constant_channels(self):
        """Constant channels gate like their 1x1 pooled tensor"""
        values = self.rng.choice([0.5, 1.0, 2.0, -1.5], size=(1, 32, 1, 1))
        x = np.broadcast_to(values, (1, 32, 2, 2))
        spatial = se_gate(Tensor(x), self.params).numpy()
        pooled = se_gate(Tensor(values), self.params).numpy()
        np.testing.assert_allclose(spatial, np.broadcast_to(pooled, x.shape), rtol=0, atol=1e-15)

    def test_loop_oracle(self):
        """Random case against scalar loops"""
        x = self.rng.standard_normal((2, 32, 2, 3))
        w1, w2 = self.params['w1'].numpy(), self.params['w2'].numpy()
        result = se_gate(Tensor(x), self.params).numpy()
        for b in range(2):
            pooled = [x[b, c].sum() / 6.0 for c in range(32)]
            hidden = [max(0.0, sum(w1[r, c] * pooled[c] for c in range(32))) for r in range(2)]
            for c in range(32):
                gate = 1.0 / (1.0 + np.exp(-sum(w2[c, r] * hidden[r] for r in range(2))))
                np.testing.assert_allclose(result[b, c], x[b, c] * gate, rtol=0, atol=1e-12)

    def test_width_mismatch(self):
        """Weights for another ratio are rejected"""
        with self.assertRaises(ParameterError):
            se_gate(Tensor(np.zeros((1, 32, 2, 2))), self.params, ratio=8)

class TestGradients(unittest.TestCase):
    """Test block gradients against finite differences."""
    def check_block(self, spec, shape, seeds=range(5)):
        """Checks input and every parameter over several seeds"""
        for seed in seeds:
            inputs = init_block_params(spec, seed=seed)
            inputs['x'] = Tensor(np.random.default_rng(seed).standard_normal(shape))

            def forward(x, **params):
                return apply_block(x, spec, params)

            with self.subTest(kind=spec.kind, stride=spec.stride, seed=seed):
                self.assertLess(check_function(forward, inputs, seed=seed).max_rel_error, 1e-6)

    def test_bottleneck(self):
        """Identity and projection shortcuts"""
        self.check_block(BlockSpec(in_channels=8, mid_channels=2, out_channels=8, activation='silu'), (1, 8, 4, 5))
        self.check_block(
            BlockSpec(in_channels=8, mid_channels=2, out_channels=8, stride=2, activation='silu'), (1, 8, 4, 4)
        )

    def test_se_bottleneck(self):
        """SE-gated bottleneck"""
        self.check_block(
            BlockSpec(in_channels=8, mid_channels=2, out_channels=8, se=4, activation='silu'), (1, 8, 3, 3)
        )

    def test_bot(self):
        """BoT blocks at stride 1 and 2 with four heads"""
        self.check_block(bot_spec(8, 4, 4, 5, heads=4, kind='silu'), (1, 8, 4, 5))
        self.check_block(bot_spec(8, 4, 4, 4, stride=2, heads=4, kind='silu'), (1, 8, 4, 4))

    def test_single_head_zero_tables(self):
        """Single-head BoT block starting from zero tables"""
        spec = bot_spec(8, 4, 3, 3, heads=1, kind='silu')
        for seed in range(5):
            inputs = init_block_params(spec, seed=seed)
            inputs['mhsa.r_h'] = Tensor(np.zeros((5, 4)))
            inputs['mhsa.r_w'] = Tensor(np.zeros((5, 4)))
            inputs['x'] = Tensor(np.random.default_rng(seed).standard_normal((1, 8, 3, 3)))

            def forward(x, **params):
                return bot_block(x, spec, params)

            self.assertLess(check_function(forward, inputs, seed=seed).max_rel_error, 1e-6)

    def test_nonlocal_block(self):
        """Inserted non-local block"""
        self.check_block(BlockSpec(kind='nl_insert', in_channels=8, mid_channels=4, out_channels=8), (1, 8, 3, 2))
