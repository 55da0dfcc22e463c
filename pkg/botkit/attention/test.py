"""Attention Unit Tests"""
import unittest

import numpy as np

from botkit.errors import ConfigurationError, ResolutionError, ShapeError
from botkit.schema import MHSAConfig
from botkit.tensor import DifferentiableGraph, Meter, Tensor, check_function, conv2d, add
from .mhsa import absolute_logits, mhsa2d, project_qkv, relative_logits_2d
from .nonlocal_layer import nonlocal_layer
from .oracle import brute_relative_logits, naive_mhsa, nonlocal_via_mhsa, permute_positions
from .params import MHSAParams, NonLocalParams, init_mhsa_params, init_nonlocal_params

class TestProjectQkv(unittest.TestCase):
    """Test the pointwise projections."""
    def test_identity_projection(self):
        """Identity kernels and one head give q = scale * x flattened"""
        config = MHSAConfig(d_model=4, heads=1, fm_h=2, fm_w=2, pos_mode='none')
        eye = Tensor(np.eye(4).reshape(4, 4, 1, 1))
        params = MHSAParams(wq=eye, wk=eye, wv=eye)
        x = np.zeros((1, 4, 2, 2))
        x[0, 2, 1, 0] = 1.0
        q, k, v = project_qkv(Tensor(x), params, config)
        expected = x.reshape(1, 1, 4, 4).transpose(0, 1, 3, 2)
        np.testing.assert_array_equal(q.numpy(), expected * 0.5)
        np.testing.assert_array_equal(k.numpy(), expected)
        np.testing.assert_array_equal(v.numpy(), expected)

    def test_c5_shapes(self):
        """2x512x64x64 with four heads gives 2x4x4096x128 projections"""
        config = MHSAConfig(d_model=512, heads=4, fm_h=64, fm_w=64, pos_mode='none')
        params = init_mhsa_params(config, dtype='float32')
        x = Tensor(np.zeros((2, 512, 64, 64), dtype=np.float32))
        for tensor in project_qkv(x, params, config):
            self.assertEqual(tensor.shape, (2, 4, 4096, 128))

    def test_position_oracle(self):
        """Random projections against per-position matrix-vector products"""
        config = MHSAConfig(d_model=6, heads=3, fm_h=2, fm_w=3, pos_mode='none')
        params = init_mhsa_params(config, seed=5)
        x = np.random.default_rng(0).standard_normal((2, 6, 2, 3))
        q, _, _ = project_qkv(Tensor(x), params, config)
        wq = params.wq.numpy()[:, :, 0, 0]
        for b in range(2):
            for i in range(2):
                for j in range(3):
                    expected = wq @ x[b, :, i, j] * config.logit_scale
                    for head in range(3):
                        np.testing.assert_allclose(
                            q.numpy()[b, head, i * 3 + j], expected[head * 2:(head + 1) * 2],
                            rtol=0, atol=1e-13
                        )

    def test_resolution_dependency(self):
        """A featuremap of another size is refused"""
        config = MHSAConfig(d_model=4, heads=2, fm_h=4, fm_w=4)
        params = init_mhsa_params(config)
        with self.assertRaises(ResolutionError) as context:
            project_qkv(Tensor(np.zeros((1, 4, 8, 8))), params, config)
        self.assertIn('position-encoding resolution dependency', str(context.exception))

class TestRelativeLogits(unittest.TestCase):
    """Test the content-position term of split relative encodings."""
    def setUp(self):
        """Random generator shared by the cases"""
        self.rng = np.random.default_rng(1)

    def test_single_position(self):
        """H=W=1 gives q . (R_h[0] + R_w[0])"""
        q = self.rng.standard_normal((1, 1, 1, 3))
        r_h, r_w = self.rng.standard_normal((1, 3)), self.rng.standard_normal((1, 3))
        logits = relative_logits_2d(Tensor(q), Tensor(r_h), Tensor(r_w), 1, 1).numpy()
        self.assertAlmostEqual(logits[0, 0, 0, 0], q[0, 0, 0] @ (r_h[0] + r_w[0]), delta=1e-15)

    def test_zero_tables(self):
        """Zero tables give zero logits"""
        q = Tensor(self.rng.standard_normal((2, 2, 6, 4)))
        logits = relative_logits_2d(q, Tensor(np.zeros((3, 4))), Tensor(np.zeros((5, 4))), 2, 3)
        np.testing.assert_array_equal(logits.numpy(), 0.0)

    def test_brute_force_oracle(self):
        """Every H, W up to 6 against the all-pairs oracle"""
        for height in range(1, 7):
            for width in range(1, 7):
                q = self.rng.standard_normal((1, 2, height * width, 3))
                r_h = self.rng.standard_normal((2 * height - 1, 3))
                r_w = self.rng.standard_normal((2 * width - 1, 3))
                with self.subTest(height=height, width=width):
                    logits = relative_logits_2d(Tensor(q), Tensor(r_h), Tensor(r_w), height, width).numpy()
                    np.testing.assert_allclose(
                        logits, brute_relative_logits(q, r_h, r_w, height, width), rtol=0, atol=1e-12
                    )

    def test_table_length_mismatch(self):
        """Tables sized for another featuremap are rejected"""
        q = Tensor(np.zeros((1, 1, 6, 2)))
        with self.assertRaises(ConfigurationError):
            relative_logits_2d(q, Tensor(np.zeros((5, 2))), Tensor(np.zeros((5, 2))), 2, 3)

class TestAbsoluteLogits(unittest.TestCase):
    """Test the absolute position term."""
    def test_zero_table(self):
        """A zero table gives zero logits"""
        q = Tensor(np.random.default_rng(2).standard_normal((1, 2, 4, 3)))
        np.testing.assert_array_equal(absolute_logits(q, Tensor(np.zeros((4, 3)))).numpy(), 0.0)

    def test_broadcast_rows(self):
        """d_head=1 and q=1 make every row the transposed table"""
        p_abs = np.arange(5.0).reshape(5, 1)
        logits = absolute_logits(Tensor(np.ones((1, 1, 5, 1))), Tensor(p_abs)).numpy()
        for row in logits[0, 0]:
            np.testing.assert_array_equal(row, p_abs[:, 0])

    def test_pair_oracle_and_rank(self):
        """Random case against a pair loop; rank never exceeds d_head"""
        rng = np.random.default_rng(3)
        q, p_abs = rng.standard_normal((1, 1, 9, 2)), rng.standard_normal((9, 2))
        logits = absolute_logits(Tensor(q), Tensor(p_abs)).numpy()
        for p in range(9):
            for p_key in range(9):
                self.assertAlmostEqual(logits[0, 0, p, p_key], q[0, 0, p] @ p_abs[p_key], delta=1e-12)
        self.assertLessEqual(np.linalg.matrix_rank(logits[0, 0]), 2)

    def test_length_mismatch(self):
        """The table must have one row per position"""
        with self.assertRaises(ConfigurationError):
            absolute_logits(Tensor(np.zeros((1, 1, 4, 2))), Tensor(np.zeros((5, 2))))

class TestMhsa2d(unittest.TestCase):
    """Test the attention layer."""
    def setUp(self):
        """Random input for a 1x8x3x3 featuremap"""
        self.rng = np.random.default_rng(4)
        self.x = self.rng.standard_normal((1, 8, 3, 3))

    def test_single_position(self):
        """One position attends to itself with weight 1, giving Wv x"""
        for pos_mode in ('relative', 'absolute', 'none'):
            config = MHSAConfig(d_model=8, heads=2, fm_h=1, fm_w=1, pos_mode=pos_mode)
            params = init_mhsa_params(config, seed=9)
            x = self.rng.standard_normal((2, 8, 1, 1))
            expected = conv2d(Tensor(x), params.wv).numpy()
            with self.subTest(pos_mode=pos_mode):
                np.testing.assert_array_equal(mhsa2d(Tensor(x), params, config).numpy(), expected)

    def test_naive_oracle(self):
        """Relative mode, two heads, against the loop oracle"""
        config = MHSAConfig(d_model=8, heads=2, fm_h=3, fm_w=3)
        params = init_mhsa_params(config, seed=10)
        result = mhsa2d(Tensor(self.x), params, config).numpy()
        np.testing.assert_allclose(result, naive_mhsa(self.x, params, config), rtol=0, atol=1e-11)

    def test_ablation_modes_oracle(self):
        """Absolute, content-free and content-only modes against the loop oracle"""
        for pos_mode, content in (('absolute', True), ('none', True), ('relative', False), ('absolute', False)):
            config = MHSAConfig(d_model=8, heads=4, fm_h=3, fm_w=3, pos_mode=pos_mode, content_logits=content)
            params = init_mhsa_params(config, seed=11)
            with self.subTest(pos_mode=pos_mode, content_logits=content):
                np.testing.assert_allclose(
                    mhsa2d(Tensor(self.x), params, config).numpy(),
                    naive_mhsa(self.x, params, config), rtol=0, atol=1e-11
                )

    def test_permutation_equivariance(self):
        """Without position encodings, permuting positions commutes with the layer"""
        config = MHSAConfig(d_model=8, heads=2, fm_h=3, fm_w=4, pos_mode='none')
        params = init_mhsa_params(config, seed=12)
        x = self.rng.standard_normal((2, 8, 3, 4))
        reference = mhsa2d(Tensor(x), params, config).numpy()
        for _ in range(10):
            permutation = self.rng.permutation(12)
            permuted = mhsa2d(Tensor(permute_positions(x, permutation)), params, config).numpy()
            np.testing.assert_allclose(permuted, permute_positions(reference, permutation), rtol=0, atol=1e-9)

    def test_zero_tables_equal_content_only(self):
        """Zero relative tables reproduce the position-free layer exactly"""
        relative = MHSAConfig(d_model=8, heads=2, fm_h=3, fm_w=3)
        none = MHSAConfig(d_model=8, heads=2, fm_h=3, fm_w=3, pos_mode='none')
        params = init_mhsa_params(relative, seed=13)
        zeroed = MHSAParams(
            wq=params.wq, wk=params.wk, wv=params.wv,
            r_h=Tensor(np.zeros((5, 4))), r_w=Tensor(np.zeros((5, 4)))
        )
        np.testing.assert_array_equal(
            mhsa2d(Tensor(self.x), zeroed, relative).numpy(),
            mhsa2d(Tensor(self.x), zeroed, none).numpy(),
        )

    def test_attention_rows_sum_to_one(self):
        """Every softmax row over the key axis sums to 1"""
        config = MHSAConfig(d_model=8, heads=2, fm_h=3, fm_w=3)
        params = init_mhsa_params(config, seed=14)
        with DifferentiableGraph() as graph:
            mhsa2d(Tensor(self.x * 50.0), params, config)
        weights = [node.output for node in graph.nodes if node.op == 'softmax_lastdim'][0]
        np.testing.assert_allclose(weights.numpy().sum(axis=-1), 1.0, rtol=0, atol=1e-9)

    def test_shape_preserved(self):
        """Output has the input shape"""
        config = MHSAConfig(d_model=8, heads=4, fm_h=2, fm_w=5)
        params = init_mhsa_params(config)
        x = Tensor(np.ones((3, 8, 2, 5)))
        self.assertEqual(mhsa2d(x, params, config).shape, (3, 8, 2, 5))

    def test_logit_allocation_scaling(self):
        """The softmax allocation grows as heads * n^2"""
        elements = []
        for height in (4, 8, 16):
            config = MHSAConfig(d_model=8, heads=2, fm_h=height, fm_w=height)
            params = init_mhsa_params(config)
            with Meter() as meter:
                mhsa2d(Tensor(np.ones((1, 8, height, height))), params, config)
            elements.append(meter.elements['softmax_lastdim'])
            self.assertEqual(elements[-1], 2 * (height * height) ** 2)
        for smaller, larger in zip(elements, elements[1:]):
            self.assertTrue(16 / 1.1 <= larger / smaller <= 16 * 1.1)

class TestNonLocal(unittest.TestCase):
    """Test the non-local layer."""
    def setUp(self):
        """Random parameters for eight channels"""
        self.rng = np.random.default_rng(5)
        self.params = init_nonlocal_params(8, seed=20)

    def test_single_position(self):
        """H=W=1 gives x + Wz phi(x)"""
        x = Tensor(self.rng.standard_normal((1, 8, 1, 1)))
        expected = add(x, conv2d(conv2d(x, self.params.phi), self.params.z)).numpy()
        np.testing.assert_array_equal(nonlocal_layer(x, self.params).numpy(), expected)

    def test_zero_output_projection(self):
        """Wz = 0 returns the input"""
        params = NonLocalParams(theta=self.params.theta, phi=self.params.phi, z=Tensor(np.zeros((8, 4, 1, 1))))
        x = self.rng.standard_normal((2, 8, 3, 2))
        np.testing.assert_array_equal(nonlocal_layer(Tensor(x), params).numpy(), x)

    def test_single_head_attention_equivalence(self):
        """Zero-padded single-head attention plus Wz and residual is the same layer"""
        for shape in ((1, 8, 2, 2), (2, 8, 3, 1)):
            x = Tensor(self.rng.standard_normal(shape))
            np.testing.assert_allclose(
                nonlocal_layer(x, self.params).numpy(), nonlocal_via_mhsa(x, self.params).numpy(),
                rtol=0, atol=1e-11
            )

    def test_value_projection_oracle(self):
        """With g, values come from the separate projection"""
        params = init_nonlocal_params(4, seed=21, value_projection=True)
        x = self.rng.standard_normal((1, 4, 2, 3))
        flat = x[0].reshape(4, 6)
        theta, phi, g, z = (getattr(params, name).numpy()[:, :, 0, 0] for name in ('theta', 'phi', 'g', 'z'))
        logits = (theta @ flat).T @ (phi @ flat)
        weights = np.exp(logits - logits.max(axis=1, keepdims=True))
        weights /= weights.sum(axis=1, keepdims=True)
        expected = flat + z @ (weights @ (g @ flat).T).T
        np.testing.assert_allclose(
            nonlocal_layer(Tensor(x), params).numpy()[0].reshape(4, 6), expected, rtol=0, atol=1e-12
        )

    def test_odd_channels(self):
        """Odd channel counts are a configuration error"""
        with self.assertRaises(ConfigurationError):
            nonlocal_layer(Tensor(np.zeros((1, 3, 2, 2))), self.params)

    def test_projection_shapes(self):
        """Every projection must fit the channel count"""
        x = Tensor(np.zeros((1, 8, 2, 2)))
        narrow = Tensor(np.zeros((2, 8, 1, 1)))
        for params in (
                NonLocalParams(theta=self.params.theta, phi=narrow, z=self.params.z),
                NonLocalParams(theta=self.params.theta, phi=self.params.phi, z=self.params.z, g=narrow),
                NonLocalParams(theta=narrow, phi=self.params.phi, z=self.params.z),
            ):
            with self.assertRaises(ShapeError):
                nonlocal_layer(x, params)

class TestGradients(unittest.TestCase):
    """Test attention gradients against finite differences."""
    def test_mhsa_modes(self):
        """Every position mode on 2x8x4x5 with four heads, five seeds"""
        for pos_mode in ('relative', 'absolute', 'none'):
            config = MHSAConfig(d_model=8, heads=4, fm_h=4, fm_w=5, pos_mode=pos_mode)
            for seed in range(5):
                params = init_mhsa_params(config, seed=seed)
                inputs = dict(params.records())
                inputs['x'] = Tensor(np.random.default_rng(seed).standard_normal((2, 8, 4, 5)))

                def forward(x, **records):
                    return mhsa2d(x, MHSAParams(**records), config)

                with self.subTest(pos_mode=pos_mode, seed=seed):
                    self.assertLess(check_function(forward, inputs, seed=seed).max_rel_error, 1e-6)

    def test_nonlocal(self):
        """Non-local layer with and without value projection, five seeds"""
        for value_projection in (False, True):
            for seed in range(5):
                params = init_nonlocal_params(8, seed=seed, value_projection=value_projection)
                inputs = dict(params.records())
                inputs['x'] = Tensor(np.random.default_rng(seed).standard_normal((2, 8, 2, 3)))

                def forward(x, **records):
                    return nonlocal_layer(x, NonLocalParams(**records))

                with self.subTest(value_projection=value_projection, seed=seed):
                    self.assertLess(check_function(forward, inputs, seed=seed).max_rel_error, 1e-6)
