"""Tensor Core Unit Tests"""
from concurrent.futures import ThreadPoolExecutor
import io
import math
import os
import struct
import tempfile
import unittest

import numpy as np

from botkit.errors import (
    DimensionError,
    ParameterError,
    SerializationError,
    ShapeError,
    UnsupportedOpError,
    UnsupportedShapeError,
)
from .autodiff import check_function, grad_check, vjp
from .codec import decode, encode, read_bundle, read_tensor, write_bundle, write_tensor
from .core import DifferentiableGraph, Meter, Tensor, operation
from .ops import (
    activation,
    add,
    avg_pool2d,
    batchnorm_affine,
    conv2d,
    gather_lastdim,
    global_avg_pool,
    matmul,
    max_pool2d,
    mul,
    reshape,
    scale,
    softmax_lastdim,
    transpose,
    weighted_sum,
)

def random_tensor(rng: np.random.Generator, *shape: int) -> Tensor:
    """Standard normal float64 tensor."""
    return Tensor(rng.standard_normal(shape))

def naive_conv2d(x: np.ndarray, w: np.ndarray, stride: int, pad: int) -> np.ndarray:
    """Six nested loops over the cross-correlation definition."""
    n, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((n, cout, ho, wo))
    for b in range(n):
        for o in range(cout):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for c in range(cin):
                        for u in range(kh):
                            for v in range(kw):
                                acc += xp[b, c, i * stride + u, j * stride + v] * w[o, c, u, v]
                    out[b, o, i, j] = acc
    return out

class TestTensor(unittest.TestCase):
    """Test tensor construction and immutability."""
    def test_data_is_read_only(self):
        """Backing arrays cannot be written"""
        tensor = Tensor([[1.0, 2.0]])
        with self.assertRaises(ValueError):
            tensor.numpy()[0, 0] = 3.0

    def test_default_dtype(self):
        """Integer input becomes float64, float32 input stays float32"""
        self.assertEqual(Tensor([1, 2]).dtype, 'float64')
        self.assertEqual(Tensor(np.zeros(2, dtype=np.float32)).dtype, 'float32')

    def test_empty_extent_rejected(self):
        """Extents below one are rejected"""
        with self.assertRaises(ShapeError):
            Tensor(np.zeros((2, 0)))

    def test_mixed_dtypes_rejected(self):
        """One op never mixes dtypes"""
        with self.assertRaises(ParameterError):
            add(Tensor([1.0], dtype='float32'), Tensor([1.0], dtype='float64'))

    def test_item(self):
        """Only one-element tensors have an item"""
        self.assertEqual(Tensor([[2.5]]).item(), 2.5)
        with self.assertRaises(ShapeError):
            Tensor([1.0, 2.0]).item()

class TestMatmul(unittest.TestCase):
    """Test matrix products."""
    def test_identity(self):
        """Identity times B is B"""
        b = np.arange(9.0).reshape(3, 3)
        np.testing.assert_array_equal(matmul(Tensor(np.eye(3)), Tensor(b)).numpy(), b)

    def test_hand_arithmetic(self):
        """[[1,2],[3,4]] x [[5],[6]]"""
        result = matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[5.0], [6.0]]))
        np.testing.assert_array_equal(result.numpy(), [[17.0], [39.0]])

    def test_loop_oracle(self):
        """Random 7x5 by 5x4 against the summation definition"""
        rng = np.random.default_rng(3)
        a = rng.standard_normal((7, 5))
        b = rng.standard_normal((5, 4))
        expected = np.zeros((7, 4))
        for i in range(7):
            for j in range(4):
                for k in range(5):
                    expected[i, j] += a[i, k] * b[k, j]
        np.testing.assert_allclose(matmul(Tensor(a), Tensor(b)).numpy(), expected, rtol=0, atol=1e-14)

    def test_dimension_error_names_shapes(self):
        """Mismatched inner dims name both shapes"""
        with self.assertRaises(DimensionError) as context:
            matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))))
        self.assertIn('(2, 3)', str(context.exception))
        self.assertIn('(4, 5)', str(context.exception))

class TestConv2d(unittest.TestCase):
    """Test convolution."""
    def test_pointwise_identity(self):
        """A 1x1 permutation-identity kernel returns the input exactly"""
        rng = np.random.default_rng(0)
        x = random_tensor(rng, 2, 4, 3, 3)
        w = Tensor(np.eye(4).reshape(4, 4, 1, 1))
        np.testing.assert_array_equal(conv2d(x, w).numpy(), x.numpy())

    def test_stem_shape(self):
        """7x7 stride 2 pad 3 on 1024x1024 gives 512x512"""
        x = Tensor(np.zeros((1, 3, 1024, 1024), dtype=np.float32))
        w = Tensor(np.zeros((64, 3, 7, 7), dtype=np.float32))
        self.assertEqual(conv2d(x, w, stride=2, pad=3).shape, (1, 64, 512, 512))

    def test_naive_oracle(self):
        """3x3 stride 1 pad 1 against the six-loop definition"""
        rng = np.random.default_rng(1)
        x = rng.standard_normal((2, 4, 5, 5))
        w = rng.standard_normal((4, 4, 3, 3))
        result = conv2d(Tensor(x), Tensor(w), stride=1, pad=1).numpy()
        np.testing.assert_allclose(result, naive_conv2d(x, w, 1, 1), rtol=0, atol=1e-13)

    def test_strided_oracle(self):
        """Strided and pointwise strided convolutions against the loops"""
        rng = np.random.default_rng(2)
        x = rng.standard_normal((1, 3, 6, 6))
        for kernel, pad in ((3, 1), (1, 0)):
            w = rng.standard_normal((2, 3, kernel, kernel))
            result = conv2d(Tensor(x), Tensor(w), stride=2, pad=pad).numpy()
            np.testing.assert_allclose(result, naive_conv2d(x, w, 2, pad), rtol=0, atol=1e-13)

    def test_negative_extent(self):
        """A kernel larger than the padded input is a shape error"""
        with self.assertRaises(ShapeError):
            conv2d(Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros((1, 1, 5, 5))))

    def test_channel_mismatch(self):
        """Input channels must match the kernel"""
        with self.assertRaises(DimensionError):
            conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 1, 1))))

class TestPooling(unittest.TestCase):
    """Test average, max and global pooling."""
    def test_avg_constant(self):
        """A constant stays constant at half resolution"""
        result = avg_pool2d(Tensor(np.full((1, 2, 4, 6), 3.5))).numpy()
        self.assertEqual(result.shape, (1, 2, 2, 3))
        np.testing.assert_array_equal(result, 3.5)

    def test_avg_single_window(self):
        """[[1,2],[3,4]] averages to 2.5"""
        result = avg_pool2d(Tensor([[[[1.0, 2.0], [3.0, 4.0]]]]))
        self.assertEqual(result.numpy()[0, 0, 0, 0], 2.5)

    def test_avg_preserves_mean(self):
        """Global spatial mean is unchanged by exact tiling"""
        x = np.random.default_rng(4).standard_normal((1, 3, 8, 8))
        result = avg_pool2d(Tensor(x)).numpy()
        np.testing.assert_allclose(result.mean(axis=(2, 3)), x.mean(axis=(2, 3)), rtol=0, atol=1e-12)

    def test_avg_odd_rejected(self):
        """Odd extents are refused rather than padded"""
        with self.assertRaises(UnsupportedShapeError):
            avg_pool2d(Tensor(np.zeros((1, 1, 5, 4))))

    def test_max_ramp(self):
        """Monotone ramp [1..5] gives window maxima [2,4,5]"""
        result = max_pool2d(Tensor([[[[1.0, 2.0, 3.0, 4.0, 5.0]]]]))
        np.testing.assert_array_equal(result.numpy().reshape(-1), [2.0, 4.0, 5.0])

    def test_max_constant(self):
        """A constant stays constant"""
        result = max_pool2d(Tensor(np.full((1, 2, 6, 6), -1.25))).numpy()
        self.assertEqual(result.shape, (1, 2, 3, 3))
        np.testing.assert_array_equal(result, -1.25)

    def test_stem_chain(self):
        """Stem conv then max pool on 1024x1024 reaches 256x256"""
        x = Tensor(np.zeros((1, 3, 1024, 1024), dtype=np.float32))
        w = Tensor(np.zeros((2, 3, 7, 7), dtype=np.float32))
        self.assertEqual(max_pool2d(conv2d(x, w, stride=2, pad=3)).shape, (1, 2, 256, 256))

    def test_global_constant(self):
        """Global pooling of a constant is the constant"""
        np.testing.assert_array_equal(global_avg_pool(Tensor(np.full((2, 3, 4, 4), 7.0))).numpy(), 7.0)

    def test_global_hand(self):
        """[[1,3],[5,7]] pools to 4"""
        self.assertEqual(global_avg_pool(Tensor([[[[1.0, 3.0], [5.0, 7.0]]]])).numpy()[0, 0], 4.0)

    def test_global_oracle(self):
        """Global pooling against a loop"""
        x = np.random.default_rng(5).standard_normal((2, 3, 4, 5))
        expected = np.zeros((2, 3))
        for b in range(2):
            for c in range(3):
                expected[b, c] = sum(x[b, c, i, j] for i in range(4) for j in range(5)) / 20.0
        np.testing.assert_allclose(global_avg_pool(Tensor(x)).numpy(), expected, rtol=0, atol=1e-13)

class TestBatchnorm(unittest.TestCase):
    """Test inference batch normalization."""
    def test_identity(self):
        """Identity parameters return the input exactly"""
        x = np.random.default_rng(6).standard_normal((2, 3, 2, 2))
        ones, zeros = Tensor(np.ones(3)), Tensor(np.zeros(3))
        result = batchnorm_affine(Tensor(x), ones, zeros, zeros, ones, eps=0.0)
        np.testing.assert_array_equal(result.numpy(), x)

    def test_hand_arithmetic(self):
        """gamma=2, beta=1 maps 3 to 7"""
        result = batchnorm_affine(
            Tensor([[[[3.0]]]]), Tensor([2.0]), Tensor([1.0]), Tensor([0.0]), Tensor([1.0]), eps=0.0
        )
        self.assertEqual(result.numpy()[0, 0, 0, 0], 7.0)

    def test_oracle(self):
        """Random parameters against a scalar loop"""
        rng = np.random.default_rng(7)
        x = rng.standard_normal((2, 3, 2, 2))
        gamma, beta, mean = rng.standard_normal(3), rng.standard_normal(3), rng.standard_normal(3)
        var = rng.uniform(0.5, 1.5, 3)
        result = batchnorm_affine(
            Tensor(x), Tensor(gamma), Tensor(beta), Tensor(mean), Tensor(var), eps=1e-5
        ).numpy()
        for index in np.ndindex(*x.shape):
            c = index[1]
            expected = (x[index] - mean[c]) / math.sqrt(var[c] + 1e-5) * gamma[c] + beta[c]
            self.assertAlmostEqual(result[index], expected, delta=1e-14)

    def test_zero_variance_without_eps(self):
        """A zero variance needs a positive eps"""
        x, ones, zeros = Tensor(np.ones((1, 2, 1, 1))), Tensor(np.ones(2)), Tensor(np.zeros(2))
        with self.assertRaises(ParameterError):
            batchnorm_affine(x, ones, zeros, zeros, Tensor([1.0, 0.0]), eps=0.0)
        result = batchnorm_affine(x, ones, zeros, zeros, zeros, eps=0.25)
        np.testing.assert_array_equal(result.numpy(), np.full((1, 2, 1, 1), 2.0))

    def test_length_mismatch(self):
        """Per-channel vectors must have C entries"""
        with self.assertRaises(ParameterError):
            batchnorm_affine(
                Tensor(np.zeros((1, 3, 1, 1))), Tensor(np.ones(2)), Tensor(np.zeros(3)),
                Tensor(np.zeros(3)), Tensor(np.ones(3))
            )

class TestSoftmaxActivation(unittest.TestCase):
    """Test softmax and elementwise activations."""
    def test_uniform_row(self):
        """A uniform row gives 1/k everywhere"""
        np.testing.assert_allclose(softmax_lastdim(Tensor(np.full((1, 5), 2.0))).numpy(), 0.2)

    def test_hand_arithmetic(self):
        """[0, ln 3] gives [0.25, 0.75]"""
        result = softmax_lastdim(Tensor([[0.0, math.log(3.0)]])).numpy()
        np.testing.assert_allclose(result, [[0.25, 0.75]], rtol=0, atol=1e-15)

    def test_shift_invariance(self):
        """softmax(x + c) == softmax(x)"""
        x = np.random.default_rng(8).standard_normal((4, 6))
        np.testing.assert_allclose(
            softmax_lastdim(Tensor(x + 11.5)).numpy(), softmax_lastdim(Tensor(x)).numpy(),
            rtol=0, atol=1e-12
        )

    def test_rows_sum_to_one(self):
        """Large magnitudes still normalize in both dtypes"""
        x = np.random.default_rng(9).uniform(-1e3, 1e3, (16, 9))
        np.testing.assert_allclose(softmax_lastdim(Tensor(x)).numpy().sum(axis=-1), 1.0, atol=1e-9)
        rows32 = softmax_lastdim(Tensor(x, dtype='float32')).numpy().sum(axis=-1)
        np.testing.assert_allclose(rows32, 1.0, atol=1e-5)

    def test_nan_propagates(self):
        """NaN inputs are not hidden"""
        self.assertTrue(np.isnan(softmax_lastdim(Tensor([[0.0, float('nan')]])).numpy()).all())

    def test_relu(self):
        """relu(-2)=0, relu(3)=3"""
        np.testing.assert_array_equal(activation(Tensor([-2.0, 3.0]), 'relu').numpy(), [0.0, 3.0])

    def test_silu(self):
        """silu(0)=0 and silu(1)=1/(1+e^-1)"""
        result = activation(Tensor([0.0, 1.0]), 'silu').numpy()
        self.assertEqual(result[0], 0.0)
        self.assertAlmostEqual(result[1], 1.0 / (1.0 + math.exp(-1.0)), delta=1e-15)

class TestDifferentiation(unittest.TestCase):
    """Test vector-Jacobian products and gradient checks."""
    def test_matmul_adjoint(self):
        """dA = g x^T and dx = A^T g"""
        rng = np.random.default_rng(10)
        a, x, g = random_tensor(rng, 3, 4), random_tensor(rng, 4, 2), random_tensor(rng, 3, 2)
        with DifferentiableGraph() as graph:
            y = matmul(a, x)
        grads = vjp(graph, g)
        np.testing.assert_allclose(grads[a].numpy(), g.numpy() @ x.numpy().T, atol=1e-14)
        np.testing.assert_allclose(grads[x].numpy(), a.numpy().T @ g.numpy(), atol=1e-14)
        self.assertIs(graph.output, y)

    def test_softmax_symmetry(self):
        """Uniform input with cotangent e1 gives (1/k)(e1 - 1/k)"""
        k = 4
        x = Tensor(np.zeros(k))
        with DifferentiableGraph() as graph:
            softmax_lastdim(x)
        cotangent = np.zeros(k)
        cotangent[0] = 1.0
        grads = vjp(graph, Tensor(cotangent))
        np.testing.assert_allclose(grads[x].numpy(), (cotangent - 1.0 / k) / k, atol=1e-15)

    def test_quadratic(self):
        """sum(x^2) at [1,2] has gradient [2,4]"""
        x = Tensor([1.0, 2.0])
        with DifferentiableGraph() as graph:
            weighted_sum(mul(x, x))
        np.testing.assert_allclose(vjp(graph, Tensor(1.0))[x].numpy(), [2.0, 4.0])
        self.assertLess(grad_check(graph, {'x': x}).max_rel_error, 1e-10)

    def test_conv2d_check(self):
        """3x3 convolution on 1x2x4x4 matches finite differences"""
        rng = np.random.default_rng(11)
        result = check_function(
            lambda x, w: conv2d(x, w, stride=1, pad=1),
            {'x': random_tensor(rng, 1, 2, 4, 4), 'w': random_tensor(rng, 3, 2, 3, 3)},
        )
        self.assertLess(result.max_rel_error, 1e-6)

    def test_every_op(self):
        """Every registered op passes over five seeds"""
        cases = {
            'matmul': (lambda a, b: matmul(a, b), {'a': (2, 3, 4), 'b': (4, 2)}),
            'conv2d_strided': (lambda x, w: conv2d(x, w, stride=2, pad=1), {'x': (1, 2, 5, 5), 'w': (2, 2, 3, 3)}),
            'conv2d_pointwise': (lambda x, w: conv2d(x, w, stride=2), {'x': (2, 3, 4, 4), 'w': (2, 3, 1, 1)}),
            'avg_pool2d': (avg_pool2d, {'x': (1, 2, 4, 6)}),
            'max_pool2d': (max_pool2d, {'x': (1, 2, 5, 6)}),
            'global_avg_pool': (global_avg_pool, {'x': (2, 3, 3, 2)}),
            'softmax_lastdim': (softmax_lastdim, {'x': (3, 5)}),
            'relu': (lambda x: activation(x, 'relu'), {'x': (4, 5)}),
            'silu': (lambda x: activation(x, 'silu'), {'x': (4, 5)}),
            'sigmoid': (lambda x: activation(x, 'sigmoid'), {'x': (4, 5)}),
            'add': (add, {'a': (2, 3, 4), 'b': (3, 1)}),
            'mul': (mul, {'a': (2, 3), 'b': (1, 3)}),
            'scale': (lambda x: scale(x, -1.5), {'x': (3, 2)}),
            'reshape': (lambda x: reshape(x, (3, 4)), {'x': (2, 6)}),
            'transpose': (lambda x: transpose(x, (2, 0, 1)), {'x': (2, 3, 4)}),
            'gather_lastdim': (
                lambda x: gather_lastdim(x, np.array([[0, 2], [1, 1], [3, 0]])), {'x': (2, 3, 4)}
            ),
        }
        for seed in range(5):
            rng = np.random.default_rng(100 + seed)
            for name, (forward, shapes) in cases.items():
                inputs = {key: random_tensor(rng, *shape) for key, shape in shapes.items()}
                with self.subTest(op=name, seed=seed):
                    self.assertLess(check_function(forward, inputs, seed=seed).max_rel_error, 1e-6)

    def test_batchnorm_check(self):
        """Batch normalization gradients for input, affine and statistics"""
        for seed in range(5):
            rng = np.random.default_rng(200 + seed)
            inputs = {
                'x': random_tensor(rng, 2, 3, 2, 2),
                'gamma': random_tensor(rng, 3),
                'beta': random_tensor(rng, 3),
                'mean': random_tensor(rng, 3),
                'var': Tensor(rng.uniform(0.5, 1.5, 3)),
            }
            result = check_function(lambda **kw: batchnorm_affine(eps=1e-3, **kw), inputs, seed=seed)
            self.assertLess(result.max_rel_error, 1e-6)

    def test_unsupported_op(self):
        """An op without a VJP rule cannot be differentiated"""
        @operation('test_identity_without_vjp')
        def _identity(x):
            return x.copy()

        x = Tensor([1.0])
        with DifferentiableGraph() as graph:
            _identity(x)
        with self.assertRaises(UnsupportedOpError):
            vjp(graph, Tensor([1.0]))

    def test_replay_is_bit_identical(self):
        """Replaying the recorded forward reproduces the output"""
        rng = np.random.default_rng(12)
        x, w = random_tensor(rng, 1, 2, 4, 4), random_tensor(rng, 2, 2, 3, 3)
        with DifferentiableGraph() as graph:
            y = softmax_lastdim(conv2d(x, w, pad=1))
        np.testing.assert_array_equal(graph.replay().numpy(), y.numpy())

class TestDeterminism(unittest.TestCase):
    """Test that threads do not change results."""
    def test_threads_bit_identical(self):
        """The same forward on four threads matches the single-threaded run"""
        rng = np.random.default_rng(13)
        x, w = random_tensor(rng, 1, 8, 8, 8), random_tensor(rng, 8, 8, 3, 3)

        def forward(_):
            return softmax_lastdim(activation(conv2d(x, w, pad=1), 'silu')).numpy()

        reference = forward(0)
        with ThreadPoolExecutor(max_workers=4) as pool:
            for result in pool.map(forward, range(8)):
                np.testing.assert_array_equal(result, reference)

class TestMeter(unittest.TestCase):
    """Test multiply-add and allocation metering."""
    def test_conv_and_matmul_madds(self):
        """Counts follow Cout*Cin*k*k*Ho*Wo and m*k*n"""
        with Meter() as meter:
            conv2d(Tensor(np.zeros((1, 3, 8, 8))), Tensor(np.zeros((4, 3, 3, 3))), stride=2, pad=1)
            matmul(Tensor(np.zeros((2, 5, 6))), Tensor(np.zeros((6, 7))))
            softmax_lastdim(Tensor(np.zeros((3, 3))))
        self.assertEqual(meter.madds['conv2d'], 4 * 3 * 9 * 4 * 4)
        self.assertEqual(meter.madds['matmul'], 2 * 5 * 6 * 7)
        self.assertEqual(meter.madds['softmax_lastdim'], 0)
        self.assertEqual(meter.elements['softmax_lastdim'], 9)

class TestCodec(unittest.TestCase):
    """Test the BOTK format."""
    def test_round_trip_bit_exact(self):
        """Both dtypes round-trip exactly through a file"""
        rng = np.random.default_rng(14)
        for dtype in ('float32', 'float64'):
            tensor = Tensor(rng.standard_normal((2, 3, 4)), dtype=dtype)
            with tempfile.TemporaryDirectory() as directory:
                path = os.path.join(directory, 'x.botk')
                write_tensor(path, tensor)
                restored = read_tensor(path)
            self.assertEqual(restored.dtype, dtype)
            self.assertEqual(restored.numpy().tobytes(), tensor.numpy().tobytes())

    def test_header_layout(self):
        """Magic, version, dtype code, rank and extents lead the record"""
        blob = encode(Tensor(np.zeros((2, 3), dtype=np.float32)))
        self.assertEqual(blob[:4], b'BOTK')
        self.assertEqual(tuple(blob[4:7]), (1, 1, 2))
        self.assertEqual(int.from_bytes(blob[7:15], 'little'), 2)
        self.assertEqual(len(blob), 7 + 16 + 6 * 4)

    def test_bad_magic(self):
        """Foreign bytes are rejected"""
        with self.assertRaises(SerializationError):
            decode(b'NOPE' + bytes(16))

    def test_truncated_payload(self):
        """Missing values are rejected"""
        blob = encode(Tensor(np.ones(4)))
        with self.assertRaises(SerializationError):
            decode(blob[:-3])

    def test_oversized_extents(self):
        """Extents whose product overflows 64 bits are rejected"""
        blob = b'BOTK' + struct.pack('<BBB', 1, 2, 2) + struct.pack('<2Q', 2 ** 40, 2 ** 40) + bytes(16)
        with self.assertRaises(SerializationError):
            decode(blob)
        blob = b'BOTK' + struct.pack('<BBB', 1, 2, 2) + struct.pack('<2Q', 2 ** 63, 2) + bytes(16)
        with self.assertRaises(SerializationError):
            decode(blob)

    def test_missing_file(self):
        """An unreadable path is a serialization error"""
        with tempfile.TemporaryDirectory() as directory:
            with self.assertRaises(SerializationError) as context:
                read_tensor(os.path.join(directory, 'missing.botk'))
        self.assertIn('missing.botk', str(context.exception))

    def test_bundle(self):
        """Named records survive a bundle"""
        tensors = {'wq': Tensor(np.eye(2)), 'r_h': Tensor(np.ones((3, 2)), dtype='float32')}
        buffer = io.BytesIO()
        write_bundle(buffer, tensors)
        buffer.seek(0)
        restored = read_bundle(buffer)
        self.assertEqual(sorted(restored), ['r_h', 'wq'])
        np.testing.assert_array_equal(restored['wq'].numpy(), np.eye(2))
