import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rtfsnet import tensor as tn
from rtfsnet.errors import NumericalError, ShapeError

finite = st.floats(-100, 100, allow_nan=False, width=32)


class TestConv2d:
    def test_scalar_kernel_scales(self):
        x = np.array([[[1.5]]], dtype=np.float32)
        w = np.array([[[[2.0]]]], dtype=np.float32)
        assert tn.conv2d(x, w)[0, 0, 0] == pytest.approx(3.0)

    def test_strided_depthwise_overlap_counts(self):
        # each stride-2 window of the padded 6x6 grid covers exactly 3x3 real cells
        x = np.ones((1, 4, 4), dtype=np.float32)
        w = np.ones((1, 1, 4, 4), dtype=np.float32)
        out = tn.conv2d(x, w, stride=2, padding=1, groups=1)
        np.testing.assert_array_equal(out[0], [[9, 9], [9, 9]])

    def test_strided_window_sums_by_position(self):
        x = np.arange(16, dtype=np.float64).reshape(1, 4, 4)
        w = np.ones((1, 1, 4, 4))
        out = tn.conv2d(x, w, stride=2, padding=1)
        ref = [[x[0, 0:3, 0:3].sum(), x[0, 0:3, 1:4].sum()],
               [x[0, 1:4, 0:3].sum(), x[0, 1:4, 1:4].sum()]]
        np.testing.assert_allclose(out[0], ref)

    def test_centered_identity_kernel(self, rng):
        x = rng.standard_normal((3, 5, 6)).astype(np.float32)
        w = np.zeros((3, 3, 3, 3), dtype=np.float32)
        for c in range(3):
            w[c, c, 1, 1] = 1.0
        np.testing.assert_array_equal(tn.conv2d(x, w, padding=1), x)

    def test_depthwise_identity(self, rng):
        x = rng.standard_normal((5, 4, 3)).astype(np.float32)
        w = np.ones((5, 1, 1, 1), dtype=np.float32)
        np.testing.assert_array_equal(tn.conv2d(x, w, groups=5), x)

    def test_output_shape_formula(self, rng):
        x = rng.standard_normal((2, 251, 129)).astype(np.float32)
        w = rng.standard_normal((2, 1, 4, 4)).astype(np.float32)
        assert tn.conv2d(x, w, stride=2, padding=1, groups=2).shape == (2, 125, 64)

    def test_matches_direct_sum(self, rng):
        x = rng.standard_normal((4, 5, 6))
        w = rng.standard_normal((6, 2, 3, 2))
        b = rng.standard_normal(6)
        out = tn.conv2d(x, w, b, stride=(2, 1), padding=((1, 0), (0, 1)), groups=2)
        xp = np.pad(x, ((0, 0), (1, 0), (0, 1)))
        ref = np.zeros_like(out)
        for o in range(6):
            g = o // 3
            for i in range(out.shape[1]):
                for j in range(out.shape[2]):
                    patch = xp[2 * g:2 * g + 2, 2 * i:2 * i + 3, j:j + 2]
                    ref[o, i, j] = np.sum(patch * w[o]) + b[o]
        np.testing.assert_allclose(out, ref, atol=1e-12)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            tn.conv2d(np.zeros((3, 4, 4)), np.zeros((2, 2, 1, 1)))

    def test_zero_size_output(self):
        with pytest.raises(ShapeError):
            tn.conv2d(np.zeros((1, 2, 2)), np.zeros((1, 1, 3, 3)))

    def test_nan_is_surfaced(self):
        x = np.full((1, 2, 2), np.nan, dtype=np.float32)
        with pytest.raises(NumericalError):
            tn.conv2d(x, np.ones((1, 1, 1, 1), dtype=np.float32))


class TestConvTranspose:
    def test_shape_inverts_conv(self):
        x = np.zeros((3, 7, 9))
        w = np.zeros((3, 2, 3, 3))
        assert tn.conv_transpose2d(x, w, stride=2, padding=1).shape == (2, 13, 17)

    def test_is_adjoint_of_conv(self, rng):
        # sizes chosen so the transposed conv lands back on the input grid exactly
        x = rng.standard_normal((4, 5, 6))
        w = rng.standard_normal((3, 4, 3, 2))
        y = rng.standard_normal(tn.conv2d(x, w, stride=2, padding=1).shape)
        lhs = np.sum(tn.conv2d(x, w, stride=2, padding=1) * y)
        # conv weight (C_out, C_in, ...) is the transposed conv's (C_in', C_out', ...)
        back = tn.conv_transpose2d(y, w, stride=2, padding=1)
        assert back.shape == x.shape
        rhs = np.sum(x * back)
        assert lhs == pytest.approx(rhs, rel=1e-10)


class TestConv1d:
    def test_depthwise_identity(self, rng):
        x = rng.standard_normal((3, 8)).astype(np.float32)
        np.testing.assert_array_equal(tn.conv1d(x, np.ones((3, 1, 1), np.float32), groups=3), x)

    def test_group_wiring(self):
        w = np.ones((2, 2, 1), dtype=np.float32)
        for i in range(4):
            x = np.zeros((4, 1), dtype=np.float32)
            x[i] = 1.0
            out = tn.conv1d(x, w, groups=2)
            expected = np.zeros((2, 1))
            expected[i // 2] = 1.0
            np.testing.assert_array_equal(out, expected)

    def test_bias_only(self):
        out = tn.conv1d(np.ones((2, 5), np.float32), np.zeros((3, 2, 1), np.float32),
                        np.array([1.0, -2.0, 0.5], np.float32))
        np.testing.assert_array_equal(out, np.repeat([[1.0], [-2.0], [0.5]], 5, axis=1))


class TestNorms:
    def test_gln_constant_input_is_zero(self):
        x = np.full((3, 4, 5), 7.0, dtype=np.float32)
        np.testing.assert_array_equal(tn.global_layer_norm(x, np.ones(3), np.zeros(3)), 0.0)

    def test_gln_two_elements(self):
        y = tn.global_layer_norm(np.array([[0.0, 2.0]]), np.ones(1), np.zeros(1), eps=1e-12)
        np.testing.assert_allclose(y, [[-1.0, 1.0]], atol=1e-9)

    @given(arrays(np.float32, (3, 4, 5), elements=finite))
    @settings(max_examples=50, deadline=None)
    def test_gln_statistics(self, x):
        if np.ptp(x) < 1e-2:
            return
        y = tn.global_layer_norm(x, np.ones(3), np.zeros(3))
        var = float(x.astype(np.float64).var())
        assert abs(float(y.mean())) < 1e-5
        assert float(y.var()) == pytest.approx(var / (var + tn.EPS), abs=1e-4)

    def test_channel_ln_single_channel_gives_shift(self):
        y = tn.channel_layer_norm(np.random.default_rng(0).standard_normal((1, 3, 4)),
                                  np.array([2.0]), np.array([0.3]))
        np.testing.assert_allclose(y, 0.3)

    def test_channel_ln_column(self):
        x = np.array([3.0, 5.0]).reshape(2, 1, 1)
        y = tn.channel_layer_norm(x, np.ones(2), np.zeros(2), eps=1e-12)
        np.testing.assert_allclose(y.ravel(), [-1.0, 1.0], atol=1e-9)

    def test_channel_ln_shift_invariance(self, rng):
        x = rng.standard_normal((4, 3, 5))
        shifted = x.copy()
        shifted[:, 1, 2] += 9.0
        y0 = tn.channel_layer_norm(x, np.ones(4), np.zeros(4))
        y1 = tn.channel_layer_norm(shifted, np.ones(4), np.zeros(4))
        np.testing.assert_allclose(y0, y1, atol=1e-9)

    def test_frame_ln_normalizes_each_frame(self, rng):
        x = rng.standard_normal((4, 6, 5))
        y = tn.frame_layer_norm(x, np.ones((4, 5)), np.zeros((4, 5)))
        np.testing.assert_allclose(y.mean(axis=(0, 2)), 0.0, atol=1e-12)

    def test_batch_norm_is_affine(self, rng):
        x = rng.standard_normal((3, 7))
        args = (rng.random(3) + 0.5, rng.standard_normal(3), rng.standard_normal(3), rng.random(3) + 0.1)
        f = lambda z: tn.batch_norm(z, *args)  # noqa: E731
        np.testing.assert_allclose(f(2.0 * x) - f(np.zeros_like(x)),
                                   2.0 * (f(x) - f(np.zeros_like(x))), atol=1e-12)

    def test_gamma_length_checked(self):
        with pytest.raises(ShapeError):
            tn.global_layer_norm(np.zeros((3, 2)), np.ones(2), np.zeros(2))


class TestResampling:
    def test_interp_up_by_two(self):
        np.testing.assert_array_equal(tn.nearest_indices(2, 4), [0, 0, 1, 1])

    def test_interp_three_to_five(self):
        np.testing.assert_array_equal(tn.nearest_indices(3, 5), [0, 0, 1, 1, 2])

    def test_interp_identity(self, rng):
        x = rng.standard_normal((2, 6))
        np.testing.assert_array_equal(tn.interp_nearest(x, 6), x)

    def test_interp_2d_per_axis(self):
        x = np.arange(6.0).reshape(1, 2, 3)
        y = tn.interp_nearest(x, (4, 5))
        np.testing.assert_array_equal(y[0], x[0][np.ix_([0, 0, 1, 1], [0, 0, 1, 1, 2])])

    def test_interp_zero_target(self):
        with pytest.raises(ShapeError):
            tn.interp_nearest(np.zeros((1, 3)), 0)

    def test_pool_even(self):
        np.testing.assert_allclose(tn.adaptive_avg_pool(np.array([[1.0, 2, 3, 4]]), 2), [[1.5, 3.5]])

    def test_pool_overlapping_bins(self):
        x = np.array([[1.0, 2, 4, 8, 16]])
        np.testing.assert_allclose(tn.adaptive_avg_pool(x, 2), [[7 / 3, 28 / 3]])

    def test_pool_identity(self, rng):
        x = rng.standard_normal((2, 3, 4))
        np.testing.assert_array_equal(tn.adaptive_avg_pool(x, (3, 4)), x)


class TestUnfold:
    def test_kernel_one_identity(self, rng):
        x = rng.standard_normal((2, 3, 5))
        np.testing.assert_array_equal(tn.unfold_freq(x, 1, 1), x)

    def test_windows_stride_one(self):
        x = np.arange(4.0).reshape(1, 1, 4)
        u = tn.unfold_freq(x, 2, 1)
        assert u.shape == (2, 1, 3)
        np.testing.assert_array_equal(u[:, 0, :].T, [[0, 1], [1, 2], [2, 3]])

    def test_padded_last_window(self):
        x = np.arange(1.0, 6.0).reshape(1, 1, 5)
        assert tn.unfold_pad(5, 2, 2) == 1
        u = tn.unfold_freq(x, 2, 2)
        np.testing.assert_array_equal(u[:, 0, :].T, [[1, 2], [3, 4], [5, 0]])

    def test_channel_layout(self, rng):
        x = rng.standard_normal((3, 2, 10))
        u = tn.unfold_freq(x, 4, 1)
        for c in range(3):
            for j in range(4):
                np.testing.assert_array_equal(u[c * 4 + j], x[c, :, j:j + 7])

    def test_kernel_too_long(self):
        with pytest.raises(ShapeError):
            tn.unfold_freq(np.zeros((1, 2, 5)), 8, 1)

    def test_overlap_add_reconstructs_interior(self):
        k = 8
        x = np.full((1, 2, 20), 3.0)
        u = tn.unfold_freq(x, k, 1)
        w = np.zeros((k, 1, 1, k))  # put tap j of every window back at offset j, averaged
        for j in range(k):
            w[j, 0, 0, j] = 1.0 / k
        y = tn.conv_transpose2d(u, w)
        np.testing.assert_allclose(y[0, :, k - 1:20 - k + 1], 3.0, atol=1e-12)


class TestActivations:
    def test_softmax_constant(self):
        np.testing.assert_allclose(tn.softmax(np.full(5, 3.3)), 0.2)

    def test_softmax_closed_form(self):
        np.testing.assert_allclose(tn.softmax(np.array([0.0, np.log(3.0)])), [0.25, 0.75])

    @given(arrays(np.float64, (4, 6), elements=st.floats(-50, 50)), st.floats(-20, 20))
    @settings(max_examples=50, deadline=None)
    def test_softmax_sums_and_shift(self, x, c):
        y = tn.softmax(x, axis=1)
        np.testing.assert_allclose(y.sum(axis=1), 1.0, atol=1e-6)
        np.testing.assert_allclose(tn.softmax(x + c, axis=1), y, atol=1e-9)

    def test_prelu_negative(self):
        assert tn.prelu(np.array([-1.0]), 0.25)[0] == pytest.approx(-0.25)

    def test_prelu_per_channel(self):
        x = -np.ones((2, 3))
        np.testing.assert_allclose(tn.prelu(x, np.array([0.1, 0.5])), [[-0.1] * 3, [-0.5] * 3])

    def test_relu_and_sigmoid(self):
        np.testing.assert_array_equal(tn.relu(np.array([-1.0, 0.0, 2.0])), [0, 0, 2])
        assert tn.sigmoid(np.array([0.0]))[0] == 0.5


class TestDual:
    def test_product_rule(self):
        x = tn.Dual(np.array(3.0), np.array(1.0))
        y = x * x
        assert float(y.tangent) == 6.0

    def test_ndarray_on_the_left_defers(self):
        x = tn.Dual(np.ones(3), np.ones(3))
        y = np.array([1.0, 2.0, 3.0]) * x
        assert isinstance(y, tn.Dual)
        np.testing.assert_array_equal(y.tangent, [1, 2, 3])

    def test_conv_drops_bias_in_tangent(self, rng):
        x = tn.Dual(rng.standard_normal((2, 3, 3)), rng.standard_normal((2, 3, 3)))
        w = rng.standard_normal((1, 2, 1, 1))
        out = tn.conv2d(x, w, np.array([5.0]))
        np.testing.assert_allclose(out.tangent, tn.conv2d(x.tangent, w))

    def test_kink_watch_reports_margin(self):
        x = tn.Dual(np.array([0.5, -2.0]), np.array([1.0, 1.0]))
        with tn.watch_kinks() as log:
            tn.relu(x)
        assert log == [0.5]

    def test_determinism(self, rng):
        x = rng.standard_normal((8, 40, 33)).astype(np.float32)
        w = rng.standard_normal((8, 8, 3, 3)).astype(np.float32)
        np.testing.assert_array_equal(tn.conv2d(x, w, padding=1), tn.conv2d(x, w, padding=1))
