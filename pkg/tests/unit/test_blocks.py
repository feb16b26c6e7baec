"""Unit tests for the SWFormer block and its branches."""

import numpy as np
import pytest

from swformer.config.yaml_config import BranchToggles, ModelConfig
from swformer.errors import DimensionError
from swformer.model.blocks import (
    MSFN,
    ChannelAttention,
    FourierBranch,
    SpatialBranch,
    SWFMixer,
    SWFormerBlock,
    WaveletBranch,
    branch_units,
)
from swformer.tensor import ops
from swformer.tensor.core import ComplexTensor, Tensor, no_grad
from swformer.tensor.gradcheck import grad_check
from swformer.tensor.module import Parameter
from swformer.transforms.fourier import fft2, ifft2_parts
from swformer.transforms.wavelet import SubBands, dwt2, idwt2


@pytest.fixture
def block_rng():
    return np.random.default_rng(5)


def _zero_biases(module):
    for name, param in module.named_parameters():
        if name.endswith("bias"):
            param.data[...] = 0.0


class TestSpatialBranch:
    """Test depthwise conv + GELU."""

    def test_zero_input(self, block_rng, float64):
        """Test zero input with zero bias gives zero."""
        branch = SpatialBranch(4, block_rng)
        _zero_biases(branch)
        assert not np.any(branch(Tensor(np.zeros((1, 4, 5, 5)))).data)

    def test_identity_kernel(self, block_rng, rng, float64):
        """Test an identity kernel reduces the branch to GELU."""
        branch = SpatialBranch(4, block_rng)
        branch.dw.set_identity_()
        x = Tensor(rng.standard_normal((2, 4, 5, 6)))
        np.testing.assert_allclose(branch(x).data, ops.gelu(x).data, atol=1e-12)

    def test_composition_oracle(self, block_rng, rng, float64):
        """Test against conv then gelu."""
        branch = SpatialBranch(4, block_rng)
        x = Tensor(rng.standard_normal((1, 4, 6, 6)))
        expected = ops.gelu(ops.conv2d(x, branch.dw.weight, branch.dw.bias, padding=1, groups=4))
        np.testing.assert_allclose(branch(x).data, expected.data, atol=1e-6)


class TestWaveletBranch:
    """Test analysis, depthwise conv, GELU and synthesis."""

    @pytest.mark.parametrize("size", [(8, 8), (7, 9)])
    def test_linear_identity(self, block_rng, rng, float64, size):
        """Test identity kernel with GELU off reproduces the input at Haar init."""
        branch = WaveletBranch(3, block_rng)
        branch.dw.set_identity_()
        branch.activate = False
        x = Tensor(rng.standard_normal((1, 3) + size))
        np.testing.assert_allclose(branch(x).data, x.data, atol=1e-5)

    def test_zero_input(self, block_rng, float64):
        """Test zero input with zero bias gives zero."""
        branch = WaveletBranch(3, block_rng)
        _zero_biases(branch)
        assert not np.any(branch(Tensor(np.zeros((1, 3, 6, 6)))).data)

    def test_composition_oracle(self, block_rng, rng, float64):
        """Test against dwt2, depthwise conv, gelu, idwt2 done step by step."""
        branch = WaveletBranch(2, block_rng)
        x = Tensor(rng.standard_normal((1, 2, 8, 6)))
        bands = dwt2(x, branch.bank).concat()
        z = ops.gelu(ops.conv2d(bands, branch.dw.weight, branch.dw.bias, padding=1, groups=8))
        expected = idwt2(SubBands.from_concat(z), branch.bank)
        np.testing.assert_allclose(branch(x).data, expected.data, atol=1e-6)

    def test_filters_receive_gradients(self, block_rng, rng, float64):
        """Test the learnable bank is trained through the branch."""
        branch = WaveletBranch(2, block_rng)
        x = Tensor(rng.standard_normal((1, 2, 4, 4)))
        ops.reduce_sum(ops.mul(branch(x), branch(x))).backward()
        assert branch.bank.analysis("LH").grad is not None
        assert branch.bank.synthesis("HH").grad is not None


class TestFourierBranch:
    """Test the frequency-domain gating branch."""

    def test_gate_open_identity(self, block_rng, rng, float64):
        """Test a saturated gate and identity feature path leave only the two point-wise convs."""
        branch = FourierBranch(4, block_rng).eval()
        branch.activate = False
        branch.bn_fd.eps = 0.0
        branch.pw_fd.set_identity_()
        branch.pw_ga.zero_()
        branch.pw_ga.bias.data[...] = 60.0

        x = Tensor(rng.standard_normal((1, 4, 6, 6)))
        pre = branch.pre(x)
        first = ops.slice_axis(pre, 0, 2)
        expected = branch.reduce(ops.concat([first, Tensor(np.zeros(first.shape))], axis=1))
        np.testing.assert_allclose(branch(x).data, expected.data, atol=1e-4)

    def test_zero_input(self, block_rng, float64):
        """Test zero input with zero biases gives zero."""
        branch = FourierBranch(4, block_rng)
        _zero_biases(branch)
        assert np.max(np.abs(branch(Tensor(np.zeros((2, 4, 4, 4)))).data)) < 1e-12

    def test_composition_oracle(self, block_rng, rng, float64):
        """Test against the seven stages spelled out."""
        branch = FourierBranch(4, block_rng).eval()
        x = Tensor(rng.standard_normal((1, 4, 6, 8)))
        first, second = ops.split(branch.pre(x), [2, 2])
        spec1, spec2 = fft2(first), fft2(second)
        j1 = ops.concat([spec1.real, spec1.imag], axis=1)
        j2 = ops.concat([spec2.real, spec2.imag], axis=1)
        features = ops.gelu(branch.pw_fd(branch.bn_fd(j1)))
        gate = ops.sigmoid(branch.pw_ga(branch.bn_ga(j2)))
        real, imag = ops.split(ops.mul(features, gate), [2, 2])
        inverse = ifft2_parts(ComplexTensor(real, imag))
        expected = branch.reduce(ops.concat([inverse.real, inverse.imag], axis=1))
        np.testing.assert_allclose(branch(x).data, expected.data, atol=1e-5)

    def test_gate_is_bounded(self, block_rng, rng, float64):
        """Test the gate lies in (0, 1)."""
        branch = FourierBranch(4, block_rng)
        gate = branch.gate(FourierBranch.stack_spectrum(Tensor(rng.standard_normal((2, 2, 4, 4)) * 10.0)))
        assert np.all(gate.data >= 0.0) and np.all(gate.data <= 1.0)

    def test_halves_width(self, block_rng, rng):
        """Test 2C in gives C out."""
        branch = FourierBranch(6, block_rng)
        assert branch(Tensor(rng.standard_normal((1, 6, 5, 7)))).shape == (1, 3, 5, 7)

    def test_literal_product(self, block_rng, rng):
        """Test the literal product variant builds no BN paths and keeps shapes."""
        branch = FourierBranch(4, block_rng, product="literal")
        assert not hasattr(branch, "bn_fd")
        assert branch(Tensor(rng.standard_normal((1, 4, 4, 4)))).shape == (1, 2, 4, 4)

    def test_odd_channels_rejected(self, block_rng):
        """Test the branch needs an even width."""
        with pytest.raises(DimensionError):
            FourierBranch(5, block_rng)


class TestChannelAttention:
    """Test squeeze-excite."""

    def test_forced_half_weights(self, block_rng, rng, float64):
        """Test zeroed excite conv gives weights 0.5 and halves the input."""
        attention = ChannelAttention(8, 4, block_rng)
        attention.excite.zero_()
        x = Tensor(rng.standard_normal((1, 8, 3, 3)))
        np.testing.assert_allclose(attention(x).data, 0.5 * x.data, atol=1e-12)

    def test_squeeze_excite_oracle(self, block_rng, rng, float64):
        """Test against pool, conv, gelu, conv, sigmoid, scale written with numpy."""
        attention = ChannelAttention(8, 4, block_rng)
        x = rng.standard_normal((2, 8, 4, 5))
        pooled = x.mean(axis=(2, 3))
        w1, b1 = attention.squeeze.weight.data[:, :, 0, 0], attention.squeeze.bias.data
        w2, b2 = attention.excite.weight.data[:, :, 0, 0], attention.excite.bias.data
        hidden = ops.gelu(Tensor(pooled @ w1.T + b1)).data
        weights = 1.0 / (1.0 + np.exp(-(hidden @ w2.T + b2)))
        expected = x * weights[:, :, None, None]
        np.testing.assert_allclose(attention(Tensor(x)).data, expected, atol=1e-6)

    def test_depends_on_channel_means_only(self, block_rng, rng, float64):
        """Test two inputs with equal channel means get equal weights."""
        attention = ChannelAttention(4, 2, block_rng)
        means = rng.standard_normal(4)
        constant = np.broadcast_to(means.reshape(1, 4, 1, 1), (1, 4, 6, 6)).copy()
        textured = constant + rng.standard_normal((1, 4, 6, 6))
        textured -= textured.mean(axis=(2, 3), keepdims=True) - means.reshape(1, 4, 1, 1)
        np.testing.assert_allclose(
            attention.weights(Tensor(constant)).data, attention.weights(Tensor(textured)).data, atol=1e-12
        )


class TestMixerAndFFN:
    """Test SWFM and MSFN."""

    @pytest.mark.parametrize("size", [(8, 8), (7, 10), (9, 9)])
    def test_mixer_preserves_shape(self, block_rng, rng, size):
        """Test the token mixer keeps (n, C, h, w)."""
        mixer = SWFMixer(8, ModelConfig(), block_rng)
        assert mixer(Tensor(rng.standard_normal((2, 8) + size))).shape == (2, 8) + size

    @pytest.mark.parametrize(
        "toggles,expected",
        [
            ({}, {"spatial": 1, "wavelet": 1, "fourier": 2}),
            ({"fourier": False}, {"spatial": 2, "wavelet": 2, "fourier": 0}),
            ({"spatial": False}, {"spatial": 0, "wavelet": 2, "fourier": 2}),
            ({"wavelet": False}, {"spatial": 2, "wavelet": 0, "fourier": 2}),
            ({"spatial": False, "wavelet": False}, {"spatial": 0, "wavelet": 0, "fourier": 4}),
            ({"spatial": False, "fourier": False}, {"spatial": 0, "wavelet": 4, "fourier": 0}),
        ],
    )
    def test_branch_rerouting(self, toggles, expected):
        """Test a disabled branch's channels go round-robin to the enabled ones."""
        units = branch_units(BranchToggles(**toggles))
        assert units == expected
        assert sum(units.values()) == 4

    @pytest.mark.parametrize("disabled", ["spatial", "wavelet", "fourier"])
    def test_ablated_mixer_runs(self, block_rng, rng, disabled):
        """Test every single-branch ablation still preserves shape."""
        config = ModelConfig(branches=BranchToggles(**{disabled: False}))
        mixer = SWFMixer(8, config, block_rng)
        assert getattr(mixer, disabled) is None
        assert mixer(Tensor(rng.standard_normal((1, 8, 6, 6)))).shape == (1, 8, 6, 6)

    def test_mixer_channel_check(self, block_rng):
        """Test a wrong channel count is a dimension error."""
        with pytest.raises(DimensionError, match="SWFM"):
            SWFMixer(8, ModelConfig(), block_rng)(Tensor(np.zeros((1, 4, 8, 8))))

    @pytest.mark.parametrize("size", [(8, 8), (6, 10), (7, 5)])
    def test_msfn_preserves_shape(self, block_rng, rng, size):
        """Test the FFN keeps shape, padding sizes not divisible by 4."""
        ffn = MSFN(8, block_rng)
        assert ffn.sizes == [6, 5, 5]
        assert ffn(Tensor(rng.standard_normal((1, 8) + size))).shape == (1, 8) + size

    def test_msfn_is_affine(self, float64, block_rng, rng):
        """Test the FFN has no activation: f(x + y) + f(0) == f(x) + f(y)."""
        ffn = MSFN(8, block_rng)
        x = Tensor(rng.standard_normal((1, 8, 12, 12)))
        y = Tensor(rng.standard_normal((1, 8, 12, 12)))
        zero = Tensor(np.zeros((1, 8, 12, 12)))
        with no_grad():
            lhs = ffn(ops.add(x, y)).data + ffn(zero).data
            rhs = ffn(x).data + ffn(y).data
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)


class TestSWFormerBlock:
    """Test the full block."""

    def test_zero_residual_is_identity(self, block_rng, rng):
        """Test zeroed output convs make the block the identity."""
        block = SWFormerBlock(8, ModelConfig(), block_rng).zero_residual_()
        x = Tensor(rng.standard_normal((1, 8, 7, 7)))
        with no_grad():
            np.testing.assert_array_equal(block(x).data, x.data)

    def test_channel_mismatch(self, block_rng):
        """Test a wrong channel count is a dimension error."""
        with pytest.raises(DimensionError):
            SWFormerBlock(8, ModelConfig(), block_rng)(Tensor(np.zeros((1, 16, 8, 8))))

    def test_residual_scale(self, block_rng, rng):
        """Test the optional per-channel residual scales start at one."""
        block = SWFormerBlock(8, ModelConfig(residual_scale=True), block_rng)
        names = dict(block.named_parameters())
        assert "scale1" in names and "scale2" in names
        np.testing.assert_array_equal(block.scale1.data, 1.0)
        assert block(Tensor(rng.standard_normal((1, 8, 4, 4)))).shape == (1, 8, 4, 4)

    def test_gradient_check(self, block_rng, rng, float64):
        """Test the block on a 1x8x8x8 input passes the finite-difference check."""
        block = SWFormerBlock(8, ModelConfig(), block_rng)
        x = Parameter(rng.standard_normal((1, 8, 8, 8)))
        direction = Tensor(rng.standard_normal((1, 8, 8, 8)))

        def objective():
            return ops.reduce_sum(ops.mul(block(x), direction))

        params = {"input": x, **dict(block.named_parameters())}
        report = grad_check(objective, params, tol=1e-3, max_elements=8)
        assert report.passed, [c for c in report.failures()]
