"""Unit tests for residual spectra and sub-band swapping."""

import logging

import numpy as np
import pytest
import yaml

from swformer.analysis.spectral import analyze_pair, swap_subbands, write_report
from swformer.config.yaml_config import BANDS, DegradationSpec
from swformer.data.corpus import make_corpus
from swformer.data.synth import clean_image, synth_pair
from swformer.errors import DimensionError, UsageError
from swformer.tensor.core import Tensor

DEGRADATION_KINDS = ["rain_streaks", "haze", "gaussian_blur", "low_light", "snow"]


@pytest.fixture(scope="module")
def procedural_pairs():
    """Twenty 32x32 pairs cycling through every degradation kind."""
    return make_corpus(20, 32, [DegradationSpec(kind=kind) for kind in DEGRADATION_KINDS], seed=11)


class TestAnalyzePair:
    """Test the residual energy breakdown."""

    def test_zero_residual_uniform(self, rng):
        """Test identical images get a quarter per band."""
        image = rng.random((3, 16, 16))
        report = analyze_pair(image, image)
        assert report.total_energy == 0.0
        assert report.energy_fractions == {band: 0.25 for band in BANDS}

    def test_constant_offset_is_low_frequency(self, rng):
        """Test a uniform brightness shift lands almost entirely in LL."""
        clean = rng.uniform(0.2, 0.6, size=(16, 16))
        report = analyze_pair(clean, clean + 0.1)
        assert report.energy_fractions["LL"] > 0.99

    def test_sinusoid_peaks_at_its_bin(self):
        """Test a horizontal cosine of k cycles peaks k bins from the centre."""
        k = 5
        xs = np.arange(32)
        wave = np.tile(0.1 * np.cos(2 * np.pi * k * xs / 32), (32, 1))
        report = analyze_pair(np.zeros((32, 32)), wave)
        peak = report.spectrum.max()
        assert report.spectrum[16, 16 + k] == pytest.approx(peak)
        assert report.spectrum[16, 16 - k] == pytest.approx(peak)

    def test_energy_accounting(self, rng):
        """Test band energies add up to the residual energy."""
        clean, degraded = rng.random((3, 12, 20)), rng.random((3, 12, 20))
        report = analyze_pair(clean, degraded)
        assert sum(report.band_energy.values()) == pytest.approx(report.total_energy, rel=1e-12)
        assert sum(report.energy_fractions.values()) == pytest.approx(1.0)

    def test_high_frequency_rain(self):
        """Test rain streaks put more energy in detail bands than a brightness shift does."""
        clean = clean_image("smooth_field", 32, np.random.default_rng(0))
        rain = synth_pair(clean, DegradationSpec(kind="rain_streaks", seed=1)).degraded
        shifted = np.clip(clean + 0.05, 0.0, 1.0)
        rain_ll = analyze_pair(clean, rain).energy_fractions["LL"]
        shift_ll = analyze_pair(clean, shifted).energy_fractions["LL"]
        assert rain_ll < shift_ll

    def test_odd_sizes(self, rng):
        """Test odd sizes are padded for the split and keep the residual unpadded."""
        report = analyze_pair(rng.random((9, 7)), rng.random((9, 7)))
        assert report.residual.shape == (9, 7)
        assert report.band_spectra["HH"].shape == (5, 4)

    def test_shape_mismatch(self):
        """Test differently sized images are refused."""
        with pytest.raises(DimensionError):
            analyze_pair(np.zeros((8, 8)), np.zeros((8, 10)))


class TestSwapSubbands:
    """Test exchanging Haar bands between two images."""

    @pytest.mark.parametrize("index", range(20))
    def test_involution(self, procedural_pairs, index):
        """Test swapping the same set twice gives back the originals."""
        pair = procedural_pairs[index]
        clean, degraded = pair.clean.data, pair.degraded.data
        bands = [BANDS[index % 4], BANDS[(index + 1) % 4]]
        once = swap_subbands(clean, degraded, bands)
        twice = swap_subbands(*once, bands)
        np.testing.assert_allclose(twice[0], clean, atol=1e-6)
        np.testing.assert_allclose(twice[1], degraded, atol=1e-6)

    @pytest.mark.parametrize("index", range(20))
    def test_all_bands_exchange_images(self, procedural_pairs, index):
        """Test swapping every band swaps the images."""
        pair = procedural_pairs[index]
        clean, degraded = pair.clean.data, pair.degraded.data
        new_clean, new_degraded = swap_subbands(clean, degraded, BANDS)
        np.testing.assert_allclose(new_clean, degraded, atol=1e-6)
        np.testing.assert_allclose(new_degraded, clean, atol=1e-6)

    @pytest.mark.parametrize("index", range(20))
    def test_low_band_carries_brightness(self, procedural_pairs, index):
        """Test swapping LL exchanges the mean brightness of the two images."""
        pair = procedural_pairs[index]
        clean = pair.clean.data.astype(np.float64)
        degraded = pair.degraded.data.astype(np.float64)
        new_clean, new_degraded = swap_subbands(clean, degraded, ["LL"])
        assert new_clean.mean() == pytest.approx(degraded.mean(), abs=1e-9)
        assert new_degraded.mean() == pytest.approx(clean.mean(), abs=1e-9)

    def test_low_band_darkens_checkerboard(self):
        """Test swapping LL moves a low-light image's darkness onto the clean one."""
        clean = clean_image("checkerboard", 32, np.random.default_rng(4))
        dark = synth_pair(clean, DegradationSpec(kind="low_light", params={"noise_sigma": 0.0})).degraded.data
        new_clean, new_dark = swap_subbands(clean, dark, ["LL"])
        assert new_clean.mean() == pytest.approx(dark.mean(), abs=1e-6)
        assert new_dark.mean() == pytest.approx(clean.mean(), abs=1e-6)

    def test_odd_sizes_keep_shape(self, rng):
        """Test odd-sized inputs come back at their own size."""
        a, b = rng.random((7, 9)), rng.random((7, 9))
        new_a, _ = swap_subbands(a, b, ["HL"])
        assert new_a.shape == (7, 9)

    def test_tensor_layout_preserved(self, rng):
        """Test tensors come back as tensors of the same dtype."""
        a = Tensor(rng.random((1, 3, 8, 8)))
        b = Tensor(rng.random((1, 3, 8, 8)))
        new_a, _ = swap_subbands(a, b, ["LH"])
        assert isinstance(new_a, Tensor)
        assert new_a.dtype == a.dtype

    def test_empty_set_warns(self, rng, caplog):
        """Test an empty band set is a no-op with a warning."""
        a, b = rng.random((8, 8)), rng.random((8, 8))
        with caplog.at_level(logging.WARNING, logger="swformer.analysis.spectral"):
            new_a, new_b = swap_subbands(a, b, [])
        assert "empty band set" in caplog.text
        np.testing.assert_array_equal(new_a, a)

    def test_unknown_band(self, rng):
        """Test a band name outside LL, LH, HL, HH is refused."""
        with pytest.raises(UsageError, match="XX"):
            swap_subbands(np.zeros((8, 8)), np.zeros((8, 8)), ["XX"])


class TestWriteReport:
    """Test the on-disk report."""

    def test_files_written(self, rng, temp_dir):
        """Test every panel and the energy table are written."""
        report = analyze_pair(rng.random((3, 16, 16)), rng.random((3, 16, 16)))
        out = write_report(report, temp_dir / "pair")
        names = {p.name for p in out.iterdir()}
        assert {"residual.png", "spectrum.png", "energy.yaml"} <= names
        assert {f"spectrum_{band}.png" for band in BANDS} <= names
        table = yaml.safe_load((out / "energy.yaml").read_text())
        assert set(table["bands"]) == set(BANDS)
        assert table["total_energy"] == pytest.approx(report.total_energy)
