"""Every input/output mode, branch ablation and loss variant trains."""

import numpy as np
import pytest

from swformer.config.yaml_config import BranchToggles, LossConfig, TrainConfig
from swformer.model.network import SWFormerNet, count_params
from swformer.train.trainer import Trainer

SHORT = TrainConfig(steps=3, batch_size=1, patch_size=16)
FULL = SHORT.model_copy(update={"steps": 100})

SINGLE_BRANCH_ABLATIONS = [{"spatial": False}, {"wavelet": False}, {"fourier": False}]


def _run(model_config, pairs, loss=None, variant=None, train=SHORT):
    trainer = Trainer(SWFormerNet(model_config), pairs, loss=loss, train=train, variant=variant)
    return trainer.run()


@pytest.mark.integration
@pytest.mark.parametrize("mode", ["siso", "mimo", "lmimo"])
def test_io_modes_train(tiny_config, rain_pairs, mode):
    """Test each input/output mode takes finite steps."""
    log = _run(tiny_config.model_copy(update={"io_mode": mode}), rain_pairs)
    assert len(log) == 3
    assert all(np.isfinite(log.losses))


@pytest.mark.integration
@pytest.mark.parametrize(
    "toggles",
    [
        {"spatial": False},
        {"wavelet": False},
        {"fourier": False},
        {"spatial": False, "wavelet": False},
    ],
)
def test_branch_ablations_train(tiny_config, rain_pairs, toggles):
    """Test a mixer missing branches still builds and trains."""
    config = tiny_config.model_copy(update={"branches": BranchToggles(**toggles)})
    log = _run(config, rain_pairs)
    assert all(np.isfinite(log.losses))
    assert count_params(config) > 0


@pytest.mark.integration
@pytest.mark.parametrize("variant", ["small", "medium"])
def test_early_exit_variants_train(tiny_config, rain_pairs, variant):
    """Test smaller variants supervise only the exits they build."""
    config = tiny_config.model_copy(update={"variant": variant})
    log = _run(config, rain_pairs)
    assert all(np.isfinite(log.losses))


@pytest.mark.integration
def test_large_build_trained_as_small(tiny_config, rain_pairs):
    """Test a large build can be trained through its small exit only."""
    log = _run(tiny_config, rain_pairs, variant="small")
    assert all(np.isfinite(log.losses))


@pytest.mark.integration
@pytest.mark.parametrize(
    "loss",
    [
        LossConfig(fourier_term=False),
        LossConfig(wavelet_term=False),
        LossConfig(spatial_term=False, wavelet_term=False),
        LossConfig(lambda_fourier=0.0),
    ],
)
def test_loss_ablations_train(tiny_config, rain_pairs, loss):
    """Test each loss ablation trains and reports only its active terms."""
    log = _run(tiny_config, rain_pairs, loss=loss)
    record = log.records[-1]
    if not loss.fourier_term or loss.lambda_fourier == 0.0:
        assert record.fourier == 0.0
    if not loss.wavelet_term:
        assert record.wavelet == 0.0
    assert np.isfinite(record.loss)


@pytest.mark.integration
def test_literal_fourier_product_trains(tiny_config, rain_pairs):
    """Test the ungated Fourier product is a working alternative."""
    log = _run(tiny_config.model_copy(update={"fourier_product": "literal"}), rain_pairs)
    assert all(np.isfinite(log.losses))


@pytest.mark.integration
def test_branch_ablations_have_distinct_param_counts(tiny_config):
    """Test each single-branch ablation and the full mixer report different parameter counts."""
    counts = [count_params(tiny_config)] + [
        count_params(tiny_config.model_copy(update={"branches": BranchToggles(**toggles)}))
        for toggles in SINGLE_BRANCH_ABLATIONS
    ]
    assert len(set(counts)) == len(counts)


@pytest.mark.integration
@pytest.mark.slow
@pytest.mark.parametrize(
    "update",
    [{"io_mode": mode} for mode in ("siso", "mimo", "lmimo")]
    + [{"branches": BranchToggles(**toggles)} for toggles in SINGLE_BRANCH_ABLATIONS],
    ids=["siso", "mimo", "lmimo", "no_spatial", "no_wavelet", "no_fourier"],
)
def test_ablations_train_hundred_steps(tiny_config, rain_pairs, update):
    """Test every mode and branch ablation trains 100 finite steps."""
    log = _run(tiny_config.model_copy(update=update), rain_pairs, train=FULL)
    assert len(log) == 100
    assert all(np.isfinite(log.losses))
