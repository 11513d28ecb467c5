import numpy as np
import pytest

from atat.adversarial import GeneratorModel
from atat.autoencoder import AutoencoderModel
from atat.errors import ConfigError
from atat.gate import GateModel
from atat.masking import windowed_cc
from atat.pipeline import AtatSystem, MaskConfig, ae_stream, prepare_tokens, rescale
from atat.signal import estimated_clean_std
from atat.synthetic import eeg_like


class Identity(AutoencoderModel):
    """An autoencoder stand-in that returns its input (already in [0, 1])."""

    def forward(self, x):
        return x


def raw_batch(n, seed=0):
    rng = np.random.default_rng(seed)
    return np.stack([eeg_like(rng) for _ in range(n)])


def test_rescale_level_and_spread():
    rng = np.random.default_rng(0)
    raw = 3.0 + 2.0 * rng.standard_normal(512)
    out = rescale(rng.random(512), raw, 2.0)
    assert out.mean() == pytest.approx(raw.mean())
    assert out.std() == pytest.approx(estimated_clean_std(raw.std(), 2.0))
    assert np.all(rescale(np.full(512, 0.4), raw, 2.0) == raw.mean())


def test_clean_input_through_identity_is_barely_masked():
    x = raw_batch(5)
    system = AtatSystem(None, {2.0: Identity()}, {2.0: GeneratorModel()})
    res = system.denoise_batch(x)
    assert res.masks.mean() < 0.10
    # unmasked segments pass through: CC with the input is 1
    for o, r, m in zip(res.output, x, res.masks):
        if not m.any():
            assert np.corrcoef(o, r)[0, 1] == pytest.approx(1.0, abs=1e-9)


def test_generator_fills_only_masked_sites():
    x = raw_batch(1, seed=1)[0]
    norm = (x - x.min()) / (x.max() - x.min())
    ae = np.clip(norm + np.where(np.arange(512) < 128, 0.5 * np.sin(np.arange(512)), 0.0), 0, 1)
    ts = prepare_tokens(norm, ae, MaskConfig())
    assert ts.mask.mask[:96].all() and not ts.mask.mask[200:].any()


def test_fixed_snr_routing_and_missing_model():
    x = raw_batch(3, seed=2)
    system = AtatSystem(GateModel(), {-7.0: Identity()})
    res = system.denoise_batch(x, fixed_snr=-7.0)
    assert np.all(res.snr_class == -7.0)
    with pytest.raises(ConfigError):
        system.denoise_batch(x, fixed_snr=2.0)
    with pytest.raises(ConfigError):
        AtatSystem(None, {-7.0: Identity(), 2.0: Identity()}).denoise_batch(x)


def test_gate_routes_and_reports_probabilities():
    system = AtatSystem(GateModel(seed=3), {-7.0: Identity(), 2.0: Identity()})
    res = system.denoise_batch(raw_batch(4, seed=3))
    assert res.probabilities.shape == (4, 2)
    assert set(res.snr_class) <= {-7.0, 2.0}
    assert res.output.shape == res.ae_only.shape == (4, 512)


def test_ae_stream_stretches_rows_and_keeps_the_mask():
    rng = np.random.default_rng(5)
    narrow = 0.78 + 0.01 * rng.standard_normal((3, 512))
    flat = np.full((1, 512), 0.4)
    out = ae_stream(np.vstack([narrow, flat]))
    np.testing.assert_allclose(out[:3].min(axis=1), 0.0)
    np.testing.assert_allclose(out[:3].max(axis=1), 1.0)
    assert np.all(out[3] == 0.4)
    x = rng.random(512)
    a = windowed_cc(x, narrow[0]).cc_per_window
    b = windowed_cc(x, out[0]).cc_per_window
    np.testing.assert_allclose(a, b, atol=1e-12)
    assert ae_stream(narrow[0]).shape == (512,)
