import wave

import numpy as np
import pytest

from virtobj import dsp
from virtobj.modal import ImpactSignal


def sig(x, sr=44100):
    return ImpactSignal(np.asarray(x, dtype=np.float64), sr)


class TestSTFT:
    def test_zero(self):
        s = dsp.stft(sig(np.zeros(5000)))
        assert not np.any(s.data)

    def test_shape(self):
        s = dsp.stft(sig(np.random.default_rng(0).normal(size=4096)))
        assert s.data.shape == (513, 16)
        assert s.as_real().shape == (513, 16, 2)

    def test_440_peak(self):
        t = np.arange(44100) / 44100.0
        s = dsp.stft(sig(np.sin(2 * np.pi * 440 * t)))
        mag = np.abs(s.data).mean(axis=1)
        assert int(np.argmax(mag)) == round(440 * 1024 / 44100) == 10

    def test_real_roundtrip(self, rng):
        s = dsp.stft(sig(rng.normal(size=3000)))
        back = dsp.Spectrogram.from_real(s.as_real(), s.window_size, s.hop, s.sample_rate)
        np.testing.assert_array_equal(back.data, s.data)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            dsp.stft(sig(np.zeros(100)), window_size=1000, hop=0)

    def test_parseval(self, rng):
        x = rng.normal(size=8000)
        s = dsp.stft(sig(x))
        w = dsp.hann(1024)
        padded = np.concatenate([x, np.zeros(1024)])
        direct = np.array([np.sum((padded[t * 256: t * 256 + 1024] * w) ** 2) for t in range(s.data.shape[1])])
        np.testing.assert_allclose(dsp.frame_energy(s), direct, rtol=1e-6)


class TestISTFT:
    def test_roundtrip(self, rng):
        x = rng.normal(size=10000)
        y = dsp.istft(dsp.stft(sig(x)), len(x))
        assert np.sqrt(np.mean((y.samples - x) ** 2)) < 1e-6

    def test_zero(self):
        s = dsp.stft(sig(np.zeros(3000)))
        assert not dsp.istft(s, 3000).samples.any()

    def test_linearity(self, rng):
        a = dsp.stft(sig(rng.normal(size=4000)))
        b = dsp.stft(sig(rng.normal(size=4000)))
        ab = dsp.Spectrogram(a.data + b.data, a.window_size, a.hop, a.sample_rate)
        np.testing.assert_allclose(dsp.istft(ab, 4000).samples,
                                   dsp.istft(a, 4000).samples + dsp.istft(b, 4000).samples, atol=1e-9)

    def test_overlap_condition(self):
        assert dsp.check_overlap(1024, 256)
        assert not dsp.check_overlap(1024, 512)
        s = dsp.stft(sig(np.ones(4096)), 1024, 512)
        with pytest.raises(ValueError):
            dsp.istft(s, 4096)


class TestWav:
    def test_roundtrip_quantization(self, tmp_path, rng):
        x = rng.uniform(-0.99, 0.99, 5000)
        dsp.write_wav(sig(x), tmp_path / "a.wav")
        y = dsp.read_wav(tmp_path / "a.wav")
        assert np.abs(y.samples - x).max() <= 2.0 ** -15

    def test_normalize(self, tmp_path, rng):
        dsp.write_wav(sig(rng.normal(size=2000) * 5), tmp_path / "n.wav", normalize=True)
        y = dsp.read_wav(tmp_path / "n.wav")
        assert abs(np.abs(y.samples).max() - 0.9) <= 2.0 ** -15

    def test_header(self, tmp_path):
        dsp.write_wav(sig(np.zeros(100)), tmp_path / "h.wav")
        with wave.open(str(tmp_path / "h.wav"), "rb") as w:
            assert w.getframerate() == 44100
            assert w.getnchannels() == 1 and w.getsampwidth() == 2
            assert w.getnframes() == 100

    def test_clipping_warns(self, tmp_path):
        with pytest.warns(dsp.ClippingWarning):
            dsp.write_wav(sig([0.0, 1.5, -2.0]), tmp_path / "c.wav")
        y = dsp.read_wav(tmp_path / "c.wav")
        assert np.abs(y.samples).max() <= 1.0


def test_magnitude_image_range(rng):
    img = dsp.magnitude_image(dsp.stft(sig(rng.normal(size=5000))))
    assert img.min() >= 0.0 and img.max() <= 1.0
