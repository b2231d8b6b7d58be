import wave

import numpy as np
import pytest

from xling.audio import AudioBuffer, read_wav, wav_duration_sec, write_wav
from xling.errors import ConfigMismatchError, EmptyAudioError


class TestWavIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        samples = rng.uniform(-0.9, 0.9, 4000)
        path = tmp_path / "a.wav"
        write_wav(path, samples, 16000)
        audio = read_wav(path)
        assert audio.sample_rate == 16000
        assert audio.samples.size == 4000
        np.testing.assert_allclose(audio.samples, samples, atol=0.5 / 32768)

    def test_expected_rate_enforced(self, tmp_path):
        path = tmp_path / "a.wav"
        write_wav(path, np.zeros(100), 22050)
        read_wav(path, expected_rate=22050)
        with pytest.raises(ConfigMismatchError):
            read_wav(path, expected_rate=16000)

    def test_stereo_rejected(self, tmp_path):
        path = tmp_path / "stereo.wav"
        with wave.open(str(path), "wb") as w:
            w.setnchannels(2)
            w.setsampwidth(2)
            w.setframerate(16000)
            w.writeframes(b"\x00\x00" * 200)
        with pytest.raises(ConfigMismatchError):
            read_wav(path)

    def test_8bit_rejected(self, tmp_path):
        path = tmp_path / "8bit.wav"
        with wave.open(str(path), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(1)
            w.setframerate(16000)
            w.writeframes(b"\x00" * 100)
        with pytest.raises(ConfigMismatchError):
            read_wav(path)

    def test_duration_from_header(self, tmp_path):
        path = tmp_path / "a.wav"
        write_wav(path, np.zeros(8000), 16000)
        assert wav_duration_sec(path) == pytest.approx(0.5)

    def test_empty_write_rejected(self, tmp_path):
        with pytest.raises(EmptyAudioError):
            write_wav(tmp_path / "e.wav", np.zeros(0), 16000)

    def test_clipping_is_bounded(self, tmp_path):
        path = tmp_path / "loud.wav"
        write_wav(path, np.array([2.0, -2.0, 0.0]), 16000)
        audio = read_wav(path)
        assert np.all(np.abs(audio.samples) <= 1.0)


class TestAudioBuffer:
    def test_duration(self):
        assert AudioBuffer(np.zeros(8000), 16000).duration_sec == 0.5

    def test_nonfinite_rejected(self):
        with pytest.raises(ConfigMismatchError):
            AudioBuffer(np.array([0.0, np.nan]), 16000)

    def test_bad_rate(self):
        with pytest.raises(ConfigMismatchError):
            AudioBuffer(np.zeros(10), 0)
