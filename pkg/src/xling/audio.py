"""WAV input/output for 16-bit PCM mono audio."""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

from .errors import ConfigMismatchError, EmptyAudioError


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio with samples scaled to [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        object.__setattr__(
            self, "samples", np.asarray(self.samples, dtype=np.float64).reshape(-1)
        )
        if self.sample_rate <= 0:
            raise ConfigMismatchError(f"sample rate must be positive, got {self.sample_rate}")
        if self.samples.size and not np.all(np.isfinite(self.samples)):
            raise ConfigMismatchError("audio contains non-finite samples")

    @property
    def duration_sec(self) -> float:
        return self.samples.size / self.sample_rate


def read_wav(path, expected_rate: int | None = None) -> AudioBuffer:
    """Read a mono 16-bit PCM WAV file; anything else is rejected."""
    with wave.open(str(path), "rb") as w:
        channels = w.getnchannels()
        width = w.getsampwidth()
        rate = w.getframerate()
        n = w.getnframes()
        if channels != 1:
            raise ConfigMismatchError(f"{path}: expected mono, got {channels} channels")
        if width != 2:
            raise ConfigMismatchError(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
        if expected_rate is not None and rate != expected_rate:
            raise ConfigMismatchError(
                f"{path}: expected {expected_rate} Hz, got {rate} Hz"
            )
        raw = w.readframes(n)
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioBuffer(samples, rate)


def write_wav(path, samples, sample_rate: int) -> None:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise EmptyAudioError("refusing to write an empty WAV file")
    pcm = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(pcm.tobytes())


def wav_duration_sec(path) -> float:
    """Duration from the WAV header without reading sample data."""
    with wave.open(str(path), "rb") as w:
        return w.getnframes() / w.getframerate()
