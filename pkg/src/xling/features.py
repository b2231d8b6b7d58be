"""Acoustic feature extraction: log-mel, frame energy, and pitch.

Framing is shared by all three extractors so their frame counts always
agree: the signal is center-padded by half a window (reflected), frames
start every hop, and the frame count is ``len(samples) // hop + 1``.
Defaults follow the 16 kHz / 40 ms window / 10 ms hop / 80-mel setup with
a 1024-point FFT (smallest power of two above the 640-sample window).

Pitch uses a normalized cross-correlation estimator searching 50-600 Hz
with parabolic peak interpolation; frames whose peak correlation falls
below the voicing threshold carry the unvoiced sentinel 0.0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

from .audio import AudioBuffer
from .errors import (
    BadConfigError,
    ConfigMismatchError,
    EmptyAudioError,
    LengthMismatchError,
)

ENERGY = "Energy"
PITCH_HZ = "PitchHz"

LINEAR = "linear"
LOG = "log"


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = 16000
    win_ms: int = 40
    hop_ms: int = 10
    n_mels: int = 80
    fft_size: int = 1024
    fmin: float = 0.0
    fmax: float = 8000.0
    log_floor: float = 1e-5
    f0_min: float = 50.0
    f0_max: float = 600.0
    voicing_threshold: float = 0.3

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise BadConfigError("sample_rate must be positive")
        if (self.win_ms * self.sample_rate) % 1000 or (self.hop_ms * self.sample_rate) % 1000:
            raise BadConfigError("window and hop must be whole numbers of samples")
        if self.fft_size < self.win_length:
            raise BadConfigError("fft_size must cover the analysis window")
        if not (0 <= self.fmin < self.fmax <= self.sample_rate / 2):
            raise BadConfigError("need 0 <= fmin < fmax <= Nyquist")
        if self.log_floor <= 0:
            raise BadConfigError("log_floor must be positive")
        if not (0 < self.f0_min < self.f0_max < self.sample_rate / 2):
            raise BadConfigError("need 0 < f0_min < f0_max < Nyquist")

    @property
    def win_length(self) -> int:
        return self.win_ms * self.sample_rate // 1000

    @property
    def hop_length(self) -> int:
        return self.hop_ms * self.sample_rate // 1000


@dataclass(frozen=True)
class MelSpectrogram:
    frames: np.ndarray  # T_f x n_mels, natural log magnitude


@dataclass(frozen=True)
class FrameSeries:
    values: np.ndarray
    kind: str

    def __post_init__(self):
        object.__setattr__(
            self, "values", np.asarray(self.values, dtype=np.float64).reshape(-1)
        )
        if self.kind not in (ENERGY, PITCH_HZ):
            raise BadConfigError(f"unknown frame series kind {self.kind!r}")


def _check_audio(audio: AudioBuffer, cfg: FeatureConfig) -> np.ndarray:
    if audio.sample_rate != cfg.sample_rate:
        raise ConfigMismatchError(
            f"audio is {audio.sample_rate} Hz but config expects {cfg.sample_rate} Hz"
        )
    if audio.samples.size == 0:
        raise EmptyAudioError("no samples to analyze")
    return audio.samples


def _frame_signal(samples: np.ndarray, cfg: FeatureConfig, mode="reflect") -> np.ndarray:
    """Center-padded frames: one row per hop, len(samples)//hop + 1 rows."""
    win, hop = cfg.win_length, cfg.hop_length
    pad = win // 2
    n = samples.size
    if mode == "reflect" and n <= pad:
        mode = "constant"  # too short for a full reflection
    padded = np.pad(samples, pad, mode=mode)
    n_frames = n // hop + 1
    idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    return padded[idx]


def stft_magnitude(audio: AudioBuffer, cfg: FeatureConfig) -> np.ndarray:
    """Magnitude spectrogram, T_f x (fft_size/2 + 1), Hann window."""
    samples = _check_audio(audio, cfg)
    frames = _frame_signal(samples, cfg)
    window = get_window("hann", cfg.win_length, fftbins=True)
    return np.abs(np.fft.rfft(frames * window, n=cfg.fft_size, axis=1))


def mel_filterbank(cfg: FeatureConfig) -> np.ndarray:
    """Area-normalized triangular filters on the HTK mel scale."""

    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)

    n_bins = cfg.fft_size // 2 + 1
    freqs = np.arange(n_bins) * cfg.sample_rate / cfg.fft_size
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2))
    fb = np.zeros((cfg.n_mels, n_bins))
    for m in range(cfg.n_mels):
        lo, center, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (freqs - lo) / (center - lo)
        falling = (hi - freqs) / (hi - center)
        fb[m] = np.maximum(0.0, np.minimum(rising, falling)) * (2.0 / (hi - lo))
    return fb


def mel_spectrogram(audio: AudioBuffer, cfg: FeatureConfig) -> MelSpectrogram:
    """Natural-log mel magnitude spectrogram, floored at cfg.log_floor."""
    magnitude = stft_magnitude(audio, cfg)
    mel = magnitude @ mel_filterbank(cfg).T
    return MelSpectrogram(np.log(np.maximum(mel, cfg.log_floor)))


def energy_per_frame(audio: AudioBuffer, cfg: FeatureConfig) -> FrameSeries:
    """L2 norm of each magnitude STFT frame (same framing as the mel)."""
    magnitude = stft_magnitude(audio, cfg)
    return FrameSeries(np.sqrt(np.sum(magnitude**2, axis=1)), ENERGY)


def pitch_per_frame(audio: AudioBuffer, cfg: FeatureConfig) -> FrameSeries:
    """Per-frame f0 in Hz; 0.0 marks unvoiced frames.

    Normalized cross-correlation over lags for f0_min..f0_max, rectangular
    frames on the shared hop grid.  The smallest lag whose local peak comes
    within 15% of the best peak wins (guards against octave-down errors),
    then parabolic interpolation refines it.  Edges are zero-padded rather
    than reflected: a reflected edge frame is time-symmetric and grows a
    spurious mirror-lag correlation peak.
    """
    samples = _check_audio(audio, cfg)
    if samples.size < cfg.win_length:
        raise EmptyAudioError(
            f"need at least one window ({cfg.win_length} samples), got {samples.size}"
        )
    frames = _frame_signal(samples, cfg, mode="constant")
    frames = frames - frames.mean(axis=1, keepdims=True)
    win = cfg.win_length
    lag_min = max(1, int(np.ceil(cfg.sample_rate / cfg.f0_max)))
    lag_max = min(win - 1, int(np.floor(cfg.sample_rate / cfg.f0_min)))

    # autocorrelation numerator for all lags at once, via FFT
    fft_len = 1 << int(np.ceil(np.log2(2 * win)))
    spectrum = np.fft.rfft(frames, n=fft_len, axis=1)
    autocorr = np.fft.irfft(spectrum.real**2 + spectrum.imag**2, n=fft_len, axis=1)

    # per-lag energies of the leading and trailing sub-frames
    csum = np.concatenate(
        [np.zeros((frames.shape[0], 1)), np.cumsum(frames**2, axis=1)], axis=1
    )
    total = csum[:, -1]
    lags = np.arange(lag_min - 1, lag_max + 2)
    lead = csum[:, win - lags]
    trail = total[:, None] - csum[:, lags]
    denom = np.sqrt(lead * trail)
    with np.errstate(invalid="ignore", divide="ignore"):
        nccf = np.where(denom > 0, autocorr[:, lags] / denom, 0.0)

    values = np.zeros(frames.shape[0])
    interior = nccf[:, 1:-1]
    is_peak = (interior >= nccf[:, :-2]) & (interior >= nccf[:, 2:])
    for t in range(frames.shape[0]):
        if total[t] <= 0.0:
            continue
        peaks = np.flatnonzero(is_peak[t])
        if peaks.size == 0:
            continue
        best = interior[t, peaks].max()
        if best < cfg.voicing_threshold:
            continue
        j = peaks[interior[t, peaks] >= 0.85 * best][0] + 1
        left, mid, right = nccf[t, j - 1], nccf[t, j], nccf[t, j + 1]
        curvature = left - 2.0 * mid + right
        offset = 0.0 if curvature >= 0 else 0.5 * (left - right) / curvature
        lag = lags[j] + np.clip(offset, -0.5, 0.5)
        values[t] = float(np.clip(cfg.sample_rate / lag, cfg.f0_min, cfg.f0_max))
    return FrameSeries(values, PITCH_HZ)


def average_by_phoneme(series: FrameSeries, durations) -> np.ndarray:
    """Mean per duration segment; pitch averages voiced frames only.

    Segments with no frames (or no voiced frames, for pitch) yield 0.0.
    """
    d = np.asarray(durations, dtype=np.int64).reshape(-1)
    if d.size and d.min() < 0:
        raise LengthMismatchError("durations must all be >= 0")
    if d.sum() != series.values.size:
        raise LengthMismatchError(
            f"durations sum to {d.sum()} but series has {series.values.size} frames"
        )
    out = np.zeros(d.size)
    pos = 0
    for i, n in enumerate(d):
        segment = series.values[pos : pos + n]
        pos += n
        if series.kind == PITCH_HZ:
            segment = segment[segment > 0.0]
        if segment.size:
            out[i] = segment.mean()
    return out


@dataclass(frozen=True)
class QuantizerConfig:
    v_min: float
    v_max: float
    n_bins: int = 256
    scale: str = LINEAR

    def __post_init__(self):
        if self.n_bins < 1:
            raise BadConfigError("n_bins must be positive")
        if not (self.v_min < self.v_max):
            raise BadConfigError(f"need v_min < v_max, got [{self.v_min}, {self.v_max}]")
        if self.scale not in (LINEAR, LOG):
            raise BadConfigError(f"unknown scale {self.scale!r}")
        if self.scale == LOG and self.v_min <= 0:
            raise BadConfigError("log scale requires v_min > 0")

    def _transform(self, v: np.ndarray) -> np.ndarray:
        return np.log(v) if self.scale == LOG else v

    def _inverse(self, s: np.ndarray) -> np.ndarray:
        return np.exp(s) if self.scale == LOG else s


def quantize(values, q: QuantizerConfig) -> np.ndarray:
    """Map values to bin indices, clamping to [v_min, v_max] first."""
    v = np.clip(np.asarray(values, dtype=np.float64), q.v_min, q.v_max)
    lo, hi = q._transform(np.float64(q.v_min)), q._transform(np.float64(q.v_max))
    fraction = (q._transform(v) - lo) / (hi - lo)
    return np.minimum((fraction * q.n_bins).astype(np.int64), q.n_bins - 1)


def dequantize(indices, q: QuantizerConfig) -> np.ndarray:
    """Bin centers (in the configured scale) for the given indices."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= q.n_bins):
        raise BadConfigError(f"indices outside [0, {q.n_bins - 1}]")
    lo, hi = q._transform(np.float64(q.v_min)), q._transform(np.float64(q.v_max))
    width = (hi - lo) / q.n_bins
    return q._inverse(lo + (idx + 0.5) * width)
