"""Forward-only acoustic model stub for shape and wiring validation.

The dataflow mirrors the cross-lingual model: IPA embeddings run through
a 4-block feed-forward-transformer encoder, the phoneme length regulator
collapses them to phoneme resolution, a speaker embedding is added, the
duration/pitch/energy predictors read that sum through stop-gradient
edges, a 1-D convolution turns pitch values into an additive embedding,
durations expand to frame resolution, and a 4-block decoder plus a linear
projection produce the mel frames.

There is no training here: every parameter is drawn uniformly from
[-0.1, 0.1] by the documented PRNG in :mod:`xling.prng`, so outputs are a
pure deterministic function of (config, seed, inputs).  Each forward run
records a trace of (stage, shape) pairs covering the whole dataflow,
including a ``stopgrad:`` annotation on every variance-predictor input.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import regulator, tensorio
from .errors import BadConfigError, ParseError, ShapeMismatchError, UnknownSpeakerError
from .prng import Xorshift64Star, uniform

ATTN_HEADS = 2
LAYERNORM_EPS = 1e-5
PREDICTOR_KERNEL = 3
INIT_LOW, INIT_HIGH = -0.1, 0.1


@dataclass(frozen=True)
class ModelConfig:
    n_ipa_symbols: int
    n_speakers: int
    hidden: int = 256
    enc_layers: int = 4
    dec_layers: int = 4
    conv_kernel: int = 9
    ff_channels: int = 1024
    n_mels: int = 80
    pitch_embed_kernel: int = 3

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 1:
                raise BadConfigError(f"{f.name} must be positive")
        if self.hidden % ATTN_HEADS:
            raise BadConfigError(f"hidden must be divisible by {ATTN_HEADS} heads")
        if self.conv_kernel % 2 == 0 or self.pitch_embed_kernel % 2 == 0:
            raise BadConfigError("convolution kernels must be odd")

    def to_file(self, path) -> None:
        lines = [f"{f.name}={getattr(self, f.name)}" for f in fields(self)]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def from_file(cls, path) -> "ModelConfig":
        values = {}
        names = {f.name for f in fields(cls)}
        for line_no, raw in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1
        ):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("expected key=value", path=path, line=line_no)
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in names:
                raise ParseError(f"unknown key {key!r}", path=path, line=line_no)
            try:
                values[key] = int(value)
            except ValueError as exc:
                raise ParseError(str(exc), path=path, line=line_no) from exc
        try:
            return cls(**values)
        except TypeError as exc:
            raise ParseError(str(exc), path=path) from exc


def _fft_block_params(prefix: str, cfg: ModelConfig) -> list:
    H, ff, k = cfg.hidden, cfg.ff_channels, cfg.conv_kernel
    params = []
    for gate in ("wq", "wk", "wv", "wo"):
        params.append((f"{prefix}.attn.{gate}", (H, H)))
    for gate in ("bq", "bk", "bv", "bo"):
        params.append((f"{prefix}.attn.{gate}", (H,)))
    params += [
        (f"{prefix}.ln1.gamma", (H,)),
        (f"{prefix}.ln1.beta", (H,)),
        (f"{prefix}.conv1.weight", (ff, H, k)),
        (f"{prefix}.conv1.bias", (ff,)),
        (f"{prefix}.conv2.weight", (H, ff, k)),
        (f"{prefix}.conv2.bias", (H,)),
        (f"{prefix}.ln2.gamma", (H,)),
        (f"{prefix}.ln2.beta", (H,)),
    ]
    return params


def _predictor_params(prefix: str, cfg: ModelConfig) -> list:
    H, k = cfg.hidden, PREDICTOR_KERNEL
    return [
        (f"{prefix}.conv1.weight", (H, H, k)),
        (f"{prefix}.conv1.bias", (H,)),
        (f"{prefix}.ln1.gamma", (H,)),
        (f"{prefix}.ln1.beta", (H,)),
        (f"{prefix}.conv2.weight", (H, H, k)),
        (f"{prefix}.conv2.bias", (H,)),
        (f"{prefix}.ln2.gamma", (H,)),
        (f"{prefix}.ln2.beta", (H,)),
        (f"{prefix}.proj.weight", (H,)),
        (f"{prefix}.proj.bias", (1,)),
    ]


def parameter_shapes(cfg: ModelConfig) -> list:
    """Every parameter tensor, in the fixed initialization order."""
    params = [
        ("ipa_embedding", (cfg.n_ipa_symbols, cfg.hidden)),
        ("speaker_embedding", (cfg.n_speakers, cfg.hidden)),
    ]
    for i in range(cfg.enc_layers):
        params += _fft_block_params(f"encoder.{i}", cfg)
    for name in ("duration", "pitch", "energy"):
        params += _predictor_params(f"{name}_predictor", cfg)
    params += [
        ("pitch_embed.weight", (cfg.hidden, 1, cfg.pitch_embed_kernel)),
        ("pitch_embed.bias", (cfg.hidden,)),
    ]
    for i in range(cfg.dec_layers):
        params += _fft_block_params(f"decoder.{i}", cfg)
    params += [
        ("mel_proj.weight", (cfg.n_mels, cfg.hidden)),
        ("mel_proj.bias", (cfg.n_mels,)),
    ]
    return params


@dataclass(frozen=True)
class Weights:
    config: ModelConfig
    tensors: dict = field(repr=False)
    seed: int | None = None


def init_weights(cfg: ModelConfig, seed: int) -> Weights:
    """Uniform [-0.1, 0.1] parameters, reproducible from (cfg, seed).

    A master xorshift64* stream hands one sub-seed to each tensor (in
    :func:`parameter_shapes` order); the tensor is then filled by the
    counter-based SplitMix64 stream, which vectorizes.
    """
    master = Xorshift64Star(seed)
    tensors = {}
    for name, shape in parameter_shapes(cfg):
        tensors[name] = uniform(master.next_u64(), shape, INIT_LOW, INIT_HIGH)
    return Weights(cfg, tensors, seed)


def save_weights(path, weights: Weights) -> None:
    tensorio.write_sections(path, weights.tensors)


def load_weights(path, cfg: ModelConfig) -> Weights:
    tensors = tensorio.read_sections(path)
    expected = parameter_shapes(cfg)
    if set(tensors) != {name for name, _ in expected}:
        raise ShapeMismatchError(f"{path}: parameter names do not match the config")
    for name, shape in expected:
        if tensors[name].shape != shape:
            raise ShapeMismatchError(
                f"{path}: {name} has shape {tensors[name].shape}, expected {shape}"
            )
    return Weights(cfg, tensors, None)


@dataclass(frozen=True)
class TeacherForced:
    """Ground-truth per-phoneme durations (frames), pitch, and energy."""

    durations: tuple
    pitch: tuple
    energy: tuple


@dataclass(frozen=True)
class Inference:
    """Durations and pitch come from the predictors."""


@dataclass(frozen=True)
class ForwardOutput:
    mel_pred: np.ndarray  # T_f x n_mels
    dur_pred: np.ndarray  # per-phoneme, log-frames
    pitch_pred: np.ndarray
    energy_pred: np.ndarray
    durations_used: tuple
    trace: tuple  # ordered (stage, shape) pairs


def _layernorm(x, gamma, beta):
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + LAYERNORM_EPS) * gamma + beta


def _conv1d(x, weight, bias):
    """Same-padded 1-D convolution over time; x is (T, C_in)."""
    if x.shape[0] == 0:
        return np.zeros((0, weight.shape[0]))
    k = weight.shape[2]
    pad = k // 2
    padded = np.pad(x, ((pad, pad), (0, 0)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, k, axis=0)
    flat = windows.reshape(x.shape[0], -1)  # (T, C_in * k)
    return flat @ weight.reshape(weight.shape[0], -1).T + bias


def _attention(x, p, prefix):
    T, H = x.shape
    head = H // ATTN_HEADS
    q = (x @ p[f"{prefix}.wq"] + p[f"{prefix}.bq"]).reshape(T, ATTN_HEADS, head)
    k = (x @ p[f"{prefix}.wk"] + p[f"{prefix}.bk"]).reshape(T, ATTN_HEADS, head)
    v = (x @ p[f"{prefix}.wv"] + p[f"{prefix}.bv"]).reshape(T, ATTN_HEADS, head)
    scores = np.einsum("thd,shd->hts", q, k) / np.sqrt(head)
    scores -= scores.max(axis=-1, keepdims=True)
    weights = np.exp(scores)
    weights /= weights.sum(axis=-1, keepdims=True)
    mixed = np.einsum("hts,shd->thd", weights, v).reshape(T, H)
    return mixed @ p[f"{prefix}.wo"] + p[f"{prefix}.bo"]


def _fft_block(x, p, prefix):
    if x.shape[0] == 0:
        return x
    x = _layernorm(
        x + _attention(x, p, f"{prefix}.attn"),
        p[f"{prefix}.ln1.gamma"],
        p[f"{prefix}.ln1.beta"],
    )
    h = np.maximum(_conv1d(x, p[f"{prefix}.conv1.weight"], p[f"{prefix}.conv1.bias"]), 0.0)
    h = _conv1d(h, p[f"{prefix}.conv2.weight"], p[f"{prefix}.conv2.bias"])
    return _layernorm(x + h, p[f"{prefix}.ln2.gamma"], p[f"{prefix}.ln2.beta"])


def _predictor(x, p, prefix):
    h = np.maximum(_conv1d(x, p[f"{prefix}.conv1.weight"], p[f"{prefix}.conv1.bias"]), 0.0)
    h = _layernorm(h, p[f"{prefix}.ln1.gamma"], p[f"{prefix}.ln1.beta"])
    h = np.maximum(_conv1d(h, p[f"{prefix}.conv2.weight"], p[f"{prefix}.conv2.bias"]), 0.0)
    h = _layernorm(h, p[f"{prefix}.ln2.gamma"], p[f"{prefix}.ln2.beta"])
    return h @ p[f"{prefix}.proj.weight"] + p[f"{prefix}.proj.bias"][0]


def positional_encoding(length: int, dim: int) -> np.ndarray:
    positions = np.arange(length, dtype=np.float64)[:, None]
    rates = np.exp(-np.log(10000.0) * (2 * (np.arange(dim) // 2)) / dim)
    angles = positions * rates[None, :]
    encoding = np.empty((length, dim))
    encoding[:, 0::2] = np.sin(angles[:, 0::2])
    encoding[:, 1::2] = np.cos(angles[:, 1::2])
    return encoding


def forward(weights: Weights, ipa_ids, phoneme_lengths, speaker: int, mode) -> ForwardOutput:
    """Run the full dataflow; see the module docstring for the wiring."""
    cfg = weights.config
    p = weights.tensors
    ids = np.asarray(ipa_ids, dtype=np.int64).reshape(-1)
    lengths = np.asarray(phoneme_lengths, dtype=np.int64).reshape(-1)
    if ids.size and (ids.min() < 0 or ids.max() >= cfg.n_ipa_symbols):
        raise ShapeMismatchError(
            f"IPA ids must lie in [0, {cfg.n_ipa_symbols})"
        )
    if not (0 <= speaker < cfg.n_speakers):
        raise UnknownSpeakerError(
            f"speaker {speaker} outside table of {cfg.n_speakers}"
        )
    if lengths.sum() != ids.size:
        raise ShapeMismatchError(
            f"phoneme lengths sum to {lengths.sum()} but there are {ids.size} IPA ids"
        )
    n_phonemes = lengths.size
    if isinstance(mode, TeacherForced):
        for name, seq in (
            ("durations", mode.durations),
            ("pitch", mode.pitch),
            ("energy", mode.energy),
        ):
            if len(seq) != n_phonemes:
                raise ShapeMismatchError(
                    f"teacher-forced {name} has {len(seq)} values, expected {n_phonemes}"
                )
    elif not isinstance(mode, Inference):
        raise BadConfigError(f"unknown forward mode {mode!r}")

    trace = []

    x = p["ipa_embedding"][ids]
    trace.append(("embed", x.shape))
    x = x + positional_encoding(x.shape[0], cfg.hidden)
    for i in range(cfg.enc_layers):
        x = _fft_block(x, p, f"encoder.{i}")
    trace.append(("encoder", x.shape))

    y = regulator.aggregate(x, lengths)
    trace.append(("aggregate", y.shape))
    y = y + p["speaker_embedding"][speaker]
    trace.append(("add_speaker", y.shape))

    # stop-gradient on every variance-predictor input: identity in this
    # forward-only stub, but recorded so the wiring is auditable
    predictions = {}
    for name in ("duration", "pitch", "energy"):
        trace.append((f"stopgrad:{name}_predictor", y.shape))
        predictions[name] = _predictor(y, p, f"{name}_predictor")
        trace.append((f"{name}_predictor", predictions[name].shape))

    if isinstance(mode, TeacherForced):
        pitch_values = np.asarray(mode.pitch, dtype=np.float64)
        durations = np.asarray(mode.durations, dtype=np.int64)
    else:
        pitch_values = predictions["pitch"]
        durations = np.maximum(np.round(np.exp(predictions["duration"])), 0.0).astype(
            np.int64
        )
    pitch_embedding = _conv1d(
        pitch_values[:, None], p["pitch_embed.weight"], p["pitch_embed.bias"]
    )
    y = y + pitch_embedding
    trace.append(("pitch_embedding", y.shape))

    f = regulator.expand(y, durations)
    trace.append(("expand", f.shape))
    if f.shape[0]:
        f = f + positional_encoding(f.shape[0], cfg.hidden)
    for i in range(cfg.dec_layers):
        f = _fft_block(f, p, f"decoder.{i}")
    trace.append(("decoder", f.shape))

    mel = f @ p["mel_proj.weight"].T + p["mel_proj.bias"]
    trace.append(("mel", mel.shape))

    return ForwardOutput(
        mel_pred=mel,
        dur_pred=predictions["duration"],
        pitch_pred=predictions["pitch"],
        energy_pred=predictions["energy"],
        durations_used=tuple(int(d) for d in durations),
        trace=tuple((name, tuple(shape)) for name, shape in trace),
    )


def mse_losses(out: ForwardOutput, targets: dict) -> dict:
    """Mean-squared error per output head.

    ``targets`` maps {"mel", "log_durations", "pitch", "energy"} to arrays
    matching the corresponding prediction shapes.
    """
    pairs = {
        "mel_loss": (out.mel_pred, targets["mel"]),
        "dur_loss": (out.dur_pred, targets["log_durations"]),
        "pitch_loss": (out.pitch_pred, targets["pitch"]),
        "energy_loss": (out.energy_pred, targets["energy"]),
    }
    losses = {}
    for name, (pred, target) in pairs.items():
        target = np.asarray(target, dtype=np.float64)
        if pred.shape != target.shape:
            raise ShapeMismatchError(
                f"{name}: prediction {pred.shape} vs target {target.shape}"
            )
        losses[name] = float(np.mean((pred - target) ** 2)) if pred.size else 0.0
    return losses
