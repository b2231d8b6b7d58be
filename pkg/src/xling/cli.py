"""Command-line pipeline driver.

Subcommands: ``g2p`` (text -> phoneme sequence file), ``regulate``
(embedding tensor + lengths -> aggregated/expanded tensors), ``features``
(WAV [+ alignment] -> mel/energy/pitch and phoneme-averaged/quantized
tracks), ``stats`` (corpus-wide energy/pitch ranges for the quantizer),
``forward`` (phoneme sequence + seed -> deterministic model outputs and a
stage trace), and ``manifest`` (dataset spec + scan roots -> manifest and
balance report).

A ``--config`` file (flat ``key=value`` lines) can set lexicon paths,
feature parameters, quantizer parameters, and default input paths; flags
always win over config values.  Every referenced file is checked before
any work starts.  Failures print a single ``ERROR <code>: <detail>``
line and exit nonzero; outputs are written atomically so parallel runs
(``--jobs``) never produce partial files.  ``XLING_LOG`` in
{error, info, debug} controls stderr logging.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import regulator, tensorio
from .audio import read_wav
from .corpus import (
    DatasetSpec,
    balance_report,
    build_manifest,
    parse_alignment,
    write_manifest,
    read_manifest,
)
from .errors import (
    BadConfigError,
    LengthMismatchError,
    ParseError,
    XlingError,
)
from .features import (
    ENERGY,
    LOG,
    FeatureConfig,
    QuantizerConfig,
    average_by_phoneme,
    energy_per_frame,
    mel_spectrogram,
    pitch_per_frame,
    quantize,
)
from .lexicon import (
    Lexicon,
    dump_phoneme_sequence,
    inventory_ids,
    load_phoneme_sequence,
    text_to_phoneme_sequence,
)
from .model import (
    Inference,
    ModelConfig,
    TeacherForced,
    forward as model_forward,
    init_weights,
    save_weights,
)

log = logging.getLogger("xling")

_FEATURE_KEYS = {
    "sample_rate": int,
    "win_ms": int,
    "hop_ms": int,
    "n_mels": int,
    "fft_size": int,
    "fmin": float,
    "fmax": float,
    "log_floor": float,
    "f0_min": float,
    "f0_max": float,
    "voicing_threshold": float,
}
_LEXICON_KEYS = ("en_dict", "cn_dict", "ipa_dict", "ipa_inventory")
_PATH_KEYS = _LEXICON_KEYS + ("model_config", "dataset_spec", "stats")


def _setup_logging() -> None:
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    name = os.environ.get("XLING_LOG", "error")
    if name not in levels:
        raise BadConfigError(f"XLING_LOG must be one of {sorted(levels)}, got {name!r}")
    logging.basicConfig(
        level=levels[name], stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


def load_pipeline_config(path) -> dict:
    """Flat key=value config; every referenced path must already exist."""
    values = {}
    for line_no, raw in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError("expected key=value", path=path, line=line_no)
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    for key in _PATH_KEYS:
        if key in values and not Path(values[key]).is_file():
            raise BadConfigError(f"{key} points to missing file {values[key]!r}")
    return values


def _feature_config(cfg: dict) -> FeatureConfig:
    kwargs = {}
    for key, cast in _FEATURE_KEYS.items():
        if key in cfg:
            kwargs[key] = cast(cfg[key])
    return FeatureConfig(**kwargs)


def _lexicon(cfg: dict) -> Lexicon:
    if any(key in cfg for key in _LEXICON_KEYS):
        missing = [key for key in _LEXICON_KEYS if key not in cfg]
        if missing:
            raise BadConfigError(f"config overrides lexicon paths but lacks {missing}")
        return Lexicon.load(
            cfg["en_dict"], cfg["cn_dict"], cfg["ipa_dict"], cfg["ipa_inventory"]
        )
    return Lexicon.load_default()


def _out_dir(args, cfg: dict) -> Path:
    out = args.out or cfg.get("out_dir") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_atomic_tensor(path: Path, values) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tensorio.write_tensor(tmp, values)
    os.replace(tmp, path)


def _write_atomic_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _parse_int_list(value: str | None, file_value: str | None, what: str) -> list:
    if (value is None) == (file_value is None):
        raise BadConfigError(f"provide exactly one of --{what} / --{what}-file")
    if value is not None:
        parts = [p for p in value.replace(",", " ").split() if p]
    else:
        parts = Path(file_value).read_text(encoding="utf-8").split()
    try:
        return [int(p) for p in parts]
    except ValueError as exc:
        raise BadConfigError(f"bad integer in {what}: {exc}") from exc


# ----------------------------------------------------------------- g2p

def _cmd_g2p(args, cfg: dict) -> int:
    lexicon = _lexicon(cfg)
    if (args.text is None) == (args.text_file is None):
        raise BadConfigError("provide exactly one of --text / --text-file")
    if args.text is not None:
        text, name = args.text, (args.name or "text")
    else:
        text = Path(args.text_file).read_text(encoding="utf-8").strip()
        name = args.name or Path(args.text_file).stem
    ps = text_to_phoneme_sequence(text, lexicon)
    out = _out_dir(args, cfg) / f"{name}.phn"
    tmp = out.with_name(out.name + ".tmp")
    dump_phoneme_sequence(ps, tmp)
    os.replace(tmp, out)
    log.info("wrote %s (%d phonemes, %d IPA symbols)", out, len(ps.ldp), len(ps.ipa))
    return 0


# ------------------------------------------------------------- regulate

def _cmd_regulate(args, cfg: dict) -> int:
    X = tensorio.read_tensor(args.embeddings)
    lengths = _parse_int_list(args.lengths, args.lengths_file, "lengths")
    out_dir = _out_dir(args, cfg)
    Y = regulator.aggregate(X, lengths)
    _write_atomic_tensor(out_dir / "aggregated.xlf", Y)
    log.info("aggregated %s -> %s", X.shape, Y.shape)
    if args.durations or args.durations_file:
        durations = _parse_int_list(args.durations, args.durations_file, "durations")
        F = regulator.expand(Y, durations)
        _write_atomic_tensor(out_dir / "expanded.xlf", F)
        log.info("expanded %s -> %s", Y.shape, F.shape)
    return 0


# ------------------------------------------------------------- features

def _fit_durations_to_frames(durations: list, n_frames: int) -> list:
    """Absorb the aligner-vs-feature off-by-a-frame difference.

    Alignments are tolerant to +-2 frames against the audio; the feature
    grid (center padding) has one extra frame.  The difference is folded
    into the last phoneme so the averaged tracks stay total.
    """
    delta = n_frames - sum(durations)
    if delta == 0:
        return durations
    if abs(delta) > 2 or not durations:
        raise LengthMismatchError(
            f"alignment covers {sum(durations)} frames but features have {n_frames}"
        )
    adjusted = list(durations)
    for i in range(len(adjusted) - 1, -1, -1):
        if adjusted[i] + delta >= 0:
            adjusted[i] += delta
            return adjusted
        delta += adjusted[i]
        adjusted[i] = 0
    raise LengthMismatchError("durations too short to absorb frame difference")


@dataclass(frozen=True)
class FeatureTask:
    utt_id: str
    wav_path: str
    alignment_path: str | None
    out_dir: str
    feature_cfg: FeatureConfig
    quantizer_cfg: QuantizerConfig | None


def _extract_one(task: FeatureTask) -> str:
    audio = read_wav(task.wav_path, expected_rate=task.feature_cfg.sample_rate)
    out_dir = Path(task.out_dir)
    mel = mel_spectrogram(audio, task.feature_cfg)
    energy = energy_per_frame(audio, task.feature_cfg)
    pitch = pitch_per_frame(audio, task.feature_cfg)
    _write_atomic_tensor(out_dir / f"{task.utt_id}.mel.xlf", mel.frames)
    _write_atomic_tensor(out_dir / f"{task.utt_id}.energy.xlf", energy.values)
    _write_atomic_tensor(out_dir / f"{task.utt_id}.pitch.xlf", pitch.values)
    if task.alignment_path is not None:
        record = parse_alignment(task.alignment_path, utt_id=task.utt_id)
        durations = _fit_durations_to_frames(
            list(record.frame_durations), energy.values.size
        )
        energy_avg = average_by_phoneme(energy, durations)
        pitch_avg = average_by_phoneme(pitch, durations)
        _write_atomic_tensor(out_dir / f"{task.utt_id}.energy_avg.xlf", energy_avg)
        _write_atomic_tensor(out_dir / f"{task.utt_id}.pitch_avg.xlf", pitch_avg)
        if task.quantizer_cfg is not None:
            indices = quantize(energy_avg, task.quantizer_cfg)
            _write_atomic_tensor(
                out_dir / f"{task.utt_id}.energy_q.xlf", indices.astype(np.float64)
            )
    return task.utt_id


def _read_stats(path) -> dict:
    stats = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, value = line.split("=", 1)
        stats[key] = float(value)
    return stats


def _quantizer_from(args, cfg: dict) -> QuantizerConfig | None:
    stats_path = args.stats or cfg.get("stats")
    if stats_path is None:
        return None
    stats = _read_stats(stats_path)
    return QuantizerConfig(
        v_min=stats["energy_min"],
        v_max=stats["energy_max"],
        n_bins=int(cfg.get("quantizer_bins", 256)),
        scale=cfg.get("quantizer_scale", LOG),
    )


def _cmd_features(args, cfg: dict) -> int:
    feature_cfg = _feature_config(cfg)
    quantizer_cfg = _quantizer_from(args, cfg)
    out_dir = _out_dir(args, cfg)
    tasks = []
    if args.manifest:
        for entry in read_manifest(args.manifest):
            tasks.append(
                FeatureTask(entry.utt_id, entry.audio_path, entry.alignment_path,
                            str(out_dir), feature_cfg, quantizer_cfg)
            )
    elif args.wav:
        utt_id = args.utt_id or Path(args.wav).stem
        tasks.append(
            FeatureTask(utt_id, args.wav, args.alignment, str(out_dir),
                        feature_cfg, quantizer_cfg)
        )
    else:
        raise BadConfigError("provide --wav or --manifest")
    jobs = max(1, args.jobs)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for utt_id in pool.map(_extract_one, tasks):
                log.info("extracted %s", utt_id)
    else:
        for task in tasks:
            _extract_one(task)
            log.info("extracted %s", task.utt_id)
    return 0


# ---------------------------------------------------------------- stats

def _stat_one(task: FeatureTask) -> tuple:
    audio = read_wav(task.wav_path, expected_rate=task.feature_cfg.sample_rate)
    energy = energy_per_frame(audio, task.feature_cfg).values
    pitch = pitch_per_frame(audio, task.feature_cfg).values
    positive = energy[energy > 0]
    voiced = pitch[pitch > 0]
    return (
        float(positive.min()) if positive.size else np.inf,
        float(energy.max()) if energy.size else -np.inf,
        float(voiced.min()) if voiced.size else np.inf,
        float(voiced.max()) if voiced.size else -np.inf,
        energy.size,
        voiced.size,
    )


def _cmd_stats(args, cfg: dict) -> int:
    feature_cfg = _feature_config(cfg)
    entries = read_manifest(args.manifest)
    if not entries:
        raise ParseError("manifest is empty", path=args.manifest)
    tasks = [
        FeatureTask(e.utt_id, e.audio_path, None, ".", feature_cfg, None)
        for e in entries
    ]
    jobs = max(1, args.jobs)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_stat_one, tasks))
    else:
        results = [_stat_one(t) for t in tasks]
    energy_min = min(r[0] for r in results)
    energy_max = max(r[1] for r in results)
    pitch_min = min(r[2] for r in results)
    pitch_max = max(r[3] for r in results)
    n_frames = sum(r[4] for r in results)
    n_voiced = sum(r[5] for r in results)
    if not np.isfinite(energy_min) or not np.isfinite(energy_max):
        raise BadConfigError("corpus has no nonzero energy frames")
    out = _out_dir(args, cfg) / "stats.txt"
    lines = [
        f"energy_min={energy_min!r}",
        f"energy_max={energy_max!r}",
        f"pitch_min={pitch_min!r}" if np.isfinite(pitch_min) else "pitch_min=0.0",
        f"pitch_max={pitch_max!r}" if np.isfinite(pitch_max) else "pitch_max=0.0",
        f"n_frames={n_frames}",
        f"n_voiced_frames={n_voiced}",
    ]
    _write_atomic_text(out, "\n".join(lines) + "\n")
    log.info("wrote %s over %d utterances", out, len(entries))
    return 0


# -------------------------------------------------------------- forward

def _cmd_forward(args, cfg: dict) -> int:
    lexicon = _lexicon(cfg)
    ps = load_phoneme_sequence(args.phonemes)
    ids_map = inventory_ids(lexicon)
    try:
        ids = [ids_map[symbol] for symbol in ps.ipa]
    except KeyError as exc:
        raise ParseError(f"IPA symbol {exc.args[0]!r} not in inventory",
                         path=args.phonemes) from exc

    model_cfg_path = args.model_config or cfg.get("model_config")
    if model_cfg_path is not None:
        model_cfg = ModelConfig.from_file(model_cfg_path)
    else:
        model_cfg = ModelConfig(
            n_ipa_symbols=len(ids_map), n_speakers=args.n_speakers
        )
    weights = init_weights(model_cfg, args.seed)

    if args.alignment is not None:
        record = parse_alignment(args.alignment)
        if record.ldp_labels != tuple(sym.label for sym in ps.ldp):
            raise LengthMismatchError(
                "alignment phoneme labels do not match the phoneme sequence"
            )
        pitch = _read_vector(args.pitch_avg, len(ps.ldp), "pitch")
        energy = _read_vector(args.energy_avg, len(ps.ldp), "energy")
        mode = TeacherForced(record.frame_durations, tuple(pitch), tuple(energy))
    else:
        mode = Inference()

    out = model_forward(weights, ids, ps.lengths, args.speaker, mode)
    out_dir = _out_dir(args, cfg)
    name = Path(args.phonemes).stem
    _write_atomic_tensor(out_dir / f"{name}.mel_pred.xlf", out.mel_pred)
    _write_atomic_tensor(out_dir / f"{name}.dur_pred.xlf", out.dur_pred)
    _write_atomic_tensor(out_dir / f"{name}.pitch_pred.xlf", out.pitch_pred)
    _write_atomic_tensor(out_dir / f"{name}.energy_pred.xlf", out.energy_pred)
    lines = [f"{stage}\t{'x'.join(str(d) for d in shape)}" for stage, shape in out.trace]
    lines.append("durations_used\t" + " ".join(str(d) for d in out.durations_used))
    _write_atomic_text(out_dir / f"{name}.trace.txt", "\n".join(lines) + "\n")
    if args.dump_weights:
        tmp = Path(args.dump_weights + ".tmp")
        save_weights(tmp, weights)
        os.replace(tmp, args.dump_weights)
    log.info("forward %s: mel %s", name, out.mel_pred.shape)
    return 0


def _read_vector(path, expected: int, what: str) -> np.ndarray:
    if path is None:
        return np.zeros(expected)
    values = tensorio.read_tensor(path).reshape(-1)
    if values.size != expected:
        raise LengthMismatchError(
            f"{what} vector has {values.size} values, expected {expected}"
        )
    return values


# ------------------------------------------------------------- manifest

def _cmd_manifest(args, cfg: dict) -> int:
    spec_path = args.spec or cfg.get("dataset_spec")
    if spec_path is None:
        raise BadConfigError("provide --spec or dataset_spec in the config")
    spec = DatasetSpec.load(spec_path)
    entries = build_manifest(spec, args.roots, jobs=max(1, args.jobs))
    out_dir = _out_dir(args, cfg)
    manifest_path = out_dir / "manifest.txt"
    tmp = manifest_path.with_name(manifest_path.name + ".tmp")
    write_manifest(entries, tmp)
    os.replace(tmp, manifest_path)
    report = balance_report(entries)
    _write_atomic_text(out_dir / "balance.txt", report.render())
    log.info(
        "manifest %s: %d entries, %.4f h, flags=%s",
        spec.name, len(entries), report.total_hours, report.flags or "none",
    )
    return 0


# ----------------------------------------------------------------- main

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="pipeline config file (key=value lines)")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker pool size for batch commands")
    parser.add_argument("--seed", type=int, default=0, help="PRNG seed (u64)")
    parser.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xling",
                                     description="Cross-lingual TTS frontend pipelines")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("g2p", help="text to phoneme-sequence file")
    _add_common(p)
    p.add_argument("--text", help="literal input text")
    p.add_argument("--text-file", help="read input text from a file")
    p.add_argument("--name", help="output basename (default: text / file stem)")
    p.set_defaults(func=_cmd_g2p)

    p = sub.add_parser("regulate", help="aggregate / expand an embedding tensor")
    _add_common(p)
    p.add_argument("--embeddings", required=True, help=".xlf tensor, rows = IPA symbols")
    p.add_argument("--lengths", help="comma/space separated phoneme lengths")
    p.add_argument("--lengths-file", help="file of whitespace-separated lengths")
    p.add_argument("--durations", help="comma/space separated frame durations")
    p.add_argument("--durations-file", help="file of whitespace-separated durations")
    p.set_defaults(func=_cmd_regulate)

    p = sub.add_parser("features", help="extract mel/energy/pitch (+averaged) tracks")
    _add_common(p)
    p.add_argument("--wav", help="single WAV input")
    p.add_argument("--utt-id", help="utterance id for single-WAV mode")
    p.add_argument("--alignment", help="alignment file for single-WAV mode")
    p.add_argument("--manifest", help="batch over a manifest file")
    p.add_argument("--stats", help="stats.txt from the stats command (enables quantization)")
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("stats", help="corpus-wide energy/pitch ranges")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("forward", help="run the deterministic model stub")
    _add_common(p)
    p.add_argument("--phonemes", required=True, help=".phn file from g2p")
    p.add_argument("--model-config", help="ModelConfig key=value file")
    p.add_argument("--speaker", type=int, default=0)
    p.add_argument("--n-speakers", type=int, default=8,
                   help="speaker table size when no model config is given")
    p.add_argument("--alignment", help="teacher-forced durations")
    p.add_argument("--pitch-avg", help="teacher-forced per-phoneme pitch (.xlf)")
    p.add_argument("--energy-avg", help="teacher-forced per-phoneme energy (.xlf)")
    p.add_argument("--dump-weights", help="also write the weight container here")
    p.set_defaults(func=_cmd_forward)

    p = sub.add_parser("manifest", help="build a manifest and balance report")
    _add_common(p)
    p.add_argument("--spec", help="dataset spec file")
    p.add_argument("--roots", nargs="+", required=True, help="corpus scan roots")
    p.set_defaults(func=_cmd_manifest)

    return parser


def main(argv=None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        cfg = load_pipeline_config(args.config) if args.config else {}
        return args.func(args, cfg)
    except XlingError as exc:
        print(f"ERROR {exc.code}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"ERROR IO: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
