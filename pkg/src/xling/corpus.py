"""Dataset manifests, alignment files, and balance reporting.

File formats (all UTF-8, ``#`` comments):

* alignment: one phoneme per line, ``LABEL<TAB>frames`` with frames in
  10 ms units; the frame total must sit within +-2 frames of the audio
  duration.
* manifest: one utterance per line,
  ``utt_id|audio_path|text|speaker|language|gender|duration_sec|alignment_path``.
* dataset spec: a ``name<TAB>value`` line, then one member per line as
  ``speaker_id<TAB>language<TAB>gender<TAB>max_hours``.

`build_manifest` scans per-speaker directories (``<root>/<speaker_id>/``
holding ``<utt>.wav`` + ``<utt>.txt`` + ``<utt>.align``), validates every
alignment, and truncates each speaker at its hour cap in lexicographic
filename order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .audio import wav_duration_sec
from .errors import (
    DurationMismatchError,
    EmptyManifestError,
    MissingSpeakerError,
    ParseError,
)

FRAMES_PER_SECOND = 100  # 10 ms alignment frames
DURATION_TOLERANCE_FRAMES = 2
IMBALANCE_SHARE = 0.60

LANGUAGES = ("CN", "EN")
GENDERS = ("M", "F")


@dataclass(frozen=True)
class AlignmentRecord:
    utt_id: str
    ldp_labels: tuple
    frame_durations: tuple


@dataclass(frozen=True)
class ManifestEntry:
    utt_id: str
    audio_path: str
    text: str
    speaker_id: str
    language: str
    gender: str
    duration_sec: float
    alignment_path: str


@dataclass(frozen=True)
class SpeakerSpec:
    speaker_id: str
    language: str
    gender: str
    max_hours: float


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    members: tuple

    def __post_init__(self):
        ids = [m.speaker_id for m in self.members]
        if len(set(ids)) != len(ids):
            raise ParseError(f"duplicate speaker ids in dataset {self.name!r}")
        for m in self.members:
            if m.language not in LANGUAGES:
                raise ParseError(f"unknown language {m.language!r}")
            if m.gender not in GENDERS:
                raise ParseError(f"unknown gender {m.gender!r}")
            if not m.max_hours > 0:
                raise ParseError(f"max_hours must be positive for {m.speaker_id}")

    @classmethod
    def load(cls, path) -> "DatasetSpec":
        name = None
        members = []
        for line_no, raw in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1
        ):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if parts[0] == "name":
                if len(parts) != 2:
                    raise ParseError("expected name<TAB>value", path=path, line=line_no)
                name = parts[1]
            elif len(parts) == 4:
                try:
                    members.append(SpeakerSpec(parts[0], parts[1], parts[2], float(parts[3])))
                except ValueError as exc:
                    raise ParseError(str(exc), path=path, line=line_no) from exc
            else:
                raise ParseError(
                    "expected speaker<TAB>language<TAB>gender<TAB>max_hours",
                    path=path,
                    line=line_no,
                )
        if name is None:
            name = Path(path).stem
        if not members:
            raise ParseError("dataset spec has no members", path=path)
        return cls(name, tuple(members))

    def save(self, path) -> None:
        lines = [f"name\t{self.name}"]
        for m in self.members:
            lines.append(f"{m.speaker_id}\t{m.language}\t{m.gender}\t{m.max_hours}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_alignment(path, utt_id: str | None = None) -> AlignmentRecord:
    if utt_id is None:
        utt_id = Path(path).stem
    labels, durations = [], []
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "\t" not in line:
            raise ParseError("expected LABEL<TAB>frames", path=path, line=line_no)
        label, frames = line.split("\t", 1)
        if not label:
            raise ParseError("empty phoneme label", path=path, line=line_no)
        try:
            n = int(frames)
        except ValueError as exc:
            raise ParseError(f"bad frame count {frames!r}", path=path, line=line_no) from exc
        if n < 0:
            raise ParseError("negative frame count", path=path, line=line_no)
        labels.append(label)
        durations.append(n)
    if not labels:
        raise ParseError("alignment file has no entries", path=path)
    return AlignmentRecord(utt_id, tuple(labels), tuple(durations))


def check_duration(record: AlignmentRecord, duration_sec: float) -> None:
    """Frame total must match the audio duration within +-2 frames."""
    expected = round(duration_sec * FRAMES_PER_SECOND)
    total = sum(record.frame_durations)
    if abs(total - expected) > DURATION_TOLERANCE_FRAMES:
        raise DurationMismatchError(
            f"{record.utt_id}: alignment covers {total} frames but audio is "
            f"{duration_sec:.3f}s (~{expected} frames)"
        )


def _scan_speaker(member: SpeakerSpec, roots) -> list:
    speaker_dir = None
    for root in roots:
        candidate = Path(root) / member.speaker_id
        if candidate.is_dir():
            speaker_dir = candidate
            break
    if speaker_dir is None:
        raise MissingSpeakerError(
            f"speaker {member.speaker_id!r} not found under {[str(r) for r in roots]}"
        )
    entries = []
    budget = member.max_hours * 3600.0 + 1e-9  # epsilon absorbs float accumulation
    total = 0.0
    for wav_path in sorted(speaker_dir.glob("*.wav")):
        stem = wav_path.stem
        text_path = wav_path.with_suffix(".txt")
        align_path = wav_path.with_suffix(".align")
        if not text_path.is_file():
            raise ParseError(f"missing transcript for {wav_path}", path=text_path)
        if not align_path.is_file():
            raise ParseError(f"missing alignment for {wav_path}", path=align_path)
        duration = wav_duration_sec(wav_path)
        if total + duration > budget:
            break  # hour cap reached; later files are dropped
        utt_id = f"{member.speaker_id}_{stem}"
        record = parse_alignment(align_path, utt_id=utt_id)
        check_duration(record, duration)
        entries.append(
            ManifestEntry(
                utt_id=utt_id,
                audio_path=str(wav_path),
                text=text_path.read_text(encoding="utf-8").strip(),
                speaker_id=member.speaker_id,
                language=member.language,
                gender=member.gender,
                duration_sec=duration,
                alignment_path=str(align_path),
            )
        )
        total += duration
    return entries


def build_manifest(spec: DatasetSpec, scan_roots, jobs: int = 1) -> list:
    """Scan roots for every member; deterministic merge in member order."""
    roots = list(scan_roots)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_member = list(pool.map(lambda m: _scan_speaker(m, roots), spec.members))
    else:
        per_member = [_scan_speaker(m, roots) for m in spec.members]
    entries = [entry for member_entries in per_member for entry in member_entries]
    return entries


def write_manifest(entries, path) -> None:
    seen = set()
    lines = []
    for e in entries:
        if e.utt_id in seen:
            raise ParseError(f"duplicate utt_id {e.utt_id!r} in manifest")
        seen.add(e.utt_id)
        fields = [
            e.utt_id,
            e.audio_path,
            e.text,
            e.speaker_id,
            e.language,
            e.gender,
            repr(e.duration_sec),
            e.alignment_path,
        ]
        for value in fields:
            if "|" in value:
                raise ParseError(f"manifest field may not contain '|': {value!r}")
        lines.append("|".join(fields))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_manifest(path) -> list:
    entries = []
    seen = set()
    for line_no, raw in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = raw.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        parts = line.split("|")
        if len(parts) != 8:
            raise ParseError(f"expected 8 fields, got {len(parts)}", path=path, line=line_no)
        try:
            duration = float(parts[6])
        except ValueError as exc:
            raise ParseError(str(exc), path=path, line=line_no) from exc
        if parts[0] in seen:
            raise ParseError(f"duplicate utt_id {parts[0]!r}", path=path, line=line_no)
        seen.add(parts[0])
        entries.append(
            ManifestEntry(parts[0], parts[1], parts[2], parts[3], parts[4], parts[5],
                          duration, parts[7])
        )
    return entries


@dataclass(frozen=True)
class BalanceReport:
    hours: dict  # (language, gender) -> hours
    total_hours: float
    flags: tuple  # e.g. ("language:CN",) when a share exceeds 60%

    @property
    def flagged(self) -> bool:
        return bool(self.flags)

    def share(self, axis: str, value: str) -> float:
        index = 0 if axis == "language" else 1
        hours = sum(h for key, h in self.hours.items() if key[index] == value)
        return hours / self.total_hours

    def render(self) -> str:
        lines = [f"total_hours\t{self.total_hours:.6f}"]
        for (language, gender), hours in sorted(self.hours.items()):
            lines.append(f"hours\t{language}\t{gender}\t{hours:.6f}")
        for language in LANGUAGES:
            lines.append(f"share_language\t{language}\t{self.share('language', language):.6f}")
        for gender in GENDERS:
            lines.append(f"share_gender\t{gender}\t{self.share('gender', gender):.6f}")
        lines.append("flags\t" + (",".join(self.flags) if self.flags else "none"))
        return "\n".join(lines) + "\n"


def balance_report(entries) -> BalanceReport:
    """Per-(language, gender) hour totals, flagging shares above 60%."""
    if not entries:
        raise EmptyManifestError("cannot report balance of an empty manifest")
    hours = {}
    for e in entries:
        key = (e.language, e.gender)
        hours[key] = hours.get(key, 0.0) + e.duration_sec / 3600.0
    total = sum(hours.values())
    flags = []
    for language in LANGUAGES:
        if sum(h for k, h in hours.items() if k[0] == language) / total > IMBALANCE_SHARE:
            flags.append(f"language:{language}")
    for gender in GENDERS:
        if sum(h for k, h in hours.items() if k[1] == gender) / total > IMBALANCE_SHARE:
            flags.append(f"gender:{gender}")
    return BalanceReport(hours, total, tuple(flags))
