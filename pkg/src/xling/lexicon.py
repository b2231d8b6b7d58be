"""Mixed Mandarin/English text to IPA phoneme sequences.

The pipeline has three stages: script-aware tokenization, lookup of
language-dependent phonemes (ARPABET for English words, one Pinyin
syllable per hanzi), and decomposition of each language-dependent phoneme
into IPA symbols.  The number of IPA symbols a phoneme decomposes into is
its phoneme length; downstream aggregation relies on these lengths, so
out-of-vocabulary input is a hard error rather than a silent fallback.

Lexicon files are plain UTF-8 text, one ``KEY<TAB>SYM1 SYM2 ...`` entry
per line, ``#`` comments allowed.  The IPA mapping file keys entries as
``EN:K`` / ``CN:hao`` so one file covers both languages.  Stress digits
(EN) and tone digits (CN) live in ``LDPSymbol.meta``, never in the label,
and the IPA mapping ignores them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import OOVError, ParseError, UnmappedLDPError

HAN = "Han"
LATIN = "Latin"
PUNCT = "Punct"

EN = "EN"
CN = "CN"

_LATIN_CHARS = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ'")


def _is_han(ch: str) -> bool:
    return "一" <= ch <= "鿿"


@dataclass(frozen=True)
class Token:
    surface: str
    script: str
    span: tuple

    def __post_init__(self):
        assert self.span[0] < self.span[1], "token span must be non-empty"


@dataclass(frozen=True)
class LDPSymbol:
    """One language-dependent phoneme; meta holds the stress/tone digit."""

    label: str
    language: str
    meta: int | None = None


@dataclass(frozen=True)
class PhonemeSequence:
    """Parallel LDP / IPA / phoneme-length views of one utterance."""

    ldp: tuple
    ipa: tuple
    lengths: tuple

    def __post_init__(self):
        if len(self.ldp) != len(self.lengths):
            raise ValueError("one length per language-dependent phoneme required")
        if sum(self.lengths) != len(self.ipa):
            raise ValueError("lengths must sum to the IPA symbol count")
        if any(n < 1 for n in self.lengths):
            raise ValueError("phoneme lengths must all be >= 1")

    def __len__(self):
        return len(self.ldp)

    def ipa_segments(self):
        """Slice the IPA sequence at cumulative phoneme-length boundaries."""
        out, pos = [], 0
        for n in self.lengths:
            out.append(self.ipa[pos : pos + n])
            pos += n
        return out


def _strip_digits(symbol: str) -> tuple[str, int | None]:
    digits = [c for c in symbol if c.isdigit()]
    label = "".join(c for c in symbol if not c.isdigit())
    return label, (int("".join(digits)) if digits else None)


def _parse_dict_file(path) -> list:
    """Yield (key, symbols, line_no) triples from a lexicon file."""
    entries = []
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "\t" not in line:
            raise ParseError("expected KEY<TAB>SYMBOLS", path=path, line=line_no)
        key, rhs = line.split("\t", 1)
        symbols = rhs.split()
        if not key or not symbols:
            raise ParseError("empty key or symbol list", path=path, line=line_no)
        entries.append((key, symbols, line_no))
    return entries


@dataclass(frozen=True)
class Lexicon:
    """Immutable pronunciation tables; safe to share across threads."""

    en_entries: dict = field(repr=False)
    cn_entries: dict = field(repr=False)
    ipa_entries: dict = field(repr=False)
    inventory: frozenset = field(repr=False)

    @classmethod
    def load(cls, en_path, cn_path, ipa_path, inventory_path) -> "Lexicon":
        inventory = frozenset(
            line.strip()
            for line in Path(inventory_path).read_text(encoding="utf-8").splitlines()
            if line.strip() and not line.startswith("#")
        )

        en_entries = {}
        for key, symbols, _ in _parse_dict_file(en_path):
            word = key.upper()
            if word not in en_entries:  # duplicate keys: first entry wins
                phonemes = []
                for s in symbols:
                    label, stress = _strip_digits(s)
                    phonemes.append(LDPSymbol(label, EN, stress))
                en_entries[word] = tuple(phonemes)

        cn_entries = {}
        for key, symbols, line_no in _parse_dict_file(cn_path):
            if len(key) != 1 or not _is_han(key):
                raise ParseError(f"key {key!r} is not a single hanzi",
                                 path=cn_path, line=line_no)
            if len(symbols) != 1:
                raise ParseError("expected exactly one Pinyin syllable",
                                 path=cn_path, line=line_no)
            if key not in cn_entries:
                label, tone = _strip_digits(symbols[0])
                cn_entries[key] = (LDPSymbol(label, CN, tone),)

        ipa_entries = {}
        for key, symbols, line_no in _parse_dict_file(ipa_path):
            if ":" not in key:
                raise ParseError(f"key {key!r} lacks a LANG: prefix",
                                 path=ipa_path, line=line_no)
            language, label = key.split(":", 1)
            if language not in (EN, CN):
                raise ParseError(f"unknown language {language!r}",
                                 path=ipa_path, line=line_no)
            missing = [s for s in symbols if s not in inventory]
            if missing:
                raise ParseError(f"symbols {missing} not in IPA inventory",
                                 path=ipa_path, line=line_no)
            ipa_entries.setdefault((label, language), tuple(symbols))

        return cls(en_entries, cn_entries, ipa_entries, inventory)

    @classmethod
    def load_default(cls) -> "Lexicon":
        """Load the dictionaries bundled with the package."""
        base = resources.files("xling").joinpath("data")
        return cls.load(
            base / "en_arpabet.dict",
            base / "cn_pinyin.dict",
            base / "ldp_to_ipa.dict",
            base / "ipa_inventory.txt",
        )


def tokenize(text: str) -> list:
    """Split text into Han (single hanzi), Latin (word), and Punct tokens.

    Whitespace separates tokens and is never emitted; every other
    character lands in some token, so token surfaces plus the skipped
    whitespace reconstruct the input exactly.
    """
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif _is_han(ch):
            tokens.append(Token(ch, HAN, (i, i + 1)))
            i += 1
        elif ch in _LATIN_CHARS:
            j = i
            while j < n and text[j] in _LATIN_CHARS:
                j += 1
            surface = text[i:j]
            script = LATIN if any(c.isalpha() for c in surface) else PUNCT
            tokens.append(Token(surface, script, (i, j)))
            i = j
        else:
            j = i
            while j < n and not (
                text[j].isspace() or _is_han(text[j]) or text[j] in _LATIN_CHARS
            ):
                j += 1
            tokens.append(Token(text[i:j], PUNCT, (i, j)))
            i = j
    return tokens


def lookup_ldp(token: Token, lexicon: Lexicon) -> tuple:
    """Return the language-dependent phonemes for one Han or Latin token."""
    if token.script == LATIN:
        entry = lexicon.en_entries.get(token.surface.upper())
        if entry is None:
            raise OOVError(token.surface, EN, offset=token.span[0])
        return entry
    if token.script == HAN:
        entry = lexicon.cn_entries.get(token.surface)
        if entry is None:
            raise OOVError(token.surface, CN, offset=token.span[0])
        return entry
    raise ValueError(f"no phonemes for {token.script} token {token.surface!r}")


def ldp_to_ipa(ldp: LDPSymbol, lexicon: Lexicon) -> tuple:
    """Return (IPA symbols, phoneme length) for one LDP; pure lookup."""
    symbols = lexicon.ipa_entries.get((ldp.label, ldp.language))
    if symbols is None:
        raise UnmappedLDPError(ldp.label, ldp.language)
    return symbols, len(symbols)


def inventory_ids(lexicon: Lexicon) -> dict:
    """Stable symbol -> id mapping: sorted inventory order."""
    return {symbol: i for i, symbol in enumerate(sorted(lexicon.inventory))}


def dump_phoneme_sequence(ps: PhonemeSequence, path) -> None:
    """One LDP per line: label, language, meta (- if none), length, IPA."""
    lines = ["# label\tlanguage\tmeta\tlength\tipa"]
    pos = 0
    for sym, n in zip(ps.ldp, ps.lengths):
        ipa = " ".join(ps.ipa[pos : pos + n])
        pos += n
        meta = "-" if sym.meta is None else str(sym.meta)
        lines.append(f"{sym.label}\t{sym.language}\t{meta}\t{n}\t{ipa}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_phoneme_sequence(path) -> PhonemeSequence:
    ldp, ipa, lengths = [], [], []
    for line_no, raw in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise ParseError("expected 5 tab-separated fields", path=path, line=line_no)
        label, language, meta, length, symbols = parts
        if language not in (EN, CN):
            raise ParseError(f"unknown language {language!r}", path=path, line=line_no)
        try:
            n = int(length)
        except ValueError as exc:
            raise ParseError(str(exc), path=path, line=line_no) from exc
        symbol_list = symbols.split()
        if n != len(symbol_list):
            raise ParseError(
                f"length {n} does not match {len(symbol_list)} IPA symbols",
                path=path,
                line=line_no,
            )
        ldp.append(LDPSymbol(label, language, None if meta == "-" else int(meta)))
        ipa.extend(symbol_list)
        lengths.append(n)
    return PhonemeSequence(tuple(ldp), tuple(ipa), tuple(lengths))


def text_to_phoneme_sequence(text: str, lexicon: Lexicon) -> PhonemeSequence:
    """Full frontend: text in, parallel LDP/IPA/length sequences out."""
    ldp_out, ipa_out, lengths = [], [], []
    for token in tokenize(text):
        if token.script == PUNCT:
            continue
        for ldp in lookup_ldp(token, lexicon):
            try:
                symbols, length = ldp_to_ipa(ldp, lexicon)
            except UnmappedLDPError as exc:
                raise UnmappedLDPError(
                    ldp.label, ldp.language, offset=token.span[0]
                ) from exc
            ldp_out.append(ldp)
            ipa_out.extend(symbols)
            lengths.append(length)
    return PhonemeSequence(tuple(ldp_out), tuple(ipa_out), tuple(lengths))
