"""Cross-lingual TTS frontend toolkit.

Mixed Mandarin/English text goes to language-dependent phonemes and then
to IPA symbols with per-phoneme lengths (:mod:`xling.lexicon`); the
phoneme length regulator and its adjoint contracts live in
:mod:`xling.regulator`; acoustic supervision features (log-mel, energy,
pitch, phoneme averaging, quantization) in :mod:`xling.features`; a
deterministic forward-only acoustic model in :mod:`xling.model`; dataset
manifest tooling in :mod:`xling.corpus`; and the ``xling`` command-line
driver in :mod:`xling.cli`.
"""

__version__ = "0.1.0"
