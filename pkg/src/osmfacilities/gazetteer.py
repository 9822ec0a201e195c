"""Bilingual facility gazetteer and text folding.

All matching happens on *folded* text: Unicode canonical decomposition,
combining marks stripped, case-folded, every run of non-alphanumeric
characters collapsed to one space. ``"École  primaire"`` and
``"ecole_primaire"`` both fold to ``"ecole primaire"``.
"""

from __future__ import annotations

import csv
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from osmfacilities.errors import ConfigError
from osmfacilities.tags import BuildingClass

WORD = "word"
SUBSTRING = "substring"


def strip_diacritics(text: str) -> str:
    decomposed = unicodedata.normalize("NFD", text)
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch))


@lru_cache(maxsize=1 << 16)
def fold(text: str) -> str:
    text = strip_diacritics(text).casefold()
    out = []
    pending_space = False
    for ch in text:
        if ch.isalnum():
            if pending_space and out:
                out.append(" ")
            pending_space = False
            out.append(ch)
        else:
            pending_space = True
    return "".join(out)


@dataclass(frozen=True)
class LexiconEntry:
    term: str
    language: str
    klass: BuildingClass
    match_mode: str = WORD


@dataclass(frozen=True)
class LexiconMatch:
    klass: BuildingClass
    term: str
    position: int

    @property
    def category(self):
        return self.klass.category


class Lexicon:
    """Ordered gazetteer entries with precomputed lookup tables."""

    def __init__(self, entries):
        self.entries: tuple[LexiconEntry, ...] = tuple(entries)
        seen = set()
        self._words: dict[str, list[int]] = {}
        self._substrings: list[int] = []
        self.max_words = 1
        for i, e in enumerate(self.entries):
            if not e.klass.is_facility:
                raise ConfigError(f"lexicon term {e.term!r} must map to a school or clinic")
            if e.term != fold(e.term) or not e.term:
                raise ConfigError(f"lexicon term {e.term!r} is not in folded form")
            if (e.term, e.language) in seen:
                raise ConfigError(f"duplicate lexicon term {e.term!r} ({e.language})")
            seen.add((e.term, e.language))
            if e.match_mode == WORD:
                self._words.setdefault(e.term, []).append(i)
                self.max_words = max(self.max_words, e.term.count(" ") + 1)
            elif e.match_mode == SUBSTRING:
                self._substrings.append(i)
            else:
                raise ConfigError(f"unknown match mode {e.match_mode!r}")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def candidates(self, folded: str) -> list[tuple[int, int]]:
        """``(entry_index, char_position)`` for every entry found in *folded*."""
        hits = []
        if folded:
            words = folded.split(" ")
            starts = []
            p = 0
            for w in words:
                starts.append(p)
                p += len(w) + 1
            for i in range(len(words)):
                for n in range(1, min(self.max_words, len(words) - i) + 1):
                    gram = " ".join(words[i:i + n])
                    for idx in self._words.get(gram, ()):
                        hits.append((idx, starts[i]))
            for idx in self._substrings:
                pos = folded.find(self.entries[idx].term)
                if pos >= 0:
                    hits.append((idx, pos))
        return hits

    def exact(self, phrase: str) -> LexiconEntry | None:
        """Entry whose term equals the whole folded *phrase*, first in lexicon order."""
        idxs = self._words.get(fold(phrase))
        if idxs:
            return self.entries[idxs[0]]
        folded = fold(phrase)
        for idx in self._substrings:
            if self.entries[idx].term == folded:
                return self.entries[idx]
        return None


def lexicon_match(phrase: str, lexicon: Lexicon) -> LexiconMatch | None:
    """Best gazetteer hit in *phrase*: longest term, then earliest, then lexicon order."""
    hits = lexicon.candidates(fold(phrase))
    if not hits:
        return None
    idx, pos = min(hits, key=lambda h: (-len(lexicon.entries[h[0]].term), h[1], h[0]))
    e = lexicon.entries[idx]
    return LexiconMatch(e.klass, e.term, pos)


def _read_tsv(path: str | Path | None, default_name: str, required: set[str]) -> list[dict]:
    if path is None:
        text = resources.files("osmfacilities.data").joinpath(default_name).read_text(
            encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    rows = csv.DictReader((ln for ln in text.splitlines() if ln and not ln.startswith("#")),
                          delimiter="\t")
    missing = required - set(rows.fieldnames or ())
    if missing:
        raise ConfigError(f"{path or default_name}: missing columns {sorted(missing)}")
    return list(rows)


def load_lexicon(path: str | Path | None = None) -> Lexicon:
    """Load a lexicon TSV (term, language, class, category, match_mode)."""
    entries = []
    for row in _read_tsv(path, "lexicon.tsv", {"term", "language", "class", "category",
                                                 "match_mode"}):
        try:
            klass = BuildingClass.from_names(row["class"], row["category"])
        except ValueError as exc:
            raise ConfigError(f"lexicon term {row['term']!r}: {exc}") from None
        entries.append(LexiconEntry(fold(row["term"]), row["language"].strip(), klass,
                                    row["match_mode"].strip() or WORD))
    return Lexicon(entries)
