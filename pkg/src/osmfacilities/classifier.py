"""Hybrid facility classifier for elements with unstructured tags.

Elements whose structured keys resolve to nothing go through two passes
over the tokens of their leftover tag text:

1. keyword pass: a token that *is* an OSM facility term (``language
   school``, ``hospital``) classifies the element outright;
2. topic pass: every token is labeled person / location / organization /
   miscellaneous by a :class:`TopicModel`; location and organization
   tokens are then searched for gazetteer terms (``Niger hospital`` ->
   hospital).

The topic model is pluggable. :class:`RuleTopicModel` is a deterministic
rule-based stand-in for a pretrained named-entity model.
"""

from __future__ import annotations

import enum
import logging
from collections import Counter
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from typing import Protocol, Union

from osmfacilities.errors import ConfigError, TagParseError
from osmfacilities.gazetteer import (Lexicon, LexiconMatch, _read_tsv, fold, lexicon_match,
                                    load_lexicon, strip_diacritics)
from osmfacilities.geo import centroid
from osmfacilities.pbf.elements import ElementKind, RawElement
from osmfacilities.tags import (UNRESOLVED, BuildingClass, ClassKind, KeySchema, parse_tag_string,
                                split_resolved_unresolved)

log = logging.getLogger(__name__)


class TopicLabel(str, enum.Enum):
    PERSON = "person"
    LOCATION = "location"
    ORGANIZATION = "organization"
    MISCELLANEOUS = "miscellaneous"


class Provenance(str, enum.Enum):
    STRUCTURED_KEY = "structured_key"
    KEYWORD_IN_TEXT = "keyword_in_text"
    TOPIC_MODEL = "topic_model"


class TopicModel(Protocol):
    def label(self, phrase: str) -> TopicLabel: ...


ModelLike = Union[TopicModel, Callable[[str], TopicLabel]]

_GATE = (TopicLabel.LOCATION, TopicLabel.ORGANIZATION)


@dataclass(frozen=True)
class ClassificationOutcome:
    klass: BuildingClass
    provenance: Provenance | None = None
    matched_token: str | None = None
    topic: TopicLabel | None = None
    term: str | None = None

    def __post_init__(self):
        if self.provenance is Provenance.STRUCTURED_KEY and self.matched_token is not None:
            raise ValueError("structured-key outcomes carry no matched token")
        if self.provenance is Provenance.TOPIC_MODEL and self.topic not in _GATE:
            raise ValueError(f"topic-model outcome with topic {self.topic}")


@dataclass(frozen=True)
class FacilityRecord:
    element_id: int
    element_kind: ElementKind
    klass: BuildingClass
    original: BuildingClass
    provenance: Provenance | None = None
    matched_token: str | None = None
    topic: TopicLabel | None = None
    lat: float | None = None
    lon: float | None = None
    admin: tuple[tuple[int, str], ...] = ()

    @property
    def location(self) -> tuple[float, float] | None:
        if self.lat is None or self.lon is None:
            return None
        return (self.lat, self.lon)

    def admin_id(self, level: int) -> str | None:
        for lvl, area_id in self.admin:
            if lvl == level:
                return area_id
        return None

    def sort_key(self):
        return (self.element_kind.value, self.element_id)


# -- reference topic model ---------------------------------------------------

@dataclass(frozen=True)
class TopicRule:
    term: str
    language: str
    topic: TopicLabel
    pattern_kind: str


_PATTERN_KINDS = ("keyword", "honorific", "facility_suffix")
_CACHE_SIZE = 1 << 17
_TOPIC_ORDER = (TopicLabel.PERSON, TopicLabel.ORGANIZATION, TopicLabel.LOCATION)


def load_topic_rules(path=None) -> list[TopicRule]:
    rules = []
    for row in _read_tsv(path, "topic_rules.tsv", {"term", "language", "topic", "pattern_kind"}):
        kind = row["pattern_kind"].strip()
        if kind not in _PATTERN_KINDS:
            raise ConfigError(f"topic rule {row['term']!r}: unknown pattern_kind {kind!r}")
        try:
            topic = TopicLabel(row["topic"].strip().lower())
        except ValueError:
            raise ConfigError(f"topic rule {row['term']!r}: unknown topic {row['topic']!r}")
        rules.append(TopicRule(fold(row["term"]), row["language"].strip(), topic, kind))
    return rules


def _capitalized(word: str) -> bool:
    return bool(word) and word[0].isupper()


class RuleTopicModel:
    """Deterministic four-label tagger built from rule tables and the gazetteer.

    Labels are tried in the order person, organization, location:

    * person: a leading honorific (``Mme``, ``El Hadj``) followed by a
      capitalized word;
    * organization: contains an organization noun (``institut``, ``ONG``);
    * location: contains a gazetteer term or a place noun, or is a run of
      capitalized words ending in a facility noun (``Diallo Complex``).

    Anything else is miscellaneous.
    """

    def __init__(self, rules: Sequence[TopicRule], lexicon: Lexicon):
        self.lexicon = lexicon
        self._keywords: dict[TopicLabel, set[str]] = {t: set() for t in TopicLabel}
        self._honorifics: list[tuple[tuple[str, ...], TopicLabel]] = []
        self._suffixes: list[tuple[tuple[str, ...], TopicLabel]] = []
        self._max_words = 1
        self._cache: dict[str, TopicLabel] = {}
        for r in rules:
            words = tuple(r.term.split(" "))
            if r.pattern_kind == "keyword":
                self._keywords[r.topic].add(r.term)
                self._max_words = max(self._max_words, len(words))
            elif r.pattern_kind == "honorific":
                self._honorifics.append((words, r.topic))
            else:
                self._suffixes.append((words, r.topic))

    def _grams(self, folded: str) -> set[str]:
        words = folded.split(" ") if folded else []
        return {" ".join(words[i:i + n]) for i in range(len(words))
                for n in range(1, min(self._max_words, len(words) - i) + 1)}

    def _honorific(self, raw_words, folded_words, topic: TopicLabel) -> bool:
        for words, t in self._honorifics:
            n = len(words)
            if (t is topic and len(folded_words) > n and tuple(folded_words[:n]) == words
                    and _capitalized(raw_words[n])):
                return True
        return False

    def _suffix(self, raw_words, folded_words, topic: TopicLabel) -> bool:
        for words, t in self._suffixes:
            n = len(words)
            if (t is topic and len(folded_words) > n and tuple(folded_words[-n:]) == words
                    and all(_capitalized(w) for w in raw_words[:-n])):
                return True
        return False

    def label(self, phrase: str) -> TopicLabel:
        topic = self._cache.get(phrase)
        if topic is None:
            topic = self._label(phrase)
            if len(self._cache) < _CACHE_SIZE:
                self._cache[phrase] = topic
        return topic

    def _label(self, phrase: str) -> TopicLabel:
        folded = fold(phrase)
        if not folded:
            return TopicLabel.MISCELLANEOUS
        folded_words = folded.split(" ")
        raw_words = fold_keep_case(phrase).split(" ")
        if len(raw_words) != len(folded_words):
            raw_words = folded_words
        grams = self._grams(folded)
        for topic in _TOPIC_ORDER:
            if (grams & self._keywords[topic]
                    or self._honorific(raw_words, folded_words, topic)
                    or self._suffix(raw_words, folded_words, topic)):
                return topic
            if topic is TopicLabel.LOCATION and self.lexicon.candidates(folded):
                return topic
        return TopicLabel.MISCELLANEOUS

    __call__ = label


def fold_keep_case(text: str) -> str:
    """Like :func:`fold` but without case-folding, for capitalization rules."""
    chars = [ch if ch.isalnum() else " " for ch in strip_diacritics(text)]
    return " ".join("".join(chars).split())


def reference_topic_model(lexicon: Lexicon | None = None, rules=None) -> RuleTopicModel:
    if lexicon is None:
        lexicon = load_lexicon()
    if rules is None:
        rules = load_topic_rules()
    return RuleTopicModel(rules, lexicon)


# -- the two passes ------------------------------------------------------------

def tokenize(text: str, counters: Counter | None = None) -> list[str]:
    """Whole key and value phrases of a tag string, in order."""
    try:
        tags = parse_tag_string(text, counters)
    except TagParseError as exc:
        log.warning("unparseable tag text %r: %s", text[:80], exc)
        if counters is not None:
            counters["unparseable_tag_text"] += 1
        return []
    tokens = []
    for k, v in tags.items():
        tokens += (k, v)
    return tokens


def classify_tokens(tokens: Iterable[str], model: ModelLike,
                    counters: Counter | None = None) -> list[tuple[str, TopicLabel]]:
    label = getattr(model, "label", model)
    out = []
    for tok in tokens:
        try:
            topic = TopicLabel(label(tok))
        except Exception as exc:  # noqa: BLE001 -- external models may fail arbitrarily
            log.warning("topic model failed on %r: %s", tok, exc)
            if counters is not None:
                counters["topic_model_failure"] += 1
            topic = TopicLabel.MISCELLANEOUS
        out.append((tok, topic))
    return out


def _best(hits: list[tuple[int, LexiconMatch, str]]):
    # longest term, then earliest token, then earliest position in token
    return min(hits, key=lambda h: (-len(h[1].term), h[0], h[1].position))


def resolve_unstructured(text: str, model: ModelLike, lexicon: Lexicon,
                         counters: Counter | None = None) -> ClassificationOutcome:
    tokens = tokenize(text, counters)

    hits = []
    for i, tok in enumerate(tokens):
        entry = lexicon.exact(tok)
        if entry is not None:
            hits.append((i, LexiconMatch(entry.klass, entry.term, 0), tok))
    if hits:
        _, m, tok = _best(hits)
        return ClassificationOutcome(m.klass, Provenance.KEYWORD_IN_TEXT, tok, term=m.term)

    hits = []
    topics = {}
    for i, (tok, topic) in enumerate(classify_tokens(tokens, model, counters)):
        if topic in _GATE:
            m = lexicon_match(tok, lexicon)
            if m is not None:
                hits.append((i, m, tok))
                topics[i] = topic
    if hits:
        i, m, tok = _best(hits)
        return ClassificationOutcome(m.klass, Provenance.TOPIC_MODEL, tok, topics[i], m.term)
    return ClassificationOutcome(UNRESOLVED)


def locate(element: RawElement, node_index: dict | None,
           counters: Counter | None = None) -> tuple[float, float] | None:
    if element.kind is ElementKind.NODE:
        return element.lat, element.lon
    if element.kind is ElementKind.WAY:
        try:
            ring = [node_index[r] for r in element.refs]
        except (KeyError, TypeError):
            if counters is not None:
                counters["missing_way_vertex"] += 1
            return None
        return centroid(ring)
    return None


def classify_element(element: RawElement, schema: KeySchema, model: ModelLike,
                     lexicon: Lexicon, node_index: dict | None = None,
                     counters: Counter | None = None) -> FacilityRecord:
    original, leftover = split_resolved_unresolved(element, schema)
    if original.kind is not ClassKind.UNRESOLVED:
        outcome = ClassificationOutcome(original, Provenance.STRUCTURED_KEY)
    else:
        outcome = resolve_unstructured(leftover, model, lexicon, counters)
    point = locate(element, node_index, counters)
    lat, lon = point if point is not None else (None, None)
    return FacilityRecord(element.id, element.kind, outcome.klass, original, outcome.provenance,
                          outcome.matched_token, outcome.topic, lat, lon)
