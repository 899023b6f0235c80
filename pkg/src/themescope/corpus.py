"""Corpus ingestion, validation, keyword filtering, dedup, and event windows."""

from __future__ import annotations

import csv
import datetime as dt
import json
import unicodedata
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np


class Platform(Enum):
    PAID_ADS = "PAID_ADS"
    PUBLIC_POSTS = "PUBLIC_POSTS"


class Stance(Enum):
    PRO_CLIMATE = "PRO_CLIMATE"
    PRO_ENERGY = "PRO_ENERGY"
    NEUTRAL = "NEUTRAL"


class CorpusError(ValueError):
    """Raised for malformed records, duplicate ids, or misaligned inputs."""


@dataclass(frozen=True)
class Document:
    id: str
    platform: Platform
    text: str
    timestamp: dt.datetime
    advertiser: Optional[str] = None
    impressions_low: Optional[int] = None
    impressions_high: Optional[int] = None
    spend_low: Optional[float] = None
    spend_high: Optional[float] = None
    stance: Optional[Stance] = None

    def __post_init__(self):
        if not self.text.strip():
            raise CorpusError(f"document {self.id!r}: text empty after trim")
        for name, lo, hi in (
            ("impressions", self.impressions_low, self.impressions_high),
            ("spend", self.spend_low, self.spend_high),
        ):
            for v in (lo, hi):
                if v is not None and v < 0:
                    raise CorpusError(f"document {self.id!r}: negative {name}")
            if lo is not None and hi is not None and lo > hi:
                raise CorpusError(
                    f"document {self.id!r}: {name} low bound exceeds high bound"
                )

    def date(self) -> dt.date:
        return self.timestamp.date()


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    source_name: str = ""
    keyword_list_version: str = ""

    def __post_init__(self):
        seen = set()
        for doc in self.documents:
            if doc.id in seen:
                raise CorpusError(f"duplicate document id {doc.id!r}")
            seen.add(doc.id)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def ids(self) -> list[str]:
        return [d.id for d in self.documents]

    def texts(self) -> list[str]:
        return [d.text for d in self.documents]

    def get(self, doc_id: str) -> Document:
        for d in self.documents:
            if d.id == doc_id:
                return d
        raise KeyError(doc_id)


@dataclass(frozen=True)
class KeywordList:
    phrases: tuple[str, ...]
    version: str = "unversioned"

    def __post_init__(self):
        if not self.phrases:
            raise CorpusError("keyword list is empty")
        lowered = [p.lower() for p in self.phrases]
        if len(set(lowered)) != len(lowered):
            raise CorpusError("keyword list contains duplicate phrases")

    @classmethod
    def from_file(cls, path: str | Path, version: str | None = None) -> "KeywordList":
        path = Path(path)
        phrases = []
        for line in path.read_text(encoding="utf-8").splitlines():
            phrase = line.strip().lower()
            if phrase:
                phrases.append(phrase)
        return cls(tuple(phrases), version=version or path.stem)


_DOC_FIELDS = (
    "id", "platform", "text", "timestamp", "advertiser",
    "impressions_low", "impressions_high", "spend_low", "spend_high", "stance",
)


def _parse_timestamp(raw: str) -> dt.datetime:
    s = raw.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    ts = dt.datetime.fromisoformat(s)
    if ts.tzinfo is not None:
        ts = ts.astimezone(dt.timezone.utc).replace(tzinfo=None)
    return ts


def _parse_record(rec: dict, index: int) -> Document:
    def fail(fieldname: str, why: str):
        raise CorpusError(f"record {index}: field {fieldname!r} {why}")

    for required in ("id", "platform", "text", "timestamp"):
        if rec.get(required) in (None, ""):
            fail(required, "is missing")
    try:
        platform = Platform(rec["platform"])
    except ValueError:
        fail("platform", f"has unknown value {rec['platform']!r}")
    try:
        ts = _parse_timestamp(str(rec["timestamp"]))
    except ValueError:
        fail("timestamp", f"does not parse as ISO-8601: {rec['timestamp']!r}")

    def opt_int(name):
        v = rec.get(name)
        if v in (None, ""):
            return None
        try:
            return int(v)
        except (TypeError, ValueError):
            fail(name, f"is not an integer: {v!r}")

    def opt_float(name):
        v = rec.get(name)
        if v in (None, ""):
            return None
        try:
            return float(v)
        except (TypeError, ValueError):
            fail(name, f"is not a number: {v!r}")

    stance = None
    if rec.get("stance") not in (None, ""):
        try:
            stance = Stance(rec["stance"])
        except ValueError:
            fail("stance", f"has unknown value {rec['stance']!r}")
    try:
        return Document(
            id=str(rec["id"]),
            platform=platform,
            text=str(rec["text"]),
            timestamp=ts,
            advertiser=rec.get("advertiser") or None,
            impressions_low=opt_int("impressions_low"),
            impressions_high=opt_int("impressions_high"),
            spend_low=opt_float("spend_low"),
            spend_high=opt_float("spend_high"),
            stance=stance,
        )
    except CorpusError as exc:
        raise CorpusError(f"record {index}: {exc}") from None


def load_corpus(path: str | Path, format: str = "JSONL",
                source_name: str = "") -> Corpus:
    """Load and validate a corpus file, sorted by (timestamp, id)."""
    path = Path(path)
    fmt = format.upper()
    records: list[dict] = []
    if fmt == "JSONL":
        with path.open(encoding="utf-8") as fh:
            for i, line in enumerate(fh):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"record {i}: invalid JSON ({exc})") from None
                records.append(rec)
    elif fmt == "CSV":
        with path.open(encoding="utf-8", newline="") as fh:
            records = list(csv.DictReader(fh))
    else:
        raise CorpusError(f"unknown corpus format {format!r}")
    docs = [_parse_record(rec, i) for i, rec in enumerate(records)]
    docs.sort(key=lambda d: (d.timestamp, d.id))
    return Corpus(tuple(docs), source_name=source_name or path.stem)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for doc in corpus:
            rec = {
                "id": doc.id,
                "platform": doc.platform.value,
                "text": doc.text,
                "timestamp": doc.timestamp.isoformat(),
            }
            if doc.advertiser is not None:
                rec["advertiser"] = doc.advertiser
            for name in ("impressions_low", "impressions_high",
                         "spend_low", "spend_high"):
                v = getattr(doc, name)
                if v is not None:
                    rec[name] = v
            if doc.stance is not None:
                rec["stance"] = doc.stance.value
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def filter_by_keywords(corpus: Corpus, keywords: KeywordList) -> Corpus:
    """Keep documents whose NFC-folded text contains any keyword phrase."""
    phrases = [unicodedata.normalize("NFC", p).casefold() for p in keywords.phrases]
    kept = []
    for doc in corpus:
        hay = unicodedata.normalize("NFC", doc.text).casefold()
        if any(p in hay for p in phrases):
            kept.append(doc)
    return Corpus(tuple(kept), source_name=corpus.source_name,
                  keyword_list_version=keywords.version)


def deduplicate(corpus: Corpus, vectors, threshold: float = 0.80) -> Corpus:
    """Greedy near-duplicate removal in (timestamp, id) order.

    A document survives iff its max cosine similarity against all previously
    kept documents is strictly below ``threshold``.
    """
    if list(vectors.ids) != corpus.ids():
        raise CorpusError("vectors are not id-aligned with the corpus")
    if not 0.0 < threshold <= 1.0:
        raise CorpusError(f"dedup threshold {threshold} outside (0, 1]")
    if len(corpus) == 0:
        return corpus
    mat = np.asarray(vectors.matrix, dtype=np.float64)
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms == 0):
        raise CorpusError("zero-norm embedding row; cannot compute cosine")
    unit = mat / norms[:, None]
    kept_idx: list[int] = []
    for i in range(len(corpus)):
        if kept_idx:
            sims = unit[kept_idx] @ unit[i]
            if float(np.max(sims)) >= threshold:
                continue
        kept_idx.append(i)
    kept = tuple(corpus.documents[i] for i in kept_idx)
    return Corpus(kept, source_name=corpus.source_name,
                  keyword_list_version=corpus.keyword_list_version)


def window_split(corpus: Corpus, event_date: dt.date,
                 window_days: int) -> tuple[Corpus, Corpus]:
    """Split into the w days strictly before and strictly after an event.

    The event day itself lands in neither half.
    """
    if window_days < 1:
        raise CorpusError("window_days must be >= 1")
    lo = event_date - dt.timedelta(days=window_days)
    hi = event_date + dt.timedelta(days=window_days)
    before = tuple(d for d in corpus if lo <= d.date() < event_date)
    after = tuple(d for d in corpus if event_date < d.date() <= hi)
    meta = dict(source_name=corpus.source_name,
                keyword_list_version=corpus.keyword_list_version)
    return Corpus(before, **meta), Corpus(after, **meta)
