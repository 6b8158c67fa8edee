"""Loading, cleaning, merging and de-duplicating the two tweet datasets.

Two CSV schemas are supported: the small Zhang set
(``original_index, sid, text, label``) and the Kaggle tweet sentiment set
(``textID, text, selected_text, sentiment``).  Both are read with RFC-4180
quoting and merged into one :class:`Corpus`, Zhang first.
"""

from __future__ import annotations

import csv
import io
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import EmptyInputError, ParseError, SchemaError

ZHANG = "Zhang"
KAGGLE = "Kaggle"

ZHANG_COLUMNS = ("original_index", "sid", "text", "label")
KAGGLE_COLUMNS = ("textID", "text", "selected_text", "sentiment")

_URL_PREFIXES = ("http://", "https://", "www.")
_APOSTROPHES = re.compile("['’‘`]")
_NON_ALNUM = re.compile(r"[^a-z0-9 ]")
_SPACES = re.compile(r"\s+")


@dataclass(frozen=True)
class RawRecord:
    id: str
    text: str
    source: str
    gold_label: str | None = None


@dataclass(frozen=True)
class Document:
    doc_id: int
    source: str
    raw_text: str
    clean_text: str
    tokens: tuple[str, ...]
    gold_label: str | None = None


class RecordList(list):
    """List of :class:`RawRecord` that also remembers how many rows were dropped."""

    dropped: int = 0


@dataclass
class Corpus:
    documents: list[Document]
    dropped_empty: int = 0
    duplicates: int = 0
    counts: dict[str, int] = field(default_factory=dict)

    def __len__(self):
        return len(self.documents)

    def texts(self) -> list[str]:
        return [d.clean_text for d in self.documents]

    def records(self, source=None) -> list[RawRecord]:
        return [
            RawRecord(str(d.doc_id), d.raw_text, d.source, d.gold_label)
            for d in self.documents
            if source is None or d.source == source
        ]

    def subset(self, doc_ids) -> "Corpus":
        """Documents with the given ids, re-numbered densely in the given order."""
        docs = [self.documents[i] for i in doc_ids]
        renum = [
            Document(j, d.source, d.raw_text, d.clean_text, d.tokens, d.gold_label)
            for j, d in enumerate(docs)
        ]
        return Corpus(renum, counts=dict(Counter(d.source for d in renum)))


def load_stopwords(path=None) -> frozenset[str]:
    """Read a stop-word file (one word per line, ``#`` comments); defaults to the bundled list."""
    if path is None:
        text = resources.files("apsent").joinpath("data/stopwords_en_v1.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    words = (line.strip() for line in text.splitlines())
    return frozenset(w for w in words if w and not w.startswith("#"))


def _read_csv(path, required, source):
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, strict=True)
        try:
            header = next(reader, None)
            if header is None:
                raise SchemaError(f"{path}: empty file, expected header {list(required)}")
            header = [h.strip().lstrip("﻿") for h in header]
            for col in required:
                if col not in header:
                    raise SchemaError(f"{path}: missing required column '{col}'")
            index = {name: header.index(name) for name in required}
            rows = []
            for row in reader:
                if not row:
                    continue
                if len(row) < len(header):
                    row = row + [""] * (len(header) - len(row))
                rows.append((reader.line_num, {name: row[i] for name, i in index.items()}))
        except csv.Error as exc:
            raise ParseError(f"{path}: {exc}", line=reader.line_num) from exc
    return rows


def load_zhang_csv(path) -> RecordList:
    out = RecordList()
    for line, row in _read_csv(path, ZHANG_COLUMNS, ZHANG):
        text = row["text"]
        if not text.strip():
            out.dropped += 1
            continue
        rid = row["sid"].strip() or row["original_index"].strip() or f"row{line}"
        out.append(RawRecord(rid, text, ZHANG, row["label"].strip() or None))
    return out


def load_kaggle_csv(path) -> RecordList:
    """Kaggle rows; ``selected_text`` is read for validation but not used."""
    out = RecordList()
    for line, row in _read_csv(path, KAGGLE_COLUMNS, KAGGLE):
        text = row["text"]
        if not text.strip():
            out.dropped += 1
            continue
        rid = row["textID"].strip() or f"row{line}"
        out.append(RawRecord(rid, text, KAGGLE, row["sentiment"].strip() or None))
    return out


def clean_text(raw: str) -> str:
    """Lowercase, drop URLs and @mentions, unwrap hashtags, keep only [a-z0-9 ]."""
    text = raw.lower()
    kept = [
        tok
        for tok in text.split()
        if not tok.startswith(_URL_PREFIXES) and not tok.startswith("@")
    ]
    text = " ".join(kept).replace("#", "")
    text = _APOSTROPHES.sub("", text)
    text = _NON_ALNUM.sub(" ", text)
    return _SPACES.sub(" ", text).strip()


def tokenize_filter(clean: str, stopwords) -> list[str]:
    return [tok for tok in clean.split(" ") if tok and tok not in stopwords]


def merge_dedupe(a, b, stopwords=None) -> Corpus:
    """Clean, concatenate (``a`` first), drop empties and keep the first copy of each text."""
    if not a and not b:
        raise EmptyInputError("both record lists are empty")
    if stopwords is None:
        stopwords = load_stopwords()
    seen = set()
    docs = []
    dropped = dupes = 0
    for rec in list(a) + list(b):
        tokens = tokenize_filter(clean_text(rec.text), stopwords)
        text = " ".join(tokens)
        if not text:
            dropped += 1
            continue
        if text in seen:
            dupes += 1
            continue
        seen.add(text)
        docs.append(Document(len(docs), rec.source, rec.text, text, tuple(tokens), rec.gold_label))
    if not docs:
        raise EmptyInputError("no documents survived cleaning")
    counts = Counter(d.source for d in docs)
    return Corpus(docs, dropped, dupes, {s: counts.get(s, 0) for s in (ZHANG, KAGGLE)})


def dumps_jsonl(corpus: Corpus) -> str:
    buf = io.StringIO()
    for d in corpus.documents:
        obj = {
            "doc_id": d.doc_id,
            "source": d.source,
            "raw_text": d.raw_text,
            "clean_text": d.clean_text,
            "gold_label": d.gold_label,
        }
        buf.write(json.dumps(obj, ensure_ascii=False))
        buf.write("\n")
    return buf.getvalue()


def write_jsonl(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_jsonl(corpus))


def read_jsonl(path) -> Corpus:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: {exc.msg}", line=lineno) from exc
            if obj["doc_id"] != len(docs):
                raise ParseError(f"{path}: doc_id {obj['doc_id']} out of order", line=lineno)
            text = obj["clean_text"]
            docs.append(
                Document(obj["doc_id"], obj["source"], obj["raw_text"], text,
                         tuple(text.split(" ")), obj.get("gold_label"))
            )
    counts = Counter(d.source for d in docs)
    return Corpus(docs, counts={s: counts.get(s, 0) for s in (ZHANG, KAGGLE)})
