"""Corpus ingestion, sentence segmentation, and per-relation sub-corpus mining.

A corpus arrives as JSONL (``{"doc_id": str, "text": str}``).  Ingestion
segments documents into sentences, tokenizes them, and builds an inverted
token index.  Sub-corpus mining then collects, for every (head, tail) tuple of
a relation, the sentences containing both entity surface forms, capped at
theta per tuple over the pooled corpora in (doc_id, sentence index) order.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import ParseError
from .text import contains_token_subsequence, split_sentences, tokenize
from .validation import check_positive_int

logger = logging.getLogger(__name__)

GENERAL = "general"
RELIABLE = "reliable"


@dataclass(frozen=True)
class Sentence:
    doc_id: str
    index: int
    raw: str
    tokens: Tuple[str, ...]
    source: str = GENERAL

    def key(self) -> Tuple[str, int]:
        return (self.doc_id, self.index)


class CorpusStore:
    """Immutable sentence store with an inverted token index."""

    def __init__(self, sentences: Sequence[Sentence], source: str,
                 skipped_empty: int = 0):
        self.source = source
        self.skipped_empty = skipped_empty
        self.sentences: Tuple[Sentence, ...] = tuple(
            sorted(sentences, key=lambda s: s.key()))
        self._postings: Dict[str, List[int]] = {}
        for pos, sent in enumerate(self.sentences):
            for token in set(sent.tokens):
                self._postings.setdefault(token, []).append(pos)

    def __len__(self) -> int:
        return len(self.sentences)

    def postings(self, token: str) -> List[int]:
        return self._postings.get(token, [])

    def doc_count(self) -> int:
        return len({s.doc_id for s in self.sentences})

    def index_checksum(self) -> str:
        digest = hashlib.sha256()
        for sent in self.sentences:
            digest.update(sent.doc_id.encode("utf-8"))
            digest.update(str(sent.index).encode())
            digest.update("\x1f".join(sent.tokens).encode("utf-8"))
        return digest.hexdigest()


def ingest(corpus_file: Path, source: str = GENERAL) -> CorpusStore:
    """Read a JSONL corpus and return a segmented, indexed store."""
    sentences: List[Sentence] = []
    skipped = 0
    seen_docs = set()
    path = str(corpus_file)
    with open(corpus_file, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=lineno)
            if not isinstance(record, dict) or "doc_id" not in record or "text" not in record:
                raise ParseError("object must carry doc_id and text", path=path,
                                 line=lineno)
            doc_id = str(record["doc_id"])
            if doc_id in seen_docs:
                raise ParseError(f"duplicate doc_id {doc_id!r}", path=path, line=lineno)
            seen_docs.add(doc_id)
            text = record["text"]
            if not text or not text.strip():
                skipped += 1
                continue
            for idx, (start, end) in enumerate(split_sentences(text)):
                raw = text[start:end].strip()
                tokens = tuple(tokenize(raw))
                if not tokens:
                    continue
                sentences.append(Sentence(doc_id=doc_id, index=idx, raw=raw,
                                          tokens=tokens, source=source))
    if skipped:
        logger.info("skipped %d empty documents in %s", skipped, path)
    return CorpusStore(sentences, source=source, skipped_empty=skipped)


def write_sentences(store: CorpusStore, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sent in store.sentences:
            fh.write(json.dumps({
                "doc_id": sent.doc_id,
                "index": sent.index,
                "raw": sent.raw,
                "tokens": list(sent.tokens),
            }, sort_keys=True, ensure_ascii=False) + "\n")


def read_sentences(path: Path, source: str) -> CorpusStore:
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            sentences.append(Sentence(doc_id=rec["doc_id"], index=rec["index"],
                                      raw=rec["raw"], tokens=tuple(rec["tokens"]),
                                      source=source))
    return CorpusStore(sentences, source=source)


@dataclass(frozen=True)
class TupleEntry:
    head: str
    tail: str
    head_label: str
    tail_label: str

    def label_tokens(self) -> Tuple[Tuple[str, ...], Tuple[str, ...]]:
        return tuple(tokenize(self.head_label)), tuple(tokenize(self.tail_label))


@dataclass
class SubCorpus:
    relation: str
    theta: int
    entries: Dict[TupleEntry, Tuple[Sentence, ...]] = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return not any(self.entries.values())

    def all_sentences(self) -> List[Tuple[TupleEntry, Sentence]]:
        out = []
        for entry in sorted(self.entries, key=lambda e: (e.head, e.tail)):
            for sent in self.entries[entry]:
                out.append((entry, sent))
        return out


def _matching_positions(store: CorpusStore, head_tokens: Sequence[str],
                        tail_tokens: Sequence[str]) -> List[int]:
    """Sentence positions whose tokens contain both label sequences."""
    if not head_tokens or not tail_tokens:
        return []
    head_rare = min(head_tokens, key=lambda t: (len(store.postings(t)), t))
    tail_rare = min(tail_tokens, key=lambda t: (len(store.postings(t)), t))
    candidates = set(store.postings(head_rare)) & set(store.postings(tail_rare))
    hits = []
    for pos in sorted(candidates):
        tokens = store.sentences[pos].tokens
        if contains_token_subsequence(tokens, head_tokens) and \
                contains_token_subsequence(tokens, tail_tokens):
            hits.append(pos)
    return hits


def mine_sub_corpus(corpora: Sequence[CorpusStore], relation: str,
                    tuples: Sequence[TupleEntry], theta: int) -> SubCorpus:
    """Collect up to ``theta`` sentences per tuple that contain both labels.

    Matching is a case-insensitive whole-phrase (token-sequence) match.  The
    pooled candidate stream is ordered by (doc_id, sentence index, source), so
    the result does not depend on worker count.
    """
    check_positive_int(theta, "theta")
    sub = SubCorpus(relation=relation, theta=theta)
    for entry in tuples:
        head_tokens, tail_tokens = entry.label_tokens()
        pooled: List[Sentence] = []
        for store in corpora:
            for pos in _matching_positions(store, head_tokens, tail_tokens):
                pooled.append(store.sentences[pos])
        pooled.sort(key=lambda s: (s.doc_id, s.index, s.source))
        if pooled:
            sub.entries[entry] = tuple(pooled[:theta])
    if sub.empty:
        logger.warning("sub-corpus for relation %s is empty", relation)
    return sub


def write_sub_corpus(sub: SubCorpus, path: Path) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        for entry, sent in sub.all_sentences():
            fh.write(json.dumps({
                "relation": sub.relation,
                "head": entry.head,
                "tail": entry.tail,
                "head_label": entry.head_label,
                "tail_label": entry.tail_label,
                "doc_id": sent.doc_id,
                "sent_index": sent.index,
                "raw": sent.raw,
            }, sort_keys=True, ensure_ascii=False) + "\n")


def read_sub_corpora(path: Path, theta: int) -> Dict[str, SubCorpus]:
    """Rebuild per-relation sub-corpora from the dump."""
    subs: Dict[str, SubCorpus] = {}
    buckets: Dict[Tuple[str, TupleEntry], List[Sentence]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            entry = TupleEntry(rec["head"], rec["tail"], rec["head_label"],
                               rec["tail_label"])
            sent = Sentence(doc_id=rec["doc_id"], index=rec["sent_index"],
                            raw=rec["raw"], tokens=tuple(tokenize(rec["raw"])))
            buckets.setdefault((rec["relation"], entry), []).append(sent)
    for (relation, entry), sentences in buckets.items():
        sub = subs.setdefault(relation, SubCorpus(relation=relation, theta=theta))
        sub.entries[entry] = tuple(sentences[:theta])
    return subs
