"""Prompt-candidate mining: phrase fusion and frequent pattern growth.

Two steps produce the raw candidate set for a relation:

1. :func:`segment_phrases` fuses frequent, high-PMI contiguous n-grams
   (n <= 5) into single phrase tokens, longest match first, never touching an
   entity-mention span so placeholder rewriting stays exact.
2. :func:`mine_candidates` rewrites each sentence with its tuple's head as
   ``[X]`` and tail as ``[Y]``, then mines every contiguous token window (up
   to ``max_window`` tokens, anchored within ``max_window`` of a placeholder)
   whose support - the number of distinct rewritten sentences containing it
   inside such a window - reaches ``min_support``.  Mining grows a bounded
   prefix tree over window suffixes, the ordered-sequence analog of an
   FP-tree; its output is exactly the brute-force enumeration.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .corpus import SubCorpus, TupleEntry
from .errors import ConfigError
from .text import find_token_subsequence
from .validation import check_positive_int

SUBJECT_SLOT = "[X]"
OBJECT_SLOT = "[Y]"
PLACEHOLDERS = (SUBJECT_SLOT, OBJECT_SLOT)


@dataclass(frozen=True)
class Prompt:
    """A template with subject slot [X] and object slot [Y]."""

    template: Tuple[str, ...]
    relation: str

    def text(self) -> str:
        return " ".join(self.template)

    def slot_counts(self) -> Tuple[int, int]:
        return (self.template.count(SUBJECT_SLOT), self.template.count(OBJECT_SLOT))

    def is_complete(self) -> bool:
        return self.slot_counts() == (1, 1)


@dataclass(frozen=True)
class Candidate:
    pattern: Tuple[str, ...]
    support: int


@dataclass
class CandidateSet:
    relation: str
    candidates: Tuple[Candidate, ...]
    min_support: int


@dataclass(frozen=True)
class AnnotatedSentence:
    """A sub-corpus sentence after phrase fusion, with mention spans intact."""

    tokens: Tuple[str, ...]
    head_spans: Tuple[Tuple[int, int], ...]  # [start, end) token spans
    tail_spans: Tuple[Tuple[int, int], ...]

    def rewritten(self) -> Tuple[str, ...]:
        """Tokens with head spans collapsed to [X] and tail spans to [Y]."""
        replace: Dict[int, Optional[str]] = {}
        for start, end in self.head_spans:
            replace[start] = SUBJECT_SLOT
            for i in range(start + 1, end):
                replace[i] = None
        for start, end in self.tail_spans:
            replace[start] = OBJECT_SLOT
            for i in range(start + 1, end):
                replace[i] = None
        out = []
        for i, token in enumerate(self.tokens):
            if i in replace:
                if replace[i] is not None:
                    out.append(replace[i])
            else:
                out.append(token)
        return tuple(out)


@dataclass
class AnnotatedSubCorpus:
    relation: str
    entries: Dict[TupleEntry, Tuple[AnnotatedSentence, ...]] = field(default_factory=dict)

    def rewritten_sentences(self) -> List[Tuple[str, ...]]:
        out = []
        for entry in sorted(self.entries, key=lambda e: (e.head, e.tail)):
            out.extend(s.rewritten() for s in self.entries[entry])
        return out

    def rewritten_by_tuple(self) -> Dict[TupleEntry, List[Tuple[str, ...]]]:
        return {entry: [s.rewritten() for s in sentences]
                for entry, sentences in self.entries.items()}


def _mention_spans(tokens: Sequence[str], head_tokens: Sequence[str],
                   tail_tokens: Sequence[str]) -> Tuple[Tuple[Tuple[int, int], ...],
                                                        Tuple[Tuple[int, int], ...]]:
    """Non-overlapping head/tail mention spans, longer label first."""
    raw = []
    for kind, needle in (("head", head_tokens), ("tail", tail_tokens)):
        for start in find_token_subsequence(tokens, needle):
            raw.append((-len(needle), start, 0 if kind == "head" else 1, kind, needle))
    raw.sort()
    taken: List[Tuple[int, int]] = []
    heads, tails = [], []
    for _, start, _, kind, needle in raw:
        end = start + len(needle)
        if any(not (end <= s or start >= e) for s, e in taken):
            continue
        taken.append((start, end))
        (heads if kind == "head" else tails).append((start, end))
    return tuple(sorted(heads)), tuple(sorted(tails))


def ngram_pmi(count: int, token_counts: Sequence[int], total_tokens: int) -> float:
    """Length-normalized PMI of a contiguous n-gram.

    PMI(g) = log(c(g) * N^(n-1) / prod c(t_i)) / (n-1), with N the corpus
    token total.  Higher means the tokens stick together more than chance.
    """
    n = len(token_counts)
    if n < 2 or count <= 0 or any(c <= 0 for c in token_counts):
        return 0.0
    log_num = math.log(count) + (n - 1) * math.log(total_tokens)
    log_den = sum(math.log(c) for c in token_counts)
    return (log_num - log_den) / (n - 1)


def segment_phrases(sub: SubCorpus, min_phrase_count: int,
                    pmi_floor: float = 1.0, max_n: int = 5) -> AnnotatedSubCorpus:
    """Fuse frequent high-PMI n-grams into phrase tokens, longest match first.

    N-grams overlapping an entity-mention span are never fused, so the
    mention token runs survive verbatim for placeholder rewriting.
    """
    annotated = AnnotatedSubCorpus(relation=sub.relation)
    if not sub.entries:
        return annotated

    # Pass 1: global counts over the sub-corpus.
    unigram: Dict[str, int] = {}
    ngram: Dict[Tuple[str, ...], int] = {}
    total = 0
    sentence_items: List[Tuple[TupleEntry, Tuple[str, ...]]] = []
    for entry in sorted(sub.entries, key=lambda e: (e.head, e.tail)):
        for sent in sub.entries[entry]:
            tokens = sent.tokens
            sentence_items.append((entry, tokens))
            total += len(tokens)
            for token in tokens:
                unigram[token] = unigram.get(token, 0) + 1
            for n in range(2, max_n + 1):
                for i in range(len(tokens) - n + 1):
                    gram = tokens[i:i + n]
                    ngram[gram] = ngram.get(gram, 0) + 1

    qualifying = set()
    for gram, count in ngram.items():
        if count < min_phrase_count:
            continue
        pmi = ngram_pmi(count, [unigram[t] for t in gram], total)
        if pmi >= pmi_floor:
            qualifying.add(gram)

    # Pass 2: fuse per sentence, protecting mention spans.
    for entry, tokens in sentence_items:
        head_tokens, tail_tokens = entry.label_tokens()
        head_spans, tail_spans = _mention_spans(tokens, head_tokens, tail_tokens)
        protected = list(head_spans) + list(tail_spans)

        fused: List[str] = []
        span_map: List[int] = []  # fused position of each original token start
        i = 0
        while i < len(tokens):
            match_len = 0
            if qualifying:
                for n in range(max_n, 1, -1):
                    gram = tuple(tokens[i:i + n])
                    if len(gram) < n or gram not in qualifying:
                        continue
                    if any(not (i + n <= s or i >= e) for s, e in protected):
                        continue
                    match_len = n
                    break
            if match_len:
                span_map.extend([len(fused)] * match_len)
                fused.append(" ".join(tokens[i:i + match_len]))
                i += match_len
            else:
                span_map.append(len(fused))
                fused.append(tokens[i])
                i += 1
        span_map.append(len(fused))

        remap = lambda spans: tuple((span_map[s], span_map[e - 1] + 1) for s, e in spans)
        annotated.entries.setdefault(entry, ())
        annotated.entries[entry] = annotated.entries[entry] + (
            AnnotatedSentence(tokens=tuple(fused),
                              head_spans=remap(head_spans),
                              tail_spans=remap(tail_spans)),)
    return annotated


def window_segments(tokens: Sequence[str], max_window: int) -> List[Tuple[int, int]]:
    """Merged [start, end) index intervals within ``max_window`` of a placeholder."""
    anchors = [i for i, t in enumerate(tokens) if t in PLACEHOLDERS]
    if not anchors:
        return []
    intervals = [(max(0, p - max_window), min(len(tokens), p + max_window + 1))
                 for p in anchors]
    merged = [intervals[0]]
    for start, end in intervals[1:]:
        last_start, last_end = merged[-1]
        if start <= last_end:
            merged[-1] = (last_start, max(last_end, end))
        else:
            merged.append((start, end))
    return merged


class _TrieNode:
    __slots__ = ("children", "support", "last_sentence")

    def __init__(self):
        self.children: Dict[str, "_TrieNode"] = {}
        self.support = 0
        self.last_sentence = -1


def mine_candidates(annotated: AnnotatedSubCorpus, min_support: int,
                    max_window: int) -> CandidateSet:
    """Frequent contiguous placeholder-context windows with exact supports.

    Support counts distinct rewritten sentences in which the pattern occurs
    inside a placeholder window.  Patterns may carry zero, one, or both
    placeholders; completeness is enforced later by the selector.
    """
    if min_support < 1:
        raise ConfigError("min_support must be >= 1")
    check_positive_int(max_window, "max_window")

    root = _TrieNode()
    sentences = annotated.rewritten_sentences()
    for sid, tokens in enumerate(sentences):
        for seg_start, seg_end in window_segments(tokens, max_window):
            segment = tokens[seg_start:seg_end]
            for i in range(len(segment)):
                node = root
                for depth in range(i, min(i + max_window, len(segment))):
                    token = segment[depth]
                    child = node.children.get(token)
                    if child is None:
                        child = _TrieNode()
                        node.children[token] = child
                    if child.last_sentence != sid:
                        child.last_sentence = sid
                        child.support += 1
                    node = child

    found: List[Candidate] = []

    def collect(node: _TrieNode, prefix: Tuple[str, ...]):
        for token in sorted(node.children):
            child = node.children[token]
            pattern = prefix + (token,)
            if child.support >= min_support:
                found.append(Candidate(pattern=pattern, support=child.support))
            collect(child, pattern)

    collect(root, ())
    found.sort(key=lambda c: (-c.support, c.pattern))
    return CandidateSet(relation=annotated.relation, candidates=tuple(found),
                        min_support=min_support)


def brute_force_candidates(sentences: Sequence[Sequence[str]], min_support: int,
                           max_window: int) -> Dict[Tuple[str, ...], int]:
    """Independent enumeration oracle with the same pattern definition.

    Kept in the library so the acceptance suite and external callers can
    cross-check the trie miner on arbitrary inputs.
    """
    per_pattern: Dict[Tuple[str, ...], set] = {}
    for sid, tokens in enumerate(sentences):
        tokens = tuple(tokens)
        for seg_start, seg_end in window_segments(tokens, max_window):
            segment = tokens[seg_start:seg_end]
            for i in range(len(segment)):
                for j in range(i + 1, min(i + max_window, len(segment)) + 1):
                    per_pattern.setdefault(segment[i:j], set()).add(sid)
    return {p: len(sids) for p, sids in per_pattern.items()
            if len(sids) >= min_support}


def write_candidates(sets: Iterable[CandidateSet], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for cand_set in sets:
            for cand in cand_set.candidates:
                fh.write(json.dumps({
                    "relation": cand_set.relation,
                    "template": list(cand.pattern),
                    "support": cand.support,
                }, sort_keys=True, ensure_ascii=False) + "\n")


def read_candidates(path: Path) -> Dict[str, List[Candidate]]:
    out: Dict[str, List[Candidate]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.setdefault(rec["relation"], []).append(
                Candidate(pattern=tuple(rec["template"]), support=rec["support"]))
    return out
