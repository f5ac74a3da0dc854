"""Tokenization and sentence segmentation shared by the corpus, miner, and retriever.

Rules are deliberately simple and deterministic:

* tokens are Unicode word characters, lowercased, with punctuation stripped;
  hyphens survive inside hyphenated words ("south-east" is one token), and
  underscores act as separators so the label "east_new_york" produces the same
  token sequence as the surface form "East New York";
* sentences split on ``.!?`` runs followed by whitespace and an uppercase
  letter or digit, unless the word before the punctuation is a known
  abbreviation.
"""

from __future__ import annotations

import re
from typing import List, Sequence, Tuple

_TOKEN_RE = re.compile(r"[^\W_]+(?:-[^\W_]+)*", re.UNICODE)
_BOUNDARY_RE = re.compile(r"[.!?]+")

# Words that keep a following period from ending the sentence.  Single
# capital initials are intentionally absent ("A. B." is two sentences).
ABBREVIATIONS = frozenset(
    {
        "mr", "mrs", "ms", "dr", "prof", "rev", "gen", "sen", "rep",
        "st", "sr", "jr", "etc", "vs", "eg", "ie", "cf", "al",
        "inc", "ltd", "co", "corp", "dept", "est", "fig", "approx",
        "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept",
        "oct", "nov", "dec",
    }
)

STOPWORDS = frozenset(
    {
        "a", "an", "the", "this", "that", "these", "those", "it", "its",
        "he", "she", "they", "we", "you", "i", "his", "her", "their",
        "is", "are", "was", "were", "be", "been", "being", "am",
        "and", "or", "but", "nor", "so", "yet", "as", "if", "than",
        "of", "in", "on", "at", "by", "to", "for", "with", "from",
        "into", "onto", "over", "under", "about", "after", "before",
        "between", "through", "during", "above", "below", "up", "down",
        "out", "off", "near", "per",
        "not", "no", "also", "only", "both", "each", "very", "such",
        "has", "have", "had", "do", "does", "did", "will", "would",
        "can", "could", "may", "might", "shall", "should", "must",
        "there", "here", "when", "where", "which", "who", "whom", "what",
    }
)

# Tokens that may not dangle at a template edge (completeness criterion).
DANGLING_EDGE_WORDS = frozenset(
    {
        "and", "or", "but", "nor", "so", "yet",
        "of", "in", "on", "at", "by", "to", "for", "with", "from",
        "into", "onto", "over", "under", "about", "between", "through",
        "as", "than", "that", "which", "whose",
    }
)


def tokenize(text: str) -> List[str]:
    """Lowercased word tokens; hyphens kept, underscores split."""
    return _TOKEN_RE.findall(text.lower())


def split_sentences(text: str) -> List[Tuple[int, int]]:
    """Return (start, end) character spans of sentences within ``text``."""
    spans: List[Tuple[int, int]] = []
    start = 0
    for match in _BOUNDARY_RE.finditer(text):
        end = match.end()
        # Look ahead: whitespace then uppercase/digit starts a new sentence.
        rest = text[end:]
        stripped = rest.lstrip()
        if not stripped:
            continue
        if len(stripped) == len(rest):
            continue  # no whitespace after the punctuation
        first = stripped[0]
        if not (first.isupper() or first.isdigit()):
            continue
        before = text[:match.start()].rstrip()
        last_word = before.split()[-1].lower() if before.split() else ""
        last_word = last_word.strip(".,;:!?()[]\"'")
        if last_word in ABBREVIATIONS:
            continue
        spans.append((start, end))
        start = end + (len(rest) - len(stripped))
    if start < len(text) and text[start:].strip():
        spans.append((start, len(text)))
    return [(s, e) for s, e in spans if text[s:e].strip()]


def find_token_subsequence(haystack: Sequence[str], needle: Sequence[str]) -> List[int]:
    """Start indices of every contiguous occurrence of ``needle`` in ``haystack``."""
    if not needle or len(needle) > len(haystack):
        return []
    first = needle[0]
    n = len(needle)
    hits = []
    for i in range(len(haystack) - n + 1):
        if haystack[i] == first and list(haystack[i:i + n]) == list(needle):
            hits.append(i)
    return hits


def contains_token_subsequence(haystack: Sequence[str], needle: Sequence[str]) -> bool:
    return bool(find_token_subsequence(haystack, needle))


def relation_content_words(relation: str) -> List[str]:
    """Content words of a relation key's last path segment.

    ``/people/person/place_of_birth`` yields ``["place", "birth"]``.
    """
    segment = relation.rstrip("/").split("/")[-1]
    words = [w for w in re.split(r"[_\-]+", segment.lower()) if w]
    return [w for w in words if w not in STOPWORDS]
