"""BM25 support retrieval over the reliable corpus and cloze assembly.

Passages are sentences.  Scores use Okapi BM25 with the +1-inside-log IDF
variant so every score is nonnegative and the minimum-score threshold delta
is meaningful.  Retrieval keeps passages with score strictly greater than
delta and token length strictly less than phi, sorted by descending score
with (doc_id, sentence index) tie-breaks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from sklearn.base import BaseEstimator

from .corpus import CorpusStore, Sentence
from .errors import ConfigError
from .kg import Direction
from .mining import OBJECT_SLOT, SUBJECT_SLOT
from .rng import SplitMix64
from .selection import PromptEnsemble
from .text import relation_content_words, tokenize
from .validation import check_nonnegative, check_positive, check_positive_int, check_unit_interval

CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
MASK_TOKEN = "[MASK]"


@dataclass(frozen=True)
class RetrievalConfig:
    delta: float = 0.9
    phi: int = 100
    k1: float = 1.2
    b: float = 0.75
    seed: int = 55
    deterministic: bool = False

    def validate(self) -> "RetrievalConfig":
        check_nonnegative(self.delta, "delta")
        check_positive_int(self.phi, "phi")
        check_positive(self.k1, "k1")
        check_unit_interval(self.b, "b")
        return self


@dataclass(frozen=True)
class SupportPassage:
    doc_id: str
    index: int
    score: float
    text: str
    n_tokens: int


class BM25Index(BaseEstimator):
    """Okapi BM25 over sentences; immutable after :meth:`fit`."""

    def __init__(self, k1: float = 1.2, b: float = 0.75):
        self.k1 = k1
        self.b = b

    def fit(self, corpus: CorpusStore) -> "BM25Index":
        if len(corpus) == 0:
            raise ConfigError("cannot build a BM25 index over an empty corpus")
        check_positive(self.k1, "k1")
        check_unit_interval(self.b, "b")
        self.sentences_ = corpus.sentences
        self.n_docs_ = len(corpus)
        self.lengths_ = [len(s.tokens) for s in corpus.sentences]
        self.avg_len_ = sum(self.lengths_) / self.n_docs_
        self.df_: Dict[str, int] = {}
        self.postings_: Dict[str, List[Tuple[int, int]]] = {}
        for pos, sent in enumerate(corpus.sentences):
            counts: Dict[str, int] = {}
            for token in sent.tokens:
                counts[token] = counts.get(token, 0) + 1
            for token, tf in counts.items():
                self.df_[token] = self.df_.get(token, 0) + 1
                self.postings_.setdefault(token, []).append((pos, tf))
        return self

    def idf(self, term: str) -> float:
        df = self.df_.get(term, 0)
        return math.log((self.n_docs_ - df + 0.5) / (df + 0.5) + 1.0)

    def scores(self, query_terms: Sequence[str]) -> Dict[int, float]:
        """BM25 scores of every sentence matching at least one query term.

        Query terms are deduplicated; per-term contributions accumulate in
        first-occurrence order of the deduplicated query.
        """
        acc: Dict[int, float] = {}
        for term in dict.fromkeys(query_terms):
            postings = self.postings_.get(term)
            if not postings:
                continue
            idf = self.idf(term)
            for pos, tf in postings:
                denom = tf + self.k1 * (1.0 - self.b
                                        + self.b * self.lengths_[pos] / self.avg_len_)
                acc[pos] = acc.get(pos, 0.0) + idf * tf * (self.k1 + 1.0) / denom
        return acc


def build_index(corpus: CorpusStore, k1: float = 1.2, b: float = 0.75) -> BM25Index:
    return BM25Index(k1=k1, b=b).fit(corpus)


def retrieve(index: BM25Index, query_terms: Sequence[str],
             config: RetrievalConfig) -> List[SupportPassage]:
    """Ranked passages with score > delta and token length < phi."""
    config.validate()
    hits = []
    for pos, score in index.scores(query_terms).items():
        sent = index.sentences_[pos]
        n_tokens = len(sent.tokens)
        if score > config.delta and n_tokens < config.phi:
            hits.append(SupportPassage(doc_id=sent.doc_id, index=sent.index,
                                       score=score, text=sent.raw,
                                       n_tokens=n_tokens))
    hits.sort(key=lambda p: (-p.score, p.doc_id, p.index))
    return hits


def choose_support(passages: Sequence[SupportPassage], config: RetrievalConfig,
                   draw_seed: int) -> Optional[SupportPassage]:
    """Pick the support passage: seeded draw, or the top hit in deterministic mode."""
    if not passages:
        return None
    if config.deterministic:
        return passages[0]
    return SplitMix64(draw_seed).choice(list(passages))


def query_terms(subject_label: str, relation: str,
                object_label: Optional[str] = None) -> List[str]:
    """Retrieval terms: subject label (plus object label for triple-wise
    retrieval) and the relation's content words, deduplicated."""
    terms = list(tokenize(subject_label))
    if object_label is not None:
        terms.extend(tokenize(object_label))
    terms.extend(relation_content_words(relation))
    return list(dict.fromkeys(terms))


@dataclass(frozen=True)
class ClozeInstance:
    """[CLS] support [SEP] filled-prompt unit sent to the scorer."""

    mode: str  # "train" | "infer"
    relation: str
    subject: str
    object: Optional[str]
    support: Optional[str]
    prompt_index: int
    text: str

    def __post_init__(self):
        if self.mode not in ("train", "infer"):
            raise ConfigError(f"mode must be train or infer, got {self.mode!r}")
        masks = self.text.count(MASK_TOKEN)
        expected = 1 if self.mode == "infer" else 0
        if masks != expected:
            raise ConfigError(
                f"{self.mode} instance must contain exactly {expected} mask "
                f"token(s), found {masks}: {self.text!r}")

    def to_record(self) -> dict:
        return {
            "mode": self.mode,
            "relation": self.relation,
            "subject": self.subject,
            "object": self.object,
            "support": self.support,
            "prompt_index": self.prompt_index,
            "text": self.text,
        }

    @classmethod
    def from_record(cls, record: dict) -> "ClozeInstance":
        return cls(**record)


def render_text(support: Optional[str], filled_prompt: str) -> str:
    segments = [CLS_TOKEN]
    if support:
        segments.append(support)
    segments.append(SEP_TOKEN)
    segments.append(filled_prompt)
    return " ".join(segments)


def parse_text(text: str) -> Tuple[Optional[str], str]:
    """Inverse of :func:`render_text`: (support or None, filled prompt)."""
    if not text.startswith(CLS_TOKEN):
        raise ConfigError(f"instance text must start with {CLS_TOKEN}: {text!r}")
    body = text[len(CLS_TOKEN):].strip()
    sep_at = body.find(SEP_TOKEN)
    if sep_at < 0:
        raise ConfigError(f"instance text must contain {SEP_TOKEN}: {text!r}")
    support = body[:sep_at].strip() or None
    prompt = body[sep_at + len(SEP_TOKEN):].strip()
    return support, prompt


def fill_template(template: Sequence[str], subject_label: str,
                  object_text: str, direction: Direction) -> str:
    """Substitute the known entity and the object/mask into the template."""
    if direction is Direction.TAIL_PREDICTION:
        x_text, y_text = subject_label, object_text
    else:
        x_text, y_text = object_text, subject_label
    out = []
    for token in template:
        if token == SUBJECT_SLOT:
            out.append(x_text)
        elif token == OBJECT_SLOT:
            out.append(y_text)
        else:
            out.append(token)
    return " ".join(out)


def make_cloze(ensemble: PromptEnsemble, subject_id: str, subject_label: str,
               direction: Direction, mode: str,
               object_id: Optional[str] = None,
               object_label: Optional[str] = None,
               support: Optional[SupportPassage] = None) -> List[ClozeInstance]:
    """One instance per ensemble prompt.

    Training mode fills the object slot with the object label; inference mode
    masks it.  The caller supplies the support passage (query-wise terms omit
    the object; triple-wise terms include it).
    """
    if mode == "train":
        if object_label is None:
            raise ConfigError("train instances need the object label")
        object_text = object_label
    elif mode == "infer":
        object_text = MASK_TOKEN
    else:
        raise ConfigError(f"mode must be train or infer, got {mode!r}")
    support_text = support.text if support is not None else None
    instances = []
    for idx, prompt in enumerate(ensemble.prompts):
        filled = fill_template(prompt.template, subject_label, object_text, direction)
        instances.append(ClozeInstance(
            mode=mode, relation=ensemble.relation, subject=subject_id,
            object=object_id, support=support_text, prompt_index=idx,
            text=render_text(support_text, filled)))
    return instances


def write_instances(instances: Sequence[ClozeInstance], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_record(), sort_keys=True,
                                ensure_ascii=False) + "\n")


def read_instances(path: Path) -> List[ClozeInstance]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(ClozeInstance.from_record(json.loads(line)))
    return out
