"""Scoring contract, the cross-entropy training loss, and the reference scorer.

Every scorer - the built-in reference scorer, the HTTP client, and any remote
service - satisfies the same three operations: ``score_cloze`` (distribution
over candidate entities for a masked instance), ``classify`` (c0/c1 for a
filled instance), and ``finetune`` (fit on labeled instances, returning a
model version token).

The reference scorer needs no neural runtime.  It snapshots sentence-level
co-occurrence statistics of the reliable corpus; the evidence of a filled
instance is the mean positive PMI over pairs of statement content tokens,
averaged with the support-to-statement pair mean when support is present.
``score_cloze`` substitutes each candidate into the mask and softmaxes the
evidence; ``classify`` maps evidence through a trainable logistic head
(weight, bias), zero-initialized so an untrained head scores exactly 0.5.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator

from .corpus import CorpusStore
from .errors import ConfigError, DivergenceError
from .retrieval import MASK_TOKEN, parse_text
from .text import STOPWORDS, tokenize
from .validation import check_positive_int

logger = logging.getLogger(__name__)

EPS = 1e-12
DISTRIBUTION_TOL = 1e-9


@dataclass(frozen=True)
class ClassificationScore:
    c0: float
    c1: float

    def __post_init__(self):
        if not (0.0 <= self.c0 <= 1.0 and 0.0 <= self.c1 <= 1.0):
            raise ConfigError("classification scores must lie in [0, 1]")
        if abs(self.c0 + self.c1 - 1.0) > DISTRIBUTION_TOL:
            raise ConfigError("c0 + c1 must equal 1")


@dataclass(frozen=True)
class ClozeDistribution:
    candidates: Tuple[str, ...]
    probs: Tuple[float, ...]

    def __post_init__(self):
        if len(self.candidates) != len(self.probs):
            raise ConfigError("candidates and probabilities must align")
        if not self.candidates:
            raise ConfigError("distribution needs at least one candidate")
        if any(p < 0 for p in self.probs):
            raise ConfigError("probabilities must be nonnegative")
        if abs(sum(self.probs) - 1.0) > DISTRIBUTION_TOL:
            raise ConfigError("probabilities must sum to 1")

    def prob_of(self, candidate: str) -> float:
        return self.probs[self.candidates.index(candidate)]


class Scorer(Protocol):
    def score_cloze(self, text: str, candidates: Sequence[str]) -> ClozeDistribution: ...

    def classify(self, text: str) -> ClassificationScore: ...

    def finetune(self, instances: Sequence[Tuple[str, int]], m_ratio: int,
                 epochs: int) -> str: ...


def cross_entropy_loss(scores: Sequence[ClassificationScore], labels: Sequence[int],
                       m_ratio: int) -> float:
    """L = -sum_t [ y_t * log(c1_t) + (1 - y_t) * log(c0_t) / M ].

    Probabilities are clamped at 1e-12 before the log; clamping is flagged via
    the module logger.
    """
    if not scores:
        raise ConfigError("loss needs a non-empty batch")
    if len(scores) != len(labels):
        raise ConfigError("scores and labels must align")
    check_positive_int(m_ratio, "m_ratio")
    total = 0.0
    clamped = 0
    for score, label in zip(scores, labels):
        if label == 1:
            p = score.c1
            if p < EPS:
                p, clamped = EPS, clamped + 1
            total -= math.log(p)
        elif label == 0:
            p = score.c0
            if p < EPS:
                p, clamped = EPS, clamped + 1
            total -= math.log(p) / m_ratio
        else:
            raise ConfigError(f"labels must be 0 or 1, got {label!r}")
    if clamped:
        logger.warning("clamped %d log arguments at %.0e", clamped, EPS)
    return total


class CorpusStats:
    """Sentence-level token counts and ordered pair co-occurrence counts.

    The ordered count c(a -> b) is the number of sentences in which token a
    occurs somewhere before token b; keeping order makes the evidence aware of
    argument position (subjects precede objects in the corpus sentences that
    express a relation).
    """

    def __init__(self, corpus: CorpusStore):
        self.n_sentences = len(corpus)
        self.token_counts: Dict[str, int] = {}
        self.ordered_counts: Dict[Tuple[str, str], int] = {}
        for sent in corpus.sentences:
            first: Dict[str, int] = {}
            last: Dict[str, int] = {}
            for i, token in enumerate(sent.tokens):
                if token not in first:
                    first[token] = i
                last[token] = i
            uniq = sorted(first)
            for token in uniq:
                self.token_counts[token] = self.token_counts.get(token, 0) + 1
            for a in uniq:
                for b in uniq:
                    if a != b and first[a] < last[b]:
                        key = (a, b)
                        self.ordered_counts[key] = self.ordered_counts.get(key, 0) + 1

    def pmi_ordered(self, a: str, b: str) -> float:
        """Smoothed signed PMI of 'a appears before b in a sentence'.

        ln((c(a->b) + 0.5) / (expected + 0.5)): a pair that co-occurs slightly
        below chance stays well above a pair that never co-occurs, which
        positive-clipped PMI would erase.
        """
        joint = self.ordered_counts.get((a, b), 0)
        expected = (self.token_counts.get(a, 0) * self.token_counts.get(b, 0)
                    / self.n_sentences) if self.n_sentences else 0.0
        return math.log((joint + 0.5) / (expected + 0.5))

    def association(self, a: str, b: str) -> float:
        """Order-free association; a token's association with itself is its
        self-information ln(N / c(a))."""
        if a == b:
            count = self.token_counts.get(a, 0)
            return math.log(self.n_sentences / count) if count else 0.0
        return max(self.pmi_ordered(a, b), self.pmi_ordered(b, a))

    def idf(self, token: str) -> float:
        """Normalized rarity in [0, 1]; unseen tokens count as maximally rare."""
        count = self.token_counts.get(token, 0)
        if not count or self.n_sentences < 2:
            return 1.0
        return math.log(self.n_sentences / count) / math.log(self.n_sentences)

    def checksum(self) -> str:
        digest = hashlib.sha256()
        digest.update(str(self.n_sentences).encode())
        for token in sorted(self.token_counts):
            digest.update(f"{token}\x1f{self.token_counts[token]}".encode("utf-8"))
        return digest.hexdigest()


def _content_tokens(text: str) -> List[str]:
    return [t for t in tokenize(text)
            if t not in STOPWORDS and t not in ("cls", "sep", "mask", "x", "y")]


def _ordered_unique(tokens: Sequence[str]) -> List[str]:
    return list(dict.fromkeys(tokens))


class ReferenceScorer(BaseEstimator):
    """Deterministic corpus-statistics scorer with a trainable logistic head.

    Evidence of a rendered instance combines two rarity-weighted co-occurrence
    readings of the reliable corpus:

    * statement coherence: over ordered pairs of distinct statement content
      tokens, the IDF-weighted mean of ordered positive PMI - rare pairs such
      as (subject token, filled object token) dominate, frequent template
      tokens contribute little;
    * support coverage: over statement content tokens, the IDF-weighted mean
      of each token's best association with any support token (a token named
      in the support passage earns its self-information).

    evidence = statement_weight * coherence + support_weight * coverage.
    """

    model_name = "reference-ppmi"

    def __init__(self, stats: CorpusStats, learning_rate: float = 0.5,
                 epochs: int = 200, m_ratio: int = 30,
                 statement_weight: float = 2.0, support_weight: float = 1.0,
                 weight_decay: float = 0.01):
        self.stats = stats
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.m_ratio = m_ratio
        self.statement_weight = statement_weight
        self.support_weight = support_weight
        self.weight_decay = weight_decay
        self.weight_ = 0.0
        self.bias_ = 0.0

    # -- evidence ---------------------------------------------------------
    def _statement_coherence(self, tokens: Sequence[str]) -> float:
        stats = self.stats
        total = weight_sum = 0.0
        for i in range(len(tokens)):
            for j in range(i + 1, len(tokens)):
                w = stats.idf(tokens[i]) * stats.idf(tokens[j])
                total += w * stats.pmi_ordered(tokens[i], tokens[j])
                weight_sum += w
        return total / weight_sum if weight_sum else 0.0

    def _support_coverage(self, support_tokens: Sequence[str],
                          tokens: Sequence[str]) -> float:
        stats = self.stats
        total = weight_sum = 0.0
        for t in tokens:
            w = stats.idf(t)
            total += w * max(stats.association(s, t) for s in support_tokens)
            weight_sum += w
        return total / weight_sum if weight_sum else 0.0

    def evidence(self, text: str) -> float:
        support, statement = parse_text(text)
        tokens = _ordered_unique(_content_tokens(statement))
        value = self.statement_weight * self._statement_coherence(tokens)
        if support and tokens:
            support_tokens = _ordered_unique(_content_tokens(support))
            if support_tokens:
                value += self.support_weight * self._support_coverage(
                    support_tokens, tokens)
        return value

    # -- scoring contract -------------------------------------------------
    def score_cloze(self, text: str, candidates: Sequence[str]) -> ClozeDistribution:
        if MASK_TOKEN not in text:
            raise ConfigError("score_cloze needs a masked instance")
        if not candidates:
            raise ConfigError("score_cloze needs at least one candidate")
        evidences = [self.evidence(text.replace(MASK_TOKEN, candidate, 1))
                     for candidate in candidates]
        peak = max(evidences)
        exps = [math.exp(e - peak) for e in evidences]
        total = sum(exps)
        return ClozeDistribution(candidates=tuple(candidates),
                                 probs=tuple(v / total for v in exps))

    def classify(self, text: str) -> ClassificationScore:
        z = self.weight_ * self.evidence(text) + self.bias_
        if z >= 0:
            c1 = 1.0 / (1.0 + math.exp(-z))
        else:
            ez = math.exp(z)
            c1 = ez / (1.0 + ez)
        return ClassificationScore(c0=1.0 - c1, c1=c1)

    # -- training ---------------------------------------------------------
    @staticmethod
    def loss_and_gradient(evidence: np.ndarray, labels: np.ndarray, weight: float,
                          bias: float, m_ratio: int) -> Tuple[float, float, float]:
        """Eq.-3 loss over the head and its exact gradient (d/dweight, d/dbias)."""
        z = weight * evidence + bias
        c1 = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                      np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
        c0 = 1.0 - c1
        neg_w = 1.0 / m_ratio
        loss = -(np.sum(labels * np.log(np.maximum(c1, EPS)))
                 + neg_w * np.sum((1 - labels) * np.log(np.maximum(c0, EPS))))
        # dL/dz = -[y (1 - c1) - (1 - y) c1 / M]
        dz = -(labels * c0 - (1 - labels) * c1 * neg_w)
        return float(loss), float(np.dot(dz, evidence)), float(np.sum(dz))

    def fit(self, texts: Sequence[str], labels: Sequence[int],
            epochs: Optional[int] = None) -> "ReferenceScorer":
        """Full-batch gradient descent on the batch-averaged loss with L2
        weight decay on the head (keeps a separable batch from saturating the
        sigmoid into a step function); aborts after five consecutive rises of
        the optimized objective."""
        if len(texts) != len(labels):
            raise ConfigError("texts and labels must align")
        if not texts:
            raise ConfigError("finetune needs a non-empty batch")
        epochs = self.epochs if epochs is None else epochs
        x = np.array([self.evidence(t) for t in texts], dtype=np.float64)
        y = np.array(labels, dtype=np.float64)
        if np.any((y != 0) & (y != 1)):
            raise ConfigError("labels must be 0 or 1")
        n = len(texts)
        decay = self.weight_decay
        previous = math.inf
        rises = 0
        for epoch in range(epochs):
            loss, dw, db = self.loss_and_gradient(x, y, self.weight_, self.bias_,
                                                  self.m_ratio)
            objective = loss / n + 0.5 * decay * (self.weight_ ** 2
                                                  + self.bias_ ** 2)
            if objective > previous:
                rises += 1
                if rises >= 5:
                    raise DivergenceError(
                        f"objective rose for 5 consecutive epochs (epoch {epoch}, "
                        f"value {objective:.6f}); reduce the learning rate")
            else:
                rises = 0
            previous = objective
            self.weight_ -= self.learning_rate * (dw / n + decay * self.weight_)
            self.bias_ -= self.learning_rate * (db / n + decay * self.bias_)
        return self

    def finetune(self, instances: Sequence[Tuple[str, int]], m_ratio: int,
                 epochs: int) -> str:
        self.m_ratio = m_ratio
        if epochs > 0:
            texts = [t for t, _ in instances]
            labels = [l for _, l in instances]
            self.fit(texts, labels, epochs=epochs)
        return self.version()

    def version(self) -> str:
        digest = hashlib.sha256(
            f"{self.weight_!r}|{self.bias_!r}|{self.stats.checksum()}".encode())
        return digest.hexdigest()[:12]

    def head_state(self) -> dict:
        return {"weight": self.weight_, "bias": self.bias_, "m_ratio": self.m_ratio}

    def load_head(self, state: dict) -> "ReferenceScorer":
        self.weight_ = float(state["weight"])
        self.bias_ = float(state["bias"])
        self.m_ratio = int(state.get("m_ratio", self.m_ratio))
        return self
