"""Prompt selection: quality scoring of mined candidates and cosine filtering.

Quality combines four criteria into a geometric mean: frequency/concordance
(relative support times the association of adjacent context tokens),
informativeness (non-stopword fraction times normalized IDF of context
tokens), completeness (hard gate: exactly one [X], one [Y], no dangling
conjunction or preposition at the edges), and coverage (fraction of distinct
tuples the pattern matches).

Filtering then grows a positive set from a seed prompt by self-training:
candidate embeddings are PPMI-weighted bags of surrounding tokens, L2
normalized, down-weighted for patterns below the support quantile given by
the ``penalty`` threshold.  A candidate joins the positives when its weighted
similarity to any current positive reaches the positive threshold (single
linkage, which keeps membership monotone in that threshold); candidates below
the negative threshold are discarded; the middle band survives only on a
quality floor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import ConfigError, PromptSelectionError
from .mining import (OBJECT_SLOT, PLACEHOLDERS, SUBJECT_SLOT, AnnotatedSubCorpus,
                     Candidate, CandidateSet, Prompt)
from .text import DANGLING_EDGE_WORDS, STOPWORDS, find_token_subsequence
from .validation import check_simplex, check_unit_interval


@dataclass(frozen=True)
class QualityScore:
    frequency_concordance: float
    informativeness: float
    completeness: float
    coverage: float
    total: float

    def as_dict(self) -> dict:
        return {
            "frequency_concordance": self.frequency_concordance,
            "informativeness": self.informativeness,
            "completeness": self.completeness,
            "coverage": self.coverage,
            "total": self.total,
        }


@dataclass(frozen=True)
class TruePieThresholds:
    """{penalty, pos, neg} with the paper-order defaults {0.5, 0.7, 0.3}."""

    penalty: float = 0.5
    positive: float = 0.7
    negative: float = 0.3

    def validate(self) -> "TruePieThresholds":
        check_unit_interval(self.penalty, "penalty quantile")
        check_unit_interval(self.positive, "positive threshold")
        check_unit_interval(self.negative, "negative threshold")
        if self.negative > self.positive:
            raise ConfigError("negative threshold must not exceed positive threshold")
        return self


@dataclass(frozen=True)
class PatternEmbedding:
    weights: Dict[str, float]
    is_zero: bool

    def cosine(self, other: "PatternEmbedding") -> float:
        if self.is_zero or other.is_zero:
            return 0.0
        small, large = (self.weights, other.weights)
        if len(small) > len(large):
            small, large = large, small
        return sum(w * large[t] for t, w in small.items() if t in large)


@dataclass
class PromptEnsemble:
    relation: str
    prompts: Tuple[Prompt, ...]
    weights: Tuple[float, ...]
    qualities: Tuple[QualityScore, ...] = ()

    def __post_init__(self):
        if not self.prompts:
            raise ConfigError("ensemble must contain at least one prompt")
        if len(self.weights) != len(self.prompts):
            raise ConfigError("weights and prompts must align")
        check_simplex(self.weights, "ensemble weights")
        for prompt in self.prompts:
            if not prompt.is_complete():
                raise ConfigError(
                    f"ensemble prompt {prompt.text()!r} must contain exactly one "
                    f"{SUBJECT_SLOT} and one {OBJECT_SLOT}")

    @property
    def size(self) -> int:
        return len(self.prompts)

    def with_weights(self, weights: Sequence[float]) -> "PromptEnsemble":
        return PromptEnsemble(relation=self.relation, prompts=self.prompts,
                              weights=tuple(weights), qualities=self.qualities)

    def to_dict(self) -> dict:
        prompts = []
        for i, prompt in enumerate(self.prompts):
            entry = {"template": list(prompt.template), "weight": self.weights[i]}
            if self.qualities:
                entry["quality"] = self.qualities[i].as_dict()
            prompts.append(entry)
        return {"relation": self.relation, "prompts": prompts}

    @classmethod
    def from_dict(cls, data: dict) -> "PromptEnsemble":
        prompts = tuple(Prompt(template=tuple(p["template"]), relation=data["relation"])
                        for p in data["prompts"])
        weights = tuple(p["weight"] for p in data["prompts"])
        qualities = tuple(QualityScore(**p["quality"]) for p in data["prompts"]
                          if "quality" in p)
        if len(qualities) != len(prompts):
            qualities = ()
        return cls(relation=data["relation"], prompts=prompts, weights=weights,
                   qualities=qualities)


def write_ensembles(ensembles: Sequence[PromptEnsemble], path: Path) -> None:
    data = [e.to_dict() for e in sorted(ensembles, key=lambda e: e.relation)]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def read_ensembles(path: Path) -> Dict[str, PromptEnsemble]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return {d["relation"]: PromptEnsemble.from_dict(d) for d in data}


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


class QualityScorer:
    """Computes the four quality components against one annotated sub-corpus."""

    def __init__(self, annotated: AnnotatedSubCorpus, max_support: int):
        self.max_support = max(max_support, 1)
        self.by_tuple = annotated.rewritten_by_tuple()
        self.sentences = [s for group in
                          (self.by_tuple[k] for k in sorted(
                              self.by_tuple, key=lambda e: (e.head, e.tail)))
                          for s in group]
        self.n_sentences = len(self.sentences)
        self.n_tuples = len(self.by_tuple)
        self.unigram: Dict[str, int] = {}
        self.bigram: Dict[Tuple[str, str], int] = {}
        self.df: Dict[str, int] = {}
        self.total_tokens = 0
        for tokens in self.sentences:
            self.total_tokens += len(tokens)
            for token in tokens:
                self.unigram[token] = self.unigram.get(token, 0) + 1
            for a, b in zip(tokens, tokens[1:]):
                self.bigram[(a, b)] = self.bigram.get((a, b), 0) + 1
            for token in set(tokens):
                self.df[token] = self.df.get(token, 0) + 1

    def _pair_pmi(self, a: str, b: str) -> float:
        c_ab = self.bigram.get((a, b), 0)
        c_a, c_b = self.unigram.get(a, 0), self.unigram.get(b, 0)
        if c_ab == 0 or c_a == 0 or c_b == 0:
            return float("-inf")
        return math.log(c_ab * self.total_tokens / (c_a * c_b))

    def completeness(self, pattern: Sequence[str]) -> float:
        if pattern.count(SUBJECT_SLOT) != 1 or pattern.count(OBJECT_SLOT) != 1:
            return 0.0
        edges = (pattern[0], pattern[-1])
        if any(tok in DANGLING_EDGE_WORDS for tok in edges):
            return 0.0
        return 1.0

    def frequency_concordance(self, pattern: Sequence[str], support: int) -> float:
        norm_support = min(1.0, support / self.max_support)
        pmis = [self._pair_pmi(a, b) for a, b in zip(pattern, pattern[1:])
                if a not in PLACEHOLDERS and b not in PLACEHOLDERS]
        association = _sigmoid(min(pmis)) if pmis else 1.0
        return norm_support * association

    def informativeness(self, pattern: Sequence[str]) -> float:
        context = [t for t in pattern if t not in PLACEHOLDERS]
        if not context:
            return 0.0
        non_stop = sum(1 for t in context if t not in STOPWORDS) / len(context)
        # Smoothed normalized IDF in (0, 1]: a token in every sentence keeps a
        # small nonzero value instead of annihilating the geometric mean.
        log_n1 = math.log(self.n_sentences + 1)
        idfs = []
        for t in context:
            df = max(self.df.get(t, 1), 1)
            idfs.append(math.log((self.n_sentences + 1) / df) / log_n1)
        return non_stop * (sum(idfs) / len(idfs))

    def coverage(self, pattern: Sequence[str]) -> float:
        if not self.n_tuples:
            return 0.0
        matched = sum(
            1 for sentences in self.by_tuple.values()
            if any(find_token_subsequence(s, pattern) for s in sentences))
        return matched / self.n_tuples

    def support_of(self, pattern: Sequence[str]) -> int:
        return sum(1 for s in self.sentences if find_token_subsequence(s, pattern))

    def score(self, candidate: Candidate) -> QualityScore:
        completeness = self.completeness(candidate.pattern)
        freq = self.frequency_concordance(candidate.pattern, candidate.support)
        info = self.informativeness(candidate.pattern)
        cov = self.coverage(candidate.pattern)
        if completeness == 0.0:
            total = 0.0
        else:
            total = (freq * info * completeness * cov) ** 0.25
        return QualityScore(frequency_concordance=freq, informativeness=info,
                            completeness=completeness, coverage=cov, total=total)

    def embed(self, pattern: Sequence[str]) -> PatternEmbedding:
        """PPMI-weighted bag of tokens surrounding the pattern's matches."""
        context: Dict[str, int] = {}
        for tokens in self.sentences:
            starts = find_token_subsequence(tokens, pattern)
            if not starts:
                continue
            covered = set()
            for start in starts:
                covered.update(range(start, start + len(pattern)))
            for i, token in enumerate(tokens):
                if i in covered or token in PLACEHOLDERS:
                    continue
                context[token] = context.get(token, 0) + 1
        ctx_total = sum(context.values())
        weights: Dict[str, float] = {}
        if ctx_total and self.total_tokens:
            for token, count in context.items():
                corpus_count = self.unigram.get(token, 0)
                if corpus_count == 0:
                    continue
                ratio = (count / ctx_total) / (corpus_count / self.total_tokens)
                if ratio > 1.0:
                    weights[token] = math.log(ratio)
        norm = math.sqrt(sum(w * w for w in weights.values()))
        if norm == 0.0:
            return PatternEmbedding(weights={}, is_zero=True)
        return PatternEmbedding(weights={t: w / norm for t, w in weights.items()},
                                is_zero=False)


def score_quality(candidate: Candidate, annotated: AnnotatedSubCorpus,
                  candidate_set: CandidateSet) -> QualityScore:
    max_support = max((c.support for c in candidate_set.candidates), default=1)
    return QualityScorer(annotated, max_support).score(candidate)


def _support_quantile(supports: Sequence[int], quantile: float) -> int:
    ordered = sorted(supports)
    idx = math.ceil(quantile * (len(ordered) - 1))
    return ordered[idx]


@dataclass
class SelectorConfig:
    quality_floor: float = 0.3
    middle_band_floor: float = 0.5
    max_candidates: int = 20
    max_iterations: int = 10
    penalty_multiplier: float = 0.5
    thresholds: TruePieThresholds = field(default_factory=TruePieThresholds)


def truepie_filter(candidates: Sequence[Candidate], annotated: AnnotatedSubCorpus,
                   config: Optional[SelectorConfig] = None,
                   seed_template: Optional[Sequence[str]] = None) -> PromptEnsemble:
    """Build the prompt ensemble for one relation.

    ``seed_template`` overrides the automatic seed (the highest-quality
    candidate).  Raises :class:`PromptSelectionError` when nothing survives,
    instructing manual prompt fallback.
    """
    config = config or SelectorConfig()
    config.thresholds.validate()
    relation = annotated.relation

    max_support = max((c.support for c in candidates), default=1)
    scorer = QualityScorer(annotated, max_support)
    scored = [(c, scorer.score(c)) for c in candidates]
    gated = [(c, q) for c, q in scored if q.total >= config.quality_floor]
    if not gated and seed_template is None:
        raise PromptSelectionError(
            f"relation {relation!r}: no candidate passed the quality floor "
            f"{config.quality_floor}; supply a manual seed prompt")
    gated.sort(key=lambda item: (-item[1].total, item[0].pattern))
    pool = gated[:config.max_candidates]

    if seed_template is not None:
        seed_pattern = tuple(seed_template)
        match = next((item for item in pool if item[0].pattern == seed_pattern), None)
        if match is None:
            seed_cand = Candidate(pattern=seed_pattern,
                                  support=scorer.support_of(seed_pattern))
            match = (seed_cand, scorer.score(seed_cand))
            pool = [match] + pool
        seed_index = pool.index(match)
    else:
        seed_index = 0

    embeddings = [scorer.embed(c.pattern) for c, _ in pool]
    if embeddings[seed_index].is_zero:
        raise PromptSelectionError(
            f"relation {relation!r}: seed prompt has no context in the "
            f"sub-corpus; choose a different seed")

    supports = [c.support for c, _ in pool]
    cutoff = _support_quantile(supports, config.thresholds.penalty)
    penalty = [config.penalty_multiplier if s < cutoff else 1.0 for s in supports]

    def similarity(i: int, j: int) -> float:
        return penalty[i] * penalty[j] * embeddings[i].cosine(embeddings[j])

    positive = {seed_index}
    for _ in range(config.max_iterations):
        added = set()
        for i in range(len(pool)):
            if i in positive:
                continue
            best = max(similarity(i, j) for j in positive)
            if best >= config.thresholds.positive:
                added.add(i)
        if not added:
            break
        positive |= added

    members = set(positive)
    for i in range(len(pool)):
        if i in positive:
            continue
        best = max(similarity(i, j) for j in positive)
        if best <= config.thresholds.negative:
            continue
        if pool[i][1].total >= config.middle_band_floor:
            members.add(i)

    chosen = [pool[i] for i in sorted(members)]
    chosen = [(c, q) for c, q in chosen if q.completeness > 0.0]
    if not chosen:
        raise PromptSelectionError(
            f"relation {relation!r}: every candidate was filtered; supply a "
            f"manual seed prompt")
    chosen.sort(key=lambda item: (-item[1].total, item[0].pattern))
    n = len(chosen)
    return PromptEnsemble(
        relation=relation,
        prompts=tuple(Prompt(template=c.pattern, relation=relation)
                      for c, _ in chosen),
        weights=tuple(1.0 / n for _ in range(n)),
        qualities=tuple(q for _, q in chosen),
    )
