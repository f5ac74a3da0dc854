"""Loss (hand values + finite differences) and the reference scorer."""

import math

import numpy as np
import pytest

from kgcloze.corpus import CorpusStore, Sentence
from kgcloze.errors import ConfigError, DivergenceError
from kgcloze.scoring import (ClassificationScore, ClozeDistribution, CorpusStats,
                             ReferenceScorer, cross_entropy_loss)
from kgcloze.text import tokenize


def corpus(raws):
    sentences = [Sentence(doc_id=f"d{i}", index=0, raw=r,
                          tokens=tuple(tokenize(r)), source="reliable")
                 for i, r in enumerate(raws)]
    return CorpusStore(sentences, source="reliable")


ALBA_CORPUS = corpus(
    ["alba lies in piedmont today"] * 5
    + ["piedmont grows wine", "texas has ranches", "texas elects governors",
       "dallas sits in texas", "many towns hold markets", "rivers cross plains"])


# -- types ---------------------------------------------------------------

def test_classification_score_validates():
    ClassificationScore(c0=0.4, c1=0.6)
    with pytest.raises(ConfigError):
        ClassificationScore(c0=0.5, c1=0.6)


def test_cloze_distribution_validates():
    ClozeDistribution(candidates=("a", "b"), probs=(0.25, 0.75))
    with pytest.raises(ConfigError):
        ClozeDistribution(candidates=("a",), probs=(0.5,))
    with pytest.raises(ConfigError):
        ClozeDistribution(candidates=("a", "b"), probs=(0.5, 0.4))


# -- Eq. 3 loss -------------------------------------------------------------

def test_loss_positive_with_certainty_is_zero():
    scores = [ClassificationScore(c0=0.0, c1=1.0)]
    assert cross_entropy_loss(scores, [1], m_ratio=30) == 0.0


def test_loss_single_negative_analytic():
    scores = [ClassificationScore(c0=math.exp(-1), c1=1 - math.exp(-1))]
    assert cross_entropy_loss(scores, [0], m_ratio=1) == pytest.approx(1.0)


def test_loss_hand_example():
    # {pos c1=0.8; neg c0=0.6, M=30} -> -ln 0.8 - ln(0.6)/30 = 0.2401...
    scores = [ClassificationScore(c0=0.2, c1=0.8),
              ClassificationScore(c0=0.6, c1=0.4)]
    loss = cross_entropy_loss(scores, [1, 0], m_ratio=30)
    expected = -math.log(0.8) - math.log(0.6) / 30
    assert loss == pytest.approx(expected, abs=1e-12)
    assert loss == pytest.approx(0.2401, abs=1e-4)


def test_loss_clamps_zero_probabilities():
    scores = [ClassificationScore(c0=1.0, c1=0.0)]
    loss = cross_entropy_loss(scores, [1], m_ratio=30)
    assert loss == pytest.approx(-math.log(1e-12))


def test_loss_nonnegative_and_validates():
    with pytest.raises(ConfigError):
        cross_entropy_loss([], [], m_ratio=30)
    with pytest.raises(ConfigError):
        cross_entropy_loss([ClassificationScore(c0=0.5, c1=0.5)], [2], m_ratio=30)


# -- reference scorer: cloze ---------------------------------------------------

def test_single_candidate_probability_one():
    scorer = ReferenceScorer(CorpusStats(ALBA_CORPUS))
    dist = scorer.score_cloze("[CLS] [SEP] alba lies in [MASK]", ["piedmont"])
    assert dist.probs == (1.0,)


def test_cooccurring_candidate_preferred():
    scorer = ReferenceScorer(CorpusStats(ALBA_CORPUS))
    dist = scorer.score_cloze("[CLS] [SEP] alba lies in [MASK]",
                              ["piedmont", "texas"])
    assert dist.prob_of("piedmont") > dist.prob_of("texas")


def test_unknown_candidate_gets_smoothing_floor_mass():
    scorer = ReferenceScorer(CorpusStats(ALBA_CORPUS))
    dist = scorer.score_cloze("[CLS] [SEP] alba lies in [MASK]",
                              ["piedmont", "atlantis"])
    assert dist.prob_of("atlantis") > 0.0
    assert sum(dist.probs) == pytest.approx(1.0, abs=1e-9)


def test_score_cloze_softmax_matches_hand_oracle():
    # Independent reimplementation of the evidence (ordered PMI over the
    # corpus, rarity-weighted) and the softmax, computed from raw counts.
    raws = ([["alba", "lies", "in", "piedmont", "today"]] * 5
            + [["piedmont", "grows", "wine"], ["texas", "has", "ranches"],
               ["texas", "elects", "governors"], ["dallas", "sits", "in", "texas"],
               ["many", "towns", "hold", "markets"],
               ["rivers", "cross", "plains"]])
    n = len(raws)
    count, before = {}, {}
    for sent in raws:
        first, last = {}, {}
        for i, t in enumerate(sent):
            first.setdefault(t, i)
            last[t] = i
        for t in first:
            count[t] = count.get(t, 0) + 1
        for a in first:
            for b in first:
                if a != b and first[a] < last[b]:
                    before[(a, b)] = before.get((a, b), 0) + 1

    def pmi_ord(a, b):
        j = before.get((a, b), 0)
        if not j:
            return 0.0
        return max(0.0, math.log(j * n / (count[a] * count[b])))

    def idf(t):
        c = count.get(t, 0)
        return 1.0 if not c else math.log(n / c) / math.log(n)

    def hand_evidence(tokens):
        total = wsum = 0.0
        for i in range(len(tokens)):
            for j in range(i + 1, len(tokens)):
                w = idf(tokens[i]) * idf(tokens[j])
                total += w * pmi_ord(tokens[i], tokens[j])
                wsum += w
        return 2.0 * (total / wsum if wsum else 0.0)

    evidences = [hand_evidence(["alba", "lies", "piedmont"]),
                 hand_evidence(["alba", "lies", "texas"])]
    peak = max(evidences)
    exps = [math.exp(e - peak) for e in evidences]
    expected = tuple(v / sum(exps) for v in exps)

    scorer = ReferenceScorer(CorpusStats(ALBA_CORPUS))
    got = scorer.score_cloze("[CLS] [SEP] alba lies in [MASK]",
                             ["piedmont", "texas"])
    assert got.probs == pytest.approx(expected, abs=1e-12)


def test_score_cloze_requires_mask_and_candidates():
    scorer = ReferenceScorer(CorpusStats(ALBA_CORPUS))
    with pytest.raises(ConfigError):
        scorer.score_cloze("[CLS] [SEP] no mask here", ["a"])
    with pytest.raises(ConfigError):
        scorer.score_cloze("[CLS] [SEP] a [MASK]", [])


def test_support_contributes_to_evidence():
    stats = CorpusStats(ALBA_CORPUS)
    scorer = ReferenceScorer(stats)
    bare = scorer.evidence("[CLS] [SEP] alba lies in piedmont")
    with_support = scorer.evidence(
        "[CLS] alba lies in piedmont today [SEP] alba lies in piedmont")
    assert with_support != bare


# -- reference scorer: classify + training -------------------------------------

def test_untrained_head_scores_half():
    scorer = ReferenceScorer(CorpusStats(ALBA_CORPUS))
    score = scorer.classify("[CLS] [SEP] alba lies in piedmont")
    assert score.c1 == 0.5 and score.c0 == 0.5


def test_c0_plus_c1_is_one():
    scorer = ReferenceScorer(CorpusStats(ALBA_CORPUS))
    scorer.weight_, scorer.bias_ = 3.7, -0.4
    score = scorer.classify("[CLS] [SEP] alba lies in piedmont")
    assert score.c0 + score.c1 == pytest.approx(1.0, abs=1e-12)


def separable_batch():
    positives = ["[CLS] [SEP] alba lies in piedmont"] * 10
    negatives = ["[CLS] [SEP] alba lies in texas"] * 10
    texts = positives + negatives
    labels = [1] * 10 + [0] * 10
    return texts, labels


def test_fit_separable_fixture_confidence():
    scorer = ReferenceScorer(CorpusStats(ALBA_CORPUS), learning_rate=2.0,
                             epochs=400, m_ratio=1, weight_decay=0.001)
    texts, labels = separable_batch()
    scorer.fit(texts, labels)
    assert scorer.classify(texts[0]).c1 > 0.9
    # Brute-force grid: confirm some head in the searched box separates at 0.9.
    stats_evidence = [scorer.evidence(t) for t in texts]
    pos_ev = stats_evidence[0]
    neg_ev = stats_evidence[-1]
    assert pos_ev > neg_ev  # separability of the fixture itself
    best = max(
        1 / (1 + math.exp(-(w * pos_ev + b)))
        for w in np.linspace(-20, 20, 81) for b in np.linspace(-10, 10, 41)
        if 1 / (1 + math.exp(-(w * neg_ev + b))) < 0.5)
    assert best > 0.9


def test_fit_reduces_loss_on_separable_fixture():
    scorer = ReferenceScorer(CorpusStats(ALBA_CORPUS), learning_rate=1.0,
                             epochs=50, m_ratio=1)
    texts, labels = separable_batch()
    x = np.array([scorer.evidence(t) for t in texts])
    y = np.array(labels, dtype=float)
    initial, _, _ = scorer.loss_and_gradient(x, y, 0.0, 0.0, 1)
    scorer.fit(texts, labels)
    final, _, _ = scorer.loss_and_gradient(x, y, scorer.weight_, scorer.bias_, 1)
    assert final < initial


def test_zero_learning_rate_keeps_parameters():
    scorer = ReferenceScorer(CorpusStats(ALBA_CORPUS), learning_rate=0.0,
                             epochs=25)
    texts, labels = separable_batch()
    scorer.fit(texts, labels)
    assert scorer.weight_ == 0.0 and scorer.bias_ == 0.0


def test_gradient_matches_central_finite_differences():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        evidence = rng.normal(0.0, 1.0, size=n)
        labels = rng.integers(0, 2, size=n).astype(float)
        if labels.sum() == 0:
            labels[0] = 1.0
        weight = float(rng.normal())
        bias = float(rng.normal())
        m = int(rng.integers(1, 40))
        _, dw, db = ReferenceScorer.loss_and_gradient(evidence, labels, weight,
                                                      bias, m)
        eps = 1e-6
        for analytic, param in ((dw, "w"), (db, "b")):
            if param == "w":
                hi, _, _ = ReferenceScorer.loss_and_gradient(
                    evidence, labels, weight + eps, bias, m)
                lo, _, _ = ReferenceScorer.loss_and_gradient(
                    evidence, labels, weight - eps, bias, m)
            else:
                hi, _, _ = ReferenceScorer.loss_and_gradient(
                    evidence, labels, weight, bias + eps, m)
                lo, _, _ = ReferenceScorer.loss_and_gradient(
                    evidence, labels, weight, bias - eps, m)
            numeric = (hi - lo) / (2 * eps)
            scale = max(1.0, abs(analytic), abs(numeric))
            assert abs(analytic - numeric) / scale < 1e-6


def test_divergence_aborts(monkeypatch):
    # The convex full-batch objective cannot rise five epochs in a row on its
    # own, so drive the circuit breaker with a stubbed loss sequence.
    scorer = ReferenceScorer(CorpusStats(ALBA_CORPUS), learning_rate=1.0,
                             epochs=50, m_ratio=1)
    texts, labels = separable_batch()
    rising = iter(range(1, 100))

    def stub(evidence, y, weight, bias, m_ratio):
        return float(next(rising)), 0.1, 0.1

    monkeypatch.setattr(ReferenceScorer, "loss_and_gradient", staticmethod(stub))
    with pytest.raises(DivergenceError):
        scorer.fit(texts, labels)


def test_finetune_returns_version_token():
    scorer = ReferenceScorer(CorpusStats(ALBA_CORPUS), learning_rate=0.5)
    texts, labels = separable_batch()
    before = scorer.version()
    unchanged = scorer.finetune(list(zip(texts, labels)), m_ratio=30, epochs=0)
    assert unchanged == before
    after = scorer.finetune(list(zip(texts, labels)), m_ratio=30, epochs=10)
    assert after != before


def test_determinism_across_instances():
    a = ReferenceScorer(CorpusStats(ALBA_CORPUS))
    b = ReferenceScorer(CorpusStats(ALBA_CORPUS))
    text = "[CLS] piedmont grows wine [SEP] alba lies in [MASK]"
    assert a.score_cloze(text, ["piedmont", "texas"]) == \
        b.score_cloze(text, ["piedmont", "texas"])


def test_head_state_roundtrip():
    scorer = ReferenceScorer(CorpusStats(ALBA_CORPUS))
    scorer.weight_, scorer.bias_ = 1.25, -0.5
    state = scorer.head_state()
    other = ReferenceScorer(CorpusStats(ALBA_CORPUS)).load_head(state)
    assert other.weight_ == 1.25 and other.bias_ == -0.5
