"""Link prediction by ensemble re-ranking, plus Hits@N / MRR evaluation.

For a query, every ensemble prompt is rendered with each recall entity filling
the mask, classified, and the c1 scores form an (ensemble size x candidates)
matrix.  Uniform aggregation sums each entity's column; weighted aggregation
multiplies each prompt's row by its weight before the sum.  Entities are
ranked by descending aggregate, ties broken by entity id ascending.

Evaluation is unfiltered: other known answers are never removed from the
ranking.  When the gold entity is missing from the recall list the query
counts as a miss for Hits@N and contributes 0 to MRR (1/infinity := 0); such
queries are flagged in the report.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, ScoringError
from .kg import Direction, Query
from .retrieval import MASK_TOKEN, ClozeInstance
from .scoring import Scorer
from .selection import PromptEnsemble


@dataclass(frozen=True)
class ScoreMatrix:
    """Ensemble-size x candidate-count matrix of classification scores."""

    prompt_count: int
    candidates: Tuple[str, ...]
    values: Tuple[Tuple[float, ...], ...]

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.float64)


@dataclass(frozen=True)
class RankedPrediction:
    query: Query
    gold: Optional[str]
    ranking: Tuple[str, ...]
    scores: Tuple[float, ...]
    gold_rank: Optional[int]

    def key(self) -> Tuple[str, str, str, str]:
        return (self.query.subject, self.query.relation,
                self.query.direction.value, self.gold or "")


@dataclass
class EvalReport:
    hits: Dict[int, float]
    mrr: float
    q: int
    missing_gold: int
    ranks: List[Optional[int]] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        payload = {f"hits@{n}": v for n, v in sorted(self.hits.items())}
        payload.update({"mrr": self.mrr, "q": self.q,
                        "missing_gold": self.missing_gold, "config": self.config})
        return payload


def score_matrix(instances: Sequence[ClozeInstance], scorer: Scorer,
                 candidate_labels: Sequence[Tuple[str, str]]) -> ScoreMatrix:
    """Fill each instance's mask with every candidate label and classify.

    ``candidate_labels`` pairs (entity_id, surface label).  A scorer failure
    aborts the whole query with context; no partial matrix escapes.
    """
    rows = []
    for instance in instances:
        row = []
        for entity_id, label in candidate_labels:
            filled = instance.text.replace(MASK_TOKEN, label, 1)
            try:
                row.append(scorer.classify(filled).c1)
            except Exception as exc:
                raise ScoringError(
                    f"scorer failed on prompt {instance.prompt_index} candidate "
                    f"{entity_id!r}: {exc}") from exc
        rows.append(tuple(row))
    return ScoreMatrix(prompt_count=len(instances),
                       candidates=tuple(e for e, _ in candidate_labels),
                       values=tuple(rows))


def aggregate(matrix: ScoreMatrix, weights: Optional[Sequence[float]]) -> List[float]:
    """Column sums (uniform mode) or weight-scaled column sums (weighted mode),
    accumulated in prompt-index order."""
    totals = [0.0] * len(matrix.candidates)
    for j, row in enumerate(matrix.values):
        w = 1.0 if weights is None else weights[j]
        for i, value in enumerate(row):
            totals[i] += w * value
    return totals


def rank_candidates(candidates: Sequence[str], totals: Sequence[float]
                    ) -> List[Tuple[str, float]]:
    order = sorted(zip(candidates, totals), key=lambda p: (-p[1], p[0]))
    return order


def predict(query: Query, ensemble: PromptEnsemble, scorer: Scorer,
            instances: Sequence[ClozeInstance],
            candidate_labels: Sequence[Tuple[str, str]],
            gold: Optional[str] = None,
            weighted: bool = True) -> RankedPrediction:
    """Rank the recall entities for one query.

    ``instances`` are the masked cloze instances (one per ensemble prompt)
    already carrying the query's support passage.
    """
    if not candidate_labels:
        raise ConfigError("recall entity list must not be empty")
    if len(instances) != ensemble.size:
        raise ConfigError("need one masked instance per ensemble prompt")
    matrix = score_matrix(instances, scorer, candidate_labels)
    weights = ensemble.weights if weighted else None
    totals = aggregate(matrix, weights)
    ranked = rank_candidates(matrix.candidates, totals)
    ranking = tuple(e for e, _ in ranked)
    scores = tuple(s for _, s in ranked)
    gold_rank = None
    if gold is not None and gold in ranking:
        gold_rank = ranking.index(gold) + 1
    return RankedPrediction(query=query, gold=gold, ranking=ranking,
                            scores=scores, gold_rank=gold_rank)


def evaluate(predictions: Sequence[RankedPrediction],
             n_values: Sequence[int] = (5, 10),
             config: Optional[dict] = None) -> EvalReport:
    """Hits@N = sum_i [rank_i <= N] / Q and MRR = sum_i 1 / (Q * rank_i)."""
    if not predictions:
        raise ConfigError("nothing to evaluate")
    seen = set()
    for pred in predictions:
        if pred.gold is None:
            raise ConfigError(f"query {pred.query} lacks a gold entity")
        key = pred.key()
        if key in seen:
            raise ConfigError(f"duplicate query {key!r}")
        seen.add(key)
    q = len(predictions)
    ranks = [p.gold_rank for p in predictions]
    hits = {}
    for n in sorted(n_values):
        hits[n] = sum(1 for r in ranks if r is not None and r <= n) / q
    mrr = sum(1.0 / r for r in ranks if r is not None) / q
    missing = sum(1 for r in ranks if r is None)
    return EvalReport(hits=hits, mrr=mrr, q=q, missing_gold=missing,
                      ranks=list(ranks), config=config or {})


def classify_triples(scores: Sequence[Sequence[float]],
                     weights: Sequence[float], labels: Sequence[int],
                     threshold: float = 0.5) -> Tuple[List[int], float]:
    """Label triples positive when the weighted mean c1 exceeds the threshold;
    returns predictions and the F1 score against the gold labels.

    ``scores`` holds one row per triple with the per-prompt c1 values.
    """
    if not (0.0 < threshold < 1.0):
        raise ConfigError("threshold must lie in (0, 1)")
    if len(scores) != len(labels):
        raise ConfigError("scores and labels must align")
    predictions = []
    for row in scores:
        if len(row) != len(weights):
            raise ConfigError("score rows must align with ensemble weights")
        value = sum(w * s for w, s in zip(weights, row))
        predictions.append(1 if value > threshold else 0)
    tp = sum(1 for p, y in zip(predictions, labels) if p == 1 and y == 1)
    fp = sum(1 for p, y in zip(predictions, labels) if p == 1 and y == 0)
    fn = sum(1 for p, y in zip(predictions, labels) if p == 0 and y == 1)
    if tp == 0:
        return predictions, 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return predictions, 2 * precision * recall / (precision + recall)


def write_predictions(predictions: Sequence[RankedPrediction], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pred in predictions:
            fh.write(json.dumps({
                "query": {"subject": pred.query.subject,
                          "relation": pred.query.relation,
                          "direction": pred.query.direction.value,
                          "gold": pred.gold},
                "ranking": list(pred.ranking),
                "scores": list(pred.scores),
                "gold_rank": pred.gold_rank,
            }, sort_keys=True) + "\n")


def read_predictions(path: Path) -> List[RankedPrediction]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            q = rec["query"]
            out.append(RankedPrediction(
                query=Query(q["subject"], q["relation"], Direction(q["direction"])),
                gold=q.get("gold"),
                ranking=tuple(rec["ranking"]),
                scores=tuple(rec["scores"]),
                gold_rank=rec.get("gold_rank")))
    return out
