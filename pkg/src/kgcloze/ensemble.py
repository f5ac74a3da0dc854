"""Ensemble probabilities and per-prompt weight learning.

The averaged ensemble is the weighted ensemble with uniform weights, computed
through the identical code path and summation order (prompt index ascending)
so the two agree bitwise.  Weights are learned before fine-tuning by softmax-
parameterized likelihood ascent on held-out positives: free logits per prompt,
gradient steps accepted only when the held-out log-likelihood does not
decrease (step halving otherwise), so the learned weights never score the
held-out slice worse than uniform ones.
"""

from __future__ import annotations

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator

from .errors import ConfigError
from .scoring import ClozeDistribution
from .selection import PromptEnsemble
from .validation import SIMPLEX_TOL, check_simplex

logger = logging.getLogger(__name__)


def ensemble_prob_weighted(distributions: Sequence[ClozeDistribution],
                           weights: Sequence[float]) -> ClozeDistribution:
    """P(y|x) = sum_j w_j * P_j(y|x), summed in prompt-index order."""
    if not distributions:
        raise ConfigError("need at least one prompt distribution")
    if len(distributions) != len(weights):
        raise ConfigError("weights must align with distributions")
    candidates = distributions[0].candidates
    for dist in distributions[1:]:
        if dist.candidates != candidates:
            raise ConfigError("prompt distributions must share one candidate list")
    check_simplex(weights, "ensemble weights")
    combined = [0.0] * len(candidates)
    for weight, dist in zip(weights, distributions):
        for i, p in enumerate(dist.probs):
            combined[i] += weight * p
    return ClozeDistribution(candidates=candidates, probs=tuple(combined))


def ensemble_prob_uniform(distributions: Sequence[ClozeDistribution]) -> ClozeDistribution:
    """Averaged ensemble: the weighted form with weights fixed at 1/n."""
    n = len(distributions)
    if n == 0:
        raise ConfigError("need at least one prompt distribution")
    return ensemble_prob_weighted(distributions, [1.0 / n] * n)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    exps = np.exp(shifted)
    return exps / np.sum(exps)


class PromptWeightLearner(BaseEstimator):
    """Learns simplex weights maximizing held-out gold log-likelihood.

    ``fit`` takes the (n_queries, n_prompts) matrix of per-prompt gold
    probabilities; the scorer is only needed to build that matrix, which stays
    fixed during optimization.
    """

    def __init__(self, epochs: int = 100, learning_rate: float = 0.5):
        self.epochs = epochs
        self.learning_rate = learning_rate

    @staticmethod
    def _objective(gold_probs: np.ndarray, weights: np.ndarray) -> float:
        mixed = gold_probs @ weights
        return float(np.sum(np.log(np.maximum(mixed, 1e-12))))

    def fit(self, gold_probs: np.ndarray) -> "PromptWeightLearner":
        gold_probs = np.asarray(gold_probs, dtype=np.float64)
        if gold_probs.ndim != 2 or gold_probs.shape[0] < 1:
            raise ConfigError("gold probability matrix must be (queries, prompts)")
        n_prompts = gold_probs.shape[1]
        logits = np.zeros(n_prompts, dtype=np.float64)
        weights = _softmax(logits)
        objective = self._objective(gold_probs, weights)
        step = self.learning_rate
        for _ in range(self.epochs):
            mixed = np.maximum(gold_probs @ weights, 1e-12)
            # d/d logit_k of sum log(P w) with softmax weights
            grad = np.sum(weights * (gold_probs - mixed[:, None]) / mixed[:, None],
                          axis=0)
            accepted = False
            for _ in range(30):
                trial = logits + step * grad
                trial_weights = _softmax(trial)
                trial_objective = self._objective(gold_probs, trial_weights)
                if trial_objective >= objective:
                    logits, weights = trial, trial_weights
                    objective = trial_objective
                    accepted = True
                    break
                step /= 2.0
            if not accepted:
                break
        self.weights_ = weights
        self.objective_ = objective
        self.n_prompts_ = n_prompts
        return self


def learn_weights(ensemble: PromptEnsemble, gold_probs: Optional[np.ndarray],
                  epochs: int = 100, learning_rate: float = 0.5) -> PromptEnsemble:
    """Return the ensemble with learned weights, or uniform when no held-out
    data exists for the relation (with a warning)."""
    if gold_probs is None or len(gold_probs) == 0:
        logger.warning("relation %s: no held-out triples, keeping uniform weights",
                       ensemble.relation)
        return ensemble
    if epochs == 0:
        return ensemble
    learner = PromptWeightLearner(epochs=epochs, learning_rate=learning_rate)
    learner.fit(np.asarray(gold_probs))
    weights = learner.weights_
    # Guard against float drift off the simplex before freezing.
    weights = weights / np.sum(weights)
    return ensemble.with_weights(tuple(float(w) for w in weights))
