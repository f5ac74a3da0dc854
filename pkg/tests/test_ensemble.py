"""Ensemble probabilities (averaged/weighted) and weight learning."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kgcloze.ensemble import (PromptWeightLearner, ensemble_prob_uniform,
                              ensemble_prob_weighted, learn_weights)
from kgcloze.errors import ConfigError
from kgcloze.mining import Prompt
from kgcloze.scoring import ClozeDistribution
from kgcloze.selection import PromptEnsemble


def dist(probs, candidates=("a", "b", "c")):
    return ClozeDistribution(candidates=tuple(candidates), probs=tuple(probs))


def test_two_prompt_average():
    combined = ensemble_prob_uniform([dist([0.2, 0.3, 0.5]),
                                      dist([0.4, 0.1, 0.5])])
    assert combined.prob_of("a") == pytest.approx(0.3)


def test_single_prompt_identity():
    d = dist([0.6, 0.3, 0.1])
    assert ensemble_prob_uniform([d]).probs == pytest.approx(d.probs)


def test_uniform_equals_weighted_bitwise():
    dists = [dist([0.2, 0.3, 0.5]), dist([0.4, 0.1, 0.5]),
             dist([0.25, 0.5, 0.25])]
    uniform = ensemble_prob_uniform(dists)
    weighted = ensemble_prob_weighted(dists, [1 / 3, 1 / 3, 1 / 3])
    assert uniform.probs == weighted.probs  # identical floats, not approx


def test_delta_weight_returns_that_prompt():
    dists = [dist([0.2, 0.3, 0.5]), dist([0.4, 0.1, 0.5])]
    combined = ensemble_prob_weighted(dists, [0.0, 1.0])
    assert combined.probs == dists[1].probs


def test_hand_convex_combination():
    dists = [dist([0.2, 0.3, 0.5]), dist([0.4, 0.1, 0.5])]
    combined = ensemble_prob_weighted(dists, [0.7, 0.3])
    expected = tuple(0.7 * p + 0.3 * q for p, q in zip(dists[0].probs,
                                                       dists[1].probs))
    assert combined.probs == pytest.approx(expected, abs=1e-15)
    assert sum(combined.probs) == pytest.approx(1.0, abs=1e-12)


def test_mismatched_candidates_error():
    with pytest.raises(ConfigError):
        ensemble_prob_weighted([dist([1.0, 0.0, 0.0]),
                                dist([1.0], candidates=("a",))], [0.5, 0.5])


def test_off_simplex_weights_error():
    dists = [dist([0.5, 0.25, 0.25]), dist([0.25, 0.5, 0.25])]
    with pytest.raises(ConfigError):
        ensemble_prob_weighted(dists, [0.6, 0.6])
    with pytest.raises(ConfigError):
        ensemble_prob_weighted(dists, [-0.2, 1.2])


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=6), st.integers(min_value=2, max_value=5),
       st.integers(min_value=0, max_value=2**31))
def test_uniform_weighted_equivalence_random(n_prompts, n_candidates, seed):
    rng = np.random.default_rng(seed)
    dists = []
    for _ in range(n_prompts):
        raw = rng.random(n_candidates) + 1e-9
        dists.append(dist(tuple(raw / raw.sum()),
                          candidates=tuple(f"c{i}" for i in range(n_candidates))))
    uniform = ensemble_prob_uniform(dists)
    weighted = ensemble_prob_weighted(dists, [1.0 / n_prompts] * n_prompts)
    assert uniform.probs == weighted.probs


# -- weight learning -------------------------------------------------------------

def test_good_prompt_dominates_after_learning():
    # prompt 0 always gives the gold 0.9, prompt 1 gives 0.1
    gold = np.array([[0.9, 0.1]] * 12)
    learner = PromptWeightLearner(epochs=300, learning_rate=1.0).fit(gold)
    assert learner.weights_[0] > 0.9
    # 1-D brute-force sweep confirms the optimum sits at weight 1 on prompt 0
    sweep = [(np.sum(np.log(gold @ np.array([w, 1 - w]))), w)
             for w in np.linspace(0, 1, 101)]
    best_w = max(sweep)[1]
    assert best_w == pytest.approx(1.0)


def test_identical_prompts_stay_uniform():
    gold = np.array([[0.4, 0.4, 0.4]] * 8)
    learner = PromptWeightLearner(epochs=50, learning_rate=0.7).fit(gold)
    assert np.allclose(learner.weights_, 1 / 3)


def test_zero_epochs_keeps_uniform():
    prompts = (Prompt(("[X]", "works", "at", "[Y]"), "r"),
               Prompt(("[X]", "joined", "[Y]"), "r"))
    ensemble = PromptEnsemble(relation="r", prompts=prompts, weights=(0.5, 0.5))
    out = learn_weights(ensemble, np.array([[0.9, 0.1]] * 4), epochs=0)
    assert out.weights == (0.5, 0.5)


def test_no_heldout_keeps_uniform_with_warning(caplog):
    prompts = (Prompt(("[X]", "works", "at", "[Y]"), "r"),)
    ensemble = PromptEnsemble(relation="r", prompts=prompts, weights=(1.0,))
    out = learn_weights(ensemble, None)
    assert out.weights == (1.0,)


def test_objective_never_decreases():
    rng = np.random.default_rng(3)
    gold = rng.random((20, 4)) * 0.9 + 0.05
    learner = PromptWeightLearner(epochs=100, learning_rate=0.5)
    uniform_objective = float(np.sum(np.log(gold @ (np.ones(4) / 4))))
    learner.fit(gold)
    assert learner.objective_ >= uniform_objective - 1e-12


def test_learned_weights_on_simplex():
    rng = np.random.default_rng(11)
    gold = rng.random((15, 5))
    learner = PromptWeightLearner(epochs=80, learning_rate=0.8).fit(gold)
    assert np.all(learner.weights_ >= 0)
    assert np.sum(learner.weights_) == pytest.approx(1.0, abs=1e-9)
