"""TransE training, recall, and negative generation against brute force."""

import math

import pytest

from kgcloze.errors import ConfigError, SamplingError
from kgcloze.kg import Direction, Query, Triple
from kgcloze.kge import (BEST_X_FB60K, BEST_X_UMLS, TransE, gen_negatives)
from kgcloze.rng import SplitMix64


def chain_kg(n_entities=20, relation="r"):
    """Transitive containment pattern: e_i -> e_{i+1}."""
    return [Triple(f"e{i:02d}", relation, f"e{i + 1:02d}")
            for i in range(n_entities - 1)]


def test_best_x_presets_match_reference_values():
    assert BEST_X_FB60K == {0.2: 70, 0.5: 40, 1.0: 20}
    assert BEST_X_UMLS == {0.2: 50, 0.4: 50, 0.7: 30, 1.0: 30}


def test_single_triple_separates():
    triples = [Triple("a", "r", "b")]
    model = TransE(dim=8, epochs=200, learning_rate=0.05, seed=7)
    model.fit(triples, entities=["a", "b", "c", "d"])
    good = model.score_triple("a", "r", "b")
    assert good > model.score_triple("a", "r", "c")
    assert good > model.score_triple("a", "r", "d")


def test_fixed_seed_identical_checksum():
    triples = chain_kg()
    a = TransE(dim=12, epochs=30, seed=55).fit(triples)
    b = TransE(dim=12, epochs=30, seed=55).fit(triples)
    assert a.checksum() == b.checksum()
    c = TransE(dim=12, epochs=30, seed=83).fit(triples)
    assert a.checksum() != c.checksum()


def containment_kg():
    """20 entities: 4 containers, 16 items; items of one container form an
    adjacency ring, so a held-out containment edge stays predictable."""
    triples = []
    entities = [f"K{c}" for c in range(4)] + [f"I{i:02d}" for i in range(16)]
    for i in range(16):
        triples.append(Triple(f"I{i:02d}", "contained_in", f"K{i // 4}"))
    for c in range(4):
        members = [f"I{i:02d}" for i in range(4 * c, 4 * c + 4)]
        for j, item in enumerate(members):
            triples.append(Triple(item, "adjacent_to", members[(j + 1) % 4]))
    return entities, triples


def test_heldout_beats_random_baseline():
    entities, triples = containment_kg()
    heldout = [t for t in triples
               if t.relation == "contained_in" and t.head in
               {"I00", "I05", "I10", "I15"}]
    train = [t for t in triples if t not in heldout]
    model = TransE(dim=16, epochs=400, learning_rate=0.05, seed=55)
    model.fit(train, entities=entities)
    hits = 0
    for t in heldout:
        ranked = model.recall(
            Query(t.head, "contained_in", Direction.TAIL_PREDICTION), 10)
        hits += t.tail in ranked
    hits_at_10 = hits / len(heldout)
    # uniform-random ranker baseline: P(gold in top 10 of 20) = 0.5
    assert hits_at_10 > 0.5


def test_recall_is_sorted_prefix_of_full_permutation():
    triples = chain_kg(6)
    model = TransE(dim=8, epochs=50, seed=3).fit(triples)
    query = Query("e00", "r", Direction.TAIL_PREDICTION)
    full = model.recall(query, len(model.entities_))
    assert sorted(full) == sorted(model.entities_)  # permutation
    for x in range(1, len(full) + 1):
        assert model.recall(query, x) == full[:x]
    # brute-force score sort oracle
    scored = sorted(((model.score_triple("e00", "r", e), e)
                     for e in model.entities_), key=lambda p: (-p[0], p[1]))
    assert full == [e for _, e in scored]


def test_recall_head_direction():
    triples = chain_kg(6)
    model = TransE(dim=8, epochs=50, seed=3).fit(triples)
    query = Query("e05", "r", Direction.HEAD_PREDICTION)
    scored = sorted(((model.score_triple(e, "r", "e05"), e)
                     for e in model.entities_), key=lambda p: (-p[0], p[1]))
    assert model.recall(query, 4) == [e for _, e in scored][:4]


def test_recall_bounds_checked():
    model = TransE(dim=4, epochs=5, seed=1).fit(chain_kg(5))
    query = Query("e00", "r", Direction.TAIL_PREDICTION)
    with pytest.raises(ConfigError):
        model.recall(query, 0)
    with pytest.raises(ConfigError):
        model.recall(query, 99)


def test_fit_validations():
    with pytest.raises(ConfigError):
        TransE(dim=0).fit([Triple("a", "r", "b")])
    with pytest.raises(ConfigError):
        TransE().fit([])


def test_embeddings_unit_norm():
    import numpy as np
    model = TransE(dim=8, epochs=20, seed=9).fit(chain_kg(8))
    norms = np.linalg.norm(model.entity_vecs_, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-9)


# -- negative generation ---------------------------------------------------------

def small_world():
    entities = ["a", "b", "c", "d", "e"]
    positives = [Triple("a", "r", "b"), Triple("c", "r", "d")]
    known = set(positives) | {Triple("a", "r", "e")}
    model = TransE(dim=6, epochs=100, learning_rate=0.05, seed=11)
    model.fit(positives, entities=entities)
    return entities, positives, known, model


def test_no_negative_in_known_set_and_exact_count():
    entities, positives, known, model = small_world()
    for seed in range(10):
        ts = gen_negatives(model, positives, known, entities, m_ratio=6,
                           kge_fraction=0.5, seed=seed)
        assert len(ts.negatives) == 6 * len(positives)
        for negative in ts.negatives:
            assert negative not in known


def test_kge_fraction_zero_all_random():
    entities, positives, known, model = small_world()
    ts = gen_negatives(None, positives, known, entities, m_ratio=4,
                       kge_fraction=0.0, seed=55)
    assert ts.negatives_kge == ()
    assert len(ts.negatives_rand) == 4 * len(positives)
    for negative in ts.negatives_rand:
        assert negative not in known


def test_kge_corruptions_equal_bruteforce_argmax():
    entities, positives, known, model = small_world()
    m_ratio, kge_fraction = 4, 0.5
    ts = gen_negatives(model, positives, known, entities, m_ratio=m_ratio,
                       kge_fraction=kge_fraction, seed=55)
    k = math.ceil(kge_fraction * m_ratio)

    # oracle: score all corruptions per side, interleave tail/head, filter.
    got_by_positive = {}
    for negative in ts.negatives_kge:
        key = next(p for p in positives
                   if p.relation == negative.relation
                   and (p.head == negative.head or p.tail == negative.tail))
        got_by_positive.setdefault(key, []).append(negative)

    for positive in positives:
        tails = sorted(((model.score_triple(positive.head, "r", e), e)
                        for e in entities if e != positive.tail),
                       key=lambda p: (-p[0], p[1]))
        heads = sorted(((model.score_triple(e, "r", positive.tail), e)
                        for e in entities if e != positive.head),
                       key=lambda p: (-p[0], p[1]))
        stream = []
        for i in range(max(len(tails), len(heads))):
            if i < len(tails):
                stream.append(Triple(positive.head, "r", tails[i][1]))
            if i < len(heads):
                stream.append(Triple(heads[i][1], "r", positive.tail))
        expected, taken = [], set()
        for cand in stream:
            if len(expected) >= k:
                break
            if cand in known or cand in taken:
                continue
            taken.add(cand)
            expected.append(cand)
        assert got_by_positive[positive] == expected


def test_sampling_error_when_pool_too_small():
    entities = ["a", "b"]
    positives = [Triple("a", "r", "b")]
    known = {Triple("a", "r", "b"), Triple("b", "r", "a"),
             Triple("a", "r", "a"), Triple("b", "r", "b")}
    with pytest.raises(SamplingError):
        gen_negatives(None, positives, known, entities, m_ratio=3,
                      kge_fraction=0.0, seed=1)


def test_deterministic_given_seed():
    entities, positives, known, model = small_world()
    a = gen_negatives(model, positives, known, entities, 6, 0.5, seed=42)
    b = gen_negatives(model, positives, known, entities, 6, 0.5, seed=42)
    assert a.negatives == b.negatives
    c = gen_negatives(model, positives, known, entities, 6, 0.5, seed=43)
    assert a.negatives_rand != c.negatives_rand
