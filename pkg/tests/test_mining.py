"""Phrase fusion and frequent-pattern mining against brute-force oracles."""

import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from kgcloze.corpus import Sentence, SubCorpus, TupleEntry
from kgcloze.errors import ConfigError
from kgcloze.mining import (AnnotatedSubCorpus, mine_candidates, ngram_pmi,
                            segment_phrases, window_segments)
from kgcloze.text import tokenize


def make_sub_corpus(relation, entries):
    """entries: list of (head_label, tail_label, [raw sentences])."""
    sub = SubCorpus(relation=relation, theta=500)
    for idx, (head, tail, raws) in enumerate(entries):
        entry = TupleEntry(f"h{idx}", f"t{idx}", head, tail)
        sentences = tuple(
            Sentence(doc_id=f"d{idx}", index=i, raw=raw,
                     tokens=tuple(tokenize(raw)))
            for i, raw in enumerate(raws))
        sub.entries[entry] = sentences
    return sub


# -- oracle: brute-force window enumeration (independent of the library) ----

def oracle_patterns(sentences, min_support, max_window):
    placeholder = {"[X]", "[Y]"}
    by_pattern = {}
    for sid, tokens in enumerate(sentences):
        tokens = list(tokens)
        anchors = [i for i, t in enumerate(tokens) if t in placeholder]
        intervals = []
        for p in anchors:
            intervals.append((max(0, p - max_window),
                              min(len(tokens), p + max_window + 1)))
        merged = []
        for start, end in sorted(intervals):
            if merged and start <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], end))
            else:
                merged.append((start, end))
        for seg_start, seg_end in merged:
            seg = tokens[seg_start:seg_end]
            for i in range(len(seg)):
                for j in range(i + 1, min(i + max_window, len(seg)) + 1):
                    by_pattern.setdefault(tuple(seg[i:j]), set()).add(sid)
    return {p: len(s) for p, s in by_pattern.items() if len(s) >= min_support}


def annotated_from_rewritten(relation, rewritten):
    """Wrap pre-rewritten sentences (already containing [X]/[Y]) for mining."""
    annotated = AnnotatedSubCorpus(relation=relation)
    from kgcloze.mining import AnnotatedSentence
    entry = TupleEntry("h", "t", "zzhead", "zztail")
    sentences = []
    for tokens in rewritten:
        tokens = tuple(tokens)
        head_spans = tuple((i, i + 1) for i, t in enumerate(tokens) if t == "[X]")
        tail_spans = tuple((i, i + 1) for i, t in enumerate(tokens) if t == "[Y]")
        # store the placeholders as literal tokens; rewritten() maps spans onto
        # them again, which is the identity here
        sentences.append(AnnotatedSentence(tokens=tokens, head_spans=head_spans,
                                           tail_spans=tail_spans))
    annotated.entries[entry] = tuple(sentences)
    return annotated


# -- phrase segmentation -----------------------------------------------------

def test_frequent_high_pmi_ngram_fused():
    # Varied context so only "new york city" (and its sub-grams) repeats.
    fillers = ["visited", "left", "praised", "mapped", "toured", "sketched",
               "filmed", "audited", "painted", "sued", "backed", "ranked"]
    raws = [f"agent {i} {fillers[i]} new york city {fillers[11 - i]} today"
            for i in range(12)]
    sub = make_sub_corpus("r", [("agent", "today", raws)])
    annotated = segment_phrases(sub, min_phrase_count=12, pmi_floor=0.5, max_n=3)
    entry = next(iter(annotated.entries))
    tokens = annotated.entries[entry][0].tokens
    assert "new york city" in tokens

    # oracle: count and PMI by hand
    all_tokens = [t for _, sents in sub.entries.items() for s in sents
                  for t in s.tokens]
    total = len(all_tokens)
    count = dict()
    for t in all_tokens:
        count[t] = count.get(t, 0) + 1
    gram_count = 12  # appears once per sentence
    expected_pmi = (math.log(gram_count) + 2 * math.log(total)
                    - sum(math.log(count[t]) for t in ("new", "york", "city"))) / 2
    assert ngram_pmi(12, [count["new"], count["york"], count["city"]], total) \
        == pytest.approx(expected_pmi)
    assert expected_pmi >= 0.5


def test_unique_sentences_identity():
    raws = ["alpha beta gamma", "delta epsilon zeta", "eta theta iota"]
    sub = make_sub_corpus("r", [("alpha", "gamma", raws)])
    annotated = segment_phrases(sub, min_phrase_count=2)
    entry = next(iter(annotated.entries))
    for original, sent in zip(raws, annotated.entries[entry]):
        assert sent.tokens == tuple(original.split())


def test_longest_match_wins():
    raws = [f"case {i} saw new york city hall again" for i in range(10)]
    sub = make_sub_corpus("r", [("case", "hall", raws)])
    annotated = segment_phrases(sub, min_phrase_count=5, pmi_floor=0.1, max_n=4)
    entry = next(iter(annotated.entries))
    tokens = annotated.entries[entry][0].tokens
    # the longest qualifying gram containing "new york" must win over the pair
    assert not any(t == "new york" for t in tokens)
    assert any("new york city" in t for t in tokens)


def test_mention_spans_never_fused():
    raws = [f"report {i} says acme labs hired many people" for i in range(10)]
    sub = make_sub_corpus("r", [("acme labs", "people", raws)])
    annotated = segment_phrases(sub, min_phrase_count=3, pmi_floor=0.1)
    entry = next(iter(annotated.entries))
    for sent in annotated.entries[entry]:
        for start, end in sent.head_spans:
            assert sent.tokens[start:end] == ("acme", "labs")
        rewritten = sent.rewritten()
        assert rewritten.count("[X]") == len(sent.head_spans)
        assert rewritten.count("[Y]") == len(sent.tail_spans)


# -- pattern mining -----------------------------------------------------------

def test_headquartered_support_three():
    rewritten = [
        ["[X]", "is", "headquartered", "in", "[Y]"],
        ["today", "[X]", "is", "headquartered", "in", "[Y]", "proudly"],
        ["[X]", "is", "headquartered", "in", "[Y]", "since", "1990"],
        ["[X]", "moved", "to", "[Y]"],
        ["[X]", "operates", "near", "[Y]"],
    ]
    annotated = annotated_from_rewritten("r", rewritten)
    result = mine_candidates(annotated, min_support=2, max_window=10)
    by_pattern = {c.pattern: c.support for c in result.candidates}
    assert by_pattern[("[X]", "is", "headquartered", "in", "[Y]")] == 3


def test_five_sentence_fixture_equals_oracle():
    rewritten = [
        ["[X]", "founded", "[Y]", "in", "april"],
        ["[X]", "founded", "[Y]", "years", "ago"],
        ["the", "famous", "[X]", "founded", "[Y]"],
        ["[X]", "bought", "[Y]", "in", "april"],
        ["[X]", "visited", "[Y]"],
    ]
    annotated = annotated_from_rewritten("r", rewritten)
    result = mine_candidates(annotated, min_support=2, max_window=6)
    got = {c.pattern: c.support for c in result.candidates}
    assert got == oracle_patterns(rewritten, 2, 6)


def test_min_support_above_corpus_size_empty():
    rewritten = [["[X]", "likes", "[Y]"], ["[X]", "hates", "[Y]"]]
    annotated = annotated_from_rewritten("r", rewritten)
    result = mine_candidates(annotated, min_support=3, max_window=5)
    assert result.candidates == ()


def test_min_support_zero_rejected():
    annotated = annotated_from_rewritten("r", [["[X]", "a", "[Y]"]])
    with pytest.raises(ConfigError):
        mine_candidates(annotated, min_support=0, max_window=5)


def test_support_counts_sentences_not_occurrences():
    rewritten = [["[X]", "near", "[Y]", "and", "near", "[Y]"],
                 ["[X]", "near", "[Y]"]]
    annotated = annotated_from_rewritten("r", rewritten)
    result = mine_candidates(annotated, min_support=1, max_window=4)
    got = {c.pattern: c.support for c in result.candidates}
    assert got[("near", "[Y]")] == 2  # twice in sentence 0, once in 1 -> 2 sentences


def test_monotone_in_min_support():
    rng = random.Random(7)
    rewritten = [["[X]"] + [rng.choice("abcde") for _ in range(6)] + ["[Y]"]
                 for _ in range(20)]
    annotated = annotated_from_rewritten("r", rewritten)
    low = {c.pattern for c in mine_candidates(annotated, 2, 5).candidates}
    high = {c.pattern for c in mine_candidates(annotated, 4, 5).candidates}
    assert high <= low


def test_window_segments_merge():
    tokens = ("a", "[X]", "b", "c", "[Y]", "d")
    assert window_segments(tokens, 2) == [(0, 6)]
    assert window_segments(("x", "y", "z"), 3) == []


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31),
       n_sentences=st.integers(min_value=1, max_value=12),
       min_support=st.integers(min_value=1, max_value=4),
       max_window=st.integers(min_value=1, max_value=6))
def test_miner_equals_oracle_random(seed, n_sentences, min_support, max_window):
    rng = random.Random(seed)
    vocab = list("abcdefg")
    rewritten = []
    for _ in range(n_sentences):
        length = rng.randrange(2, 9)
        tokens = [rng.choice(vocab) for _ in range(length)]
        tokens[rng.randrange(length)] = "[X]"
        if rng.random() < 0.8:
            pos = rng.randrange(length)
            if tokens[pos] != "[X]":
                tokens[pos] = "[Y]"
        rewritten.append(tokens)
    annotated = annotated_from_rewritten("r", rewritten)
    got = {c.pattern: c.support
           for c in mine_candidates(annotated, min_support, max_window).candidates}
    assert got == oracle_patterns(rewritten, min_support, max_window)
