"""Wire protocol: validation, dispatch, live server, client error mapping."""

import pytest

from kgcloze.corpus import CorpusStore, Sentence
from kgcloze.errors import (RemoteRequestError, RemoteServerError, ScoringError,
                            TransportError)
from kgcloze.protocol import dispatch
from kgcloze.remote import RemoteScorer
from kgcloze.scoring import CorpusStats, ReferenceScorer
from kgcloze.server import serve_scorer
from kgcloze.text import tokenize


def scorer():
    raws = ["alba lies in piedmont"] * 4 + ["texas has ranches", "plain filler here"]
    sentences = [Sentence(doc_id=f"d{i}", index=0, raw=r,
                          tokens=tuple(tokenize(r)), source="reliable")
                 for i, r in enumerate(raws)]
    stats = CorpusStats(CorpusStore(sentences, source="reliable"))
    ref = ReferenceScorer(stats, learning_rate=0.5, epochs=20)
    ref.model_name = "reference-ppmi"
    return ref


# -- in-process dispatch -------------------------------------------------------

def test_health():
    status, body = dispatch(scorer(), "GET", "/v1/health", None)
    assert status == 200
    assert body["status"] == "ok" and body["model"]


def test_score_cloze_contract():
    status, body = dispatch(scorer(), "POST", "/v1/score_cloze",
                            {"text": "[CLS] [SEP] alba lies in [MASK]",
                             "candidates": ["piedmont", "texas", "plain"]})
    assert status == 200
    assert len(body["probs"]) == 3
    assert abs(sum(body["probs"]) - 1.0) <= 1e-6


def test_score_cloze_validation_errors():
    cases = [
        {"text": "no mask", "candidates": ["a"]},
        {"text": "two [MASK] and [MASK]", "candidates": ["a"]},
        {"text": "[MASK]", "candidates": []},
        {"candidates": ["a"]},
        "not an object",
    ]
    for body in cases:
        status, payload = dispatch(scorer(), "POST", "/v1/score_cloze", body)
        assert status == 400
        assert "error" in payload


def test_classify_contract_and_validation():
    status, body = dispatch(scorer(), "POST", "/v1/classify",
                            {"text": "[CLS] [SEP] alba lies in piedmont"})
    assert status == 200
    assert abs(body["c0"] + body["c1"] - 1.0) <= 1e-6
    status, body = dispatch(scorer(), "POST", "/v1/classify", {})
    assert status == 400 and "error" in body


def test_finetune_contract_and_validation():
    sc = scorer()
    ok_body = {"instances": [{"text": "[CLS] [SEP] alba lies in piedmont",
                              "label": 1},
                             {"text": "[CLS] [SEP] alba lies in texas",
                              "label": 0}],
               "m_ratio": 30, "epochs": 2}
    status, body = dispatch(sc, "POST", "/v1/finetune", ok_body)
    assert status == 200 and isinstance(body["model_version"], str)

    bad = dict(ok_body)
    bad["instances"] = [{"text": "x", "label": 2}]
    status, body = dispatch(sc, "POST", "/v1/finetune", bad)
    assert status == 400 and "error" in body


def test_unknown_route_404():
    status, body = dispatch(scorer(), "POST", "/v1/unknown", {})
    assert status == 404 and "error" in body


def test_scoring_failure_is_5xx():
    class Broken:
        model_name = "broken"

        def score_cloze(self, text, candidates):
            raise RuntimeError("boom")

    status, body = dispatch(Broken(), "POST", "/v1/score_cloze",
                            {"text": "[MASK]", "candidates": ["a"]})
    assert status == 500 and "boom" in body["error"]


# -- live server + client --------------------------------------------------------

def test_remote_scorer_round_trip():
    with serve_scorer(scorer()) as url:
        remote = RemoteScorer(url)
        health = remote.health()
        assert health["status"] == "ok"

        dist = remote.score_cloze("[CLS] [SEP] alba lies in [MASK]",
                                  ["piedmont", "texas"])
        assert dist.prob_of("piedmont") > dist.prob_of("texas")

        score = remote.classify("[CLS] [SEP] alba lies in piedmont")
        assert score.c0 + score.c1 == pytest.approx(1.0, abs=1e-9)

        version = remote.finetune(
            [("[CLS] [SEP] alba lies in piedmont", 1),
             ("[CLS] [SEP] alba lies in texas", 0)], m_ratio=5, epochs=3)
        assert isinstance(version, str) and version


def test_remote_4xx_maps_to_request_error():
    with serve_scorer(scorer()) as url:
        remote = RemoteScorer(url)
        with pytest.raises(RemoteRequestError) as err:
            remote.score_cloze("no mask at all", ["a"])
        assert 400 <= err.value.status < 500
        assert isinstance(err.value, ScoringError)


def test_remote_5xx_maps_to_server_error():
    class Broken:
        model_name = "broken"

        def classify(self, text):
            raise RuntimeError("exploded")

    with serve_scorer(Broken()) as url:
        remote = RemoteScorer(url)
        with pytest.raises(RemoteServerError) as err:
            remote.classify("anything")
        assert err.value.status >= 500


def test_unreachable_host_is_transport_error():
    remote = RemoteScorer("http://127.0.0.1:9", timeout=0.5)
    with pytest.raises(TransportError):
        remote.classify("anything")
    with pytest.raises(TransportError):
        remote.score_cloze("[MASK]", ["a"])


def test_repeated_requests_identical():
    with serve_scorer(scorer()) as url:
        remote = RemoteScorer(url)
        text = "[CLS] [SEP] alba lies in [MASK]"
        first = remote.score_cloze(text, ["piedmont", "texas"])
        second = remote.score_cloze(text, ["piedmont", "texas"])
        assert first.probs == second.probs
