"""Scoring wire protocol (v1): validation and in-process dispatch.

The same request/response semantics back three transports: the in-process
dispatcher below (used by tests and the bundled reference server), the stdlib
HTTP server in :mod:`kgcloze.server`, and any remote implementation of the
protocol.  Malformed requests yield 4xx with ``{"error": str}``; scoring
failures yield 5xx with the same shape.
"""

from __future__ import annotations

from typing import Any, Dict, List, Sequence, Tuple

from .retrieval import MASK_TOKEN
from .scoring import Scorer

PROTOCOL_VERSION = "v1"


class ProtocolError(Exception):
    def __init__(self, status: int, message: str):
        self.status = status
        self.message = message
        super().__init__(message)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ProtocolError(400, message)


def validate_score_cloze(body: Any) -> Tuple[str, List[str]]:
    _require(isinstance(body, dict), "body must be a JSON object")
    text = body.get("text")
    candidates = body.get("candidates")
    _require(isinstance(text, str), "text must be a string")
    _require(text.count(MASK_TOKEN) == 1,
             f"text must contain exactly one {MASK_TOKEN}")
    _require(isinstance(candidates, list) and len(candidates) > 0,
             "candidates must be a non-empty list")
    _require(all(isinstance(c, str) and c for c in candidates),
             "candidates must be non-empty strings")
    return text, list(candidates)


def validate_classify(body: Any) -> str:
    _require(isinstance(body, dict), "body must be a JSON object")
    text = body.get("text")
    _require(isinstance(text, str) and bool(text), "text must be a non-empty string")
    return text


def validate_finetune(body: Any) -> Tuple[List[Tuple[str, int]], int, int]:
    _require(isinstance(body, dict), "body must be a JSON object")
    instances = body.get("instances")
    m_ratio = body.get("m_ratio")
    epochs = body.get("epochs")
    _require(isinstance(instances, list) and len(instances) > 0,
             "instances must be a non-empty list")
    parsed = []
    for item in instances:
        _require(isinstance(item, dict), "instances must be objects")
        text = item.get("text")
        label = item.get("label")
        _require(isinstance(text, str) and bool(text),
                 "instance text must be a non-empty string")
        _require(label in (0, 1), "instance label must be 0 or 1")
        parsed.append((text, int(label)))
    _require(isinstance(m_ratio, int) and not isinstance(m_ratio, bool)
             and m_ratio >= 1, "m_ratio must be an integer >= 1")
    _require(isinstance(epochs, int) and not isinstance(epochs, bool)
             and epochs >= 0, "epochs must be an integer >= 0")
    return parsed, m_ratio, epochs


def dispatch(scorer: Scorer, method: str, path: str,
             body: Any) -> Tuple[int, Dict[str, Any]]:
    """Route one protocol request to a scorer; never raises."""
    try:
        if method == "GET" and path == f"/{PROTOCOL_VERSION}/health":
            model = getattr(scorer, "model_name", type(scorer).__name__)
            return 200, {"status": "ok", "model": model}
        if method != "POST":
            return 404, {"error": f"no route for {method} {path}"}
        if path == f"/{PROTOCOL_VERSION}/score_cloze":
            text, candidates = validate_score_cloze(body)
            dist = scorer.score_cloze(text, candidates)
            return 200, {"probs": list(dist.probs)}
        if path == f"/{PROTOCOL_VERSION}/classify":
            text = validate_classify(body)
            score = scorer.classify(text)
            return 200, {"c0": score.c0, "c1": score.c1}
        if path == f"/{PROTOCOL_VERSION}/finetune":
            instances, m_ratio, epochs = validate_finetune(body)
            version = scorer.finetune(instances, m_ratio=m_ratio, epochs=epochs)
            return 200, {"model_version": version}
        return 404, {"error": f"no route for {method} {path}"}
    except ProtocolError as exc:
        return exc.status, {"error": exc.message}
    except Exception as exc:  # scoring failure -> 5xx
        return 500, {"error": f"{type(exc).__name__}: {exc}"}
