"""HTTP client for the v1 scoring protocol.

Transport failures (unreachable host, timeouts) raise
:class:`~kgcloze.errors.TransportError`; protocol-level failures surface as
:class:`~kgcloze.errors.RemoteRequestError` (4xx) or
:class:`~kgcloze.errors.RemoteServerError` (5xx), both carrying the status
code and the server's ``{"error": ...}`` message.
"""

from __future__ import annotations

from typing import Any, Dict, Optional, Sequence, Tuple

import requests

from .errors import RemoteRequestError, RemoteServerError, TransportError
from .protocol import PROTOCOL_VERSION
from .scoring import ClassificationScore, ClozeDistribution

WIRE_TOL = 1e-6


class RemoteScorer:
    """Scorer backed by a remote service implementing the wire protocol."""

    model_name = "remote"

    def __init__(self, base_url: str, timeout: float = 60.0,
                 session: Optional[requests.Session] = None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.session = session or requests.Session()

    def _request(self, method: str, endpoint: str,
                 body: Optional[dict] = None) -> Dict[str, Any]:
        url = f"{self.base_url}/{PROTOCOL_VERSION}/{endpoint}"
        try:
            if method == "GET":
                response = self.session.get(url, timeout=self.timeout)
            else:
                response = self.session.post(url, json=body, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"scorer at {self.base_url} unreachable: {exc}")
        if response.status_code >= 400:
            try:
                message = response.json().get("error", response.text)
            except ValueError:
                message = response.text
            if response.status_code < 500:
                raise RemoteRequestError(message, status=response.status_code)
            raise RemoteServerError(message, status=response.status_code)
        try:
            return response.json()
        except ValueError as exc:
            raise RemoteServerError(f"non-JSON response: {exc}",
                                    status=response.status_code)

    def health(self) -> Dict[str, Any]:
        return self._request("GET", "health")

    def score_cloze(self, text: str, candidates: Sequence[str]) -> ClozeDistribution:
        payload = self._request("POST", "score_cloze",
                                {"text": text, "candidates": list(candidates)})
        probs = payload.get("probs")
        if not isinstance(probs, list) or len(probs) != len(candidates):
            raise RemoteServerError("probs must align with candidates", status=200)
        total = sum(probs)
        if abs(total - 1.0) > WIRE_TOL or any(p < 0 for p in probs):
            raise RemoteServerError(
                f"probs must be nonnegative and sum to 1 within {WIRE_TOL}",
                status=200)
        return ClozeDistribution(candidates=tuple(candidates),
                                 probs=tuple(p / total for p in probs))

    def classify(self, text: str) -> ClassificationScore:
        payload = self._request("POST", "classify", {"text": text})
        c0, c1 = payload.get("c0"), payload.get("c1")
        if not isinstance(c0, (int, float)) or not isinstance(c1, (int, float)):
            raise RemoteServerError("classify must return numeric c0/c1", status=200)
        total = c0 + c1
        if abs(total - 1.0) > WIRE_TOL or c0 < 0 or c1 < 0:
            raise RemoteServerError(
                f"c0 + c1 must equal 1 within {WIRE_TOL}", status=200)
        return ClassificationScore(c0=c0 / total, c1=c1 / total)

    def finetune(self, instances: Sequence[Tuple[str, int]], m_ratio: int,
                 epochs: int) -> str:
        body = {
            "instances": [{"text": t, "label": l} for t, l in instances],
            "m_ratio": m_ratio,
            "epochs": epochs,
        }
        payload = self._request("POST", "finetune", body)
        version = payload.get("model_version")
        if not isinstance(version, str) or not version:
            raise RemoteServerError("finetune must return a model_version",
                                    status=200)
        return version
