"""Wire messages: one JSON object per line, ``kind`` discriminated.

Request kinds and their payload fields:

* ``logprobs``       -- ``context`` (may be empty), ``target``, ``mode``
  (``causal`` or ``masked-bidirectional``)
* ``hidden_states``  -- text in ``target``
* ``nsp``            -- sentence A in ``context``, sentence B in ``target``

Responses are ``logprobs_response`` (``tokens``, ``logprobs``),
``hidden_states_response`` (``matrix``, ``dim``), ``nsp_response``
(``p_is_next``), or ``error`` with an ``error`` string of the form
``"code: message"`` (codes: ``validation``, ``capability``, ``model``,
``protocol``). Log-probabilities are natural logs. An optional
``truncated_to`` field reports how many context tokens survived
left-truncation when the model window overflowed.
"""

from __future__ import annotations

import json
from typing import Any

MODE_CAUSAL = "causal"
MODE_MASKED = "masked-bidirectional"
MODES = (MODE_CAUSAL, MODE_MASKED)

REQUEST_KINDS = ("logprobs", "hidden_states", "nsp")


class SidecarError(Exception):
    """Failure with a protocol error code attached."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code

    def wire(self) -> str:
        return f"{self.code}: {self}"


def parse_request(line: str | bytes) -> dict[str, Any]:
    """Parse and structurally validate one request line."""
    if isinstance(line, bytes):
        line = line.decode("utf-8")
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SidecarError("protocol", f"bad JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SidecarError("protocol", "request must be a JSON object")
    kind = obj.get("kind")
    if kind not in REQUEST_KINDS:
        raise SidecarError("protocol", f"unknown request kind {kind!r}")
    if not isinstance(obj.get("request_id"), str):
        raise SidecarError("validation", f"{kind}: request_id must be a string")

    target = obj.get("target")
    if not isinstance(target, str) or not target:
        raise SidecarError("validation", f"{kind}: target must be a non-empty string")
    if kind == "logprobs":
        context = obj.get("context", "")
        if not isinstance(context, str):
            raise SidecarError("validation", "logprobs: context must be a string")
        obj["context"] = context
        mode = obj.get("mode", MODE_CAUSAL)
        if mode not in MODES:
            raise SidecarError("validation", f"logprobs: unknown mode {mode!r}")
        obj["mode"] = mode
    elif kind == "nsp":
        context = obj.get("context")
        if not isinstance(context, str) or not context:
            raise SidecarError(
                "validation", "nsp: context (sentence A) must be a non-empty string"
            )
    return obj


def encode(payload: dict[str, Any]) -> bytes:
    """One canonical JSON line, sorted keys, trailing newline."""
    return (json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def error_payload(request_id: str, exc: SidecarError) -> dict[str, Any]:
    return {"kind": "error", "request_id": request_id, "error": exc.wire()}
