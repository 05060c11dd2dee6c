"""Newline-delimited JSON protocol spoken to a model-inference provider.

Every message is one JSON object per line with a ``kind`` discriminator.
Field names on the wire: ``kind``, ``request_id``, ``context``, ``target``,
``mode``, ``tokens``, ``logprobs``, ``matrix``, ``dim``, ``p_is_next``,
``truncated_to``, ``error``. Text payloads always travel in ``context`` /
``target``: a hidden-state request puts its text in ``target``; an NSP
request puts sentence A in ``context`` and sentence B in ``target``.

Log-probabilities are natural logs on the wire; conversion to bits happens
exactly once, in :mod:`sentmetrics.surprisal`. ``error`` strings follow a
``code: message`` convention with codes ``validation``, ``capability``,
``model``, and ``protocol``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from typing import Any, Union

from .errors import ProtocolError, ValidationError

MODE_CAUSAL = "causal"
MODE_MASKED = "masked-bidirectional"
MODES = (MODE_CAUSAL, MODE_MASKED)

#: Probabilities are clamped to this open interval before logging so that
#: softmax saturation can never produce infinite surprisal.
PROB_CLAMP = 1e-12


def clamp_probability(p: float) -> float:
    """Clamp ``p`` into ``[PROB_CLAMP, 1 - PROB_CLAMP]``."""
    return min(max(float(p), PROB_CLAMP), 1.0 - PROB_CLAMP)


@dataclass(frozen=True)
class LogProbRequest:
    """Ask for per-token log-probabilities of ``target`` given ``context``."""

    request_id: str
    context: str
    target: str
    mode: str = MODE_CAUSAL

    kind = "logprobs"

    def __post_init__(self) -> None:
        if not self.target:
            raise ValidationError("logprobs: target must be non-empty")
        if self.mode not in MODES:
            raise ValidationError(f"logprobs: unknown mode {self.mode!r}")


@dataclass(frozen=True)
class HiddenStateRequest:
    """Ask for per-token final-layer vectors of the text in ``target``."""

    request_id: str
    target: str

    kind = "hidden_states"

    def __post_init__(self) -> None:
        if not self.target:
            raise ValidationError("hidden_states: target must be non-empty")


@dataclass(frozen=True)
class NspRequest:
    """Ask for the probability that ``target`` follows ``context``."""

    request_id: str
    context: str
    target: str

    kind = "nsp"

    def __post_init__(self) -> None:
        if not self.context:
            raise ValidationError("nsp: context (sentence A) must be non-empty")
        if not self.target:
            raise ValidationError("nsp: target (sentence B) must be non-empty")


@dataclass(frozen=True)
class LogProbResponse:
    """Per-token natural-log probabilities, one per subword of the target."""

    request_id: str
    tokens: tuple[str, ...]
    logprobs: tuple[float, ...]
    truncated_to: int | None = None

    kind = "logprobs_response"

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.logprobs):
            raise ValidationError(
                f"logprobs_response: {len(self.tokens)} tokens vs "
                f"{len(self.logprobs)} logprobs"
            )
        if len(self.tokens) < 1:
            raise ValidationError("logprobs_response: empty token list")
        for lp in self.logprobs:
            if not math.isfinite(lp) or lp > 0:
                raise ValidationError(f"logprobs_response: invalid logprob {lp}")


@dataclass(frozen=True)
class HiddenStateResponse:
    """n_tokens x dim matrix of final-layer vectors."""

    request_id: str
    matrix: tuple[tuple[float, ...], ...]
    dim: int
    truncated_to: int | None = None

    kind = "hidden_states_response"

    def __post_init__(self) -> None:
        if len(self.matrix) < 1:
            raise ValidationError("hidden_states_response: empty matrix")
        if self.dim < 1:
            raise ValidationError("hidden_states_response: dim must be >= 1")
        for row in self.matrix:
            if len(row) != self.dim:
                raise ValidationError(
                    f"hidden_states_response: row width {len(row)} != dim {self.dim}"
                )
            for value in row:
                if not math.isfinite(value):
                    raise ValidationError("hidden_states_response: non-finite entry")


@dataclass(frozen=True)
class NspResponse:
    """Probability that sentence B is the next sentence after A."""

    request_id: str
    p_is_next: float

    kind = "nsp_response"

    def __post_init__(self) -> None:
        if not 0.0 < self.p_is_next < 1.0:
            raise ValidationError(
                f"nsp_response: p_is_next must lie in (0, 1), got {self.p_is_next}"
            )


@dataclass(frozen=True)
class ErrorResponse:
    """Backend-reported failure; ``error`` is ``'code: message'``."""

    request_id: str
    error: str

    kind = "error"

    def error_code(self) -> str:
        return self.error.partition(":")[0].strip()


Request = Union[LogProbRequest, HiddenStateRequest, NspRequest]
Response = Union[LogProbResponse, HiddenStateResponse, NspResponse, ErrorResponse]

_REQUEST_KINDS = {cls.kind: cls for cls in (LogProbRequest, HiddenStateRequest, NspRequest)}
_RESPONSE_KINDS = {
    cls.kind: cls
    for cls in (LogProbResponse, HiddenStateResponse, NspResponse, ErrorResponse)
}


def _payload(msg: Request | Response) -> dict[str, Any]:
    body: dict[str, Any] = {"kind": msg.kind}
    for f in fields(msg):
        value = getattr(msg, f.name)
        if f.name == "truncated_to" and value is None:
            continue
        if f.name == "matrix":
            value = [list(row) for row in value]
        elif f.name in ("tokens", "logprobs"):
            value = list(value)
        body[f.name] = value
    return body


def _encode(msg: Request | Response) -> bytes:
    """Canonical one-line JSON: sorted keys, no interior newlines, trailing \\n."""
    return (json.dumps(_payload(msg), sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def encode_request(msg: Request) -> bytes:
    if type(msg) not in _REQUEST_KINDS.values():
        raise ProtocolError(f"not a request: {type(msg).__name__}")
    return _encode(msg)


def encode_response(msg: Response) -> bytes:
    if type(msg) not in _RESPONSE_KINDS.values():
        raise ProtocolError(f"not a response: {type(msg).__name__}")
    return _encode(msg)


def _parse(data: bytes | str) -> dict[str, Any]:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"bad JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError(f"message must be a JSON object, got {type(obj).__name__}")
    if "kind" not in obj:
        raise ProtocolError("message missing 'kind'")
    return obj


def _build(cls, obj: dict[str, Any]):
    kwargs: dict[str, Any] = {}
    for f in fields(cls):
        if f.name not in obj:
            if f.name == "truncated_to":
                continue
            raise ValidationError(f"{obj['kind']}: missing field {f.name!r}")
        value = obj[f.name]
        if f.name == "tokens":
            value = tuple(str(v) for v in value)
        elif f.name == "logprobs":
            value = tuple(float(v) for v in value)
        elif f.name == "matrix":
            value = tuple(tuple(float(v) for v in row) for row in value)
        elif f.name == "p_is_next":
            value = float(value)
        elif f.name in ("dim", "truncated_to") and value is not None:
            value = int(value)
        kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValidationError(f"{obj['kind']}: {exc}") from exc


def decode_request(data: bytes | str) -> Request:
    obj = _parse(data)
    cls = _REQUEST_KINDS.get(obj["kind"])
    if cls is None:
        raise ProtocolError(f"unknown request kind {obj['kind']!r}")
    return _build(cls, obj)


def decode_response(data: bytes | str) -> Response:
    obj = _parse(data)
    cls = _RESPONSE_KINDS.get(obj["kind"])
    if cls is None:
        raise ProtocolError(f"unknown response kind {obj['kind']!r}")
    return _build(cls, obj)
