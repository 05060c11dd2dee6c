import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sentmetrics.errors import ProtocolError, ValidationError
from sentmetrics.protocol import (
    ErrorResponse,
    HiddenStateRequest,
    HiddenStateResponse,
    LogProbRequest,
    LogProbResponse,
    NspRequest,
    NspResponse,
    clamp_probability,
    decode_request,
    decode_response,
    encode_request,
    encode_response,
)

finite_logprob = st.floats(min_value=-50.0, max_value=0.0, allow_nan=False)
text = st.text(min_size=1, max_size=40)


class TestCodecRoundTrip:
    def test_logprob_request(self):
        req = LogProbRequest("r1", "some context", "a target", "causal")
        assert decode_request(encode_request(req)) == req

    def test_empty_context_allowed(self):
        req = LogProbRequest("r1", "", "target", "masked-bidirectional")
        assert decode_request(encode_request(req)) == req

    @given(st.lists(finite_logprob, min_size=1, max_size=10))
    @settings(max_examples=100, deadline=None)
    def test_logprob_response(self, logprobs):
        resp = LogProbResponse(
            "r9", tuple(f"t{i}" for i in range(len(logprobs))), tuple(logprobs)
        )
        assert decode_response(encode_response(resp)) == resp

    def test_hidden_state_response(self):
        resp = HiddenStateResponse("r2", ((1.0, -0.5), (0.25, 2.0)), 2, truncated_to=7)
        assert decode_response(encode_response(resp)) == resp

    def test_nsp_round_trip(self):
        req = NspRequest("r3", "Sentence A.", "Sentence B.")
        assert decode_request(encode_request(req)) == req
        resp = NspResponse("r3", 0.5)
        assert decode_response(encode_response(resp)) == resp

    def test_error_response(self):
        resp = ErrorResponse("r4", "model: out of memory")
        assert decode_response(encode_response(resp)) == resp
        assert resp.error_code() == "model"

    @given(text, text)
    @settings(max_examples=100, deadline=None)
    def test_arbitrary_text_round_trips(self, context, target):
        req = LogProbRequest("rid", context, target)
        assert decode_request(encode_request(req)) == req


class TestWireFormat:
    def test_trailing_newline_no_interior(self):
        req = LogProbRequest("r1", "line one", "with \n newline inside")
        data = encode_request(req)
        assert data.endswith(b"\n")
        assert b"\n" not in data[:-1]

    def test_requests_and_responses_are_disjoint(self):
        req = LogProbRequest("r1", "", "x")
        with pytest.raises(ProtocolError):
            decode_response(encode_request(req))
        resp = NspResponse("r1", 0.5)
        with pytest.raises(ProtocolError):
            decode_request(encode_response(resp))


class TestValidation:
    def test_positive_logprob_rejected(self):
        with pytest.raises(ValidationError):
            LogProbResponse("r", ("a",), (0.5,))

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValidationError):
            LogProbResponse("r", ("a", "b"), (-1.0,))

    def test_empty_target_rejected(self):
        with pytest.raises(ValidationError):
            LogProbRequest("r", "ctx", "")

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValidationError):
            LogProbRequest("r", "", "x", mode="telepathic")

    def test_p_is_next_bounds(self):
        for bad in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValidationError):
                NspResponse("r", bad)

    def test_matrix_width_checked(self):
        with pytest.raises(ValidationError):
            HiddenStateResponse("r", ((1.0, 2.0), (3.0,)), 2)

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            LogProbResponse("r", ("a",), (float("-inf"),))
        with pytest.raises(ValidationError):
            HiddenStateResponse("r", ((float("nan"),),), 1)

    def test_unknown_kind(self):
        with pytest.raises(ProtocolError):
            decode_response('{"kind": "mystery", "request_id": "r"}')

    def test_bad_json(self):
        with pytest.raises(ProtocolError):
            decode_response(b"{not json")

    def test_missing_field(self):
        with pytest.raises(ValidationError):
            decode_response('{"kind": "nsp_response", "request_id": "r"}')


class TestProbabilities:
    @given(st.lists(finite_logprob, min_size=1, max_size=20))
    @settings(max_examples=200, deadline=None)
    def test_exponentials_in_unit_interval(self, logprobs):
        resp = LogProbResponse("r", tuple("t" * len(logprobs)), tuple(logprobs))
        for lp in resp.logprobs:
            assert 0.0 < math.exp(lp) <= 1.0

    def test_clamp(self):
        assert clamp_probability(0.0) == 1e-12
        assert clamp_probability(1.0) == 1.0 - 1e-12
        assert clamp_probability(0.37) == 0.37
