import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from echoscope.errors import ConfigurationError, ProviderError, ProviderTransportError
from echoscope.providers import (
    MockProvider,
    ParseCounters,
    RemoteProvider,
    Stance,
    StanceItem,
    hash_unit_vector,
    make_provider,
    parse_stance_label,
)
from stub_service import StubServer


class TestHashUnitVector:
    @pytest.mark.parametrize("dim", [1, 2, 7, 16, 768])
    def test_unit_norm(self, dim):
        v = hash_unit_vector("some text", dim)
        assert v.shape == (dim,)
        assert abs(np.linalg.norm(v) - 1.0) < 1e-12

    def test_deterministic_bitwise(self):
        a = hash_unit_vector("same input", 32)
        b = hash_unit_vector("same input", 32)
        assert a.tobytes() == b.tobytes()

    def test_distinct_texts_distinct_vectors(self):
        a = hash_unit_vector("first", 32)
        b = hash_unit_vector("second", 32)
        assert not np.array_equal(a, b)

    def test_prefix_independence_across_dims(self):
        # different dims are different streams only in length for even splits
        a = hash_unit_vector("text", 8)
        assert np.isfinite(a).all()

    def test_rejects_nonpositive_dim(self):
        with pytest.raises(ValueError):
            hash_unit_vector("text", 0)


class TestMockProvider:
    def test_worker_count_does_not_change_bytes(self):
        texts = [f"post title number {i}" for i in range(23)]
        one = MockProvider(dim=16, workers=1).embed_texts(texts)
        four = MockProvider(dim=16, workers=4).embed_texts(texts)
        assert one.tobytes() == four.tobytes()

    def test_empty_input(self):
        out = MockProvider(dim=8).embed_texts([])
        assert out.shape == (0, 8)

    def test_rejects_empty_text(self):
        with pytest.raises(ProviderError):
            MockProvider(dim=8).embed_texts(["ok", ""])

    def test_rejects_non_string(self):
        with pytest.raises(ProviderError):
            MockProvider(dim=8).embed_texts([42])

    def test_marker_stances(self):
        p = MockProvider(dim=8)
        items = [
            StanceItem(post="t", parent="t", comment="AGREE: sure"),
            StanceItem(post="t", parent="t", comment="  DISAGREE: no way"),
            StanceItem(post="t", parent="t", comment="just chatting"),
            StanceItem(post="t", parent="t", comment="I AGREE: but late"),
        ]
        assert p.detect_stances(items) == [Stance.FAVOR, Stance.AGAINST, Stance.NONE, Stance.NONE]

    def test_health(self):
        h = MockProvider(dim=12).health()
        assert h["status"] == "ok"
        assert h["dim"] == 12


class TestParseStanceLabel:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("favor", Stance.FAVOR),
            ("FAVOR", Stance.FAVOR),
            ("The stance is against.", Stance.AGAINST),
            ("none", Stance.NONE),
            ("unsure", Stance.NONE),
            ("favorable outlook", Stance.FAVOR),
            ("against? more like favor", Stance.AGAINST),
        ],
    )
    def test_labels(self, raw, expected):
        assert parse_stance_label(raw) is expected

    def test_no_boundary_no_match(self):
        counters = ParseCounters()
        assert parse_stance_label("unfavorable", counters) is Stance.NONE
        assert counters.fallbacks == 1

    def test_fallback_counted_once_per_call(self):
        counters = ParseCounters()
        parse_stance_label("???", counters)
        parse_stance_label("favor", counters)
        parse_stance_label("", counters)
        assert counters.fallbacks == 2

    def test_none_input(self):
        counters = ParseCounters()
        assert parse_stance_label(None, counters) is Stance.NONE
        assert counters.fallbacks == 1

    @given(st.text(max_size=200))
    def test_total_on_arbitrary_text(self, raw):
        counters = ParseCounters()
        before = counters.fallbacks
        result = parse_stance_label(raw, counters)
        assert result in (Stance.FAVOR, Stance.AGAINST, Stance.NONE)
        assert counters.fallbacks - before in (0, 1)


class TestRemoteProvider:
    def test_embed_matches_stub_and_preserves_order(self):
        with StubServer(dim=8) as stub:
            p = RemoteProvider(stub.url, 8, batch_size=2, backoff=0.01)
            try:
                texts = [f"text {i}" for i in range(5)]
                out = p.embed_texts(texts)
                expected = np.stack([hash_unit_vector(t, 8) for t in texts])
                np.testing.assert_allclose(out, expected, rtol=0, atol=1e-15)
                embed_calls = [r for r in stub.state.requests if r[0] == "/embed"]
                assert len(embed_calls) == 3
                assert [len(r[1]["texts"]) for r in embed_calls] == [2, 2, 1]
            finally:
                p.close()

    def test_memoization_skips_known_texts(self):
        with StubServer(dim=8) as stub:
            p = RemoteProvider(stub.url, 8, backoff=0.01)
            try:
                p.embed_texts(["alpha"])
                p.embed_texts(["alpha", "beta", "alpha"])
                embed_calls = [r for r in stub.state.requests if r[0] == "/embed"]
                assert [r[1]["texts"] for r in embed_calls] == [["alpha"], ["beta"]]
            finally:
                p.close()

    def test_duplicate_rows_equal(self):
        with StubServer(dim=8) as stub:
            p = RemoteProvider(stub.url, 8, backoff=0.01)
            try:
                out = p.embed_texts(["x", "y", "x"])
                assert np.array_equal(out[0], out[2])
            finally:
                p.close()

    def test_retries_transient_500(self):
        with StubServer(dim=8) as stub:
            stub.state.fail_next = 1
            p = RemoteProvider(stub.url, 8, retries=2, backoff=0.01)
            try:
                out = p.embed_texts(["hello"])
                assert out.shape == (1, 8)
                assert len(stub.state.requests) == 2
            finally:
                p.close()

    def test_gives_up_after_retry_budget(self):
        with StubServer(dim=8) as stub:
            stub.state.fail_next = 10
            p = RemoteProvider(stub.url, 8, retries=1, backoff=0.01)
            try:
                with pytest.raises(ProviderTransportError):
                    p.embed_texts(["hello"])
                assert len(stub.state.requests) == 2
            finally:
                p.close()

    def test_connection_refused_is_transport_error(self):
        p = RemoteProvider("http://127.0.0.1:9", 8, retries=0, backoff=0.01, timeout=0.5)
        try:
            with pytest.raises(ProviderTransportError):
                p.embed_texts(["hello"])
        finally:
            p.close()

    def test_unexpected_status_is_provider_error(self):
        with StubServer(dim=8) as stub:
            p = RemoteProvider(stub.url + "/nowhere", 8, retries=0, backoff=0.01)
            try:
                with pytest.raises(ProviderError):
                    p.embed_texts(["hello"])
            finally:
                p.close()

    def test_dim_mismatch_is_configuration_error(self):
        with StubServer(dim=8) as stub:
            p = RemoteProvider(stub.url, 16, backoff=0.01)
            try:
                with pytest.raises(ConfigurationError):
                    p.embed_texts(["hello"])
                with pytest.raises(ConfigurationError):
                    p.health()
            finally:
                p.close()

    def test_stance_labels_and_fallbacks(self):
        with StubServer(dim=8) as stub:
            p = RemoteProvider(stub.url, 8, backoff=0.01)
            try:
                items = [
                    StanceItem(post="p", parent="p", comment="AGREE: yes"),
                    StanceItem(post="p", parent="p", comment="DISAGREE: no"),
                    StanceItem(post="p", parent="p", comment="whatever"),
                    StanceItem(post="p", parent="p", comment="SHRUG: hmm"),
                    StanceItem(post="p", parent="p", comment="GARBAGE: xx"),
                ]
                stances = p.detect_stances(items)
                assert stances == [Stance.FAVOR, Stance.AGAINST, Stance.NONE, Stance.NONE, Stance.NONE]
                assert p.stance_fallbacks == 1
            finally:
                p.close()

    def test_stance_memoization(self):
        with StubServer(dim=8) as stub:
            p = RemoteProvider(stub.url, 8, backoff=0.01)
            try:
                item = StanceItem(post="p", parent="p", comment="AGREE: fine")
                p.detect_stances([item])
                p.detect_stances([item, item])
                stance_calls = [r for r in stub.state.requests if r[0] == "/stance"]
                assert len(stance_calls) == 1
            finally:
                p.close()

    def test_health_payload(self):
        with StubServer(dim=8) as stub:
            p = RemoteProvider(stub.url, 8, backoff=0.01)
            try:
                h = p.health()
                assert h["status"] == "ok"
                assert h["dim"] == 8
            finally:
                p.close()


class TestMakeProvider:
    def test_mock(self):
        assert isinstance(make_provider("mock", 8), MockProvider)

    def test_remote_requires_url(self):
        with pytest.raises(ConfigurationError):
            make_provider("remote", 8)

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            make_provider("psychic", 8)
