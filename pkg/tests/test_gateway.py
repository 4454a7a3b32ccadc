from __future__ import annotations

import json
import threading
import time

import pytest
from hypothesis import given, settings

from fixture_data import FIG2_TEXT, make_gold_report
from reportsmith.errors import AuthFailed, MalformedGeneration, ProviderUnavailable, TimedOut
from reportsmith.gateway import (
    BackendConfig,
    GenerationResult,
    HashedBagEmbedding,
    HttpBackend,
    MockBackend,
    MockBehavior,
    TrainingRecipe,
    alpaca_instruction,
    alpaca_system_role,
    build_alpaca_prompt,
    build_fewshot_messages,
    build_synthesis_prompt,
    extract_user_input,
    generate_report,
    is_missing_phrase,
    mock_backend,
    parse_generation,
)
from reportsmith.report_model import (
    SectionKind,
    parse_sections,
    render_report,
    report_to_json,
)
from server_util import ScriptedServer, chat_payload, embedding_payload
from test_report_model import normalized_reports

# Independent transcriptions of the two prompt templates; the builders must
# reproduce them byte for byte.
ALPACA_GOLDEN = (
    "You are a senior software engineer specialized in generating detailed bug reports.\n"
    "### Instruction:\n"
    "Please create a bug report that includes the following sections:\n"
    "1. Steps to Reproduce (S2R): Detailed steps to replicate the issue.\n"
    "2. Expected Result (ER): What you expected to happen.\n"
    "3. Actual Result (AR): What actually happened.\n"
    "4. Additional Information: Include relevant details such as software version, "
    "build number, environment, etc.\n"
    "\n"
    "If any of these sections are missing from the provided report, explicitly notify "
    "the user which information is missing.\n"
    "\n"
    "### Input:\n"
    "{unstructured_report}\n"
    "\n"
    "### Response:\n"
)

SYNTHESIS_GOLDEN = (
    "Please rewrite the following bug report in a natural, conversational tone, "
    "as if you're explaining it to someone casually. Keep the essence of the report "
    "intact, but restructure it in a way that sounds like something an average "
    "person would write, while still using the original wording from the report as "
    "much as possible. Focus on maintaining the original details and key points "
    "without changing much. Provide only the one rewritten paragraph with everything, "
    "no additional explanation.\n"
    "\n"
    "Bug report: {text}"
)


class TestPromptBuilders:
    def test_alpaca_matches_golden_bytes(self):
        assert build_alpaca_prompt("X") == ALPACA_GOLDEN.replace("{unstructured_report}", "X")

    def test_alpaca_input_block_and_tail(self):
        prompt = build_alpaca_prompt("X")
        assert "### Input:\nX" in prompt
        assert prompt.endswith("### Response:\n")

    def test_alpaca_empty_input(self):
        prompt = build_alpaca_prompt("")
        assert "### Input:\n\n" in prompt

    def test_synthesis_matches_golden_bytes(self):
        assert build_synthesis_prompt("Y") == SYNTHESIS_GOLDEN.replace("{text}", "Y")

    def test_synthesis_ends_with_substitution(self):
        assert build_synthesis_prompt("Y").endswith("Bug report: Y")

    def test_builders_are_byte_stable(self):
        assert build_alpaca_prompt("same") == build_alpaca_prompt("same")

    def test_system_role_line(self):
        assert alpaca_system_role() == (
            "You are a senior software engineer specialized in generating detailed bug reports."
        )

    def test_instruction_block_extraction(self):
        block = alpaca_instruction()
        assert block.startswith("Please create a bug report")
        assert block.endswith("information is missing.")


class TestFewshotMessages:
    def test_zero_shots(self):
        messages = build_fewshot_messages([], "target")
        assert len(messages) == 2
        assert messages[0]["role"] == "system"
        assert messages[-1]["role"] == "user"

    def test_three_shots_is_eight_messages(self):
        shots = [(f"in{i}", f'{{"title": "t{i}"}}') for i in range(3)]
        messages = build_fewshot_messages(shots, "target")
        assert len(messages) == 8
        assert [m["role"] for m in messages] == [
            "system", "user", "assistant", "user", "assistant", "user", "assistant", "user",
        ]

    def test_assistant_messages_carry_shot_json(self):
        gold = make_gold_report(1)
        shots = [(render_report(gold), report_to_json(gold)), ("plain", '{"title": "x"}')]
        messages = build_fewshot_messages(shots, "target")
        assert messages[2]["content"] == report_to_json(gold)
        assert messages[4]["content"] == '{"title": "x"}'

    def test_count_formula(self):
        for k in (0, 1, 2, 3, 5):
            shots = [(f"i{j}", "{}") for j in range(k)]
            assert len(build_fewshot_messages(shots, "t")) == 2 + 2 * k


class TestExtractUserInput:
    def test_alpaca_wrapped(self):
        messages = build_fewshot_messages([], "the raw input\nwith lines")
        assert extract_user_input(messages) == "the raw input\nwith lines"

    def test_synthesis_wrapped(self):
        messages = [{"role": "user", "content": build_synthesis_prompt("rendered text")}]
        assert extract_user_input(messages) == "rendered text"

    def test_plain_message(self):
        assert extract_user_input([{"role": "user", "content": "plain"}]) == "plain"


class TestParseGeneration:
    def test_bare_json(self):
        gold = make_gold_report(2)
        assert parse_generation(report_to_json(gold)) == gold

    def test_fenced_json_with_prose(self):
        gold = make_gold_report(3)
        raw = f"Here is the report:\n```json\n{report_to_json(gold)}\n```\nanything else"
        assert parse_generation(raw) == gold

    def test_refusal_raises(self):
        with pytest.raises(MalformedGeneration):
            parse_generation("I cannot help")

    def test_unbalanced_braces_raise(self):
        with pytest.raises(MalformedGeneration):
            parse_generation('{"title": "x"')

    def test_missing_phrases_normalize_to_flags(self):
        raw = json.dumps(
            {
                "title": "t",
                "steps_to_reproduce": ["Not provided"],
                "expected_result": "N/A",
                "actual_result": "the page fails",
                "additional_information": "<MISSING>",
            }
        )
        report = parse_generation(raw)
        assert report.steps_to_reproduce == ()
        assert SectionKind.STEPS_TO_REPRODUCE in report.missing_fields
        assert SectionKind.EXPECTED_RESULT in report.missing_fields
        assert SectionKind.ADDITIONAL_INFORMATION in report.missing_fields
        assert report.actual_result == "the page fails"

    def test_skips_non_report_object_in_prose(self):
        gold = make_gold_report(4)
        raw = '{"note": 1} then the real one ' + report_to_json(gold)
        # first balanced object wins and parses as an (empty-ish) report
        report = parse_generation(raw)
        assert report.title == ""

    @given(normalized_reports())
    @settings(max_examples=100)
    def test_inverse_of_report_to_json(self, report):
        assert parse_generation(report_to_json(report)) == report

    def test_missing_phrase_table(self):
        for phrase in ("", "missing", "N/A", "not provided", "Not Provided.", "<missing>"):
            assert is_missing_phrase(phrase)
        assert not is_missing_phrase("the page fails")


class TestGenerationResult:
    def test_exactly_one_side_set(self):
        with pytest.raises(ValueError):
            GenerationResult(raw_text="x")
        with pytest.raises(ValueError):
            GenerationResult(
                raw_text="x",
                report=parse_sections(FIG2_TEXT),
                parse_error="both",
            )

    def test_generate_report_paths(self):
        ok = generate_report(mock_backend(), build_fewshot_messages([], FIG2_TEXT))
        assert ok.report is not None and ok.parse_error is None
        bad = generate_report(
            MockBackend(script=lambda text: "no json here"),
            build_fewshot_messages([], FIG2_TEXT),
        )
        assert bad.report is None and bad.parse_error


class TestHashedBagEmbedding:
    def test_identical_texts_identical_vectors(self):
        provider = HashedBagEmbedding()
        assert provider.embed("alpha beta") == provider.embed("alpha beta")

    def test_unit_norm(self):
        vec = HashedBagEmbedding().embed("some non empty text")
        assert sum(v * v for v in vec) == pytest.approx(1.0, abs=1e-12)

    def test_order_free(self):
        provider = HashedBagEmbedding()
        assert provider.embed("alpha beta") == provider.embed("beta alpha")

    def test_empty_text_is_zero_vector(self):
        vec = HashedBagEmbedding().embed("")
        assert all(v == 0.0 for v in vec)
        assert len(vec) == 256

    def test_cosine_bounded_in_unit_interval(self):
        import random

        from reportsmith.textmetrics import embedding_similarity

        provider = HashedBagEmbedding()
        rng = random.Random(8)
        vocab = [f"tok{i}" for i in range(40)]
        for _ in range(200):
            a = " ".join(rng.choice(vocab) for _ in range(rng.randrange(1, 20)))
            b = " ".join(rng.choice(vocab) for _ in range(rng.randrange(1, 20)))
            value = embedding_similarity(provider, a, b)
            assert 0.0 <= value <= 1.0 + 1e-12


class TestMockBackend:
    def test_perfect_extractor_round_trips(self):
        backend = mock_backend(MockBehavior.PERFECT_EXTRACTOR)
        raw = backend.complete(build_fewshot_messages([], FIG2_TEXT))
        assert parse_generation(raw) == parse_sections(FIG2_TEXT)

    def test_flag_missing_flags_empty_sections(self):
        backend = mock_backend("FLAG_MISSING")
        raw = backend.complete([{"role": "user", "content": "just prose, no headers"}])
        data = json.loads(raw)
        assert set(data["missing_fields"]) == {
            "steps_to_reproduce", "expected_result", "actual_result", "additional_information",
        }

    def test_hallucinate_fills_and_never_flags(self):
        gold = make_gold_report(5)
        masked_text = "Title: something\nExpected Results:\nvalue appears\nActual Results:\nvalue fails"
        backend = mock_backend("HALLUCINATE")
        raw = backend.complete([{"role": "user", "content": masked_text}])
        report = parse_generation(raw)
        assert report.missing_fields == frozenset()
        assert report.steps_to_reproduce  # filler was inserted

    def test_scripted_table(self):
        backend = MockBackend(script={"ping": "pong"})
        assert backend.complete([{"role": "user", "content": "ping"}]) == "pong"
        with pytest.raises(KeyError):
            backend.complete([{"role": "user", "content": "other"}])

    def test_callable_script_and_call_log(self):
        backend = MockBackend(script=lambda text: text.upper())
        assert backend.complete([{"role": "user", "content": "abc"}]) == "ABC"
        assert backend.calls == ["abc"]


def _config(url: str, **kw) -> BackendConfig:
    defaults = dict(name="test", base_url=url, model_id="m1", max_concurrency=4, timeout=5.0)
    defaults.update(kw)
    return BackendConfig(**defaults)


class TestBackendConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            _config("http://x", max_concurrency=0)
        with pytest.raises(ValueError):
            _config("http://x", timeout=0)
        with pytest.raises(ValueError):
            _config("http://x", temperature=-1)

    def test_api_key_ref_default(self):
        config = BackendConfig(name="my-local", base_url="http://x", model_id="m")
        assert config.api_key_ref == "REPORTSMITH_API_KEY_MY_LOCAL"


class TestHttpBackend:
    def test_completion_round_trip(self):
        with ScriptedServer(lambda m, p, b: (200, chat_payload("echoed content"))) as server:
            backend = HttpBackend(_config(server.url), sleeper=lambda s: None)
            got = backend.complete([{"role": "user", "content": "hi"}])
            assert got == "echoed content"
            request = server.requests[0]
            assert request["path"] == "/v1/chat/completions"
            assert request["body"]["model"] == "m1"
            assert request["body"]["temperature"] == 0.0

    def test_auth_header_from_env(self, monkeypatch):
        monkeypatch.setenv("REPORTSMITH_API_KEY_TEST", "sk-123")
        with ScriptedServer(lambda m, p, b: (200, chat_payload("ok"))) as server:
            backend = HttpBackend(_config(server.url), sleeper=lambda s: None)
            backend.complete([{"role": "user", "content": "hi"}])
            assert server.requests[0]["headers"].get("Authorization") == "Bearer sk-123"

    def test_401_raises_authfailed_without_retry(self):
        with ScriptedServer(lambda m, p, b: (401, {"error": "nope"})) as server:
            backend = HttpBackend(_config(server.url), sleeper=lambda s: None)
            with pytest.raises(AuthFailed):
                backend.complete([{"role": "user", "content": "hi"}])
            assert len(server.requests) == 1

    def test_two_transient_503s_then_success(self):
        counter = {"n": 0}

        def responder(method, path, body):
            counter["n"] += 1
            if counter["n"] <= 2:
                return 503, {"error": "busy"}
            return 200, chat_payload("finally")

        sleeps: list[float] = []
        with ScriptedServer(responder) as server:
            backend = HttpBackend(_config(server.url), sleeper=sleeps.append)
            assert backend.complete([{"role": "user", "content": "hi"}]) == "finally"
            assert backend.last_retry_count == 2
            assert sleeps == [1.0, 2.0]

    def test_exhausted_5xx_raises_provider_unavailable(self):
        with ScriptedServer(lambda m, p, b: (500, {"error": "down"})) as server:
            backend = HttpBackend(_config(server.url), sleeper=lambda s: None)
            with pytest.raises(ProviderUnavailable):
                backend.complete([{"role": "user", "content": "hi"}])
            assert len(server.requests) == HttpBackend.MAX_ATTEMPTS

    def test_timeout_raises_timedout(self):
        def slow(method, path, body):
            time.sleep(0.5)
            return 200, chat_payload("late")

        with ScriptedServer(slow) as server:
            backend = HttpBackend(
                _config(server.url, timeout=0.05), sleeper=lambda s: None
            )
            with pytest.raises(TimedOut):
                backend.complete([{"role": "user", "content": "hi"}])

    def test_connection_refused_is_provider_unavailable(self):
        backend = HttpBackend(
            _config("http://127.0.0.1:9", timeout=0.2), sleeper=lambda s: None
        )
        with pytest.raises(ProviderUnavailable):
            backend.complete([{"role": "user", "content": "hi"}])

    def test_embeddings_round_trip(self):
        with ScriptedServer(lambda m, p, b: (200, embedding_payload([0.1, 0.2]))) as server:
            backend = HttpBackend(_config(server.url), sleeper=lambda s: None)
            assert backend.embed("text") == [0.1, 0.2]
            assert server.requests[0]["path"] == "/v1/embeddings"

    def test_concurrency_cap_enforced(self):
        def slowish(method, path, body):
            time.sleep(0.05)
            return 200, chat_payload("ok")

        with ScriptedServer(slowish) as server:
            backend = HttpBackend(
                _config(server.url, max_concurrency=2), sleeper=lambda s: None
            )
            threads = [
                threading.Thread(
                    target=backend.complete, args=([{"role": "user", "content": "x"}],)
                )
                for _ in range(8)
            ]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            assert len(server.requests) == 8
            assert server.max_inflight <= 2


class TestTrainingRecipe:
    def test_paper_hyperparameters(self):
        recipe = TrainingRecipe().to_dict()
        assert recipe["lora_rank"] == 16
        assert recipe["epochs"] == 3
        assert recipe["batch_size"] == 8
        assert recipe["cross_validation_folds"] == 4
        assert recipe["learning_rate"] == {"7b": 2e-4, "3b": 3e-3}
        assert recipe["target_modules"] == [
            "q_proj", "k_proj", "o_proj", "v_proj", "down_proj", "gate_proj", "up_proj",
        ]
