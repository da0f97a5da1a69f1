from __future__ import annotations

import json

import httpx
import pytest

from tristrat.agents import (
    INITIAL_STRATEGY,
    Agents,
    AgentTrace,
    AuthError,
    CacheMiss,
    ChatClient,
    ChatRequest,
    MalformedResponse,
    OfflineProvider,
    OpenAICompatibleProvider,
    PromptError,
    PromptTemplate,
    ProviderTimeout,
    ResponseCache,
    ScoreError,
    ScoreReport,
    SelectionError,
    Strategy,
    StubProvider,
    TokenBucket,
    TransportError,
    completion_body,
    extract_json_object,
)
from tristrat.agents.client import make_request
from tristrat.agents.roles import parse_scores, parse_weights
from tristrat.context import NO_NEWS, build_overview
from tristrat.history import StrategyHistory, StrategyRecord
from tristrat.portfolio import Portfolio

GOOD_SCORES = {"financial_health": 7, "growth_potential": 6, "news_sentiment": 5,
               "news_impact": 4, "price_momentum": 8, "volatility_risk": 3}


def scores_json(**overrides):
    return "```json\n" + json.dumps({**GOOD_SCORES, **overrides, "rationale": "ok"}) + "\n```"


def agents_with(*responses, **kw):
    provider = StubProvider(responses=responses, **kw)
    return Agents(ChatClient(provider, sleep=lambda s: None)), provider


def report(symbol, **overrides):
    return ScoreReport(symbol, 5, **{**GOOD_SCORES, **overrides})


# Client ---------------------------------------------------------------------

def test_request_invariants():
    with pytest.raises(ValueError):
        ChatRequest("m", ())
    with pytest.raises(ValueError):
        ChatRequest("m", (("user", "x"),), temperature=2.5)


def test_cache_key_depends_on_model_and_prompt_only():
    a = make_request("gpt-4o", "sys", "hello", tags={"role": "news"})
    b = make_request("gpt-4o", "sys", "hello", temperature=0.5, tags={"role": "tech"})
    c = make_request("other", "sys", "hello")
    assert a.cache_key == b.cache_key != c.cache_key
    assert len(a.cache_key) == 64


def test_stub_echo_by_key():
    req = make_request("m", "s", "u")
    client = ChatClient(StubProvider(by_key={req.cache_key: "OK"}))
    assert client.complete(req).content == "OK"


def test_cache_hit_skips_network(tmp_path):
    provider = StubProvider(generate=True)
    client = ChatClient(provider, ResponseCache(tmp_path))
    req = make_request("m", "s", "u", tags={"role": "news", "symbol": "AAA", "week": 1})
    first = client.complete(req)
    second = client.complete(req)
    assert provider.calls == 1 and client.network_calls == 1 and client.cache_hits == 1
    assert second.cached and not first.cached and first.content == second.content
    assert (tmp_path / f"{req.cache_key}.json").exists()


def test_retry_after_two_transport_failures():
    sleeps = []
    provider = StubProvider(generate=True, failures=[TransportError("boom"), ProviderTimeout("slow")])
    client = ChatClient(provider, backoff=0.5, sleep=sleeps.append)
    client.complete(make_request("m", "s", "u"))
    assert provider.calls == 3 and sleeps == [0.5, 1.0]


def test_retries_exhausted():
    provider = StubProvider(generate=True, failures=[TransportError("x")] * 3)
    with pytest.raises(TransportError):
        ChatClient(provider, sleep=lambda s: None).complete(make_request("m", "s", "u"))
    assert provider.calls == 3


def test_auth_error_not_retried():
    provider = StubProvider(generate=True, failures=[AuthError("bad key")])
    with pytest.raises(AuthError):
        ChatClient(provider, sleep=lambda s: None).complete(make_request("m", "s", "u"))
    assert provider.calls == 1


def test_malformed_payload():
    class Broken:
        name = "broken"

        def post(self, body, tags=None):
            return '{"choices": []}'

    with pytest.raises(MalformedResponse):
        ChatClient(Broken()).complete(make_request("m", "s", "u"))


def test_offline_provider_reports_cache_miss():
    with pytest.raises(CacheMiss):
        ChatClient(OfflineProvider()).complete(make_request("m", "s", "u"))


def test_openai_wire_format():
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen["url"] = str(request.url)
        seen["auth"] = request.headers["authorization"]
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, text=completion_body("hi there"))

    provider = OpenAICompatibleProvider("http://llm.local/v1/", api_key="k", transport=httpx.MockTransport(handler))
    resp = ChatClient(provider).complete(make_request("gpt-4o", "sys", "usr", max_tokens=77, tags={"role": "x"}))
    assert resp.content == "hi there"
    assert seen["url"] == "http://llm.local/v1/chat/completions"
    assert seen["auth"] == "Bearer k"
    assert seen["body"] == {
        "model": "gpt-4o",
        "messages": [{"role": "system", "content": "sys"}, {"role": "user", "content": "usr"}],
        "temperature": 0.0,
        "max_tokens": 77,
    }


@pytest.mark.parametrize("status,error", [(401, AuthError), (429, TransportError), (503, TransportError)])
def test_openai_status_mapping(status, error):
    transport = httpx.MockTransport(lambda r: httpx.Response(status, text="nope"))
    provider = OpenAICompatibleProvider("http://x/v1", api_key="k", transport=transport)
    with pytest.raises(error):
        provider.post({"model": "m", "messages": []})


def test_openai_timeout_mapping():
    def handler(request):
        raise httpx.ReadTimeout("slow", request=request)

    provider = OpenAICompatibleProvider("http://x/v1", api_key="k", transport=httpx.MockTransport(handler))
    with pytest.raises(ProviderTimeout):
        provider.post({"model": "m", "messages": []})


def test_missing_credential_is_actionable(monkeypatch):
    monkeypatch.delenv("TRISTRAT_API_KEY", raising=False)
    with pytest.raises(AuthError, match="TRISTRAT_API_KEY"):
        OpenAICompatibleProvider()


def test_token_bucket_blocks_when_empty():
    now = [0.0]
    sleeps = []

    def sleep(s):
        sleeps.append(s)
        now[0] += s

    bucket = TokenBucket(rate=2.0, capacity=2, clock=lambda: now[0], sleep=sleep)
    for _ in range(4):
        bucket.acquire()
    assert sleeps == [0.5, 0.5]


# Prompts --------------------------------------------------------------------

def test_template_requires_all_placeholders():
    t = PromptTemplate("news", "sys", "Stock $symbol week $week: $input")
    assert t.placeholders == {"symbol", "week", "input"}
    with pytest.raises(PromptError):
        t.render(symbol="AAA", week=1)
    # substituted data is not re-expanded
    assert t.render(symbol="AAA", week=1, input="$week")[1] == "Stock AAA week 1: $week"


def test_analysis_prompt_embeds_input_exactly_once():
    agents, provider = agents_with({"role": "news", "content": "No signal this week."})
    r = agents.analyze("news", NO_NEWS, "AAA", 5)
    assert r.text == "No signal this week." and r.kind == "news"
    user = provider.requests[0][0]["messages"][1]["content"]
    assert user.count(NO_NEWS) == 1


def test_empty_analysis_is_an_error():
    agents, _ = agents_with({"role": "tech", "content": "   "})
    with pytest.raises(Exception, match="empty"):
        agents.analyze("tech", "data", "AAA", 5)


# Score ----------------------------------------------------------------------

def test_score_parses_fenced_json_after_prose():
    agents, _ = agents_with({"role": "score", "content": "Here is my view.\n" + scores_json()})
    r = agents.score(build_overview("n", "t", "f", "AAA", 5))
    assert r.scores == GOOD_SCORES and r.rationale == "ok" and r.symbol == "AAA"


def test_score_out_of_range_twice_raises():
    agents, provider = agents_with({"role": "score", "content": scores_json(price_momentum=11)})
    with pytest.raises(ScoreError, match="outside"):
        agents.score(build_overview("n", "t", "f", "AAA", 5))
    assert provider.calls == 2
    assert "previous reply was rejected" in provider.requests[1][0]["messages"][1]["content"]


def test_score_recovers_after_correction():
    agents, _ = agents_with({"role": "score", "content": ["garbage", scores_json()]})
    trace = AgentTrace()
    r = agents.score(build_overview("n", "t", "f", "AAA", 5), trace)
    assert r.financial_health == 7
    assert [c.attempt for c in trace.calls] == [0, 1] and trace.flags


@pytest.mark.parametrize("content,message", [
    ('{"financial_health": 7}', "missing"),
    (json.dumps({**GOOD_SCORES, "news_impact": 4.5}), "integer"),
    (json.dumps({**GOOD_SCORES, "news_impact": "4"}), "integer"),
    ("no json here", "no JSON"),
])
def test_parse_scores_rejects(content, message):
    with pytest.raises(ScoreError, match=message):
        parse_scores(content)


def test_parse_scores_accepts_integral_floats():
    scores, _ = parse_scores(json.dumps({**GOOD_SCORES, "news_impact": 4.0}))
    assert scores["news_impact"] == 4 and isinstance(scores["news_impact"], int)


def test_extract_json_prefers_fenced_block():
    text = 'prefix {"a": 1} ```json\n{"b": 2}\n```'
    assert extract_json_object(text) == {"b": 2}
    assert extract_json_object('noise {bad} then {"c": 3}') == {"c": 3}
    assert extract_json_object("[" * 50000) is None


# Select ---------------------------------------------------------------------

def select_with(contents, tradable=("AAA", "BBB", "CCC", "DDD", "EEE", "FFF")):
    agents, provider = agents_with({"role": "select", "content": contents})
    trace = AgentTrace()
    p = agents.select([report(s) for s in tradable], Strategy(5, INITIAL_STRATEGY), tradable, trace)
    return p, provider, trace


def test_select_partial_allocation_keeps_cash():
    p, provider, _ = select_with('{"AAA": 0.2, "BBB": 0.2}')
    assert p.weights == {"AAA": 0.2, "BBB": 0.2}
    assert p.cash_fraction == pytest.approx(0.6)
    assert provider.calls == 1


def test_select_empty_map_is_all_cash():
    p, _, _ = select_with('{"weights": {}, "reasoning": "risk off"}')
    assert p.weights == {} and p.cash_fraction == 1.0


def test_select_repairs_six_positions_to_top_five():
    bad = json.dumps({"AAA": 0.1, "BBB": 0.3, "CCC": 0.15, "DDD": 0.15, "EEE": 0.05, "FFF": 0.2})
    p, provider, trace = select_with(bad)
    assert provider.calls == 2
    assert p.weights == {"AAA": 0.1, "BBB": 0.3, "CCC": 0.15, "DDD": 0.15, "FFF": 0.2}
    assert any("repaired" in f for f in trace.flags)


def test_select_scales_over_allocation():
    p, _, _ = select_with('{"AAA": 0.5, "BBB": 0.25, "CCC": 0.25, "DDD": 0.25}')
    assert p.weights == pytest.approx({"AAA": 0.4, "BBB": 0.2, "CCC": 0.2, "DDD": 0.2}, rel=1e-12)
    assert p.invested == pytest.approx(1.0, rel=1e-12)


def test_select_unknown_ticker_twice_raises():
    with pytest.raises(SelectionError, match="unknown"):
        select_with('{"ZZZ": 0.5}')


def test_select_fixes_itself_after_correction():
    p, provider, _ = select_with(['{"ZZZ": 0.5}', '{"aaa": 0.5}'])
    assert p.weights == {"AAA": 0.5} and provider.calls == 2


def test_select_prompt_contains_every_score_report_verbatim():
    tradable = ("AAA", "BBB", "CCC")
    agents, provider = agents_with({"role": "select", "content": "{}"})
    reports = [report(s, rationale=f"reason for {s}") for s in tradable]
    agents.select(reports, Strategy(5, "my strategy"), tradable)
    user = provider.requests[0][0]["messages"][1]["content"]
    for r in reports:
        assert r.render() in user
    assert "my strategy" in user


def test_select_requires_scores_for_all_candidates():
    agents, _ = agents_with({"role": "select", "content": "{}"})
    with pytest.raises(SelectionError, match="no score report"):
        agents.select([report("AAA")], Strategy(5, "s"), ["AAA", "BBB"])


@pytest.mark.parametrize("text", ['{"weights": [1, 2]}', '{"AAA": "half"}', '{"AAA": true}',
                                  '{"AAA": 1e999}', '{"AAA": 0.1, "aaa": 0.2}'])
def test_parse_weights_rejects(text):
    with pytest.raises(SelectionError):
        parse_weights(text)


# Refine ---------------------------------------------------------------------

def refine_with(content, history_len=0):
    agents, provider = agents_with({"role": "strategy", "content": content})
    history = StrategyHistory()
    for w in range(1, history_len + 1):
        history.append(StrategyRecord(w, f"strategy {w}", 0.01, 0.02))
    trace = AgentTrace()
    portfolio = Portfolio(20, {"AAA": 0.5})
    new = agents.refine(Strategy(20, "old"), portfolio, {"AAA": 0.01, "BBB": -0.02},
                        [report("AAA"), report("BBB")], history, trace)
    return new, trace


def test_refine_echo():
    new, _ = refine_with("keep strategy")
    assert new == Strategy(21, "keep strategy")


def test_refine_empty_reply_carries_forward():
    new, trace = refine_with("   ")
    assert new == Strategy(21, "old")
    assert trace.flags


def test_refine_prompt_has_history_cap_and_score_table():
    _, trace = refine_with("x", history_len=12)
    prompt = trace.prompts["strategy"]
    assert prompt.count("### Week") == 10
    assert "### Week 3\n" in prompt and "### Week 2\n" not in prompt
    assert "AAA: financial_health=7" in prompt and "return -2.00%" in prompt


# Stub -----------------------------------------------------------------------

def test_stub_script_file_and_wildcards(tmp_path):
    path = tmp_path / "script.json"
    path.write_text(json.dumps({"responses": [
        {"role": "news", "symbol": "AAA", "week": 5, "content": "specific"},
        {"role": "news", "content": "generic"},
    ]}))
    provider = StubProvider.from_file(path)
    body = make_request("m", "s", "u").body()
    assert json.loads(provider.post(body, {"role": "news", "symbol": "AAA", "week": 5}))["choices"][0]["message"]["content"] == "specific"
    assert "generic" in provider.post(body, {"role": "news", "symbol": "BBB", "week": 5})


def test_generated_stub_is_deterministic():
    body = make_request("m", "s", "u").body()
    tags = {"role": "score", "symbol": "AAA", "week": 5}
    assert StubProvider(generate=True).post(body, tags) == StubProvider(generate=True).post(body, tags)
    content = json.loads(StubProvider(generate=True).post(body, tags))["choices"][0]["message"]["content"]
    parse_scores(content)
