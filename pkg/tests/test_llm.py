import json
import threading
import time

import httpx
import pytest

from erc_sentinel.errors import AuthError, BudgetExceeded, ParseError, TransportError
from erc_sentinel.llm import (
    ChatCompletionAdapter, Gateway, LlmConfig, Reply, RetryPolicy, load_mock, live_gateway, mock_gateway,
)

MSG = [("system", "be brief"), ("user", "does transferFrom check the allowance?")]

SCRIPT = """
- match: 'allowance'
  response: |
    No allowance check.
    VERDICT: VIOLATION
- match: 'transfer'
  response: 'VERDICT: COMPLIANT'
- fallback: 'no idea'
"""


def test_first_match_wins():
    script = load_mock(SCRIPT)
    assert script.respond("transfer with allowance") == "No allowance check.\nVERDICT: VIOLATION\n"
    assert script.respond("plain transfer") == "VERDICT: COMPLIANT"
    assert script.respond("approve") == "no idea"


def test_mapping_form_with_fallback():
    script = load_mock("script:\n  - {match: a, response: A}\nfallback: Z\n")
    assert (script.respond("a"), script.respond("b")) == ("A", "Z")


@pytest.mark.parametrize("bad", ["- {match: '(', response: x}", "- {match: a}", "just text", "{script: [], extra: 1}",
                                 "- [unclosed"])
def test_bad_scripts(bad):
    with pytest.raises(ParseError):
        load_mock(bad)


def test_mock_gateway_echo():
    gw = mock_gateway(SCRIPT)
    assert gw.is_mock
    assert gw.complete(MSG).endswith("VERDICT: VIOLATION\n")
    assert gw.usage.prompts == 1


class Recorder:
    def __init__(self, delay=0.0):
        self.calls = 0
        self.active = 0
        self.peak = 0
        self.delay = delay
        self.lock = threading.Lock()

    def send(self, messages, config):
        with self.lock:
            self.calls += 1
            self.active += 1
            self.peak = max(self.peak, self.active)
        time.sleep(self.delay)
        with self.lock:
            self.active -= 1
        return Reply("VERDICT: COMPLIANT")


def test_over_budget_sends_nothing():
    backend = Recorder()
    gw = Gateway(backend, LlmConfig(input_budget=5))
    with pytest.raises(BudgetExceeded):
        gw.complete(MSG)
    assert backend.calls == 0 and gw.usage.prompts == 0


def test_in_flight_cap():
    backend = Recorder(delay=0.02)
    gw = Gateway(backend, LlmConfig(max_in_flight=3))
    threads = [threading.Thread(target=gw.complete, args=(MSG,)) for _ in range(20)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert backend.calls == 20
    assert 1 <= backend.peak <= 3


def test_ledger_lines(tmp_path):
    ledger = tmp_path / "run.jsonl"
    gw = mock_gateway(SCRIPT, ledger_path=str(ledger))
    gw.complete(MSG)
    gw.complete([("user", "transfer")])
    rows = [json.loads(line) for line in ledger.read_text().splitlines()]
    assert len(rows) == 2
    assert set(rows[0]) == {"prompt_sha256", "in_tokens", "out_tokens", "ms", "outcome"}
    assert rows[0]["outcome"] == "ok"


@pytest.mark.parametrize("kw", [dict(temperature=-1), dict(max_in_flight=0), dict(input_budget=0),
                                dict(retry=RetryPolicy(max_attempts=0))])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        LlmConfig(**kw)


# -- live adapter over a fake transport -------------------------------------------------

CFG = LlmConfig(endpoint="https://llm.example/v1/chat/completions", model="m",
                retry=RetryPolicy(max_attempts=3, backoff_base=0.5))
ENV = {"ERC_SENTINEL_API_KEY": "k-test"}


def _ok(text="VERDICT: COMPLIANT"):
    return httpx.Response(200, json={"choices": [{"message": {"content": text}}],
                                     "usage": {"prompt_tokens": 11, "completion_tokens": 3}})


def _adapter(handler, sleeps=None, environ=ENV, config=CFG):
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return ChatCompletionAdapter(config, client=client, sleep=(sleeps.append if sleeps is not None else lambda s: None),
                                 environ=environ)


def test_missing_key_is_auth_error():
    with pytest.raises(AuthError):
        _adapter(lambda r: _ok(), environ={})
    with pytest.raises(AuthError):
        live_gateway(CFG, environ={})


def test_key_env_name_is_configurable():
    from dataclasses import replace
    cfg = replace(CFG, api_key_env="MY_KEY")
    seen = []
    adapter = _adapter(lambda r: seen.append(r.headers["authorization"]) or _ok(), environ={"MY_KEY": "abc"}, config=cfg)
    adapter.send(MSG, cfg)
    assert seen == ["Bearer abc"]


def test_request_shape_and_usage():
    captured = {}

    def handler(request):
        captured.update(json.loads(request.content))
        return _ok()

    gw = Gateway(_adapter(handler), CFG)
    assert gw.complete(MSG) == "VERDICT: COMPLIANT"
    assert captured["model"] == "m" and captured["temperature"] == 0
    assert captured["messages"][1] == {"role": "user", "content": MSG[1][1]}
    assert (gw.usage.in_tokens, gw.usage.out_tokens) == (11, 3)


def test_retries_then_succeeds():
    replies = iter([httpx.Response(503), httpx.Response(429), _ok()])
    sleeps = []
    adapter = _adapter(lambda r: next(replies), sleeps)
    assert adapter.send(MSG, CFG).text == "VERDICT: COMPLIANT"
    assert sleeps == [0.5, 1.0]


def test_transport_errors_retry_then_give_up():
    def handler(request):
        raise httpx.ConnectError("refused", request=request)

    sleeps = []
    with pytest.raises(TransportError, match="3 attempts"):
        _adapter(handler, sleeps).send(MSG, CFG)
    assert len(sleeps) == 2


@pytest.mark.parametrize("status", [401, 403])
def test_rejected_key(status):
    calls = []
    with pytest.raises(AuthError):
        _adapter(lambda r: calls.append(1) or httpx.Response(status)).send(MSG, CFG)
    assert len(calls) == 1


def test_client_error_not_retried():
    calls = []
    with pytest.raises(TransportError):
        _adapter(lambda r: calls.append(1) or httpx.Response(400, text="bad")).send(MSG, CFG)
    assert len(calls) == 1


def test_malformed_body():
    with pytest.raises(TransportError, match="malformed"):
        _adapter(lambda r: httpx.Response(200, json={"nope": 1})).send(MSG, CFG)
