import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
from hypothesis import given, strategies as st

from iclparse.llm_client import (
    DEFAULT_INSTRUCTION,
    AuthError,
    BackendConfig,
    HttpChatBackend,
    NetworkError,
    OracleBackend,
    OracleMiss,
    UnparseableResponse,
    _chat_url,
    build_prompt,
    extract_template,
)


class StubServer:
    """Serves a scripted list of (status, reply_text) and records requests."""

    def __init__(self, script):
        self.script = list(script)
        self.requests = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                stub.requests.append({
                    "path": self.path,
                    "headers": dict(self.headers),
                    "body": json.loads(self.rfile.read(length)),
                })
                status, text = stub.script.pop(0) if stub.script else (200, "Template: done <*>")
                payload = {"choices": [{"message": {"role": "assistant", "content": text}}]}
                data = json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def url(self):
        return f"http://127.0.0.1:{self.server.server_address[1]}"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()


def http_backend(url, **kw):
    sleeps = []
    cfg = BackendConfig(kind="http_chat", endpoint_url=url, model_name="stub-model", timeout=5, **kw)
    return HttpChatBackend(cfg, sleep=sleeps.append), sleeps


PROMPT = build_prompt([("user bob logged in", "user <*> logged in")], "user amy logged in")


# -- prompts ------------------------------------------------------------------------

def test_zero_shot_prompt_layout():
    p = build_prompt([], "disk full on sda")
    assert p.shot_count == 0
    assert p.text == f"{DEFAULT_INSTRUCTION}\n\nLog: disk full on sda\nTemplate:"


def test_demonstrations_keep_their_order():
    demos = [("a 1", "a <*>"), ("b 2", "b <*>")]
    p = build_prompt(demos, "c 3", instruction="Parse.")
    assert p.text == "Parse.\n\nLog: a 1\nTemplate: a <*>\n\nLog: b 2\nTemplate: b <*>\n\nLog: c 3\nTemplate:"
    assert build_prompt(demos[::-1], "c 3", "Parse.").text != p.text


def test_prompt_rejects_empty_query():
    with pytest.raises(ValueError):
        build_prompt([], "   ")


log_text = st.text(alphabet="ab <*>", min_size=1, max_size=6).filter(lambda s: s.strip() and "\n" not in s)


@given(st.lists(st.tuples(log_text, log_text), max_size=3), log_text,
       st.lists(st.tuples(log_text, log_text), max_size=3), log_text)
def test_distinct_inputs_give_distinct_prompts(d1, q1, d2, q2):
    if (d1, q1) != (d2, q2):
        assert build_prompt(d1, q1).text != build_prompt(d2, q2).text


# -- oracle ---------------------------------------------------------------------------

def test_oracle_backend_answers_by_normalized_query():
    oracle = OracleBackend({"user  amy logged in": "user <*> logged in"})
    assert oracle.complete(PROMPT) == "user <*> logged in"
    with pytest.raises(OracleMiss):
        oracle.complete(build_prompt([], "unknown line"))


# -- http backend ---------------------------------------------------------------------

def test_chat_url():
    assert _chat_url("http://h:1") == "http://h:1/v1/chat/completions"
    assert _chat_url("http://h:1/v1/") == "http://h:1/v1/chat/completions"
    assert _chat_url("http://h:1/v1/chat/completions") == "http://h:1/v1/chat/completions"


def test_retries_through_two_503s():
    with StubServer([(503, ""), (503, ""), (200, "Template: user <*> logged in")]) as stub:
        backend, sleeps = http_backend(stub.url, max_retries=3, backoff_base=0.5)
        reply = backend.complete(PROMPT)
        backend.close()
    assert extract_template(reply).text == "user <*> logged in"
    assert len(stub.requests) == 3
    assert sleeps == [0.5, 1.0]


def test_gives_up_after_max_retries():
    with StubServer([(500, "")] * 5) as stub:
        backend, sleeps = http_backend(stub.url, max_retries=2)
        with pytest.raises(NetworkError):
            backend.complete(PROMPT)
        backend.close()
    assert len(stub.requests) == 3


@pytest.mark.parametrize("status", [401, 403])
def test_auth_failure_is_not_retried(status):
    with StubServer([(status, "")] * 3) as stub:
        backend, sleeps = http_backend(stub.url, max_retries=3)
        with pytest.raises(AuthError):
            backend.complete(PROMPT)
        backend.close()
    assert len(stub.requests) == 1
    assert sleeps == []


def test_request_body_and_headers(monkeypatch):
    monkeypatch.setenv("STUB_KEY", "sekret")
    with StubServer([(200, "user <*> logged in")]) as stub:
        backend, _ = http_backend(stub.url, api_key_env_var="STUB_KEY")
        backend.complete(PROMPT)
        backend.close()
    req = stub.requests[0]
    assert req["path"] == "/v1/chat/completions"
    assert req["body"] == {
        "model": "stub-model",
        "messages": [{"role": "user", "content": PROMPT.text}],
        "temperature": 0,
    }
    assert req["headers"]["Authorization"] == "Bearer sekret"


def test_no_authorization_header_without_key(monkeypatch):
    monkeypatch.delenv("STUB_KEY", raising=False)
    with StubServer([(200, "x <*>")]) as stub:
        backend, _ = http_backend(stub.url, api_key_env_var="STUB_KEY")
        backend.complete(PROMPT)
        backend.close()
    assert "Authorization" not in stub.requests[0]["headers"]


def test_recorded_reply_is_reproducible():
    with StubServer([(200, "Template: user <*> logged in")] * 2) as stub:
        backend, _ = http_backend(stub.url)
        first = extract_template(backend.complete(PROMPT))
        second = extract_template(backend.complete(PROMPT))
        backend.close()
    assert first == second
    assert stub.requests[0]["body"] == stub.requests[1]["body"]


def test_temperature_is_pinned():
    with pytest.raises(ValueError):
        BackendConfig(temperature=0.7)


# -- extraction ---------------------------------------------------------------------------

@pytest.mark.parametrize(
    "reply, expected",
    [
        ("user <*> logged in", "user <*> logged in"),
        ("Template: user <*> logged in", "user <*> logged in"),
        ("Sure!\nLog: user amy logged in\nTemplate: user <*> logged in\n", "user <*> logged in"),
        ("```\nuser <*> logged in\n```", "user <*> logged in"),
        ("```text\nTemplate: `user <*>   logged in`\n```", "user <*> logged in"),
        ('"disk full on <*>"', "disk full on <*>"),
        ("\n\n  heartbeat  \nextra commentary", "heartbeat"),
    ],
)
def test_extract_template(reply, expected):
    assert extract_template(reply).text == expected


@pytest.mark.parametrize("reply", ["", "   ", "```\n```", "Template:", "<*> <*>", "Template: ''"])
def test_unparseable_replies(reply):
    with pytest.raises(UnparseableResponse):
        extract_template(reply)
