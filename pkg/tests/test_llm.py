from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netwatch.llm import (
    BackendConfig,
    BackendUnreachable,
    ChatTurn,
    HttpBackend,
    MalformedPayload,
    MalformedResponse,
    NoScriptMatch,
    ROLE_ASSISTANT,
    ROLE_SYSTEM,
    ROLE_TOOL,
    ROLE_USER,
    ScriptedBackend,
    ToolCall,
    assemble_prompt,
    parse_script_rules,
    parse_tool_call,
    parse_tool_result,
    parse_wire_response,
    serialize_tool_call,
    serialize_tool_result,
    wire_request,
)


def sys_turn(text="You are a test agent."):
    return ChatTurn(role=ROLE_SYSTEM, content=text)


# --- turn invariants ---------------------------------------------------------

def test_turn_invariants():
    with pytest.raises(ValueError):
        ChatTurn(role=ROLE_TOOL)  # tool turns need a result
    with pytest.raises(ValueError):
        ChatTurn(role=ROLE_ASSISTANT)  # neither content nor calls
    ChatTurn(role=ROLE_ASSISTANT, tool_calls=(ToolCall("c1", "t", {}),))
    with pytest.raises(ValueError):
        ToolCall("c1", "", {})


# --- codec ---------------------------------------------------------------------

def test_codec_empty_arguments_roundtrip():
    call = ToolCall("c1", "list_entities", {})
    assert parse_tool_call(serialize_tool_call(call)) == call


json_values = st.recursive(
    st.one_of(
        st.none(),
        st.booleans(),
        st.integers(min_value=-(2**40), max_value=2**40),
        st.floats(allow_nan=False, allow_infinity=False, width=32),
        st.text(max_size=40),
    ),
    lambda children: st.one_of(
        st.lists(children, max_size=5),
        st.dictionaries(st.text(max_size=12), children, max_size=5),
    ),
    max_leaves=25,
)


@settings(max_examples=1000, deadline=None)
@given(st.dictionaries(st.text(min_size=1, max_size=16), json_values, max_size=6))
def test_codec_nested_roundtrip(arguments):
    call = ToolCall("c7", "query_window", arguments)
    parsed = parse_tool_call(serialize_tool_call(call))
    assert parsed == call


@settings(max_examples=300, deadline=None)
@given(json_values)
def test_tool_result_roundtrip(value):
    assert parse_tool_result(serialize_tool_result(value)) == value


def test_truncated_payload_never_partial():
    call = ToolCall("c1", "query_window", {"metric": "pps_in", "t_start": 0})
    blob = serialize_tool_call(call)
    for cut in range(1, len(blob) - 1):
        try:
            parse_tool_call(blob[:cut])
        except MalformedPayload:
            continue
        raise AssertionError(f"truncation at {cut} silently parsed")


def test_malformed_payload_reports_position():
    with pytest.raises(MalformedPayload) as exc:
        parse_tool_call('{"call_id": "x", bad')
    assert exc.value.position is not None


# --- prompt assembly -------------------------------------------------------------

def test_prompt_empty_history():
    turns = assemble_prompt("role", "schema", [], "question?")
    assert len(turns) == 2
    assert turns[0].role == ROLE_SYSTEM
    assert "role" in turns[0].content and "schema" in turns[0].content
    assert turns[1] == ChatTurn(role=ROLE_USER, content="question?")


def test_prompt_truncates_oldest_first():
    history = [ChatTurn(role=ROLE_USER, content=f"turn {i:03d} " + "x" * 200) for i in range(50)]
    turns = assemble_prompt("r", "s", history, "newest question", char_budget=1500)
    assert turns[0].role == ROLE_SYSTEM
    assert turns[-1].content == "newest question"
    kept = [t.content for t in turns[1:-1]]
    # the kept turns are the newest ones, in order
    assert kept == [t.content for t in history[-len(kept):]]
    total = sum(t.chars() for t in turns)
    assert total <= 1500


def test_prompt_budget_never_drops_system_or_question():
    history = [ChatTurn(role=ROLE_USER, content="x" * 500)]
    turns = assemble_prompt("r" * 400, "s" * 400, history, "q" * 400, char_budget=10)
    assert turns[0].role == ROLE_SYSTEM
    assert turns[-1].content == "q" * 400
    assert len(turns) == 2


def test_prompt_requires_question():
    with pytest.raises(ValueError):
        assemble_prompt("r", "s", [], "   ")


# --- scripted backend --------------------------------------------------------------

SCRIPT = """\
# demo rules
"count" -> say:There are {last_result} interfaces for: {question}
how many interfaces -> call:list_entities()
fail me -> say:nothing to report
"""


def test_scripted_rule_to_tool_call():
    backend = ScriptedBackend.from_text(SCRIPT)
    turn = backend.complete([sys_turn(), ChatTurn(role=ROLE_USER, content="how many interfaces?")])
    assert len(turn.tool_calls) == 1
    assert turn.tool_calls[0].tool_name == "list_entities"


def test_scripted_tool_result_match_and_substitution():
    backend = ScriptedBackend.from_text(SCRIPT)
    history = [
        sys_turn(),
        ChatTurn(role=ROLE_USER, content="how many interfaces?"),
        ChatTurn(role=ROLE_ASSISTANT, tool_calls=(ToolCall("c", "list_entities", {}),)),
        ChatTurn(role=ROLE_TOOL, tool_result='{"count":50}', tool_call_id="c"),
    ]
    turn = backend.complete(history)
    assert turn.content == 'There are {"count":50} interfaces for: how many interfaces?'


def test_scripted_determinism():
    backend = ScriptedBackend.from_text(SCRIPT)
    history = [sys_turn(), ChatTurn(role=ROLE_USER, content="how many interfaces?")]
    assert backend.complete(history) == backend.complete(history)


def test_scripted_no_match_is_error():
    backend = ScriptedBackend.from_text(SCRIPT)
    with pytest.raises(NoScriptMatch):
        backend.complete([sys_turn(), ChatTurn(role=ROLE_USER, content="unmatched weirdness")])


def test_scripted_first_match_wins():
    backend = ScriptedBackend.from_text(
        'question -> say:first\nquestion -> say:second\n'
    )
    turn = backend.complete([sys_turn(), ChatTurn(role=ROLE_USER, content="a question")])
    assert turn.content == "first"


def test_script_parse_errors():
    with pytest.raises(MalformedPayload):
        parse_script_rules(["no separator here"])
    with pytest.raises(MalformedPayload):
        parse_script_rules(["x -> dance:badly"])
    with pytest.raises(MalformedPayload):
        parse_script_rules(["x -> call:tool(not-json)"])
    with pytest.raises(MalformedPayload):
        parse_script_rules(["( -> say:bad regex"])


def test_script_call_arguments():
    (rule,) = parse_script_rules(['q -> call:query_window({"metric": "pps_in", "t_start": 5})'])
    assert rule.tool_name == "query_window"
    assert rule.arguments == {"metric": "pps_in", "t_start": 5}


def test_history_must_start_with_system():
    backend = ScriptedBackend.from_text(SCRIPT)
    with pytest.raises(ValueError):
        backend.complete([ChatTurn(role=ROLE_USER, content="how many interfaces")])
    with pytest.raises(ValueError):
        backend.complete([])


# --- http backend -------------------------------------------------------------------

class _StubHandler(BaseHTTPRequestHandler):
    response_payload: dict = {}
    requests_seen: list = []

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        type(self).requests_seen.append(body)
        blob = json.dumps(type(self).response_payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(blob)))
        self.end_headers()
        self.wfile.write(blob)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _StubHandler.requests_seen = []
    yield f"http://127.0.0.1:{server.server_port}/v1/chat/completions"
    server.shutdown()


# golden wire fixture: two tool calls, hand-verified once against the schema
GOLDEN_RESPONSE = {
    "choices": [
        {
            "message": {
                "role": "assistant",
                "content": None,
                "tool_calls": [
                    {
                        "id": "call_a1",
                        "type": "function",
                        "function": {
                            "name": "query_window",
                            "arguments": '{"entity_id": "booth01-eth0", "metric": "pps_in", "t_start": 0, "t_end": 3600}',
                        },
                    },
                    {
                        "id": "call_a2",
                        "type": "function",
                        "function": {"name": "list_entities", "arguments": "{}"},
                    },
                ],
            }
        }
    ]
}


def test_http_backend_parses_two_tool_calls(stub_server):
    _StubHandler.response_payload = GOLDEN_RESPONSE
    cfg = BackendConfig(kind="http", endpoint_url=stub_server, model_name="test-model")
    backend = HttpBackend()
    turn = backend.complete(
        [sys_turn(), ChatTurn(role=ROLE_USER, content="diagnose booth01")],
        tools=[{"name": "query_window", "description": "d", "parameters": {}}],
        cfg=cfg,
    )
    assert len(turn.tool_calls) == 2
    assert turn.tool_calls[0] == ToolCall(
        "call_a1", "query_window",
        {"entity_id": "booth01-eth0", "metric": "pps_in", "t_start": 0, "t_end": 3600},
    )
    assert turn.tool_calls[1] == ToolCall("call_a2", "list_entities", {})
    # request body carried model, messages, tools, temperature, max_tokens
    body = _StubHandler.requests_seen[0]
    assert body["model"] == "test-model"
    assert body["temperature"] == 0.0
    assert body["messages"][0]["role"] == "system"
    assert body["tools"][0]["function"]["name"] == "query_window"


def test_http_backend_malformed_response(stub_server):
    _StubHandler.response_payload = {"unexpected": True}
    cfg = BackendConfig(kind="http", endpoint_url=stub_server)
    with pytest.raises(MalformedResponse):
        HttpBackend().complete([sys_turn(), ChatTurn(role=ROLE_USER, content="x")], cfg=cfg)


def test_http_backend_unreachable():
    cfg = BackendConfig(kind="http", endpoint_url="http://127.0.0.1:1/nope", timeout_s=0.5)
    with pytest.raises(BackendUnreachable):
        HttpBackend().complete([sys_turn(), ChatTurn(role=ROLE_USER, content="x")], cfg=cfg)


def test_wire_request_roundtrips_tool_turns():
    history = [
        sys_turn(),
        ChatTurn(role=ROLE_USER, content="q"),
        ChatTurn(role=ROLE_ASSISTANT, tool_calls=(ToolCall("c9", "list_entities", {"a": 1}),)),
        ChatTurn(role=ROLE_TOOL, tool_result='{"ok":true}', tool_call_id="c9"),
    ]
    cfg = BackendConfig(kind="http", endpoint_url="http://x")
    body = wire_request(history, [], cfg)
    assert body["messages"][2]["tool_calls"][0]["id"] == "c9"
    assert json.loads(body["messages"][2]["tool_calls"][0]["function"]["arguments"]) == {"a": 1}
    assert body["messages"][3] == {"role": "tool", "content": '{"ok":true}', "tool_call_id": "c9"}


def test_parse_wire_response_rejects_empty_message():
    with pytest.raises(MalformedResponse):
        parse_wire_response({"choices": [{"message": {"role": "assistant", "content": ""}}]})


def test_backend_config_validation():
    with pytest.raises(ValueError):
        BackendConfig(kind="http")
    with pytest.raises(ValueError):
        BackendConfig(kind="scripted", script_path="")
    with pytest.raises(ValueError):
        BackendConfig(kind="quantum")
