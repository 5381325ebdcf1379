"""Pluggable chat-model backends and the tool-call wire protocol.

Two backends sit behind one ``complete(history, tools, cfg)`` interface: an
HTTP client speaking the chat-completions schema against a locally hosted
inference server, and a deterministic scripted backend for tests. The model
stays an opaque endpoint; locality is the deployment's concern.

Scripted rule file: one rule per line, ``pattern -> action``; the pattern
is a regex matched (first match wins) against the newest user or tool turn;
the action is ``say:<text>`` or ``call:<tool>(<json-args>)``. A ``say``
text may use ``{last_result}`` (the newest tool result) and ``{question}``
(the newest user turn), which is how canned answers embed real tool output.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import requests

ROLE_SYSTEM = "system"
ROLE_USER = "user"
ROLE_ASSISTANT = "assistant"
ROLE_TOOL = "tool"

BACKEND_HTTP = "http"
BACKEND_SCRIPTED = "scripted"

DEFAULT_CHAR_BUDGET = 6000


class BackendError(Exception):
    pass


class BackendUnreachable(BackendError):
    pass


class MalformedResponse(BackendError):
    pass


class NoScriptMatch(BackendError):
    """No scripted rule matched: a test-fixture gap, never guessed around."""


class MalformedPayload(BackendError):
    """Tool-call or tool-result payload failed to decode."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at offset {position})"
        self.position = position
        super().__init__(message)


@dataclass(frozen=True)
class ToolCall:
    call_id: str
    tool_name: str
    arguments: dict

    def __post_init__(self) -> None:
        if not self.tool_name:
            raise ValueError("tool_name must be nonempty")


@dataclass(frozen=True)
class ChatTurn:
    role: str
    content: str = ""
    tool_calls: tuple[ToolCall, ...] = ()
    tool_result: str | None = None
    tool_call_id: str | None = None

    def __post_init__(self) -> None:
        if self.role == ROLE_TOOL and self.tool_result is None:
            raise ValueError("tool turns require a tool_result")
        if self.role == ROLE_ASSISTANT and not self.content and not self.tool_calls:
            raise ValueError("assistant turns carry content or tool calls, never neither")

    def chars(self) -> int:
        n = len(self.content)
        if self.tool_result is not None:
            n += len(self.tool_result)
        for call in self.tool_calls:
            n += len(serialize_tool_call(call))
        return n


@dataclass(frozen=True)
class BackendConfig:
    kind: str = BACKEND_SCRIPTED
    endpoint_url: str = ""
    model_name: str = "local"
    temperature: float = 0.0
    max_tokens: int = 1024
    timeout_s: float = 30.0
    script_path: str = ""

    def __post_init__(self) -> None:
        if self.kind not in (BACKEND_HTTP, BACKEND_SCRIPTED):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == BACKEND_HTTP and not self.endpoint_url:
            raise ValueError("http backend requires endpoint_url")
        if self.kind == BACKEND_SCRIPTED and not self.script_path:
            raise ValueError("scripted backend requires script_path")


# --- tool-call / tool-result codec -------------------------------------------

def serialize_tool_call(call: ToolCall) -> str:
    return json.dumps(
        {"call_id": call.call_id, "tool_name": call.tool_name, "arguments": call.arguments},
        sort_keys=True,
        separators=(",", ":"),
    )


def parse_tool_call(text: str) -> ToolCall:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedPayload(f"tool call is not valid JSON: {exc.msg}", position=exc.pos) from None
    if not isinstance(payload, dict):
        raise MalformedPayload("tool call must be a JSON object")
    missing = {"call_id", "tool_name", "arguments"} - set(payload)
    if missing:
        raise MalformedPayload(f"tool call missing fields {sorted(missing)}")
    if not isinstance(payload["arguments"], dict):
        raise MalformedPayload("tool call arguments must be a JSON object")
    try:
        return ToolCall(
            call_id=str(payload["call_id"]),
            tool_name=payload["tool_name"],
            arguments=payload["arguments"],
        )
    except ValueError as exc:
        raise MalformedPayload(str(exc)) from None


def serialize_tool_result(value) -> str:
    """Canonical JSON for tool results; sorted keys keep transcripts stable."""
    try:
        return json.dumps(value, sort_keys=True, separators=(",", ":"), allow_nan=False)
    except (TypeError, ValueError) as exc:
        raise MalformedPayload(f"tool result not serializable: {exc}") from None


def parse_tool_result(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedPayload(f"tool result is not valid JSON: {exc.msg}", position=exc.pos) from None


# --- prompt assembly ----------------------------------------------------------

def assemble_prompt(
    role_prompt: str,
    scope_schema: str,
    history: list[ChatTurn],
    question: str,
    char_budget: int = DEFAULT_CHAR_BUDGET,
) -> list[ChatTurn]:
    """System turn (role + scope schema), then history, then the question.

    History is truncated oldest-first to honor the character budget; the
    system turn and the newest user turn survive regardless.
    """
    if not question.strip():
        raise ValueError("question must be nonempty")
    system = ChatTurn(role=ROLE_SYSTEM, content=f"{role_prompt}\n\n{scope_schema}".strip())
    user = ChatTurn(role=ROLE_USER, content=question)
    kept: list[ChatTurn] = list(history)
    fixed = system.chars() + user.chars()
    while kept and fixed + sum(t.chars() for t in kept) > char_budget:
        kept.pop(0)
    return [system, *kept, user]


# --- backends -----------------------------------------------------------------

_ACTION_RE = re.compile(r"^(say|call):(.*)$", re.S)
_CALL_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\((.*)\)$", re.S)


@dataclass(frozen=True)
class ScriptRule:
    pattern: re.Pattern
    action_kind: str  # say | call
    say_text: str = ""
    tool_name: str = ""
    arguments: dict = field(default_factory=dict)


def parse_script_rules(lines) -> list[ScriptRule]:
    rules = []
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if " -> " in stripped:
            pattern_text, action_text = stripped.split(" -> ", 1)
        elif " → " in stripped:
            pattern_text, action_text = stripped.split(" → ", 1)
        else:
            raise MalformedPayload(f"script line {line_no}: missing '->' separator")
        match = _ACTION_RE.match(action_text.strip())
        if not match:
            raise MalformedPayload(f"script line {line_no}: action must be say:... or call:...")
        kind, body = match.group(1), match.group(2)
        try:
            pattern = re.compile(pattern_text.strip())
        except re.error as exc:
            raise MalformedPayload(f"script line {line_no}: bad pattern: {exc}") from None
        if kind == "say":
            rules.append(ScriptRule(pattern=pattern, action_kind="say", say_text=body))
        else:
            call = _CALL_RE.match(body.strip())
            if not call:
                raise MalformedPayload(f"script line {line_no}: call action must be tool(args)")
            args_text = call.group(2).strip()
            if args_text:
                try:
                    arguments = json.loads(args_text)
                except json.JSONDecodeError as exc:
                    raise MalformedPayload(
                        f"script line {line_no}: call arguments not JSON: {exc.msg}",
                        position=exc.pos,
                    ) from None
                if not isinstance(arguments, dict):
                    raise MalformedPayload(f"script line {line_no}: call arguments must be an object")
            else:
                arguments = {}
            rules.append(
                ScriptRule(pattern=pattern, action_kind="call", tool_name=call.group(1), arguments=arguments)
            )
    return rules


class ScriptedBackend:
    """Deterministic stand-in: ordered first-match pattern rules.

    A pure function of (history, rules): the newest user or tool turn is
    matched against the rules; ``say`` yields a final answer (with
    ``{last_result}``/``{question}`` substituted), ``call`` yields a tool
    call whose id is derived from the history length.
    """

    def __init__(self, rules: list[ScriptRule]):
        self.rules = rules

    @classmethod
    def from_file(cls, path: str) -> "ScriptedBackend":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(parse_script_rules(fh))

    @classmethod
    def from_text(cls, text: str) -> "ScriptedBackend":
        return cls(parse_script_rules(text.splitlines()))

    def complete(self, history: list[ChatTurn], tools=None, cfg: BackendConfig | None = None) -> ChatTurn:
        _validate_history(history)
        newest = None
        for turn in reversed(history):
            if turn.role in (ROLE_USER, ROLE_TOOL):
                newest = turn
                break
        if newest is None:
            raise NoScriptMatch("history has no user or tool turn to match")
        subject = newest.tool_result if newest.role == ROLE_TOOL else newest.content
        for rule in self.rules:
            if rule.pattern.search(subject) is None:
                continue
            if rule.action_kind == "say":
                text = rule.say_text
                if "{last_result}" in text:
                    text = text.replace("{last_result}", _newest_tool_result(history))
                if "{question}" in text:
                    text = text.replace("{question}", _newest_user_content(history))
                return ChatTurn(role=ROLE_ASSISTANT, content=text)
            call = ToolCall(
                call_id=f"call-{len(history)}", tool_name=rule.tool_name, arguments=rule.arguments
            )
            return ChatTurn(role=ROLE_ASSISTANT, tool_calls=(call,))
        raise NoScriptMatch(f"no rule matched {subject[:120]!r}")


def _newest_tool_result(history: list[ChatTurn]) -> str:
    for turn in reversed(history):
        if turn.role == ROLE_TOOL:
            return turn.tool_result or ""
    return ""


def _newest_user_content(history: list[ChatTurn]) -> str:
    for turn in reversed(history):
        if turn.role == ROLE_USER:
            return turn.content
    return ""


def _validate_history(history: list[ChatTurn]) -> None:
    if not history:
        raise ValueError("history must be nonempty")
    if history[0].role != ROLE_SYSTEM:
        raise ValueError("first turn must be the system turn")


class HttpBackend:
    """One request/response against a chat-completions-compatible server."""

    def __init__(self, session: requests.Session | None = None):
        self._session = session or requests.Session()

    def complete(self, history: list[ChatTurn], tools=None, cfg: BackendConfig | None = None) -> ChatTurn:
        _validate_history(history)
        if cfg is None or not cfg.endpoint_url:
            raise ValueError("http backend requires cfg.endpoint_url")
        body = wire_request(history, tools or [], cfg)
        try:
            response = self._session.post(cfg.endpoint_url, json=body, timeout=cfg.timeout_s)
        except (requests.Timeout, requests.ConnectionError) as exc:
            raise BackendUnreachable(f"{cfg.endpoint_url}: {exc}") from None
        if response.status_code != 200:
            raise BackendUnreachable(f"{cfg.endpoint_url}: HTTP {response.status_code}")
        try:
            payload = response.json()
        except ValueError as exc:
            raise MalformedResponse(f"response body is not JSON: {exc}") from None
        return parse_wire_response(payload)


def wire_request(history: list[ChatTurn], tools: list[dict], cfg: BackendConfig) -> dict:
    """Request body for the chat-completions wire schema (documented in README)."""
    messages = []
    for turn in history:
        msg: dict = {"role": turn.role, "content": turn.content}
        if turn.role == ROLE_TOOL:
            msg["tool_call_id"] = turn.tool_call_id or ""
            msg["content"] = turn.tool_result
        if turn.tool_calls:
            msg["tool_calls"] = [
                {
                    "id": call.call_id,
                    "type": "function",
                    "function": {
                        "name": call.tool_name,
                        "arguments": json.dumps(call.arguments, sort_keys=True),
                    },
                }
                for call in turn.tool_calls
            ]
        messages.append(msg)
    body = {
        "model": cfg.model_name,
        "messages": messages,
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_tokens,
    }
    if tools:
        body["tools"] = [{"type": "function", "function": schema} for schema in tools]
    return body


def parse_wire_response(payload: dict) -> ChatTurn:
    """Assistant turn from a chat-completions response payload."""
    try:
        message = payload["choices"][0]["message"]
    except (KeyError, IndexError, TypeError):
        raise MalformedResponse("response missing choices[0].message") from None
    content = message.get("content") or ""
    calls = []
    for raw in message.get("tool_calls") or []:
        try:
            fn = raw["function"]
            arguments = json.loads(fn.get("arguments") or "{}")
            if not isinstance(arguments, dict):
                raise MalformedResponse("tool call arguments must decode to an object")
            calls.append(
                ToolCall(call_id=str(raw.get("id", "")), tool_name=fn["name"], arguments=arguments)
            )
        except MalformedResponse:
            raise
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise MalformedResponse(f"bad tool call in response: {exc}") from None
    if not content and not calls:
        raise MalformedResponse("assistant message carries neither content nor tool calls")
    return ChatTurn(role=ROLE_ASSISTANT, content=content, tool_calls=tuple(calls))


def make_backend(cfg: BackendConfig):
    if cfg.kind == BACKEND_SCRIPTED:
        return ScriptedBackend.from_file(cfg.script_path)
    return HttpBackend()
