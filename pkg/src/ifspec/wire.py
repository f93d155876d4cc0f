"""Ground stimulus encoding and the line-oriented adapter protocol.

Runner to SUT::

    RESET
    CALL <event>
    CALL <event>(<arg>,<arg>,...)

SUT to runner::

    READY
    NOTIFY <event>
    REPLY <event>

Int arguments are decimal, string arguments are double-quoted with ``\\"``
and ``\\\\`` escapes. Keywords are case-sensitive; lines end with LF.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import HarnessError

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT_RE = re.compile(r"-?[0-9]+")


@dataclass(frozen=True, order=True)
class GroundStimulus:
    """A stimulus name together with concrete argument values."""

    name: str
    args: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def __str__(self):
        return format_call(self)


def format_arg(value) -> str:
    if isinstance(value, bool):
        raise TypeError("boolean arguments are not supported")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise TypeError(f"unsupported argument type {type(value).__name__}")


def format_call(stim: GroundStimulus) -> str:
    if not stim.args:
        return stim.name
    return f"{stim.name}({','.join(format_arg(a) for a in stim.args)})"


def _parse_string(text, pos):
    # text[pos] == '"'
    out = []
    i = pos + 1
    while i < len(text):
        c = text[i]
        if c == "\\":
            if i + 1 < len(text) and text[i + 1] in '"\\':
                out.append(text[i + 1])
                i += 2
                continue
            raise ValueError(f"bad escape at column {i + 1}")
        if c == '"':
            return "".join(out), i + 1
        out.append(c)
        i += 1
    raise ValueError("unterminated string")


def parse_arg(text, pos=0):
    """Parse one argument literal at ``pos``; return (value, end)."""
    if pos < len(text) and text[pos] == '"':
        return _parse_string(text, pos)
    m = _INT_RE.match(text, pos)
    if not m:
        raise ValueError(f"expected argument at column {pos + 1}")
    return int(m.group()), m.end()


def parse_call(text: str, pos: int = 0) -> tuple[GroundStimulus, int]:
    """Parse ``name`` or ``name(arg,...)`` starting at ``pos``.

    Returns the stimulus and the index just past it. Raises ValueError.
    """
    m = IDENT_RE.match(text, pos)
    if not m:
        raise ValueError(f"expected event name at column {pos + 1}")
    name, i = m.group(), m.end()
    if i >= len(text) or text[i] != "(":
        return GroundStimulus(name), i
    args = []
    i += 1
    while True:
        value, i = parse_arg(text, i)
        args.append(value)
        if i < len(text) and text[i] == ",":
            i += 1
            continue
        if i < len(text) and text[i] == ")":
            return GroundStimulus(name, tuple(args)), i + 1
        raise ValueError(f"expected ',' or ')' at column {i + 1}")


def parse_values(text: str) -> list:
    """Parse a comma-separated list of literals, e.g. from a config file.

    Bare words are accepted as strings.
    """
    values = []
    i, n = 0, len(text)
    while True:
        while i < n and text[i] in " \t":
            i += 1
        if i < n and text[i] == '"':
            value, i = _parse_string(text, i)
        else:
            j = text.find(",", i)
            j = n if j < 0 else j
            raw = text[i:j].strip()
            if not raw:
                raise ValueError("empty value")
            value = int(raw) if _INT_RE.fullmatch(raw) else raw
            i = j
        values.append(value)
        while i < n and text[i] in " \t":
            i += 1
        if i >= n:
            return values
        if text[i] != ",":
            raise ValueError(f"expected ',' at column {i + 1}")
        i += 1


# --- adapter messages -------------------------------------------------------

@dataclass(frozen=True)
class Ready:
    pass


@dataclass(frozen=True)
class Notify:
    event: str


@dataclass(frozen=True)
class Reply:
    event: str


class MalformedMessage(HarnessError):
    def __init__(self, line):
        super().__init__("malformed-message", f"malformed message {line!r}", line=line)
        self.line = line


def parse_adapter_line(line: str) -> Ready | Notify | Reply:
    """Decode one SUT-to-runner line (trailing LF optional)."""
    text = line[:-1] if line.endswith("\n") else line
    if text == "READY":
        return Ready()
    keyword, sep, event = text.partition(" ")
    if sep and IDENT_RE.fullmatch(event):
        if keyword == "NOTIFY":
            return Notify(event)
        if keyword == "REPLY":
            return Reply(event)
    raise MalformedMessage(line)


def encode_call(stim: GroundStimulus) -> str:
    return f"CALL {format_call(stim)}\n"


def decode_request(line: str) -> str | GroundStimulus:
    """Decode a runner-to-SUT line: ``"RESET"`` or a GroundStimulus."""
    text = line[:-1] if line.endswith("\n") else line
    if text == "RESET":
        return "RESET"
    if text.startswith("CALL "):
        try:
            stim, end = parse_call(text, 5)
        except ValueError:
            raise MalformedMessage(line) from None
        if end == len(text):
            return stim
    raise MalformedMessage(line)
