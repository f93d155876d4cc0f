"""Textual interface-model language (``.ifm``), serializer and DOT export.

Grammar::

    model    := "interface" IDENT "{" "initial" IDENT ";" decl* state+ "}"
    decl     := "in" IDENT params? ";" | "out" IDENT ";" | "reply" IDENT ";"
    params   := "(" IDENT ":" sort ("," IDENT ":" sort)* ")"
    sort     := "int" | "string"
    state    := "state" IDENT "{" rule* "}"
    rule     := "on" IDENT ( "illegal"
                           | "->" IDENT ("notify" IDENT ("," IDENT)*)? "reply" IDENT ) ";"

``#`` starts a comment running to the end of the line. Keywords are reserved.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import groupby

from .model import (
    ILLEGAL, NOTIFICATION, REPLY, STIMULUS, EventDecl, InterfaceModel, Legal,
    Param, RuleCase, legal_transitions, reachable,
)

KEYWORDS = frozenset(
    "interface initial in out reply state on illegal notify int string".split())

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<arrow>->)
  | (?P<punct>[{};():,])
""", re.VERBOSE)


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int = 1


@dataclass(frozen=True)
class ParseError:
    span: SourceSpan
    code: str
    message: str

    def __str__(self):
        return f"{self.span.line}:{self.span.column}: {self.code}: {self.message}"


class ParseFailure(Exception):
    """Raised by :func:`parse`; ``errors`` holds one or more ParseError."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(str(e) for e in self.errors))


@dataclass(frozen=True)
class _Tok:
    kind: str  # "ident", "kw", "punct", "eof"
    text: str
    span: SourceSpan


class _Stop(Exception):
    pass


def _tokenize(text):
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if not m:
            raise ParseFailure([ParseError(
                SourceSpan(line, col, 1), "syntax",
                f"unexpected character {text[pos]!r}")])
        kind = m.lastgroup
        value = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident":
            tokens.append(_Tok("kw" if value in KEYWORDS else "ident", value,
                               SourceSpan(line, col, len(value))))
        elif kind in ("arrow", "punct"):
            tokens.append(_Tok("punct", value, SourceSpan(line, col, len(value))))
        pos = m.end()
    last_line = text[line_start:]
    tokens.append(_Tok("eof", "", SourceSpan(line, len(last_line) + 1, 1)))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0
        self.errors = []

    @property
    def tok(self):
        return self.toks[self.i]

    def fail(self, expected):
        tok = self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        self.errors.append(ParseError(tok.span, "syntax", f"expected {expected}, found {found}"))
        raise _Stop

    def is_(self, text):
        tok = self.tok
        return tok.kind in ("kw", "punct") and tok.text == text

    def expect(self, text):
        if not self.is_(text):
            self.fail(repr(text))
        self.i += 1

    def ident(self, what="identifier"):
        tok = self.tok
        if tok.kind != "ident":
            if tok.kind == "kw":
                self.fail(f"{what} (keyword {tok.text!r} is reserved)")
            self.fail(what)
        self.i += 1
        return tok

    def semantic(self, tok, code, message):
        self.errors.append(ParseError(tok.span, code, message))

    def model(self):
        self.expect("interface")
        name = self.ident("interface name").text
        self.expect("{")
        self.expect("initial")
        initial = self.ident("initial state name").text
        self.expect(";")

        alphabet = []
        declared = {}
        while self.tok.text in ("in", "out", "reply") and self.tok.kind == "kw":
            kind = {"in": STIMULUS, "out": NOTIFICATION, "reply": REPLY}[self.tok.text]
            self.i += 1
            tok = self.ident("event name")
            params = self.params() if kind == STIMULUS and self.is_("(") else ()
            self.expect(";")
            if tok.text in declared:
                self.semantic(tok, "duplicate-declaration", f"event {tok.text} is already declared")
                continue
            declared[tok.text] = tok
            alphabet.append(EventDecl(tok.text, kind, params))

        states = []
        rules = []
        state_names = set()
        if not self.is_("state"):
            self.fail("'in', 'out', 'reply' or 'state'")
        while self.is_("state"):
            self.i += 1
            tok = self.ident("state name")
            if tok.text in state_names:
                self.semantic(tok, "duplicate-declaration", f"state {tok.text} is already declared")
            elif tok.text in declared:
                self.semantic(tok, "duplicate-declaration",
                              f"{tok.text} is already declared as an event")
            else:
                state_names.add(tok.text)
                states.append(tok.text)
            self.expect("{")
            while self.is_("on"):
                rules.append(self.rule(tok.text))
            self.expect("}")
        self.expect("}")
        if self.tok.kind != "eof":
            self.fail("end of input")
        return InterfaceModel(name, tuple(alphabet), tuple(states), initial, tuple(rules))

    def params(self):
        self.expect("(")
        params = []
        seen = set()
        while True:
            tok = self.ident("parameter name")
            self.expect(":")
            sort_tok = self.tok
            if sort_tok.kind == "kw" and sort_tok.text in ("int", "string"):
                self.i += 1
            elif sort_tok.kind == "ident":
                self.i += 1
                self.semantic(sort_tok, "unknown-sort",
                              f"unknown sort {sort_tok.text!r} (expected int or string)")
            else:
                self.fail("'int' or 'string'")
            if tok.text in seen:
                self.semantic(tok, "duplicate-declaration", f"parameter {tok.text} is already declared")
            seen.add(tok.text)
            params.append(Param(tok.text, sort_tok.text))
            if self.is_(","):
                self.i += 1
                continue
            self.expect(")")
            return tuple(params)

    def rule(self, state):
        self.expect("on")
        stimulus = self.ident("stimulus name").text
        if self.is_("illegal"):
            self.i += 1
            self.expect(";")
            return RuleCase(state, stimulus, ILLEGAL)
        self.expect("->")
        target = self.ident("target state").text
        notifications = []
        if self.is_("notify"):
            self.i += 1
            notifications.append(self.ident("notification name").text)
            while self.is_(","):
                self.i += 1
                notifications.append(self.ident("notification name").text)
        self.expect("reply")
        reply = self.ident("reply name").text
        self.expect(";")
        return RuleCase(state, stimulus, Legal(tuple(notifications), reply, target))


def _decode(data):
    if isinstance(data, str):
        return data
    try:
        return bytes(data).decode("utf-8")
    except UnicodeDecodeError as exc:
        head = bytes(data)[:exc.start].decode("utf-8")
        line = head.count("\n") + 1
        col = len(head) - (head.rfind("\n") + 1) + 1
        raise ParseFailure([ParseError(SourceSpan(line, col, 1), "syntax",
                                       "input is not valid UTF-8")]) from None


def parse(text: str | bytes) -> InterfaceModel:
    """Parse ``.ifm`` source. Raises :class:`ParseFailure` on any error."""
    text = _decode(text)
    parser = _Parser(_tokenize(text))
    try:
        model = parser.model()
    except _Stop:
        model = None
    if parser.errors:
        raise ParseFailure(parser.errors)
    return model


def parse_file(path) -> InterfaceModel:
    with open(path, "rb") as fh:
        return parse(fh.read())


def _decl(e: EventDecl) -> str:
    kw = {STIMULUS: "in", NOTIFICATION: "out", REPLY: "reply"}[e.kind]
    if e.params:
        inner = ", ".join(f"{p.name}:{p.sort}" for p in e.params)
        return f"{kw} {e.name}({inner});"
    return f"{kw} {e.name};"


def _rule(r: RuleCase) -> str:
    out = r.outcome
    if not isinstance(out, Legal):
        return f"on {r.stimulus} illegal;"
    notify = f" notify {', '.join(out.notifications)}" if out.notifications else ""
    return f"on {r.stimulus} -> {out.target}{notify} reply {out.reply};"


def serialize(model: InterfaceModel) -> str:
    """Render a model in the canonical one-line-per-state layout."""
    lines = [f"interface {model.name} {{", f"  initial {model.initial};"]
    for _, run in groupby(model.alphabet, key=lambda e: e.kind):
        lines.append("  " + " ".join(_decl(e) for e in run))
    by_state = {s: [] for s in model.states}
    for r in model.rules:
        by_state[r.state].append(_rule(r))
    width = max(len(s) for s in model.states)
    for s in model.states:
        body = " ".join(by_state[s])
        lines.append(f"  state {s.ljust(width)} {{ {body} }}" if body else f"  state {s} {{ }}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


ILLEGAL_NODE = "!ILLEGAL"


def edge_label(stimulus, reply, notifications) -> str:
    label = f"{stimulus} / {reply}"
    if notifications:
        label += " " + " ".join("+" + n for n in notifications)
    return label


def render_dot(model: InterfaceModel, show_illegal: bool = False) -> str:
    """State diagram of the reachable part of ``model`` as a DOT digraph."""
    reached = reachable(model)
    lines = [f"digraph {dot_quote(model.name)} {{", "  rankdir=LR;"]
    for s in model.states:
        if s in reached:
            shape = "doublecircle" if s == model.initial else "circle"
            lines.append(f"  {dot_quote(s)} [shape={shape}];")
    for s, e, taken in legal_transitions(model):
        label = edge_label(e, taken.reply, taken.notifications)
        lines.append(f"  {dot_quote(s)} -> {dot_quote(taken.next)} [label={dot_quote(label)}];")
    if show_illegal:
        lines.append(f"  {dot_quote(ILLEGAL_NODE)} [label=\"ILLEGAL\", shape=box, style=dashed];")
        for s in model.states:
            if s not in reached:
                continue
            for e in model.stimuli:
                if not isinstance(model.rule(s, e), Legal):
                    lines.append(f"  {dot_quote(s)} -> {dot_quote(ILLEGAL_NODE)} "
                                 f"[label={dot_quote(e)}, style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"
