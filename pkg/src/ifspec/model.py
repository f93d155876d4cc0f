"""Interface models: data types, validation and single-step semantics.

An interface model is a complete rule table. For every state and every
stimulus there is exactly one rule case, which either declares the stimulus
illegal or gives the notifications emitted, the reply and the next state.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Union

from .errors import ModelError

STIMULUS = "stimulus"
NOTIFICATION = "notification"
REPLY = "reply"
EVENT_KINDS = (STIMULUS, NOTIFICATION, REPLY)
SORTS = ("int", "string")


@dataclass(frozen=True)
class Param:
    name: str
    sort: str  # "int" | "string"


@dataclass(frozen=True)
class EventDecl:
    name: str
    kind: str
    params: tuple[Param, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))

    @property
    def signature(self):
        return (self.kind, tuple((p.name, p.sort) for p in self.params))


@dataclass(frozen=True)
class Illegal:
    """Outcome of a cell that forbids its stimulus."""

    def __repr__(self):
        return "ILLEGAL"


ILLEGAL = Illegal()


@dataclass(frozen=True)
class Legal:
    notifications: tuple[str, ...]
    reply: str
    target: str

    def __post_init__(self):
        object.__setattr__(self, "notifications", tuple(self.notifications))


@dataclass(frozen=True)
class Taken:
    notifications: tuple[str, ...]
    reply: str
    next: str


StepOutcome = Union[Taken, Illegal]


@dataclass(frozen=True)
class RuleCase:
    state: str
    stimulus: str
    outcome: Legal | Illegal

    @property
    def legal(self):
        return isinstance(self.outcome, Legal)


@dataclass(frozen=True)
class InterfaceModel:
    name: str
    alphabet: tuple[EventDecl, ...]
    states: tuple[str, ...]
    initial: str
    rules: tuple[RuleCase, ...]

    def __post_init__(self):
        for attr in ("alphabet", "states", "rules"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        # rules are kept grouped by state (stable), which is how tables are written
        order = {s: i for i, s in enumerate(self.states)}
        rules = sorted(self.rules, key=lambda r: order.get(r.state, len(order)))
        object.__setattr__(self, "rules", tuple(rules))

    def events_of(self, kind):
        return tuple(e.name for e in self.alphabet if e.kind == kind)

    @cached_property
    def stimuli(self) -> tuple[str, ...]:
        return self.events_of(STIMULUS)

    @cached_property
    def notifications(self) -> tuple[str, ...]:
        return self.events_of(NOTIFICATION)

    @cached_property
    def replies(self) -> tuple[str, ...]:
        return self.events_of(REPLY)

    @cached_property
    def state_set(self) -> frozenset[str]:
        return frozenset(self.states)

    @cached_property
    def stimulus_set(self) -> frozenset[str]:
        return frozenset(self.stimuli)

    @cached_property
    def events(self) -> dict[str, EventDecl]:
        return {e.name: e for e in self.alphabet}

    @cached_property
    def table(self) -> dict[tuple[str, str], Legal | Illegal]:
        """First rule case per (state, stimulus) cell."""
        table = {}
        for rule in self.rules:
            table.setdefault((rule.state, rule.stimulus), rule.outcome)
        return table

    def rule(self, state, stimulus):
        try:
            return self.table[state, stimulus]
        except KeyError:
            raise ModelError(
                "incomplete", f"no rule for ({state}, {stimulus})",
                state=state, stimulus=stimulus) from None


@dataclass(frozen=True)
class Finding:
    severity: Literal["error", "warning"]
    code: str
    location: tuple[str, ...]
    message: str

    def __str__(self):
        return f"{self.severity} {self.code} {','.join(self.location)}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not any(f.severity == "error" for f in self.findings)

    @property
    def errors(self):
        return [f for f in self.findings if f.severity == "error"]

    @property
    def warnings(self):
        return [f for f in self.findings if f.severity == "warning"]


def validate(model: InterfaceModel) -> ValidationReport:
    """Check completeness, determinism, name resolution and reachability.

    Problems are reported as findings; nothing is raised.
    """
    findings = []

    def error(code, location, message):
        findings.append(Finding("error", code, tuple(location), message))

    seen = set()
    for decl in model.alphabet:
        if decl.name in seen:
            error("duplicate-declaration", [decl.name], f"event {decl.name} declared twice")
        seen.add(decl.name)
        if decl.kind not in EVENT_KINDS:
            error("unresolved", [decl.name], f"unknown event kind {decl.kind!r}")
        if decl.params and decl.kind != STIMULUS:
            error("invalid-params", [decl.name], f"{decl.kind} {decl.name} cannot carry parameters")
        for p in decl.params:
            if p.sort not in SORTS:
                error("unknown-sort", [decl.name, p.name], f"unknown sort {p.sort!r}")
    states = set()
    for s in model.states:
        if s in states:
            error("duplicate-declaration", [s], f"state {s} declared twice")
        if s in model.events:
            error("duplicate-declaration", [s], f"{s} is both a state and an event")
        states.add(s)
    if not model.states:
        error("unresolved", [model.name], "model has no states")
    if model.initial not in states:
        error("unresolved", [model.initial], f"initial state {model.initial} is not declared")

    stimuli = set(model.stimuli)
    notifications = set(model.notifications)
    replies = set(model.replies)
    for rule in model.rules:
        if rule.state not in states:
            error("unresolved", [rule.state, rule.stimulus], f"rule for undeclared state {rule.state}")
        if rule.stimulus not in stimuli:
            error("unresolved", [rule.state, rule.stimulus],
                  f"{rule.stimulus} is not a declared stimulus")
        out = rule.outcome
        if out.__class__ is Legal:
            if out.target not in states or out.reply not in replies or \
                    not notifications.issuperset(out.notifications):
                _unresolved_outcome(rule, states, notifications, replies, error)

    table = model.table
    expected = len(model.states) * len(model.stimuli)
    if not (len(table) == len(model.rules) == expected and len(states) == len(model.states)):
        counts = Counter((r.state, r.stimulus) for r in model.rules)
        for s in model.states:
            for e in model.stimuli:
                n = counts.get((s, e), 0)
                if n == 0:
                    error("incomplete", [s, e], f"no rule for stimulus {e} in state {s}")
                elif n > 1:
                    error("nondeterministic", [s, e], f"{n} rules for stimulus {e} in state {s}")

    if model.initial in states:
        reached = _reach(model)
        for s in model.states:
            if s not in reached:
                findings.append(Finding(
                    "warning", "unreachable", (s,),
                    f"state {s} is unreachable from {model.initial}"))
    return ValidationReport(tuple(findings))


def _unresolved_outcome(rule, states, notifications, replies, error):
    loc = [rule.state, rule.stimulus]
    out = rule.outcome
    for n in out.notifications:
        if n not in notifications:
            error("unresolved", loc + [n], f"{n} is not a declared notification")
    if out.reply not in replies:
        error("unresolved", loc + [out.reply], f"{out.reply} is not a declared reply")
    if out.target not in states:
        error("unresolved", loc + [out.target], f"target {out.target} is not a declared state")


def step(model: InterfaceModel, state: str, stimulus: str) -> StepOutcome:
    if state not in model.state_set:
        raise ModelError("unknown-state", f"unknown state {state}", state=state)
    if stimulus not in model.stimulus_set:
        raise ModelError("unknown-event", f"unknown stimulus {stimulus}", stimulus=stimulus)
    out = model.rule(state, stimulus)
    if isinstance(out, Illegal):
        return ILLEGAL
    return Taken(out.notifications, out.reply, out.target)


def _reach(model):
    succ = {}
    for rule in model.rules:
        out = rule.outcome
        if out.__class__ is Legal:
            succ.setdefault(rule.state, []).append(out.target)
    seen = {model.initial}
    queue = deque(seen)
    while queue:
        for t in succ.get(queue.popleft(), ()):
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return seen


def reachable(model: InterfaceModel) -> set[str]:
    """States reachable from the initial state through legal transitions."""
    return _reach(model)


def legal_transitions(model: InterfaceModel) -> list[tuple[str, str, Taken]]:
    """Legal cells whose source state is reachable, in (state, stimulus) order."""
    reached = _reach(model)
    result = []
    for s in model.states:
        if s not in reached:
            continue
        for e in model.stimuli:
            out = step(model, s, e)
            if isinstance(out, Taken):
                result.append((s, e, out))
    return result


def require_valid(model: InterfaceModel, error=ModelError):
    report = validate(model)
    if not report.ok:
        first = report.errors[0]
        raise error("invalid-model", f"model {model.name} is not valid ({first})", report=report)
    return report
