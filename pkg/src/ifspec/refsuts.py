"""Reference systems under test and seeded-fault mutants.

A reference SUT executes an interface model's rule table over the adapter
protocol. Mutants perturb exactly one cell of the table.
"""

from __future__ import annotations

import itertools
import socketserver
import sys
from collections import deque
from dataclasses import dataclass
from importlib import resources

from .model import ILLEGAL, Illegal, InterfaceModel, Legal, RuleCase, EventDecl, require_valid
from .text import parse
from .wire import MalformedMessage, decode_request

ILLEGAL_REPLY = "__ILLEGAL__"
PROTOCOL_ERROR = "__PROTOCOL_ERROR__"

FAULTS = ("wrong-reply", "missing-notify", "wrong-next-state", "accept-illegal")


@dataclass(frozen=True)
class MutantSpec:
    """One seeded fault. ``alt`` is the replacement reply (wrong-reply) or
    state (wrong-next-state); when omitted a default is derived."""

    id: str
    target: tuple[str, str]
    fault: str
    alt: str | None = None

    def __post_init__(self):
        if self.fault not in FAULTS:
            raise ValueError(f"unknown fault {self.fault!r}")


def mutate(model: InterfaceModel, mutant: MutantSpec) -> InterfaceModel:
    """The model's rule table with the mutant's cell replaced.

    The result need not validate (e.g. a wrong reply may be undeclared).
    """
    state, stimulus = mutant.target
    if state not in model.state_set or stimulus not in model.stimulus_set:
        raise ValueError(f"mutant {mutant.id}: no cell ({state}, {stimulus}) in {model.name}")
    out = model.rule(state, stimulus)
    fault = mutant.fault
    if fault == "accept-illegal":
        if isinstance(out, Legal):
            raise ValueError(f"mutant {mutant.id}: cell ({state}, {stimulus}) is already legal")
        # borrow the stimulus's first legal behaviour elsewhere
        borrowed = next((model.rule(s, stimulus) for s in model.states
                         if isinstance(model.rule(s, stimulus), Legal)), None)
        new = borrowed or Legal((), mutant.alt or (model.replies or ("ok",))[0], state)
    else:
        if not isinstance(out, Legal):
            raise ValueError(f"mutant {mutant.id}: {fault} needs a legal cell")
        if fault == "wrong-reply":
            alt = mutant.alt or next((r for r in model.replies if r != out.reply), "error")
            if alt == out.reply:
                raise ValueError(f"mutant {mutant.id}: replacement reply equals the original")
            new = Legal(out.notifications, alt, out.target)
        elif fault == "missing-notify":
            if not out.notifications:
                raise ValueError(f"mutant {mutant.id}: cell emits no notification")
            new = Legal(out.notifications[:-1], out.reply, out.target)
        else:
            alt = mutant.alt or (state if state != out.target else
                                 next(s for s in model.states if s != out.target))
            if alt == out.target:
                raise ValueError(f"mutant {mutant.id}: replacement state equals the original")
            new = Legal(out.notifications, out.reply, alt)
    rules = tuple(RuleCase(r.state, r.stimulus, new) if (r.state, r.stimulus) == mutant.target
                  else r for r in model.rules)
    return InterfaceModel(model.name, model.alphabet, model.states, model.initial, rules)


def _observe(out):
    if isinstance(out, Illegal):
        return (), ILLEGAL_REPLY, None
    return out.notifications, out.reply, out.target


def divergence(model: InterfaceModel, mutated: InterfaceModel, max_len: int = 6):
    """Shortest model-legal stimulus trace on which the two tables differ
    observably, or None if there is none within ``max_len`` steps."""
    start = (model.initial, mutated.initial)
    seen = {start}
    queue = deque([(start, ())])
    while queue:
        (s, t), trace = queue.popleft()
        if len(trace) >= max_len:
            continue
        for e in model.stimuli:
            out = model.rule(s, e)
            if isinstance(out, Illegal):
                continue
            want, got = _observe(out), _observe(mutated.rule(t, e))
            if want[:2] != got[:2]:
                return trace + (e,)
            nxt = (want[2], got[2])
            if nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, trace + (e,)))
    return None


class SutSession:
    """Protocol state machine for one connection."""

    def __init__(self, model: InterfaceModel, mutant: MutantSpec | None = None):
        self.model = mutate(model, mutant) if mutant else model
        self.state = self.model.initial

    def handle(self, line: str) -> list[str]:
        try:
            request = decode_request(line)
        except MalformedMessage:
            return [f"REPLY {PROTOCOL_ERROR}"]
        if request == "RESET":
            self.state = self.model.initial
            return ["READY"]
        decl = self.model.events.get(request.name)
        if decl is None or decl.kind != "stimulus" or len(request.args) != len(decl.params):
            return [f"REPLY {PROTOCOL_ERROR}"]
        out = self.model.rule(self.state, request.name)
        if isinstance(out, Illegal):
            return [f"REPLY {ILLEGAL_REPLY}"]
        self.state = out.target
        return [f"NOTIFY {n}" for n in out.notifications] + [f"REPLY {out.reply}"]


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        session = SutSession(self.server.model, self.server.mutant)
        for raw in self.rfile:
            line = raw.decode("utf-8", errors="replace").rstrip("\n")
            out = "".join(f"{r}\n" for r in session.handle(line))
            try:
                self.wfile.write(out.encode("utf-8"))
                self.wfile.flush()
            except OSError:
                return


class SutServer(socketserver.TCPServer):
    """Serves one connection at a time."""

    allow_reuse_address = True

    def __init__(self, model, mutant=None, host="127.0.0.1", port=0):
        require_valid(model)
        self.model = model
        self.mutant = mutant
        super().__init__((host, port), _Handler)

    @property
    def port(self):
        return self.server_address[1]


def serve_stdio(model, mutant=None, stdin=None, stdout=None):
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    require_valid(model)
    session = SutSession(model, mutant)
    for raw in stdin:
        for r in session.handle(raw.rstrip("\n")):
            stdout.write(r + "\n")
        stdout.flush()


def serve(model, mutant=None, endpoint=None, on_listen=None):
    """Run a reference SUT until interrupted. ``endpoint`` is an
    :class:`~ifspec.harness.Endpoint`; stdio endpoints use this process's
    own standard streams."""
    if endpoint is None or endpoint.transport == "stdio":
        serve_stdio(model, mutant)
        return
    with SutServer(model, mutant, endpoint.host, endpoint.port) as server:
        if on_listen:
            on_listen(server.server_address)
        server.serve_forever()


# --- fixtures -----------------------------------------------------------------

def _fixture_text(name):
    return resources.files("ifspec").joinpath("fixtures", name).read_text(encoding="utf-8")


def alarm_model() -> InterfaceModel:
    return parse(_fixture_text("alarm.ifm"))


CRANES = (1, 2, 3)


def _terminal_state(pos, docked, loaded, holds):
    return (f"At{pos}{'Docked' if docked else 'Free'}{'Full' if loaded else 'Empty'}"
            f"_H{''.join('1' if h else '0' for h in holds)}")


def terminal_model() -> InterfaceModel:
    """Container-terminal controller interface.

    Three cranes and one truck. Crane 1 serves the yard, cranes 2 and 3 the
    vessel. Every crane can ``load`` a container from its own side,
    ``release`` it onto the truck, ``lift`` one off the truck and
    ``unload`` it to its own side. A crane may only release onto or lift
    from the truck when the truck is docked beneath it; the truck can only
    move while undocked and carries at most one container.
    """
    stimuli = ["move_to1", "move_to2", "move_to3", "dock", "undock"]
    for k in CRANES:
        stimuli += [f"crane{k}_load", f"crane{k}_release", f"crane{k}_lift", f"crane{k}_unload"]
    alphabet = [EventDecl(e, "stimulus") for e in stimuli]
    alphabet += [EventDecl(n, "notification") for n in ("NI_TruckLoaded", "NI_TruckEmpty", "NI_Stored")]
    alphabet += [EventDecl(r, "reply") for r in ("ok", "docked", "transferred")]

    def behaviour(pos, docked, loaded, holds, e):
        holds = list(holds)
        if e.startswith("move_to"):
            k = int(e[-1])
            if docked or pos == k:
                return None
            return (), "ok", (k, docked, loaded, holds)
        if e == "dock":
            return None if docked else ((), "docked", (pos, True, loaded, holds))
        if e == "undock":
            return ((), "ok", (pos, False, loaded, holds)) if docked else None
        k, op = int(e[5]), e[7:]
        under = docked and pos == k
        if op == "load":
            if holds[k - 1]:
                return None
            holds[k - 1] = True
            return (), "ok", (pos, docked, loaded, holds)
        if op == "release":
            if not holds[k - 1] or not under or loaded:
                return None
            holds[k - 1] = False
            return ("NI_TruckLoaded",), "transferred", (pos, docked, True, holds)
        if op == "lift":
            if holds[k - 1] or not under or not loaded:
                return None
            holds[k - 1] = True
            return ("NI_TruckEmpty",), "transferred", (pos, docked, False, holds)
        if not holds[k - 1]:
            return None
        holds[k - 1] = False
        return ("NI_Stored",), "ok", (pos, docked, loaded, holds)

    states = []
    rules = []
    for pos, docked, loaded, *holds in itertools.product(
            CRANES, (False, True), (False, True), *[(False, True)] * 3):
        name = _terminal_state(pos, docked, loaded, holds)
        states.append(name)
        for e in stimuli:
            b = behaviour(pos, docked, loaded, holds, e)
            if b is None:
                rules.append(RuleCase(name, e, ILLEGAL))
            else:
                notify, reply, nxt = b
                rules.append(RuleCase(name, e, Legal(notify, reply, _terminal_state(*nxt))))
    initial = _terminal_state(1, False, False, (False,) * 3)
    return InterfaceModel("Terminal", tuple(alphabet), tuple(states), initial, tuple(rules))


def truck_model() -> InterfaceModel:
    """The truck's own interface: position, docking and a drive mode.

    Shares ``move_to*``, ``dock`` and ``undock`` with the terminal model.
    """
    moves = ["move_to1", "move_to2", "move_to3"]
    alphabet = [EventDecl(e, "stimulus") for e in moves + ["dock", "undock", "switch_mode"]]
    alphabet += [EventDecl("NI_Arrived", "notification")]
    alphabet += [EventDecl(r, "reply") for r in ("ok", "docked")]

    def name(pos, docked, auto):
        return f"T{pos}{'Docked' if docked else 'Free'}{'Auto' if auto else 'Manual'}"

    states, rules = [], []
    for pos, docked, auto in itertools.product(CRANES, (False, True), (True, False)):
        s = name(pos, docked, auto)
        states.append(s)
        for k, e in enumerate(moves, start=1):
            if docked or pos == k:
                rules.append(RuleCase(s, e, ILLEGAL))
            else:
                rules.append(RuleCase(s, e, Legal(("NI_Arrived",), "ok", name(k, docked, auto))))
        rules.append(RuleCase(s, "dock", ILLEGAL if docked else
                              Legal((), "docked", name(pos, True, auto))))
        rules.append(RuleCase(s, "undock", Legal((), "ok", name(pos, False, auto))
                              if docked else ILLEGAL))
        rules.append(RuleCase(s, "switch_mode", ILLEGAL if docked else
                              Legal((), "ok", name(pos, docked, not auto))))
    return InterfaceModel("Truck", tuple(alphabet), tuple(states), name(1, False, True), tuple(rules))


FIXTURES = {
    "alarm": alarm_model,
    "terminal": terminal_model,
    "truck": truck_model,
}

_T0 = "At1FreeEmpty_H000"

MUTANTS = {
    "alarm": (
        MutantSpec("M1", ("Activated", "triggered"), "missing-notify"),
        MutantSpec("M2", ("Deactivated", "activate"), "wrong-reply", "error"),
        MutantSpec("M3", ("Deactivated", "activate"), "wrong-next-state", "Deactivated"),
        MutantSpec("M4", ("Activated", "deactivate"), "wrong-next-state", "Activated"),
        MutantSpec("M5", ("Triggered", "deactivate"), "wrong-reply", "error"),
    ),
    "terminal": (
        MutantSpec("M1", ("At2DockedEmpty_H010", "crane2_release"), "missing-notify"),
        MutantSpec("M2", (_T0, "move_to2"), "wrong-reply", "docked"),
        MutantSpec("M3", ("At2DockedEmpty_H010", "crane2_release"), "wrong-next-state",
                   "At2DockedEmpty_H000"),
        MutantSpec("M4", (_T0, "dock"), "wrong-next-state", _T0),
        MutantSpec("M5", ("At1FreeEmpty_H100", "crane1_unload"), "wrong-reply", "transferred"),
    ),
}


def get_mutant(fixture: str, mutant_id: str) -> MutantSpec:
    for m in MUTANTS.get(fixture, ()):
        if m.id == mutant_id:
            return m
    raise KeyError(f"no mutant {mutant_id} for {fixture}")
