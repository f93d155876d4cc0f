"""Synchronous product of interface models.

Stimuli shared by several components fire together and only if every owner
allows them; unshared stimuli interleave. The result is again a complete,
deterministic interface model over the reachable joint states.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .errors import CompositionError
from .model import ILLEGAL, Illegal, InterfaceModel, Legal, RuleCase, require_valid

SEPARATOR = "x"


@dataclass(frozen=True)
class CompositionPlan:
    components: tuple[InterfaceModel, ...]
    sync_set: tuple[str, ...]
    product_name: str


def _describe(model, decl):
    kw = {"stimulus": "in", "notification": "out", "reply": "reply"}[decl.kind]
    params = ", ".join(f"{p.name}:{p.sort}" for p in decl.params)
    return f"{model.name}: {kw} {decl.name}" + (f"({params})" if decl.params else "")


def alphabet_report(models, product_name: str | None = None) -> CompositionPlan:
    """Compute the synchronization set and check shared declarations agree."""
    models = tuple(models)
    if len(models) < 2:
        raise ValueError("composition needs at least two models")
    first = {}
    owners = {}
    for m in models:
        for decl in m.alphabet:
            seen = first.get(decl.name)
            if seen is None:
                first[decl.name] = (m, decl)
            elif seen[1].signature != decl.signature:
                raise CompositionError(
                    "signature-mismatch",
                    f"event {decl.name} declared differently: "
                    f"{_describe(*seen)} vs {_describe(m, decl)}",
                    event=decl.name)
            if decl.kind == "stimulus":
                owners.setdefault(decl.name, []).append(m.name)
    sync = tuple(e for e, who in owners.items() if len(who) >= 2)
    name = product_name or SEPARATOR.join(m.name for m in models)
    return CompositionPlan(models, sync, name)


def compose(plan: CompositionPlan) -> InterfaceModel:
    comps = plan.components
    for m in comps:
        require_valid(m, CompositionError)
    # re-check signatures in case the plan was built by hand
    plan = alphabet_report(comps, plan.product_name)

    alphabet = []
    names = set()
    for m in comps:
        for decl in m.alphabet:
            if decl.name not in names:
                names.add(decl.name)
                alphabet.append(decl)
    stimuli = [d.name for d in alphabet if d.kind == "stimulus"]
    # per stimulus: (component index, {state: outcome}) for every owner
    moves = []
    for e in stimuli:
        owned = []
        for i, m in enumerate(comps):
            if e in m.stimulus_set:
                owned.append((i, {s: m.table[s, e] for s in m.states}))
        moves.append((e, owned))

    start = tuple(m.initial for m in comps)
    names_of = {start: SEPARATOR.join(start)}
    order = [start]
    queue = deque(order)
    rules = []
    append = rules.append
    while queue:
        joint = queue.popleft()
        pname = names_of[joint]
        for e, owned in moves:
            notifications = ()
            reply = None
            nxt = list(joint)
            for i, cells in owned:
                out = cells[joint[i]]
                if out is ILLEGAL or out.__class__ is Illegal:
                    break
                if out.notifications:
                    notifications += out.notifications
                if reply is not None and reply != out.reply:
                    raise CompositionError(
                        "reply-conflict",
                        f"stimulus {e} replies {sorted({reply, out.reply})} in joint state {pname}",
                        stimulus=e, state=joint)
                reply = out.reply
                nxt[i] = out.target
            else:
                nxt = tuple(nxt)
                tname = names_of.get(nxt)
                if tname is None:
                    tname = names_of[nxt] = SEPARATOR.join(nxt)
                    order.append(nxt)
                    queue.append(nxt)
                append(RuleCase(pname, e, Legal(notifications, reply, tname)))
                continue
            append(RuleCase(pname, e, ILLEGAL))

    states = [names_of[j] for j in order]
    if len(set(states)) != len(states) or names.intersection(states):
        raise CompositionError(
            "name-collision", "product state names collide; rename component states")
    return InterfaceModel(plan.product_name, tuple(alphabet), tuple(states),
                          SEPARATOR.join(start), tuple(rules))


def unit_model(name: str = "Unit", state: str = "U") -> InterfaceModel:
    """Neutral element of composition: one state and no events."""
    return InterfaceModel(name, (), (state,), state, ())
