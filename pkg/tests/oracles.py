"""Independent oracles and random-model generators shared by the tests.

Nothing here calls into ifspec's exploration, generation or composition
code; the oracles walk the raw rule lists directly so they can be used to
check those modules.
"""

import itertools
import random
from collections import deque

import networkx as nx
from hypothesis import strategies as st

from ifspec.model import ILLEGAL, EventDecl, InterfaceModel, Legal, Param, RuleCase


# one summary line per acceptance criterion, printed at the end of the run
ACCEPTANCE = {}


# --- small hand-made models ---------------------------------------------------

def line_model(n=3, name="Line"):
    """a -> b -> c ... with a single stimulus ``go`` and no way back."""
    states = [chr(ord("a") + i) for i in range(n)]
    rules = []
    for i, s in enumerate(states):
        out = Legal((), "ok", states[i + 1]) if i + 1 < n else ILLEGAL
        rules.append(RuleCase(s, "go", out))
    alphabet = [EventDecl("go", "stimulus"), EventDecl("ok", "reply")]
    return InterfaceModel(name, alphabet, states, states[0], rules)


def self_loop_model(name="Loop"):
    alphabet = [EventDecl("tick", "stimulus"), EventDecl("ok", "reply")]
    return InterfaceModel(name, alphabet, ["S"], "S", [RuleCase("S", "tick", Legal((), "ok", "S"))])


def all_illegal_model(name="Dead"):
    alphabet = [EventDecl(e, "stimulus") for e in ("a", "b", "c")] + [EventDecl("ok", "reply")]
    return InterfaceModel(name, alphabet, ["S"], "S",
                          [RuleCase("S", e, ILLEGAL) for e in ("a", "b", "c")])


# --- random models ------------------------------------------------------------

def _random_rules(rng, states, stimuli, notes, replies_for):
    rules = []
    for s in states:
        for e in stimuli:
            if rng.random() < 0.35:
                rules.append(RuleCase(s, e, ILLEGAL))
            else:
                k = rng.randint(0, min(2, len(notes)))
                emitted = tuple(rng.choice(notes) for _ in range(k))
                rules.append(RuleCase(s, e, Legal(emitted, rng.choice(replies_for(e)),
                                                  rng.choice(states))))
    return rules


def random_model(rng, max_states=8, max_stimuli=6, params=False, name="M", prefix=""):
    """A complete, deterministic model with random legality and targets.

    State names are ``<prefix>S<i>``; event names carry the prefix too so
    two models built with different prefixes have disjoint alphabets.
    """
    n_states = rng.randint(1, max_states)
    n_stim = rng.randint(1, max_stimuli)
    states = [f"{prefix}S{i}" for i in range(n_states)]
    stimuli = [f"{prefix}e{i}" for i in range(n_stim)]
    notes = [f"{prefix}N{i}" for i in range(rng.randint(0, 3))]
    replies = [f"{prefix}r{i}" for i in range(rng.randint(1, 3))]
    alphabet = []
    for e in stimuli:
        ps = ()
        if params and rng.random() < 0.3:
            ps = tuple(Param(f"p{j}", rng.choice(["int", "string"]))
                       for j in range(rng.randint(1, 2)))
        alphabet.append(EventDecl(e, "stimulus", ps))
    alphabet += [EventDecl(n, "notification") for n in notes]
    alphabet += [EventDecl(r, "reply") for r in replies]
    rules = _random_rules(rng, states, stimuli, notes, lambda e: replies)
    return InterfaceModel(name, alphabet, states, states[0], rules)


def random_pair(rng, max_states=5):
    """Two random models whose stimuli overlap at random.

    Shared stimuli always reply ``ok`` so the pair composes without a
    reply conflict; each model also has a private reply.
    """
    pool = ["go", "stop", "ping", "load"]
    picks = []
    for _ in range(2):
        picks.append([e for e in pool if rng.random() < 0.6] or [rng.choice(pool)])
    shared = set(picks[0]) & set(picks[1])
    result = []
    for tag, stimuli in zip("AB", picks):
        states = [f"{tag}{i}" for i in range(rng.randint(1, max_states))]
        notes = [f"N{tag}{i}" for i in range(rng.randint(0, 2))]
        replies = ["ok", f"r{tag}"]
        alphabet = [EventDecl(e, "stimulus") for e in stimuli]
        alphabet += [EventDecl(n, "notification") for n in notes]
        alphabet += [EventDecl(r, "reply") for r in replies]
        rules = _random_rules(rng, states, stimuli, notes,
                              lambda e: ["ok"] if e in shared else replies)
        result.append(InterfaceModel(tag, alphabet, states, states[0], rules))
    return result


@st.composite
def models(draw, max_states=6, max_stimuli=4, params=True):
    """Hypothesis strategy wrapping :func:`random_model`."""
    seed = draw(st.integers(0, 2**32 - 1))
    return random_model(random.Random(seed), max_states, max_stimuli, params)


# --- table oracles ------------------------------------------------------------

def cells(model):
    """Brute-force ``{(state, stimulus): outcome}`` from the raw rule list."""
    return {(r.state, r.stimulus): r.outcome for r in model.rules}


def reachable_states(model):
    table = cells(model)
    seen = {model.initial}
    frontier = [model.initial]
    while frontier:
        s = frontier.pop()
        for e in model.stimuli:
            out = table[s, e]
            if isinstance(out, Legal) and out.target not in seen:
                seen.add(out.target)
                frontier.append(out.target)
    return seen


def legal_edges(model):
    """Every legal (state, stimulus, notifications, reply, target) reachable
    from the initial state."""
    table = cells(model)
    reach = reachable_states(model)
    return {(s, e, out.notifications, out.reply, out.target)
            for (s, e), out in table.items()
            if s in reach and isinstance(out, Legal)}


def walk(model, case):
    """Replay a TestCase on the raw table; return the edges traversed.

    Raises AssertionError on an illegal step or a mismatched expectation.
    """
    table = cells(model)
    state = model.initial
    traversed = []
    for i, step in enumerate(case.steps, 1):
        out = table[state, step.stimulus.name]
        assert isinstance(out, Legal), f"case {case.id} step {i}: {step.stimulus} illegal in {state}"
        assert step.expect_notify == out.notifications, f"case {case.id} step {i}: notify"
        assert step.expect_reply == out.reply, f"case {case.id} step {i}: reply"
        traversed.append((state, step.stimulus.name, out.notifications, out.reply, out.target))
        state = out.target
    return traversed


def edge_coverage(model, suite):
    covered = set()
    for case in suite.cases:
        covered.update(walk(model, case))
    return covered, legal_edges(model)


def observations(model, trace):
    """Observed (notifications, reply) per stimulus of ``trace``; illegal
    cells answer ``("!",)`` and leave the state unchanged."""
    table = cells(model)
    state = model.initial
    seen = []
    for e in trace:
        out = table[state, e]
        if isinstance(out, Legal):
            seen.append((out.notifications, out.reply))
            state = out.target
        else:
            seen.append(("!",))
    return seen


def legal_traces(model, max_len):
    """All stimulus sequences of length 1..max_len that are legal in ``model``."""
    table = cells(model)
    level = [((), model.initial)]
    for _ in range(max_len):
        nxt = []
        for trace, s in level:
            for e in model.stimuli:
                out = table[s, e]
                if isinstance(out, Legal):
                    t = trace + (e,)
                    yield t
                    nxt.append((t, out.target))
        level = nxt


def first_divergence(base, mutant, max_len=6):
    for trace in legal_traces(base, max_len):
        if observations(base, trace) != observations(mutant, trace):
            return trace
    return None


# --- graph oracles ------------------------------------------------------------

def as_graph(model, ordered_notifications=True):
    """Reachable legal part of ``model`` as a labelled networkx multigraph."""
    g = nx.MultiDiGraph()
    reach = reachable_states(model)
    for s in reach:
        g.add_node(s, initial=(s == model.initial))
    for s, e, notes, reply, t in legal_edges(model):
        if not ordered_notifications:
            notes = tuple(sorted(notes))
        g.add_edge(s, t, label=(e, notes, reply))
    return g


def isomorphic(a, b, ordered_notifications=True):
    ga = as_graph(a, ordered_notifications)
    gb = as_graph(b, ordered_notifications)
    return nx.is_isomorphic(
        ga, gb,
        node_match=lambda x, y: x["initial"] == y["initial"],
        edge_match=lambda x, y: sorted(d["label"] for d in x.values())
        == sorted(d["label"] for d in y.values()))


def product_oracle(models):
    """Brute-force synchronous product over all joint states (not only the
    reachable ones): ``{(joint, stimulus): (notifications, reply, joint')}``
    for legal joint moves."""
    stimuli = []
    for m in models:
        stimuli += [e for e in m.stimuli if e not in stimuli]
    tables = [cells(m) for m in models]
    result = {}
    for joint in itertools.product(*(m.states for m in models)):
        for e in stimuli:
            notes, replies, nxt = (), set(), list(joint)
            for i, m in enumerate(models):
                if e not in m.stimuli:
                    continue
                out = tables[i][joint[i], e]
                if not isinstance(out, Legal):
                    break
                notes += out.notifications
                replies.add(out.reply)
                nxt[i] = out.target
            else:
                assert len(replies) == 1
                result[joint, e] = (notes, replies.pop(), tuple(nxt))
    return result


def reachable_joint(models):
    moves = product_oracle(models)
    start = tuple(m.initial for m in models)
    seen = {start}
    queue = deque([start])
    while queue:
        j = queue.popleft()
        for (src, _), (_, _, dst) in moves.items():
            if src == j and dst not in seen:
                seen.add(dst)
                queue.append(dst)
    return seen


def pair_coverage(rows, sizes):
    """Missing (col_i, val_i, col_j, val_j) pairs, by brute force."""
    missing = set()
    for i, j in itertools.combinations(range(len(sizes)), 2):
        for a in range(sizes[i]):
            for b in range(sizes[j]):
                if not any(r[i] == a and r[j] == b for r in rows):
                    missing.add((i, a, j, b))
    return missing
