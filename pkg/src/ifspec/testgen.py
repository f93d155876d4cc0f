"""Test-model construction, state-space exploration and suite generation.

The pipeline is::

    build_test_model(model) -> expand_domains(...) -> explore(...) -> gen_*(...)

A test model has one guarded action per (ground) stimulus. An action is
enabled exactly in the states where the source cell is legal, so generated
tests never contain illegal stimuli.
"""

from __future__ import annotations

import itertools
import random
import warnings
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, NamedTuple

from .errors import GenerationError
from .model import Illegal, InterfaceModel, Param, require_valid
from .wire import GroundStimulus

CARTESIAN = "cartesian"
PAIRWISE = "pairwise"


class EmptyResultWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class Action:
    """Guarded action: ``behavior`` maps each enabled state to
    ``(notifications, reply, next_state)``."""

    label: GroundStimulus
    params: tuple[Param, ...]
    behavior: Mapping[str, tuple[tuple[str, ...], str, str]]

    @property
    def stimulus(self):
        return self.label.name

    @property
    def ground(self):
        return len(self.label.args) == len(self.params)

    def enabled(self, state):
        return state in self.behavior

    def __eq__(self, other):
        if not isinstance(other, Action):
            return NotImplemented
        return (self.label, self.params, dict(self.behavior)) == \
            (other.label, other.params, dict(other.behavior))


@dataclass(frozen=True)
class TestModel:
    __test__ = False

    source: str
    states: tuple[str, ...]
    initial: str
    actions: tuple[Action, ...]

    def action(self, label):
        for a in self.actions:
            if a.label == label:
                return a
        raise KeyError(label)


def build_test_model(model: InterfaceModel) -> TestModel:
    """One action per stimulus; disabled wherever the cell is illegal."""
    require_valid(model, GenerationError)
    behaviors = {e: {} for e in model.stimuli}
    for rule in model.rules:
        out = rule.outcome
        if not isinstance(out, Illegal):
            behaviors[rule.stimulus][rule.state] = (out.notifications, out.reply, out.target)
    actions = tuple(
        Action(GroundStimulus(e), model.events[e].params, behaviors[e])
        for e in model.stimuli)
    return TestModel(model.name, model.states, model.initial, actions)


@dataclass(frozen=True)
class DomainSpec:
    assignments: Mapping[tuple[str, str], tuple] = field(default_factory=dict)
    combination: str = CARTESIAN


def pairwise(domains):
    """Rows of indices covering every value pair of every two columns.

    IPO-style: start from the product of the first two columns, then grow
    one column at a time horizontally (best new value per row) and
    vertically (extra rows for pairs still missing). Ties prefer the value
    at ``sum(row) mod size``, which lands on a Latin square when all
    columns have equal size.
    """
    sizes = [len(d) for d in domains]
    if not sizes:
        return [()]
    if len(sizes) == 1:
        return [(v,) for v in range(sizes[0])]
    rows = [list(r) for r in itertools.product(range(sizes[0]), range(sizes[1]))]
    for k in range(2, len(sizes)):
        m = sizes[k]
        uncovered = {(j, a, b) for j in range(k) for a in range(sizes[j]) for b in range(m)}
        for row in rows:
            pref = sum(x for x in row if x is not None) % m
            best, best_gain = 0, -1
            for off in range(m):
                v = (pref + off) % m
                gain = sum((j, row[j], v) in uncovered for j in range(k) if row[j] is not None)
                if gain > best_gain:
                    best, best_gain = v, gain
            row.append(best)
            for j in range(k):
                uncovered.discard((j, row[j], best))
        for j, a, b in sorted(uncovered):
            for row in rows:
                if row[k] == b and row[j] is None:
                    row[j] = a
                    break
            else:
                row = [None] * (k + 1)
                row[j], row[k] = a, b
                rows.append(row)
    return [tuple(0 if x is None else x for x in row) for row in rows]


def _coerce(value, sort, stimulus, param):
    if sort == "int":
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        try:
            return int(value)
        except (TypeError, ValueError):
            raise GenerationError(
                "bad-domain-value", f"{stimulus}.{param}: {value!r} is not an int") from None
    return str(value)


def expand_domains(tm: TestModel, d: DomainSpec) -> TestModel:
    """Replace each parameterized action by ground actions over ``d``."""
    if d.combination not in (CARTESIAN, PAIRWISE):
        raise GenerationError("bad-combination", f"unknown combination {d.combination!r}")
    actions = []
    for act in tm.actions:
        if not act.params or act.ground:
            actions.append(act)
            continue
        columns = []
        for p in act.params:
            key = (act.stimulus, p.name)
            if key not in d.assignments:
                raise GenerationError("missing-domain", f"no values for {act.stimulus}.{p.name}",
                                      stimulus=act.stimulus, param=p.name)
            values = [_coerce(v, p.sort, act.stimulus, p.name) for v in d.assignments[key]]
            if not values:
                raise GenerationError("empty-domain", f"empty value list for {act.stimulus}.{p.name}",
                                      stimulus=act.stimulus, param=p.name)
            columns.append(values)
        if d.combination == CARTESIAN:
            combos = itertools.product(*columns)
        else:
            combos = (tuple(col[i] for col, i in zip(columns, row)) for row in pairwise(columns))
        for args in combos:
            actions.append(Action(GroundStimulus(act.stimulus, args), act.params, act.behavior))
    return TestModel(tm.source, tm.states, tm.initial, tuple(actions))


class Edge(NamedTuple):
    source: str
    label: GroundStimulus
    notify: tuple[str, ...]
    reply: str
    target: str


class StateGraph:
    """Explored transition graph. Nodes and edges are in BFS insertion order.

    Edges are stored column-wise (``src``, ``dst`` and ``act``, the index of
    the action in ``actions``); ``edges`` materializes them as ``Edge`` tuples
    on first use.
    """

    def __init__(self, model, initial, nodes, actions, succ, src, dst, act, index=None):
        self.model = model
        self.initial = initial
        self.nodes = nodes
        self.actions = actions  # list of (label, behavior)
        self.succ = succ  # node index -> list of edge indices
        self.src = src  # edge index -> node index
        self.dst = dst
        self.act = act
        self.index = index if index is not None else {n: i for i, n in enumerate(nodes)}
        self._edges = None
        self._by_label = None

    def __repr__(self):
        return f"<StateGraph {len(self.nodes)} nodes, {len(self.src)} edges>"

    def __len__(self):
        return len(self.src)

    def edge(self, k) -> Edge:
        node = self.nodes[self.src[k]]
        label, behavior = self.actions[self.act[k]]
        notify, reply, nxt = behavior[node]
        return Edge(node, label, notify, reply, nxt)

    @property
    def edges(self) -> list[Edge]:
        if self._edges is None:
            self._edges = [self.edge(k) for k in range(len(self.src))]
        return self._edges

    def edge_from(self, node, label):
        """Index of the edge leaving ``node`` labelled ``label``, or None."""
        i = self.index.get(node)
        if i is None:
            return None
        if self._by_label is None:
            self._by_label = {label: a for a, (label, _) in enumerate(self.actions)}
        a = self._by_label.get(label)
        if a is None:
            return None
        for k in self.succ[i]:
            if self.act[k] == a:
                return k
        return None


def explore(tm: TestModel, max_states: int = 100_000) -> StateGraph:
    if max_states < 1:
        raise ValueError("max_states must be >= 1")
    for act in tm.actions:
        if not act.ground:
            raise GenerationError("missing-domain",
                                  f"action {act.stimulus} has parameters without values",
                                  stimulus=act.stimulus)
    nodes = [tm.initial]
    index = {tm.initial: 0}
    succ, src, dst, acts = [], [], [], []
    actions = [(a.label, a.behavior) for a in tm.actions]
    numbered = list(enumerate(a.behavior for a in tm.actions))
    i = 0
    while i < len(nodes):
        s = nodes[i]
        out = []
        for a, behavior in numbered:
            b = behavior.get(s)
            if b is None:
                continue
            nxt = b[2]
            j = index.get(nxt)
            if j is None:
                if len(nodes) >= max_states:
                    raise GenerationError(
                        "state-budget-exceeded",
                        f"more than {max_states} reachable states", max_states=max_states)
                j = index[nxt] = len(nodes)
                nodes.append(nxt)
            out.append(len(src))
            src.append(i)
            dst.append(j)
            acts.append(a)
        succ.append(out)
        i += 1
    return StateGraph(tm.source, tm.initial, nodes, actions, succ, src, dst, acts, index)


@dataclass(frozen=True)
class TestStep:
    __test__ = False

    stimulus: GroundStimulus
    expect_notify: tuple[str, ...]
    expect_reply: str


@dataclass(frozen=True)
class TestCase:
    __test__ = False

    id: int
    steps: tuple[TestStep, ...]

    def __len__(self):
        return len(self.steps)


@dataclass(frozen=True)
class TestSuite:
    __test__ = False

    model: str
    strategy: str
    seed: int
    cases: tuple[TestCase, ...]

    def __len__(self):
        return len(self.cases)


def _suite(g, strategy, seed, paths):
    # steps are shared between edges with the same action and outputs
    cache = {}
    nodes, src, act, actions = g.nodes, g.src, g.act, g.actions

    def step_of(k):
        label, behavior = actions[act[k]]
        notify, reply, _ = behavior[nodes[src[k]]]
        key = (act[k], notify, reply)
        st = cache.get(key)
        if st is None:
            st = cache[key] = TestStep(label, notify, reply)
        return st

    cases = tuple(TestCase(i, tuple(map(step_of, path)))
                  for i, path in enumerate(paths, start=1))
    return TestSuite(g.model, strategy, seed, cases)


def _bfs_tree(g, start=0):
    n = len(g.nodes)
    dist = [-1] * n
    parent = [-1] * n
    dist[start] = 0
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for k in g.succ[u]:
            v = g.dst[k]
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                parent[v] = k
                queue.append(v)
    return dist, parent


def _describe(g, k):
    e = g.edge(k)
    return f"{e.source} -{e.label}-> {e.target}"


def gen_shorttests(g: StateGraph, max_len: int, seed: int = 0) -> TestSuite:
    """Many short cases: shortest path to the nearest uncovered edge, then
    greedy extension through uncovered edges up to ``max_len`` steps.

    The extension prefers an uncovered edge whose target still has uncovered
    edges of its own, so a case does not walk into an exhausted state early.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    dist, parent = _bfs_tree(g)
    src, dst, succ = g.src, g.dst, g.succ
    n_edges = len(src)
    for k in range(n_edges):
        if dist[src[k]] + 1 > max_len:
            raise GenerationError(
                "unsatisfiable",
                f"edge {_describe(g, k)} needs {dist[src[k]] + 1} steps, max_len is {max_len}",
                edge=g.edge(k))
    order = sorted(range(n_edges), key=lambda k: dist[src[k]])
    covered = bytearray(n_edges)
    left = [len(out) for out in succ]  # uncovered out-edges per node

    def cover(e):
        if not covered[e]:
            covered[e] = 1
            left[src[e]] -= 1

    paths = []
    for k in order:
        if covered[k]:
            continue
        path = []
        v = src[k]
        while v != 0:
            path.append(parent[v])
            v = src[parent[v]]
        path.reverse()
        path.append(k)
        for e in path:
            cover(e)
        v = dst[k]
        while len(path) < max_len and left[v]:
            pick = -1
            for e in succ[v]:
                if not covered[e]:
                    if pick < 0:
                        pick = e
                    w = dst[e]
                    if left[w] > (1 if w == v else 0):
                        pick = e
                        break
            cover(pick)
            path.append(pick)
            v = dst[pick]
        paths.append(path)
    return _suite(g, "shorttests", seed, paths)


def _nearest_uncovered(g, start, covered):
    """Edge path from ``start`` ending in the closest uncovered edge, or None."""
    seen = {start}
    parent = {}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for k in g.succ[u]:
            if not covered[k]:
                path = [k]
                while u != start:
                    e = parent[u]
                    path.append(e)
                    u = g.src[e]
                path.reverse()
                return path
        for k in g.succ[u]:
            v = g.dst[k]
            if v not in seen:
                seen.add(v)
                parent[v] = k
                queue.append(v)
    return None


def gen_longtests(g: StateGraph, max_len: int, seed: int = 0) -> TestSuite:
    """Few long cases forming a covering walk.

    The walk keeps appending the shortest path to the nearest uncovered
    edge. A new case (from the initial state) starts only when nothing
    uncovered is reachable from the current state or the next hop would
    exceed ``max_len``.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    covered = bytearray(len(g.src))
    remaining = len(g.src)
    paths = []
    current, v = [], 0
    while remaining:
        hop = _nearest_uncovered(g, v, covered)
        if hop is None or len(current) + len(hop) > max_len:
            if not current:
                first = covered.index(0)
                raise GenerationError(
                    "unsatisfiable",
                    f"cannot reach edge {_describe(g, first)} within max_len={max_len}",
                    edge=g.edge(first))
            paths.append(current)
            current, v = [], 0
            continue
        for k in hop:
            if not covered[k]:
                covered[k] = 1
                remaining -= 1
        current.extend(hop)
        v = g.dst[hop[-1]]
    if current:
        paths.append(current)
    return _suite(g, "longtests", seed, paths)


def gen_random(g: StateGraph, n_cases: int, length: int, seed: int) -> TestSuite:
    """``n_cases`` uniform random walks of ``length`` steps (shorter at dead ends)."""
    if n_cases < 1 or length < 1:
        raise ValueError("n_cases and length must be >= 1")
    rng = random.Random(seed)
    paths = []
    if g.succ[0]:
        for _ in range(n_cases):
            path, v = [], 0
            while len(path) < length and g.succ[v]:
                out = g.succ[v]
                k = out[rng.randrange(len(out))]
                path.append(k)
                v = g.dst[k]
            paths.append(path)
    return _suite(g, "random", seed, paths)


def filter_suite(s: TestSuite, must_include: str) -> TestSuite:
    """Keep the cases that call ``must_include`` at least once."""
    kept = tuple(c for c in s.cases if any(st.stimulus.name == must_include for st in c.steps))
    if not kept and s.cases:
        warnings.warn(f"empty-result: no case exercises {must_include!r}", EmptyResultWarning,
                      stacklevel=2)
    elif not kept:
        warnings.warn("empty-result: suite is empty", EmptyResultWarning, stacklevel=2)
    return TestSuite(s.model, s.strategy, s.seed, kept)


@dataclass(frozen=True)
class CoverageReport:
    transitions_total: int
    transitions_covered: int
    uncovered: tuple[Edge, ...]

    @property
    def percent(self) -> Fraction:
        if self.transitions_total == 0:
            return Fraction(1)
        return Fraction(self.transitions_covered, self.transitions_total)

    def __str__(self):
        return (f"coverage {self.transitions_covered}/{self.transitions_total} "
                f"({float(self.percent) * 100:.1f}%)")


def replay(s: TestSuite, g: StateGraph):
    """Yield the edge indices traversed by each case; raise on illegal replay."""
    for case in s.cases:
        node = g.initial
        path = []
        for i, step in enumerate(case.steps, start=1):
            k = g.edge_from(node, step.stimulus)
            e = None if k is None else g.edge(k)
            if e is None or e.notify != step.expect_notify or e.reply != step.expect_reply:
                raise GenerationError(
                    "illegal-replay",
                    f"case {case.id} step {i}: {step.stimulus} has no matching edge from {node}",
                    case=case.id, step=i)
            path.append(k)
            node = e.target
        yield case, path


def coverage(s: TestSuite, g: StateGraph) -> CoverageReport:
    covered = bytearray(len(g.src))
    for _, path in replay(s, g):
        for k in path:
            covered[k] = 1
    uncovered = tuple(g.edge(k) for k in range(len(covered)) if not covered[k])
    return CoverageReport(len(covered), len(covered) - len(uncovered), uncovered)
