"""Suite files (``.suite``) and generation configs (``.cfg``).

Suite layout::

    suite AlarmSystem strategy=shorttests seed=0
    test 1
      step CALL activate EXPECT REPLY ok
      step CALL triggered EXPECT NOTIFY NI_Triggered REPLY ok
    end

Blank lines and lines starting with ``#`` are ignored.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field

from .errors import ConfigError
from .testgen import CARTESIAN, PAIRWISE, DomainSpec, TestCase, TestStep, TestSuite
from .wire import IDENT_RE, format_call, parse_call, parse_values

STRATEGIES = ("shorttests", "longtests", "random")

_HEADER_RE = re.compile(r"suite ([A-Za-z_][A-Za-z0-9_]*) strategy=(\S+) seed=(-?[0-9]+)")
_TEST_RE = re.compile(r"test ([0-9]+)")


def format_step(step: TestStep) -> str:
    parts = [f"step CALL {format_call(step.stimulus)} EXPECT"]
    parts.extend(f"NOTIFY {n}" for n in step.expect_notify)
    parts.append(f"REPLY {step.expect_reply}")
    return " ".join(parts)


def dump_suite(suite: TestSuite, comments=()) -> str:
    lines = [f"suite {suite.model} strategy={suite.strategy} seed={suite.seed}"]
    for case in suite.cases:
        lines.append(f"test {case.id}")
        lines.extend("  " + format_step(s) for s in case.steps)
        lines.append("end")
    lines.extend(f"# {c}" for c in comments)
    return "\n".join(lines) + "\n"


def _parse_step(text, lineno):
    def bad(msg):
        return ConfigError("suite-syntax", f"line {lineno}: {msg}", line=lineno)

    if not text.startswith("step CALL "):
        raise bad("expected 'step CALL'")
    try:
        stim, i = parse_call(text, len("step CALL "))
    except ValueError as exc:
        raise bad(str(exc)) from None
    words = text[i:].split(" ")
    if words[:2] != ["", "EXPECT"]:
        raise bad("expected 'EXPECT'")
    words = words[2:]
    notify = []
    while len(words) >= 2 and words[0] == "NOTIFY":
        notify.append(words[1])
        words = words[2:]
    if len(words) != 2 or words[0] != "REPLY":
        raise bad("expected 'REPLY <event>' at end of step")
    for name in notify + [words[1]]:
        if not IDENT_RE.fullmatch(name):
            raise bad(f"bad event name {name!r}")
    return TestStep(stim, tuple(notify), words[1])


def load_suite(text: str) -> TestSuite:
    header = None
    cases = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if header is None:
            m = _HEADER_RE.fullmatch(line)
            if not m:
                raise ConfigError("suite-syntax", f"line {lineno}: expected suite header", line=lineno)
            header = m.group(1), m.group(2), int(m.group(3))
        elif current is None:
            m = _TEST_RE.fullmatch(line)
            if not m:
                raise ConfigError("suite-syntax", f"line {lineno}: expected 'test <id>'", line=lineno)
            current = (int(m.group(1)), [])
        elif line == "end":
            if not current[1]:
                raise ConfigError("suite-syntax", f"line {lineno}: test {current[0]} has no steps",
                                  line=lineno)
            cases.append(TestCase(current[0], tuple(current[1])))
            current = None
        else:
            current[1].append(_parse_step(line, lineno))
    if header is None:
        raise ConfigError("suite-syntax", "missing suite header")
    if current is not None:
        raise ConfigError("suite-syntax", f"test {current[0]} is not terminated by 'end'")
    return TestSuite(header[0], header[1], header[2], tuple(cases))


def read_suite(path) -> TestSuite:
    with open(path, encoding="utf-8") as fh:
        return load_suite(fh.read())


@dataclass
class GenConfig:
    strategy: str = "shorttests"
    max_len: int | None = None
    n_cases: int = 10
    seed: int = 0
    max_states: int = 100_000
    domains: DomainSpec = field(default_factory=DomainSpec)
    must_include: str | None = None


def _int(section, key, value):
    try:
        return int(value)
    except ValueError:
        raise ConfigError("bad-config", f"[{section}] {key} must be an integer, got {value!r}") from None


def load_config(text: str) -> GenConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("bad-config", str(exc)) from None
    cfg = GenConfig()
    unknown = set(cp.sections()) - {"gen", "domains", "filter"}
    if unknown:
        raise ConfigError("bad-config", f"unknown section(s): {', '.join(sorted(unknown))}")
    if cp.has_section("gen"):
        gen = cp["gen"]
        for key, value in gen.items():
            if key == "strategy":
                if value not in STRATEGIES:
                    raise ConfigError("bad-config", f"unknown strategy {value!r}")
                cfg.strategy = value
            elif key in ("max_len", "n_cases", "seed", "max_states"):
                setattr(cfg, key, _int("gen", key, value))
            else:
                raise ConfigError("bad-config", f"unknown key [gen] {key}")
    if cp.has_section("domains"):
        assignments = {}
        combination = CARTESIAN
        for key, value in cp["domains"].items():
            if key == "combination":
                if value not in (CARTESIAN, PAIRWISE):
                    raise ConfigError("bad-config", f"unknown combination {value!r}")
                combination = value
                continue
            stim, dot, param = key.partition(".")
            if not dot or not IDENT_RE.fullmatch(stim) or not IDENT_RE.fullmatch(param):
                raise ConfigError("bad-config", f"domain key must be <stimulus>.<param>, got {key!r}")
            try:
                assignments[stim, param] = tuple(parse_values(value))
            except ValueError as exc:
                raise ConfigError("bad-config", f"[domains] {key}: {exc}") from None
        cfg.domains = DomainSpec(assignments, combination)
    if cp.has_section("filter"):
        for key, value in cp["filter"].items():
            if key != "must_include":
                raise ConfigError("bad-config", f"unknown key [filter] {key}")
            cfg.must_include = value.strip()
    return cfg


def read_config(path) -> GenConfig:
    with open(path, encoding="utf-8") as fh:
        return load_config(fh.read())
