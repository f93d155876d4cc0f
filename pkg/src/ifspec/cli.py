"""``ifspec`` command line.

Exit status: 0 success, 1 verification or test failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings

from .compose import alphabet_report, compose
from .errors import CompositionError, ConfigError, GenerationError, HarnessError
from .harness import Endpoint, format_report, run_suite
from .model import validate
from .refsuts import FIXTURES, MUTANTS, get_mutant, serve
from .suites import dump_suite, read_config, read_suite
from .testgen import (
    build_test_model, coverage, expand_domains, explore, filter_suite, gen_longtests, gen_random,
    gen_shorttests,
)
from .text import ParseFailure, parse_file, render_dot, serialize

OK, FAILED, USAGE = 0, 1, 2


class _InputError(Exception):
    pass


def _err(msg):
    print(f"ifspec: {msg}", file=sys.stderr)


def _load(path):
    """Read and parse a model file; ``builtin:<name>`` selects a bundled fixture."""
    if path.startswith("builtin:"):
        name = path[len("builtin:"):]
        if name not in FIXTURES:
            raise _InputError(f"unknown builtin model {name!r}")
        return FIXTURES[name]()
    try:
        return parse_file(path)
    except OSError as exc:
        raise _InputError(f"{path}: {exc.strerror or exc}") from None
    except ParseFailure as exc:
        raise _InputError("\n".join(f"{path}:{e}" for e in exc.errors)) from None


def _load_valid(path):
    model = _load(path)
    report = validate(model)
    if not report.ok:
        raise _InputError("\n".join(f"{path}: {f}" for f in report.findings))
    return model


def _out(args, text):
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_validate(args):
    model = _load(args.path)
    report = validate(model)
    for f in report.findings:
        print(f)
    if not args.quiet:
        print(f"{args.path}: {'ok' if report.ok else 'invalid'} "
              f"({len(report.errors)} errors, {len(report.warnings)} warnings)")
    return OK if report.ok else FAILED


def cmd_dot(args):
    _out(args, render_dot(_load_valid(args.path), show_illegal=args.illegal))
    return OK


def cmd_gen(args):
    model = _load_valid(args.model)
    try:
        cfg = read_config(args.config)
    except OSError as exc:
        raise _InputError(f"{args.config}: {exc.strerror or exc}") from None
    except ConfigError as exc:
        raise _InputError(f"{args.config}: {exc}") from None
    seed = args.seed if args.seed is not None else cfg.seed
    try:
        tm = expand_domains(build_test_model(model), cfg.domains)
    except GenerationError as exc:
        raise _InputError(str(exc)) from None
    try:
        g = explore(tm, cfg.max_states)
        if cfg.strategy == "shorttests":
            suite = gen_shorttests(g, cfg.max_len or 32, seed)
        elif cfg.strategy == "longtests":
            suite = gen_longtests(g, cfg.max_len or max(1, len(g) * len(g.nodes)), seed)
        else:
            suite = gen_random(g, cfg.n_cases, cfg.max_len or 32, seed)
    except GenerationError as exc:
        _err(str(exc))
        return FAILED
    if cfg.must_include:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            suite = filter_suite(suite, cfg.must_include)
        for w in caught:
            _err(f"warning: {w.message}")
    cov = coverage(suite, g)
    summary = f"{len(suite.cases)} cases, {sum(len(c) for c in suite.cases)} steps, {cov}"
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(dump_suite(suite, comments=[summary]))
    if not args.quiet:
        print(f"{args.out}: {summary}")
    return OK


def cmd_compose(args):
    models = [_load_valid(p) for p in args.models]
    if len(models) < 2:
        raise _InputError("compose needs at least two models")
    try:
        product = compose(alphabet_report(models, args.name))
    except CompositionError as exc:
        raise _InputError(str(exc)) from None
    _out(args, serialize(product))
    if not args.quiet and args.out:
        print(f"{args.out}: {len(product.states)} states, {len(product.stimuli)} stimuli")
    return OK


def cmd_run(args):
    try:
        suite = read_suite(args.suite)
    except OSError as exc:
        raise _InputError(f"{args.suite}: {exc.strerror or exc}") from None
    except ConfigError as exc:
        raise _InputError(f"{args.suite}: {exc.message}") from None
    try:
        endpoint = Endpoint.parse(args.endpoint, args.timeout_ms)
    except ValueError as exc:
        raise _InputError(str(exc)) from None
    graph = None
    if args.model:
        graph = explore(build_test_model(_load_valid(args.model)))
    try:
        report = run_suite(endpoint, suite, args.parallel, graph)
    except HarnessError as exc:
        raise _InputError(str(exc)) from None
    except GenerationError as exc:
        _err(str(exc))
        return FAILED
    text = format_report(report)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)
    if not args.quiet or not report.ok:
        sys.stdout.write(text if not args.report else text.split("\n\n")[0] + "\n")
    return OK if report.ok else FAILED


def cmd_sut(args):
    if args.model in FIXTURES:
        model = FIXTURES[args.model]()
    else:
        model = _load_valid(args.model)
    mutant = None
    if args.mutant:
        try:
            mutant = get_mutant(args.model, args.mutant)
        except KeyError as exc:
            raise _InputError(exc.args[0]) from None
    if args.stdio:
        serve(model, mutant, Endpoint.stdio(["-"]))
        return OK

    def announce(addr):
        if not args.quiet:
            print(f"listening on {addr[0]}:{addr[1]}", flush=True)

    try:
        serve(model, mutant, Endpoint.tcp(args.host, args.listen), on_listen=announce)
    except OSError as exc:
        raise _InputError(f"cannot listen on {args.host}:{args.listen}: {exc}") from None
    except KeyboardInterrupt:
        pass
    return OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS,
                        help="only print essential output")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override the generation seed")

    parser = argparse.ArgumentParser(prog="ifspec", parents=[common],
                                     description="Model-based testing from interface models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check completeness and consistency")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("dot", parents=[common], help="render the state diagram as DOT")
    p.add_argument("path")
    p.add_argument("--illegal", action="store_true", help="draw illegal cells to a sink node")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dot)

    p = sub.add_parser("gen", parents=[common], help="generate a test suite")
    p.add_argument("model")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("compose", parents=[common], help="compose models into a product model")
    p.add_argument("models", nargs="+")
    p.add_argument("--out")
    p.add_argument("--name", help="name of the product interface")
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("run", parents=[common], help="run a suite against a live SUT")
    p.add_argument("suite")
    p.add_argument("--endpoint", required=True, help="tcp://host:port or stdio:<command>")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--report")
    p.add_argument("--timeout-ms", type=int, default=5000)
    p.add_argument("--model", help="model file, to include transition coverage in the report")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sut", parents=[common], help="serve a reference SUT")
    p.add_argument("model", help=f"one of {', '.join(FIXTURES)} or a model file")
    p.add_argument("--mutant", help="seeded fault, e.g. "
                   + ", ".join(f"{k}:{'/'.join(m.id for m in v)}" for k, v in MUTANTS.items()))
    p.add_argument("--listen", type=int, default=7777, help="TCP port (0 picks a free one)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--stdio", action="store_true", help="speak the protocol on stdin/stdout")
    p.set_defaults(func=cmd_sut)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    args.quiet = getattr(args, "quiet", False)
    args.seed = getattr(args, "seed", None)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "parallel", 1) < 1:
        parser.error("--parallel must be >= 1")
    if getattr(args, "timeout_ms", 1) < 1:
        parser.error("--timeout-ms must be >= 1")
    try:
        return args.func(args)
    except _InputError as exc:
        _err(str(exc))
        return USAGE
    except BrokenPipeError:
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
