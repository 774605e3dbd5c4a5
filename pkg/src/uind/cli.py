"""Batch command line: ``uind <command> [options]``.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors (bad or
missing input files, or inputs the engine cannot score at the given budget).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import statistics
import sys
from pathlib import Path

from .enumeration import (
    CacheError,
    EnumBudget,
    EnumCache,
    algorithmic_complexity,
    algorithmic_probability,
    cache_load,
    cache_store,
)
from .environments import (
    EnvironmentSpecError,
    deterministic_bandit,
    load_suite,
    parse_spec_line,
    thermo8,
)
from .free_energy import ModelFormatError, homeostasis_episode, homeostatic_model, load_model
from .induction import (
    DatasetFormatError,
    InductionError,
    QADataset,
    find_operators,
    predict,
    sequence_predict,
    set_induction,
    two_part_length,
)
from .measure import AlwaysArm, EmptySuite, ReductionPolicy, UniformRandom, legg_hutter, operator_fitness
from .reduction import ACTION_FIRST, LAYOUTS, ChronologyFormatError, ReductionError, rl_episode
from .report import emit_report

SYNOPSIS = """\
usage: uind [--seed N] [--jobs N] [--deterministic] [--config FILE] <command> ...

commands:
  enum          algorithmic probability and complexity of --target
  induce        --mode operator|set|seq over --data FILE
  agent rl      reduction agent (or random baseline) on a bandit
  agent homeo   --policy active|random on the Thermo8 blanket world
  measure       --kind legg|opfit over --suite FILE
  cache         inspect|clear the enumeration cache ($UIND_CACHE_DIR)
"""

# flags that never change report contents
_NON_CONFIG = {"jobs", "deterministic", "config", "format", "output", "func", "command", "agent_cmd"}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _bits(value: str) -> str:
    value = "" if value in ("-", '""') else value
    if value.strip("01"):
        raise argparse.ArgumentTypeError(f"{value!r} is not a bit string")
    return value


def _positive(value: str) -> int:
    v = int(value)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{value} must be >= 1")
    return v


def _nonneg(value: str) -> int:
    v = int(value)
    if v < 0:
        raise argparse.ArgumentTypeError(f"{value} must be >= 0")
    return v


def _code_len(value: str) -> int:
    v = _positive(value)
    if v % 3:
        raise argparse.ArgumentTypeError(f"{value} is not a multiple of 3")
    return v


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="base seed (default 0)")
    p.add_argument("--jobs", type=_positive, default=argparse.SUPPRESS, help="worker processes (default 1)")
    p.add_argument("--deterministic", action="store_true", default=argparse.SUPPRESS,
                   help="omit the header timestamp")
    p.add_argument("--config", default=argparse.SUPPRESS, help="JSON file of option defaults")
    p.add_argument("--format", choices=("text", "json"), default=argparse.SUPPRESS)
    p.add_argument("--output", default=argparse.SUPPRESS, help="write the report here instead of stdout")
    return p


def build_parser() -> tuple[Parser, dict]:
    common = _common()
    parser = Parser(prog="uind", parents=[common], description="Budgeted universal induction engine.")
    sub = parser.add_subparsers(dest="command", parser_class=Parser)
    leaves = {}

    p = sub.add_parser("enum", parents=[common], help="probability and complexity of a target")
    p.add_argument("--target", type=_bits, required=True, help="bit string; '-' for empty")
    p.add_argument("--max-len", type=_code_len, default=15)
    p.add_argument("--steps", type=_positive, default=100)
    p.add_argument("--input", type=_bits, default="")
    p.add_argument("--no-cache", action="store_true")
    p.set_defaults(func=cmd_enum)
    leaves[("enum",)] = p

    p = sub.add_parser("induce", parents=[common], help="operator, set or sequence induction")
    p.add_argument("--mode", choices=("operator", "set", "seq"), required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--max-len", type=_code_len, default=15)
    p.add_argument("--steps", type=_positive, default=200)
    p.add_argument("--query", type=_bits, action="append", default=[], help="operator mode: question to predict")
    p.add_argument("--new", type=_bits, default=None, help="set mode: candidate member")
    p.add_argument("--top", type=_nonneg, default=0, help="operator rows to list (0 = all)")
    p.set_defaults(func=cmd_induce)
    leaves[("induce",)] = p

    p = sub.add_parser("agent", parents=[common], help="agent episodes")
    agent_sub = p.add_subparsers(dest="agent_cmd", parser_class=Parser)
    leaves[("agent",)] = p

    q = agent_sub.add_parser("rl", parents=[common], help="reduction agent on a bandit")
    q.add_argument("--env", default=deterministic_bandit().to_line(), help="environment line")
    q.add_argument("--policy", choices=("reduction", "random"), default="reduction")
    q.add_argument("--steps", type=_nonneg, default=10)
    q.add_argument("--episodes", type=_positive, default=1)
    q.add_argument("--max-len", type=_code_len, default=24)
    q.add_argument("--step-budget", type=_positive, default=500)
    q.add_argument("--horizon", type=_positive, default=3)
    q.add_argument("--w", type=_positive, default=4)
    q.add_argument("--layout", choices=LAYOUTS, default=ACTION_FIRST)
    q.add_argument("--chronology-out", default=None, help="write the last chronology here")
    q.set_defaults(func=cmd_agent_rl)
    leaves[("agent", "rl")] = q

    q = agent_sub.add_parser("homeo", parents=[common], help="homeostasis agent on Thermo8")
    q.add_argument("--policy", choices=("active", "random"), default="active")
    q.add_argument("--steps", type=_nonneg, default=10_000)
    q.add_argument("--episodes", type=_positive, default=1)
    q.add_argument("--model", default=None, help="model file replacing the built-in agent model")
    q.set_defaults(func=cmd_agent_homeo)
    leaves[("agent", "homeo")] = q

    p = sub.add_parser("measure", parents=[common], help="complexity-weighted measures")
    p.add_argument("--kind", choices=("legg", "opfit"), required=True)
    p.add_argument("--suite", required=True)
    p.add_argument("--agent", choices=("always0", "always1", "random", "reduction"), default="random")
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--horizon", type=_positive, default=200)
    p.add_argument("--episodes", type=_positive, default=100)
    p.add_argument("--n", type=_positive, default=8)
    p.add_argument("--seeds", type=_positive, default=5)
    p.add_argument("--max-len", type=_code_len, default=15)
    p.add_argument("--steps", type=_positive, default=200)
    p.add_argument("--w", type=_positive, default=4)
    p.set_defaults(func=cmd_measure)
    leaves[("measure",)] = p

    p = sub.add_parser("cache", parents=[common], help="inspect or clear the enumeration cache")
    p.add_argument("action", choices=("inspect", "clear"))
    p.set_defaults(func=cmd_cache)
    leaves[("cache",)] = p
    return parser, leaves


# -- helpers ------------------------------------------------------------------

def cache_path() -> Path:
    root = os.environ.get("UIND_CACHE_DIR") or os.path.join(os.path.expanduser("~"), ".cache", "uind")
    return Path(root) / "enum.cache"


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None


def _stderr(values) -> float:
    values = [float(v) for v in values]
    return statistics.stdev(values) / math.sqrt(len(values)) if len(values) > 1 else 0.0


def resolved_config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NON_CONFIG}


# -- commands -----------------------------------------------------------------

def cmd_enum(args) -> list[dict]:
    budget = EnumBudget(args.max_len, args.steps, max(len(args.target), 1))
    cache = None
    path = cache_path()
    if not args.no_cache:
        try:
            cache = cache_load(path) if path.exists() else EnumCache()
        except CacheError as exc:
            raise DataError(f"{path}: {exc}") from None
    prob = algorithmic_probability(args.target, budget, args.input, cache=cache, jobs=args.jobs)
    records = [{"record": "probability", "target": args.target or '""', "value": prob.value,
                "programs_counted": prob.programs_counted}]
    if not args.input:
        cx = algorithmic_complexity(args.target, budget, jobs=args.jobs)
        rec = {"record": "complexity", "h": cx.h, "h_star": cx.h_star}
        if cx.witness is not None:
            rec["witness"] = cx.witness.code
            rec["witness_ops"] = ",".join(cx.witness.mnemonics)
        records.append(rec)
    if cache is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        cache_store(cache, path)
    return records


def _load_lines(path: str) -> list[tuple[int, str]]:
    out = []
    for lineno, line in enumerate(_read(path).splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        value = "" if line == "-" else line
        if value.strip("01"):
            raise DataError(f"{path}:{lineno}: {line!r} is not a bit string")
        out.append((lineno, value))
    return out


def cmd_induce(args) -> list[dict]:
    budget = EnumBudget(args.max_len, args.steps)
    if args.mode == "operator":
        try:
            D = QADataset.from_text(_read(args.data), args.data)
        except DatasetFormatError as exc:
            raise DataError(str(exc)) from None
        ens = find_operators(D, budget, jobs=args.jobs)
        records = [{"record": "ensemble", "n": D.n, "k": D.k, "w": D.w, "operators": len(ens),
                    "programs_evaluated": ens.programs_evaluated, "Psi": ens.Psi}]
        ops = sorted(range(len(ens)), key=lambda j: (-ens.operators[j].psi, j))
        if args.top:
            ops = ops[:args.top]
        for j in ops:
            op = ens.operators[j]
            records.append({"record": "operator", "index": j, "code": op.program.code,
                            "code_len": op.code_len, "psi": op.psi,
                            "length_bits": two_part_length(op, D.pairs)})
        for q in args.query:
            raw, dist = predict(ens, q)
            records.append({"record": "predict", "question": q or '""', "raw": list(raw),
                            "normalized": list(dist)})
        return records
    lines = _load_lines(args.data)
    if args.mode == "set":
        if args.new is None:
            raise UsageError("induce --mode set needs --new BITS")
        value = set_induction([v for _, v in lines], args.new, budget, jobs=args.jobs)
        return [{"record": "set", "members": len(set(v for _, v in lines)), "new": args.new or '""',
                 "ratio": value}]
    if len(lines) != 1:
        where = lines[1][0] if lines else 1
        raise DataError(f"{args.data}:{where}: sequence mode expects exactly one bit string")
    x = lines[0][1]
    return [{"record": "sequence", "x": x or '""', "p_next_1": sequence_predict(x, budget, jobs=args.jobs)}]


def cmd_agent_rl(args) -> list[dict]:
    try:
        env = parse_spec_line(args.env)
    except ValueError as exc:
        raise UsageError(f"--env: {exc}") from None
    if env.kind != "mdp":
        raise UsageError("--env must name an mdp environment")
    budget = EnumBudget(args.max_len, args.step_budget)
    records, totals = [], []
    result = None
    for ep in range(args.episodes):
        result = rl_episode(env, args.steps, budget, args.horizon, args.seed, args.policy, args.w,
                            stream=ep, layout=args.layout, jobs=args.jobs)
        totals.append(result.total_reward)
        records.append({"record": "episode", "episode": ep, "total_reward": result.total_reward,
                        "actions": "".join(str(a) for _, _, a in result.chronology.steps) or '""'})
    records.append({"record": "summary", "env": env.short, "policy": args.policy,
                    "mean_reward": statistics.fmean(totals), "stderr": _stderr(totals)})
    if args.chronology_out and result is not None:
        Path(args.chronology_out).write_text(result.chronology.to_text())
    return records


def cmd_agent_homeo(args) -> list[dict]:
    world = thermo8()
    model = None
    if args.model:
        try:
            model = load_model(_read(args.model), args.model)
        except ModelFormatError as exc:
            raise DataError(str(exc)) from None
        if (model.n_sensory, model.n_actions) != (world.n_sensory, world.n_actions):
            raise DataError(f"{args.model}: model needs S={world.n_sensory} and A={world.n_actions}")
    model = model or homeostatic_model(world)
    records, values = [], []
    for ep in range(args.episodes):
        res = homeostasis_episode(world, args.steps, args.policy, args.seed, model, stream=ep)
        values.append(res.occupancy_entropy)
        records.append({"record": "episode", "episode": ep, "occupancy_entropy_bits": res.occupancy_entropy})
    records.append({"record": "summary", "world": world.name, "policy": args.policy,
                    "mean_entropy_bits": statistics.fmean(values), "stderr": _stderr(values)})
    return records


def cmd_measure(args) -> list[dict]:
    try:
        suite = load_suite(_read(args.suite), args.suite)
    except EnvironmentSpecError as exc:
        raise DataError(str(exc)) from None
    if args.kind == "legg":
        if args.agent == "reduction":
            agent = ReductionPolicy(EnumBudget(args.max_len, args.steps), w=args.w, jobs=args.jobs)
        elif args.agent == "random":
            agent = UniformRandom()
        else:
            agent = AlwaysArm(int(args.agent[-1]))
        report = legg_hutter(agent, suite, args.gamma, args.horizon, args.episodes, args.seed)
    else:
        report = operator_fitness(EnumBudget(args.max_len, args.steps), suite, args.n,
                                  range(args.seed, args.seed + args.seeds), args.w, jobs=args.jobs)
    return report.records()


def cmd_cache(args) -> list[dict]:
    path = cache_path()
    if args.action == "clear":
        existed = path.exists()
        if existed:
            path.unlink()
        return [{"record": "cache", "path": str(path), "cleared": existed}]
    if not path.exists():
        return [{"record": "cache", "path": str(path), "records": 0, "bytes": 0}]
    try:
        cache = cache_load(path)
    except CacheError as exc:
        raise DataError(f"{path}: {exc}") from None
    return [{"record": "cache", "path": str(path), "records": len(cache), "bytes": path.stat().st_size}]


# -- entry point ----------------------------------------------------------------

_DEFAULTS = {"seed": 0, "jobs": 1, "deterministic": False, "config": None, "format": "text", "output": None}


def _parse(argv) -> argparse.Namespace:
    parser, leaves = build_parser()
    args = parser.parse_args(argv)
    if args.command is None or (args.command == "agent" and getattr(args, "agent_cmd", None) is None):
        raise UsageError("uind: error: missing command")
    if getattr(args, "config", None):
        try:
            overlay = json.loads(_read(args.config))
        except json.JSONDecodeError as exc:
            raise DataError(f"{args.config}:{exc.lineno}: {exc.msg}") from None
        if not isinstance(overlay, dict):
            raise DataError(f"{args.config}:1: config must be a JSON object")
        overlay = {k.replace("-", "_"): v for k, v in overlay.items()}
        leaf = leaves[tuple(x for x in (args.command, getattr(args, "agent_cmd", None)) if x)]
        known = {a.dest for a in leaf._actions}
        unknown = sorted(set(overlay) - known - set(_DEFAULTS))
        if unknown:
            raise DataError(f"{args.config}:1: unknown option(s) {', '.join(unknown)}")
        # values given on the command line win over the overlay
        leaf.set_defaults(**{k: v for k, v in overlay.items() if k not in _DEFAULTS})
        globals_given = {k: getattr(args, k) for k in _DEFAULTS if hasattr(args, k)}
        args = parser.parse_args(argv)
        for key in _DEFAULTS:
            if key in globals_given:
                setattr(args, key, globals_given[key])
            elif key in overlay:
                setattr(args, key, overlay[key])
    for key, value in _DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parse(argv)
        records = args.func(args)
        text = emit_report(records, resolved_config(args), args.deterministic, args.format)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n\n{SYNOPSIS}")
        return 1
    except DataError as exc:
        sys.stderr.write(f"uind: data error: {exc}\n")
        return 2
    except (InductionError, ReductionError, EmptySuite, ChronologyFormatError, CacheError) as exc:
        sys.stderr.write(f"uind: data error: {type(exc).__name__}: {exc}\n")
        return 2
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
