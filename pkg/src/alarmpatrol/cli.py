"""Command-line front end.

Exit codes: 0 ok, 2 bad usage or parameters, 3 invalid instance, 4 budget
exceeded, 5 file I/O error.  Every run writes its resolved configuration to
stderr as a ``# config:`` JSON line; results go to stdout.

Instance arguments take a path to a JSON instance document or the name of a
bundled one (``fig2``, ``fig3``, ``paris``; a ``.instance`` or ``.json``
suffix is accepted).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from importlib import resources
from pathlib import Path

from .covering import simultaneous_attack_value
from .gametree import DEFAULT_STATE_BUDGET, GameTreeOracle, check_guard
from .model import BudgetExceeded, InstanceError, PatrolInstance, dump_instance, load_instance
from .multi import solve_sequential
from .online import (
    OnlinePolicy,
    competitive_table,
    estimate_competitive_factor,
    gen_lower_bound_instance,
    gen_randomized_worstcase_instance,
    gamma_r_exact,
    render_table,
)
from .pathfinder import best_placement_k2, response_table
from .robustness import gen_overestimation_instance, gen_underestimation_instance, value_with_guess

BUNDLED = ("fig2", "fig3", "paris")


class UsageError(Exception):
    pass


def bundled_path(name: str):
    return resources.files("alarmpatrol").joinpath("data", f"{name}.json")


def read_instance(spec: str) -> PatrolInstance:
    path = Path(spec)
    if path.exists():
        return load_instance(path)
    stem = path.name
    for suffix in (".instance", ".json"):
        if stem.endswith(suffix):
            stem = stem[: -len(suffix)]
    if stem in BUNDLED and not path.parent.parts:
        return load_instance(bundled_path(stem).read_text(encoding="utf-8"))
    raise FileNotFoundError(f"no such instance file: {spec}")


def parse_k_list(text: str) -> list[int]:
    """``3..10,100`` -> [3, 4, ..., 10, 100]."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                lo, hi = part.split("..")
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise UsageError(f"bad k list {text!r}") from None
    if not out:
        raise UsageError("empty k list")
    return out


def emit_rows(rows: list[dict], fmt: str, out) -> None:
    if not rows:
        return
    header = list(rows[0])
    if fmt == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(r[h]) for h in header])
        return
    cells = [[_cell(r[h]) for h in header] for r in rows]
    widths = [max(len(x) for x in col) for col in zip(header, *cells)]
    for line in [header] + cells:
        out.write("  ".join(c.ljust(w) for c, w in zip(line, widths)).rstrip() + "\n")


def _cell(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}" if x != 0 else "0"
    if x is None:
        return ""
    return str(x)


# --------------------------------------------------------------------------
# commands


def cmd_validate(args, out):
    inst = read_instance(args.instance)
    out.write(f"ok: {len(inst.vertices)} vertices, {len(inst.edges)} edges, {len(inst.targets)} targets, k={inst.k}\n")


def cmd_solve(args, out):
    inst = read_instance(args.instance)
    k = args.k if args.k is not None else inst.k
    if args.simultaneous:
        v, u = simultaneous_attack_value(inst, k, max_subsets=args.budget)
        emit_rows([{"mode": "simultaneous", "k": k, "placement": v, "value": u}], args.format, out)
        return
    if k == 2:
        ans = best_placement_k2(inst, max_vertices=args.max_vertices)
        emit_rows(
            [{"mode": "sequential", "k": 2, "placement": ans.placement, "value": ans.value,
              "path": " ".join(ans.path), "ends": ans.ends}],
            args.format,
            out,
        )
        if args.table:
            out.write("\n")
            emit_rows(response_table(inst), args.format, out)
        return
    u, v = solve_sequential(inst, k, state_budget=args.budget)
    emit_rows([{"mode": "sequential", "k": k, "placement": v, "value": u}], args.format, out)


def cmd_oracle(args, out):
    inst = read_instance(args.instance)
    k = args.k if args.k is not None else inst.k
    board = inst.compiled
    check_guard(board, k, args.max_vertices, args.max_k)
    oracle = GameTreeOracle(board, args.budget)
    start = board.index[inst.defender_start] if inst.defender_start else None
    u, s = oracle.value(k, start)
    emit_rows([{"k": k, "placement": board.name(s), "value": u}], args.format, out)
    if args.trace:
        out.write("\n")
        for line in oracle.principal_variation(s, k):
            out.write(line + "\n")


def family_instance(family: str, k: int, k_prime: int, epsilon: float) -> PatrolInstance:
    if family in ("ratio", "additive"):
        return gen_underestimation_instance(k, k_prime, epsilon, family)
    return gen_overestimation_instance(k, k_prime, epsilon, family)


def cmd_robustness(args, out):
    if args.family:
        inst = family_instance(args.family, args.k, args.guess, args.epsilon)
    elif args.instance:
        inst = read_instance(args.instance)
    else:
        raise UsageError("give an instance or --family")
    g = value_with_guess(inst, args.k, args.guess, state_budget=args.budget)
    emit_rows([{"instance": inst.name, **g.to_dict()}], args.format, out)


def cmd_online(args, out):
    if args.instance:
        inst = read_instance(args.instance).with_k(args.k)
    elif args.policy == "coin":
        h = args.h
        if h is None:
            h = min(range(1, args.k), key=lambda h: (gamma_r_exact(args.k, h), h))
        inst = gen_randomized_worstcase_instance(args.k, h)
    else:
        inst = gen_lower_bound_instance(args.k)
    kind = "coin-flip-randomized" if args.policy == "coin" else "greedy-deterministic"
    extra = {"threshold": args.threshold} if args.policy == "greedy" else {"respond_probability": args.p}
    policy = OnlinePolicy.default_for(inst, kind, **extra)
    rep = estimate_competitive_factor(policy, inst, "exhaustive", args.trials, args.seed, state_budget=args.budget)
    row = {"instance": inst.name, "policy": kind, "home": policy.home, **rep.to_dict()}
    if rep.exact is not None:
        row["exact_v"] = rep.exact
    emit_rows([row], args.format, out)


def cmd_generate(args, out):
    f = args.family
    if f == "lower-bound":
        inst = gen_lower_bound_instance(args.k)
    elif f == "randomized":
        if args.h is None:
            raise UsageError("--h is required for the randomized family")
        inst = gen_randomized_worstcase_instance(args.k, args.h)
    elif f in BUNDLED:
        inst = load_instance(bundled_path(f).read_text(encoding="utf-8"))
    else:
        if args.guess is None:
            raise UsageError("--guess is required for robustness families")
        inst = family_instance(f, args.k, args.guess, args.epsilon)
    text = dump_instance(inst)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        out.write(f"wrote {args.output}\n")
    else:
        out.write(text)


def cmd_table(args, out):
    rows = competitive_table(parse_k_list(args.k))
    if args.format in ("csv", "both"):
        out.write(render_table(rows, "csv"))
    if args.format == "both":
        out.write("\n")
    if args.format in ("text", "both"):
        out.write(render_table(rows, "text"))


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alarmpatrol", description="Adversarial patrolling with alarmed targets.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt=True, budget=DEFAULT_STATE_BUDGET):
        if fmt:
            sp.add_argument("--format", choices=("text", "csv"), default="text")
        sp.add_argument("--budget", type=int, default=budget, help="state or subset budget")

    sp = sub.add_parser("validate", help="check an instance document")
    sp.add_argument("instance")
    sp.set_defaults(run=cmd_validate)

    sp = sub.add_parser("solve", help="equilibrium value and placement")
    sp.add_argument("instance")
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--simultaneous", action="store_true", help="all attacks must open at once")
    mode.add_argument("--sequential", action="store_true", help="attacks may be spread over time (default)")
    sp.add_argument("--k", type=int)
    sp.add_argument("--max-vertices", type=int, default=500)
    sp.add_argument("--no-table", dest="table", action="store_false", help="skip the per-opening table for k=2")
    common(sp)
    sp.set_defaults(run=cmd_solve)

    sp = sub.add_parser("oracle", help="exhaustive game-tree value (small instances)")
    sp.add_argument("instance")
    sp.add_argument("--k", type=int)
    sp.add_argument("--max-vertices", type=int, default=9)
    sp.add_argument("--max-k", type=int, default=3)
    sp.add_argument("--no-trace", dest="trace", action="store_false")
    common(sp)
    sp.set_defaults(run=cmd_oracle)

    sp = sub.add_parser("robustness", help="cost of a wrong guess about k")
    sp.add_argument("instance", nargs="?")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--guess", type=int, required=True)
    sp.add_argument("--family", choices=("ratio", "additive", "ratio-star", "additive-mid", "additive-high"))
    sp.add_argument("--epsilon", type=float, default=0.01)
    common(sp, budget=20_000_000)
    sp.set_defaults(run=cmd_robustness)

    sp = sub.add_parser("online", help="competitive factor of an online policy")
    sp.add_argument("instance", nargs="?")
    sp.add_argument("--policy", choices=("greedy", "coin"), required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--h", type=int, help="far targets in the coin-policy instance (default: worst h)")
    sp.add_argument("--p", type=float, default=0.5, help="coin policy response probability")
    sp.add_argument("--threshold", type=int, help="greedy policy ignores alarms farther than this")
    sp.add_argument("--trials", type=int, default=0, help="Monte Carlo games (0: exact expectation)")
    sp.add_argument("--seed", type=int, default=0)
    common(sp)
    sp.set_defaults(run=cmd_online)

    sp = sub.add_parser("generate", help="write a bundled or generated instance")
    sp.add_argument(
        "--family",
        required=True,
        choices=BUNDLED + ("ratio", "additive", "ratio-star", "additive-mid", "additive-high", "lower-bound", "randomized"),
    )
    sp.add_argument("--k", type=int, default=3)
    sp.add_argument("--guess", type=int)
    sp.add_argument("--h", type=int)
    sp.add_argument("--epsilon", type=float, default=0.01)
    sp.add_argument("-o", "--output")
    sp.set_defaults(run=cmd_generate)

    sp = sub.add_parser("table", help="competitive factors of the online policies")
    sp.add_argument("--k", default="3..10,100", help="e.g. 3..10,100")
    sp.add_argument("--format", choices=("text", "csv", "both"), default="both")
    sp.set_defaults(run=cmd_table)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    config = {k: v for k, v in sorted(vars(args).items()) if k != "run"}
    err.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    try:
        args.run(args, out)
    except UsageError as exc:
        err.write(f"error: {exc}\n")
        return 2
    except InstanceError as exc:
        err.write(f"invalid instance: {exc}\n")
        return 3
    except BudgetExceeded as exc:
        err.write(f"budget exceeded: {exc}\n")
        return 4
    except OSError as exc:
        err.write(f"i/o error: {exc}\n")
        return 5
    except ValueError as exc:
        err.write(f"error: {exc}\n")
        return 2
    return 0


def run(argv=None) -> tuple[int, str, str]:
    """Run a command in-process; returns (exit code, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, out, err)
    return code, out.getvalue(), err.getvalue()


if __name__ == "__main__":
    sys.exit(main())
