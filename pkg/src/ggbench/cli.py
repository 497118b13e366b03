"""Operator surface: sample games, measure agents, run ladders, inspect games.

Every output file embeds the tool version and the fully resolved run
configuration; deterministic-mode reruns with the same flags are
byte-identical (no timestamps in any artifact).

Exit codes: 0 success, 1 usage, 2 agent protocol failure, 3 internal error.
"""

import argparse
import json
import sys
import traceback

from . import __version__, arena, engine, gdl, measure, sampler
from .agents import AgentProtocolError, parse_agent_spec
from .seeds import derive_seed


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _config_of(args):
    skip = {"func", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _dump(obj):
    return json.dumps(obj, sort_keys=True)


def _load_config_file(path):
    values = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"config line without '=': {line!r}")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


# ── sample ────────────────────────────────────────────────────────────

def cmd_sample(args):
    sset = sampler.sample_batch(args.n, args.seed, args.filter,
                                players=args.players)
    sampler.write_batch(sset, args.out, config=_config_of(args),
                        version=__version__)
    counts = {}
    for _d, _p, play in sset.games:
        counts[play.verdict] = counts.get(play.verdict, 0) + 1
    print(f"wrote {len(sset.games)} games to {args.out} "
          f"(+ {sampler.meta_path_for(args.out)})")
    print("verdicts: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return 0


# ── estimate ──────────────────────────────────────────────────────────

def _expanded_budgets(t0, iterations):
    budgets = []
    for i in range(iterations + 1):
        for count, t in measure.doubling_schedule(i, t0):
            budgets.extend([t] * count)
    return budgets


def cmd_estimate(args):
    if not args.agent:
        raise SystemExit("at least one --agent required")
    factories = [(spec, parse_agent_spec(spec)) for spec in args.agent]

    if args.batch:
        sset = sampler.read_batch(args.batch)
        budgets = [args.T] * len(sset.games)
        t0, iters = None, None
    else:
        budgets = _expanded_budgets(args.t0, args.iters)
        sset = sampler.sample_batch(len(budgets), args.seed, args.filter)
        t0, iters = args.t0, args.iters
    sample = [(d, p) for d, p, _y in sset.games]

    lines = [_dump({"type": "header", "version": __version__,
                    "config": _config_of(args)})]
    estimates = []
    all_errored = True
    for spec, factory in factories:
        est = measure.estimate_upsilon(factory, sample, budgets, mode=args.mode,
                                       master_seed=args.seed, jobs=args.jobs)
        estimates.append((spec, est))
        for rec in est.per_game:
            lines.append(_dump({"type": "game", "agent": spec,
                                "game_id": rec.game_id, "K_bits": rec.k_bits,
                                "tau": rec.tau, "T": rec.budget, "v": rec.v,
                                "switched_at": rec.switched_at,
                                "episodes": rec.episodes, "seed": rec.seed,
                                "errors": rec.error}))
            if rec.error is None:
                all_errored = False
        lines.append(_dump({"type": "summary", "agent": spec,
                            "upsilon_hat": est.upsilon_hat, "stderr": est.stderr,
                            "n_games": est.n_games, "mode": est.mode,
                            "t0": t0, "iterations": iters}))
    if len(estimates) == 2:
        (sa, ea), (sb, eb) = estimates
        diffs = [ra.v - rb.v for ra, rb in zip(ea.per_game, eb.per_game)]
        lines.append(_dump({"type": "paired", "agent_a": sa, "agent_b": sb,
                            "mean_diff": sum(diffs) / len(diffs),
                            "n_games": len(diffs)}))

    out = args.out or "estimate.runlog.jsonl"
    with open(out, "w") as f:
        f.write("\n".join(lines) + "\n")

    for spec, est in estimates:
        print(f"agent {spec}")
        print(f"  upsilon_hat = {est.upsilon_hat:.6f}  stderr = {est.stderr:.6f}  "
              f"games = {est.n_games}  mode = {est.mode}")
        errs = sum(1 for r in est.per_game if r.error)
        if errs:
            print(f"  agent errors on {errs} game(s)")
    print(f"run log: {out}")
    return 2 if all_errored else 0


# ── ladder ────────────────────────────────────────────────────────────

def cmd_ladder(args):
    if len(args.agent) < 2:
        raise SystemExit("ladder needs at least two --agent")
    sset = sampler.read_batch(args.batch)
    specs = []
    for i, spec in enumerate(args.agent):
        specs.append((f"{i}:{spec}", parse_agent_spec(spec)))
    ratings, log = arena.run_ladder(specs, sset, rounds=args.rounds,
                                    k_factor=args.k_factor,
                                    master_seed=args.seed, budget_T=args.T)
    lines = [_dump({"type": "header", "version": __version__,
                    "config": _config_of(args)})]
    for m, before, after in log:
        lines.append(_dump({"type": "match", "game_id": m.game_id,
                            "a": m.agent_a, "b": m.agent_b,
                            "outcome": m.outcome, "scores": list(m.scores),
                            "seed": m.seed, "forfeit": m.forfeit,
                            "elo_before": list(before), "elo_after": list(after)}))
    for r in ratings:
        lines.append(_dump({"type": "rating", "agent": r.agent_id,
                            "elo": r.elo, "games": r.games_played}))
    out = args.out or "ladder.jsonl"
    with open(out, "w") as f:
        f.write("\n".join(lines) + "\n")

    print(f"{'rank':>4}  {'elo':>9}  {'games':>5}  agent")
    for i, r in enumerate(ratings, 1):
        print(f"{i:>4}  {r.elo:>9.2f}  {r.games_played:>5}  {r.agent_id}")
    print(f"ladder log: {out}")
    errors = [m for m, _b, _a in log if m.forfeit]
    return 2 if log and len(errors) == len(log) else 0


# ── inspect ───────────────────────────────────────────────────────────

_KEYMAP = {"w": "up", "s": "down", "a": "left", "d": "right",
           ".": "stay", " ": "stay", "p": "place"}


def _render(state):
    rows = []
    for y in range(state.desc.grid_h):
        rows.append("".join(state._glyph(x, y) for x in range(state.desc.grid_w)))
    return "\n".join(rows)


def cmd_inspect(args):
    with open(args.game) as f:
        texts = [line for line in f.read().splitlines() if line.strip()]
    if not texts:
        raise SystemExit(f"no games in {args.game}")
    desc = gdl.parse(texts[args.index])
    bounds = gdl.compute_bounds(desc)
    print(f"game {gdl.game_id(desc)}  bits={desc.desc_len_bits:.3f} "
          f"bounds=[{bounds.r_min},{bounds.r_max}] horizon={desc.horizon}")
    print(f"actions: {' '.join(desc.actions)}")

    if args.replay:
        return _replay(desc, args)

    state = engine.new_episode(desc, args.seed)
    records = []
    if args.play:
        chooser = _keyboard_chooser()
    else:
        agent = parse_agent_spec(args.agent)()
        agent.seed(derive_seed(args.seed, 3))
        agent.begin(measure.init_info(desc, 10 ** 9))

        def chooser(st):
            # baselines may open with their switch; skip to the acting policy
            for _ in range(3):
                a = agent.decide(_obs_stub(st), st if agent.white_box else None)[0]
                if a != "switch":
                    return a
            return "pass"
    print(_render(state))
    while state.terminal is None:
        action = chooser(state)
        if action is None:
            print("quit")
            break
        obs = state.observe(1)
        out = state.step(action)
        records.append({"tick": state.tick - 1, "action": action,
                        "observation": obs, "reward": out.reward_delta})
        print(f"\ntick {state.tick - 1}: {action}  reward {out.reward_delta:+d}  "
              f"score {state.score}")
        print(_render(state))
    print(f"\nterminal: {state.terminal}  final score: {state.score}")
    if args.export:
        with open(args.export, "w") as f:
            for rec in records:
                f.write(_dump(rec) + "\n")
        print(f"trajectory: {args.export}")
    return 0


def _obs_stub(state):
    from .agents import ObsInfo
    return ObsInfo(tick=state.tick, phase="eval", episode=1,
                   cells=state.observe(1), reward_delta=0, done=False,
                   clock_remaining=10 ** 9)


def _keyboard_chooser():
    def chooser(_state):
        while True:
            line = sys.stdin.readline()
            if not line or line.strip().lower().startswith("q"):
                return None
            key = (line.strip() or " ")[0].lower()
            if key in _KEYMAP:
                return _KEYMAP[key]
            print("keys: w/a/s/d move, . stay, p place, q quit")
    return chooser


def _replay(desc, args):
    with open(args.replay) as f:
        records = [json.loads(line) for line in f if line.strip()]
    state = engine.new_episode(desc, args.seed)
    for rec in records:
        obs = state.observe(1)
        if obs != rec["observation"]:
            print(f"tick {rec['tick']}: observation mismatch")
            return 3
        out = state.step(rec["action"])
        if out.reward_delta != rec["reward"]:
            print(f"tick {rec['tick']}: reward mismatch "
                  f"({out.reward_delta} vs {rec['reward']})")
            return 3
    print(f"replayed {len(records)} ticks, scores reproduce; "
          f"final score {state.score}, terminal {state.terminal}")
    return 0


# ── parser ────────────────────────────────────────────────────────────

def build_parser():
    p = _Parser(prog="ggb", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", help="draw a reproducible game batch")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--filter", choices=sampler.FILTER_POLICIES, default="keep-all")
    sp.add_argument("--players", type=int, choices=(1, 2), default=None)
    sp.add_argument("--out", required=True, help="batch file path")
    sp.add_argument("--config")
    sp.set_defaults(func=cmd_sample)

    ep = sub.add_parser("estimate", help="measure agents on sampled games")
    ep.add_argument("--agent", action="append", default=[],
                    help="agent spec; give twice for a paired run")
    ep.add_argument("--batch", help="evaluate a stored batch file")
    ep.add_argument("--T", type=int, default=10000, help="budget per game (batch mode)")
    ep.add_argument("--t0", type=int, default=16, help="base budget (doubling mode)")
    ep.add_argument("--iters", type=int, default=None,
                    help="doubling iterations (no --batch): evaluates 2**(i+1)-1 games")
    ep.add_argument("--filter", choices=sampler.FILTER_POLICIES, default="keep-all")
    ep.add_argument("--mode", choices=("plain", "importance"), default="importance")
    ep.add_argument("--seed", type=int, default=0)
    ep.add_argument("--jobs", type=int, default=1)
    ep.add_argument("--out")
    ep.add_argument("--config")
    ep.set_defaults(func=cmd_estimate)

    lp = sub.add_parser("ladder", help="round-robin Elo over two-player games")
    lp.add_argument("--agent", action="append", default=[])
    lp.add_argument("--batch", required=True)
    lp.add_argument("--rounds", type=int, default=1)
    lp.add_argument("--k-factor", type=float, default=32.0)
    lp.add_argument("--T", type=int, default=1000, help="learning budget per side")
    lp.add_argument("--seed", type=int, default=0)
    lp.add_argument("--out")
    lp.add_argument("--config")
    lp.set_defaults(func=cmd_ladder)

    ip = sub.add_parser("inspect", help="render / play / replay a game")
    ip.add_argument("game", help=".gdl file (single game or batch)")
    ip.add_argument("--index", type=int, default=0, help="game index in a batch file")
    ip.add_argument("--seed", type=int, default=0)
    ip.add_argument("--agent", default="random")
    ip.add_argument("--play", action="store_true", help="drive the avatar from stdin")
    ip.add_argument("--replay", help="verify an exported trajectory log")
    ip.add_argument("--export", help="write the trajectory as JSONL")
    ip.add_argument("--config")
    ip.set_defaults(func=cmd_inspect)
    return p


def _apply_config(argv):
    """Splice config-file entries into argv as flags; explicit flags win."""
    i = argv.index("--config")
    if i + 1 >= len(argv):
        return argv
    inject = []
    for key, value in _load_config_file(argv[i + 1]).items():
        flag = "--" + key.replace("_", "-")
        if flag in argv or ("--" + key) in argv:
            continue
        if value.lower() in ("true", "false"):
            if value.lower() == "true":
                inject.append(flag)
        else:
            inject.extend([flag, value])
    return argv[:1] + inject + argv[1:]


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if "--config" in argv and argv:
        try:
            argv = _apply_config(argv)
        except (OSError, ValueError) as e:
            print(f"ggb: bad config file: {e}", file=sys.stderr)
            return 1
    args = parser.parse_args(argv)
    if args.command == "estimate" and not args.batch and args.iters is None:
        parser.error("estimate needs --batch or --iters")
    try:
        return args.func(args) or 0
    except SystemExit:
        raise
    except AgentProtocolError as e:
        print(f"ggb: agent protocol failure: {e}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
