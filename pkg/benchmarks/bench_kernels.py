#!/usr/bin/env python3
"""Time the episode kernels with numba against the pure-Python fallback.

Run directly; it re-executes itself once per path (GGB_NUMBA=1 / 0) and
prints a small table.  Pass --episodes to change the workload.
"""

import argparse
import json
import os
import subprocess
import sys
import time


def measure(episodes):
    from ggbench import engine, kernels, sampler

    rows = []
    for seed in (5, 23):
        desc, _ = sampler.sample_game(seed)
        c = engine.compile_game(desc)
        # warm-up triggers JIT compilation so the timing is steady-state
        kernels.run_random_batch(*c.args, c.layers0, c.st0, 0, 10)
        t0 = time.perf_counter()
        _scores, costs = kernels.run_random_batch(*c.args, c.layers0, c.st0,
                                                  0, episodes)
        dt = time.perf_counter() - t0
        rows.append({"game": seed, "episodes": episodes,
                     "ticks": int(costs.sum()),
                     "seconds": dt,
                     "eps_per_s": episodes / dt})
    return {"using_numba": kernels.USING_NUMBA, "rows": rows}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--episodes", type=int, default=None)
    ap.add_argument("--_inner", action="store_true")
    args = ap.parse_args()

    if args._inner:
        episodes = args.episodes or (50_000 if os.environ.get("GGB_NUMBA") != "0"
                                     else 500)
        print(json.dumps(measure(episodes)))
        return

    results = {}
    for flag in ("1", "0"):
        env = dict(os.environ, GGB_NUMBA=flag)
        cmd = [sys.executable, __file__, "--_inner"]
        if args.episodes:
            cmd += ["--episodes", str(args.episodes)]
        out = subprocess.run(cmd, env=env, capture_output=True, text=True)
        if out.returncode != 0:
            sys.stderr.write(out.stderr)
            sys.exit(1)
        results[flag] = json.loads(out.stdout.strip().splitlines()[-1])

    print(f"{'path':<12} {'game':>5} {'episodes':>9} {'sec':>8} {'episodes/s':>12}")
    rates = {}
    for flag, label in (("1", "numba"), ("0", "pure-python")):
        for row in results[flag]["rows"]:
            print(f"{label:<12} {row['game']:>5} {row['episodes']:>9} "
                  f"{row['seconds']:>8.3f} {row['eps_per_s']:>12.0f}")
            rates.setdefault(label, []).append(row["eps_per_s"])
    speedup = (sum(rates["numba"]) / len(rates["numba"])) / \
              (sum(rates["pure-python"]) / len(rates["pure-python"]))
    print(f"\nnumba speedup: {speedup:.1f}x")


if __name__ == "__main__":
    main()
