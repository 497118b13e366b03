"""The compiled kernels and the GGB_NUMBA=0 pure-Python path must agree
bit-for-bit: same RNG stream, same trajectories, same costs."""

import json
import os
import subprocess
import sys

from ggbench import engine, kernels, sampler

_DUMP = r"""
import json
from ggbench import engine, kernels, sampler
out = {"using_numba": kernels.USING_NUMBA, "games": []}
for seed in [3, 17, 91]:
    d, _ = sampler.sample_game(seed)
    c = engine.compile_game(d)
    scores, costs = kernels.run_random_batch(*c.args, c.layers0, c.st0, seed, 200)
    probes = kernels.probe_batch(*c.args, c.layers0, c.st0, seed, 8, 3)
    s = engine.new_episode(d, seed)
    traj = []
    acts = list(d.actions)
    i = 0
    while s.terminal is None:
        oa = acts[(i + 1) % len(acts)] if d.players == 2 else None
        o = s.step(acts[i % len(acts)], oa)
        traj.append([o.reward_delta, o.cost_units, list(o.events)])
        i += 1
    out["games"].append({"scores": scores.tolist(), "costs": costs.tolist(),
                         "probes": probes.tolist(), "traj": traj,
                         "final": [int(v) for v in s.st]})
print(json.dumps(out, sort_keys=True))
"""


def _dump(env_numba):
    env = dict(os.environ)
    env["GGB_NUMBA"] = env_numba
    res = subprocess.run([sys.executable, "-c", _DUMP], capture_output=True,
                         text=True, env=env, timeout=600)
    assert res.returncode == 0, res.stderr
    return json.loads(res.stdout)


def test_pure_python_fallback_matches_compiled():
    compiled = _dump("1")
    pure = _dump("0")
    assert compiled["using_numba"] is True
    assert pure["using_numba"] is False
    assert compiled["games"] == pure["games"]


def test_in_process_flag_reflects_environment():
    # this process was started without GGB_NUMBA=0 in CI; sanity only
    assert kernels.USING_NUMBA == (os.environ.get("GGB_NUMBA", "1") != "0")
