"""Draw games from the grammar with probability exactly 2**-length,
deduplicate, screen for playability, and assemble evaluation sets."""

import json
import math
from dataclasses import dataclass

from . import engine, gdl, kernels, measure
from .seeds import Rng, derive_seed, normalize_seed

VERDICTS = ("playable", "trivial", "impossible")
FILTER_POLICIES = ("keep-all", "drop-impossible", "playable-only")

# default screening knobs (cited by reports)
TRIVIAL_THRESHOLD = 0.9
PROBE_DEPTH = 3
PRETEST_EPISODES = 32
TAU_ROLLOUTS = 32

# seed stream tags
_DRAW, _TAU, _PRETEST_RANDOM, _PRETEST_PROBE = 1, 11, 12, 13


class SamplingExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class Playability:
    verdict: str
    random_mean_v: float
    probe_mean_v: float
    episodes_tested: int


@dataclass(frozen=True)
class SampleSet:
    games: tuple  # (GameDescription, ComplexityProfile, Playability)
    master_seed: int
    filter_policy: str
    seeds: tuple = ()  # per-game draw seed (drives tau/pretest re-derivation)


class _GrammarSource:
    """Uniform choice source that tracks its own -log2 probability."""

    def __init__(self, seed):
        self._rng = Rng(seed)
        self.bits = 0.0

    def choose(self, n):
        if n <= 1:
            return 0
        self.bits += math.log2(n)
        return self._rng.randint(n)


def sample_game(seed):
    """One grammar draw; returns (description, accumulated bits).

    The accumulated bits equal -log2 of the draw probability, and by
    construction match description_length on the result."""
    src = _GrammarSource(normalize_seed(seed))
    return gdl.derive(src), src.bits


def pretest(desc, seed=0, episodes=PRETEST_EPISODES, probe_depth=PROBE_DEPTH,
            trivial_threshold=TRIVIAL_THRESHOLD) -> Playability:
    """Screen a game with random episodes and greedy lookahead probes.

    impossible: the probe never improves on the minimum score;
    trivial: random play already nets > trivial_threshold of the range;
    playable otherwise.
    """
    if episodes < 8:
        raise ValueError("episodes >= 8")
    seed = normalize_seed(seed)
    bounds = gdl.compute_bounds(desc)
    c = engine.compile_game(desc)
    rand_scores, _costs = kernels.run_random_batch(
        *c.args, c.layers0, c.st0, derive_seed(seed, _PRETEST_RANDOM), episodes)
    probe_scores = kernels.probe_batch(
        *c.args, c.layers0, c.st0, derive_seed(seed, _PRETEST_PROBE), episodes,
        probe_depth)
    random_mean_v = float(sum(measure.normalize(s, bounds) for s in rand_scores)) / episodes
    probe_mean_v = float(sum(measure.normalize(s, bounds) for s in probe_scores)) / episodes
    if int(probe_scores.max()) == bounds.r_min:
        verdict = "impossible"
    elif random_mean_v > trivial_threshold:
        verdict = "trivial"
    else:
        verdict = "playable"
    return Playability(verdict, random_mean_v, probe_mean_v, episodes)


def _passes(policy, verdict):
    if policy == "keep-all":
        return True
    if policy == "drop-impossible":
        return verdict != "impossible"
    if policy == "playable-only":
        return verdict == "playable"
    raise ValueError(f"unknown filter policy '{policy}'")


def profile_game(desc, seed, tau_rollouts=TAU_ROLLOUTS):
    """ComplexityProfile for a game, tau seeded off the game's draw seed."""
    tau = measure.estimate_tau(desc, tau_rollouts, derive_seed(seed, _TAU))
    return measure.complexity(desc, tau)


def sample_batch(n, master_seed, filter_policy="keep-all", players=None,
                 tau_rollouts=TAU_ROLLOUTS, pretest_episodes=PRETEST_EPISODES,
                 probe_depth=PROBE_DEPTH) -> SampleSet:
    """Draw until n distinct games pass the filter.

    `players` optionally restricts to single-player (1) or two-player (2)
    games.  Same (n, master_seed, policy) always yields the same set.
    Raises SamplingExhausted after 100*n consecutive rejections.
    """
    if n < 1:
        raise ValueError("n >= 1")
    master_seed = normalize_seed(master_seed)
    games = []
    seen = set()
    draw = 0
    consecutive = 0
    while len(games) < n:
        if consecutive >= 100 * n:
            raise SamplingExhausted(
                f"{consecutive} consecutive draws failed filter '{filter_policy}'")
        seed = derive_seed(master_seed, _DRAW, draw)
        draw += 1
        desc, _bits = sample_game(seed)
        if players is not None and desc.players != players:
            consecutive += 1
            continue
        key = gdl.serialize(desc)
        if key in seen:
            consecutive += 1
            continue
        play = pretest(desc, seed, pretest_episodes, probe_depth)
        if not _passes(filter_policy, play.verdict):
            consecutive += 1
            continue
        prof = profile_game(desc, seed, tau_rollouts)
        seen.add(key)
        games.append((desc, prof, play, seed))
        consecutive = 0
    return SampleSet(games=tuple(g[:3] for g in games), master_seed=master_seed,
                     filter_policy=filter_policy,
                     seeds=tuple(g[3] for g in games))


# ── Batch files: newline-separated canonical games + JSONL sidecar ────

def meta_path_for(batch_path):
    return str(batch_path) + ".meta.jsonl"


def write_batch(sset: SampleSet, batch_path, config=None, version=""):
    """Write <path> (one canonical game per line) and <path>.meta.jsonl."""
    lines = [gdl.serialize(d) for d, _p, _y in sset.games]
    with open(batch_path, "w") as f:
        f.write("\n".join(lines) + "\n")
    header = {"type": "header", "version": version,
              "master_seed": sset.master_seed,
              "filter_policy": sset.filter_policy,
              "config": config or {}}
    seeds = sset.seeds or tuple(range(len(sset.games)))
    with open(meta_path_for(batch_path), "w") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for (d, prof, play), seed in zip(sset.games, seeds):
            rec = {"type": "game", "game_id": gdl.game_id(d),
                   "l_bits": d.desc_len_bits, "tau": prof.tau,
                   "K_bits": prof.k_bits, "weight": prof.weight,
                   "verdict": play.verdict,
                   "random_mean_v": play.random_mean_v,
                   "probe_mean_v": play.probe_mean_v,
                   "seed": seed}
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def read_batch(batch_path):
    """Load a batch file; profiles come from the sidecar when present and are
    recomputed deterministically otherwise."""
    with open(batch_path) as f:
        descs = [gdl.parse(line) for line in f if line.strip()]
    games = []
    meta = []
    try:
        with open(meta_path_for(batch_path)) as f:
            meta = [json.loads(line) for line in f if line.strip()]
        meta = [m for m in meta if m.get("type") == "game"]
    except FileNotFoundError:
        pass
    seeds = []
    for i, desc in enumerate(descs):
        if i < len(meta):
            m = meta[i]
            prof = measure.ComplexityProfile(tau=m["tau"], k_bits=m["K_bits"],
                                             weight=m["weight"])
            play = Playability(m["verdict"], m["random_mean_v"],
                               m["probe_mean_v"], PRETEST_EPISODES)
            seeds.append(m["seed"])
        else:
            prof = profile_game(desc, i)
            play = pretest(desc, i)
            seeds.append(i)
        games.append((desc, prof, play))
    return SampleSet(games=tuple(games), master_seed=0, filter_policy="keep-all",
                     seeds=tuple(seeds))
