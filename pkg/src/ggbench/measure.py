"""Complexity accounting, the two-phase budgeted evaluation, and the
anytime intelligence estimate.

Virtual clock.  Every engine tick charges its cost_units and every agent
decision charges the cost the agent reports (1 for deterministic in-process
agents; wall-clock-derived for external ones).  A decision only takes effect
if the budget was not exhausted by the decision itself; an engine step that
was started is atomic (its effects stand even when its cost lands past the
budget), and the reported clock_spent is capped at the budget.

Two phases.  Learning-phase rewards are discarded.  The single irreversible
"switch" resets the environment; evaluation episodes then run on a seed
stream independent of the learning history.  The final value v is the mean
normalized score of completed evaluation episodes, the normalized
accumulated score of the unfinished first episode if none completed, and
exactly 0 if the agent never switched.
"""

import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional

from . import engine, gdl
from .agents import SWITCH, AgentProtocolError, InitInfo, ObsInfo
from .seeds import derive_seed, normalize_seed

# seed stream tags within one evaluation
_LEARN, _EVAL, _AGENT = 1, 2, 3


@dataclass(frozen=True)
class ComplexityProfile:
    tau: float     # mean engine cost per random-agent episode
    k_bits: float  # description bits + log2(tau)
    weight: float  # 2**-k_bits


class EvalResult(NamedTuple):
    v: float
    switched_at: Optional[int]
    eval_episode_scores: tuple
    partial_accumulated: int
    clock_spent: int
    budget: int
    learn_episodes: int
    eval_episodes: int


class GameEval(NamedTuple):
    game_id: str
    k_bits: float
    tau: float
    budget: int
    v: float
    switched_at: Optional[int]
    episodes: int
    seed: int
    error: Optional[str]


@dataclass(frozen=True)
class IntelligenceEstimate:
    upsilon_hat: float
    n_games: int
    stderr: float
    mode: str            # "plain" | "importance"
    t0: Optional[int]
    iterations: Optional[int]
    per_game: tuple


def normalize(score, bounds) -> float:
    """Map a score inside [r_min, r_max] onto [0, 1]."""
    return (score - bounds.r_min) / (bounds.r_max - bounds.r_min)


def estimate_tau(desc, n_rollouts=32, seed=0) -> float:
    """Mean engine cost of full random-agent episodes, seeds seed..seed+n-1."""
    if n_rollouts < 1:
        raise ValueError("n_rollouts >= 1")
    from . import kernels
    c = engine.compile_game(desc)
    _scores, costs = kernels.run_random_batch(*c.args, c.layers0, c.st0,
                                              normalize_seed(seed), n_rollouts)
    return float(costs.mean())


def complexity(desc, tau) -> ComplexityProfile:
    """Complexity is description bits plus log2 of expected episode compute."""
    if tau < 1:
        raise ValueError("tau >= 1")
    k = desc.desc_len_bits + math.log2(tau)
    return ComplexityProfile(tau=float(tau), k_bits=k, weight=2.0 ** -k)


def init_info(desc, budget, deterministic=True) -> InitInfo:
    bounds = gdl.compute_bounds(desc)
    obs = "full" if desc.obs_mode == "full" else f"radius:{desc.obs_radius}"
    return InitInfo(game_id=gdl.game_id(desc), actions=tuple(desc.actions),
                    obs_mode=obs, grid=(desc.grid_w, desc.grid_h),
                    players=desc.players, budget=budget,
                    bounds=(bounds.r_min, bounds.r_max),
                    deterministic=deterministic)


def evaluate_two_phase(agent, desc, budget_T, seed) -> EvalResult:
    """Run one agent on one game under a total virtual budget."""
    if budget_T < 1:
        raise ValueError("budget_T >= 1")
    seed = normalize_seed(seed)
    bounds = gdl.compute_bounds(desc)
    agent.seed(derive_seed(seed, _AGENT))
    agent.begin(init_info(desc, budget_T))

    clock = 0
    phase = "learn"
    switched_at = None
    eval_scores = []
    learn_eps = 0
    episode = 0
    state = None
    last_reward = 0

    while clock < budget_T:
        if state is None:
            stream = _LEARN if phase == "learn" else _EVAL
            count = learn_eps if phase == "learn" else len(eval_scores)
            state = engine.new_episode(desc, derive_seed(seed, stream, count))
            episode += 1
            last_reward = 0
        obs = ObsInfo(tick=state.tick, phase=phase, episode=episode,
                      cells=state.observe(1), reward_delta=last_reward,
                      done=False, clock_remaining=budget_T - clock)
        action, dcost = agent.decide(obs, state if agent.white_box else None)
        clock += max(1, int(dcost))
        if clock >= budget_T:
            break
        if action == SWITCH:
            if phase == "learn":
                phase = "eval"
                switched_at = clock
                state = None
                continue
            action = "pass"  # the single switch is spent; ignore repeats
        out = state.step(action)
        clock += out.cost_units
        last_reward = out.reward_delta
        if out.terminal is not None:
            final = ObsInfo(tick=state.tick, phase=phase, episode=episode,
                            cells=state.observe(1), reward_delta=out.reward_delta,
                            done=True, clock_remaining=max(0, budget_T - clock))
            sw, extra = agent.episode_end(final)
            clock += max(0, int(extra))
            if phase == "eval":
                eval_scores.append(state.score)
            else:
                learn_eps += 1
            state = None
            last_reward = 0
            if sw == SWITCH and phase == "learn":
                phase = "eval"
                switched_at = clock

    partial = state.score if (state is not None and phase == "eval") else 0
    if switched_at is None:
        v = 0.0
    elif eval_scores:
        v = sum(normalize(s, bounds) for s in eval_scores) / len(eval_scores)
    else:
        v = normalize(partial, bounds)
    result = EvalResult(v=v, switched_at=switched_at,
                        eval_episode_scores=tuple(eval_scores),
                        partial_accumulated=partial,
                        clock_spent=min(clock, budget_T), budget=budget_T,
                        learn_episodes=learn_eps, eval_episodes=len(eval_scores))
    agent.finish(result)
    return result


def doubling_schedule(iteration, t0):
    """Budget plan for iteration i: 2**i games, half at t0, a quarter at 2*t0,
    and so on, with the last single game at (2**i)*t0."""
    if iteration < 0:
        raise ValueError("iteration >= 0")
    if iteration == 0:
        return [(1, t0)]
    plan = [(2 ** (iteration - 1 - k), t0 * 2 ** k) for k in range(iteration)]
    plan.append((1, t0 * 2 ** iteration))
    return plan


def aggregate(records, mode, t0=None, iterations=None) -> IntelligenceEstimate:
    """Fold per-game results into the running estimate (anytime: valid for
    any prefix of records)."""
    if mode not in ("plain", "importance"):
        raise ValueError("mode is 'plain' or 'importance'")
    vs = [r.v for r in records]
    n = len(records)
    if n == 0:
        raise ValueError("no records")
    if mode == "plain":
        up = sum(vs) / n
        err = statistics.stdev(vs) / math.sqrt(n) if n > 1 else 0.0
    else:
        ws = [1.0 / r.tau for r in records]
        wsum = sum(ws)
        up = sum(w * v for w, v in zip(ws, vs)) / wsum
        if n > 1:
            err = math.sqrt(sum((w * (v - up)) ** 2 for w, v in zip(ws, vs))) / wsum
        else:
            err = 0.0
    return IntelligenceEstimate(upsilon_hat=up, n_games=n, stderr=err, mode=mode,
                                t0=t0, iterations=iterations,
                                per_game=tuple(records))


def estimate_upsilon(agent, sample, budget_T, mode="importance", master_seed=0,
                     jobs=1, on_result=None) -> IntelligenceEstimate:
    """Evaluate every sampled game and aggregate.

    `agent` is an AgentHandle or a zero-argument factory (required when
    jobs > 1).  `budget_T` is one budget or a per-game list.  Use "plain"
    when the sample is already complexity-proportional; "importance"
    reweights an l-proportional sample by 1/tau.  A master seed pins every
    per-game seed, so reruns are identical.
    """
    budgets = list(budget_T) if hasattr(budget_T, "__len__") else [budget_T] * len(sample)
    if len(budgets) != len(sample):
        raise ValueError("one budget per game required")

    def eval_one(i):
        a = agent() if callable(agent) else agent
        desc, prof = sample[i]
        seed = derive_seed(normalize_seed(master_seed), 100, i)
        gid = gdl.game_id(desc)
        try:
            res = evaluate_two_phase(a, desc, budgets[i], seed)
            return GameEval(gid, prof.k_bits, prof.tau, budgets[i], res.v,
                            res.switched_at, res.eval_episodes, seed, None)
        except (AgentProtocolError, engine.IllegalAction) as e:
            return GameEval(gid, prof.k_bits, prof.tau, budgets[i], 0.0,
                            None, 0, seed, f"{type(e).__name__}: {e}")

    records = []
    if jobs <= 1:
        for i in range(len(sample)):
            rec = eval_one(i)
            records.append(rec)
            if on_result:
                on_result(rec)
    else:
        if not callable(agent):
            raise ValueError("jobs > 1 needs an agent factory")
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for rec in pool.map(eval_one, range(len(sample))):
                records.append(rec)
                if on_result:
                    on_result(rec)
    return aggregate(records, mode)
