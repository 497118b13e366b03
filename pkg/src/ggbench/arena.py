"""Relative measurement for two-player games: matches and an Elo ladder.

Match protocol: each side first runs its own budgeted learning phase in the
game with the other seat driven by a frozen uniform-random policy, until it
emits its switch (a side that never switches forfeits).  The evaluation is
then a single live head-to-head episode; the terminal result decides the
match.  A protocol error at any point forfeits the erring side.

Scores are avatar-centric; the second seat sees negated rewards (zero-sum
convention).
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

from . import engine, gdl, measure
from .agents import SWITCH, AgentProtocolError, ObsInfo
from .seeds import Rng, derive_seed, normalize_seed

_ELO_GRID = 1 << 20  # deltas quantized so rating sums conserve exactly in floats


class MatchResult(NamedTuple):
    game_id: str
    agent_a: str
    agent_b: str
    outcome: str  # "a" | "b" | "draw"
    scores: tuple
    seed: int
    forfeit: Optional[str]  # None | "a" | "b" | "ab"


@dataclass
class Rating:
    agent_id: str
    elo: float = 1000.0
    games_played: int = 0


def elo_update(ra, rb, outcome, k_factor=32.0):
    """Standard Elo update; the applied delta is quantized to 2**-20 rating
    points so that ra' + rb' == ra + rb holds exactly in float arithmetic."""
    if k_factor <= 0:
        raise ValueError("k_factor > 0")
    s_a = {"a": 1.0, "draw": 0.5, "b": 0.0}[outcome]
    e_a = 1.0 / (1.0 + 10.0 ** ((rb - ra) / 400.0))
    delta = round(k_factor * (s_a - e_a) * _ELO_GRID) / _ELO_GRID
    return ra + delta, rb - delta


def _learning_phase(agent, desc, budget_T, seed, seat):
    """Run the agent's learning phase on `seat`, the other seat random.
    Returns True once the agent switches, False if the budget ran out."""
    agent.seat = seat
    agent.seed(derive_seed(seed, 3))
    agent.begin(measure.init_info(desc, budget_T))
    filler = Rng(derive_seed(seed, 4))
    actions = desc.actions
    sign = 1 if seat == 1 else -1
    clock = 0
    state = None
    last_reward = 0
    episode = 0
    eps = 0
    while clock < budget_T:
        if state is None:
            state = engine.new_episode(desc, derive_seed(seed, 5, eps))
            episode += 1
            last_reward = 0
        obs = ObsInfo(tick=state.tick, phase="learn", episode=episode,
                      cells=state.observe(seat), reward_delta=last_reward,
                      done=False, clock_remaining=budget_T - clock)
        action, dcost = agent.decide(obs, state if agent.white_box else None)
        clock += max(1, int(dcost))
        if clock >= budget_T:
            return False
        if action == SWITCH:
            return True
        rand_action = actions[filler.randint(len(actions))]
        if seat == 1:
            out = state.step(action, rand_action)
        else:
            out = state.step(rand_action, action)
        clock += out.cost_units
        last_reward = sign * out.reward_delta
        if out.terminal is not None:
            final = ObsInfo(tick=state.tick, phase="learn", episode=episode,
                            cells=state.observe(seat),
                            reward_delta=sign * out.reward_delta, done=True,
                            clock_remaining=max(0, budget_T - clock))
            sw, extra = agent.episode_end(final)
            clock += max(0, int(extra))
            state = None
            eps += 1
            if sw == SWITCH:
                return True
    return False


def play_match(agent_a, agent_b, desc, budget_T, seed) -> MatchResult:
    """One match, agent_a on the avatar seat.  See the module docstring."""
    if desc.players != 2:
        raise ValueError("match games must declare two players")
    seed = normalize_seed(seed)
    gid = gdl.game_id(desc)
    ok = {}
    for tag, agent, seat in (("a", agent_a, 1), ("b", agent_b, 2)):
        try:
            ok[tag] = _learning_phase(agent, desc, budget_T, derive_seed(seed, seat), seat)
        except (AgentProtocolError, engine.IllegalAction):
            ok[tag] = False
    if not ok["a"] or not ok["b"]:
        forfeit = "".join(t for t in ("a", "b") if not ok[t])
        outcome = "draw" if forfeit == "ab" else ("b" if forfeit == "a" else "a")
        return MatchResult(gid, agent_a.id, agent_b.id, outcome, (0, 0), seed, forfeit)

    state = engine.new_episode(desc, derive_seed(seed, 9))
    episode_err = None
    while state.terminal is None:
        acts = []
        for tag, agent, seat in (("a", agent_a, 1), ("b", agent_b, 2)):
            sign = 1 if seat == 1 else -1
            obs = ObsInfo(tick=state.tick, phase="eval", episode=1,
                          cells=state.observe(seat),
                          reward_delta=0, done=False, clock_remaining=0)
            try:
                action, _cost = agent.decide(obs, state if agent.white_box else None)
            except (AgentProtocolError, engine.IllegalAction):
                episode_err = tag
                break
            if action == SWITCH:
                action = "pass"
            if action != "pass" and action not in desc.actions:
                episode_err = tag
                break
            acts.append(action)
        if episode_err:
            break
        state.step(acts[0], acts[1])
    if episode_err:
        outcome = "b" if episode_err == "a" else "a"
        return MatchResult(gid, agent_a.id, agent_b.id, outcome,
                           (state.score, -state.score), seed, episode_err)
    outcome = {"win": "a", "lose": "b"}.get(state.terminal, "draw")
    return MatchResult(gid, agent_a.id, agent_b.id, outcome,
                       (state.score, -state.score), seed, None)


def run_ladder(agent_specs, sample, rounds=1, k_factor=32.0, master_seed=0,
               budget_T=1000, on_match=None):
    """Round-robin with seat swaps per round per game; sequential rating
    updates in schedule order.

    agent_specs: list of (agent_id, factory).  Returns (ratings sorted by
    elo descending, list of (MatchResult, elo_before, elo_after)).
    """
    if len(agent_specs) < 2:
        raise ValueError("need at least two agents")
    games = [(d, p, y) for d, p, y in sample.games if d.players == 2]
    if not games:
        raise ValueError("sample contains no two-player games")
    master_seed = normalize_seed(master_seed)
    ratings = {aid: Rating(aid) for aid, _f in agent_specs}
    log = []
    for rnd in range(rounds):
        for i in range(len(agent_specs)):
            for j in range(i + 1, len(agent_specs)):
                for g, (desc, _p, _y) in enumerate(games):
                    for swap in (0, 1):
                        ia, ib = (i, j) if swap == 0 else (j, i)
                        id_a, fac_a = agent_specs[ia]
                        id_b, fac_b = agent_specs[ib]
                        seed = derive_seed(master_seed, rnd, i, j, g, swap)
                        m = play_match(fac_a(), fac_b(), desc, budget_T, seed)
                        before = (ratings[id_a].elo, ratings[id_b].elo)
                        ra, rb = elo_update(before[0], before[1], m.outcome, k_factor)
                        ratings[id_a].elo = ra
                        ratings[id_b].elo = rb
                        ratings[id_a].games_played += 1
                        ratings[id_b].games_played += 1
                        log.append((m, before, (ra, rb)))
                        if on_match:
                            on_match(log[-1])
    ordered = sorted(ratings.values(), key=lambda r: (-r.elo, r.agent_id))
    return ordered, log
