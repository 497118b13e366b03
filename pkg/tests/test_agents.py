import numpy as np
import pytest

from ggbench import engine, gdl, measure, sampler
from ggbench.agents import (PASS, SWITCH, AgentHandle, MctsAgent, ObsInfo,
                            QLearnAgent, RandomAgent, parse_agent_spec)


def _obs(state, phase="eval", remaining=10 ** 6):
    return ObsInfo(tick=state.tick, phase=phase, episode=1,
                   cells=state.observe(1), reward_delta=0, done=False,
                   clock_remaining=remaining)


def test_random_agent_switches_first_then_uniform(goal_game):
    a = RandomAgent()
    a.seed(5)
    a.begin(measure.init_info(goal_game, 1000))
    s = engine.new_episode(goal_game, 0)
    action, cost = a.decide(_obs(s))
    assert action == SWITCH and cost == 1
    n = 10_000
    counts = {}
    for _ in range(n):
        act, _c = a.decide(_obs(s))
        assert act != PASS
        counts[act] = counts.get(act, 0) + 1
    assert set(counts) == set(goal_game.actions)
    p = 1 / len(goal_game.actions)
    sigma = (p * (1 - p) / n) ** 0.5
    for act, c in counts.items():
        assert abs(c / n - p) < 3 * sigma, (act, c / n)


def test_random_agent_cost_parameter(goal_game):
    a = RandomAgent(cost_per_decision=10)
    a.seed(1)
    a.begin(measure.init_info(goal_game, 1000))
    s = engine.new_episode(goal_game, 0)
    assert a.decide(_obs(s))[1] == 10


def test_qlearn_converges_on_goal_game(goal_game):
    q = QLearnAgent(alpha=0.5, epsilon=0.2, switch_fraction=0.5)
    res = measure.evaluate_two_phase(q, goal_game, 30_000, seed=11)
    assert res.v == 1.0
    assert res.eval_episodes >= 10


def test_qlearn_switch_threshold(goal_game):
    q = QLearnAgent(switch_fraction=0.5)
    res = measure.evaluate_two_phase(q, goal_game, 1000, seed=3)
    # first decision at or past clock 500; decision+tick cycle is 3 units
    assert 500 <= res.switched_at <= 506


def test_qlearn_epsilon_one_explores_uniformly(goal_game):
    q = QLearnAgent(epsilon=1.0)
    q.seed(9)
    q.begin(measure.init_info(goal_game, 1000))
    s = engine.new_episode(goal_game, 0)
    n = 8000
    counts = {}
    for _ in range(n):
        act, _ = q.decide(_obs(s, phase="learn", remaining=1000))
        counts[act] = counts.get(act, 0) + 1
    p = 1 / len(goal_game.actions)
    sigma = (p * (1 - p) / n) ** 0.5
    for act, c in counts.items():
        assert abs(c / n - p) < 3 * sigma


def test_qlearn_rejects_bad_parameters():
    with pytest.raises(ValueError):
        QLearnAgent(alpha=0)
    with pytest.raises(ValueError):
        QLearnAgent(switch_fraction=1.0)


def test_mcts_takes_one_step_win():
    # immediate win strictly dominates under a per-tick penalty
    d = gdl.make_game(grid_w=4, grid_h=4, players=1, horizon=16,
                      layout=[("avatar", 2, 3), ("goal", 3, 3)],
                      actions=["up", "down", "left", "right"],
                      rules=[(("overlap", "avatar", "goal"), [("end", "win")])],
                      step_delta=-1, win_reward=4)
    for sims in (1, 4):
        m = MctsAgent(simulations=sims)
        m.seed(2)
        m.begin(measure.init_info(d, 10_000))
        m._switched = True
        s = engine.new_episode(d, 0)
        action, cost = m.decide(_obs(s), s)
        assert action == "right"
        assert cost > sims * len(d.actions)  # 1 + per-rollout engine charges


def test_mcts_more_simulations_never_hurt_on_oracle_game():
    d = gdl.make_game(grid_w=3, grid_h=3, players=1, horizon=8, noise="1/8",
                      layout=[("avatar", 0, 0), ("goal", 2, 2), ("hazard", 1, 1)],
                      actions=["up", "down", "left", "right"],
                      rules=[(("overlap", "avatar", "goal"), [("end", "win")]),
                             (("overlap", "avatar", "hazard"), [("reward", -1)])],
                      win_reward=4, lose_reward=-2)
    reps = 24

    def mean_v(sims):
        vs = []
        for r in range(reps):
            m = MctsAgent(simulations=sims, horizon_cap=8)
            vs.append(measure.evaluate_two_phase(m, d, 60_000, seed=1000 + r).v)
        return np.mean(vs), np.std(vs, ddof=1) / np.sqrt(reps)

    lo, se_lo = mean_v(1)
    hi, se_hi = mean_v(16)
    pooled = (se_lo ** 2 + se_hi ** 2) ** 0.5
    assert hi >= lo - 3 * pooled


def test_baselines_act_legally_and_switch_once():
    sset = sampler.sample_batch(6, master_seed=21, filter_policy="drop-impossible",
                                players=1)

    class Auditor(AgentHandle):
        def __init__(self, inner):
            self.inner = inner
            self.white_box = inner.white_box
            self.switches = 0
            self.declared = None

        def seed(self, s):
            self.inner.seed(s)

        def begin(self, init):
            self.declared = set(init.actions)
            self.inner.begin(init)

        def decide(self, obs, state=None):
            action, cost = self.inner.decide(obs, state)
            if action == SWITCH:
                self.switches += 1
            else:
                assert action in self.declared or action == PASS
            assert cost >= 1
            return action, cost

        def episode_end(self, final):
            return self.inner.episode_end(final)

    for make in (lambda: RandomAgent(), lambda: QLearnAgent(), lambda: MctsAgent()):
        for i, (d, _p, _y) in enumerate(sset.games):
            aud = Auditor(make())
            measure.evaluate_two_phase(aud, d, 2000, seed=i)
            assert aud.switches <= 1


def test_parse_agent_spec():
    assert isinstance(parse_agent_spec("random")(), RandomAgent)
    q = parse_agent_spec("qlearn:alpha=0.3,gamma=0.9,eps=0.05,switch=0.4")()
    assert (q.alpha, q.gamma, q.epsilon, q.switch_fraction) == (0.3, 0.9, 0.05, 0.4)
    m = parse_agent_spec("mcts:sims=2,cap=8")()
    assert (m.simulations, m.horizon_cap) == (2, 8)
    with pytest.raises(ValueError):
        parse_agent_spec("qlearn:bogus=1")
    with pytest.raises(ValueError):
        parse_agent_spec("nosuch")
