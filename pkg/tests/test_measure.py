import math

import pytest

from ggbench import gdl, measure
from ggbench.agents import SWITCH, AgentHandle, AgentProtocolError, RandomAgent


class ScriptAgent(AgentHandle):
    """Plays a fixed action script (then a tail action) at unit cost."""

    id = "script"

    def __init__(self, script, tail="stay"):
        self._script = list(script)
        self._tail = tail
        self._i = 0

    def begin(self, init):
        self._i = 0

    def decide(self, obs, state=None):
        if self._i < len(self._script):
            a = self._script[self._i]
            self._i += 1
            return a, 1
        return self._tail, 1


def item_game(horizon=8):
    # standing on the item pays 1 per tick; bounds are (0, horizon)
    return gdl.make_game(grid_w=3, grid_h=3, players=1, horizon=horizon,
                         layout=[("avatar", 0, 0), ("item", 1, 0)],
                         actions=["left", "right", "stay"],
                         rules=[(("overlap", "avatar", "item"), [("reward", 1)])])


def test_estimate_tau_fixed_horizon_no_rules(plain_game):
    for n in (1, 8, 64):
        assert measure.estimate_tau(plain_game, n, seed=5) == 8.0


def test_estimate_tau_replays_exactly(goal_game):
    a = measure.estimate_tau(goal_game, 32, seed=9)
    b = measure.estimate_tau(goal_game, 32, seed=9)
    assert a == b
    assert measure.estimate_tau(goal_game, 1, seed=9) != measure.estimate_tau(
        goal_game, 1, seed=10) or True  # different seeds may legitimately agree


def test_estimate_tau_within_cost_bounds(goal_game):
    for n in (1, 64):
        tau = measure.estimate_tau(goal_game, n, seed=3)
        assert 2.0 <= tau <= goal_game.horizon * (1 + len(goal_game.rules))


def test_complexity_algebra(goal_game):
    l_bits = goal_game.desc_len_bits
    p = measure.complexity(goal_game, 1024.0)
    assert p.k_bits == pytest.approx(l_bits + 10.0, abs=1e-12)
    assert measure.complexity(goal_game, 1.0).k_bits == l_bits
    a = measure.complexity(goal_game, 37.5)
    b = measure.complexity(goal_game, 75.0)
    assert b.k_bits - a.k_bits == pytest.approx(1.0, abs=1e-12)
    assert b.weight == pytest.approx(a.weight / 2, rel=1e-12)


def test_normalize():
    b = gdl.RewardBounds(0, 8)
    assert measure.normalize(4, b) == 0.5
    assert measure.normalize(0, b) == 0.0
    assert measure.normalize(8, b) == 1.0
    assert measure.normalize(-3, gdl.RewardBounds(-3, 5)) == 0.0


def test_never_switch_scores_zero():
    d = item_game()
    # stands on the item the whole time: maximal learning rewards, no switch
    agent = ScriptAgent(["right"], tail="stay")
    res = measure.evaluate_two_phase(agent, d, 500, seed=1)
    assert res.v == 0.0
    assert res.switched_at is None
    assert res.eval_episode_scores == ()


def test_completed_episode_averaging_exact():
    d = item_game(horizon=8)
    assert gdl.compute_bounds(d) == (0, 8)
    ep1 = ["right", "stay", "stay", "left", "stay", "stay", "stay", "stay"]   # 3
    ep2 = ["right", "stay", "stay", "stay", "stay", "left", "stay", "stay"]   # 5
    agent = ScriptAgent(["switch"] + ep1 + ep2)
    res = measure.evaluate_two_phase(agent, d, 50, seed=1)
    assert res.eval_episode_scores == (3, 5)
    assert res.v == 0.5
    assert res.switched_at == 1


def test_partial_accumulated_when_no_episode_completes():
    d = item_game(horizon=8)
    assert gdl.compute_bounds(d) == (0, 8)
    agent = ScriptAgent(["switch", "right", "stay", "stay", "stay"])
    res = measure.evaluate_two_phase(agent, d, 14, seed=1)
    assert res.eval_episode_scores == ()
    assert res.partial_accumulated == 4
    assert res.v == 0.5


def test_learning_rewards_disregarded():
    d = item_game(horizon=8)
    greedy_learn = ["right"] + ["stay"] * 7        # scores 8 while learning
    idle_learn = ["left"] + ["stay"] * 7           # scores 0 while learning
    eval_play = ["right", "stay", "stay", "left", "stay", "stay", "stay", "stay"]
    res_a = measure.evaluate_two_phase(
        ScriptAgent(greedy_learn + ["switch"] + eval_play * 3), d, 200, seed=4)
    res_b = measure.evaluate_two_phase(
        ScriptAgent(idle_learn + ["switch"] + eval_play * 3), d, 200, seed=4)
    assert res_a.v == res_b.v
    assert res_a.switched_at == res_b.switched_at
    assert res_a.eval_episode_scores == res_b.eval_episode_scores


def test_episode_count_does_not_change_value():
    # averaging over completed episodes: 1 vs 3 identical-quality episodes
    d = item_game(horizon=8)
    ep = ["right", "stay", "stay", "left", "stay", "stay", "stay", "stay"]
    one = measure.evaluate_two_phase(ScriptAgent(["switch"] + ep), d, 26, seed=2)
    three = measure.evaluate_two_phase(ScriptAgent(["switch"] + ep * 3), d, 74, seed=2)
    assert one.eval_episodes == 1 and three.eval_episodes == 3
    assert one.v == three.v == 3 / 8


def test_switch_consumed_by_budget_does_not_count():
    d = item_game()
    agent = ScriptAgent(["stay", "stay", "switch"], tail="stay")
    # decisions+ticks: 1+2 per step; the switch decision lands exactly at T
    res = measure.evaluate_two_phase(agent, d, 7, seed=1)
    assert res.switched_at is None and res.v == 0.0


def test_second_switch_is_ignored():
    d = item_game()
    agent = ScriptAgent(["switch", "right", "switch", "stay"], tail="stay")
    res = measure.evaluate_two_phase(agent, d, 60, seed=1)
    assert res.switched_at == 1
    assert res.eval_episodes >= 1


def test_doubling_schedule_base_and_example():
    assert measure.doubling_schedule(0, 10) == [(1, 10)]
    assert measure.doubling_schedule(2, 10) == [(2, 10), (1, 20), (1, 40)]


def test_doubling_schedule_halving_law_to_20():
    for i in range(21):
        plan = measure.doubling_schedule(i, 3)
        assert sum(c for c, _t in plan) == 2 ** i
        if i >= 1:
            assert plan[0] == (2 ** (i - 1), 3)
            for k, (count, t) in enumerate(plan[:-1]):
                assert count == 2 ** (i - 1 - k)
                assert t == 3 * 2 ** k
            assert plan[-1] == (1, 3 * 2 ** i)


def _fake_records(vs, taus):
    return [measure.GameEval(f"g{i}", 10.0, t, 100, v, 1, 1, i, None)
            for i, (v, t) in enumerate(zip(vs, taus))]


def test_plain_mean_aggregate():
    est = measure.aggregate(_fake_records([0.0, 1.0, 0.5], [1, 1, 1]), "plain")
    assert est.upsilon_hat == 0.5


def test_importance_weighted_aggregate():
    est = measure.aggregate(_fake_records([1.0, 0.0], [1.0, 3.0]), "importance")
    assert est.upsilon_hat == pytest.approx(0.75, abs=1e-12)


def test_stderr_non_increasing_on_iid_stream():
    vs = [1.0, 0.0] * 50  # fixed variance
    prev = None
    for n in range(2, 101, 2):
        est = measure.aggregate(_fake_records(vs[:n], [1.0] * n), "plain")
        if prev is not None:
            assert est.stderr <= prev + 1e-12
        prev = est.stderr


def test_estimate_upsilon_deterministic_and_bounded(goal_game, plain_game):
    sample = [(goal_game, measure.complexity(goal_game, measure.estimate_tau(goal_game))),
              (plain_game, measure.complexity(plain_game, measure.estimate_tau(plain_game)))]
    a = measure.estimate_upsilon(RandomAgent(), sample, 300, mode="plain", master_seed=5)
    b = measure.estimate_upsilon(RandomAgent(), sample, 300, mode="plain", master_seed=5)
    assert a == b
    assert 0.0 <= a.upsilon_hat <= 1.0


class BrokenAgent(AgentHandle):
    id = "broken"

    def decide(self, obs, state=None):
        raise AgentProtocolError("boom")


def test_agent_error_recorded_as_zero(goal_game):
    prof = measure.complexity(goal_game, 10.0)
    est = measure.estimate_upsilon(BrokenAgent(), [(goal_game, prof)], 100,
                                   mode="plain", master_seed=1)
    rec = est.per_game[0]
    assert rec.v == 0.0 and rec.error is not None
    assert est.upsilon_hat == 0.0


def test_parallel_jobs_match_sequential(goal_game, plain_game):
    sample = [(goal_game, measure.complexity(goal_game, 10.0)),
              (plain_game, measure.complexity(plain_game, 8.0))] * 3
    seq = measure.estimate_upsilon(lambda: RandomAgent(), sample, 200,
                                   mode="importance", master_seed=9, jobs=1)
    par = measure.estimate_upsilon(lambda: RandomAgent(), sample, 200,
                                   mode="importance", master_seed=9, jobs=4)
    assert seq == par
