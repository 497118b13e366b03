import pytest

from ggbench import gdl, measure, sampler
from ggbench.seeds import derive_seed


def test_player_count_frequency_uniform():
    n = 10_000
    twos = sum(1 for seed in range(n) if sampler.sample_game(seed)[0].players == 2)
    p, f = 0.5, twos / n
    sigma = (p * (1 - p) / n) ** 0.5
    assert abs(f - p) < 3 * sigma


def test_pretest_walled_off_goal_is_impossible():
    d = gdl.make_game(grid_w=4, grid_h=4, players=1, horizon=16,
                      layout=[("avatar", 0, 0), ("goal", 3, 3),
                              ("wall", 2, 3), ("wall", 3, 2), ("wall", 2, 2)],
                      actions=["up", "down", "left", "right"],
                      rules=[(("overlap", "avatar", "goal"), [("end", "win")])],
                      win_reward=4)
    p = sampler.pretest(d, seed=3)
    assert p.verdict == "impossible"
    assert p.probe_mean_v == 0.0


def test_pretest_free_points_is_trivial():
    d = gdl.make_game(grid_w=4, grid_h=4, players=1, horizon=8,
                      layout=[("avatar", 1, 1)],
                      actions=["up", "down", "left", "right"],
                      step_delta=1)
    p = sampler.pretest(d, seed=3)
    assert p.verdict == "trivial"
    assert p.random_mean_v > 0.9


def test_pretest_guarded_goal_is_playable():
    d = gdl.make_game(grid_w=4, grid_h=4, players=1, horizon=16,
                      layout=[("avatar", 0, 0), ("goal", 2, 1),
                              ("hazard", 1, 0), ("hazard", 1, 2)],
                      actions=["up", "down", "left", "right"],
                      rules=[(("overlap", "avatar", "goal"), [("end", "win")]),
                             (("overlap", "avatar", "hazard"), [("reward", -1)])],
                      win_reward=4, lose_reward=-2)
    p = sampler.pretest(d, seed=3)
    assert p.verdict == "playable"
    assert p.probe_mean_v > p.random_mean_v


def test_pretest_requires_enough_episodes(goal_game):
    with pytest.raises(ValueError):
        sampler.pretest(goal_game, episodes=4)


def test_sample_batch_distinct_and_deterministic():
    a = sampler.sample_batch(10, master_seed=42)
    b = sampler.sample_batch(10, master_seed=42)
    assert a == b
    texts = [gdl.serialize(d) for d, _p, _y in a.games]
    assert len(set(texts)) == 10


def test_sample_batch_filters():
    dropped = sampler.sample_batch(12, master_seed=7, filter_policy="drop-impossible")
    assert all(y.verdict != "impossible" for _d, _p, y in dropped.games)
    playable = sampler.sample_batch(8, master_seed=7, filter_policy="playable-only")
    assert all(y.verdict == "playable" for _d, _p, y in playable.games)


def test_keep_all_admits_unplayable_games():
    sset = sampler.sample_batch(40, master_seed=3, filter_policy="keep-all")
    verdicts = {y.verdict for _d, _p, y in sset.games}
    assert "playable" in verdicts
    assert verdicts - {"playable"}, "expected some trivial/impossible draws"


def test_players_restriction():
    sset = sampler.sample_batch(6, master_seed=11, players=2)
    assert all(d.players == 2 for d, _p, _y in sset.games)


def test_sampling_exhausted(monkeypatch):
    monkeypatch.setattr(sampler, "_passes", lambda policy, verdict: False)
    with pytest.raises(sampler.SamplingExhausted):
        sampler.sample_batch(1, master_seed=0, filter_policy="playable-only")


def test_profile_audit_recomputes():
    sset = sampler.sample_batch(5, master_seed=19)
    for (d, prof, _y), seed in zip(sset.games, sset.seeds):
        tau = measure.estimate_tau(d, sampler.TAU_ROLLOUTS,
                                   derive_seed(seed, sampler._TAU))
        again = measure.complexity(d, tau)
        assert again.tau == prof.tau
        assert again.k_bits == prof.k_bits


def test_batch_file_roundtrip(tmp_path):
    sset = sampler.sample_batch(6, master_seed=5)
    path = tmp_path / "batch.gdl"
    sampler.write_batch(sset, path, config={"n": 6}, version="test")
    loaded = sampler.read_batch(path)
    assert [gdl.serialize(d) for d, _p, _y in loaded.games] == \
           [gdl.serialize(d) for d, _p, _y in sset.games]
    for (d1, p1, y1), (d2, p2, y2) in zip(sset.games, loaded.games):
        assert d1 == d2
        assert p1.tau == p2.tau and p1.k_bits == p2.k_bits
        assert y1.verdict == y2.verdict
    assert loaded.seeds == sset.seeds
