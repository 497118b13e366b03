import pytest

from ggbench import gdl

GOAL_GAME_TEXT = ("(game (grid 4 4) (players 1) (obs full) (noise 0) (horizon 16) "
                  "(init (avatar 0 0) (goal 3 3)) (actions up down left right) "
                  "(rules (when (overlap avatar goal) (end win))) (score 0 4 0))")


@pytest.fixture
def goal_game():
    return gdl.parse(GOAL_GAME_TEXT)


@pytest.fixture
def plain_game():
    # no rules: runs to the horizon, cost exactly 1 per tick
    return gdl.make_game(grid_w=3, grid_h=3, players=1, horizon=8,
                         layout=[("avatar", 1, 1)],
                         actions=["up", "down", "left", "right"],
                         step_delta=1, win_reward=0, lose_reward=0)
