"""Deterministic episodic environment built on a GameDescription.

A GameState owns small numpy arrays and advances through kernels.step_tick,
so the interactive path and the batched rollout paths share one set of
semantics.  Identical (description, seed, action sequence) always reproduces
the identical trajectory, scores and cost accounting.
"""

from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

from . import gdl, kernels
from .kernels import (M_NMOVE, M_NOISE16, M_OPP_POLICY, M_OPP_TARGET,
                      S_AX, S_AY, S_OPP, S_OX, S_OY, S_SCORE, S_TERM, S_TICK)
from .seeds import normalize_seed

KIND_IDS = {"avatar": 0, "opp": 1, "wall": 2, "item": 3, "hazard": 4, "goal": 5}
ACTION_IDS = {a: i for i, a in enumerate(gdl.ACTIONS)}
PASS = "pass"
_TERMINALS = (None, "win", "lose", "draw", "horizon")
_POLICY_IDS = {"random": kernels.P_RANDOM, "chase": kernels.P_CHASE,
               "flee": kernels.P_FLEE, "greedy": kernels.P_GREEDY}


class IllegalAction(ValueError):
    pass


class SteppedTerminal(RuntimeError):
    pass


class StepOutcome(NamedTuple):
    reward_delta: int
    cost_units: int
    terminal: Optional[str]
    events: tuple  # indices of rules that fired this tick


class CompiledGame(NamedTuple):
    desc: gdl.GameDescription
    meta: np.ndarray
    act_ids: np.ndarray
    move_ids: np.ndarray
    rc_type: np.ndarray
    rc_a: np.ndarray
    rc_b: np.ndarray
    rc_cmp: np.ndarray
    rc_n: np.ndarray
    re_start: np.ndarray
    re_type: np.ndarray
    re_a: np.ndarray
    re_b: np.ndarray
    layers0: np.ndarray
    st0: np.ndarray

    @property
    def args(self):
        return self[1:13]


@lru_cache(maxsize=512)
def compile_game(desc: gdl.GameDescription) -> CompiledGame:
    """Pack a description into kernel arrays.  The result is cached and shared;
    its arrays are templates and must not be mutated."""
    w, h = desc.grid_w, desc.grid_h
    meta = np.zeros(12, dtype=np.int64)
    meta[kernels.M_W] = w
    meta[kernels.M_H] = h
    meta[kernels.M_PLAYERS] = desc.players
    meta[M_NOISE16] = int(desc.noise * 16)
    meta[kernels.M_HORIZON] = desc.horizon
    meta[kernels.M_STEP] = desc.step_delta
    meta[kernels.M_WINR] = desc.win_reward
    meta[kernels.M_LOSER] = desc.lose_reward
    if desc.opponent is not None:
        meta[M_OPP_POLICY] = _POLICY_IDS[desc.opponent[0]]
        meta[M_OPP_TARGET] = KIND_IDS[desc.opponent[1]] if len(desc.opponent) > 1 else 0

    act_ids = np.array([ACTION_IDS[a] for a in desc.actions], dtype=np.int64)
    move_ids = np.array([i for i in act_ids if i < 5], dtype=np.int64)
    meta[M_NMOVE] = len(move_ids)

    rules = desc.rules
    meta[kernels.M_NRULES] = len(rules)
    rc_type = np.zeros(len(rules), dtype=np.int64)
    rc_a = np.zeros(len(rules), dtype=np.int64)
    rc_b = np.zeros(len(rules), dtype=np.int64)
    rc_cmp = np.zeros(len(rules), dtype=np.int64)
    rc_n = np.zeros(len(rules), dtype=np.int64)
    re_start = np.zeros(len(rules) + 1, dtype=np.int64)
    re_type, re_a, re_b = [], [], []
    for i, rule in enumerate(rules):
        cond = rule.condition
        rc_type[i] = gdl.CONDS.index(cond[0])
        if cond[0] in ("overlap", "adjacent"):
            rc_a[i] = KIND_IDS[cond[1]]
            rc_b[i] = KIND_IDS[cond[2]]
        elif cond[0] == "count":
            rc_a[i] = KIND_IDS[cond[1]]
            rc_cmp[i] = gdl.CMPS.index(cond[2])
            rc_n[i] = cond[3]
        else:
            rc_cmp[i] = gdl.CMPS.index(cond[1])
            rc_n[i] = cond[2]
        for eff in rule.effects:
            re_type.append(gdl.EFFECTS.index(eff[0]))
            if eff[0] == "reward":
                re_a.append(eff[1])
                re_b.append(0)
            elif eff[0] == "remove":
                re_a.append(KIND_IDS[eff[1]])
                re_b.append(0)
            elif eff[0] in ("teleport", "spawn"):
                re_a.append(KIND_IDS[eff[1]])
                re_b.append(gdl.MODES.index(eff[2]))
            else:
                re_a.append(gdl.RESULTS.index(eff[1]))
                re_b.append(0)
        re_start[i + 1] = len(re_type)

    layers0 = np.zeros((4, h, w), dtype=np.uint8)
    st0 = np.zeros(8, dtype=np.int64)
    st0[S_OX] = st0[S_OY] = -1
    for p in desc.layout:
        kid = KIND_IDS[p.piece]
        if kid == 0:
            st0[S_AX], st0[S_AY] = p.x, p.y
        elif kid == 1:
            st0[S_OX], st0[S_OY] = p.x, p.y
            st0[S_OPP] = 1
        else:
            layers0[kid - 2, p.y, p.x] = 1

    return CompiledGame(desc, meta, act_ids, move_ids, rc_type, rc_a, rc_b,
                        rc_cmp, rc_n, re_start,
                        np.array(re_type, dtype=np.int64),
                        np.array(re_a, dtype=np.int64),
                        np.array(re_b, dtype=np.int64),
                        layers0, st0)


class GameState:
    """Single-owner mutable episode state; clone() for speculative search."""

    __slots__ = ("desc", "_c", "layers", "st", "rng")

    def __init__(self, desc, compiled, layers, st, rng):
        self.desc = desc
        self._c = compiled
        self.layers = layers
        self.st = st
        self.rng = rng

    @property
    def tick(self):
        return int(self.st[S_TICK])

    @property
    def score(self):
        return int(self.st[S_SCORE])

    @property
    def terminal(self):
        return _TERMINALS[int(self.st[S_TERM])]

    def clone(self):
        return GameState(self.desc, self._c, self.layers.copy(),
                         self.st.copy(), self.rng.copy())

    def step(self, action, opp_action=None) -> StepOutcome:
        """Advance one tick.  `action` moves the avatar; `opp_action` is the
        second player's action in two-player games (None means pass)."""
        if self.st[S_TERM] != 0:
            raise SteppedTerminal("episode already ended")
        aid = self._action_id(action)
        oid = -1
        if opp_action is not None:
            if self.desc.players != 2:
                raise IllegalAction("opp_action given but game is single-player")
            oid = self._action_id(opp_action)
        r, c, fired = kernels.step_tick(*self._c.args, self.layers, self.st,
                                        self.rng, aid, oid)
        events = tuple(i for i in range(len(self.desc.rules)) if fired >> i & 1)
        return StepOutcome(int(r), int(c), self.terminal, events)

    def _action_id(self, action):
        if action == PASS:
            return -1
        if action not in self.desc.actions:
            raise IllegalAction(f"action '{action}' not declared")
        return ACTION_IDS[action]

    def observe(self, player=1) -> str:
        """Row-major glyph string; radius mode windows on the player's piece."""
        desc = self.desc
        if desc.obs_mode == "full":
            return "".join(self._glyph(x, y)
                           for y in range(desc.grid_h) for x in range(desc.grid_w))
        r = desc.obs_radius
        if player == 2:
            cx, cy = int(self.st[S_OX]), int(self.st[S_OY])
        else:
            cx, cy = int(self.st[S_AX]), int(self.st[S_AY])
        out = []
        for y in range(cy - r, cy + r + 1):
            for x in range(cx - r, cx + r + 1):
                if 0 <= x < desc.grid_w and 0 <= y < desc.grid_h:
                    out.append(self._glyph(x, y))
                else:
                    out.append("#")
        return "".join(out)

    def _glyph(self, x, y):
        st, layers = self.st, self.layers
        if st[S_AX] == x and st[S_AY] == y:
            return "A"
        if st[S_OPP] != 0 and st[S_OX] == x and st[S_OY] == y:
            return "O"
        if layers[2, y, x]:
            return "!"
        if layers[1, y, x]:
            return "*"
        if layers[3, y, x]:
            return "G"
        if layers[0, y, x]:
            return "#"
        return "."

    def legal_actions(self, player=1) -> tuple:
        """Declared actions; place only while the mover's cell is unmarked."""
        if self.st[S_TERM] != 0:
            return ()
        acts = self.desc.actions
        if "place" not in acts:
            return acts
        if player == 2:
            px, py, li = int(self.st[S_OX]), int(self.st[S_OY]), 2
        else:
            px, py, li = int(self.st[S_AX]), int(self.st[S_AY]), 1
        if self.layers[li, py, px]:
            return tuple(a for a in acts if a != "place")
        return acts


def new_episode(desc: gdl.GameDescription, seed: int) -> GameState:
    """Fresh episode at tick 0 with the layout instantiated and score 0."""
    c = compile_game(desc)
    rng = np.array([kernels.seed_state(normalize_seed(seed))], dtype=np.int64)
    return GameState(desc, c, c.layers0.copy(), c.st0.copy(), rng)


def opponent_action(state: GameState, policy=None) -> str:
    """Scripted move for the opp piece under `policy` (default: the game's own).
    Random policies consume the state's RNG."""
    if state.st[S_OPP] == 0:
        raise ValueError("no opp piece on the board")
    if policy is None:
        policy = state.desc.opponent
    if policy is None:
        raise ValueError("no opponent policy declared or given")
    meta = state._c.meta.copy()
    meta[M_OPP_POLICY] = _POLICY_IDS[policy[0]]
    meta[M_OPP_TARGET] = KIND_IDS[policy[1]] if len(policy) > 1 else 0
    aid = kernels.opp_policy_action(meta, state.layers, state.st, state.rng)
    return gdl.ACTIONS[int(aid)]
