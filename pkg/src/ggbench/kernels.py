"""Hot simulation loops: one tick, whole episodes, batched rollouts, probes.

Everything below compiles under numba's nopython mode and also runs as plain
Python (set GGB_NUMBA=0 to pick the fallback; useful where numba is
unavailable and for cross-checking the compiled path).  The two paths are
bit-identical because the RNG and all state live in explicit int64/uint8
arrays and no arithmetic leaves the int64-safe range.

Layout of the packed arrays (built by engine.compile_game):

  meta  int64[12]: w, h, players, noise16, horizon, step_delta, win_reward,
                   lose_reward, opp_policy, opp_target, n_rules, n_move
  st    int64[8]:  ax, ay, ox, oy, opp_alive, tick, score, terminal
  layers uint8[4, h, w]: wall, item, hazard, goal occupancy
  rng   int64[1]:  xorshift32 state

Piece kind ids: 0 avatar, 1 opp, 2 wall, 3 item, 4 hazard, 5 goal.
Action ids: 0 up, 1 down, 2 left, 3 right, 4 stay, 5 place, -1 pass.
Terminal codes: 0 running, 1 win, 2 lose, 3 draw, 4 horizon.
"""

import os
import warnings

import numpy as np

from .seeds import MASK32

# meta indices
M_W, M_H, M_PLAYERS, M_NOISE16, M_HORIZON, M_STEP, M_WINR, M_LOSER = range(8)
M_OPP_POLICY, M_OPP_TARGET, M_NRULES, M_NMOVE = 8, 9, 10, 11
# st indices
S_AX, S_AY, S_OX, S_OY, S_OPP, S_TICK, S_SCORE, S_TERM = range(8)
# opponent policy codes
P_NONE, P_RANDOM, P_CHASE, P_FLEE, P_GREEDY = range(5)

_DX = np.array([0, 0, -1, 1, 0, 0], dtype=np.int64)
_DY = np.array([-1, 1, 0, 0, 0, 0], dtype=np.int64)


def _want_numba():
    flag = os.environ.get("GGB_NUMBA", "1")
    return flag not in ("0", "false", "no")


if _want_numba():
    try:
        from numba import njit as _njit

        def jit(fn):
            return _njit(cache=True, nogil=True)(fn)

        USING_NUMBA = True
    except ImportError:  # pragma: no cover
        warnings.warn("numba unavailable; running pure-Python kernels")

        def jit(fn):
            return fn

        USING_NUMBA = False
else:
    def jit(fn):
        return fn

    USING_NUMBA = False


@jit
def _mix32(h):
    h = (h ^ (h >> 16)) & MASK32
    h = (h * 0x45D9F3B) & MASK32
    h = (h ^ (h >> 16)) & MASK32
    h = (h * 0x45D9F3B) & MASK32
    h = (h ^ (h >> 16)) & MASK32
    return h


@jit
def seed_state(seed):
    """Fold a 62-bit seed into a nonzero xorshift32 state."""
    lo = seed & MASK32
    hi = (seed >> 32) & MASK32
    h = _mix32((lo ^ ((hi * 0x9E3779B1) & MASK32)) & MASK32)
    if h == 0:
        h = 0x6A09E667
    return h


@jit
def _rand(rng):
    x = rng[0]
    x ^= (x << 13) & MASK32
    x ^= x >> 17
    x ^= (x << 5) & MASK32
    rng[0] = x
    return x


@jit
def _legal_move_dest(meta, layers, x, y, a):
    """Destination of move id a from (x, y); (-1, -1) if blocked/off-grid."""
    nx = x + _DX[a]
    ny = y + _DY[a]
    if nx < 0 or ny < 0 or nx >= meta[M_W] or ny >= meta[M_H]:
        return -1, -1
    if a != 4 and layers[0, ny, nx] != 0:
        return -1, -1
    return nx, ny


@jit
def _apply_move(meta, layers, st, who, action):
    """Move or place for avatar (who=0) / opp (who=1); blocked moves no-op."""
    if action < 0:
        return
    if who == 0:
        px, py = st[S_AX], st[S_AY]
    else:
        px, py = st[S_OX], st[S_OY]
    if action < 4:
        nx, ny = _legal_move_dest(meta, layers, px, py, action)
        if nx >= 0:
            if who == 0:
                st[S_AX], st[S_AY] = nx, ny
            else:
                st[S_OX], st[S_OY] = nx, ny
    elif action == 5:
        li = 1 if who == 0 else 2  # avatar marks items, second player hazards
        if layers[li, py, px] == 0:
            layers[li, py, px] = 1


@jit
def _noisy(meta, move_ids, rng, action):
    """Replace a movement action by a random declared move with prob noise/16."""
    if action < 0 or action > 4 or meta[M_NOISE16] == 0 or meta[M_NMOVE] == 0:
        return action
    if _rand(rng) % 16 < meta[M_NOISE16]:
        return move_ids[_rand(rng) % meta[M_NMOVE]]
    return action


@jit
def _nearest_of_kind(meta, layers, st, kind, fx, fy):
    """Position of the kind instance nearest (fx, fy); (-1,-1) if none."""
    if kind == 0:
        return st[S_AX], st[S_AY]
    if kind == 1:
        if st[S_OPP] != 0:
            return st[S_OX], st[S_OY]
        return -1, -1
    li = kind - 2
    bx, by, bd = -1, -1, 1 << 30
    for y in range(meta[M_H]):
        for x in range(meta[M_W]):
            if layers[li, y, x] != 0:
                d = abs(x - fx) + abs(y - fy)
                if d < bd:
                    bx, by, bd = x, y, d
    return bx, by


@jit
def opp_policy_action(meta, layers, st, rng):
    """Scripted opponent move (action id); stay when no better option."""
    policy = meta[M_OPP_POLICY]
    ox, oy = st[S_OX], st[S_OY]
    if policy == P_RANDOM:
        k = 0
        for a in range(5):
            nx, _ny = _legal_move_dest(meta, layers, ox, oy, a)
            if nx >= 0:
                k += 1
        pick = _rand(rng) % k
        for a in range(5):
            nx, _ny = _legal_move_dest(meta, layers, ox, oy, a)
            if nx >= 0:
                if pick == 0:
                    return a
                pick -= 1
        return 4
    tx, ty = _nearest_of_kind(meta, layers, st, meta[M_OPP_TARGET], ox, oy)
    if tx < 0:
        return 4
    best_a = 4
    best_d = -1
    for a in range(5):
        nx, ny = _legal_move_dest(meta, layers, ox, oy, a)
        if nx < 0:
            continue
        d = abs(nx - tx) + abs(ny - ty)
        if policy == P_FLEE:
            better = d > best_d
        else:
            better = best_d < 0 or d < best_d
        if better:
            best_a, best_d = a, d
    return best_a


@jit
def _kind_count(meta, layers, st, kind):
    if kind == 0:
        return 1
    if kind == 1:
        return st[S_OPP]
    li = kind - 2
    n = 0
    for y in range(meta[M_H]):
        for x in range(meta[M_W]):
            if layers[li, y, x] != 0:
                n += 1
    return n


@jit
def _overlap(meta, layers, st, a, b):
    if a == b:
        return False  # same-kind instances never share a cell
    if a > b:
        a, b = b, a
    if a == 0 and b == 1:
        return st[S_OPP] != 0 and st[S_AX] == st[S_OX] and st[S_AY] == st[S_OY]
    if a == 0:
        return layers[b - 2, st[S_AY], st[S_AX]] != 0
    if a == 1:
        return st[S_OPP] != 0 and layers[b - 2, st[S_OY], st[S_OX]] != 0
    la, lb = a - 2, b - 2
    for y in range(meta[M_H]):
        for x in range(meta[M_W]):
            if layers[la, y, x] != 0 and layers[lb, y, x] != 0:
                return True
    return False


@jit
def _layer_adjacent_to(meta, layers, li, x, y):
    for a in range(4):
        nx = x + _DX[a]
        ny = y + _DY[a]
        if 0 <= nx < meta[M_W] and 0 <= ny < meta[M_H] and layers[li, ny, nx] != 0:
            return True
    return False


@jit
def _adjacent(meta, layers, st, a, b):
    if a > b:
        a, b = b, a
    if a == 0 and b == 0:
        return False
    if a == 1 and b == 1:
        return False
    if a == 0 and b == 1:
        return st[S_OPP] != 0 and abs(st[S_AX] - st[S_OX]) + abs(st[S_AY] - st[S_OY]) == 1
    if a == 0:
        return _layer_adjacent_to(meta, layers, b - 2, st[S_AX], st[S_AY])
    if a == 1:
        return st[S_OPP] != 0 and _layer_adjacent_to(meta, layers, b - 2, st[S_OX], st[S_OY])
    la, lb = a - 2, b - 2
    for y in range(meta[M_H]):
        for x in range(meta[M_W]):
            if layers[la, y, x] != 0 and _layer_adjacent_to(meta, layers, lb, x, y):
                return True
    return False


@jit
def _cmp_holds(lhs, cmp_id, rhs):
    if cmp_id == 0:
        return lhs <= rhs
    if cmp_id == 1:
        return lhs == rhs
    return lhs >= rhs


@jit
def _cond_holds(meta, layers, st, ctype, ca, cb, ccmp, cn):
    if ctype == 0:
        return _overlap(meta, layers, st, ca, cb)
    if ctype == 1:
        return _adjacent(meta, layers, st, ca, cb)
    if ctype == 2:
        return _cmp_holds(_kind_count(meta, layers, st, ca), ccmp, cn)
    return _cmp_holds(st[S_TICK], ccmp, cn)


@jit
def _spawn(meta, layers, rng, kind, mode):
    li = kind - 2
    if mode == 1:  # corner
        for ci in range(4):
            cx = 0 if ci == 0 or ci == 2 else meta[M_W] - 1
            cy = 0 if ci < 2 else meta[M_H] - 1
            if layers[li, cy, cx] == 0:
                layers[li, cy, cx] = 1
                return
        return
    free = 0
    for y in range(meta[M_H]):
        for x in range(meta[M_W]):
            if layers[li, y, x] == 0:
                free += 1
    if free == 0:
        return
    pick = _rand(rng) % free
    for y in range(meta[M_H]):
        for x in range(meta[M_W]):
            if layers[li, y, x] == 0:
                if pick == 0:
                    layers[li, y, x] = 1
                    return
                pick -= 1


@jit
def _relocate_cell(meta, layers, rng, li, mode, ox, oy):
    """New cell for one relocated layer instance (its old cell is cleared)."""
    if mode == 1:
        for ci in range(4):
            cx = 0 if ci == 0 or ci == 2 else meta[M_W] - 1
            cy = 0 if ci < 2 else meta[M_H] - 1
            if layers[li, cy, cx] == 0:
                return cx, cy
        return ox, oy
    free = 0
    for y in range(meta[M_H]):
        for x in range(meta[M_W]):
            if layers[li, y, x] == 0:
                free += 1
    pick = _rand(rng) % free
    for y in range(meta[M_H]):
        for x in range(meta[M_W]):
            if layers[li, y, x] == 0:
                if pick == 0:
                    return x, y
                pick -= 1
    return ox, oy


@jit
def _teleport(meta, layers, st, rng, kind, mode):
    if kind == 0 or kind == 1:
        if kind == 1 and st[S_OPP] == 0:
            return
        if mode == 1:
            nx, ny = 0, 0
        else:
            cell = _rand(rng) % (meta[M_W] * meta[M_H])
            nx, ny = cell % meta[M_W], cell // meta[M_W]
        if kind == 0:
            st[S_AX], st[S_AY] = nx, ny
        else:
            st[S_OX], st[S_OY] = nx, ny
        return
    li = kind - 2
    n = 0
    cells = np.empty(64, dtype=np.int64)
    for y in range(meta[M_H]):
        for x in range(meta[M_W]):
            if layers[li, y, x] != 0:
                cells[n] = y * meta[M_W] + x
                n += 1
    for i in range(n):
        ox = cells[i] % meta[M_W]
        oy = cells[i] // meta[M_W]
        layers[li, oy, ox] = 0
        nx, ny = _relocate_cell(meta, layers, rng, li, mode, ox, oy)
        layers[li, ny, nx] = 1


@jit
def step_tick(meta, act_ids, move_ids,
              rc_type, rc_a, rc_b, rc_cmp, rc_n,
              re_start, re_type, re_a, re_b,
              layers, st, rng, action, opp_action):
    """Advance one tick.  Returns (reward_delta, cost_units, fired_rule_mask).

    Resolution order: avatar move (with noise), opponent move (live second
    player with noise, or scripted policy without), rules in authored order
    (each at most once, evaluation stops once the episode ends), per-tick
    step delta, then terminal bonus and horizon check.  cost_units is
    1 + the number of rule conditions evaluated.
    """
    score0 = st[S_SCORE]
    cost = 1

    _apply_move(meta, layers, st, 0, _noisy(meta, move_ids, rng, action))
    if st[S_OPP] != 0:
        if meta[M_PLAYERS] == 2:
            _apply_move(meta, layers, st, 1, _noisy(meta, move_ids, rng, opp_action))
        elif meta[M_OPP_POLICY] != P_NONE:
            _apply_move(meta, layers, st, 1, opp_policy_action(meta, layers, st, rng))

    fired = 0
    for r in range(meta[M_NRULES]):
        if st[S_TERM] != 0:
            break
        cost += 1
        if not _cond_holds(meta, layers, st, rc_type[r], rc_a[r], rc_b[r],
                           rc_cmp[r], rc_n[r]):
            continue
        fired |= 1 << r
        for e in range(re_start[r], re_start[r + 1]):
            et = re_type[e]
            if et == 0:
                st[S_SCORE] += re_a[e]
            elif et == 1:
                li = re_a[e] - 2
                for y in range(meta[M_H]):
                    for x in range(meta[M_W]):
                        layers[li, y, x] = 0
            elif et == 2:
                _teleport(meta, layers, st, rng, re_a[e], re_b[e])
            elif et == 3:
                _spawn(meta, layers, rng, re_a[e], re_b[e])
            else:
                if st[S_TERM] == 0:
                    st[S_TERM] = re_a[e] + 1

    st[S_SCORE] += meta[M_STEP]
    if st[S_TERM] == 1:
        st[S_SCORE] += meta[M_WINR]
    elif st[S_TERM] == 2:
        st[S_SCORE] += meta[M_LOSER]
    st[S_TICK] += 1
    if st[S_TERM] == 0 and st[S_TICK] >= meta[M_HORIZON]:
        st[S_TERM] = 4
    return st[S_SCORE] - score0, cost, fired


@jit
def run_episode_random(meta, act_ids, move_ids,
                       rc_type, rc_a, rc_b, rc_cmp, rc_n,
                       re_start, re_type, re_a, re_b,
                       layers, st, rng):
    """Play one episode with uniform-random declared actions on every seat."""
    n_act = len(act_ids)
    total_cost = 0
    while st[S_TERM] == 0:
        a = act_ids[_rand(rng) % n_act]
        oa = -1
        if meta[M_PLAYERS] == 2:
            oa = act_ids[_rand(rng) % n_act]
        _r, c, _f = step_tick(meta, act_ids, move_ids, rc_type, rc_a, rc_b,
                              rc_cmp, rc_n, re_start, re_type, re_a, re_b,
                              layers, st, rng, a, oa)
        total_cost += c
    return st[S_SCORE], total_cost


@jit
def run_random_batch(meta, act_ids, move_ids,
                     rc_type, rc_a, rc_b, rc_cmp, rc_n,
                     re_start, re_type, re_a, re_b,
                     layers0, st0, seed0, n):
    """Random-agent episodes seeded seed0..seed0+n-1; per-episode scores/costs."""
    scores = np.empty(n, dtype=np.int64)
    costs = np.empty(n, dtype=np.int64)
    rng = np.empty(1, dtype=np.int64)
    for ep in range(n):
        layers = layers0.copy()
        st = st0.copy()
        rng[0] = seed_state(seed0 + ep)
        s, c = run_episode_random(meta, act_ids, move_ids, rc_type, rc_a, rc_b,
                                  rc_cmp, rc_n, re_start, re_type, re_a, re_b,
                                  layers, st, rng)
        scores[ep] = s
        costs[ep] = c
    return scores, costs


@jit
def _probe_pick(meta, act_ids, move_ids,
                rc_type, rc_a, rc_b, rc_cmp, rc_n,
                re_start, re_type, re_a, re_b,
                layers, st, rng, depth):
    """Best first action by enumerating all depth-long action sequences.

    Simulations run on copies with a cloned RNG (common random numbers per
    candidate); ties keep the earliest declared action.
    """
    n_act = len(act_ids)
    n_seq = 1
    for _ in range(depth - 1):
        n_seq *= n_act
    best_a = 0
    best_v = -(1 << 60)
    for ai in range(n_act):
        a_val = -(1 << 60)
        for s in range(n_seq):
            ly = layers.copy()
            sd = st.copy()
            rg = rng.copy()
            oa = -1
            if meta[M_PLAYERS] == 2:
                oa = act_ids[_rand(rg) % n_act]
            acc, _c, _f = step_tick(meta, act_ids, move_ids, rc_type, rc_a, rc_b,
                                    rc_cmp, rc_n, re_start, re_type, re_a, re_b,
                                    ly, sd, rg, act_ids[ai], oa)
            digits = s
            for _d in range(depth - 1):
                if sd[S_TERM] != 0:
                    break
                nxt = act_ids[digits % n_act]
                digits //= n_act
                oa = -1
                if meta[M_PLAYERS] == 2:
                    oa = act_ids[_rand(rg) % n_act]
                r2, _c2, _f2 = step_tick(meta, act_ids, move_ids, rc_type, rc_a,
                                         rc_b, rc_cmp, rc_n, re_start, re_type,
                                         re_a, re_b, ly, sd, rg, nxt, oa)
                acc += r2
            if acc > a_val:
                a_val = acc
        if a_val > best_v:
            best_v = a_val
            best_a = ai
    return act_ids[best_a]


@jit
def probe_batch(meta, act_ids, move_ids,
                rc_type, rc_a, rc_b, rc_cmp, rc_n,
                re_start, re_type, re_a, re_b,
                layers0, st0, seed0, n, depth):
    """Greedy lookahead episodes seeded seed0..seed0+n-1; per-episode scores."""
    n_act = len(act_ids)
    scores = np.empty(n, dtype=np.int64)
    rng = np.empty(1, dtype=np.int64)
    for ep in range(n):
        layers = layers0.copy()
        st = st0.copy()
        rng[0] = seed_state(seed0 + ep)
        while st[S_TERM] == 0:
            a = _probe_pick(meta, act_ids, move_ids, rc_type, rc_a, rc_b, rc_cmp,
                            rc_n, re_start, re_type, re_a, re_b, layers, st, rng,
                            depth)
            oa = -1
            if meta[M_PLAYERS] == 2:
                oa = act_ids[_rand(rng) % n_act]
            step_tick(meta, act_ids, move_ids, rc_type, rc_a, rc_b, rc_cmp, rc_n,
                      re_start, re_type, re_a, re_b, layers, st, rng, a, oa)
        scores[ep] = st[S_SCORE]
    return scores


@jit
def rollout_from(meta, act_ids, move_ids,
                 rc_type, rc_a, rc_b, rc_cmp, rc_n,
                 re_start, re_type, re_a, re_b,
                 layers, st, rng, first_action, seat, max_ticks):
    """Force one action for `seat` then play uniformly random until the episode
    ends or max_ticks elapse.  Mutates the given state; returns the summed
    avatar-centric reward, the engine cost consumed, and the ticks simulated."""
    n_act = len(act_ids)
    ret = 0
    cost = 0
    first = True
    start = st[S_TICK]
    while st[S_TERM] == 0 and st[S_TICK] - start < max_ticks:
        a = act_ids[_rand(rng) % n_act]
        oa = -1
        if meta[M_PLAYERS] == 2:
            oa = act_ids[_rand(rng) % n_act]
        if first:
            if seat == 1:
                a = first_action
            else:
                oa = first_action
            first = False
        r, c, _f = step_tick(meta, act_ids, move_ids, rc_type, rc_a, rc_b, rc_cmp,
                             rc_n, re_start, re_type, re_a, re_b, layers, st, rng,
                             a, oa)
        ret += r
        cost += c
    return ret, cost, st[S_TICK] - start
