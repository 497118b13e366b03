"""Independent oracles for test use only.

expected_random_score enumerates the full game tree with exact Fraction
probabilities (memoized on state snapshots), stepping a noise-free twin of
the game and handling action noise analytically.  It is deliberately slow
and simple; production code never calls it.
"""

import dataclasses
from fractions import Fraction

from ggbench import engine, gdl


def _has_randomness(desc):
    if desc.opponent is not None and desc.opponent[0] == "random":
        return True
    for rule in desc.rules:
        for eff in rule.effects:
            if eff[0] in ("spawn", "teleport") and eff[2] == "random":
                return True
    return False


def _snapshot(state):
    return (state.layers.tobytes(), tuple(int(v) for v in state.st))


def expected_random_score(desc) -> Fraction:
    """Exact expected episode score of the uniform-random agent."""
    if desc.players != 1:
        raise ValueError("oracle supports single-player games")
    if _has_randomness(desc):
        raise ValueError("oracle requires deterministic dynamics (noise aside)")
    noise = desc.noise
    det = dataclasses.replace(desc, noise=Fraction(0))
    actions = det.actions
    moves = [a for a in actions if a in gdl.MOVE_ACTIONS]
    p_choice = Fraction(1, len(actions))

    def effective(chosen):
        if noise == 0 or chosen not in gdl.MOVE_ACTIONS or not moves:
            return [(chosen, Fraction(1))]
        out = [(chosen, 1 - noise)]
        out.extend((m, noise / len(moves)) for m in moves)
        return out

    memo = {}

    def future(state):
        if state.terminal is not None:
            return Fraction(0)
        key = _snapshot(state)
        hit = memo.get(key)
        if hit is not None:
            return hit
        total = Fraction(0)
        for chosen in actions:
            for eff_action, p_eff in effective(chosen):
                child = state.clone()
                out = child.step(eff_action)
                total += p_choice * p_eff * (out.reward_delta + future(child))
        memo[key] = total
        return total

    return future(engine.new_episode(det, seed=0))
