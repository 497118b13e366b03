"""Agent interface and the built-in baselines.

An agent answers every observation with a declared action, "pass", or the
one-time "switch" that irreversibly starts its evaluation phase.  decide()
also reports the virtual-clock cost of the decision: in-process deterministic
agents charge 1 per decision unless they do engine work themselves (the
search baseline bills its rollouts).
"""

from dataclasses import dataclass
from typing import Optional, Tuple

from . import engine
from .seeds import Rng, xs32

SWITCH = "switch"
PASS = "pass"


class AgentProtocolError(RuntimeError):
    """The agent broke the interaction contract (malformed traffic, crash)."""


@dataclass
class InitInfo:
    game_id: str
    actions: tuple
    obs_mode: str        # "full" or "radius:<r>"
    grid: tuple          # (w, h)
    players: int
    budget: int
    bounds: tuple        # (r_min, r_max)
    deterministic: bool = True


@dataclass
class ObsInfo:
    tick: int
    phase: str           # "learn" | "eval"
    episode: int
    cells: str
    reward_delta: int
    done: bool
    clock_remaining: int


class AgentHandle:
    """Base agent; one instance serves one evaluation at a time."""

    id = "agent"
    white_box = False  # set True to receive the live GameState in decide()

    def seed(self, seed: int) -> None:
        pass

    def begin(self, init: InitInfo) -> None:
        pass

    def decide(self, obs: ObsInfo, state=None) -> Tuple[str, int]:
        raise NotImplementedError

    def episode_end(self, final: ObsInfo) -> Tuple[Optional[str], int]:
        """Episode-boundary notification; may answer with ("switch", cost)."""
        return None, 0

    def finish(self, result) -> None:
        """Called once with the EvalResult after the budget is spent."""


class RandomAgent(AgentHandle):
    """Switches on the first decision, then acts uniformly at random.

    cost_per_decision models slower deliberation at identical policy quality
    (used to study episode-rate effects)."""

    def __init__(self, cost_per_decision=1, agent_id="random"):
        self.id = agent_id
        self._cost = int(cost_per_decision)
        self._rng = Rng(0)
        self._actions = ()
        self._switched = False

    def seed(self, seed):
        self._rng = Rng(seed)

    def begin(self, init):
        self._actions = tuple(init.actions)
        self._switched = False

    def decide(self, obs, state=None):
        if not self._switched:
            self._switched = True
            return SWITCH, self._cost
        return self._actions[self._rng.randint(len(self._actions))], self._cost


class QLearnAgent(AgentHandle):
    """Tabular Q-learning over raw observation strings.

    Learns epsilon-greedily during the learning phase (epsilon=1 degenerates
    to pure random exploration), switches once the spent clock reaches
    switch_fraction of the budget, and exploits greedily thereafter.  Unseen
    values start at the game's maximum score so exploration is driven by
    optimism.
    """

    def __init__(self, alpha=0.2, gamma=0.95, epsilon=0.1, switch_fraction=0.5,
                 agent_id="qlearn"):
        if not (0 < alpha <= 1 and 0 < gamma <= 1 and 0 <= epsilon <= 1):
            raise ValueError("alpha, gamma in (0,1], epsilon in [0,1]")
        if not 0 <= switch_fraction < 1:
            raise ValueError("switch_fraction in [0,1)")
        self.id = agent_id
        self.alpha = alpha
        self.gamma = gamma
        self.epsilon = epsilon
        self.switch_fraction = switch_fraction
        self._rng = Rng(0)

    def seed(self, seed):
        self._rng = Rng(seed)

    def begin(self, init):
        self._actions = tuple(init.actions)
        self._budget = init.budget
        self._q = {}
        self._q0 = float(init.bounds[1])
        self._switched = False
        self._prev = None  # (state, action) awaiting its reward

    def _values(self, s):
        vals = self._q.get(s)
        if vals is None:
            vals = dict.fromkeys(self._actions, self._q0)
            self._q[s] = vals
        return vals

    def _learn(self, reward, next_state, terminal):
        if self._prev is None:
            return
        s, a = self._prev
        target = float(reward)
        if not terminal:
            target += self.gamma * max(self._values(next_state).values())
        vals = self._values(s)
        vals[a] += self.alpha * (target - vals[a])
        self._prev = None

    def decide(self, obs, state=None):
        s = obs.cells
        if obs.phase == "learn":
            self._learn(obs.reward_delta, s, terminal=False)
            spent = self._budget - obs.clock_remaining
            if not self._switched and spent >= self.switch_fraction * self._budget:
                self._switched = True
                self._prev = None
                return SWITCH, 1
        explore = obs.phase == "learn" and self.epsilon > 0 \
            and self._rng.random() < self.epsilon
        if explore:
            a = self._actions[self._rng.randint(len(self._actions))]
        else:
            vals = self._values(s)
            best = max(vals[act] for act in self._actions)
            ties = [act for act in self._actions if vals[act] == best]
            # random tie-break: in states the table never saw (all values at
            # the optimistic init) this degrades to the random policy instead
            # of a fixed-action one
            a = ties[self._rng.randint(len(ties))]
        if obs.phase == "learn":
            self._prev = (s, a)
        return a, 1

    def episode_end(self, final):
        if final.phase == "learn":
            self._learn(final.reward_delta, final.cells, terminal=True)
        self._prev = None
        return None, 0


class MctsAgent(AgentHandle):
    """Flat Monte-Carlo search replaying the true engine on cloned state.

    A white-box skill-ceiling reference: it reads the live environment
    instead of learning it, and every report flags it as such.  Each
    decision bills 1 plus the engine cost of all its rollouts.
    """

    white_box = True

    def __init__(self, simulations=8, horizon_cap=16, switch_fraction=0.0,
                 agent_id="mcts"):
        if simulations < 1:
            raise ValueError("simulations >= 1")
        self.id = agent_id
        self.simulations = int(simulations)
        self.horizon_cap = int(horizon_cap)
        self.switch_fraction = switch_fraction
        self.seat = 1
        self._x = 1

    def seed(self, seed):
        self._x = Rng(seed).randint(2**31 - 2) + 1

    def begin(self, init):
        self._actions = tuple(init.actions)
        self._budget = init.budget
        self._switched = False
        self._cost_per_tick = 2.0  # running estimate, refined from rollouts

    def _fresh_rng(self):
        self._x = xs32(self._x)
        return self._x

    def _effort(self, n_actions, remaining, horizon):
        """Fit (simulations, tick cap) into a slice of the remaining budget so
        search never starves episode completion; sample count is preserved
        ahead of lookahead depth because noisy comparisons need averaging."""
        allowed = max(8.0, remaining / (3.0 * horizon))
        cpt = self._cost_per_tick
        per_sim = n_actions * cpt
        sims = max(1, min(self.simulations, int(allowed / (2 * per_sim))))
        cap = int(allowed / (sims * per_sim))
        return sims, max(1, min(cap, self.horizon_cap))

    def decide(self, obs, state=None):
        if not self._switched:
            spent = self._budget - obs.clock_remaining
            if spent >= self.switch_fraction * self._budget:
                self._switched = True
                return SWITCH, 1
        if state is None:
            raise AgentProtocolError("mcts baseline needs white-box state access")
        legal = state.legal_actions(self.seat) or (PASS,)
        sims, cap = self._effort(len(legal), obs.clock_remaining,
                                 state.desc.horizon)
        cost = 1
        ticks = 0
        # common random numbers: candidate actions share rollout seeds so the
        # comparison noise cancels
        sim_seeds = [self._fresh_rng() for _ in range(sims)]
        horizon = state.desc.horizon
        best_a, best_v = legal[0], None
        for a in legal:
            total = 0.0
            for s in sim_seeds:
                c = state.clone()
                c.rng[0] = s
                aid = -1 if a == PASS else engine.ACTION_IDS[a]
                ret, rc, rt = _rollout(c, aid, self.seat, cap)
                value = float(ret)
                if c.terminal is None and rt > 0:
                    # truncated rollout: extrapolate its own reward flow (step
                    # delta plus ambient rule flow) so short lookaheads stay
                    # comparable with rollouts that reached an ending
                    value += ret / rt * (horizon - c.tick)
                total += value if self.seat == 1 else -value
                cost += rc
                ticks += rt
            mean = total / sims
            if best_v is None or mean > best_v:
                best_a, best_v = a, mean
        if ticks:
            self._cost_per_tick += 0.25 * ((cost - 1) / ticks - self._cost_per_tick)
        return best_a, cost


def _rollout(state, action_id, seat, max_ticks):
    from . import kernels
    return kernels.rollout_from(*state._c.args, state.layers, state.st,
                                state.rng, action_id, seat, max_ticks)


# ── Agent specs (CLI surface) ─────────────────────────────────────────

def parse_agent_spec(spec: str):
    """Turn an agent spec string into a zero-argument factory.

    Specs: random[:cost=N], qlearn[:alpha=..,gamma=..,eps=..,switch=..],
    mcts[:sims=..,cap=..,switch=..], cmd:"<command line>", tcp:host:port.
    """
    name, _, rest = spec.partition(":")
    if name == "cmd":
        from .proto import run_external_agent
        if not rest:
            raise ValueError("cmd: needs a command line")
        return lambda: run_external_agent(rest)
    if name == "tcp":
        from .proto import run_external_agent
        return lambda: run_external_agent(spec)
    params = {}
    if rest:
        for part in rest.split(","):
            k, _, v = part.partition("=")
            if not _:
                raise ValueError(f"bad agent parameter '{part}'")
            params[k.strip()] = v.strip()
    if name == "random":
        cost = int(params.pop("cost", 1))
        _no_extras(name, params)
        return lambda: RandomAgent(cost_per_decision=cost)
    if name == "qlearn":
        kw = dict(alpha=float(params.pop("alpha", 0.2)),
                  gamma=float(params.pop("gamma", 0.95)),
                  epsilon=float(params.pop("eps", 0.1)),
                  switch_fraction=float(params.pop("switch", 0.5)))
        _no_extras(name, params)
        return lambda: QLearnAgent(**kw)
    if name == "mcts":
        kw = dict(simulations=int(params.pop("sims", 4)),
                  horizon_cap=int(params.pop("cap", 128)),
                  switch_fraction=float(params.pop("switch", 0.0)))
        _no_extras(name, params)
        return lambda: MctsAgent(**kw)
    raise ValueError(f"unknown agent '{name}'")


def _no_extras(name, params):
    if params:
        raise ValueError(f"unknown {name} parameters: {', '.join(params)}")
