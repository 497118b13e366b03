"""Wire protocol for external agents: one JSON object per line over the
child process's stdio or a TCP socket.

Harness -> agent: init, obs (one per decision point, done=true at episode
boundaries), result (last message of an evaluation).
Agent -> harness: exactly one of act / switch / pass per obs.

An agent that stays silent past the per-decision wall ceiling has a pass
injected on its behalf and the evaluation continues; wall time is billed to
the virtual clock at GGB_RATE units per millisecond (default 1).
"""

import json
import math
import os
import queue
import shlex
import socket
import subprocess
import threading
import time
from dataclasses import dataclass

from .agents import PASS, SWITCH, AgentHandle, AgentProtocolError

DEFAULT_WALL_CEILING_MS = 1000


class ProtocolError(ValueError):
    def __init__(self, code, message, offset=0):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.offset = offset


@dataclass
class Init:
    game_id: str
    actions: tuple
    obs_mode: str
    grid: tuple
    players: int
    budget_T: int
    bounds: tuple


@dataclass
class Obs:
    tick: int
    phase: str
    episode: int
    cells: str
    reward_delta: int
    done: bool
    clock_remaining: int


@dataclass
class Act:
    action: str


@dataclass
class Switch:
    pass


@dataclass
class Pass:
    pass


@dataclass
class Result:
    v: float
    switched: bool
    episodes: int


_FIELDS = {
    "init": ("game_id", "actions", "obs_mode", "grid", "players", "budget_T", "bounds"),
    "obs": ("tick", "phase", "episode", "cells", "reward_delta", "done", "clock_remaining"),
    "act": ("action",),
    "switch": (),
    "pass": (),
    "result": ("v", "switched", "episodes"),
}
_CLASSES = {"init": Init, "obs": Obs, "act": Act, "switch": Switch,
            "pass": Pass, "result": Result}
_TYPE_OF = {cls: name for name, cls in _CLASSES.items()}
_LIST_FIELDS = {"actions", "grid", "bounds"}


def encode(msg) -> bytes:
    """One newline-terminated JSON line, keys in fixed order, no extra space."""
    name = _TYPE_OF[type(msg)]
    payload = {"type": name}
    for f in _FIELDS[name]:
        v = getattr(msg, f)
        payload[f] = list(v) if f in _LIST_FIELDS else v
    return (json.dumps(payload, separators=(",", ":")) + "\n").encode()


def decode(line):
    """Strict parse of one line (bytes or str) into a message."""
    if isinstance(line, bytes):
        line = line.decode("utf-8", errors="replace")
    try:
        data = json.loads(line)
    except json.JSONDecodeError as e:
        raise ProtocolError("BAD_JSON", e.msg, offset=e.pos) from None
    if not isinstance(data, dict):
        raise ProtocolError("BAD_JSON", "message must be a JSON object")
    name = data.get("type")
    if name not in _CLASSES:
        raise ProtocolError("UNKNOWN_TYPE", f"unknown message type {name!r}")
    kwargs = {}
    for f in _FIELDS[name]:
        if f not in data:
            raise ProtocolError("MISSING_FIELD", f"'{name}' message needs '{f}'")
        v = data[f]
        kwargs[f] = tuple(v) if f in _LIST_FIELDS else v
    if name == "act" and not isinstance(kwargs["action"], str):
        raise ProtocolError("BAD_FIELD", "action must be a string")
    return _CLASSES[name](**kwargs)


def wall_rate():
    """Virtual units charged per wall-clock millisecond for external agents."""
    return float(os.environ.get("GGB_RATE", "1"))


class _LineTransport:
    """Background line reader over a subprocess or socket."""

    def __init__(self, spec):
        self._spec = spec
        self._proc = None
        self._sock = None
        self._wfile = None
        self._queue = queue.Queue()
        self._eof = threading.Event()

    def open(self):
        if self._spec.startswith("tcp:"):
            _tcp, host, port = self._spec.split(":", 2)
            self._sock = socket.create_connection((host, int(port)))
            self._wfile = self._sock.makefile("wb")
            rfile = self._sock.makefile("rb")
        else:
            self._proc = subprocess.Popen(shlex.split(self._spec),
                                          stdin=subprocess.PIPE,
                                          stdout=subprocess.PIPE)
            self._wfile = self._proc.stdin
            rfile = self._proc.stdout
        t = threading.Thread(target=self._read_loop, args=(rfile,), daemon=True)
        t.start()

    def _read_loop(self, rfile):
        try:
            for line in rfile:
                if line.strip():
                    self._queue.put(line)
        except (OSError, ValueError):
            pass
        finally:
            self._eof.set()

    def send(self, data: bytes):
        try:
            self._wfile.write(data)
            self._wfile.flush()
        except (OSError, ValueError, BrokenPipeError) as e:
            raise AgentProtocolError(f"agent connection lost: {e}") from None

    def recv(self, timeout_s):
        """A line, or None on timeout; raises once the peer is gone."""
        deadline = time.monotonic() + timeout_s
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            try:
                return self._queue.get(timeout=min(remaining, 0.05))
            except queue.Empty:
                if self._eof.is_set() and self._queue.empty():
                    raise AgentProtocolError("agent closed its output") from None

    def close(self):
        for f in (self._wfile,):
            try:
                if f:
                    f.close()
            except OSError:
                pass
        if self._sock:
            try:
                self._sock.close()
            except OSError:
                pass
        if self._proc:
            # closed stdin signals EOF; give the peer a moment to exit cleanly
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.terminate()
                try:
                    self._proc.wait(timeout=2)
                except subprocess.TimeoutExpired:
                    self._proc.kill()
        self._proc = self._sock = self._wfile = None


class ExternalAgent(AgentHandle):
    """Adapts a wire-protocol peer to the AgentHandle contract.

    Decisions are charged ceil(wall_ms * rate) virtual units; a silent agent
    gets a pass injected after the ceiling, so evaluation always terminates.
    Runs are labeled nondeterministic.
    """

    white_box = False

    def __init__(self, spec, wall_ceiling_ms=DEFAULT_WALL_CEILING_MS, rate=None):
        self.id = spec
        self._spec = spec
        self._ceiling_ms = wall_ceiling_ms
        self._rate = wall_rate() if rate is None else rate
        self._transport = None
        self._stale = 0
        self._switched = False

    def begin(self, init):
        if self._transport is not None:
            self._transport.close()
        self._transport = _LineTransport(self._spec)
        self._transport.open()
        self._stale = 0
        self._switched = False
        self._transport.send(encode(Init(
            game_id=init.game_id, actions=tuple(init.actions),
            obs_mode=init.obs_mode, grid=tuple(init.grid),
            players=init.players, budget_T=init.budget,
            bounds=tuple(init.bounds))))

    def _exchange(self, obs):
        """Send one obs, wait for the reply; returns (message-or-None, cost)."""
        if self._transport is None:
            raise AgentProtocolError("agent not started")
        self._transport.send(encode(Obs(
            tick=obs.tick, phase=obs.phase, episode=obs.episode,
            cells=obs.cells, reward_delta=obs.reward_delta, done=obs.done,
            clock_remaining=obs.clock_remaining)))
        start = time.monotonic()
        deadline = start + self._ceiling_ms / 1000.0
        reply = None
        while True:
            left = deadline - time.monotonic()
            if left <= 0:
                break
            line = self._transport.recv(left)
            if line is None:
                break
            if self._stale > 0:
                self._stale -= 1  # late answer to an already-passed obs
                continue
            try:
                reply = decode(line)
            except ProtocolError as e:
                raise AgentProtocolError(str(e)) from None
            break
        elapsed_ms = (time.monotonic() - start) * 1000.0
        cost = max(1, math.ceil(elapsed_ms * self._rate))
        if reply is None:
            self._stale += 1
            return None, cost  # pass injected on the agent's behalf
        if not isinstance(reply, (Act, Switch, Pass)):
            raise AgentProtocolError(f"unexpected reply {type(reply).__name__}")
        return reply, cost

    def decide(self, obs, state=None):
        reply, cost = self._exchange(obs)
        if reply is None or isinstance(reply, Pass):
            return PASS, cost
        if isinstance(reply, Switch):
            if self._switched:
                return PASS, cost
            self._switched = True
            return SWITCH, cost
        return reply.action, cost

    def episode_end(self, final):
        reply, cost = self._exchange(final)
        if isinstance(reply, Switch) and not self._switched:
            self._switched = True
            return SWITCH, cost
        return None, cost

    def finish(self, result):
        if self._transport is None:
            return
        try:
            self._transport.send(encode(Result(v=result.v,
                                               switched=result.switched_at is not None,
                                               episodes=result.eval_episodes)))
        except AgentProtocolError:
            pass
        self._transport.close()
        self._transport = None

    def close(self):
        if self._transport is not None:
            self._transport.close()
            self._transport = None


def run_external_agent(spec, wall_ceiling_ms=DEFAULT_WALL_CEILING_MS) -> ExternalAgent:
    """AgentHandle speaking the wire protocol; spec is a command line or
    "tcp:host:port".  The peer is (re)started on each begin()."""
    return ExternalAgent(spec, wall_ceiling_ms)
