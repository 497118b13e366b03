import json
import os
import socket
import sys
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ggbench import gdl, measure, proto
from ggbench.agents import AgentProtocolError

AGENT = os.path.join(os.path.dirname(__file__), "ext_agent.py")


def agent_cmd(mode, side=None):
    parts = [f'"{sys.executable}"', f'"{AGENT}"', mode]
    if side:
        parts.append(f'"{side}"')
    return " ".join(parts)


def stay_game():
    return gdl.make_game(grid_w=3, grid_h=3, players=1, horizon=8,
                         layout=[("avatar", 1, 1), ("item", 1, 1)],
                         actions=["up", "down", "stay"],
                         rules=[(("overlap", "avatar", "item"), [("reward", 1)])])


# ── encoding ──────────────────────────────────────────────────────────

def test_encode_golden_lines():
    assert proto.encode(proto.Pass()) == b'{"type":"pass"}\n'
    assert proto.encode(proto.Switch()) == b'{"type":"switch"}\n'
    assert proto.encode(proto.Act("up")) == b'{"type":"act","action":"up"}\n'
    init = proto.Init(game_id="abc", actions=("up", "stay"), obs_mode="full",
                      grid=(3, 3), players=1, budget_T=100, bounds=(0, 8))
    assert proto.encode(init) == (
        b'{"type":"init","game_id":"abc","actions":["up","stay"],'
        b'"obs_mode":"full","grid":[3,3],"players":1,"budget_T":100,'
        b'"bounds":[0,8]}\n')
    obs = proto.Obs(tick=2, phase="eval", episode=3, cells="A..", reward_delta=-1,
                    done=False, clock_remaining=42)
    assert proto.encode(obs) == (
        b'{"type":"obs","tick":2,"phase":"eval","episode":3,"cells":"A..",'
        b'"reward_delta":-1,"done":false,"clock_remaining":42}\n')


def test_decode_basics():
    assert proto.decode(b'{"type":"switch"}') == proto.Switch()
    assert proto.decode('{"type":"act","action":"up"}') == proto.Act("up")
    with pytest.raises(proto.ProtocolError, match="MISSING_FIELD"):
        proto.decode(b'{"type":"act"}')
    with pytest.raises(proto.ProtocolError, match="UNKNOWN_TYPE"):
        proto.decode(b'{"type":"teleport"}')
    with pytest.raises(proto.ProtocolError, match="BAD_JSON"):
        proto.decode(b'{"type":')
    with pytest.raises(proto.ProtocolError, match="BAD_JSON"):
        proto.decode(b'[1,2,3]')
    err = None
    try:
        proto.decode(b'{"type": !}')
    except proto.ProtocolError as e:
        err = e
    assert err.offset > 0


_messages = st.one_of(
    st.builds(proto.Pass),
    st.builds(proto.Switch),
    st.builds(proto.Act, action=st.text(st.characters(codec="utf-8",
                                                      exclude_characters="\n"),
                                        max_size=12)),
    st.builds(proto.Obs, tick=st.integers(0, 127), phase=st.sampled_from(["learn", "eval"]),
              episode=st.integers(1, 999), cells=st.text(st.sampled_from(".#AO!*G"),
                                                         max_size=64),
              reward_delta=st.integers(-8, 8), done=st.booleans(),
              clock_remaining=st.integers(0, 10 ** 9)),
    st.builds(proto.Init, game_id=st.text(st.sampled_from("0123456789abcdef"),
                                          min_size=1, max_size=12),
              actions=st.lists(st.sampled_from(gdl.ACTIONS), min_size=1,
                               max_size=6, unique=True).map(tuple),
              obs_mode=st.sampled_from(["full", "radius:1", "radius:3"]),
              grid=st.tuples(st.integers(2, 8), st.integers(2, 8)),
              players=st.integers(1, 2), budget_T=st.integers(1, 10 ** 6),
              bounds=st.tuples(st.integers(-140, 0), st.integers(1, 140))),
    st.builds(proto.Result, v=st.floats(0, 1, allow_nan=False),
              switched=st.booleans(), episodes=st.integers(0, 10 ** 4)),
)


@settings(max_examples=300, deadline=None)
@given(_messages)
def test_encode_decode_roundtrip(msg):
    assert proto.decode(proto.encode(msg)) == msg


# ── external agents over stdio ────────────────────────────────────────

def test_external_switching_agent_end_to_end(tmp_path):
    side = tmp_path / "side.json"
    agent = proto.run_external_agent(agent_cmd("switching", side))
    res = measure.evaluate_two_phase(agent, stay_game(), 300, seed=5)
    assert 0.0 <= res.v <= 1.0
    assert res.switched_at is not None
    audit = json.loads(side.read_text())
    # lock-step: the agent answered every observation exactly once and the
    # result message closed the conversation
    assert audit["obs"] == audit["resp"]
    assert audit["result"]["v"] == res.v
    assert audit["result"]["switched"] is True
    assert audit["result"]["episodes"] == res.eval_episodes


def test_external_stay_agent_never_switches():
    agent = proto.run_external_agent(agent_cmd("stay"))
    res = measure.evaluate_two_phase(agent, stay_game(), 120, seed=5)
    assert res.v == 0.0 and res.switched_at is None


def test_timeout_injects_pass_and_terminates():
    agent = proto.run_external_agent(agent_cmd("slow"), wall_ceiling_ms=40)
    res = measure.evaluate_two_phase(agent, stay_game(), 200, seed=5)
    assert res.v == 0.0  # every reply came after the ceiling; passes injected
    assert res.clock_spent <= 200


def test_crash_records_error_flag():
    d = stay_game()
    prof = measure.complexity(d, 16.0)
    factory = lambda: proto.run_external_agent(agent_cmd("crash"))
    est = measure.estimate_upsilon(factory, [(d, prof)], 300, mode="plain",
                                   master_seed=1)
    rec = est.per_game[0]
    assert rec.v == 0.0 and rec.error is not None


def test_unparseable_traffic_is_protocol_error():
    cmd = f'"{sys.executable}" -c "print(\'not json\'); import sys; sys.stdout.flush(); sys.stdin.read()"'
    agent = proto.run_external_agent(cmd)
    with pytest.raises(AgentProtocolError):
        measure.evaluate_two_phase(agent, stay_game(), 100, seed=1)
    agent.close()


def test_tcp_transport():
    server = socket.create_server(("127.0.0.1", 0))
    port = server.getsockname()[1]

    def serve():
        conn, _addr = server.accept()
        rfile = conn.makefile("rb")
        wfile = conn.makefile("wb")
        switched = False
        for line in rfile:
            msg = json.loads(line)
            if msg["type"] == "obs":
                out = {"type": "switch"} if not switched else \
                    {"type": "act", "action": "stay"}
                switched = True
                wfile.write((json.dumps(out) + "\n").encode())
                wfile.flush()
            elif msg["type"] == "result":
                break
        conn.close()

    t = threading.Thread(target=serve, daemon=True)
    t.start()
    agent = proto.run_external_agent(f"tcp:127.0.0.1:{port}")
    res = measure.evaluate_two_phase(agent, stay_game(), 150, seed=2)
    assert res.switched_at is not None
    assert res.v > 0.0
    server.close()


def test_wall_rate_env(monkeypatch):
    monkeypatch.setenv("GGB_RATE", "2.5")
    assert proto.wall_rate() == 2.5
    monkeypatch.delenv("GGB_RATE")
    assert proto.wall_rate() == 1.0
