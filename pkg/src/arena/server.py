"""Live-match WebSocket server.

One session per connection: the client joins, becomes the configured
human side, and from then on the engine advances on a fixed clock
(10 ticks/second by default).  Whatever input the client sent last
inside a tick window is the one applied; none means Idle.  All frames
are JSON text messages:

    client -> server   {"type": "join", "name": ...}
                       {"type": "input", "tick": ..., "action": key}
    server -> client   {"type": "state", "tick", "fighters",
                        "projectiles", "timer", "round_wins", "combo"}
                       {"type": "round_end", "winner", "cause"}
                       {"type": "match_end", "winner", "replay_id"}
                       {"type": "error", "code", "message"}

Completed versus matches are persisted as replay files (the id in
match_end is the filename stem), so served sessions feed straight into
the tactic miner.  Training mode swaps the opponent for a static dummy
and refreezes health and timer every tick; those sessions never end on
their own and are not persisted.
"""

import asyncio
import errno
import json
import os
import random
from contextlib import suppress

from websockets.asyncio.server import serve as _ws_serve
from websockets.exceptions import ConnectionClosed

from .agents import Agent, HumanAgent, make_agent
from .engine import (
    ACT_IDLE, LEFT, RIGHT, _advance, initial_state, parse_action,
    reset_round, round_result,
)
from .match import (
    MAX_ROUNDS, ConfigError, MatchConfig, _decide_tick, _latency_summary,
    derive_seed, settle_result,
)
from .replay import Replay

DEFAULT_TICK_HZ = 10.0


class PortInUse(OSError):
    """The requested port is already bound."""


class ProtocolViolation(ValueError):
    """Client sent something outside the wire protocol."""


class _StaticDummy(Agent):
    """Training-mode opponent: stands there."""

    kind = "static"

    def act(self, state, side, opp_action=None):
        return ACT_IDLE


def _parse_frame(raw) -> dict:
    try:
        data = json.loads(raw)
    except (TypeError, ValueError) as exc:
        raise ProtocolViolation(f"frame is not JSON: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("type"), str):
        raise ProtocolViolation("frame must be an object with a type")
    return data


class MatchServer:
    """Hosts live matches for one MatchConfig; one session per connection."""

    def __init__(self, cfg, port: int, *, training: bool = False,
                 tick_hz: float = DEFAULT_TICK_HZ, replay_dir: str = ".",
                 host: str = "127.0.0.1"):
        self.cfg = cfg if isinstance(cfg, MatchConfig) else MatchConfig.from_dict(cfg)
        humans = [i for i in (LEFT, RIGHT)
                  if self.cfg.agents[i]["kind"] == "human"]
        if len(humans) != 1:
            raise ConfigError("serving needs exactly one human side")
        self.human_side = humans[0]
        self.port = int(port)
        self.host = host
        self.training = bool(training)
        if tick_hz <= 0:
            raise ConfigError("tick_hz must be positive")
        self.tick_hz = float(tick_hz)
        self.replay_dir = replay_dir
        self.replays: list = []  # paths persisted this run
        self._server = None

    async def start(self) -> "MatchServer":
        try:
            self._server = await _ws_serve(self._session, self.host, self.port)
        except OSError as exc:
            if exc.errno == errno.EADDRINUSE:
                raise PortInUse(exc.errno, f"port {self.port} is taken") from exc
            raise
        self.port = self._server.sockets[0].getsockname()[1]
        return self

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None

    async def serve_forever(self) -> None:
        await self._server.serve_forever()

    # --- session ---------------------------------------------------------

    async def _session(self, conn) -> None:
        try:
            await self._expect_join(conn)
            await self._run_live(conn)
        except ProtocolViolation as exc:
            with suppress(ConnectionClosed):
                await conn.send(json.dumps({"type": "error", "code": "protocol",
                                            "message": str(exc)}))
            await conn.close(code=1002)
        except ConnectionClosed:
            pass

    async def _expect_join(self, conn) -> str:
        data = _parse_frame(await conn.recv())
        if data["type"] != "join":
            raise ProtocolViolation("expected a join message first")
        if "name" not in data:
            raise ProtocolViolation("join carries a name")
        return str(data["name"])

    async def _pump_inputs(self, conn, human: HumanAgent) -> None:
        async for raw in conn:
            data = _parse_frame(raw)
            if data["type"] != "input":
                raise ProtocolViolation(
                    f"unexpected {data['type']!r} message mid-match")
            if "tick" not in data or "action" not in data:
                raise ProtocolViolation("input carries tick and action")
            try:
                int(data["tick"])
                action = parse_action(str(data["action"]))
            except (TypeError, ValueError) as exc:
                raise ProtocolViolation(f"bad input: {exc}") from exc
            human.submit(action)

    def _build_agents(self) -> tuple:
        out = []
        for i in (LEFT, RIGHT):
            rng = random.Random(derive_seed(self.cfg.seed, "agent", i))
            if i == self.human_side:
                out.append(HumanAgent(rng))
            elif self.training:
                out.append(_StaticDummy(rng))
            else:
                out.append(make_agent(self.cfg.agents[i], rng))
        return tuple(out)

    def _state_frame(self, gs) -> dict:
        return {
            "type": "state",
            "tick": gs.tick,
            "fighters": [f.to_dict() for f in gs.fighters],
            "projectiles": [p.to_dict() for p in gs.projectiles],
            "timer": gs.timer,
            "round_wins": list(gs.round_wins),
            "combo": [f.combo_hits_taken for f in gs.fighters],
        }

    async def _send(self, conn, frame: dict) -> None:
        await conn.send(json.dumps(frame))

    async def _run_live(self, conn) -> None:
        agents = self._build_agents()
        human = agents[self.human_side]
        pump = asyncio.create_task(self._pump_inputs(conn, human))
        try:
            await self._drive(conn, agents, pump)
        finally:
            pump.cancel()
            with suppress(asyncio.CancelledError, ProtocolViolation,
                          ConnectionClosed):
                await pump

    async def _drive(self, conn, agents, pump) -> None:
        cfg = self.cfg
        gs = initial_state(cfg.characters, cfg.round_length, cfg.seed)
        ticks, rounds_meta = [], []
        latencies = ([], [])
        round_idx = 0
        loop = asyncio.get_running_loop()
        period = 1.0 / self.tick_hz
        deadline = loop.time()
        agents[LEFT].begin_round(LEFT)
        agents[RIGHT].begin_round(RIGHT)
        prev = (ACT_IDLE, ACT_IDLE)
        await self._send(conn, self._state_frame(gs))
        while True:
            if pump.done():
                exc = pump.exception()
                if isinstance(exc, ProtocolViolation):
                    raise exc
                return  # client went away; nothing to settle
            chosen = _decide_tick(agents, gs, prev, latencies)
            ticks.append({"r": round_idx, "t": gs.tick,
                          "a": [chosen[0].key, chosen[1].key]})
            _advance(gs, chosen[0], chosen[1])
            prev = chosen
            if self.training:
                # "rules suspended": no KO, no timeout, forever neutral
                for i in (LEFT, RIGHT):
                    gs.fighters[i].health = cfg.characters[i].max_health
                gs.timer = cfg.round_length
            await self._send(conn, self._state_frame(gs))
            res = round_result(gs)
            if res is not None:
                await self._send(conn, {"type": "round_end",
                                        "winner": res["winner"],
                                        "cause": res["cause"]})
                rounds_meta.append({"winner": res["winner"],
                                    "cause": res["cause"], "ticks": gs.tick})
                if res["winner"] == "left":
                    gs.round_wins[0] += 1
                elif res["winner"] == "right":
                    gs.round_wins[1] += 1
                round_idx += 1
                if (gs.round_wins[0] >= cfg.rounds_to_win
                        or gs.round_wins[1] >= cfg.rounds_to_win
                        or round_idx >= MAX_ROUNDS):
                    break
                gs = reset_round(gs)
                agents[LEFT].begin_round(LEFT)
                agents[RIGHT].begin_round(RIGHT)
                prev = (ACT_IDLE, ACT_IDLE)
            deadline += period
            await asyncio.sleep(max(0.0, deadline - loop.time()))
        result = settle_result(gs, rounds_meta, cfg.rounds_to_win)
        latency = {"left": _latency_summary(latencies[0]),
                   "right": _latency_summary(latencies[1])}
        replay = Replay(config=cfg.to_dict(), ticks=ticks, result=result,
                        latency=latency)
        replay_id = replay.digest[:12]
        os.makedirs(self.replay_dir, exist_ok=True)
        path = os.path.join(self.replay_dir, replay_id + ".jsonl")
        replay.save(path)
        self.replays.append(path)
        await self._send(conn, {"type": "match_end",
                                "winner": result["winner"],
                                "replay_id": replay_id})
        await conn.close()


async def serve_match(cfg, port: int, **kwargs) -> MatchServer:
    """Bind and return a running MatchServer (stop() when done)."""
    return await MatchServer(cfg, port, **kwargs).start()


__all__ = ["DEFAULT_TICK_HZ", "MatchServer", "PortInUse",
           "ProtocolViolation", "serve_match"]
