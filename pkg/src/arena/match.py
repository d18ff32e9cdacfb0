"""Best-of-three match runner.

The loop owns all mediation between agents and the engine: forced idle
while a fighter is committed, same-tick intent feeds for input readers
(readers facing each other fall back to the previous tick), grounding
of facing-relative actions, and an idle substitution for anything
illegal.  Every tick's settled action pair lands in the replay, so a
replay is exactly what the engine consumed.
"""

import hashlib
import os
import random
import time
from statistics import fmean
from typing import Sequence

from . import data_path
from .agents import AGENT_KINDS, make_agent
from .engine import (
    ACT_IDLE, LEFT, RIGHT, ROUND_LENGTH, CharacterSpec, _advance,
    ground_action, initial_state, legal_actions, reset_round, round_result,
)
from .replay import Replay

MAX_ROUNDS = 5  # drawn rounds are replayed; a match never exceeds this


class ConfigError(ValueError):
    """Match configuration is invalid."""


def resolve_character(spec) -> CharacterSpec:
    """Accept a CharacterSpec, a dict, a file path, or a bundled name."""
    if isinstance(spec, CharacterSpec):
        return spec
    if isinstance(spec, dict):
        return CharacterSpec.from_dict(spec)
    if isinstance(spec, str):
        if os.path.exists(spec):
            return CharacterSpec.load(spec)
        bundled = data_path(spec + ".json")
        if os.path.exists(bundled):
            return CharacterSpec.load(bundled)
        raise ConfigError(f"unknown character: {spec!r}")
    raise ConfigError(f"cannot resolve character from {type(spec).__name__}")


def _agent_spec(spec) -> dict:
    if isinstance(spec, str):
        spec = {"kind": spec}
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("agent spec must be a kind string or {kind, parameters}")
    if spec["kind"] not in AGENT_KINDS:
        raise ConfigError(f"unknown agent kind: {spec['kind']!r}")
    # A misspelled key here would otherwise vanish silently and the agent
    # would run on defaults; refuse anything but the two schema fields.
    extra = set(spec) - {"kind", "parameters"}
    if extra:
        raise ConfigError(f"unknown agent spec fields: {sorted(extra)}")
    out = {"kind": spec["kind"]}
    params = spec.get("parameters")
    if params:
        out["parameters"] = dict(params)
    return out


class MatchConfig:
    """Everything a match needs; serializes into the replay header."""

    __slots__ = ("characters", "agents", "round_length", "rounds_to_win",
                 "seed")

    def __init__(self, characters, agents, round_length: int = ROUND_LENGTH,
                 rounds_to_win: int = 2, seed: int = 0):
        if len(characters) != 2 or len(agents) != 2:
            raise ConfigError("a match takes exactly two characters and two agents")
        self.characters = tuple(resolve_character(c) for c in characters)
        self.agents = tuple(_agent_spec(a) for a in agents)
        self.round_length = int(round_length)
        self.rounds_to_win = int(rounds_to_win)
        self.seed = int(seed)
        if self.round_length <= 0:
            raise ConfigError("round_length must be positive")
        if not 1 <= self.rounds_to_win <= MAX_ROUNDS:
            raise ConfigError("rounds_to_win out of range")

    def to_dict(self) -> dict:
        return {
            "characters": [c.to_dict() for c in self.characters],
            "agents": [dict(a) for a in self.agents],
            "round_length": self.round_length,
            "rounds_to_win": self.rounds_to_win,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d) -> "MatchConfig":
        try:
            return cls(
                characters=d["characters"],
                agents=d["agents"],
                round_length=d.get("round_length", ROUND_LENGTH),
                rounds_to_win=d.get("rounds_to_win", 2),
                seed=d.get("seed", 0),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad match config: {exc}") from exc


def derive_seed(master: int, *parts) -> int:
    """Stable sub-stream seed: SHA-256 of the labeled master, 63 bits."""
    tag = ":".join([str(master)] + [str(p) for p in parts])
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def settle_result(gs, rounds_meta: Sequence[dict], rounds_to_win: int) -> dict:
    """Match outcome from the final state and per-round records.

    Score decides when someone reached rounds_to_win; a match that hits
    the round cap first falls back to total damage dealt, and equal
    damage is an honest draw.
    """
    wl, wr = gs.round_wins
    if wl >= rounds_to_win or wr >= rounds_to_win:
        winner = "left" if wl > wr else "right"
        cause = "score"
    else:
        dl = gs.fighters[LEFT].damage_dealt
        dr = gs.fighters[RIGHT].damage_dealt
        if dl > dr:
            winner, cause = "left", "damage"
        elif dr > dl:
            winner, cause = "right", "damage"
        else:
            winner, cause = "draw", "exhausted"
    return {"winner": winner, "score": [wl, wr], "cause": cause,
            "rounds": list(rounds_meta)}


def _settled(agent, gs, side: int, opp_action=None):
    """Call the agent and make its choice engine-acceptable."""
    action = agent.act(gs, side, opp_action=opp_action)
    action = ground_action(action, gs.fighters[side].facing)
    if action not in legal_actions(gs, side):
        return ACT_IDLE
    return action


def _decide_tick(agents, gs, prev, latencies):
    """One tick's settled action pair, honoring the reader ordering."""
    chosen = [ACT_IDLE, ACT_IDLE]
    plain, readers = [], []
    for i in (LEFT, RIGHT):
        if not gs.fighters[i].can_act:
            continue  # engine forces idle; the agent is not consulted
        (readers if agents[i].reads_intent else plain).append(i)
    for i in plain:
        t0 = time.perf_counter()
        chosen[i] = _settled(agents[i], gs, i)
        latencies[i].append(time.perf_counter() - t0)
    for i in readers:
        j = 1 - i
        # reader vs reader is circular: both read the previous tick
        feed = prev[j] if agents[j].reads_intent else chosen[j]
        t0 = time.perf_counter()
        chosen[i] = _settled(agents[i], gs, i, opp_action=feed)
        latencies[i].append(time.perf_counter() - t0)
    return chosen


def _latency_summary(samples) -> dict:
    if not samples:
        return {"decisions": 0, "mean_ms": 0.0, "p95_ms": 0.0}
    ordered = sorted(samples)
    p95 = ordered[min(len(ordered) - 1, round(0.95 * (len(ordered) - 1)))]
    return {
        "decisions": len(samples),
        "mean_ms": fmean(samples) * 1000.0,
        "p95_ms": p95 * 1000.0,
    }


def run_match(cfg: MatchConfig, record_annotations: bool = True) -> Replay:
    """Simulate a full best-of-three and return its replay.

    Deterministic: the agents' RNG streams are derived from cfg.seed,
    so identical configs give byte-identical replay bodies.
    """
    agents = tuple(
        make_agent(cfg.agents[i], random.Random(derive_seed(cfg.seed, "agent", i)))
        for i in (LEFT, RIGHT)
    )
    gs = initial_state(cfg.characters, cfg.round_length, cfg.seed)
    ticks = []
    rounds_meta = []
    latencies = ([], [])
    round_idx = 0
    while True:
        agents[LEFT].begin_round(LEFT)
        agents[RIGHT].begin_round(RIGHT)
        prev = (ACT_IDLE, ACT_IDLE)
        while (res := round_result(gs)) is None:
            chosen = _decide_tick(agents, gs, prev, latencies)
            rec = {"r": round_idx, "t": gs.tick,
                   "a": [chosen[0].key, chosen[1].key]}
            if record_annotations:
                notes = [agents[0].annotation(), agents[1].annotation()]
                if notes[0] is not None or notes[1] is not None:
                    rec["s"] = notes
            ticks.append(rec)
            # the loop owns gs and both actions are settled legal, so the
            # validating clone in step() buys nothing here
            _advance(gs, chosen[0], chosen[1])
            prev = chosen
        rounds_meta.append({"winner": res["winner"], "cause": res["cause"],
                            "ticks": gs.tick})
        if res["winner"] == "left":
            gs.round_wins[0] += 1
        elif res["winner"] == "right":
            gs.round_wins[1] += 1
        round_idx += 1
        done = (gs.round_wins[0] >= cfg.rounds_to_win
                or gs.round_wins[1] >= cfg.rounds_to_win
                or round_idx >= MAX_ROUNDS)
        if done:
            break
        gs = reset_round(gs)
    result = settle_result(gs, rounds_meta, cfg.rounds_to_win)
    latency = {"left": _latency_summary(latencies[0]),
               "right": _latency_summary(latencies[1])}
    return Replay(config=cfg.to_dict(), ticks=ticks, result=result,
                  latency=latency)


__all__ = ["MAX_ROUNDS", "ConfigError", "MatchConfig", "derive_seed",
           "resolve_character", "run_match", "settle_result"]
