"""Replay files: versioned JSON lines with a content digest.

Layout: one header line ({"version", "config"}), one line per tick
({"r": round, "t": tick, "a": [left_key, right_key]} plus optional
"s" state annotations), one footer line ({"result", "latency",
"digest"}).  The digest is SHA-256 over the canonicalized body --
header, ticks and result; latency metrics vary run to run and are
deliberately outside it.
"""

import hashlib
import json

from .engine import (
    CharacterSpec, IllegalAction, RoundOver, initial_state, parse_action,
    reset_round, round_result, step,
)

REPLAY_VERSION = 1


class FormatError(ValueError):
    """Replay file is structurally broken."""


class VersionMismatch(FormatError):
    """Replay was written by an incompatible format version."""


def _canon(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class Replay:
    """In-memory replay; ``save``/``load`` round-trip the JSONL form."""

    __slots__ = ("version", "config", "ticks", "result", "latency", "digest")

    def __init__(self, config: dict, ticks: list, result: dict,
                 latency=None, version: int = REPLAY_VERSION, digest=None):
        self.version = version
        self.config = config
        self.ticks = ticks
        self.result = result
        self.latency = latency or {}
        self.digest = digest if digest is not None else self.compute_digest()

    def body_lines(self):
        yield _canon({"version": self.version, "config": self.config})
        for rec in self.ticks:
            yield _canon(rec)
        yield _canon({"result": self.result})

    def compute_digest(self) -> str:
        h = hashlib.sha256()
        for line in self.body_lines():
            h.update(line.encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_canon({"version": self.version, "config": self.config}))
            fh.write("\n")
            for rec in self.ticks:
                fh.write(_canon(rec))
                fh.write("\n")
            fh.write(_canon({"result": self.result, "latency": self.latency,
                             "digest": self.digest}))
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Replay":
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
        if len(lines) < 2:
            raise FormatError("replay needs at least a header and a footer")
        try:
            header = json.loads(lines[0])
            footer = json.loads(lines[-1])
            ticks = [json.loads(ln) for ln in lines[1:-1]]
        except json.JSONDecodeError as exc:
            raise FormatError(f"bad JSON line: {exc}") from exc
        if not isinstance(header, dict) or "version" not in header:
            raise FormatError("header line lacks a version")
        if header["version"] != REPLAY_VERSION:
            raise VersionMismatch(
                f"format version {header['version']} (supported: {REPLAY_VERSION})")
        for key in ("config",):
            if key not in header:
                raise FormatError(f"header line lacks {key}")
        for key in ("result", "digest"):
            if key not in footer:
                raise FormatError(f"footer line lacks {key}")
        return cls(config=header["config"], ticks=ticks,
                   result=footer["result"], latency=footer.get("latency"),
                   version=header["version"], digest=footer["digest"])


def verify_replay(replay: Replay) -> bool:
    """True iff the digest matches and the engine reproduces the result.

    Tampered content fails the digest; content that hashes fine but
    disagrees with the simulation (hand-edited and re-hashed, or from a
    drifted engine) fails the re-simulation.
    """
    if replay.version != REPLAY_VERSION:
        raise VersionMismatch(
            f"format version {replay.version} (supported: {REPLAY_VERSION})")
    if replay.compute_digest() != replay.digest:
        return False
    from .match import settle_result  # local: match imports this module

    cfg = replay.config
    try:
        chars = tuple(CharacterSpec.from_dict(c) for c in cfg["characters"])
        round_length = int(cfg["round_length"])
        rounds_to_win = int(cfg.get("rounds_to_win", 2))
        seed = cfg.get("seed", 0)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"config incomplete: {exc}") from exc

    rounds: list[list[dict]] = []
    for rec in replay.ticks:
        try:
            r = rec["r"]
        except (KeyError, TypeError) as exc:
            raise FormatError(f"tick record lacks a round index: {rec!r}") from exc
        if r == len(rounds):
            rounds.append([])
        elif r != len(rounds) - 1:
            return False
        rounds[-1].append(rec)

    gs = initial_state(chars, round_length, seed)
    rounds_meta = []
    for r, recs in enumerate(rounds):
        if r > 0:
            gs = reset_round(gs)
        for rec in recs:
            if rec.get("t") != gs.tick:
                return False
            try:
                left = parse_action(rec["a"][0])
                right = parse_action(rec["a"][1])
                gs = step(gs, left, right)
            except (KeyError, ValueError, IllegalAction, RoundOver):
                return False
        res = round_result(gs)
        if res is None:
            return False
        rounds_meta.append({"winner": res["winner"], "cause": res["cause"],
                            "ticks": gs.tick})
        if res["winner"] == "left":
            gs.round_wins[0] += 1
        elif res["winner"] == "right":
            gs.round_wins[1] += 1
    return settle_result(gs, rounds_meta, rounds_to_win) == replay.result


__all__ = ["REPLAY_VERSION", "FormatError", "VersionMismatch", "Replay",
           "verify_replay"]
