"""Command-line front door.

Every subcommand is a thin wrapper: parse arguments, load JSON, call
one library function, format the outcome.  Exit codes: 0 success,
2 bad configuration or usage, 3 verification failure.
"""

import argparse
import asyncio
import json
import os
import sys
from glob import glob

from .agents import AgentInitError
from .match import ConfigError, MatchConfig, run_match
from .mining import mine_tactics
from .replay import FormatError, Replay, VersionMismatch, verify_replay
from .server import serve_match
from .tournament import run_tournament

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3


def _load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _cmd_match(args) -> int:
    cfg_dict = _load_json(args.config)
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    replay = run_match(MatchConfig.from_dict(cfg_dict))
    if args.out:
        replay.save(args.out)
    r = replay.result
    print(f"winner: {r['winner']} ({r['cause']})  "
          f"score {r['score'][0]}-{r['score'][1]}  digest {replay.digest[:12]}")
    return EXIT_OK


def _format_standings(standings) -> str:
    head = f"{'name':<24}{'W':>5}{'L':>5}{'D':>5}{'rate':>8}{'ms/dec':>9}"
    lines = [head, "-" * len(head)]
    for r in standings.rows:
        lines.append(f"{r['name']:<24}{r['wins']:>5}{r['losses']:>5}"
                     f"{r['draws']:>5}{r['win_rate']:>8.3f}"
                     f"{r['mean_latency_ms']:>9.3f}")
    lines.append(f"{standings.matches_played} matches played")
    return "\n".join(lines)


def _cmd_tournament(args) -> int:
    roster = _load_json(args.roster)
    standings = run_tournament(roster, args.games, args.seed)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        out = os.path.join(args.out, "standings.json")
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(standings.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(_format_standings(standings))
    return EXIT_OK


def _cmd_mine(args) -> int:
    paths = sorted(glob(os.path.join(args.logs, "*.jsonl")))
    if not paths:
        raise ConfigError(f"no .jsonl replays under {args.logs!r}")
    replays = [Replay.load(p) for p in paths]
    mined = mine_tactics(replays, max_len=args.max_len,
                         pool_size=args.pool_size)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(mined.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"mined {len(mined.states)} states from {len(replays)} replays "
          f"-> {args.out}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    try:
        replay = Replay.load(args.replay)
    except (VersionMismatch, FormatError) as exc:
        print(f"FAILED: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    if verify_replay(replay):
        print(f"ok: digest {replay.digest[:12]} reproduces")
        return EXIT_OK
    print("FAILED: replay does not reproduce", file=sys.stderr)
    return EXIT_VERIFY


def _cmd_serve(args) -> int:
    cfg = MatchConfig.from_dict(_load_json(args.config))

    async def run():
        srv = await serve_match(cfg, args.port, training=args.training,
                                replay_dir=args.replay_dir)
        mode = "training" if args.training else "versus"
        print(f"serving {mode} on ws://127.0.0.1:{srv.port}")
        await srv.serve_forever()

    try:
        asyncio.run(run())
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="arena",
                                description="fighting-game agent harness")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("match", help="run one seeded match")
    m.add_argument("--config", required=True, help="MatchConfig JSON file")
    m.add_argument("--seed", type=int, default=None,
                   help="override the config's seed")
    m.add_argument("--out", default=None, help="replay file to write")
    m.set_defaults(func=_cmd_match)

    t = sub.add_parser("tournament", help="round-robin a roster")
    t.add_argument("--roster", required=True, help="JSON list of agent specs")
    t.add_argument("--games", type=int, required=True,
                   help="games per pair per side assignment")
    t.add_argument("--seed", type=int, default=0, help="master seed")
    t.add_argument("--out", default=None,
                   help="directory for standings.json")
    t.set_defaults(func=_cmd_tournament)

    n = sub.add_parser("mine", help="mine tactics from replay logs")
    n.add_argument("--logs", required=True, help="directory of .jsonl replays")
    n.add_argument("--out", required=True, help="FsmDef JSON to write")
    n.add_argument("--max-len", type=int, default=3,
                   help="longest mined action sequence")
    n.add_argument("--pool-size", type=int, default=4,
                   help="tactics kept per state")
    n.set_defaults(func=_cmd_mine)

    v = sub.add_parser("verify", help="re-simulate a replay")
    v.add_argument("replay", help="replay file to check")
    v.set_defaults(func=_cmd_verify)

    s = sub.add_parser("serve", help="host a live match over WebSocket")
    s.add_argument("--config", required=True, help="MatchConfig JSON file")
    s.add_argument("--port", type=int, required=True)
    s.add_argument("--training", action="store_true",
                   help="static dummy, health and timer frozen")
    s.add_argument("--replay-dir", default=".",
                   help="where completed matches are persisted")
    s.set_defaults(func=_cmd_serve)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, AgentInitError, OSError, ValueError) as exc:
        # EmptyLog, FsmError, json errors and friends all land here
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
