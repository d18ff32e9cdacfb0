"""Round-robin tournaments over agent specs.

Every unordered pair in the roster plays ``games_per_pair`` matches per
side assignment (so 2x that many in total), and each match gets its own
seed derived from the master seed, the pair, and the game index.  That
makes the bracket a pure function of (roster, games_per_pair,
master_seed): matches are independent and could run in any order -- or
on separate workers -- without changing a single digest.  On one core
we just run them in sequence.
"""

from itertools import combinations

from . import default_character
from .engine import ROUND_LENGTH
from .match import ConfigError, MatchConfig, derive_seed, run_match


class Standings:
    """Ranked tournament outcome.

    ``rows`` is one record per roster entry, sorted by win rate
    descending with ties broken by name; ``pairs`` holds the raw
    per-pairing tallies in roster order.
    """

    __slots__ = ("rows", "pairs", "matches_played")

    def __init__(self, rows, pairs, matches_played: int):
        self.rows = list(rows)
        self.pairs = list(pairs)
        self.matches_played = matches_played

    def to_dict(self) -> dict:
        return {
            "matches_played": self.matches_played,
            "rows": [dict(r) for r in self.rows],
            "pairs": [dict(p) for p in self.pairs],
        }


def ranked(rows) -> list:
    """Standings order: win rate descending, ties by name ascending."""
    return sorted(rows, key=lambda r: (-r["win_rate"], r["name"]))


def normalize_roster(roster) -> list:
    """Roster entries to (name, agent_spec) pairs with unique names.

    An entry is an agent kind string, a {kind, parameters} spec, or the
    same with a "name" key.  Unnamed entries are named after their kind;
    duplicates get a positional suffix so per-name tallies stay honest.
    """
    if not isinstance(roster, (list, tuple)) or len(roster) < 2:
        raise ConfigError("a tournament roster needs at least two entries")
    out = []
    used = set()
    for entry in roster:
        name = None
        if isinstance(entry, dict) and "name" in entry:
            entry = dict(entry)
            name = str(entry.pop("name"))
        spec = entry if isinstance(entry, dict) else {"kind": entry}
        if name is None:
            name = str(spec.get("kind", "?"))
        base, n = name, 2
        while name in used:
            name = f"{base}#{n}"
            n += 1
        used.add(name)
        out.append((name, spec))
    return out


def _blank_tally(name: str, spec: dict) -> dict:
    return {"name": name, "kind": spec.get("kind", "?"), "wins": 0,
            "losses": 0, "draws": 0, "matches": 0,
            "decisions": 0, "_lat_weighted": 0.0}


def run_tournament(roster, games_per_pair: int, master_seed: int, *,
                   characters=None, round_length: int = ROUND_LENGTH,
                   rounds_to_win: int = 2) -> Standings:
    """Play the full round robin and return standings.

    Per agent: win/loss/draw counts, win rate, and the mean decision
    latency pooled over every decision the agent made anywhere in the
    bracket.  Deterministic given master_seed.
    """
    entries = normalize_roster(roster)
    if games_per_pair < 1:
        raise ConfigError("games_per_pair must be at least 1")
    if characters is None:
        characters = (default_character(), default_character())
    tallies = {name: _blank_tally(name, spec) for name, spec in entries}
    pairs = []
    played = 0
    for i, j in combinations(range(len(entries)), 2):
        pair = {"a": entries[i][0], "b": entries[j][0],
                "a_wins": 0, "b_wins": 0, "draws": 0}
        for g in range(2 * games_per_pair):
            # even games: i on the left; odd games: sides swapped
            li, ri = (i, j) if g % 2 == 0 else (j, i)
            seed = derive_seed(master_seed, "pair", i, j, "game", g)
            cfg = MatchConfig(characters,
                              (entries[li][1], entries[ri][1]),
                              round_length, rounds_to_win, seed)
            rep = run_match(cfg, record_annotations=False)
            played += 1
            names = (entries[li][0], entries[ri][0])
            for side, key in enumerate(("left", "right")):
                lat = rep.latency[key]
                t = tallies[names[side]]
                t["matches"] += 1
                t["decisions"] += lat["decisions"]
                t["_lat_weighted"] += lat["mean_ms"] * lat["decisions"]
            winner = rep.result["winner"]
            if winner == "draw":
                tallies[names[0]]["draws"] += 1
                tallies[names[1]]["draws"] += 1
                pair["draws"] += 1
            else:
                w = names[0] if winner == "left" else names[1]
                l = names[1] if winner == "left" else names[0]
                tallies[w]["wins"] += 1
                tallies[l]["losses"] += 1
                if w == entries[i][0]:
                    pair["a_wins"] += 1
                else:
                    pair["b_wins"] += 1
        pairs.append(pair)
    rows = []
    for name, _ in entries:
        t = tallies[name]
        t["win_rate"] = t["wins"] / t["matches"] if t["matches"] else 0.0
        dec = t["decisions"]
        t["mean_latency_ms"] = (t.pop("_lat_weighted") / dec) if dec else 0.0
        rows.append(t)
    return Standings(ranked(rows), pairs, played)


__all__ = ["Standings", "normalize_roster", "ranked", "run_tournament"]
