"""Tactic mining: from recorded matches to an FsmDef skeleton.

Replays are re-simulated tick by tick; every tick where the mined
fighter could actually act contributes one (analysis-state label,
action) sample.  Counting n-grams of those samples per label and
keeping the top pools yields a state machine that plays the way the
recorded player did -- frequent mistakes included, on purpose: the
point is a familiar opponent, not a perfect one.

The mined stream deliberately skips ticks spent committed or in
stun: those record forced idles the player never chose, and pools
built from them would be mostly noise.
"""

from collections import Counter
from itertools import groupby

from .engine import (
    CharacterSpec, IllegalAction, RoundOver, initial_state, observe,
    parse_action, reset_round, step,
)
from .fsm import MAX_TACTIC_LEN, FsmDef, Tactic, Transition
from .replay import FormatError

DIST_BANDS = ("close", "mid", "far")
HEALTH_BANDS = ("behind", "even", "ahead")


class EmptyLog(ValueError):
    """Nothing to mine: no replays, or no decisions in them."""


class StateClassifier:
    """Observation -> analysis-state label.

    Default bands: distance close (< 10), mid (10..30 inclusive), far
    (> 30), crossed with health advantage behind (< -10), even (within
    10), ahead (> 10).  Nine labels, total over any observation that
    carries distance and health_advantage.
    """

    __slots__ = ("close_under", "far_over", "even_margin")

    def __init__(self, close_under: float = 10.0, far_over: float = 30.0,
                 even_margin: float = 10.0):
        if not 0 < close_under <= far_over:
            raise ValueError("need 0 < close_under <= far_over")
        if even_margin < 0:
            raise ValueError("even_margin must be non-negative")
        self.close_under = close_under
        self.far_over = far_over
        self.even_margin = even_margin

    @property
    def labels(self) -> tuple:
        return tuple(f"{d}/{h}" for d in DIST_BANDS for h in HEALTH_BANDS)

    def label(self, obs) -> str:
        d = obs.get("distance")
        adv = obs.get("health_advantage")
        if d < self.close_under:
            dist = "close"
        elif d <= self.far_over:
            dist = "mid"
        else:
            dist = "far"
        if adv < -self.even_margin:
            health = "behind"
        elif adv <= self.even_margin:
            health = "even"
        else:
            health = "ahead"
        return f"{dist}/{health}"

    __call__ = label

    def condition_for(self, label: str) -> dict:
        """Condition tree that holds exactly where ``label`` applies."""
        dist, health = label.split("/")
        parts = []
        if dist == "close":
            parts.append({"field": "distance", "op": "<",
                          "value": self.close_under})
        elif dist == "far":
            parts.append({"field": "distance", "op": ">",
                          "value": self.far_over})
        elif dist == "mid":
            parts.append({"field": "distance", "op": ">=",
                          "value": self.close_under})
            parts.append({"field": "distance", "op": "<=",
                          "value": self.far_over})
        else:
            raise ValueError(f"unknown distance band {dist!r}")
        if health == "behind":
            parts.append({"field": "health_advantage", "op": "<",
                          "value": -self.even_margin})
        elif health == "ahead":
            parts.append({"field": "health_advantage", "op": ">",
                          "value": self.even_margin})
        elif health == "even":
            parts.append({"field": "health_advantage", "op": ">=",
                          "value": -self.even_margin})
            parts.append({"field": "health_advantage", "op": "<=",
                          "value": self.even_margin})
        else:
            raise ValueError(f"unknown health band {health!r}")
        return {"all": parts}


def _mined_sides(replay, side) -> tuple:
    if side is not None:
        if side in ("left", 0):
            return (0,)
        if side in ("right", 1):
            return (1,)
        raise ValueError(f"side must be left/right, got {side!r}")
    agents = replay.config.get("agents", [])
    human = tuple(i for i, a in enumerate(agents)
                  if isinstance(a, dict) and a.get("kind") == "human")
    # no marked human side: analyze everyone in the log
    return human or (0, 1)


def decision_streams(replays, classifier=None, side=None) -> list:
    """Labeled decision samples, one stream per (replay, round, side).

    Each stream is a list of (label, action_key) pairs covering the
    ticks where that fighter was actionable.  Streams never cross a
    round boundary, so no mined sequence can span a KO.
    """
    cls = classifier or StateClassifier()
    streams = []
    for replay in replays:
        sides = _mined_sides(replay, side)
        try:
            chars = tuple(CharacterSpec.from_dict(c)
                          for c in replay.config["characters"])
            round_length = int(replay.config["round_length"])
            seed = replay.config.get("seed", 0)
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"config incomplete: {exc}") from exc
        gs = initial_state(chars, round_length, seed)
        current_round = 0
        per_side = {s: [] for s in sides}
        for rec in replay.ticks:
            try:
                r, acts = rec["r"], rec["a"]
            except (KeyError, TypeError) as exc:
                raise FormatError(f"bad tick record: {rec!r}") from exc
            if r != current_round:
                if r != current_round + 1:
                    raise FormatError("tick records out of order")
                streams.extend(per_side[s] for s in sides)
                per_side = {s: [] for s in sides}
                current_round = r
                gs = reset_round(gs)
            for s in sides:
                if gs.fighters[s].can_act:
                    per_side[s].append((cls.label(observe(gs, s)), acts[s]))
            try:
                gs = step(gs, parse_action(acts[0]), parse_action(acts[1]))
            except (ValueError, IllegalAction, RoundOver) as exc:
                raise FormatError(f"replay does not re-simulate: {exc}") from exc
        streams.extend(per_side[s] for s in sides)
    return [s for s in streams if s]


def count_ngrams(streams, max_len: int) -> dict:
    """Per-label Counter of action n-grams (lengths 1..max_len).

    An n-gram only counts while the label is constant across all of its
    samples, so counting runs of equal labels is enough.
    """
    counts: dict = {}
    for stream in streams:
        for label, grp in groupby(stream, key=lambda pair: pair[0]):
            keys = [k for _, k in grp]
            bucket = counts.setdefault(label, Counter())
            for n in range(1, max_len + 1):
                for i in range(len(keys) - n + 1):
                    bucket[tuple(keys[i:i + n])] += 1
    return counts


def label_hops(streams) -> Counter:
    """How often each (label, next_label) change was observed."""
    hops: Counter = Counter()
    for stream in streams:
        for (a, _), (b, _) in zip(stream, stream[1:]):
            if a != b:
                hops[(a, b)] += 1
    return hops


def top_pools(counter: Counter, k: int) -> list:
    """Top-k n-grams: frequency descending, ties lexicographic."""
    return [g for g, _ in sorted(counter.items(),
                                 key=lambda kv: (-kv[1], kv[0]))[:k]]


def mine_tactics(replays, classifier=None, max_len: int = 3,
                 pool_size: int = 4, side=None) -> FsmDef:
    """Build an FsmDef skeleton from recorded play.

    States are the analysis labels that actually occurred; each state's
    tactic pool is its top-``pool_size`` n-grams; transitions fire on
    the band conditions of the label the player was next seen in,
    ordered by how often that change happened.  The initial state is
    the most common label.
    """
    if not replays:
        raise EmptyLog("no replays to mine")
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    if max_len > MAX_TACTIC_LEN:
        raise ValueError(f"max_len above the tactic cap ({MAX_TACTIC_LEN})")
    if pool_size < 1:
        raise ValueError("pool_size must be at least 1")
    cls = classifier or StateClassifier()
    streams = decision_streams(replays, cls, side)
    counts = count_ngrams(streams, max_len)
    if not counts:
        raise EmptyLog("replays hold no actionable decisions to mine")
    states = {}
    for label in cls.labels:
        if label not in counts:
            continue
        pool = []
        for gram in top_pools(counts[label], pool_size):
            pool.append(Tactic(name="+".join(gram),
                               actions=[parse_action(k) for k in gram]))
        states[label] = pool
    decisions = {label: sum(c[g] for g in c if len(g) == 1)
                 for label, c in counts.items()}
    initial = min(states, key=lambda s: (-decisions[s], s))
    transitions = []
    ordered_hops = sorted(label_hops(streams).items(),
                          key=lambda kv: (-kv[1], kv[0]))
    for (a, b), _ in ordered_hops:
        if a in states and b in states:
            transitions.append(Transition(a, b, cls.condition_for(b),
                                          priority=0,
                                          index=len(transitions)))
    return FsmDef(states, transitions, initial)


__all__ = ["EmptyLog", "StateClassifier", "count_ngrams",
           "decision_streams", "label_hops", "mine_tactics", "top_pools"]
