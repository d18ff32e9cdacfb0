"""Deterministic tick-based two-fighter combat simulation.

The engine is the single source of truth for state transitions,
observations and win conditions.  It is pure: ``step`` never mutates its
input and identical inputs produce bit-identical successors, so replays
and search rollouts are exact.

Core mechanics:

* five intent classes (attack / block / grab / move / idle) with the
  rock-paper-scissors triad: attack beats grab, grab beats block, block
  beats attack;
* per-move frame data (startup / active / recovery ticks) driving when
  a committed move can actually connect;
* combos: a hit landing on a fighter already in hitstun cannot be
  blocked and bumps the combo counter;
* motion-input specials (e.g. quarter-circle fireball) gated by a
  pattern match over the recent input-token history;
* best-of-three rounds, KO or timeout.

Geometry is a 1-D stage of length 100 with walls at both ends.  Time
advances in ticks (nominally 10 per second).
"""

from __future__ import annotations

import json
from collections import deque
from typing import Iterable, Mapping, Optional, Sequence

# --- stage and timing constants ---------------------------------------------

STAGE_LENGTH = 100.0
WALL_EPSILON = 2.0
SPAWN_LEFT = 30.0
SPAWN_RIGHT = 70.0
TICKS_PER_SECOND = 10
ROUND_LENGTH = 990          # 99 in-game seconds
ROUNDS_TO_WIN = 2
MAX_ROUNDS = 5              # hard cap; drawn rounds are replayed up to this
INPUT_BUFFER_TICKS = 20
DEFAULT_MAX_GAP = 8
PROJECTILE_HIT_WIDTH = 1.0

LEFT = 0
RIGHT = 1

# Facing is stored as a direction sign so movement math stays branch-free.
FACING_LEFT = -1
FACING_RIGHT = 1

# --- phases ------------------------------------------------------------------

PH_NEUTRAL = 0
PH_STARTUP = 1
PH_ACTIVE = 2
PH_RECOVERY = 3
PH_HITSTUN = 4
PH_BLOCKSTUN = 5
PH_BLOCKING = 6

PHASE_NAMES = {
    PH_NEUTRAL: "neutral",
    PH_STARTUP: "startup",
    PH_ACTIVE: "active",
    PH_RECOVERY: "recovery",
    PH_HITSTUN: "hitstun",
    PH_BLOCKSTUN: "blockstun",
    PH_BLOCKING: "blocking",
}

# --- intent classes and interaction triad ------------------------------------

ATTACK = "attack"
BLOCK = "block"
GRAB = "grab"
MOVE = "move"
IDLE = "idle"

INTENT_CLASSES = (ATTACK, BLOCK, GRAB, MOVE, IDLE)

LEFT_WINS = "left_wins"
RIGHT_WINS = "right_wins"
TRADE = "trade"
NEUTRAL_OUTCOME = "neutral"

# Which aggressive intent beats which: attack > grab > block > attack.
_BEATS = {ATTACK: GRAB, GRAB: BLOCK, BLOCK: ATTACK}


def resolve_interaction(left: str, right: str) -> str:
    """Resolve two simultaneous intents per the triad.

    Identical aggressive intents trade (both attacks land); identical
    passive intents are neutral.  Move and idle never beat anything.
    """
    if left == right:
        return TRADE if left == ATTACK else NEUTRAL_OUTCOME
    if _BEATS.get(left) == right:
        return LEFT_WINS
    if _BEATS.get(right) == left:
        return RIGHT_WINS
    # One side is move/idle, or block against a non-attack: nothing connects
    # unless the other side is plainly aggressive against a passive target.
    if left in (ATTACK, GRAB) and right in (MOVE, IDLE):
        return LEFT_WINS
    if right in (ATTACK, GRAB) and left in (MOVE, IDLE):
        return RIGHT_WINS
    return NEUTRAL_OUTCOME


# --- input tokens ---------------------------------------------------------------

TOK_DOWN = "Down"
TOK_DOWN_FWD = "DownFwd"
TOK_FWD = "Fwd"
TOK_BACK = "Back"
TOK_ATK = "Atk"
TOK_FWD_ATK = "Fwd+Atk"
TOK_BLOCK = "Block"
TOK_GRAB = "Grab"


def _token_for(kind: int, facing: int) -> Optional[str]:
    # Horizontal movement is recorded facing-relative (Fwd/Back) so
    # motion patterns read the same from either side of the stage.
    if kind == K_IDLE:
        return None
    if kind == K_MOVE_LEFT:
        return TOK_FWD if facing == FACING_LEFT else TOK_BACK
    if kind == K_MOVE_RIGHT:
        return TOK_FWD if facing == FACING_RIGHT else TOK_BACK
    if kind == K_DOWN:
        return TOK_DOWN
    if kind == K_DOWN_FWD:
        return TOK_DOWN_FWD
    if kind == K_ATTACK:
        return TOK_ATK
    if kind == K_SPECIAL:
        return TOK_FWD_ATK  # the triggering press of a motion special
    if kind == K_BLOCK:
        return TOK_BLOCK
    if kind == K_GRAB:
        return TOK_GRAB
    return None  # forward/back directives never reach the buffer


# --- actions ------------------------------------------------------------------

K_MOVE_LEFT = 0
K_MOVE_RIGHT = 1
K_DOWN = 2
K_DOWN_FWD = 3
K_ATTACK = 4
K_SPECIAL = 5
K_BLOCK = 6
K_GRAB = 7
K_IDLE = 8
# Facing-relative movement directives.  Agent configs use these so one
# definition plays either side; they are grounded to left/right before
# reaching the engine and are never legal engine inputs themselves.
K_FORWARD = 9
K_BACK = 10


class Action:
    """One per-tick player command.

    Instances are interned: parsing the same key twice returns the same
    object, so identity comparison is safe in hot loops.  ``key`` is the
    canonical string used in configs, replays and on the wire.  The
    buffer token this action leaves is precomputed per facing (tok_r /
    tok_l) because the tick pipeline needs it constantly.
    """

    __slots__ = ("kind", "move_id", "key", "tok_r", "tok_l")

    def __init__(self, kind: int, move_id: Optional[str], key: str):
        self.kind = kind
        self.move_id = move_id
        self.key = key
        self.tok_r = _token_for(kind, 1)
        self.tok_l = _token_for(kind, -1)

    def __repr__(self) -> str:
        return self.key

    def __eq__(self, other) -> bool:
        return isinstance(other, Action) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)


ACT_LEFT = Action(K_MOVE_LEFT, None, "left")
ACT_RIGHT = Action(K_MOVE_RIGHT, None, "right")
ACT_DOWN = Action(K_DOWN, None, "down")
ACT_DOWN_FWD = Action(K_DOWN_FWD, None, "downfwd")
ACT_BLOCK = Action(K_BLOCK, None, "block")
ACT_GRAB = Action(K_GRAB, None, "grab")
ACT_IDLE = Action(K_IDLE, None, "idle")
ACT_FORWARD = Action(K_FORWARD, None, "forward")
ACT_BACK = Action(K_BACK, None, "back")

_FIXED_ACTIONS = {
    a.key: a
    for a in (ACT_LEFT, ACT_RIGHT, ACT_DOWN, ACT_DOWN_FWD, ACT_BLOCK, ACT_GRAB,
              ACT_IDLE, ACT_FORWARD, ACT_BACK)
}
_MOVE_ACTIONS: dict[str, Action] = {}


def attack_action(move_id: str) -> Action:
    key = "attack:" + move_id
    act = _MOVE_ACTIONS.get(key)
    if act is None:
        act = _MOVE_ACTIONS[key] = Action(K_ATTACK, move_id, key)
    return act


def special_action(move_id: str) -> Action:
    key = "special:" + move_id
    act = _MOVE_ACTIONS.get(key)
    if act is None:
        act = _MOVE_ACTIONS[key] = Action(K_SPECIAL, move_id, key)
    return act


def parse_action(key: str) -> Action:
    """Parse a canonical action key ("idle", "attack:punch", ...)."""
    act = _FIXED_ACTIONS.get(key)
    if act is not None:
        return act
    if key.startswith("attack:"):
        return attack_action(key[7:])
    if key.startswith("special:"):
        return special_action(key[8:])
    raise ValueError(f"unknown action key: {key!r}")


_INTENT_BY_KIND = {
    K_MOVE_LEFT: MOVE,
    K_MOVE_RIGHT: MOVE,
    K_DOWN: IDLE,
    K_DOWN_FWD: IDLE,
    K_ATTACK: ATTACK,
    K_SPECIAL: ATTACK,
    K_BLOCK: BLOCK,
    K_GRAB: GRAB,
    K_IDLE: IDLE,
    K_FORWARD: MOVE,
    K_BACK: MOVE,
}


def ground_action(action: Action, facing: int) -> Action:
    """Resolve facing-relative directives to absolute stage movement."""
    if action.kind == K_FORWARD:
        return ACT_RIGHT if facing == FACING_RIGHT else ACT_LEFT
    if action.kind == K_BACK:
        return ACT_LEFT if facing == FACING_RIGHT else ACT_RIGHT
    return action


def intent_of(action: Action) -> str:
    """Map an action to its combat intent class.

    Down / down-forward are motion gestures: they feed the input buffer
    for special-move patterns but resolve as idle in combat.
    """
    return _INTENT_BY_KIND[action.kind]


# --- errors -------------------------------------------------------------------


class EngineError(Exception):
    pass


class IllegalAction(EngineError):
    pass


class RoundOver(EngineError):
    pass


class EmptyPattern(EngineError):
    pass


class SpecError(EngineError):
    """Invalid move/character definition."""


# --- move / character specs ---------------------------------------------------


class MoveSpec:
    """Frame data for one move.

    ``kind`` is "attack" or "grab"; a projectile entry turns the active
    window into a projectile launch instead of a melee hit.
    """

    __slots__ = (
        "move_id", "kind", "startup", "active", "recovery", "damage",
        "range", "hitstun", "blockstun", "is_special", "input_pattern",
        "projectile", "motion_prefix", "press_token",
    )

    def __init__(self, move_id, kind, startup, active, recovery, damage,
                 range_, hitstun, blockstun, is_special=False,
                 input_pattern=None, projectile=None):
        self.move_id = move_id
        self.kind = kind
        self.startup = startup
        self.active = active
        self.recovery = recovery
        self.damage = damage
        self.range = range_
        self.hitstun = hitstun
        self.blockstun = blockstun
        self.is_special = is_special
        self.input_pattern = tuple(input_pattern) if input_pattern else None
        # split once: the tokens a player must buffer beforehand, and the
        # token the triggering press itself records
        self.motion_prefix = self.input_pattern[:-1] if input_pattern else None
        self.press_token = self.input_pattern[-1] if input_pattern else None
        self.projectile = projectile  # (speed, damage) or None
        self._validate()

    def _validate(self):
        if self.kind not in (ATTACK, GRAB):
            raise SpecError(f"move {self.move_id}: kind must be attack or grab")
        if self.startup < 0 or self.active < 1 or self.recovery < 0:
            raise SpecError(f"move {self.move_id}: bad frame data")
        if self.damage < 0 or self.range <= 0:
            raise SpecError(f"move {self.move_id}: bad damage/range")
        if self.hitstun < 0 or self.blockstun < 0:
            raise SpecError(f"move {self.move_id}: bad stun values")
        if self.is_special != (self.input_pattern is not None):
            raise SpecError(
                f"move {self.move_id}: input pattern present iff special")
        if self.is_special and self.kind != ATTACK:
            raise SpecError(f"move {self.move_id}: only attacks can be special")

    @classmethod
    def from_dict(cls, d: Mapping) -> "MoveSpec":
        proj = d.get("projectile")
        if proj is not None:
            proj = (float(proj["speed"]), int(proj["damage"]))
        return cls(
            move_id=d["id"],
            kind=d.get("kind", ATTACK),
            startup=int(d["startup"]),
            active=int(d["active"]),
            recovery=int(d["recovery"]),
            damage=int(d["damage"]),
            range_=float(d["range"]),
            hitstun=int(d.get("hitstun", 0)),
            blockstun=int(d.get("blockstun", 0)),
            is_special=bool(d.get("is_special", False)),
            input_pattern=d.get("pattern"),
            projectile=proj,
        )

    def to_dict(self) -> dict:
        d = {
            "id": self.move_id,
            "kind": self.kind,
            "startup": self.startup,
            "active": self.active,
            "recovery": self.recovery,
            "damage": self.damage,
            "range": self.range,
            "hitstun": self.hitstun,
            "blockstun": self.blockstun,
            "is_special": self.is_special,
        }
        if self.input_pattern:
            d["pattern"] = list(self.input_pattern)
        if self.projectile:
            d["projectile"] = {"speed": self.projectile[0], "damage": self.projectile[1]}
        return d


class CharacterSpec:
    """A fighter's stats and move list, loaded from a JSON file."""

    __slots__ = ("name", "max_health", "walk_speed", "moves", "move_order",
                 "grab_move", "_base_actions", "_specials", "_all_actions")

    def __init__(self, name: str, max_health: int, walk_speed: float,
                 moves: Sequence[MoveSpec]):
        self.name = name
        self.max_health = max_health
        self.walk_speed = walk_speed
        self.moves = {m.move_id: m for m in moves}
        self.move_order = tuple(m.move_id for m in moves)
        if len(self.moves) != len(moves):
            raise SpecError(f"{name}: duplicate move ids")
        if max_health <= 0 or walk_speed <= 0:
            raise SpecError(f"{name}: max_health and walk_speed must be positive")
        grabs = [m for m in moves if m.kind == GRAB]
        attacks = [m for m in moves if m.kind == ATTACK and not m.is_special]
        if not grabs or not attacks:
            raise SpecError(f"{name}: needs at least one plain attack and one grab")
        self.grab_move = grabs[0]
        base = [ACT_LEFT, ACT_RIGHT, ACT_DOWN, ACT_DOWN_FWD]
        base += [attack_action(m.move_id) for m in moves
                 if m.kind == ATTACK and not m.is_special]
        base += [ACT_BLOCK, ACT_GRAB, ACT_IDLE]
        self._base_actions = tuple(base)
        self._specials = tuple(
            (special_action(m.move_id), m) for m in moves if m.is_special)
        self._all_actions = self._base_actions + tuple(
            a for a, _ in self._specials)

    @property
    def first_attack(self) -> MoveSpec:
        for mid in self.move_order:
            m = self.moves[mid]
            if m.kind == ATTACK and not m.is_special:
                return m
        raise SpecError("unreachable: validated on construction")

    @classmethod
    def from_dict(cls, d: Mapping) -> "CharacterSpec":
        return cls(
            name=d["name"],
            max_health=int(d["max_health"]),
            walk_speed=float(d["walk_speed"]),
            moves=[MoveSpec.from_dict(m) for m in d["moves"]],
        )

    @classmethod
    def load(cls, path) -> "CharacterSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "max_health": self.max_health,
            "walk_speed": self.walk_speed,
            "moves": [self.moves[mid].to_dict() for mid in self.move_order],
        }


# --- fighter / game state -----------------------------------------------------


class FighterState:
    """Mutable-in-private, immutable-by-convention snapshot of one fighter.

    ``input_history`` holds one token slot per tick (None when nothing was
    pressed), newest last, bounded to INPUT_BUFFER_TICKS entries.  The
    event flags (hit_landed / hit_blocked / took_hit) latch from the tick
    the event happened until the fighter is next able to act, so agents
    that are only consulted on actionable ticks still see them.
    """

    __slots__ = (
        "position", "health", "facing", "phase", "phase_timer",
        "current_move", "move_spent", "combo_hits_taken", "damage_dealt",
        "input_history", "hit_landed", "hit_blocked", "took_hit",
    )

    def __init__(self, position: float, health: int, facing: int):
        self.position = position
        self.health = health
        self.facing = facing
        self.phase = PH_NEUTRAL
        self.phase_timer = 0
        self.current_move: Optional[str] = None
        self.move_spent = False
        self.combo_hits_taken = 0
        self.damage_dealt = 0
        # deque(maxlen) so the per-tick append evicts in C; _advance runs
        # millions of times per searched match
        self.input_history: deque = deque(maxlen=INPUT_BUFFER_TICKS)
        self.hit_landed = False
        self.hit_blocked = False
        self.took_hit = False

    def clone(self) -> "FighterState":
        f = FighterState.__new__(FighterState)
        f.position = self.position
        f.health = self.health
        f.facing = self.facing
        f.phase = self.phase
        f.phase_timer = self.phase_timer
        f.current_move = self.current_move
        f.move_spent = self.move_spent
        f.combo_hits_taken = self.combo_hits_taken
        f.damage_dealt = self.damage_dealt
        f.input_history = self.input_history.copy()
        f.hit_landed = self.hit_landed
        f.hit_blocked = self.hit_blocked
        f.took_hit = self.took_hit
        return f

    @property
    def can_act(self) -> bool:
        return self.phase == PH_NEUTRAL or self.phase == PH_BLOCKING

    def to_dict(self) -> dict:
        return {
            "position": self.position,
            "health": self.health,
            "facing": "right" if self.facing == FACING_RIGHT else "left",
            "phase": PHASE_NAMES[self.phase],
            "phase_timer": self.phase_timer,
            "current_move": self.current_move,
            "combo": self.combo_hits_taken,
            "damage_dealt": self.damage_dealt,
        }


class Projectile:
    __slots__ = ("owner", "position", "direction", "speed", "damage",
                 "hitstun", "blockstun")

    def __init__(self, owner, position, direction, speed, damage, hitstun, blockstun):
        self.owner = owner
        self.position = position
        self.direction = direction
        self.speed = speed
        self.damage = damage
        self.hitstun = hitstun
        self.blockstun = blockstun

    def clone(self) -> "Projectile":
        return Projectile(self.owner, self.position, self.direction,
                          self.speed, self.damage, self.hitstun, self.blockstun)

    def to_dict(self) -> dict:
        # Signed speed folds the travel direction in.
        return {
            "owner": "left" if self.owner == LEFT else "right",
            "position": self.position,
            "speed": self.speed * self.direction,
            "damage": self.damage,
        }


class GameState:
    """Full simulation snapshot.

    The engine itself draws no random numbers; ``rng_seed`` is carried
    along purely so replays identify the seed the match was driven with.
    """

    __slots__ = ("tick", "timer", "round_length", "fighters", "projectiles",
                 "round_wins", "rng_seed", "characters")

    def __init__(self, characters, round_length=ROUND_LENGTH, rng_seed=0):
        self.characters = characters  # (CharacterSpec, CharacterSpec)
        self.round_length = round_length
        self.rng_seed = rng_seed
        self.tick = 0
        self.timer = round_length
        self.round_wins = [0, 0]
        self.projectiles: list[Projectile] = []
        self.fighters = (
            FighterState(SPAWN_LEFT, characters[LEFT].max_health, FACING_RIGHT),
            FighterState(SPAWN_RIGHT, characters[RIGHT].max_health, FACING_LEFT),
        )

    def clone(self) -> "GameState":
        gs = GameState.__new__(GameState)
        gs.characters = self.characters
        gs.round_length = self.round_length
        gs.rng_seed = self.rng_seed
        gs.tick = self.tick
        gs.timer = self.timer
        gs.round_wins = self.round_wins[:]
        gs.projectiles = [p.clone() for p in self.projectiles]
        gs.fighters = (self.fighters[0].clone(), self.fighters[1].clone())
        return gs

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "timer": self.timer,
            "round_wins": list(self.round_wins),
            "fighters": [f.to_dict() for f in self.fighters],
            "projectiles": [p.to_dict() for p in self.projectiles],
        }


def initial_state(characters, round_length=ROUND_LENGTH, rng_seed=0) -> GameState:
    return GameState(characters, round_length, rng_seed)


def reset_round(state: GameState) -> GameState:
    """Fresh round: spawn positions, full health, timer; scores kept.

    ``damage_dealt`` is cumulative across the match (it feeds the
    max-round tiebreak), so it survives the reset.
    """
    gs = state.clone()
    gs.timer = gs.round_length
    gs.projectiles = []
    dmg = [f.damage_dealt for f in gs.fighters]
    gs.fighters = (
        FighterState(SPAWN_LEFT, gs.characters[LEFT].max_health, FACING_RIGHT),
        FighterState(SPAWN_RIGHT, gs.characters[RIGHT].max_health, FACING_LEFT),
    )
    gs.fighters[0].damage_dealt = dmg[0]
    gs.fighters[1].damage_dealt = dmg[1]
    return gs


# --- observation --------------------------------------------------------------


class Observation:
    """What one side's agent is allowed to see.

    The last four flags are event/ability plumbing: they let tactic
    aborts ("my hit got blocked", "I got hit") and behavior-tree leaf
    contracts work without agents diffing raw health values.
    """

    __slots__ = (
        "distance", "opponent_attacking", "projectile_on_screen",
        "damage_dealt", "facing", "against_wall", "own_health",
        "opponent_health", "health_advantage", "timer",
        "opponent_in_hitstun",
        "hit_landed", "blocked_hit", "took_hit", "can_act",
    )

    def __init__(self, **kw):
        for k in self.__slots__:
            setattr(self, k, kw[k])

    def get(self, field: str):
        return getattr(self, field)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__slots__}


def observe(state: GameState, side: int) -> Observation:
    """Pure projection of the state onto one side's observation."""
    me = state.fighters[side]
    opp = state.fighters[1 - side]
    opp_move = None
    if opp.current_move is not None:
        opp_move = state.characters[1 - side].moves[opp.current_move]
    attacking = (
        opp.phase in (PH_STARTUP, PH_ACTIVE)
        and opp_move is not None
        and opp_move.kind == ATTACK
    )
    pos = me.position
    return Observation(
        distance=abs(me.position - opp.position),
        opponent_attacking=attacking,
        projectile_on_screen=bool(state.projectiles),
        damage_dealt=me.damage_dealt,
        facing="right" if me.facing == FACING_RIGHT else "left",
        against_wall=(pos <= WALL_EPSILON or pos >= STAGE_LENGTH - WALL_EPSILON),
        own_health=me.health,
        opponent_health=opp.health,
        # precomputed: the condition grammar compares fields to constants
        # and has no arithmetic, so band predicates need the difference
        health_advantage=me.health - opp.health,
        timer=state.timer,
        opponent_in_hitstun=opp.phase == PH_HITSTUN,
        hit_landed=me.hit_landed,
        blocked_hit=me.hit_blocked,
        took_hit=me.took_hit,
        can_act=me.can_act,
    )


# --- input patterns -----------------------------------------------------------


def action_token(action: Action, facing: int) -> Optional[str]:
    """Input token an action leaves in the buffer (None for idle)."""
    return action.tok_r if facing == FACING_RIGHT else action.tok_l


def match_input_pattern(history: Sequence[Optional[str]],
                        pattern: Sequence[str],
                        max_gap: int = DEFAULT_MAX_GAP) -> bool:
    """True iff ``pattern`` occurs in order within ``history``.

    ``history`` has one slot per tick (None = no input that tick), so
    index distance equals tick distance; consecutive matched tokens must
    be at most ``max_gap`` ticks apart.  Greedy scanning is wrong here
    (an early occurrence can dead-end while a later one works), so this
    tracks every index where the matched prefix can end.
    """
    if not pattern:
        raise EmptyPattern("pattern must be non-empty")
    n = len(history)
    first = pattern[0]
    ends = [i for i in range(n) if history[i] == first]
    for tok in pattern[1:]:
        if not ends:
            return False
        nxt = []
        for i in range(ends[0] + 1, n):
            if history[i] != tok:
                continue
            lo = i - max_gap
            for p in ends:
                if p >= i:
                    break
                if p >= lo:
                    nxt.append(i)
                    break
        ends = nxt
    return bool(ends)


def _match_backward(hist, pattern, max_gap: int, j: int, hi: int) -> bool:
    # Can pattern[:j+1] end at an index < hi, each gap within max_gap?
    # Complete search (greedy dead-ends are real), early exit on success;
    # bounded by max_gap candidates per level.
    tok = pattern[j]
    lo = hi - max_gap
    if lo < 0:
        lo = 0
    i = hi - 1
    if j == 0:
        while i >= lo:
            if hist[i] == tok:
                return True
            i -= 1
        return False
    while i >= lo:
        if hist[i] == tok and _match_backward(hist, pattern, max_gap, j - 1, i):
            return True
        i -= 1
    return False


def _ready_backward(hist, pattern, max_gap: int) -> bool:
    """Equivalent to match_input_pattern(hist + [pattern[-1]], ...).

    The final token has no recency bound (the buffer length is the
    bound), so every occurrence anchors a backward search; the virtual
    press past the end always matches it, making the recent-motion
    case a straight walk down the gap windows.
    """
    j = len(pattern) - 1
    if j == 0:
        return True                  # the press is the whole pattern
    n = len(hist)
    if _match_backward(hist, pattern, max_gap, j - 1, n):
        return True                  # anchored on the current press
    tok = pattern[j]
    for i in range(n - 1, -1, -1):
        if hist[i] == tok and _match_backward(hist, pattern, max_gap, j - 1, i):
            return True
    return False


def _special_ready(fighter: FighterState, move: MoveSpec, max_gap: int) -> bool:
    # The triggering press itself is the pattern's final token, so the
    # check appends it as a hypothetical entry for the current tick.
    prefix = move.motion_prefix
    if prefix is None:
        return False
    hist = fighter.input_history
    for tok in prefix:               # every motion token must be buffered
        if tok not in hist:
            return False
    pattern = move.input_pattern
    if len(pattern) <= 4:            # short motions: anchored backward scan
        return _ready_backward(hist, pattern, max_gap)
    return match_input_pattern(list(hist) + [pattern[-1]], pattern, max_gap)


# --- legality -----------------------------------------------------------------

_IDLE_ONLY = (ACT_IDLE,)


def legal_actions(state: GameState, side: int,
                  max_gap: int = DEFAULT_MAX_GAP) -> tuple:
    """Actions the engine will accept from ``side`` this tick.

    Committed or stunned fighters can only idle.  Specials appear only
    when their motion pattern is buffered.
    """
    f = state.fighters[side]
    if not (f.phase == PH_NEUTRAL or f.phase == PH_BLOCKING):
        return _IDLE_ONLY
    char = state.characters[side]
    specials = char._specials
    if not specials:
        return char._base_actions
    extra = None
    for act, move in specials:
        if _special_ready(f, move, max_gap):
            if extra is None:
                extra = []
            extra.append(act)
    if extra is None:
        return char._base_actions
    if len(extra) == len(specials):
        return char._all_actions
    return char._base_actions + tuple(extra)


def random_legal_action(state: GameState, side: int, rand,
                        max_gap: int = DEFAULT_MAX_GAP) -> Action:
    """Uniform draw from legal_actions without materializing the set.

    The pattern-readiness check only runs when the draw lands on the
    special's slot; a not-ready special redraws uniformly over the base
    actions, which leaves every legal action at exactly 1/|legal| (the
    redraw folds the special's probability mass back evenly).  Rollout
    search draws millions of these.  ``rand`` is a bound rng.random.
    Falls back to the materialized set for multi-special characters,
    where the redraw argument breaks down.
    """
    f = state.fighters[side]
    ph = f.phase
    if ph != PH_NEUTRAL and ph != PH_BLOCKING:
        return ACT_IDLE
    char = state.characters[side]
    base = char._base_actions
    specials = char._specials
    if not specials:
        return base[int(rand() * len(base))]
    if len(specials) > 1:
        acts = legal_actions(state, side, max_gap)
        return acts[int(rand() * len(acts))]
    nb = len(base)
    i = int(rand() * (nb + 1))
    if i < nb:
        return base[i]
    act, move = specials[0]
    if _special_ready(f, move, max_gap):
        return act
    return base[int(rand() * nb)]


def uniform_rollout(gs: GameState, until: int, rand,
                    max_gap: int = DEFAULT_MAX_GAP,
                    _NEUTRAL=PH_NEUTRAL, _BLOCKING=PH_BLOCKING) -> None:
    """Advance ``gs`` in place, both sides drawing uniform random legal.

    Stops when gs.tick reaches ``until`` or the round is decided; the
    caller inspects the state.  The per-fighter draw is
    random_legal_action unrolled (single-special shape inlined, other
    shapes fall back to the function) because search rollouts spend most
    of their time here and the per-tick call overhead is measurable.
    """
    fl, fr = gs.fighters
    cl, cr = gs.characters
    lb = cl._base_actions
    lnb = len(lb)
    lsp = cl._specials
    l_single = len(lsp) == 1
    if l_single:
        lact, lmove = lsp[0]
    rb = cr._base_actions
    rnb = len(rb)
    rsp = cr._specials
    r_single = len(rsp) == 1
    if r_single:
        ract, rmove = rsp[0]
    adv = _advance
    ready = _special_ready
    t = gs.tick
    while t < until:
        ph = fl.phase
        if ph != _NEUTRAL and ph != _BLOCKING:
            la = ACT_IDLE
        elif l_single:
            i = int(rand() * (lnb + 1))
            if i < lnb:
                la = lb[i]
            elif ready(fl, lmove, max_gap):
                la = lact
            else:
                la = lb[int(rand() * lnb)]
        elif not lsp:
            la = lb[int(rand() * lnb)]
        else:
            la = random_legal_action(gs, LEFT, rand, max_gap)
        ph = fr.phase
        if ph != _NEUTRAL and ph != _BLOCKING:
            ra = ACT_IDLE
        elif r_single:
            i = int(rand() * (rnb + 1))
            if i < rnb:
                ra = rb[i]
            elif ready(fr, rmove, max_gap):
                ra = ract
            else:
                ra = rb[int(rand() * rnb)]
        elif not rsp:
            ra = rb[int(rand() * rnb)]
        else:
            ra = random_legal_action(gs, RIGHT, rand, max_gap)
        adv(gs, la, ra, False)
        t += 1
        if fl.health <= 0 or fr.health <= 0 or gs.timer <= 0:
            return


# --- round / match results ----------------------------------------------------

KO = "ko"
TIMEOUT = "timeout"
DRAW = "draw"


def round_result(state: GameState) -> Optional[dict]:
    """None while the round is live, else {"winner", "cause"}.

    winner is "left" / "right" / "draw"; KO takes precedence at the tick
    both conditions coincide (double KO at timer zero is a draw by KO).
    """
    hl = state.fighters[LEFT].health
    hr = state.fighters[RIGHT].health
    if hl <= 0 or hr <= 0:
        if hl <= 0 and hr <= 0:
            return {"winner": "draw", "cause": KO}
        return {"winner": "right" if hl <= 0 else "left", "cause": KO}
    if state.timer <= 0:
        if hl == hr:
            return {"winner": "draw", "cause": TIMEOUT}
        return {"winner": "left" if hl > hr else "right", "cause": TIMEOUT}
    return None


# --- the tick pipeline --------------------------------------------------------


def step(state: GameState, left_action: Action, right_action: Action,
         max_gap: int = DEFAULT_MAX_GAP) -> GameState:
    """Advance one tick; pure (returns a fresh state).

    Raises RoundOver on a terminal round state and IllegalAction when an
    action is not in ``legal_actions`` for its side.
    """
    if round_result(state) is not None:
        raise RoundOver("round already decided")
    for side, action in ((LEFT, left_action), (RIGHT, right_action)):
        if action not in legal_actions(state, side, max_gap):
            raise IllegalAction(
                f"{'left' if side == LEFT else 'right'} cannot {action.key} now")
    gs = state.clone()
    _advance(gs, left_action, right_action)
    return gs


def _advance(gs: GameState, left_action: Action, right_action: Action,
             events: bool = True,
             _NEUTRAL=PH_NEUTRAL, _BLOCKING=PH_BLOCKING, _ACTIVE=PH_ACTIVE,
             _SPECIAL=K_SPECIAL, _DFWD=K_DOWN_FWD,
             _MRIGHT=K_MOVE_RIGHT, _IDLE=K_IDLE, _BLOCK=K_BLOCK,
             _STAGE=STAGE_LENGTH) -> None:
    """In-place tick advance; callers own the state (step clones first).

    Unrolled per fighter and allocation-light, with the no-commitment
    action kinds (movement, gestures, idle, block) handled inline:
    rollout search drives this millions of times per match.  The event
    latches feed observations only, never the pipeline itself, so
    rollouts pass events=False and skip maintaining them.
    """
    gs.tick += 1
    gs.timer -= 1
    fl, fr = gs.fighters
    cl, cr = gs.characters

    ph = fl.phase
    if ph == _NEUTRAL or ph == _BLOCKING:
        if events:
            # Events observed; clear the latch before this tick's news.
            fl.hit_landed = False
            fl.hit_blocked = False
            fl.took_hit = False
        k = left_action.kind
        if k == _SPECIAL:
            # The triggering press records the pattern's final token.
            token = cl.moves[left_action.move_id].press_token
        else:
            token = left_action.tok_r if fl.facing == 1 else left_action.tok_l
        fl.input_history.append(token)
        if k <= _DFWD:               # movement and gestures
            fl.phase = _NEUTRAL
            if k <= _MRIGHT:
                pos = fl.position + (cl.walk_speed if k == _MRIGHT
                                     else -cl.walk_speed)
                fl.position = (0.0 if pos < 0.0 else
                               (_STAGE if pos > _STAGE else pos))
        elif k == _IDLE:
            fl.phase = _NEUTRAL
        elif k == _BLOCK:
            fl.phase = _BLOCKING
            fl.phase_timer = 0
        else:
            _initiate(gs, LEFT, left_action)
    else:
        fl.input_history.append(None)

    ph = fr.phase
    if ph == _NEUTRAL or ph == _BLOCKING:
        if events:
            fr.hit_landed = False
            fr.hit_blocked = False
            fr.took_hit = False
        k = right_action.kind
        if k == _SPECIAL:
            token = cr.moves[right_action.move_id].press_token
        else:
            token = right_action.tok_r if fr.facing == 1 else right_action.tok_l
        fr.input_history.append(token)
        if k <= _DFWD:
            fr.phase = _NEUTRAL
            if k <= _MRIGHT:
                pos = fr.position + (cr.walk_speed if k == _MRIGHT
                                     else -cr.walk_speed)
                fr.position = (0.0 if pos < 0.0 else
                               (_STAGE if pos > _STAGE else pos))
        elif k == _IDLE:
            fr.phase = _NEUTRAL
        elif k == _BLOCK:
            fr.phase = _BLOCKING
            fr.phase_timer = 0
        else:
            _initiate(gs, RIGHT, right_action)
    else:
        fr.input_history.append(None)

    # Stun inflicted this tick starts counting down next tick, so the
    # post-step state shows the full hitstun/blockstun duration; `stunned`
    # carries the freshly-stunned sides as a bitmask.
    if fl.phase == _ACTIVE or fr.phase == _ACTIVE:
        stunned = _resolve_melee(gs)
    else:
        stunned = 0

    if not stunned & 1:
        ph = fl.phase
        if ph and ph != _BLOCKING:
            t = fl.phase_timer
            if t > 1:
                fl.phase_timer = t - 1
            else:
                _phase_transition(gs, LEFT, fl)
    if not stunned & 2:
        ph = fr.phase
        if ph and ph != _BLOCKING:
            t = fr.phase_timer
            if t > 1:
                fr.phase_timer = t - 1
            else:
                _phase_transition(gs, RIGHT, fr)

    if gs.projectiles:
        _advance_projectiles(gs)

    if fl.position != fr.position:
        fl.facing = FACING_RIGHT if fr.position > fl.position else FACING_LEFT
        fr.facing = -fl.facing


def _initiate(gs: GameState, side: int, action: Action) -> None:
    f = gs.fighters[side]
    k = action.kind
    if k == K_IDLE or k == K_DOWN or k == K_DOWN_FWD:
        f.phase = PH_NEUTRAL
        return
    if k == K_MOVE_LEFT or k == K_MOVE_RIGHT:
        f.phase = PH_NEUTRAL
        speed = gs.characters[side].walk_speed
        pos = f.position + (speed if k == K_MOVE_RIGHT else -speed)
        f.position = 0.0 if pos < 0.0 else (STAGE_LENGTH if pos > STAGE_LENGTH else pos)
        return
    if k == K_BLOCK:
        f.phase = PH_BLOCKING
        f.phase_timer = 0
        return
    # attack / special / grab: commit to the move's frame data
    char = gs.characters[side]
    move = char.grab_move if k == K_GRAB else char.moves[action.move_id]
    f.current_move = move.move_id
    f.move_spent = False
    if move.startup > 0:
        f.phase = PH_STARTUP
        f.phase_timer = move.startup
    else:
        f.phase = PH_ACTIVE
        f.phase_timer = move.active
        if move.projectile is not None:
            _spawn_projectile(gs, side, move)


def _spawn_projectile(gs: GameState, side: int, move: MoveSpec) -> None:
    f = gs.fighters[side]
    speed, damage = move.projectile
    gs.projectiles.append(Projectile(
        owner=side,
        position=f.position,
        direction=f.facing,
        speed=speed,
        damage=damage,
        hitstun=move.hitstun,
        blockstun=move.blockstun,
    ))
    f.move_spent = True  # the launch is the move's one effect


def _resolve_melee(gs: GameState) -> int:
    """Resolve melee hits; returns the freshly-stunned sides as a bitmask."""
    fighters = gs.fighters
    chars = gs.characters
    fl, fr = fighters
    ml = mr = None
    if fl.phase == PH_ACTIVE and not fl.move_spent and fl.current_move is not None:
        move = chars[0].moves[fl.current_move]
        if move.projectile is None and abs(fl.position - fr.position) <= move.range:
            ml = move
    if fr.phase == PH_ACTIVE and not fr.move_spent and fr.current_move is not None:
        move = chars[1].moves[fr.current_move]
        if move.projectile is None and abs(fl.position - fr.position) <= move.range:
            mr = move
    if ml is not None and mr is not None:
        outcome = resolve_interaction(ml.kind, mr.kind)
        if outcome == TRADE:
            # both attacks land
            return _apply_hit(gs, LEFT, ml) | _apply_hit(gs, RIGHT, mr)
        if outcome == LEFT_WINS:
            fr.move_spent = True  # losing grab whiffs
            return _apply_hit(gs, LEFT, ml)
        if outcome == RIGHT_WINS:
            fl.move_spent = True
            return _apply_hit(gs, RIGHT, mr)
        # grab-grab tech
        fl.move_spent = True
        fr.move_spent = True
        return 0
    if ml is not None:
        return _resolve_one_sided(gs, LEFT, ml)
    if mr is not None:
        return _resolve_one_sided(gs, RIGHT, mr)
    return 0


def _resolve_one_sided(gs: GameState, attacker: int, move: MoveSpec) -> int:
    defender = gs.fighters[1 - attacker]
    dphase = defender.phase
    if move.kind == GRAB:
        # Attacks beat grabs: a fighter committed to an attack cannot be
        # grabbed; the grab whiffs and its owner is left punishable.
        if dphase in (PH_STARTUP, PH_ACTIVE, PH_RECOVERY):
            dmove = gs.characters[1 - attacker].moves[defender.current_move]
            if dmove.kind == ATTACK:
                gs.fighters[attacker].move_spent = True
                return 0
        # Grabs beat blocks: blocking and blockstun offer no protection.
        return _apply_hit(gs, attacker, move)
    # Melee attack.  Blocking or already-in-blockstun defenders block it;
    # a defender in hitstun cannot block, so the hit extends the combo.
    if dphase == PH_BLOCKING or dphase == PH_BLOCKSTUN:
        return _apply_block(gs, attacker, move)
    return _apply_hit(gs, attacker, move)


def _apply_hit(gs: GameState, attacker: int, move_or_proj) -> int:
    atk = gs.fighters[attacker]
    vic = gs.fighters[1 - attacker]
    dealt = min(move_or_proj.damage, vic.health)
    vic.health -= dealt
    atk.damage_dealt += dealt
    atk.hit_landed = True
    vic.took_hit = True
    if isinstance(move_or_proj, MoveSpec):
        atk.move_spent = True
    if vic.phase == PH_HITSTUN:
        vic.combo_hits_taken += 1
    else:
        vic.combo_hits_taken = 1
    vic.phase = PH_HITSTUN
    vic.phase_timer = max(1, move_or_proj.hitstun)
    vic.current_move = None
    vic.move_spent = False
    return 2 - attacker  # victim's bit: left=1, right=2


def _apply_block(gs: GameState, attacker: int, move_or_proj) -> int:
    atk = gs.fighters[attacker]
    vic = gs.fighters[1 - attacker]
    atk.hit_blocked = True
    if isinstance(move_or_proj, MoveSpec):
        atk.move_spent = True
    vic.phase = PH_BLOCKSTUN
    vic.phase_timer = max(1, move_or_proj.blockstun)
    return 2 - attacker


def _phase_transition(gs: GameState, side: int, f: FighterState) -> None:
    """Phase timer hit zero: move to the next phase."""
    ph = f.phase
    if ph == PH_STARTUP:
        move = gs.characters[side].moves[f.current_move]
        f.phase = PH_ACTIVE
        f.phase_timer = move.active
        if move.projectile is not None and not f.move_spent:
            _spawn_projectile(gs, side, move)
    elif ph == PH_ACTIVE:
        move = gs.characters[side].moves[f.current_move]
        if move.recovery > 0:
            f.phase = PH_RECOVERY
            f.phase_timer = move.recovery
        else:
            f.phase = PH_NEUTRAL
            f.phase_timer = 0
            f.current_move = None
    elif ph == PH_RECOVERY:
        f.phase = PH_NEUTRAL
        f.phase_timer = 0
        f.current_move = None
    elif ph == PH_HITSTUN:
        f.phase = PH_NEUTRAL
        f.phase_timer = 0
        f.combo_hits_taken = 0
    elif ph == PH_BLOCKSTUN:
        f.phase = PH_NEUTRAL
        f.phase_timer = 0


def _advance_phase(gs: GameState, side: int) -> None:
    f = gs.fighters[side]
    ph = f.phase
    if ph == PH_NEUTRAL or ph == PH_BLOCKING:
        return
    if f.phase_timer > 1:
        f.phase_timer -= 1
        return
    _phase_transition(gs, side, f)


def _advance_projectiles(gs: GameState) -> None:
    fighters = gs.fighters
    survivors = []
    for p in gs.projectiles:
        old = p.position
        new = old + p.direction * p.speed
        target = fighters[1 - p.owner]
        tp = target.position
        crossed = (old - tp) * (new - tp) <= 0.0
        if crossed or abs(new - tp) <= PROJECTILE_HIT_WIDTH:
            # Runs after the phase stage, so stun set here is untouched
            # this tick; the freshly-stunned mask is not needed.
            if target.phase == PH_BLOCKING or target.phase == PH_BLOCKSTUN:
                _apply_block(gs, p.owner, p)
            else:
                _apply_hit(gs, p.owner, p)
            continue  # projectile consumed
        if new <= 0.0 or new >= STAGE_LENGTH:
            continue  # left the stage
        p.position = new
        survivors.append(p)
    # opposing projectiles cancel when they meet or cross
    if len(survivors) > 1:
        cancelled = set()
        for a in range(len(survivors)):
            for b in range(a + 1, len(survivors)):
                pa, pb = survivors[a], survivors[b]
                if pa.owner == pb.owner or a in cancelled or b in cancelled:
                    continue
                da = pa.position - pb.position
                if abs(da) <= PROJECTILE_HIT_WIDTH or (
                        da * ((pa.position - pa.direction * pa.speed)
                              - (pb.position - pb.direction * pb.speed)) < 0):
                    cancelled.add(a)
                    cancelled.add(b)
        if cancelled:
            survivors = [p for idx, p in enumerate(survivors) if idx not in cancelled]
    gs.projectiles = survivors
