"""Agent kinds and the registry the harness builds them from.

Information boundaries, in order of privilege:

* observation agents (random draws aside, fsm/hfsm/bt) decide from
  ``observe(state, side)`` only;
* input-reading agents additionally receive the opponent's same-tick
  action before resolution (the classic oracle), plus enough state
  access to read committed moves and incoming projectiles;
* search agents (mcts and the hybrids) receive the true GameState --
  a deliberate, documented asymmetry.

Every agent owns a private seeded RNG stream; nothing here touches
global randomness.
"""

import random
from typing import Optional

from . import data_path
from .engine import (
    ACT_BLOCK, ACT_FORWARD, ACT_IDLE, PH_ACTIVE, PH_STARTUP, Action,
    GameState, ground_action, intent_of, legal_actions, observe,
)
from .fsm import (
    FsmAgentState, FsmDef, HfsmDef, flatten_hfsm, fsm_agent_act,
    input_read_policy,
)
from . import mcts as mcts_mod


class AgentInitError(ValueError):
    """Agent spec names an unknown kind or carries bad parameters."""


class Agent:
    """One side's decision maker; the match loop drives it per tick.

    ``act`` is only called on ticks where the fighter can act (the
    harness substitutes Idle while committed or stunned).  ``opp_action``
    is supplied to input readers only, per their contract.
    """

    kind = "?"
    reads_intent = False

    def __init__(self, rng: random.Random):
        self.rng = rng

    def begin_round(self, side: int) -> None:
        """Reset per-round mutable state (tactic cursors and the like)."""

    def act(self, state: GameState, side: int,
            opp_action: Optional[Action] = None) -> Action:
        raise NotImplementedError

    def annotation(self) -> Optional[str]:
        """Current internal-state label for replay annotation, if any."""
        return None


class RandomAgent(Agent):
    kind = "random"

    def act(self, state, side, opp_action=None):
        acts = legal_actions(state, side)
        return acts[self.rng.randrange(len(acts))]


class InputReadingAgent(Agent):
    """Counters the opponent's read intent with probability = difficulty.

    The core policy is ``fsm.input_read_policy``; this wrapper grounds
    it mechanically: a committed move reads as its own class for its
    whole duration, a counter that cannot reach falls back to approach,
    and a projectile about to arrive is blocked.
    """

    kind = "input_reading"
    reads_intent = True
    PROJECTILE_GUARD = 12.0  # block when one is inside this distance

    def __init__(self, rng, difficulty=0.5):
        super().__init__(rng)
        if not 0.0 <= float(difficulty) <= 1.0:
            raise AgentInitError("input_reading: difficulty must be in [0, 1]")
        self.difficulty = float(difficulty)

    def _read_intent(self, state, side, opp_action):
        opp = state.fighters[1 - side]
        if opp.phase in (PH_STARTUP, PH_ACTIVE) and opp.current_move is not None:
            return state.characters[1 - side].moves[opp.current_move].kind
        if opp_action is not None:
            return intent_of(opp_action)
        return "idle"

    def act(self, state, side, opp_action=None):
        me = state.fighters[side]
        toward = ground_action(ACT_FORWARD, me.facing)
        acts = legal_actions(state, side)
        for p in state.projectiles:
            if p.owner != side and abs(p.position - me.position) <= self.PROJECTILE_GUARD:
                heading_in = (p.position - me.position) * p.direction < 0 or \
                    abs(p.position - me.position) <= p.speed
                if heading_in and ACT_BLOCK in acts:
                    return ACT_BLOCK
        intent = self._read_intent(state, side, opp_action)
        choice = input_read_policy(intent, self.difficulty, self.rng,
                                   toward=toward)
        choice = ground_action(choice, me.facing)
        # a counter that cannot connect is worse than closing distance
        move = None
        if choice.move_id is not None:
            move = state.characters[side].moves.get(choice.move_id)
        elif choice.key == "grab":
            move = state.characters[side].grab_move
        if move is not None:
            dist = abs(me.position - state.fighters[1 - side].position)
            if move.projectile is None and move.range < dist:
                choice = toward
        if choice not in acts:
            return ACT_IDLE if toward not in acts else toward
        return choice


class FsmAgent(Agent):
    """Drives ``fsm_agent_act`` over observations.

    A tactic action that is not currently performable (a special with
    no motion buffered, say) drops the tactic and idles the tick: the
    combo fell apart, pick something else next decision.
    """

    kind = "fsm"

    def __init__(self, rng, fsm: FsmDef):
        super().__init__(rng)
        self.fsm = fsm
        self.st = FsmAgentState(fsm.initial)

    def begin_round(self, side):
        self.st = FsmAgentState(self.fsm.initial)

    def act(self, state, side, opp_action=None):
        obs = observe(state, side)
        action = fsm_agent_act(self.fsm, self.st, obs)
        grounded = ground_action(action, state.fighters[side].facing)
        if grounded not in legal_actions(state, side):
            self.st.tactic = None
            self.st.step_index = 0
            return ACT_IDLE
        return grounded

    def annotation(self):
        return self.st.current


class HfsmAgent(FsmAgent):
    """Hierarchical machine run through its flattened equivalent.

    Flattening is behavior-preserving (tested against hfsm_step), and
    the composite "Super/Child" labels surface the hierarchy in replay
    annotations for free.
    """

    kind = "hfsm"

    def __init__(self, rng, hfsm: HfsmDef):
        super().__init__(rng, flatten_hfsm(hfsm))


class MctsAgent(Agent):
    kind = "mcts"

    def __init__(self, rng, cfg: mcts_mod.MctsConfig):
        super().__init__(rng)
        self.cfg = cfg

    def act(self, state, side, opp_action=None):
        return mcts_mod.plan(state, self.cfg, self.rng, side=side)


class HumanAgent(Agent):
    """Last-writer-wins input buffer, sampled once per tick.

    The server thread (or a test) writes ``buffered``; the match loop
    reads it through ``act`` and leaves Idle when nothing arrived.
    """

    kind = "human"
    def __init__(self, rng):
        super().__init__(rng)
        self.buffered: Optional[Action] = None

    def submit(self, action: Action) -> None:
        self.buffered = action

    def act(self, state, side, opp_action=None):
        action, self.buffered = self.buffered, None
        if action is None:
            return ACT_IDLE
        grounded = ground_action(action, state.fighters[side].facing)
        if grounded not in legal_actions(state, side):
            return ACT_IDLE
        return grounded


# --- construction --------------------------------------------------------------

AGENT_KINDS = (
    "random", "input_reading", "fsm", "hfsm", "bt", "mcts",
    "fsm_mcts", "mcts_transitions", "bt_mcts", "human",
)


def _fsm_def_from_params(params, default_file=None) -> FsmDef:
    if "def" in params:
        return FsmDef.from_dict(params["def"])
    if "file" in params:
        return FsmDef.load(params["file"])
    if default_file is not None:
        return FsmDef.load(data_path(default_file))
    raise AgentInitError("fsm agent needs a machine: pass def or file")


def _hfsm_def_from_params(params) -> HfsmDef:
    if "def" in params:
        return HfsmDef.from_dict(params["def"])
    if "file" in params:
        return HfsmDef.load(params["file"])
    raise AgentInitError("hfsm agent needs a machine: pass def or file")


def make_agent(spec, rng: random.Random) -> Agent:
    """Build an agent from a {"kind", "parameters"} spec.

    Raises AgentInitError for unknown kinds or invalid parameters.
    """
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    params = dict(spec.get("parameters") or {})
    if kind not in AGENT_KINDS:
        raise AgentInitError(f"unknown agent kind: {kind!r}")
    try:
        if kind == "random":
            return RandomAgent(rng)
        if kind == "input_reading":
            return InputReadingAgent(rng, params.get("difficulty", 0.5))
        if kind == "fsm":
            return FsmAgent(rng, _fsm_def_from_params(params, "enemy_fsm.json"))
        if kind == "hfsm":
            return HfsmAgent(rng, _hfsm_def_from_params(params))
        if kind == "mcts":
            return MctsAgent(rng, mcts_mod.MctsConfig.from_dict(params))
        if kind == "human":
            return HumanAgent(rng)
        if kind == "bt":
            from .bt import BtAgent
            return BtAgent.from_params(rng, params)
        if kind == "fsm_mcts":
            from .hybrids import FsmMctsAgent
            return FsmMctsAgent.from_params(rng, params)
        if kind == "mcts_transitions":
            from .hybrids import MctsTransitionsAgent
            return MctsTransitionsAgent.from_params(rng, params)
        from .hybrids import BtMctsAgent
        return BtMctsAgent.from_params(rng, params)
    except AgentInitError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise AgentInitError(f"{kind}: bad parameters ({exc})") from exc


__all__ = [
    "AGENT_KINDS", "Agent", "AgentInitError", "FsmAgent", "HfsmAgent",
    "HumanAgent", "InputReadingAgent", "MctsAgent", "RandomAgent",
    "make_agent",
]
