"""Finite-state machines, hierarchical FSMs, and the agents built on them.

Definitions are immutable data loaded from JSON; the per-agent mutable
bits (current state, tactic cursor) live in small runtime objects so one
definition can drive many concurrent matches.

A state carries a pool of tactics (short scripted action sequences with
a shared purpose); transitions carry data conditions and priorities.
The machine stays in its state until some condition holds, then moves
through the single highest-priority satisfied transition.
"""

from __future__ import annotations

import json
import random
from typing import Mapping, Optional, Sequence

from . import engine
from .conditions import compile_condition
from .engine import (
    ACT_BLOCK, ACT_GRAB, ACT_IDLE, ACT_LEFT, ACT_RIGHT,
    ATTACK, BLOCK, GRAB, IDLE, MOVE, Action, Observation, parse_action,
)

MAX_TACTIC_LEN = 20

ABORT_BLOCKED_HIT = "blocked_hit"
ABORT_TOOK_HIT = "took_hit"


class FsmError(ValueError):
    pass


class UnknownState(FsmError):
    pass


class Tactic:
    """Named action sequence; optionally aborted by a combat event."""

    __slots__ = ("name", "actions", "abort_on")

    def __init__(self, name: str, actions: Sequence[Action],
                 abort_on: Optional[str] = None):
        if not actions:
            raise FsmError(f"tactic {name}: needs at least one action")
        if len(actions) > MAX_TACTIC_LEN:
            raise FsmError(f"tactic {name}: longer than {MAX_TACTIC_LEN}")
        if abort_on not in (None, ABORT_BLOCKED_HIT, ABORT_TOOK_HIT):
            raise FsmError(f"tactic {name}: bad abort_on {abort_on!r}")
        self.name = name
        self.actions = tuple(actions)
        self.abort_on = abort_on

    @classmethod
    def from_dict(cls, d: Mapping) -> "Tactic":
        return cls(
            name=d["name"],
            actions=[parse_action(k) for k in d["actions"]],
            abort_on=d.get("abort_on"),
        )

    def to_dict(self) -> dict:
        d = {"name": self.name, "actions": [a.key for a in self.actions]}
        if self.abort_on:
            d["abort_on"] = self.abort_on
        return d


class Transition:
    __slots__ = ("source", "target", "condition", "priority", "_test", "index")

    def __init__(self, source, target, condition, priority=0, index=0):
        self.source = source
        self.target = target
        self.condition = condition
        self.priority = priority
        self.index = index          # declaration order, breaks priority ties
        self._test = compile_condition(condition)

    @classmethod
    def from_dict(cls, d: Mapping, index: int = 0) -> "Transition":
        return cls(d["from"], d["to"], d["condition"],
                   int(d.get("priority", 0)), index)

    def to_dict(self) -> dict:
        return {"from": self.source, "to": self.target,
                "condition": self.condition, "priority": self.priority}


class FsmDef:
    """states: id -> tactic pool; transitions evaluated by priority."""

    def __init__(self, states: Mapping[str, Sequence[Tactic]],
                 transitions: Sequence[Transition], initial: str):
        if initial not in states:
            raise FsmError(f"initial state {initial!r} not defined")
        for t in transitions:
            if t.source not in states or t.target not in states:
                raise FsmError(
                    f"transition {t.source}->{t.target} references unknown state")
        for sid, pool in states.items():
            if not pool:
                raise FsmError(f"state {sid}: empty tactic pool")
        self.states = {sid: tuple(pool) for sid, pool in states.items()}
        self.initial = initial
        self.transitions = tuple(transitions)
        # pre-sorted per source: priority desc, declaration order asc
        self._by_source: dict[str, tuple] = {}
        for t in transitions:
            self._by_source.setdefault(t.source, []).append(t)
        for sid, ts in self._by_source.items():
            ts.sort(key=lambda t: (-t.priority, t.index))
            self._by_source[sid] = tuple(ts)

    @classmethod
    def from_dict(cls, d: Mapping) -> "FsmDef":
        states = {
            s["id"]: [Tactic.from_dict(t) for t in s["tactic_pool"]]
            for s in d["states"]
        }
        transitions = [Transition.from_dict(t, i)
                       for i, t in enumerate(d["transitions"])]
        return cls(states, transitions, d["initial"])

    @classmethod
    def load(cls, path) -> "FsmDef":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "initial": self.initial,
            "states": [
                {"id": sid, "tactic_pool": [t.to_dict() for t in pool]}
                for sid, pool in self.states.items()
            ],
            "transitions": [t.to_dict() for t in self.transitions],
        }


def fsm_step(fsm: FsmDef, current: str, obs) -> dict:
    """One transition evaluation: {"next": StateId, "fired": Transition|None}."""
    if current not in fsm.states:
        raise UnknownState(current)
    for t in fsm._by_source.get(current, ()):
        if t._test(obs):
            return {"next": t.target, "fired": t}
    return {"next": current, "fired": None}


# --- hierarchical machines ----------------------------------------------------


class HfsmDef:
    """Superstates wrap child machines; outer transitions trump inner ones.

    Entering a superstate (re)activates its child machine's initial
    state.  Outer transitions apply no matter which child is active.
    """

    def __init__(self, superstates: Mapping[str, FsmDef],
                 transitions: Sequence[Transition], initial: str):
        if initial not in superstates:
            raise FsmError(f"initial superstate {initial!r} not defined")
        for t in transitions:
            if t.source not in superstates or t.target not in superstates:
                raise FsmError(
                    f"outer transition {t.source}->{t.target} unknown superstate")
        self.superstates = dict(superstates)
        self.transitions = tuple(transitions)
        self.initial = initial
        self._by_source: dict[str, tuple] = {}
        for t in transitions:
            self._by_source.setdefault(t.source, []).append(t)
        for sid, ts in self._by_source.items():
            ts.sort(key=lambda t: (-t.priority, t.index))
            self._by_source[sid] = tuple(ts)

    @property
    def initial_pair(self):
        return (self.initial, self.superstates[self.initial].initial)

    @classmethod
    def from_dict(cls, d: Mapping) -> "HfsmDef":
        supers = {s["id"]: FsmDef.from_dict(s["children"])
                  for s in d["superstates"]}
        transitions = [Transition.from_dict(t, i)
                       for i, t in enumerate(d["transitions"])]
        return cls(supers, transitions, d["initial"])

    @classmethod
    def load(cls, path) -> "HfsmDef":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def hfsm_step(hfsm: HfsmDef, current, obs):
    """(SuperId, StateId) -> (SuperId, StateId); outer transitions first."""
    sup, child = current
    machine = hfsm.superstates.get(sup)
    if machine is None or child not in machine.states:
        raise UnknownState(current)
    for t in hfsm._by_source.get(sup, ()):
        if t._test(obs):
            target = hfsm.superstates[t.target]
            return (t.target, target.initial)
    return (sup, fsm_step(machine, child, obs)["next"])


def flatten_hfsm(hfsm: HfsmDef) -> FsmDef:
    """Mechanical flattening: used as the equivalence oracle.

    Composite ids "Super/Child"; every outer transition is duplicated
    onto each child of its source superstate, targeting the target's
    initial child, at priority above all inner transitions.
    """
    states = {}
    inner_transitions = []
    max_inner = 0
    for sup, machine in hfsm.superstates.items():
        for t in machine.transitions:
            max_inner = max(max_inner, t.priority)
    outer_boost = max_inner + 1
    idx = 0
    for sup, machine in hfsm.superstates.items():
        for child, pool in machine.states.items():
            states[f"{sup}/{child}"] = pool
        for t in machine.transitions:
            inner_transitions.append(Transition(
                f"{sup}/{t.source}", f"{sup}/{t.target}",
                t.condition, t.priority, idx))
            idx += 1
    outer_transitions = []
    for t in hfsm.transitions:
        source_machine = hfsm.superstates[t.source]
        target_initial = hfsm.superstates[t.target].initial
        for child in source_machine.states:
            outer_transitions.append(Transition(
                f"{t.source}/{child}", f"{t.target}/{target_initial}",
                t.condition, t.priority + outer_boost, idx))
            idx += 1
    initial = f"{hfsm.initial}/{hfsm.superstates[hfsm.initial].initial}"
    return FsmDef(states, outer_transitions + inner_transitions, initial)


# --- input reading ------------------------------------------------------------

# triad counters: the class that beats each read class
_COUNTER = {
    ATTACK: ACT_BLOCK,
    GRAB: engine.attack_action("punch"),
    BLOCK: ACT_GRAB,
}

_RANDOM_CLASSES = (ATTACK, BLOCK, GRAB, MOVE)


def input_read_policy(opponent_intent: str, difficulty: float,
                      rng: random.Random, toward: Action = ACT_RIGHT) -> Action:
    """Counter the read intent with probability = difficulty.

    Attack is answered with Block, Grab with Attack, Block with Grab;
    a moving or idle opponent is approached.  The miss case picks one of
    the four non-idle classes uniformly.  ``toward`` is the approach
    action (stage-direction specific, supplied by the caller).
    """
    if not (0.0 <= difficulty <= 1.0):
        raise ValueError("difficulty must be within [0, 1]")
    if rng.random() < difficulty:
        counter = _COUNTER.get(opponent_intent)
        return counter if counter is not None else toward
    cls = _RANDOM_CLASSES[rng.randrange(4)]
    if cls == ATTACK:
        return engine.attack_action("punch")
    if cls == BLOCK:
        return ACT_BLOCK
    if cls == GRAB:
        return ACT_GRAB
    return toward


# --- agents -------------------------------------------------------------------


class FsmAgentState:
    """Mutable cursor: current state, active tactic, position, RR index."""

    __slots__ = ("current", "tactic", "step_index", "rr", "started")

    def __init__(self, initial: str):
        self.current = initial
        self.tactic: Optional[Tactic] = None
        self.step_index = 0
        self.rr: dict[str, int] = {}
        self.started = False


def _select_tactic(fsm: FsmDef, st: FsmAgentState) -> None:
    pool = fsm.states[st.current]
    n = st.rr.get(st.current, 0)
    st.tactic = pool[n % len(pool)]
    st.rr[st.current] = n + 1
    st.step_index = 0


def fsm_agent_act(fsm: FsmDef, st: FsmAgentState, obs: Observation) -> Action:
    """Advance the machine one decision and emit the tactic's next action.

    Tactic lifecycle: selected round-robin from the state's pool on
    entry/exhaustion, aborted by its abort_on event or by an action that
    is not currently available (e.g. a special with no motion buffered),
    restarted by a self-transition, continued otherwise.
    """
    if not st.started:
        st.started = True
        _select_tactic(fsm, st)
    fired = fsm_step(fsm, st.current, obs)["fired"]
    if fired is not None:
        st.current = fired.target
        _select_tactic(fsm, st)       # self-transitions restart the tactic
    elif st.tactic is not None and st.tactic.abort_on is not None:
        if obs.get(st.tactic.abort_on):
            _select_tactic(fsm, st)
    if st.tactic is None or st.step_index >= len(st.tactic.actions):
        _select_tactic(fsm, st)
    action = st.tactic.actions[st.step_index]
    st.step_index += 1
    return action


__all__ = [
    "Tactic", "Transition", "FsmDef", "HfsmDef", "FsmAgentState",
    "fsm_step", "hfsm_step", "flatten_hfsm", "fsm_agent_act",
    "input_read_policy", "FsmError", "UnknownState",
    "ABORT_BLOCKED_HIT", "ABORT_TOOK_HIT",
]
