"""Behavior trees: selector/sequencer composition over executable leaves.

A tree is immutable JSON-loadable data, shared freely between matches;
per-agent progress (which branch is mid-execution, how far into its
tactic) lives in a small BtRuntime.

A sequencer stops at the first failing child, a selector at the first
succeeding one; Running propagates to the root immediately and the
runtime remembers the path, so the next tick re-enters the running leaf
directly instead of re-evaluating the tree from scratch.  That memory
is a deliberate choice: combo tactics span many ticks, and a
restart-from-root reading would drop them the moment any earlier guard
flipped.  The flip side, documented here on purpose: guards above a
running branch are not re-checked until the branch finishes.

Action leaves play an fsm.Tactic one action per tick.  Emitting always
reads Running — success is reported on the tick after the last action
went out — which is also what caps a tick at one emitted action: the
Running status climbs straight to the root before any sibling could
emit.  An mcts leaf delegates one decision to a planner host and
reports by its declared criterion once the move resolves; hosts come
with the hybrid agents, the plain bt agent refuses such trees.
"""

from __future__ import annotations

import json
from typing import Mapping, Optional, Sequence

from .agents import Agent, AgentInitError
from .conditions import compile_condition
from .engine import (
    ACT_IDLE, Action, ground_action, legal_actions, observe, parse_action,
)
from .fsm import Tactic
from .mcts import MctsConfig

SUCCESS = "success"
FAILURE = "failure"
RUNNING = "running"

CRITERION_OFFENSIVE = "offensive"
CRITERION_DEFENSIVE = "defensive"


class BtError(ValueError):
    pass


class MalformedTree(BtError):
    pass


# --- node types -----------------------------------------------------------------


class Selector:
    """Ticks children in order until one succeeds."""

    __slots__ = ("children", "name")

    def __init__(self, children: Sequence, name: Optional[str] = None):
        self.children = tuple(children)
        if not self.children:
            raise MalformedTree("selector needs at least one child")
        self.name = name


class Sequencer:
    """Ticks children in order until one fails."""

    __slots__ = ("children", "name")

    def __init__(self, children: Sequence, name: Optional[str] = None):
        self.children = tuple(children)
        if not self.children:
            raise MalformedTree("sequencer needs at least one child")
        self.name = name


class ConditionLeaf:
    """Predicate over the observation; success iff it holds, never Running."""

    __slots__ = ("condition", "name", "_test")

    def __init__(self, condition, name: Optional[str] = None):
        self.condition = condition
        self._test = compile_condition(condition)
        self.name = name


class ActionLeaf:
    """Plays a tactic one action per tick; Running while any action is out."""

    __slots__ = ("tactic", "name")

    def __init__(self, tactic: Tactic, name: Optional[str] = None):
        self.tactic = tactic
        self.name = name or tactic.name


class MctsLeaf:
    """One planned decision, optionally restricted to an action pool.

    criterion decides what counts as success once the planned move has
    resolved: "offensive" wants a hit landed during its execution,
    "defensive" wants none taken.  Ticking one of these requires a
    planner host (see the hybrid agents); the leaf itself only carries
    configuration.
    """

    __slots__ = ("config", "config_spec", "action_pool", "criterion", "name")

    def __init__(self, config=None, action_pool=None,
                 criterion: str = CRITERION_OFFENSIVE,
                 name: Optional[str] = None):
        if criterion not in (CRITERION_OFFENSIVE, CRITERION_DEFENSIVE):
            raise MalformedTree(f"unknown mcts leaf criterion {criterion!r}")
        if isinstance(config, MctsConfig):
            self.config = config
            self.config_spec = None
        else:
            self.config_spec = dict(config or {})
            self.config = MctsConfig.from_dict(self.config_spec)
        self.action_pool = tuple(action_pool) if action_pool else None
        self.criterion = criterion
        self.name = name or "mcts"


_COMPOSITE_TYPES = {"selector": Selector, "sequencer": Sequencer}


def tree_from_dict(d: Mapping):
    """Build a tree from the JSON schema; MalformedTree on bad shapes."""
    if not isinstance(d, Mapping) or "type" not in d:
        raise MalformedTree(f"node must be a mapping with a type: {d!r}")
    t = d["type"]
    name = d.get("name")
    comp = _COMPOSITE_TYPES.get(t)
    if comp is not None:
        return comp([tree_from_dict(c) for c in d.get("children", ())], name)
    if t == "condition":
        if "if" not in d:
            raise MalformedTree("condition node needs an 'if'")
        return ConditionLeaf(d["if"], name)
    if t == "action":
        if "do" in d:
            # sugar for a one-action tactic
            tactic = Tactic(d["do"], [parse_action(d["do"])])
        elif "tactic" in d:
            tactic = Tactic.from_dict(d["tactic"])
        else:
            raise MalformedTree("action node needs a 'tactic' or 'do'")
        return ActionLeaf(tactic, name)
    if t == "mcts":
        pool = None
        if "pool" in d:
            pool = [parse_action(k) for k in d["pool"]]
        return MctsLeaf(d.get("config"), pool,
                        d.get("criterion", CRITERION_OFFENSIVE), name)
    raise MalformedTree(f"unknown node type {t!r}")


def tree_to_dict(node) -> dict:
    cls = node.__class__
    if cls is Selector or cls is Sequencer:
        d = {"type": "selector" if cls is Selector else "sequencer",
             "children": [tree_to_dict(c) for c in node.children]}
    elif cls is ConditionLeaf:
        d = {"type": "condition", "if": node.condition}
    elif cls is ActionLeaf:
        d = {"type": "action", "tactic": node.tactic.to_dict()}
    elif cls is MctsLeaf:
        d = {"type": "mcts", "criterion": node.criterion}
        if node.config_spec is not None:
            d["config"] = dict(node.config_spec)
        if node.action_pool:
            d["pool"] = [a.key for a in node.action_pool]
    else:
        raise MalformedTree(f"not a tree node: {node!r}")
    if node.name:
        d["name"] = node.name
    return d


def load_tree(path):
    with open(path, "r", encoding="utf-8") as fh:
        return tree_from_dict(json.load(fh))


def contains_mcts_leaf(node) -> bool:
    if isinstance(node, MctsLeaf):
        return True
    if isinstance(node, (Selector, Sequencer)):
        return any(contains_mcts_leaf(c) for c in node.children)
    return False


# --- the oracle ------------------------------------------------------------------


def bt_oracle(node, obs=None) -> str:
    """Status of a condition-only tree by the textbook recursive reading.

    Deliberately naive (no memory, no actions, no short-circuit
    subtleties): it exists to cross-check tick() on constant trees.
    """
    cls = node.__class__
    if cls is Selector:
        for c in node.children:
            if bt_oracle(c, obs) == SUCCESS:
                return SUCCESS
        return FAILURE
    if cls is Sequencer:
        for c in node.children:
            if bt_oracle(c, obs) == FAILURE:
                return FAILURE
        return SUCCESS
    if cls is ConditionLeaf:
        return SUCCESS if node._test(obs) else FAILURE
    raise MalformedTree("the oracle only evaluates condition leaves")


# --- ticking ---------------------------------------------------------------------


class BtRuntime:
    """Per-agent progress: the running path and the running leaf's cursor.

    resume holds one child index per composite along the running path
    (root first) and is empty whenever the last tick settled; cursor is
    the running leaf's private progress (tactic step, or the mcts leaf's
    executing marker).
    """

    __slots__ = ("resume", "cursor", "last_emitter")

    def __init__(self):
        self.resume = []
        self.cursor = None
        self.last_emitter = None

    def reset(self) -> None:
        self.resume = []
        self.cursor = None
        self.last_emitter = None


def tick(tree, runtime: BtRuntime, obs, mcts_host=None):
    """One evaluation pass; returns (status, action or None, runtime).

    The runtime is mutated in place (and returned for convenience): on
    Running it holds the path to re-enter next tick, otherwise it is
    clean.  ``mcts_host`` is a callable (leaf, obs) -> Action or None
    for trees containing mcts leaves.
    """
    resume = runtime.resume
    runtime.resume = []
    out = [None, None]
    status = _tick_node(tree, resume, 0,
                        bool(resume) or runtime.cursor is not None,
                        runtime, obs, mcts_host, out)
    if status != RUNNING:
        runtime.cursor = None
    runtime.last_emitter = out[1]
    return status, out[0], runtime


def _tick_node(node, resume, depth, resuming, rt, obs, host, out):
    cls = node.__class__
    if cls is Selector or cls is Sequencer:
        children = node.children
        if resuming:
            if depth >= len(resume) or resume[depth] >= len(children):
                raise MalformedTree("runtime does not match the tree shape")
            start = resume[depth]
        else:
            start = 0
        stop_on = SUCCESS if cls is Selector else FAILURE
        i = start
        n = len(children)
        while i < n:
            status = _tick_node(children[i], resume, depth + 1,
                                resuming and i == start, rt, obs, host, out)
            if status == RUNNING:
                rt.resume.insert(0, i)
                return RUNNING
            if status == stop_on:
                return status
            i += 1
        return FAILURE if cls is Selector else SUCCESS
    if cls is ConditionLeaf:
        return SUCCESS if node._test(obs) else FAILURE
    if cls is ActionLeaf:
        tactic = node.tactic
        step = rt.cursor if resuming and type(rt.cursor) is int else 0
        if step > 0:
            # something has been emitted; events since then can abort
            if tactic.abort_on is not None and obs.get(tactic.abort_on):
                rt.cursor = None
                return FAILURE
            if step >= len(tactic.actions):
                rt.cursor = None
                return SUCCESS
        out[0] = tactic.actions[step]
        out[1] = node.name
        rt.cursor = step + 1
        return RUNNING
    if cls is MctsLeaf:
        if host is None:
            raise MalformedTree("tree has an mcts leaf but no planner host")
        if resuming and rt.cursor == "executing":
            if obs.get("took_hit"):
                rt.cursor = None
                return FAILURE
            if not obs.get("can_act"):
                return RUNNING
            if node.criterion == CRITERION_OFFENSIVE:
                ok = bool(obs.get("hit_landed"))
            else:
                ok = not obs.get("took_hit")
            rt.cursor = None
            return SUCCESS if ok else FAILURE
        action = host(node, obs)
        if action is None:
            return FAILURE
        out[0] = action
        out[1] = node.name
        rt.cursor = "executing"
        return RUNNING
    raise MalformedTree(f"not a tree node: {node!r}")


# --- the agent -------------------------------------------------------------------


class BtAgent(Agent):
    """Ticks a behavior tree once per actionable tick."""

    kind = "bt"

    def __init__(self, rng, tree):
        super().__init__(rng)
        if contains_mcts_leaf(tree):
            raise AgentInitError(
                "plain bt agent cannot host mcts leaves; use bt_mcts")
        self.tree = tree
        self.rt = BtRuntime()

    def begin_round(self, side: int) -> None:
        self.rt.reset()

    def act(self, state, side, opp_action=None):
        obs = observe(state, side)
        _, action, _ = tick(self.tree, self.rt, obs)
        if action is None:
            return ACT_IDLE
        action = ground_action(action, state.fighters[side].facing)
        if action not in legal_actions(state, side):
            # the emitting tactic cannot proceed (a special without its
            # motion, say); drop the branch and re-evaluate next tick
            self.rt.reset()
            return ACT_IDLE
        return action

    def annotation(self):
        return self.rt.last_emitter

    @classmethod
    def from_params(cls, rng, params: Mapping) -> "BtAgent":
        from . import data_path
        if "def" in params:
            tree = tree_from_dict(params["def"])
        elif "file" in params:
            tree = load_tree(params["file"])
        else:
            tree = load_tree(data_path("enemy_bt.json"))
        return cls(rng, tree)


__all__ = [
    "SUCCESS", "FAILURE", "RUNNING",
    "CRITERION_OFFENSIVE", "CRITERION_DEFENSIVE",
    "BtError", "MalformedTree",
    "Selector", "Sequencer", "ConditionLeaf", "ActionLeaf", "MctsLeaf",
    "tree_from_dict", "tree_to_dict", "load_tree", "contains_mcts_leaf",
    "bt_oracle", "BtRuntime", "tick", "BtAgent",
]
