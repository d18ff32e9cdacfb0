"""The three FSM/BT x MCTS combination agents.

Variant A (pooled moves): the state machine picks the situation, search
picks the move inside that state's action pool.  The pool is the union
of the state's tactic actions, grounded at the current facing and
intersected with legality before it restricts the planner.

Variant B (macro transitions): search branches over the machine's
enabled transitions instead of primitive moves.  A macro arm is "take
this transition and run the target state's first tactic for k ticks";
the flat bandit reuses the mcts node/selection/backprop machinery and
the returned primitive is the winning macro's first action.

BT hosting: a planning leaf inside a behavior tree gets its decision
from plan() restricted to the leaf's pool; the tree's tick contract
(Running while the move resolves, Success/Failure by the leaf's
criterion) lives in the bt module, this one supplies the host.
"""

from __future__ import annotations

import random
from typing import Mapping

from .agents import Agent, AgentInitError, _fsm_def_from_params
from .bt import BtRuntime, MctsLeaf, load_tree, tick, tree_from_dict
from .engine import (
    ACT_IDLE, LEFT, Action, GameState, _advance, ground_action, legal_actions,
    observe, round_result,
)
from .fsm import FsmDef, fsm_step
from .mcts import (
    MctsConfig, MctsError, MctsNode, TerminalState, _select_child,
    _terminal_payoff, backpropagate, plan, simulate,
)

DEFAULT_MACRO_TICKS = 10


class EmptyPoolAfterLegality(RuntimeError):
    """No action in the state's pool is currently performable."""


class HybridFsmState:
    """Mutable cursor for the pooled/transition hybrids."""

    __slots__ = ("current", "pool_misses")

    def __init__(self, initial: str):
        self.current = initial
        self.pool_misses = 0


# --- variant A: search inside the state's action pool -----------------------------


def state_action_pool(fsm: FsmDef, state_id: str) -> tuple:
    """Union of the state's tactic actions, first appearance order."""
    seen = {}
    for tactic in fsm.states[state_id]:
        for a in tactic.actions:
            seen[a] = None
    return tuple(seen)


def legal_pool(fsm: FsmDef, state_id: str, state: GameState,
               side: int) -> tuple:
    """Grounded pool ∩ legal actions, in the engine's legality order.

    Raises EmptyPoolAfterLegality when nothing in the pool is
    performable right now (callers fall back to Idle and report).
    """
    facing = state.fighters[side].facing
    pool = frozenset(ground_action(a, facing)
                     for a in state_action_pool(fsm, state_id))
    usable = tuple(a for a in legal_actions(state, side) if a in pool)
    if not usable:
        raise EmptyPoolAfterLegality(state_id)
    return usable


def fsm_mcts_act(fsm: FsmDef, st: HybridFsmState, state: GameState,
                 cfg: MctsConfig, rng: random.Random,
                 side: int = LEFT) -> Action:
    """Transition by condition, then plan restricted to the state's pool.

    A one-action pool is forced without spending the budget; an empty
    pool after legality idles the tick and counts the miss on ``st``.
    """
    obs = observe(state, side)
    st.current = fsm_step(fsm, st.current, obs)["next"]
    try:
        usable = legal_pool(fsm, st.current, state, side)
    except EmptyPoolAfterLegality:
        st.pool_misses += 1
        return ACT_IDLE
    if len(usable) == 1:
        return usable[0]
    return plan(state, cfg, rng, side=side, action_filter=frozenset(usable))


class FsmMctsAgent(Agent):
    kind = "fsm_mcts"

    def __init__(self, rng, fsm: FsmDef, cfg: MctsConfig):
        super().__init__(rng)
        self.fsm = fsm
        self.cfg = cfg
        self.st = HybridFsmState(fsm.initial)

    def begin_round(self, side):
        self.st = HybridFsmState(self.fsm.initial)

    def act(self, state, side, opp_action=None):
        return fsm_mcts_act(self.fsm, self.st, state, self.cfg, self.rng,
                            side=side)

    def annotation(self):
        return self.st.current

    @classmethod
    def from_params(cls, rng, params: Mapping) -> "FsmMctsAgent":
        fsm = _fsm_def_from_params(params, "enemy_fsm.json")
        cfg = MctsConfig.from_dict(params.get("mcts") or {})
        return cls(rng, fsm, cfg)


# --- variant B: search over transitions -------------------------------------------


class MacroAction:
    """One abstract arm: move to ``target`` and run its first tactic.

    ``key`` mirrors Action.key so the robust-child tie-break works the
    same way it does for primitive search.
    """

    __slots__ = ("target", "key", "actions", "k")

    def __init__(self, target: str, key: str, actions, k: int):
        if k < 1:
            raise ValueError("macro horizon k must be >= 1")
        self.target = target
        self.key = key
        self.actions = tuple(actions)
        self.k = k


def enabled_macros(fsm: FsmDef, current: str, obs,
                   k: int = DEFAULT_MACRO_TICKS) -> tuple:
    """Self arm first, then one arm per enabled transition.

    The self arm makes the precondition "at least one enabled
    transition" hold everywhere; staying put is always expressible.
    """
    def rep(sid):
        return fsm.states[sid][0].actions

    arms = [MacroAction(current, f"stay:{current}", rep(current), k)]
    for t in fsm._by_source.get(current, ()):
        if t._test(obs):
            arms.append(MacroAction(
                t.target, f"go:{t.target}#{t.index}", rep(t.target), k))
    return tuple(arms)


def _macro_payoff(state, side, macro, cfg, rng, horizon):
    """Play the macro's tactic for k ticks, then roll out as usual."""
    st = state.clone()
    model = cfg.opponent_model
    opp_side = 1 - side
    left = side == LEFT
    me, opp = st.fighters[side], st.fighters[opp_side]
    n = len(macro.actions)
    for j in range(macro.k):
        a = ground_action(macro.actions[j % n], me.facing)
        if a not in legal_actions(st, side):
            a = ACT_IDLE
        o = model.sample(st, opp_side, a, rng)
        if left:
            _advance(st, a, o)
        else:
            _advance(st, o, a)
        if me.health <= 0 or opp.health <= 0 or st.timer <= 0:
            return _terminal_payoff(round_result(st), side)
    return simulate(st, cfg, rng, side, _until=horizon)


def transition_plan_with_root(fsm: FsmDef, current: str, state: GameState,
                              cfg: MctsConfig, rng: random.Random,
                              side: int = LEFT,
                              k: int = DEFAULT_MACRO_TICKS):
    """Pick a macro by budgeted flat search; returns (macro, root).

    Root children are macro arms (inspectable branching); payoffs are
    credited through the regular backpropagation, so the robust-child
    rule and tie-break match primitive planning.
    """
    if round_result(state) is not None:
        raise TerminalState("cannot plan from a decided round")
    obs = observe(state, side)
    arms = enabled_macros(fsm, current, obs, k)
    root = MctsNode(None, True, state, None, [])
    root.children = [MctsNode(m, False, state, None, []) for m in arms]
    if len(arms) == 1:
        return arms[0], root
    horizon = state.tick + max(cfg.rollout_depth, k)
    untried = list(root.children)
    c = cfg.exploration_c
    for _ in range(cfg.iteration_budget):
        node = untried.pop(0) if untried else _select_child(root, c)
        payoff = _macro_payoff(state, side, node.action, cfg, rng, horizon)
        backpropagate([root, node], payoff)
    best = None
    for child in root.children:
        if best is None or child.visits > best.visits or (
                child.visits == best.visits and child.action.key < best.action.key):
            best = child
    return best.action, root


def mcts_transition_act(fsm: FsmDef, st: HybridFsmState, state: GameState,
                        cfg: MctsConfig, rng: random.Random,
                        side: int = LEFT,
                        k: int = DEFAULT_MACRO_TICKS) -> Action:
    """Search over transitions; take the winner, emit its first primitive."""
    macro, _ = transition_plan_with_root(fsm, st.current, state, cfg, rng,
                                         side=side, k=k)
    st.current = macro.target
    action = ground_action(macro.actions[0], state.fighters[side].facing)
    if action not in legal_actions(state, side):
        return ACT_IDLE
    return action


class MctsTransitionsAgent(Agent):
    kind = "mcts_transitions"

    def __init__(self, rng, fsm: FsmDef, cfg: MctsConfig,
                 k: int = DEFAULT_MACRO_TICKS):
        super().__init__(rng)
        if k < 1:
            raise AgentInitError("mcts_transitions: k must be >= 1")
        self.fsm = fsm
        self.cfg = cfg
        self.k = k
        self.st = HybridFsmState(fsm.initial)

    def begin_round(self, side):
        self.st = HybridFsmState(self.fsm.initial)

    def act(self, state, side, opp_action=None):
        return mcts_transition_act(self.fsm, self.st, state, self.cfg,
                                   self.rng, side=side, k=self.k)

    def annotation(self):
        return self.st.current

    @classmethod
    def from_params(cls, rng, params: Mapping) -> "MctsTransitionsAgent":
        fsm = _fsm_def_from_params(params, "enemy_fsm.json")
        cfg = MctsConfig.from_dict(params.get("mcts") or {})
        return cls(rng, fsm, cfg, int(params.get("k", DEFAULT_MACRO_TICKS)))


# --- behavior tree hosting ---------------------------------------------------------


def make_leaf_host(state: GameState, side: int, rng: random.Random):
    """Host closure for one decision tick on a real engine state.

    Declines (None -> leaf Failure) when the leaf's pool has no legal
    member or the search cannot run; the tree falls through to its
    next branch instead of stalling.
    """
    def host(leaf: MctsLeaf, obs):
        filt = None
        if leaf.action_pool:
            facing = state.fighters[side].facing
            pool = frozenset(ground_action(a, facing)
                             for a in leaf.action_pool)
            if not any(a in pool for a in legal_actions(state, side)):
                return None
            filt = pool
        try:
            return plan(state, leaf.config, rng, side=side,
                        action_filter=filt)
        except MctsError:
            return None
    return host


def bt_mcts_leaf_tick(leaf: MctsLeaf, runtime: BtRuntime, state: GameState,
                      rng: random.Random, side: int = LEFT):
    """Tick a planning leaf directly against an engine state.

    Returns (status, action or None); the leaf-as-tree shape makes the
    bt module's tick contract apply verbatim.
    """
    obs = observe(state, side)
    status, action, _ = tick(leaf, runtime, obs,
                             mcts_host=make_leaf_host(state, side, rng))
    return status, action


class BtMctsAgent(Agent):
    """Behavior tree whose planning leaves run real searches."""

    kind = "bt_mcts"

    def __init__(self, rng, tree):
        super().__init__(rng)
        self.tree = tree
        self.rt = BtRuntime()

    def begin_round(self, side):
        self.rt.reset()

    def act(self, state, side, opp_action=None):
        obs = observe(state, side)
        _, action, _ = tick(self.tree, self.rt, obs,
                            mcts_host=make_leaf_host(state, side, self.rng))
        if action is None:
            return ACT_IDLE
        action = ground_action(action, state.fighters[side].facing)
        if action not in legal_actions(state, side):
            self.rt.reset()
            return ACT_IDLE
        return action

    def annotation(self):
        return self.rt.last_emitter

    @classmethod
    def from_params(cls, rng, params: Mapping) -> "BtMctsAgent":
        from . import data_path
        if "def" in params:
            tree = tree_from_dict(params["def"])
        elif "file" in params:
            tree = load_tree(params["file"])
        else:
            tree = load_tree(data_path("enemy_bt_mcts.json"))
        return cls(rng, tree)


__all__ = [
    "DEFAULT_MACRO_TICKS", "EmptyPoolAfterLegality", "HybridFsmState",
    "MacroAction", "FsmMctsAgent", "MctsTransitionsAgent", "BtMctsAgent",
    "state_action_pool", "legal_pool", "fsm_mcts_act", "enabled_macros",
    "transition_plan_with_root", "mcts_transition_act", "make_leaf_host",
    "bt_mcts_leaf_tick",
]
