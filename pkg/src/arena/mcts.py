"""Budgeted Monte-Carlo tree search over engine states.

The engine resolves both fighters simultaneously, but the search tree is
serialized: planner-decision levels alternate with opponent-decision
levels, and an engine step happens only when an opponent edge completes
the joint action.  Opponent levels branch over the opponent model's
support (a deterministic model collapses them to one child, turning the
search into plain expectimax over the planner's moves).

Bookkeeping convention: a node's ``wins`` accumulate payoff from the
perspective of the player to move AT that node, so selection at any
level maximizes ucb1(child.visits - child.wins, child.visits, ...) and
the same code serves both levels.

Performance notes (rollouts dominate): states are cached in nodes so
selection never re-simulates; rollouts clone once and then mutate
through the engine's in-place advance.
"""

from __future__ import annotations

import math
import random
import time
from typing import Optional, Sequence

from . import engine
from .engine import (
    ACT_BLOCK, ACT_IDLE, LEFT, GameState, _advance, intent_of, legal_actions,
    parse_action, random_legal_action, round_result, uniform_rollout,
)
from .fsm import input_read_policy

INF = float("inf")


class MctsError(Exception):
    pass


class TerminalState(MctsError):
    pass


class NoLegalActions(MctsError):
    pass


def ucb1(child_wins: float, child_visits: int, parent_visits: int,
         c: float) -> float:
    """Standard upper-confidence score; unvisited children come first."""
    if child_visits == 0:
        return INF
    return child_wins / child_visits + c * math.sqrt(
        math.log(parent_visits) / child_visits)


# --- opponent models -----------------------------------------------------------


class OpponentModel:
    """How the searcher imagines the opponent.

    ``support`` bounds the opponent-level branching in the tree;
    ``sample`` draws the opponent's action during rollouts.  Both see
    the planner's same-tick action (the input-reading model uses it).
    """

    deterministic = False

    def support(self, state: GameState, side: int, planner_action) -> tuple:
        raise NotImplementedError

    def sample(self, state: GameState, side: int, planner_action,
               rng: random.Random):
        raise NotImplementedError


class UniformRandom(OpponentModel):
    def support(self, state, side, planner_action):
        return legal_actions(state, side)

    def sample(self, state, side, planner_action, rng):
        return rng.choice(legal_actions(state, side))


class AlwaysBlock(OpponentModel):
    deterministic = True

    def support(self, state, side, planner_action):
        acts = legal_actions(state, side)
        return (ACT_BLOCK,) if ACT_BLOCK in acts else (ACT_IDLE,)

    def sample(self, state, side, planner_action, rng):
        return self.support(state, side, planner_action)[0]


class InputReading(OpponentModel):
    def __init__(self, difficulty: float):
        if not (0.0 <= difficulty <= 1.0):
            raise ValueError("difficulty must be within [0, 1]")
        self.difficulty = difficulty
        self.deterministic = difficulty >= 1.0

    def _toward(self, state, side):
        me = state.fighters[side]
        opp = state.fighters[1 - side]
        return engine.ACT_RIGHT if opp.position > me.position else engine.ACT_LEFT

    def support(self, state, side, planner_action):
        if self.deterministic:
            return (self.sample(state, side, planner_action, _COUNTER_RNG),)
        return legal_actions(state, side)

    def sample(self, state, side, planner_action, rng):
        if not state.fighters[side].can_act:
            return ACT_IDLE
        act = input_read_policy(intent_of(planner_action), self.difficulty,
                                rng, toward=self._toward(state, side))
        if act in legal_actions(state, side):
            return act
        return ACT_IDLE


# deterministic models take an rng positionally but their outcome ignores it
_COUNTER_RNG = random.Random(0)


class Scripted(OpponentModel):
    """Cycles a fixed action sequence, indexed by absolute tick."""

    deterministic = True

    def __init__(self, sequence: Sequence):
        if not sequence:
            raise ValueError("scripted model needs a non-empty sequence")
        self.sequence = tuple(
            parse_action(a) if isinstance(a, str) else a for a in sequence)

    def support(self, state, side, planner_action):
        return (self.sample(state, side, planner_action, _COUNTER_RNG),)

    def sample(self, state, side, planner_action, rng):
        act = self.sequence[state.tick % len(self.sequence)]
        if act in legal_actions(state, side):
            return act
        return ACT_IDLE


def make_opponent_model(spec) -> OpponentModel:
    """Model from a config value: name string or {"kind": ..., ...}."""
    if isinstance(spec, OpponentModel):
        return spec
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec["kind"]
    if kind == "uniform_random":
        return UniformRandom()
    if kind == "always_block":
        return AlwaysBlock()
    if kind == "input_reading":
        return InputReading(float(spec.get("difficulty", 0.5)))
    if kind == "scripted":
        return Scripted(spec["sequence"])
    raise ValueError(f"unknown opponent model: {kind!r}")


# --- configuration --------------------------------------------------------------


class MctsConfig:
    __slots__ = ("iteration_budget", "time_budget_ms", "exploration_c",
                 "rollout_depth", "opponent_model", "eval_weights",
                 "early_stop")

    def __init__(self, iteration_budget=300, time_budget_ms=None,
                 exploration_c=1.414, rollout_depth=60,
                 opponent_model="uniform_random",
                 eval_weights=(0.8, 0.1, 0.1), early_stop=False):
        if iteration_budget is None and time_budget_ms is None:
            raise ValueError("need an iteration budget or a time budget")
        if iteration_budget is not None and iteration_budget < 1:
            raise ValueError("iteration_budget must be >= 1")
        if exploration_c < 0:
            raise ValueError("exploration_c must be >= 0")
        if rollout_depth < 1:
            raise ValueError("rollout_depth must be >= 1")
        if abs(sum(eval_weights) - 1.0) > 1e-9:
            raise ValueError("eval_weights must sum to 1")
        self.iteration_budget = iteration_budget
        self.time_budget_ms = time_budget_ms
        self.exploration_c = exploration_c
        self.rollout_depth = rollout_depth
        self.opponent_model = make_opponent_model(opponent_model)
        self.eval_weights = tuple(eval_weights)
        # stop once the most-visited root child cannot be overtaken in the
        # remaining iterations; the returned action is provably the one a
        # full-budget run would pick, only the spent budget differs
        self.early_stop = bool(early_stop)

    @classmethod
    def from_dict(cls, d) -> "MctsConfig":
        return cls(
            iteration_budget=d.get("iteration_budget", 300),
            time_budget_ms=d.get("time_budget_ms"),
            exploration_c=float(d.get("exploration_c", 1.414)),
            rollout_depth=int(d.get("rollout_depth", 60)),
            opponent_model=d.get("opponent_model", "uniform_random"),
            eval_weights=tuple(d.get("eval_weights", (0.8, 0.1, 0.1))),
            early_stop=bool(d.get("early_stop", False)),
        )


# --- evaluation ------------------------------------------------------------------


def evaluate(state: GameState, side: int, weights) -> float:
    """Positional payoff in [0, 1] from ``side``'s perspective.

    Three centered terms: health lead, center control, and the health
    lead scaled by how much of the round has elapsed (a lead matters
    more the closer the timeout is).
    """
    me = state.fighters[side]
    opp = state.fighters[1 - side]
    my_max = state.characters[side].max_health
    opp_max = state.characters[1 - side].max_health
    lead = (me.health / my_max - opp.health / opp_max) / 2.0

    w_health, w_position, w_time = weights
    score = w_health * (0.5 + lead)
    if w_position:
        half = engine.STAGE_LENGTH / 2.0
        centering = (abs(opp.position - half) - abs(me.position - half)) / (2.0 * half)
        score += w_position * (0.5 + centering)
    if w_time:
        elapsed = 1.0 - state.timer / state.round_length
        score += w_time * (0.5 + lead * elapsed)
    if score < 0.0:
        return 0.0
    if score > 1.0:
        return 1.0
    return score


def _terminal_payoff(result: dict, side: int) -> float:
    winner = result["winner"]
    if winner == "draw":
        return 0.5
    me = "left" if side == LEFT else "right"
    return 1.0 if winner == me else 0.0


# --- simulation ------------------------------------------------------------------


def simulate(state: GameState, cfg: MctsConfig, rng: random.Random,
             side: int = LEFT, _preplay=None, _until=None) -> float:
    """Rollout: planner plays uniform random legal, opponent per model.

    The cutoff is a fixed horizon: rollout_depth ticks past the decision
    point (``_until`` carries the absolute horizon tick when the rollout
    starts below the root, so every leaf is evaluated at the same game
    time).  Terminal payoff if the round ends first, else the positional
    evaluation at the horizon.  This is the search's hot loop; locals
    are hoisted deliberately.
    """
    res = round_result(state)
    if res is not None:
        return _terminal_payoff(res, side)
    st = state.clone()
    opp_side = 1 - side
    model = cfg.opponent_model
    until = state.tick + cfg.rollout_depth if _until is None else _until
    rand = rng.random
    adv = _advance
    fighters = st.fighters
    uniform_opp = type(model) is UniformRandom
    left_first = side == LEFT
    if _preplay is not None:
        # complete a half-chosen joint action (opponent-level expansion)
        opp_act = model.sample(st, opp_side, _preplay, rng)
        if left_first:
            adv(st, _preplay, opp_act)
        else:
            adv(st, opp_act, _preplay)
        res = round_result(st)
        if res is not None:
            return _terminal_payoff(res, side)
    me, opp = fighters[side], fighters[opp_side]
    if uniform_opp:
        # both sides draw uniform legal; the engine kernel runs the whole
        # rollout without per-tick python call overhead
        uniform_rollout(st, until, rand)
        if me.health <= 0 or opp.health <= 0 or st.timer <= 0:
            return _terminal_payoff(round_result(st), side)
        return evaluate(st, side, cfg.eval_weights)
    draw = random_legal_action
    t = st.tick
    while t < until:
        planner_act = draw(st, side, rand)
        opp_act = model.sample(st, opp_side, planner_act, rng)
        if left_first:
            adv(st, planner_act, opp_act)
        else:
            adv(st, opp_act, planner_act)
        t += 1
        if me.health <= 0 or opp.health <= 0 or st.timer <= 0:
            return _terminal_payoff(round_result(st), side)
    return evaluate(st, side, cfg.eval_weights)


# --- the tree ---------------------------------------------------------------------


class MctsNode:
    """One search node; ``planner_to_move`` marks the level.

    Opponent-level nodes share their parent's engine state and remember
    the planner's pending action; the joint step happens when one of
    their children is created.
    """

    __slots__ = ("action", "planner_to_move", "state", "pending", "wins",
                 "visits", "children", "untried", "terminal")

    def __init__(self, action, planner_to_move, state, pending, untried):
        self.action = action          # edge from parent (None at root)
        self.planner_to_move = planner_to_move
        self.state = state
        self.pending = pending        # planner action awaiting the opponent's
        self.wins = 0.0
        self.visits = 0
        self.children = []
        self.untried = untried        # list, popped front-first
        self.terminal = None          # payoff when the state is decided


def backpropagate(path, payoff: float) -> None:
    """Credit a playout along leaf->root (order immaterial here).

    Every node gains a visit; wins accumulate in the perspective of the
    player to move at that node, so one formula serves both levels.
    """
    for n in path:
        n.visits += 1
        n.wins += payoff if n.planner_to_move else 1.0 - payoff


# v ** -0.5 looked up instead of computed; selection runs this per child
# per descent.  Indices past the table (huge budgets) fall back to pow.
_INV_SQRT = tuple(v ** -0.5 for v in range(1, 4097))


def _select_child(node: MctsNode, c: float,
                  _isq=_INV_SQRT, _cap=len(_INV_SQRT)) -> MctsNode:
    best = None
    best_score = -1.0
    scale = c * math.sqrt(math.log(node.visits))
    for child in node.children:
        v = child.visits
        if v == 0:
            return child
        inv = _isq[v - 1] if v <= _cap else v ** -0.5
        score = (v - child.wins) / v + scale * inv
        if score > best_score:
            best_score = score
            best = child
    return best


def plan(state: GameState, cfg: MctsConfig, rng: random.Random,
         side: int = LEFT, action_filter=None) -> "engine.Action":
    """Choose an action: budgeted select/expand/simulate/backpropagate.

    ``action_filter`` restricts the planner's action set at every
    planner level (hybrid pool restriction); rollouts stay unrestricted.
    Returns the most-visited root child's action, ties broken by the
    lexicographically smallest action key.  A single legal action is
    returned immediately without spending the budget.
    """
    return plan_with_root(state, cfg, rng, side, action_filter)[0]


def plan_with_root(state, cfg, rng, side=LEFT, action_filter=None):
    """plan() but also returns the searched root (instrumentation)."""
    if round_result(state) is not None:
        raise TerminalState("cannot plan from a decided round")
    acts = legal_actions(state, side)
    if action_filter is not None:
        acts = tuple(a for a in acts if a in action_filter)
    if not acts:
        raise NoLegalActions("planner has no actions here")
    root = MctsNode(None, True, state, None, list(acts))
    if len(acts) == 1:
        return acts[0], root         # forced move, no search needed
    _search(root, cfg, rng, side, action_filter)
    best = None
    for child in root.children:
        if best is None or child.visits > best.visits or (
                child.visits == best.visits and child.action.key < best.action.key):
            best = child
    return best.action, root


def _search(root, cfg, rng, side, action_filter):
    opp_side = 1 - side
    model = cfg.opponent_model
    c = cfg.exploration_c
    horizon = root.state.tick + cfg.rollout_depth
    budget = cfg.iteration_budget
    early = cfg.early_stop
    deadline = None
    if cfg.time_budget_ms is not None:
        deadline = time.perf_counter() + cfg.time_budget_ms / 1000.0
        if budget is None:
            budget = 1 << 62
    for i in range(budget):
        if deadline is not None and time.perf_counter() >= deadline:
            break
        node = root
        path = [root]
        # selection
        while not node.untried and node.children and node.terminal is None:
            node = _select_child(node, c)
            path.append(node)
        # expansion
        if node.terminal is not None:
            payoff = node.terminal
        elif node.untried:
            act = node.untried.pop(0)
            if node.planner_to_move:
                child = MctsNode(
                    act, False, node.state, act,
                    list(model.support(node.state, opp_side, act)))
                node.children.append(child)
                path.append(child)
                payoff = simulate(node.state, cfg, rng, side, _preplay=act,
                                  _until=horizon)
            else:
                st = node.state.clone()
                if side == LEFT:
                    _advance(st, node.pending, act)
                else:
                    _advance(st, act, node.pending)
                res = round_result(st)
                if res is not None:
                    child = MctsNode(act, True, st, None, [])
                    child.terminal = _terminal_payoff(res, side)
                    node.children.append(child)
                    path.append(child)
                    payoff = child.terminal
                else:
                    acts = legal_actions(st, side)
                    if action_filter is not None:
                        filtered = tuple(a for a in acts if a in action_filter)
                        acts = filtered if filtered else (ACT_IDLE,)
                    child = MctsNode(act, True, st, None, list(acts))
                    node.children.append(child)
                    path.append(child)
                    payoff = (simulate(st, cfg, rng, side, _until=horizon)
                              if st.tick < horizon
                              else evaluate(st, side, cfg.eval_weights))
        else:
            payoff = simulate(node.state, cfg, rng, side,
                              _preplay=node.pending if not node.planner_to_move else None,
                              _until=horizon)
        backpropagate(path, payoff)
        if early and 2 * i >= budget:
            # each iteration visits exactly one root child, so once the
            # leader's margin exceeds the remaining iterations no other
            # child can catch up (new expansions start at zero); the
            # robust choice is already final and strictly unique
            best = second = 0
            for ch in root.children:
                v = ch.visits
                if v > best:
                    second = best
                    best = v
                elif v > second:
                    second = v
            if best - second > budget - 1 - i:
                break
    return root
