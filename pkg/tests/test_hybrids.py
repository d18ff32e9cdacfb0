"""Hybrid agents: pooled search, macro-transition search, planning leaves.

Derived expectations are cross-checked by direct engine playback first
(one-ply damage comparison for pooled picks, exhaustive two-arm macro
playback for variant B) and only then asserted against the searchers.
"""

import random
import statistics
import time

import pytest

from arena import data_path, default_character
from arena.agents import AgentInitError, make_agent
from arena.bt import FAILURE, RUNNING, SUCCESS, BtRuntime, MctsLeaf
from arena.engine import (
    ACT_BLOCK, ACT_GRAB, ACT_IDLE, attack_action, ground_action,
    initial_state, legal_actions, observe, parse_action, random_legal_action,
    round_result, special_action, step,
)
from arena.fsm import FsmDef, Tactic, Transition
from arena.hybrids import (
    BtMctsAgent, EmptyPoolAfterLegality, HybridFsmState, bt_mcts_leaf_tick,
    enabled_macros, fsm_mcts_act, legal_pool, mcts_transition_act,
    state_action_pool, transition_plan_with_root,
)
from arena.mcts import MctsConfig, plan, plan_with_root

RYU = default_character()
PUNCH = attack_action("punch")
HEAVY = attack_action("heavy")

OFFENSE_POOL = [PUNCH, HEAVY, ACT_GRAB]


def mkstate(pos_l=48.0, pos_r=52.0):
    gs = initial_state((RYU, RYU))
    gs.fighters[0].position = pos_l
    gs.fighters[1].position = pos_r
    return gs


def one_state_fsm(pool, name="melee"):
    return FsmDef({name: [Tactic(name, pool)]}, [], name)


def sample_states(n, seed):
    """Mid-playout states where the left side can act and play goes on."""
    rng = random.Random(seed)
    states = []
    while len(states) < n:
        gs = initial_state((RYU, RYU))
        for _ in range(rng.randrange(20, 200)):
            if round_result(gs) is not None:
                break
            la = random_legal_action(gs, 0, rng.random)
            ra = random_legal_action(gs, 1, rng.random)
            gs = step(gs, la, ra)
        if round_result(gs) is None and observe(gs, 0).can_act:
            states.append(gs)
    return states


# --- derived oracles ---------------------------------------------------------------

def damage_after(state, action, ticks=14):
    """Left plays one action then idles; right blocks throughout."""
    gs = state.clone()
    first = True
    for _ in range(ticks):
        if round_result(gs) is not None:
            break
        la = action if first and action in legal_actions(gs, 0) else ACT_IDLE
        first = False
        ra = ACT_BLOCK if ACT_BLOCK in legal_actions(gs, 1) else ACT_IDLE
        gs = step(gs, la, ra)
    return 100 - gs.fighters[1].health


def test_offensive_pool_oracle_prefers_grab():
    # one-ply comparison: vs a blocker only the grab does damage
    gs = mkstate()
    dmg = {a.key: damage_after(gs, a) for a in OFFENSE_POOL}
    assert dmg["grab"] > 0
    assert dmg["attack:punch"] == 0 and dmg["attack:heavy"] == 0
    assert max(dmg, key=dmg.get) == "grab"


def macro_playback_damage(state, actions, k=10):
    """Left cycles the tactic for k ticks; right blocks; damage dealt."""
    gs = state.clone()
    for j in range(k):
        if round_result(gs) is not None:
            break
        a = ground_action(actions[j % len(actions)], gs.fighters[0].facing)
        if a not in legal_actions(gs, 0):
            a = ACT_IDLE
        ra = ACT_BLOCK if ACT_BLOCK in legal_actions(gs, 1) else ACT_IDLE
        gs = step(gs, a, ra)
    return 100 - gs.fighters[1].health


def test_macro_oracle_offense_beats_defense():
    gs = mkstate()
    offense = macro_playback_damage(gs, [ACT_GRAB])
    defense = macro_playback_damage(gs, [ACT_BLOCK])
    assert offense > defense == 0


# --- variant A: pooled search ------------------------------------------------------

def test_pool_of_one_is_forced_without_search():
    fsm = one_state_fsm([ACT_BLOCK], "turtle")
    st = HybridFsmState("turtle")
    rng = random.Random(7)
    before = rng.getstate()
    action = fsm_mcts_act(fsm, st, mkstate(), MctsConfig(), rng)
    assert action == ACT_BLOCK
    assert rng.getstate() == before  # no budget spent


def test_offensive_pool_vs_blocker_picks_grab():
    fsm = one_state_fsm(OFFENSE_POOL)
    cfg = MctsConfig(iteration_budget=1000, rollout_depth=12,
                     opponent_model="always_block")
    for seed in (1, 2, 3):
        st = HybridFsmState("melee")
        action = fsm_mcts_act(fsm, st, mkstate(), cfg, random.Random(seed))
        assert action == ACT_GRAB


def test_any_search_outcome_stays_in_pool():
    fsm = one_state_fsm(OFFENSE_POOL)
    cfg = MctsConfig(iteration_budget=16, rollout_depth=4)
    pool = set(OFFENSE_POOL)
    for seed, gs in enumerate(sample_states(40, seed=11)):
        st = HybridFsmState("melee")
        action = fsm_mcts_act(fsm, st, gs, cfg, random.Random(seed))
        facing = gs.fighters[0].facing
        grounded = {ground_action(a, facing) for a in pool}
        assert action in grounded or (action == ACT_IDLE and st.pool_misses)


def test_empty_pool_idles_and_reports():
    fireball = FsmDef(
        {"zone": [Tactic("fireball_only", [special_action("fireball")])]},
        [], "zone")
    gs = mkstate()  # fresh state: no motion buffered, special not legal
    with pytest.raises(EmptyPoolAfterLegality):
        legal_pool(fireball, "zone", gs, 0)
    st = HybridFsmState("zone")
    action = fsm_mcts_act(fireball, st, gs, MctsConfig(), random.Random(0))
    assert action == ACT_IDLE
    assert st.pool_misses == 1


EVERYTHING = ["idle", "left", "right", "down", "downfwd", "block", "grab",
              "attack:punch", "attack:heavy", "special:fireball"]


def test_degenerate_pool_matches_plain_search_seed_for_seed():
    fsm = one_state_fsm([parse_action(k) for k in EVERYTHING], "all")
    cfg = MctsConfig(iteration_budget=60, rollout_depth=8)
    for seed in range(6):
        for gs in (mkstate(), mkstate(40.0, 60.0), initial_state((RYU, RYU))):
            st = HybridFsmState("all")
            hybrid = fsm_mcts_act(fsm, st, gs, cfg, random.Random(seed))
            plain = plan(gs, cfg, random.Random(seed))
            assert hybrid == plain


def test_restricted_root_branches_over_the_pool_only():
    gs = mkstate()
    cfg = MctsConfig(iteration_budget=40, rollout_depth=4)
    usable = legal_pool(one_state_fsm(OFFENSE_POOL), "melee", gs, 0)
    _, restricted = plan_with_root(gs, cfg, random.Random(5), 0,
                                   action_filter=frozenset(usable))
    _, plain = plan_with_root(gs, cfg, random.Random(5), 0)
    assert len(restricted.children) == len(usable) == 3
    assert len(restricted.children) < len(plain.children)
    assert len(plain.children) == len(legal_actions(gs, 0))


def test_pooled_search_is_not_slower_than_plain():
    # same budget means the same number of rollouts, and rollouts are
    # the cost; the pooled variant touches fewer children per descent,
    # so it must not LOSE time.  Interleaved medians absorb scheduler
    # spikes on a busy box.
    gs = mkstate()
    fsm = one_state_fsm(OFFENSE_POOL)
    cfg = MctsConfig(iteration_budget=400, rollout_depth=5)
    pooled, plain = [], []
    for i in range(16):
        rng = random.Random(100 + i)
        t0 = time.perf_counter()
        plan(gs, cfg, rng)
        plain.append(time.perf_counter() - t0)
        rng = random.Random(100 + i)
        st = HybridFsmState("melee")
        t0 = time.perf_counter()
        fsm_mcts_act(fsm, st, gs, cfg, rng)
        pooled.append(time.perf_counter() - t0)
    assert statistics.median(pooled) <= statistics.median(plain) * 1.10


# --- variant B: macro transitions ---------------------------------------------------

def offense_defense_fsm():
    return FsmDef(
        {"Offense": [Tactic("grab_it", [ACT_GRAB])],
         "Defense": [Tactic("turtle", [ACT_BLOCK])]},
        [Transition("Offense", "Defense", {"const": True}, 1, 0)],
        "Offense")


def test_single_arm_macro_is_forced():
    fsm = one_state_fsm([ACT_BLOCK], "turtle")
    st = HybridFsmState("turtle")
    rng = random.Random(9)
    before = rng.getstate()
    action = mcts_transition_act(fsm, st, mkstate(), MctsConfig(), rng)
    assert action == ACT_BLOCK
    assert st.current == "turtle"
    assert rng.getstate() == before


def test_transition_search_picks_the_offense_arm():
    fsm = offense_defense_fsm()
    cfg = MctsConfig(iteration_budget=200, rollout_depth=12,
                     opponent_model="always_block")
    for seed in (1, 2, 3):
        st = HybridFsmState("Offense")
        action = mcts_transition_act(fsm, st, mkstate(), cfg,
                                     random.Random(seed))
        assert action == ACT_GRAB
        assert st.current == "Offense"  # the self arm won


def test_search_moves_the_machine_to_the_better_state():
    fsm = FsmDef(
        {"Defense": [Tactic("turtle", [ACT_BLOCK])],
         "Offense": [Tactic("grab_it", [ACT_GRAB])]},
        [Transition("Defense", "Offense", {"const": True}, 1, 0)],
        "Defense")
    cfg = MctsConfig(iteration_budget=200, rollout_depth=12,
                     opponent_model="always_block")
    st = HybridFsmState("Defense")
    action = mcts_transition_act(fsm, st, mkstate(), cfg, random.Random(4))
    assert st.current == "Offense"
    assert action == ACT_GRAB


def test_root_branching_equals_enabled_transitions():
    never = {"field": "opponent_attacking"}  # false: both sides neutral
    fsm = FsmDef(
        {"A": [Tactic("a", [ACT_BLOCK])],
         "B": [Tactic("b", [ACT_GRAB])],
         "C": [Tactic("c", [PUNCH])]},
        [Transition("A", "B", {"const": True}, 2, 0),
         Transition("A", "C", never, 1, 1)],
        "A")
    gs = mkstate()
    cfg = MctsConfig(iteration_budget=30, rollout_depth=4)
    macro, root = transition_plan_with_root(fsm, "A", gs, cfg,
                                            random.Random(0))
    # self arm plus the one enabled transition; the disabled one absent
    assert len(root.children) == 2
    assert {c.action.target for c in root.children} == {"A", "B"}

    both = FsmDef(
        {"A": [Tactic("a", [ACT_BLOCK])],
         "B": [Tactic("b", [ACT_GRAB])],
         "C": [Tactic("c", [PUNCH])]},
        [Transition("A", "B", {"const": True}, 2, 0),
         Transition("A", "C", {"const": True}, 1, 1)],
        "A")
    _, root = transition_plan_with_root(both, "A", gs, cfg, random.Random(0))
    assert len(root.children) == 3


def test_enabled_macros_lists_self_first():
    fsm = offense_defense_fsm()
    arms = enabled_macros(fsm, "Offense", observe(mkstate(), 0))
    assert arms[0].target == "Offense" and arms[0].key.startswith("stay")
    assert [a.target for a in arms[1:]] == ["Defense"]
    assert all(a.k == 10 for a in arms)


# --- behavior-tree planning leaves ---------------------------------------------------

def test_leaf_pool_grab_vs_blocker():
    leaf = MctsLeaf({"iteration_budget": 600, "rollout_depth": 12,
                     "opponent_model": "always_block"},
                    [PUNCH, ACT_GRAB], criterion="offensive")
    status, action = bt_mcts_leaf_tick(leaf, BtRuntime(), mkstate(),
                                       random.Random(2))
    assert status == RUNNING
    assert action == ACT_GRAB


def test_leaf_succeeds_after_its_hit_connects():
    leaf = MctsLeaf({"iteration_budget": 1}, [PUNCH], criterion="offensive")
    rt = BtRuntime()
    rng = random.Random(0)
    gs = mkstate()
    status, action = bt_mcts_leaf_tick(leaf, rt, gs, rng)
    assert (status, action) == (RUNNING, PUNCH)  # pool of one: forced
    gs = step(gs, action, ACT_IDLE)
    for _ in range(30):
        if observe(gs, 0).can_act:
            break
        status, action = bt_mcts_leaf_tick(leaf, rt, gs, rng)
        assert (status, action) == (RUNNING, None)
        gs = step(gs, ACT_IDLE, ACT_IDLE)
    assert gs.fighters[1].health < 100
    status, action = bt_mcts_leaf_tick(leaf, rt, gs, rng)
    assert (status, action) == (SUCCESS, None)


def test_leaf_fails_when_the_owner_is_hit_mid_move():
    # our heavy (startup 6) loses the race to their punch (startup 3)
    leaf = MctsLeaf({"iteration_budget": 1}, [HEAVY], criterion="offensive")
    rt = BtRuntime()
    rng = random.Random(0)
    gs = mkstate()
    status, action = bt_mcts_leaf_tick(leaf, rt, gs, rng)
    assert (status, action) == (RUNNING, HEAVY)
    gs = step(gs, HEAVY, PUNCH)
    for _ in range(10):
        if observe(gs, 0).took_hit:
            break
        gs = step(gs, ACT_IDLE, ACT_IDLE)
    assert observe(gs, 0).took_hit
    status, action = bt_mcts_leaf_tick(leaf, rt, gs, rng)
    assert (status, action) == (FAILURE, None)


def test_leaf_with_no_legal_pool_action_declines():
    leaf = MctsLeaf({"iteration_budget": 1}, [special_action("fireball")])
    status, action = bt_mcts_leaf_tick(leaf, BtRuntime(), mkstate(),
                                       random.Random(0))
    assert (status, action) == (FAILURE, None)


def test_bt_mcts_agent_runs_the_bundled_tree():
    agent = make_agent({"kind": "bt_mcts"}, random.Random(3))
    gs = mkstate()  # close range: the strike branch plans
    agent.begin_round(0)
    action = agent.act(gs, 0)
    facing = gs.fighters[0].facing
    assert action in {ground_action(a, facing)
                      for a in (PUNCH, HEAVY, ACT_GRAB)}
    assert agent.annotation() == "attack_plan"

    far = initial_state((RYU, RYU))  # spawn distance: approach branch
    agent.begin_round(0)
    action = agent.act(far, 0)
    assert action.key in ("right", "left")
    assert agent.annotation() == "walk_in"


# --- closure across sampled play -----------------------------------------------------

def test_pool_closure_over_sampled_states():
    fsm = FsmDef.load(data_path("enemy_fsm.json"))
    cfg = MctsConfig(iteration_budget=8, rollout_depth=4)
    leaf = MctsLeaf({"iteration_budget": 8, "rollout_depth": 4},
                    [ACT_BLOCK, ACT_GRAB, PUNCH])
    leaf_pool = {ACT_BLOCK, ACT_GRAB, PUNCH}
    rng = random.Random(21)
    for gs in sample_states(150, seed=5):
        st = HybridFsmState(fsm.initial)
        action = fsm_mcts_act(fsm, st, gs, cfg, rng)
        facing = gs.fighters[0].facing
        grounded = {ground_action(a, facing)
                    for a in state_action_pool(fsm, st.current)}
        assert action in grounded or (action == ACT_IDLE and st.pool_misses)

        status, leaf_action = bt_mcts_leaf_tick(leaf, BtRuntime(), gs, rng)
        assert status == RUNNING and leaf_action in leaf_pool


# --- construction --------------------------------------------------------------------

def test_make_agent_builds_all_hybrids():
    small = {"iteration_budget": 8, "rollout_depth": 4}
    specs = [
        {"kind": "fsm_mcts", "parameters": {"mcts": small}},
        {"kind": "mcts_transitions", "parameters": {"mcts": small, "k": 6}},
        {"kind": "bt_mcts"},
    ]
    gs = initial_state((RYU, RYU))
    for spec in specs:
        agent = make_agent(spec, random.Random(1))
        agent.begin_round(0)
        action = agent.act(gs, 0)
        assert action in legal_actions(gs, 0)


def test_bad_macro_horizon_rejected():
    with pytest.raises(AgentInitError):
        make_agent({"kind": "mcts_transitions", "parameters": {"k": 0}},
                   random.Random(0))
