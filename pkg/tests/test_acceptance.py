"""End-to-end acceptance run.

One test per bar the build has to clear.  Each test prints a single
summary line with the measured numbers and enforces its own wall-clock
budget, so a slow or wrong build fails loudly here rather than quietly
elsewhere.  References are restated locally (hand tables, brute-force
recounts, textbook recursion) instead of imported, so a bug in shared
helpers cannot vouch for itself.
"""

import random
import time
from collections import Counter

from arena import data_path, default_character, initial_state, observe, step
from arena.bt import (
    FAILURE, RUNNING, SUCCESS, BtRuntime, ConditionLeaf, Selector, Sequencer,
    bt_oracle, tick,
)
from arena.engine import (
    ACT_GRAB, ATTACK, BLOCK, GRAB, IDLE, INTENT_CLASSES, LEFT_WINS, MOVE,
    NEUTRAL_OUTCOME, RIGHT_WINS, TRADE, ground_action, legal_actions,
    parse_action, random_legal_action, resolve_interaction, round_result,
)
from arena.fsm import FsmDef, HfsmDef, Tactic, flatten_hfsm, fsm_step, hfsm_step
from arena.hybrids import (
    HybridFsmState, fsm_mcts_act, make_leaf_host, state_action_pool,
)
from arena.bt import ActionLeaf, MctsLeaf, load_tree
from arena.match import MatchConfig, derive_seed, run_match
from arena.mcts import MctsConfig, plan, plan_with_root
from arena.mining import count_ngrams, decision_streams, mine_tactics
from arena.replay import verify_replay

RYU = default_character()
CHARS = (RYU, RYU)


def _report(name, detail, t0, limit):
    elapsed = time.perf_counter() - t0
    assert elapsed < limit, f"{name}: {elapsed:.2f}s over the {limit:.0f}s budget"
    print(f"PASS {name}: {detail} [{elapsed:.2f}s < {limit:.0f}s]")


# --- triad table -------------------------------------------------------------

TRIAD_TABLE = {
    (ATTACK, ATTACK): TRADE,
    (ATTACK, BLOCK): RIGHT_WINS,
    (ATTACK, GRAB): LEFT_WINS,
    (ATTACK, MOVE): LEFT_WINS,
    (ATTACK, IDLE): LEFT_WINS,
    (BLOCK, ATTACK): LEFT_WINS,
    (BLOCK, BLOCK): NEUTRAL_OUTCOME,
    (BLOCK, GRAB): RIGHT_WINS,
    (BLOCK, MOVE): NEUTRAL_OUTCOME,
    (BLOCK, IDLE): NEUTRAL_OUTCOME,
    (GRAB, ATTACK): RIGHT_WINS,
    (GRAB, BLOCK): LEFT_WINS,
    (GRAB, GRAB): NEUTRAL_OUTCOME,
    (GRAB, MOVE): LEFT_WINS,
    (GRAB, IDLE): LEFT_WINS,
    (MOVE, ATTACK): RIGHT_WINS,
    (MOVE, BLOCK): NEUTRAL_OUTCOME,
    (MOVE, GRAB): RIGHT_WINS,
    (MOVE, MOVE): NEUTRAL_OUTCOME,
    (MOVE, IDLE): NEUTRAL_OUTCOME,
    (IDLE, ATTACK): RIGHT_WINS,
    (IDLE, BLOCK): NEUTRAL_OUTCOME,
    (IDLE, GRAB): RIGHT_WINS,
    (IDLE, MOVE): NEUTRAL_OUTCOME,
    (IDLE, IDLE): NEUTRAL_OUTCOME,
}


def test_triad_table():
    t0 = time.perf_counter()
    assert set(TRIAD_TABLE) == {(a, b) for a in INTENT_CLASSES
                                for b in INTENT_CLASSES}
    hits = sum(resolve_interaction(a, b) == want
               for (a, b), want in TRIAD_TABLE.items())
    assert hits == 25
    _report("triad table", "25/25 pairings match the hand table", t0, 1.0)


# --- turnstile + hierarchy ----------------------------------------------------

TURNSTILE_EVENTS = ("coin", "push", "break")


def test_turnstile_and_hfsm_flattening():
    t0 = time.perf_counter()
    flat_ts = FsmDef.load(data_path("turnstile.json"))
    cur, visited = "Locked", []
    for ev in ("push", "coin", "push", "coin", "coin", "push"):
        cur = fsm_step(flat_ts, cur, {"event": ev})["next"]
        visited.append(cur)
    assert visited == ["Locked", "Unlocked", "Locked",
                       "Unlocked", "Unlocked", "Locked"]

    hfsm = HfsmDef.load(data_path("turnstile_hfsm.json"))
    flat = flatten_hfsm(hfsm)

    # transition tables over every reachable configuration
    h_next, f_next = {}, {}
    seen, frontier = {hfsm.initial_pair}, [hfsm.initial_pair]
    while frontier:
        h = frontier.pop()
        for ev in TURNSTILE_EVENTS:
            h2 = hfsm_step(hfsm, h, {"event": ev})
            h_next[(h, ev)] = h2
            if h2 not in seen:
                seen.add(h2)
                frontier.append(h2)
    for h in seen:
        assert hfsm_step(hfsm, h, {"event": "break"})[0] == "NonFunctional"
    f_seen = {f"{hfsm.initial_pair[0]}/{hfsm.initial_pair[1]}"}
    frontier = list(f_seen)
    while frontier:
        f = frontier.pop()
        for ev in TURNSTILE_EVENTS:
            f2 = fsm_step(flat, f, {"event": ev})["next"]
            f_next[(f, ev)] = f2
            if f2 not in f_seen:
                f_seen.add(f2)
                frontier.append(f2)

    # every event sequence up to length 12, shared prefixes walked once
    count = 0
    stack = [(hfsm.initial_pair,
              f"{hfsm.initial_pair[0]}/{hfsm.initial_pair[1]}", 0)]
    while stack:
        h, f, depth = stack.pop()
        if depth == 12:
            continue
        for ev in TURNSTILE_EVENTS:
            h2, f2 = h_next[(h, ev)], f_next[(f, ev)]
            assert f2 == f"{h2[0]}/{h2[1]}", (h, ev, h2, f2)
            count += 1
            stack.append((h2, f2, depth + 1))
    assert count == (3 ** 13 - 3) // 2  # all 797,160 sequences
    _report("turnstile + flattening",
            f"pinned sequence ok, break absorbs from {len(seen)} configs, "
            f"{count} sequences agree with the flattened machine", t0, 10.0)


# --- behavior-tree oracle ------------------------------------------------------


def _random_const_tree(rng, depth):
    if depth == 0 or rng.random() < 0.3:
        return ConditionLeaf({"const": rng.random() < 0.5})
    cls = Selector if rng.random() < 0.5 else Sequencer
    kids = [_random_const_tree(rng, depth - 1)
            for _ in range(rng.randint(1, 4))]
    return cls(kids)


class _ReadLog(dict):
    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.reads = []

    def get(self, key):
        self.reads.append(key)
        return super().get(key)


def _random_field_tree(rng, depth, counter, obs):
    if depth == 0 or rng.random() < 0.3:
        field = f"f{counter[0]}"
        counter[0] += 1
        obs[field] = rng.random() < 0.5
        return ConditionLeaf({"field": field})
    cls = Selector if rng.random() < 0.5 else Sequencer
    kids = [_random_field_tree(rng, depth - 1, counter, obs)
            for _ in range(rng.randint(1, 4))]
    return cls(kids)


def _reference_walk(node, obs, visits):
    """Textbook short-circuit evaluation, logging leaf probes in order."""
    if isinstance(node, ConditionLeaf):
        field = node.condition["field"]
        visits.append(field)
        return SUCCESS if obs[field] else FAILURE
    stop = SUCCESS if isinstance(node, Selector) else FAILURE
    for child in node.children:
        if _reference_walk(child, obs, visits) == stop:
            return stop
    return FAILURE if isinstance(node, Selector) else SUCCESS


def test_bt_oracle_equivalence():
    t0 = time.perf_counter()
    rng = random.Random(424242)
    for _ in range(1000):
        tree = _random_const_tree(rng, 4)
        status, action, _ = tick(tree, BtRuntime(), {})
        assert action is None
        assert status == bt_oracle(tree)

    checked = 0
    for _ in range(300):
        obs = _ReadLog()
        tree = _random_field_tree(rng, 4, [0], obs)
        visits = []
        want = _reference_walk(tree, dict(obs), visits)
        status, _, _ = tick(tree, BtRuntime(), obs)
        assert status == want
        assert obs.reads == visits  # same leaves, same order, nothing extra
        checked += len(visits)
    _report("bt oracle", "1000/1000 random trees agree, short-circuit "
            f"probe order exact over {checked} leaf visits", t0, 10.0)


# --- mcts convergence ----------------------------------------------------------


def _one_decision_state():
    gs = initial_state(CHARS)
    gs.fighters[0].position, gs.fighters[1].position = 48.0, 52.0
    gs.fighters[0].health = gs.fighters[1].health = 10
    gs.timer = 6
    return gs


def test_mcts_convergence_on_the_forced_grab():
    t0 = time.perf_counter()
    cfg = MctsConfig(iteration_budget=1000, opponent_model="always_block")
    grabs = sum(plan(_one_decision_state(), cfg, random.Random(seed))
                is ACT_GRAB for seed in range(100))
    assert grabs >= 99
    _report("mcts convergence",
            f"grab chosen in {grabs}/100 seeded runs (budget 1000)", t0, 30.0)


# --- mcts strength --------------------------------------------------------------

STRENGTH_SPEC = {"kind": "mcts",
                 "parameters": {"iteration_budget": 300, "rollout_depth": 20}}


def test_mcts_strength_against_random():
    t0 = time.perf_counter()
    wins = 0
    for i in range(200):
        seed = derive_seed(2024, "strength", i)
        agents = (STRENGTH_SPEC, "random") if i % 2 == 0 \
            else ("random", STRENGTH_SPEC)
        rep = run_match(MatchConfig(CHARS, agents, seed=seed),
                        record_annotations=False)
        wins += rep.result["winner"] == ("left" if i % 2 == 0 else "right")
    assert wins >= 160, f"only {wins}/200 match wins at budget 300"
    _report("mcts strength",
            f"{wins}/200 matches won vs random at budget 300", t0, 120.0)


# --- input-reading difficulty ----------------------------------------------------


def test_difficulty_scales_monotonically():
    t0 = time.perf_counter()
    rates = []
    for level in (0.0, 0.25, 0.5, 0.75, 1.0):
        reader = {"kind": "input_reading", "parameters": {"difficulty": level}}
        wins = 0
        for i in range(200):
            seed = derive_seed(7, "difficulty", level, i)
            agents = (reader, "random") if i % 2 == 0 else ("random", reader)
            rep = run_match(MatchConfig(CHARS, agents, seed=seed),
                            record_annotations=False)
            wins += rep.result["winner"] == ("left" if i % 2 == 0 else "right")
        rates.append(wins / 200)
    assert all(b >= a for a, b in zip(rates, rates[1:])), rates
    assert rates[-1] == 1.0, rates
    _report("difficulty monotonicity",
            "win rates " + " <= ".join(f"{r:.3f}" for r in rates), t0, 180.0)


# --- determinism -----------------------------------------------------------------


def test_replay_determinism_and_verification():
    t0 = time.perf_counter()
    mcts = {"kind": "mcts",
            "parameters": {"iteration_budget": 60, "rollout_depth": 12}}
    verified = 0
    for seed in range(50):
        cfg = MatchConfig(CHARS, ("random", mcts), seed=seed)
        a = run_match(cfg, record_annotations=False)
        b = run_match(cfg, record_annotations=False)
        assert a.digest == b.digest, f"seed {seed} diverged"
        assert verify_replay(a) and verify_replay(b)
        verified += 2
    _report("determinism",
            f"50/50 digest pairs identical, {verified} replays verified",
            t0, 120.0)


# --- hybrid pool closure + reduction ---------------------------------------------


def _sampled_states(n, seed):
    rng = random.Random(seed)
    states = []
    while len(states) < n:
        gs = initial_state(CHARS)
        for _ in range(rng.randrange(20, 200)):
            if round_result(gs) is not None:
                break
            gs = step(gs, random_legal_action(gs, 0, rng.random),
                      random_legal_action(gs, 1, rng.random))
        if round_result(gs) is None and observe(gs, 0).can_act:
            states.append(gs)
    return states


def _tree_emittable(node, facing):
    out = set()
    if isinstance(node, (Selector, Sequencer)):
        for child in node.children:
            out |= _tree_emittable(child, facing)
    elif isinstance(node, ActionLeaf):
        out |= {ground_action(a, facing).key for a in node.tactic.actions}
    elif isinstance(node, MctsLeaf) and node.action_pool:
        out |= {ground_action(a, facing).key for a in node.action_pool}
    return out


def test_hybrid_pool_closure_and_reduction():
    from arena.agents import make_agent

    t0 = time.perf_counter()
    states = _sampled_states(250, 20240)

    # closure, variant A: 7,500 decisions stay inside the current pool
    fsm_agent = make_agent({"kind": "fsm_mcts", "parameters": {
        "mcts": {"iteration_budget": 8, "rollout_depth": 4}}},
        random.Random(1))
    decisions = 0
    for round_idx in range(30):
        for gs in states:
            misses = fsm_agent.st.pool_misses
            action = fsm_agent.act(gs, 0)
            decisions += 1
            facing = gs.fighters[0].facing
            pool = {ground_action(a, facing).key
                    for a in state_action_pool(fsm_agent.fsm,
                                               fsm_agent.st.current)}
            if action.key not in pool:
                assert action.key == "idle"
                assert fsm_agent.st.pool_misses == misses + 1
    assert decisions == 7500

    # closure, leaf-hosted: 2,500 decisions stay inside leaf pools
    bt_agent = make_agent("bt_mcts", random.Random(2))
    bt_decisions = 0
    for round_idx in range(10):
        for gs in states:
            action = bt_agent.act(gs, 0)
            bt_decisions += 1
            allowed = _tree_emittable(bt_agent.tree, gs.fighters[0].facing)
            allowed.add("idle")
            assert action.key in allowed
    assert decisions + bt_decisions == 10000

    # reduction: restricted root branching strictly below plain search
    cfg = MctsConfig(iteration_budget=40, rollout_depth=4)
    fsm = FsmDef.load(data_path("enemy_fsm.json"))
    pooled_total = plain_total = 0
    probe = make_agent({"kind": "fsm_mcts", "parameters": {
        "mcts": {"iteration_budget": 8, "rollout_depth": 4}}},
        random.Random(3))
    for gs in states[:40]:
        probe.act(gs, 0)  # advances probe.st.current like the real agent
        facing = gs.fighters[0].facing
        pool = [ground_action(a, facing)
                for a in state_action_pool(fsm, probe.st.current)]
        usable = frozenset(a for a in pool if a in legal_actions(gs, 0))
        if len(usable) < 2:
            continue  # forced moves never reach the search
        _, pooled_root = plan_with_root(gs, cfg, random.Random(9),
                                        action_filter=usable)
        _, plain_root = plan_with_root(gs, cfg, random.Random(9))
        assert len(pooled_root.children) <= len(plain_root.children)
        pooled_total += len(pooled_root.children)
        plain_total += len(plain_root.children)
    assert pooled_total < plain_total

    # degenerate: a one-state everything-pool hybrid equals plain search
    everything = ["idle", "left", "right", "down", "downfwd", "block",
                  "grab", "attack:punch", "attack:heavy", "special:fireball"]
    degenerate = FsmDef(
        {"all": [Tactic("any", [parse_action(k) for k in everything])]},
        [], "all")
    deg_cfg = MctsConfig(iteration_budget=50, rollout_depth=6)
    agreements = 0
    for seed in range(4):
        for gs in states[:5]:
            st = HybridFsmState("all")
            hybrid = fsm_mcts_act(degenerate, st, gs, deg_cfg,
                                  random.Random(seed))
            plain = plan(gs, deg_cfg, random.Random(seed))
            assert hybrid == plain
            agreements += 1
    _report("hybrid closure + reduction",
            f"{decisions + bt_decisions} decisions pool-closed, root "
            f"branching {pooled_total} < {plain_total}, degenerate agrees "
            f"{agreements}/{agreements} seed-for-seed", t0, 120.0)


# --- tactic-miner fidelity --------------------------------------------------------


def _brute_force_counts(streams, max_len):
    out = {}
    for stream in streams:
        labels = [lab for lab, _ in stream]
        keys = [k for _, k in stream]
        for i in range(len(stream)):
            for n in range(1, max_len + 1):
                if i + n > len(stream):
                    break
                window = labels[i:i + n]
                if all(x == window[0] for x in window):
                    out.setdefault(window[0], Counter())[
                        tuple(keys[i:i + n])] += 1
    return out


def test_miner_fidelity_against_brute_force():
    t0 = time.perf_counter()
    logs = [run_match(MatchConfig(CHARS, ("random", "random"),
                                  round_length=150, seed=s))
            for s in range(20)]
    streams = decision_streams(logs)
    grams = 0
    for max_len in (1, 2, 3):
        got = count_ngrams(streams, max_len)
        assert got == _brute_force_counts(streams, max_len)
        grams = sum(sum(c.values()) for c in got.values())

    first = mine_tactics(logs, max_len=3, pool_size=4).to_dict()
    second = mine_tactics(logs, max_len=3, pool_size=4).to_dict()
    assert first == second  # top-k ordering is reproducible
    # and its tie-break is the documented one
    tied = Counter({("b",): 2, ("a",): 2, ("c",): 3})
    from arena.mining import top_pools
    assert top_pools(tied, 3) == [("c",), ("a",), ("b",)]
    _report("miner fidelity",
            f"counts equal brute force on 20 logs ({grams} n-grams at "
            "length 3), top-k deterministic", t0, 10.0)
