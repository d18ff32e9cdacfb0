"""Input-pattern matching against a brute-force oracle.

The oracle enumerates every index assignment of pattern tokens to
history slots and checks order + gap constraints directly; the real
matcher must agree on randomized cases and on the hand-picked edges.
"""

from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arena.engine import EmptyPattern, match_input_pattern

TOKENS = ["Down", "DownFwd", "Fwd", "Back", "Atk", "Fwd+Atk", None]


def oracle_match(history, pattern, max_gap):
    n, m = len(history), len(pattern)
    if m > n:
        return False
    for idxs in combinations(range(n), m):
        if all(history[i] == t for i, t in zip(idxs, pattern)):
            if all(b - a <= max_gap for a, b in zip(idxs, idxs[1:])):
                return True
    return False


def test_exact_match():
    p = ["Down", "DownFwd", "Fwd+Atk"]
    assert match_input_pattern(p, p, 8) is True


def test_empty_history():
    assert match_input_pattern([], ["Down"], 8) is False


def test_empty_pattern_rejected():
    with pytest.raises(EmptyPattern):
        match_input_pattern(["Down"], [], 8)


def test_gap_boundary():
    # gap counts tick delta: tokens max_gap ticks apart pass, +1 fails
    gap = 3
    ok = ["Down"] + [None] * (gap - 1) + ["Atk"]
    too_far = ["Down"] + [None] * gap + ["Atk"]
    assert match_input_pattern(ok, ["Down", "Atk"], gap) is True
    assert match_input_pattern(too_far, ["Down", "Atk"], gap) is False
    assert oracle_match(ok, ["Down", "Atk"], gap) is True
    assert oracle_match(too_far, ["Down", "Atk"], gap) is False


def test_interleaved_noise():
    h = ["Down", "Back", "DownFwd", None, "Atk", "Fwd+Atk"]
    assert match_input_pattern(h, ["Down", "DownFwd", "Fwd+Atk"], 8) is True


def test_order_matters():
    h = ["Fwd+Atk", "DownFwd", "Down"]
    assert match_input_pattern(h, ["Down", "DownFwd", "Fwd+Atk"], 8) is False


def test_greedy_first_token_not_a_trap():
    # An early first-token occurrence whose continuation is out of gap
    # range must not mask a later viable start.
    h = ["Down", None, None, None, "Down", "Atk"]
    assert match_input_pattern(h, ["Down", "Atk"], 2) is True
    assert oracle_match(h, ["Down", "Atk"], 2) is True


@settings(max_examples=300, deadline=None)
@given(
    history=st.lists(st.sampled_from(TOKENS), max_size=20),
    pattern=st.lists(st.sampled_from(TOKENS[:-1]), min_size=1, max_size=4),
    max_gap=st.integers(min_value=1, max_value=10),
)
def test_agrees_with_bruteforce_oracle(history, pattern, max_gap):
    assert match_input_pattern(history, pattern, max_gap) == oracle_match(
        history, pattern, max_gap)


@settings(max_examples=300, deadline=None)
@given(
    history=st.lists(st.sampled_from(TOKENS), max_size=20),
    pattern=st.lists(st.sampled_from(TOKENS[:-1]), min_size=1, max_size=4),
    max_gap=st.integers(min_value=1, max_value=10),
)
def test_backward_scan_matches_reference(history, pattern, max_gap):
    # the special-readiness fast path must equal the full matcher on
    # history + [pattern[-1]] (the triggering press appended virtually)
    from arena.engine import _ready_backward

    fast = _ready_backward(history, pattern, max_gap)
    ref = match_input_pattern(history + [pattern[-1]], pattern, max_gap)
    assert fast == ref
