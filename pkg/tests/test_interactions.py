"""Triad resolution: the full 25-pair table, written out by hand first.

The table is the oracle; resolve_interaction must reproduce it exactly.
Attack beats Grab, Grab beats Block, Block beats Attack; equal attacks
trade, equal grabs tech (neutral); move/idle lose to attack and grab and
are neutral against everything else.
"""

import pytest

from arena.engine import (
    ATTACK, BLOCK, GRAB, IDLE, MOVE,
    LEFT_WINS, NEUTRAL_OUTCOME, RIGHT_WINS, TRADE,
    INTENT_CLASSES, resolve_interaction,
)

# (left, right) -> expected, all 25 pairs spelled out
TABLE = {
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


def test_table_is_total():
    assert len(TABLE) == 25
    assert set(TABLE) == {(a, b) for a in INTENT_CLASSES for b in INTENT_CLASSES}


@pytest.mark.parametrize("pair,expected", sorted(TABLE.items()))
def test_resolution_matches_table(pair, expected):
    assert resolve_interaction(*pair) == expected


def test_named_triad_rules():
    # the three asymmetric rules, stated directly
    assert resolve_interaction(ATTACK, GRAB) == LEFT_WINS
    assert resolve_interaction(GRAB, BLOCK) == LEFT_WINS
    assert resolve_interaction(BLOCK, ATTACK) == LEFT_WINS


def test_mirror_symmetry():
    flip = {LEFT_WINS: RIGHT_WINS, RIGHT_WINS: LEFT_WINS,
            TRADE: TRADE, NEUTRAL_OUTCOME: NEUTRAL_OUTCOME}
    for a in INTENT_CLASSES:
        for b in INTENT_CLASSES:
            assert resolve_interaction(b, a) == flip[resolve_interaction(a, b)]


def test_symmetric_conventions():
    assert resolve_interaction(ATTACK, ATTACK) == TRADE
    assert resolve_interaction(GRAB, GRAB) == NEUTRAL_OUTCOME
    assert resolve_interaction(BLOCK, BLOCK) == NEUTRAL_OUTCOME
