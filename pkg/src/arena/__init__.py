"""Deterministic 1-D fighting-game simulator and agent toolkit.

Layers, bottom up:

* ``engine``: pure tick-based combat simulation;
* ``conditions`` / ``fsm`` / ``bt`` / ``mcts``: decision frameworks
  (finite-state machines, behavior trees, Monte-Carlo tree search);
* ``hybrids``: the combined agents (state-restricted search, search over
  transitions, search-in-a-leaf);
* ``agents`` / ``match`` / ``tournament`` / ``replay`` / ``mining``:
  harness for running seeded matches, tournaments, replay verification
  and tactic mining;
* ``server`` / ``cli``: websocket play server and command-line front.
"""

from importlib import resources as _resources

from .engine import (
    CharacterSpec,
    GameState,
    Observation,
    initial_state,
    legal_actions,
    match_input_pattern,
    observe,
    parse_action,
    resolve_interaction,
    round_result,
    step,
)

__version__ = "0.1.0"


def default_character() -> CharacterSpec:
    """The bundled all-rounder used by tests, demos and the CLI."""
    ref = _resources.files("arena").joinpath("data/ryu.json")
    with ref.open("r", encoding="utf-8") as fh:
        import json

        return CharacterSpec.from_dict(json.load(fh))


def data_path(name: str) -> str:
    """Filesystem path of a bundled data file (for CLI defaults)."""
    return str(_resources.files("arena").joinpath("data/" + name))
