"""Subset Equalizing: distributed solution of ``(sum P_i) z = sum q_i`` over
agent networks whose members interact arbitrarily and join or leave at will.
"""
import json
from importlib import resources

from .actions import ActionSequence, ActionStep, Churn, membership_at, random_volatile_sequence, validate_action_sequence
from .connectivity import einfty_equivalence, h_of, h_star, partition_init, partition_step
from .core import NetworkState, ground_truth, lyapunov, se_init, se_step, simulate, weighted_mean
from .spd import assert_spd, solve_spd, spd_from_factor

__version__ = "0.1.0"

EXAMPLES = ("example3", "example4", "example5", "example6", "figure1")

__all__ = [
    "ActionSequence",
    "ActionStep",
    "Churn",
    "EXAMPLES",
    "NetworkState",
    "assert_spd",
    "einfty_equivalence",
    "ground_truth",
    "h_of",
    "h_star",
    "load_example",
    "lyapunov",
    "membership_at",
    "partition_init",
    "partition_step",
    "random_volatile_sequence",
    "se_init",
    "se_step",
    "simulate",
    "solve_spd",
    "spd_from_factor",
    "validate_action_sequence",
    "weighted_mean",
]


def load_example(name: str) -> ActionSequence:
    """One of the bundled action sequences (see ``EXAMPLES``)."""
    if name not in EXAMPLES:
        raise KeyError(f"unknown example {name!r}; choose from {EXAMPLES}")
    text = resources.files(__package__).joinpath("data", f"{name}.json").read_text(encoding="utf-8")
    return ActionSequence.from_json(json.loads(text))
