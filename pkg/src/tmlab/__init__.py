"""tmlab: a deterministic laboratory for two-team competitive multi-agent RL.

The package bundles the Touch-Mark environment (two teams of two agents
racing to touch one of two landmarks), an ensemble-policy actor-critic
trainer with a learned winning/losing classifier, a family of incentive
schemes for unequal-skill matchups, and an evaluation harness
(paired position-swapped episodes, round-robin tournaments, fairness
statistics).
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
