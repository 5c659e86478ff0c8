"""
Block world: a smaller machine than the one that generated the data
===================================================================

The stack-avoid task is generated by a four-node machine, but two of its
nodes are absorbing and the policy behaves the same in both.  The learner
returns the three-node machine that merges them.  At four nodes there are
many consistent machines, which is why minimality matters.
"""

from rmlearn import (build_product, exact_negatives, induce_exact_ptp, is_renaming_of,
                     learn_minimal_models, models_at, soft_bellman_solve)
from rmlearn.envs import make_blockworld, stack_avoid_minimal_model

mdp, truth = make_blockworld("stack_avoid")
print("states:", mdp.n_states, " actions:", mdp.n_actions, " labels:", mdp.propositions)

policy = soft_bellman_solve(build_product(mdp, truth))
ptp = induce_exact_ptp(mdp, truth.model, policy, 8, compress=True)
neg = exact_negatives(ptp, 1e-6)
res = learn_minimal_models(neg, 4, mdp.n_props)
print("nodes:", res.n_nodes, " models:", len(res.models))
print("all are the merged three-node machine:",
      all(is_renaming_of(m, stack_avoid_minimal_model()) for m in res.models))

four = models_at(neg, 4, mdp.n_props, True, cap=20_000)
print("consistent four-node machines:", len(four.models), "(capped)" if four.capped else "")
