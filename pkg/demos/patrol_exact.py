"""
Learning the patrol machine from an exact prefix tree
=====================================================

A soft-optimal agent patrols four rooms in the order A, B, C, D.  We never
show the learner the machine.  It only sees the agent's policy grouped by
the label history that led to each state, and from that alone it recovers
the four-node machine (up to renaming) and a reward that reproduces the
policy.
"""

import numpy as np

from rmlearn import (build_learned_product_policy, build_product, exact_negatives,
                     extract_rewards, induce_exact_ptp, is_renaming_of, learn_minimal_models,
                     soft_bellman_solve)
from rmlearn.envs import make_patrol
from rmlearn.formats import dump_rm

mdp, truth = make_patrol()
policy = soft_bellman_solve(build_product(mdp, truth))

# Prefix tree over stutter-free label words of length at most 6.
ptp = induce_exact_ptp(mdp, truth.model, policy, 6, compress=True)
print("words in the prefix tree:", len(ptp.words()))

# Two words with different action distributions at a shared state cannot
# end at the same machine node.
neg = exact_negatives(ptp, 1e-6)
print("negative examples:", len(neg))

res = learn_minimal_models(neg, 4, mdp.n_props, non_stuttering=True)
print("minimal node count:", res.n_nodes, " models:", len(res.models))
print("every model is a renaming of the truth:",
      all(is_renaming_of(m, truth.model) for m in res.models))

# Rewards: invert the soft Bellman equations on the learned product.
learned = build_learned_product_policy(res.models[0], ptp, mdp, "exact")
ex = extract_rewards(learned.product, learned)
print("\n".join(ex.lines()))
print("\n".join(dump_rm(ex.machine, mdp.propositions)))

# The recovered reward induces the same policy.
again = soft_bellman_solve(build_product(mdp, ex.machine))
known = learned.known
print("max policy gap:", np.abs(again.probs[known] - learned.probs[known]).max())
