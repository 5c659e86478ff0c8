"""
Tolerating wrong negative examples with MaxSAT
==============================================

Statistical certification can still be wrong.  Here we plant a few
false negatives: pairs of words that the true patrol machine sends to the
same node.  Hard SAT then finds no four-node machine at all.  Weighted
MaxSAT drops the cheapest set of pairs and gets the truth back.
"""

from rmlearn import is_renaming_of, learn_minimal_models
from rmlearn.envs import make_patrol
from rmlearn.experiments import exact_pipeline, inject_false_positives
from rmlearn.learn import LearningError

mdp, truth = make_patrol()
# A raw (stuttering) tree gives more words to pair up than a compressed one.
clean = exact_pipeline(mdp, truth, 5, 4, compress_ptp=False)
noisy, planted = inject_false_positives(clean.negatives, truth, clean.ptp.words(), 0.02)
print(f"{len(clean.negatives)} true negatives, {len(planted)} planted")

try:
    learn_minimal_models(noisy, 4, mdp.n_props)
except LearningError as exc:
    print("hard SAT:", exc)

res = learn_minimal_models(noisy, 4, mdp.n_props, maxsat_mode=True)
print("MaxSAT: nodes", res.n_nodes, " dropped pairs", res.cost)
print("optimal machines:", len(res.models))
print("all recover the truth:", all(is_renaming_of(m, truth.model) for m in res.models))
