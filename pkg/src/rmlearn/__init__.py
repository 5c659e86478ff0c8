"""Learning reward machines from prefix tree policies and demonstrations."""

from .encode import SatInstance, decode, encode, to_dimacs, to_wcnf_text
from .equivalence import EquivalenceResult, check_policy_equivalence
from .evaluate import (rollout_returns, train_test_split, trajectory_loglik,
                       transfer_evaluate)
from .forward import ConvergenceError, ProductPolicy, policy_return, soft_bellman_solve
from .irl import FeatureMap, baseline_maxent_irl, extract_rewards
from .learn import (LearningError, PolicyConflict, build_learned_product_policy,
                    learn_minimal_models, models_at, sufficient_depth)
from .machine import (RewardMachine, RewardMachineModel, SyncMachine, compress_trace,
                      enumerate_renamings, is_non_stuttering, is_renaming_of, run)
from .mdp import LabeledMdp, ProductMdp, build_product, language_prefixes, reach_states
from .negex import (ConflictGroups, NegativeExampleSet, compress_negatives, exact_conflicts,
                    exact_negatives, statistical_negatives)
from .ptp import (Demonstrations, PrefixTreePolicy, estimate_ptp, induce_exact_ptp,
                  simulate_demonstrations)
from .solve import InfeasibleError, enumerate_models, maxsat, solve

__version__ = "0.1.0"

__all__ = [
    "baseline_maxent_irl", "build_learned_product_policy", "build_product",
    "check_policy_equivalence", "compress_negatives", "compress_trace", "ConflictGroups",
    "ConvergenceError", "decode", "Demonstrations", "encode", "enumerate_models",
    "enumerate_renamings", "EquivalenceResult", "estimate_ptp", "exact_conflicts",
    "exact_negatives", "extract_rewards", "FeatureMap", "induce_exact_ptp", "InfeasibleError",
    "is_non_stuttering", "is_renaming_of", "LabeledMdp", "language_prefixes",
    "learn_minimal_models", "LearningError", "maxsat", "models_at", "NegativeExampleSet",
    "policy_return", "PolicyConflict", "PrefixTreePolicy", "ProductMdp", "ProductPolicy",
    "reach_states", "RewardMachine", "RewardMachineModel", "rollout_returns", "run",
    "SatInstance", "simulate_demonstrations", "soft_bellman_solve", "solve",
    "statistical_negatives", "sufficient_depth", "SyncMachine", "to_dimacs", "to_wcnf_text",
    "train_test_split", "trajectory_loglik", "transfer_evaluate",
]
