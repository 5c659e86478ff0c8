"""
Maze: a two-step goal that no flat reward can express
=====================================================

Synthetic mice run a 127-node binary-tree labyrinth.  They first go to the
water port and then return home.  We learn a machine from 180 trajectories,
recover its reward, and score the remaining 20 by log-likelihood against
two flat MaxEnt IRL baselines and the uniform policy.
"""

import numpy as np

from rmlearn import (ProductPolicy, baseline_maxent_irl, build_learned_product_policy,
                     build_product, estimate_ptp, extract_rewards, learn_minimal_models,
                     simulate_demonstrations, soft_bellman_solve, statistical_negatives,
                     train_test_split, trajectory_loglik)
from rmlearn.envs import load_maze, water_machine
from rmlearn.learn import trivial_model

maze, truth = load_maze(), water_machine()
mice = simulate_demonstrations(maze, truth.model, soft_bellman_solve(build_product(maze, truth)),
                               200, 22, seed=0)
train, test = train_test_split(mice, 0.9, seed=0)

ptp = estimate_ptp(train, maze, 6, compress=True)
neg = statistical_negatives(ptp, 0.05)
res = learn_minimal_models(neg, 3, maze.n_props, maxsat_mode=True)
print(f"negatives={len(neg)} nodes={res.n_nodes} dropped={res.cost}")

learned = build_learned_product_policy(res.models[0], ptp, maze, "aggregate")
ex = extract_rewards(learned.product, learned, clip=0.05)
print("\n".join(ex.lines()))
policy = soft_bellman_solve(build_product(maze, ex.machine))

flat = trivial_model(maze.n_props)
scores = {"learned machine": trajectory_loglik(maze, res.models[0], policy, test).mean}
for name, feats in (("D-IRL", "dense"), ("F-IRL", "label")):
    scores[name] = trajectory_loglik(maze, flat, baseline_maxent_irl(maze, train, feats, n_iter=150)[1],
                                     test).mean
uniform = build_product(maze, flat)
scores["uniform"] = trajectory_loglik(
    maze, flat, ProductPolicy(uniform, np.full((uniform.n_states, 4), 0.25)), test).mean
for name, v in scores.items():
    print(f"{name:>16}: {v:8.2f}")
