"""
From demonstrations instead of a policy
=======================================

With finitely many trajectories the prefix tree holds empirical action
frequencies.  A pair of words becomes a negative example only when the
two frequency vectors are far enough apart that, at level alpha, the
underlying distributions must differ.  More data certifies more pairs and
leaves fewer consistent machines.
"""

import sys

from rmlearn.experiments import finite_sample

sizes = [int(x) for x in sys.argv[1:]] or [1000, 10_000, 100_000]

print("demos  negatives  nodes  models  truth among them")
for seed in (0, 1):
    for row in finite_sample("stack", sizes, seed=seed):
        print(f"{row['demos']:>6}  {row['negatives']:>9}  {row['nodes']:>5}  "
              f"{row['models']:>6}  {row['has_truth']}")
    print()
