"""Monte-Carlo runs behind the two frozen thresholds of the acceptance suite.

1. KS ceiling: the residual-vs-law distance on pure unit noise (400 x 1000)
   after removing 3 principal components, the same statistic the factor
   experiment checks at p = 3. The ceiling is the worst case over 100 seeds
   rounded up to the next 0.005.
2. Comparison margin: accuracy of the HDFM arm minus a PCA arm fixed at
   p = 1 on the synthetic activity dataset, KNN (k = 5), seeds 0..9. The
   margin is the smallest observed delta rounded down to the next 0.05.

Run from the repository root:  python demos/calibrate_thresholds.py
"""

import math

import numpy as np

from csihdfm.classify import ClassifierSpec
from csihdfm.factor import fit_from_decomposition, decompose
from csihdfm.pipeline import compare_pipelines
from csihdfm.synthetic import ActivitySpec, synthetic_activity_dataset

ks = []
for seed in range(100):
    noise = np.random.default_rng(10_000 + seed).standard_normal((400, 1000))
    ks.append(fit_from_decomposition(decompose(noise), 3).ks_distance)
ks = np.array(ks)
print(f"null KS at p=3: mean {ks.mean():.4f}  p99 {np.quantile(ks, 0.99):.4f}  max {ks.max():.4f}")
print(f"-> KS ceiling {math.ceil(ks.max() / 0.005) * 0.005:.3f}")

deltas = []
for seed in range(10):
    data = synthetic_activity_dataset(ActivitySpec(seed=seed))
    cmp = compare_pipelines(data, ClassifierSpec("knn", k=5), seed=seed)
    deltas.append(cmp.delta)
    print(f"seed {seed}: hdfm {cmp.hdfm.report.accuracy:.4f}  pca(p=1) {cmp.pca.report.accuracy:.4f}  delta {cmp.delta:+.4f}")
print(f"-> comparison margin {math.floor(min(deltas) / 0.05) * 0.05:.2f}")
