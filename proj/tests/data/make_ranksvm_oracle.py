"""Regenerates ranksvm_oracle.json: small RankSVM instances solved with cvxpy.

Features are stored raw; the optimum refers to features standardized per
dimension (mean 0, sample std 1), which is what the catalog feeds the solver.
"""
import json
import itertools

import cvxpy as cp
import numpy as np

rng = np.random.default_rng(4242)
instances = []
for idx in range(40):
    n = int(rng.integers(2, 7))
    dim = int(rng.integers(1, 5))
    raw = rng.normal(size=(n, dim)) * rng.uniform(0.5, 5.0, size=dim) + rng.normal(size=dim)
    std = raw.std(axis=0, ddof=1) if n > 1 else np.ones(dim)
    x = (raw - raw.mean(axis=0)) / std
    all_pairs = list(itertools.permutations(range(n), 2))
    n_pairs = int(rng.integers(1, min(10, len(all_pairs)) + 1))
    chosen = rng.choice(len(all_pairs), size=n_pairs, replace=False)
    pairs = [all_pairs[i] for i in sorted(chosen)]
    c = float(rng.choice([0.01, 0.1, 1.0, 10.0]))
    w = cp.Variable(dim)
    z = np.array([x[a] - x[b] for a, b in pairs])
    obj = 0.5 * cp.sum_squares(w) + c * cp.sum(cp.pos(1 - z @ w))
    prob = cp.Problem(cp.Minimize(obj))
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    wv = w.value
    exact = 0.5 * float(wv @ wv) + c * float(np.maximum(0, 1 - z @ wv).sum())
    instances.append({
        "ids": [f"i{k}" for k in range(n)],
        "features": raw.tolist(),
        "pairs": [[f"i{a}", f"i{b}"] for a, b in pairs],
        "c": c,
        "optimum": exact,
        "w": wv.tolist(),
    })

with open("ranksvm_oracle.json", "w") as f:
    json.dump({"instances": instances}, f, indent=1)
print(len(instances))
