"""Model extensions: directed edges, flaky edges, and a hub loop.

Three short vignettes: a one-way observation chain (exact via the same
machinery with observation-aware neighborhoods), edges that are silently
inactive in random rounds (extended observation alphabet with a star), and a
triangle handled by averaging over the hub's private signal.
"""

import numpy as np

from cavitree.cavity import ActiveEdgeEngine, FiniteTreeEngine, RegularTreeEngine, posterior_with_hubs
from cavitree.model import SignalModel, UpdateRule
from cavitree.oracle import feasible_set, oracle_error_probability, unroll
from cavitree.trees import TreeGraph

model = SignalModel.binary_symmetric(0.15)
rule = UpdateRule(variant="bayesian")

print("-- directed chain: 0 observes 1 observes 2 --")
chain = TreeGraph(n=3, directed_edges=((0, 1), (1, 2)))
engine = FiniteTreeEngine(chain, model, rule)
engine.run(2)
tensor = unroll(chain, model, rule, 2)
for node in range(3):
    got = engine.error_probability(node, 2)
    ref = oracle_error_probability(tensor, node, 2)
    print(f"  node {node}: cavity {got:.6f}  brute force {ref:.6f}")

print("\n-- active edges: each edge silent with probability 1-p --")
for p in (1.0, 0.75, 0.5):
    act = ActiveEdgeEngine(model, 5, rule, p=p)
    act.run(2)
    print(f"  p={p:<5} error after two rounds {act.error_probability(2):.6e}")
full = RegularTreeEngine(model, 5, rule)
full.run(2)
print(f"  always-active engine           {full.error_probability(2):.6e} "
      "(p=1 row reproduces this exactly)")

print("\n-- triangle with one hub: average over the hub's signal --")
triangle = TreeGraph(n=3, edges=((0, 1), (0, 2), (1, 2)), hubs=frozenset({2}))
loopy = TreeGraph(n=3, edges=((0, 1), (0, 2), (1, 2)))
tensor = unroll(loopy, model, rule, 1)
for obs in ((0, 0), (0, 1)):
    post = posterior_with_hubs(triangle, model, rule, 0, 0, {1: obs[0], 2: obs[1]}, 1)
    idx = feasible_set(tensor, 0, 0, obs, 0)
    w = model.prior * np.array([tensor.signal_probs[s][idx].sum() for s in (0, 1)])
    ref = w / w.sum()
    print(f"  x=0, neighbors voted {obs}: posterior {post.round(6)} "
          f"(brute force {ref.round(6)})")
