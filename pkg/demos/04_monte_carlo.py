"""Monte Carlo cross-validation of the exact engine.

Simulates the learning process on a depth-5 regular tree of degree 5 by
replaying the finite-tree engine's decision tables, then compares the
center's empirical error rates against the exact cavity values.  The center
has a full 2-ball, so its exact finite-tree values coincide with the
infinite-tree ones.
"""

import math

from cavitree.cavity import FiniteTreeEngine, RegularTreeEngine
from cavitree.model import SignalModel, UpdateRule
from cavitree.sim import simulate
from cavitree.trees import regular_tree

SAMPLES = 200_000
ROUNDS = 2
SEED = 7

model = SignalModel.binary_symmetric(0.15)
rule = UpdateRule(variant="bayesian")
graph = regular_tree(5, 5)
print(f"graph: depth-5 regular tree, {graph.n} nodes; {SAMPLES} samples")

engine = FiniteTreeEngine(graph, model, rule)
engine.run(ROUNDS)
infinite = RegularTreeEngine(model, 5, rule)
infinite.run(ROUNDS)

result = simulate(graph, model, rule, ROUNDS, SAMPLES, seed=SEED, tables=engine)
print(f"{'round':>5} {'exact':>12} {'empirical':>12} {'dev/se':>8}")
for t in range(ROUNDS + 1):
    exact = engine.error_probability(0, t)
    assert abs(exact - infinite.error_probability(t)) < 1e-12
    rate = result.rate(0, t)
    se = max(math.sqrt(exact * (1 - exact) / SAMPLES), 1e-12)
    print(f"{t:>5} {exact:>12.4e} {rate:>12.4e} {abs(rate - exact) / se:>8.2f}")
