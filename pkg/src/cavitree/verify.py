"""Verification suites: oracle equivalence and cavity-table invariants.

The oracle-equivalence suite runs the exact engine and the brute-force
forward simulation over a fixed instance family (paths, stars, the depth-2
binary tree) and compares decision tables and error probabilities.  The
invariant suite checks normalization, marginalization, coupling mass, flip
symmetry and error monotonicity on the homogeneous engine.  Both return a
list of (name, passed, detail) checks; the CLI turns failures into a
nonzero exit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cavity import FiniteTreeEngine, RegularTreeEngine
from .model import SignalModel, UpdateRule
from .oracle import oracle_decision_tables, oracle_error_probability, unroll
from .trees import TreeGraph, path_graph, rooted_arity_tree, star_graph

ORACLE_TOL = 1e-10
NORM_TOL = 1e-12
COUPLING_TOL = 1e-9
FLIP_TOL = 1e-12


@dataclass
class VerifyReport:
    checks: list[tuple[str, bool, str]] = field(default_factory=list)

    def add(self, name: str, passed: bool, detail: str = ""):
        self.checks.append((name, passed, detail))

    @property
    def ok(self) -> bool:
        return all(passed for _, passed, _ in self.checks)

    def lines(self) -> list[str]:
        return [f"{'PASS' if passed else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
                for name, passed, detail in self.checks]


def instance_family(max_nodes: int) -> list[tuple[str, TreeGraph]]:
    family = [(f"path{n}", path_graph(n)) for n in range(2, min(max_nodes, 6) + 1)]
    for n in (4, 5):
        if n <= max_nodes:
            family.append((f"star{n}", star_graph(n)))
    if 7 <= max_nodes:
        family.append(("binary2", rooted_arity_tree(2, 2)))
    return family


def oracle_equivalence_suite(max_nodes: int = 8, max_t: int = 3,
                             noise: float = 0.15,
                             report: VerifyReport | None = None) -> VerifyReport:
    """Exact engine vs brute force on the fixed family, both update rules."""
    report = report if report is not None else VerifyReport()
    model = SignalModel.binary_symmetric(noise)
    for name, graph in instance_family(max_nodes):
        for variant in ("bayesian", "majority"):
            rule = UpdateRule(variant=variant)
            tensor = unroll(graph, model, rule, max_t)
            engine = FiniteTreeEngine(graph, model, rule)
            engine.run(max_t)
            worst = 0.0
            for node in range(graph.n):
                for t in range(max_t + 1):
                    ref = oracle_error_probability(tensor, node, t)
                    got = engine.error_probability(node, t)
                    worst = max(worst, abs(ref - got))
            report.add(f"oracle-error {name} {variant}", worst <= ORACLE_TOL,
                       f"max dev {worst:.2e}")
            if tensor.deterministic:
                mismatches = 0
                for node in range(graph.n):
                    for t in range(max_t + 1):
                        for (x, obs), code in oracle_decision_tables(tensor)[node][t].items():
                            kern = engine.decision_kernel(node, t, x, obs)
                            if len(kern) != 1 or kern[0][0] != code:
                                mismatches += 1
                report.add(f"oracle-tables {name} {variant}", mismatches == 0,
                           f"{mismatches} mismatches")
    return report


def _flip_code(code: np.ndarray | int, length: int):
    return (2 ** length - 1) - code


def invariant_suite(ds=(3, 5), noises=(0.15, 0.3), max_t: int = 4,
                    report: VerifyReport | None = None) -> VerifyReport:
    """Cavity-table invariants on the homogeneous engine, both rules."""
    report = report if report is not None else VerifyReport()
    for d in ds:
        for noise in noises:
            model = SignalModel.binary_symmetric(noise)
            for variant in ("bayesian", "majority"):
                rule = UpdateRule(variant=variant)
                engine = RegularTreeEngine(model, d, rule)
                engine.run(max_t)
                engine.advance(extend_decisions=False)  # Q through horizon max_t
                label = f"d={d} noise={noise} {variant}"

                drift = max(engine.drifts)
                report.add(f"normalization {label}", drift <= NORM_TOL,
                           f"pre-renorm drift {drift:.2e}")

                worst_marg = 0.0
                for t in range(1, max_t + 1):
                    worst_marg = max(worst_marg, engine.cavity_table(t)
                                     .marginalization_defect(engine.cavity_table(t - 1)))
                report.add(f"marginalization {label}", worst_marg <= NORM_TOL,
                           f"max defect {worst_marg:.2e}")

                errs = [engine.error_probability(t) for t in range(max_t + 1)]
                from .cavity.core import error_probability_general
                worst_coupling = 0.0
                for t in range(1, max_t + 1):
                    _, dev, _ = error_probability_general(
                        engine.g[t], t, d, [(engine.q[t - 1], True)] * d,
                        model, engine.n_actions)
                    worst_coupling = max(worst_coupling, dev)
                report.add(f"coupling {label}", worst_coupling <= COUPLING_TOL,
                           f"max |mass-1| {worst_coupling:.2e}")

                worst_flip = 0.0
                for t in range(max_t + 1):
                    q = engine.q[t]
                    n_sig, n_tau, _ = q.shape
                    sig_len = (n_sig - 1).bit_length()
                    tau_len = (n_tau - 1).bit_length()
                    flipped = q[_flip_code(np.arange(n_sig), sig_len)][
                        :, _flip_code(np.arange(n_tau), tau_len), :][:, :, ::-1]
                    worst_flip = max(worst_flip, float(np.max(np.abs(q - flipped))))
                report.add(f"flip-symmetry {label}", worst_flip <= FLIP_TOL,
                           f"max dev {worst_flip:.2e}")

                if variant == "bayesian":
                    monotone = all(errs[t + 1] <= errs[t] + 1e-15
                                   for t in range(max_t))
                    report.add(f"error-monotone {label}", monotone,
                               " ".join(f"{e:.2e}" for e in errs))
    return report


def run_verification(max_nodes: int = 8, max_t: int = 3,
                     with_invariants: bool = True) -> VerifyReport:
    report = VerifyReport()
    oracle_equivalence_suite(max_nodes=max_nodes, max_t=max_t, report=report)
    if with_invariants:
        invariant_suite(report=report)
    return report
