"""
Randomized sweeps over two-action specs.

Specs are drawn uniformly from [low, high] per component and ordered so
that a₁ is optimal and δ(a₁) ≤ δ(a₂). Shards draw from independent
children of one SeedSequence, so a sweep is reproducible for a given
(seed, shards) whatever the number of worker processes.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from django.conf import settings

from adazeroLab.exceptions import ContractViolation
from nncore.functional import entropy_array, softmax_array

from .cases import AdaptiveQSpec, QSpec, Relation, classify_adaptive, classify_theorem2

logger = logging.getLogger(__name__)

TIGHT_TOLERANCE = 1e-9


def draw_specs(rng: np.random.Generator, n: int, low: float, high: float) -> tuple[np.ndarray, np.ndarray]:
    """(n, 2) arrays of Q_ext (descending) and δ (ascending)."""
    q_ext = -np.sort(-rng.uniform(low, high, size=(n, 2)), axis=1)
    delta = np.sort(rng.uniform(low, high, size=(n, 2)), axis=1)
    return q_ext, delta


def condition_mask(q_ext: np.ndarray, delta: np.ndarray) -> np.ndarray:
    gap = delta[:, 1] - delta[:, 0]
    return (gap >= 0.0) & (gap <= 2.0 * (q_ext[:, 0] - q_ext[:, 1]))


@dataclass
class ShardResult:
    checked: int = 0
    violations: int = 0
    max_violation: float = -np.inf
    violation_example: Optional[dict] = None
    tight_cases: int = 0
    outside_checked: int = 0
    outside_violations: int = 0
    outside_example: Optional[dict] = None


def _example(q_ext: np.ndarray, delta: np.ndarray, h_ext: float, h_total: float) -> dict:
    return {'q_ext': q_ext.tolist(), 'delta': delta.tolist(), 'h_ext': float(h_ext), 'h_total': float(h_total)}


def run_shard(seed: np.random.SeedSequence, target: int, low: float, high: float, tolerance: float,
              batch: int = 8192) -> ShardResult:
    """Draws until ``target`` in-condition specs have been checked."""
    rng = np.random.default_rng(seed)
    result = ShardResult()
    while result.checked < target:
        q_ext, delta = draw_specs(rng, batch, low, high)
        pi_ext = softmax_array(q_ext, axis=1)
        pi_total = softmax_array(q_ext + delta, axis=1)
        h_ext, h_total = entropy_array(pi_ext, axis=1), entropy_array(pi_total, axis=1)
        inside = condition_mask(q_ext, delta)

        inside_idx = np.flatnonzero(inside)[:target - result.checked]
        excess = h_ext[inside_idx] - h_total[inside_idx]
        bad = inside_idx[excess > tolerance]
        result.checked += len(inside_idx)
        result.violations += len(bad)
        if len(inside_idx):
            result.max_violation = max(result.max_violation, float(excess.max()))
        if len(bad) and result.violation_example is None:
            i = bad[0]
            result.violation_example = _example(q_ext[i], delta[i], h_ext[i], h_total[i])
        tight = np.abs(pi_total[inside_idx, 1] - pi_ext[inside_idx, 0]) <= TIGHT_TOLERANCE
        result.tight_cases += int(np.count_nonzero(tight))

        outside_idx = np.flatnonzero(~inside)
        flipped = (h_ext[outside_idx] > h_total[outside_idx] + tolerance) | (pi_total[outside_idx, 1] > 0.5)
        result.outside_checked += len(outside_idx)
        result.outside_violations += int(np.count_nonzero(flipped))
        if result.outside_example is None and np.any(flipped):
            i = outside_idx[np.flatnonzero(flipped)[0]]
            result.outside_example = _example(q_ext[i], delta[i], h_ext[i], h_total[i])
    return result


@dataclass
class Lemma1SweepReport:
    samples: int
    seed: int
    shards: int
    checked: int = 0
    violations: int = 0
    max_violation: float = -np.inf
    violation_example: Optional[dict] = None
    tight_cases: int = 0
    outside_checked: int = 0
    outside_violations: int = 0
    outside_example: Optional[dict] = None

    @property
    def passed(self) -> bool:
        # The lemma holds everywhere inside, and the condition is not vacuous outside.
        return self.checked >= self.samples and self.violations == 0 and self.outside_violations > 0

    def merge(self, shard: ShardResult) -> None:
        self.checked += shard.checked
        self.violations += shard.violations
        self.max_violation = max(self.max_violation, shard.max_violation)
        self.violation_example = self.violation_example or shard.violation_example
        self.tight_cases += shard.tight_cases
        self.outside_checked += shard.outside_checked
        self.outside_violations += shard.outside_violations
        self.outside_example = self.outside_example or shard.outside_example

    def as_dict(self) -> dict:
        return dict(asdict(self), passed=self.passed)


def lemma1_sweep(
    samples: Optional[int] = None,
    seed: Optional[int] = None,
    shards: Optional[int] = None,
    workers: int = 1,
    tolerance: Optional[float] = None,
) -> Lemma1SweepReport:
    theory = settings.ADAZERO_THEORY
    samples = theory['samples'] if samples is None else samples
    seed = theory['seed'] if seed is None else seed
    shards = theory['shards'] if shards is None else shards
    tolerance = theory['tolerance'] if tolerance is None else tolerance
    if samples < 1 or shards < 1:
        raise ContractViolation(f"samples and shards must be >= 1, got {samples}, {shards}")

    targets = [samples // shards + (1 if i < samples % shards else 0) for i in range(shards)]
    children = np.random.SeedSequence(seed).spawn(shards)
    args = [(child, target, theory['sweep_low'], theory['sweep_high'], tolerance) for child, target in zip(children, targets)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_shard, *zip(*args)))
    else:
        results = [run_shard(*a) for a in args]

    report = Lemma1SweepReport(samples=samples, seed=seed, shards=shards)
    for shard in results:
        report.merge(shard)
    logger.info(
        "lemma sweep: %d checked, %d violations, %d outside-region flips, %d tight",
        report.checked, report.violations, report.outside_violations, report.tight_cases,
    )
    return report


@dataclass
class Theorem2Report:
    samples: int
    seed: int
    case1_failures: int = 0
    case3_max_policy_difference: float = 0.0
    case3_failures: int = 0
    case2_failures: int = 0
    examples: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.case1_failures == 0 and self.case3_failures == 0 and self.case2_failures == 0

    def as_dict(self) -> dict:
        return dict(asdict(self), passed=self.passed)


def theorem2_suite(samples: int = 1000, seed: Optional[int] = None) -> Theorem2Report:
    """
    Over random specs inside the lemma condition:
    α ≡ 0 must not lower entropy, α ≡ 1 must leave the policy bit-identical,
    and a bonus kept only on the optimal action (δ̂ = (c, 0), c > 0) must
    strictly lower it.
    """
    theory = settings.ADAZERO_THEORY
    seed = theory['seed'] if seed is None else seed
    rng = np.random.default_rng(seed)
    report = Theorem2Report(samples=samples, seed=seed)
    checked = 0
    while checked < samples:
        q_ext, delta = draw_specs(rng, 1024, theory['sweep_low'], theory['sweep_high'])
        inside = condition_mask(q_ext, delta)
        for q, d in zip(q_ext[inside], delta[inside]):
            if checked == samples:
                break
            spec = QSpec(tuple(q), tuple(d))
            case1 = classify_theorem2(spec, 0.0)
            case3 = classify_theorem2(spec, 1.0)
            case2 = classify_adaptive(AdaptiveQSpec(spec.q_ext, (float(rng.uniform(0.1, 5.0)), 0.0)))
            if case1.relation == Relation.GREATER:
                report.case1_failures += 1
            report.case3_max_policy_difference = max(report.case3_max_policy_difference, case3.max_policy_difference)
            if case3.max_policy_difference != 0.0 or case3.relation != Relation.EQUAL:
                report.case3_failures += 1
            if case2.relation != Relation.GREATER:
                report.case2_failures += 1
            if len(report.examples) < 3:
                report.examples.append({'spec': spec.as_dict(), 'case1': case1.as_dict(),
                                        'case2': case2.as_dict(), 'case3': case3.as_dict()})
            checked += 1
    logger.info("theorem suite: %d specs, passed=%s", checked, report.passed)
    return report
