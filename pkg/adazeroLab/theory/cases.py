"""
Analytic two-action checks of how an intrinsic bonus changes policy entropy.

Everything here works on a single state with two actions, a₁ (the
extrinsically optimal one) and a₂. The policy is the softmax of the
action values, so entropies can be evaluated exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Union

import numpy as np
from django.conf import settings
from scipy.special import entr

from adazeroLab.exceptions import ContractViolation
from envs.mdp import TwoActionMDP
from nncore.functional import entropy_array, softmax_array


def _tolerance(tolerance: Optional[float]) -> float:
    return settings.ADAZERO_THEORY['tolerance'] if tolerance is None else tolerance


def _pair(values, name: str) -> tuple[float, float]:
    values = tuple(float(v) for v in values)
    if len(values) != 2:
        raise ContractViolation(f"{name} needs one value per action, got {values}")
    if not all(math.isfinite(v) for v in values):
        raise ContractViolation(f"{name} must be finite, got {values}")
    return values


@dataclass(frozen=True)
class QSpec:
    """Q_ext and the intrinsic return δ for (a₁, a₂); a₁ optimal, δ(a₁) ≤ δ(a₂)."""

    q_ext: tuple[float, float]
    delta: tuple[float, float]

    def __post_init__(self) -> None:
        q_ext, delta = _pair(self.q_ext, 'q_ext'), _pair(self.delta, 'delta')
        if q_ext[0] < q_ext[1]:
            raise ContractViolation(f"a1 must be the optimal action, got q_ext={q_ext}")
        if delta[0] > delta[1]:
            raise ContractViolation(f"expected delta(a1) <= delta(a2), got delta={delta}")
        object.__setattr__(self, 'q_ext', q_ext)
        object.__setattr__(self, 'delta', delta)

    @property
    def pi_ext(self) -> np.ndarray:
        return softmax_array(np.array(self.q_ext))

    @property
    def pi_total(self) -> np.ndarray:
        return softmax_array(np.array(self.q_ext) + np.array(self.delta))

    @property
    def h_ext(self) -> float:
        return float(entropy_array(self.pi_ext))

    @property
    def h_total(self) -> float:
        return float(entropy_array(self.pi_total))

    def as_dict(self) -> dict:
        return {'q_ext': list(self.q_ext), 'delta': list(self.delta)}


@dataclass(frozen=True)
class AdaptiveQSpec:
    """Q_ext with the mastery-weighted bonus δ̂ = (1 − α)·δ."""

    q_ext: tuple[float, float]
    delta_hat: tuple[float, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, 'q_ext', _pair(self.q_ext, 'q_ext'))
        object.__setattr__(self, 'delta_hat', _pair(self.delta_hat, 'delta_hat'))

    @classmethod
    def from_alpha(cls, spec: QSpec, alpha) -> 'AdaptiveQSpec':
        alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (2,))
        if np.any(~np.isfinite(alpha)) or np.any(alpha < 0.0) or np.any(alpha > 1.0):
            raise ContractViolation(f"mastery values must lie in [0, 1], got {alpha}")
        delta = np.array(spec.delta)
        delta_hat = (1.0 - alpha) * delta
        # δ̂ lies between 0 and δ for each action
        if np.any(delta_hat < np.minimum(delta, 0.0)) or np.any(delta_hat > np.maximum(delta, 0.0)):
            raise ContractViolation(f"delta_hat {delta_hat} not between 0 and delta {delta}")
        return cls(spec.q_ext, tuple(delta_hat))

    @property
    def pi_ext(self) -> np.ndarray:
        return softmax_array(np.array(self.q_ext))

    @property
    def pi_total(self) -> np.ndarray:
        return softmax_array(np.array(self.q_ext) + np.array(self.delta_hat))


class Case(str, Enum):
    EXPLORATION_DOMINANT = 'ExplorationDominant'
    ADAPTIVE_MIXED = 'AdaptiveMixed'
    EXPLOITATION_DOMINANT = 'ExploitationDominant'


class Relation(str, Enum):
    NOT_GREATER = '<='
    GREATER = '>'
    EQUAL = '='


def entropy_relation(h_ext: float, h_total: float, tolerance: Optional[float] = None) -> Relation:
    """How H(π_ext) compares with H(π_total)."""
    tolerance = _tolerance(tolerance)
    if abs(h_ext - h_total) <= tolerance:
        return Relation.EQUAL
    return Relation.NOT_GREATER if h_ext < h_total else Relation.GREATER


@dataclass(frozen=True)
class CaseReport:
    case_label: Case
    h_ext: float
    h_total: float
    relation: Relation
    max_policy_difference: float = 0.0

    def __post_init__(self) -> None:
        if entropy_relation(self.h_ext, self.h_total) != self.relation:
            raise ContractViolation(f"relation {self.relation.value} inconsistent with h_ext={self.h_ext}, h_total={self.h_total}")

    def as_dict(self) -> dict:
        return {
            'case': self.case_label.value,
            'h_ext': self.h_ext,
            'h_total': self.h_total,
            'relation': self.relation.value,
            'max_policy_difference': self.max_policy_difference,
        }


def lemma1_condition(spec: QSpec) -> bool:
    """0 ≤ δ(a₂) − δ(a₁) ≤ 2(Q_ext(a₁) − Q_ext(a₂))."""
    gap = spec.delta[1] - spec.delta[0]
    return 0.0 <= gap <= 2.0 * (spec.q_ext[0] - spec.q_ext[1])


class LemmaCheck(NamedTuple):
    h_ext: float
    h_total: float
    holds: bool


def verify_lemma1(spec: QSpec, tolerance: Optional[float] = None) -> LemmaCheck:
    """Checks H(π_ext) ≤ H(π_total) on a spec inside the lemma's condition."""
    if not lemma1_condition(spec):
        raise ContractViolation(f"spec {spec.as_dict()} is outside the lemma condition")
    h_ext, h_total = spec.h_ext, spec.h_total
    return LemmaCheck(h_ext, h_total, h_ext <= h_total + _tolerance(tolerance))


def _report(adaptive: AdaptiveQSpec, case: Case) -> CaseReport:
    pi_ext, pi_total = adaptive.pi_ext, adaptive.pi_total
    h_ext, h_total = float(entropy_array(pi_ext)), float(entropy_array(pi_total))
    return CaseReport(
        case_label=case,
        h_ext=h_ext,
        h_total=h_total,
        relation=entropy_relation(h_ext, h_total),
        max_policy_difference=float(np.max(np.abs(pi_total - pi_ext))),
    )


def classify_theorem2(spec: QSpec, alpha: Union[float, tuple[float, float]]) -> CaseReport:
    """
    α ≡ 0 keeps the whole bonus (exploration dominant), α ≡ 1 removes it
    (exploitation dominant); anything in between is the adaptive regime.
    """
    adaptive = AdaptiveQSpec.from_alpha(spec, alpha)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (2,))
    if np.all(alpha == 0.0):
        case = Case.EXPLORATION_DOMINANT
    elif np.all(alpha == 1.0):
        case = Case.EXPLOITATION_DOMINANT
    else:
        case = Case.ADAPTIVE_MIXED
    return _report(adaptive, case)


def classify_adaptive(adaptive: AdaptiveQSpec) -> CaseReport:
    """
    Labels a δ̂ built directly. δ̂ ≡ 0 is exploitation dominant; every other
    δ̂, including the mixed pattern δ̂(a₁) > 0 = δ̂(a₂), is the adaptive regime.
    """
    delta_hat = np.array(adaptive.delta_hat)
    case = Case.EXPLOITATION_DOMINANT if np.all(delta_hat == 0.0) else Case.ADAPTIVE_MIXED
    return _report(adaptive, case)


def is_case2_pattern(adaptive: AdaptiveQSpec) -> bool:
    return adaptive.delta_hat[0] > 0.0 and adaptive.delta_hat[1] == 0.0


def binary_entropy(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    return entr(p) + entr(1.0 - p)


@dataclass(frozen=True)
class MonotonicityReport:
    grid_points: int
    increasing_violations: int
    decreasing_violations: int
    argmax_p: float
    max_entropy: float
    ln2_error: float
    symmetry_error: float

    def passed(self, tolerance: Optional[float] = None) -> bool:
        tolerance = _tolerance(tolerance)
        return (
            self.increasing_violations == 0
            and self.decreasing_violations == 0
            and abs(self.argmax_p - 0.5) < 1.0 / (self.grid_points + 1)
            and self.ln2_error < tolerance
        )

    def as_dict(self) -> dict:
        return dict(vars(self), passed=self.passed())


def entropy_monotonicity_scan(grid_points: int = 999) -> MonotonicityReport:
    """
    H(p, 1 − p) on p = i/(n+1), i = 1..n: strictly increasing up to 0.5,
    strictly decreasing after it, peak ln 2 at p = 0.5.
    """
    if grid_points < 3:
        raise ContractViolation(f"need at least 3 grid points, got {grid_points}")
    p = np.arange(1, grid_points + 1) / (grid_points + 1)
    h = binary_entropy(p)
    steps = np.diff(h)
    left, right = p[:-1], p[1:]
    rising_side = right <= 0.5
    falling_side = left >= 0.5
    peak = int(np.argmax(h))
    return MonotonicityReport(
        grid_points=grid_points,
        increasing_violations=int(np.count_nonzero(steps[rising_side] <= 0.0)),
        decreasing_violations=int(np.count_nonzero(steps[falling_side] >= 0.0)),
        argmax_p=float(p[peak]),
        max_entropy=float(h[peak]),
        ln2_error=abs(float(binary_entropy(np.array([0.5]))[0]) - math.log(2)),
        symmetry_error=float(np.max(np.abs(h - binary_entropy(1.0 - p)))),
    )


def qspec_from_mdp(mdp: TwoActionMDP) -> QSpec:
    """
    Exact Q_ext / δ of a one-step two-action MDP, with actions ordered so a₁
    is optimal. Ties in Q_ext put the smaller bonus first.
    """
    q_ext, delta = mdp.q_ext(), mdp.delta()
    order = np.lexsort((delta, -q_ext))
    return QSpec(tuple(q_ext[order]), tuple(delta[order]))
