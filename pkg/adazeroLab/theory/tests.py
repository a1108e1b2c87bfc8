import math

import numpy as np
from django.test import SimpleTestCase

from adazeroLab.exceptions import ContractViolation
from envs.mdp import TwoActionMDP
from theory.cases import (
    AdaptiveQSpec, Case, CaseReport, QSpec, Relation, binary_entropy, classify_adaptive, classify_theorem2,
    entropy_monotonicity_scan, is_case2_pattern, lemma1_condition, qspec_from_mdp, verify_lemma1,
)
from theory.sweeps import lemma1_sweep, theorem2_suite


class Lemma1TestCase(SimpleTestCase):
    """
    An intrinsic bonus inside 0 ≤ δ(a₂) − δ(a₁) ≤ 2(Q(a₁) − Q(a₂)) never lowers entropy.
    """

    def test_condition_examples(self):
        self.assertTrue(lemma1_condition(QSpec((1.0, 0.0), (0.0, 1.0))), "Testing: 0 <= 1 <= 2.")
        self.assertFalse(lemma1_condition(QSpec((1.0, 0.0), (0.0, 3.0))), "Testing: 3 > 2.")
        self.assertTrue(lemma1_condition(QSpec((0.0, 0.0), (0.0, 0.0))), "Testing: boundary 0 <= 0 <= 0.")

    def test_worked_example(self):
        h_ext, h_total, holds = verify_lemma1(QSpec((1.0, 0.0), (0.0, 1.0)))
        self.assertAlmostEqual(h_ext, 0.5822, places=4)
        self.assertAlmostEqual(h_total, math.log(2), places=15)
        self.assertTrue(holds)

    def test_equal_bonus_is_a_shift(self):
        for c in (-3.0, 0.0, 0.25, 4.0):
            check = verify_lemma1(QSpec((2.0, 0.5), (c, c)))
            self.assertTrue(check.holds)
            self.assertAlmostEqual(check.h_total, check.h_ext, places=15)

    def test_outside_the_condition_is_rejected(self):
        with self.assertRaises(ContractViolation):
            verify_lemma1(QSpec((1.0, 0.0), (0.0, 3.0)))

    def test_spec_conventions_enforced(self):
        with self.assertRaises(ContractViolation):
            QSpec((0.0, 1.0), (0.0, 0.0))
        with self.assertRaises(ContractViolation):
            QSpec((1.0, 0.0), (1.0, 0.0))
        with self.assertRaises(ContractViolation):
            QSpec((1.0, float('nan')), (0.0, 0.0))

    def test_random_sweep(self):
        report = lemma1_sweep(samples=100_000, seed=7, shards=4)
        self.assertEqual(report.checked, 100_000)
        self.assertEqual(report.violations, 0, "Testing: no counterexample inside the condition.")
        self.assertLessEqual(report.max_violation, 1e-12)
        self.assertGreater(report.outside_violations, 0, "Testing: the condition is not vacuous.")
        self.assertIsNotNone(report.outside_example)
        self.assertTrue(report.passed)

    def test_sweep_is_reproducible(self):
        first = lemma1_sweep(samples=2000, seed=3, shards=2)
        second = lemma1_sweep(samples=2000, seed=3, shards=2)
        self.assertEqual(first.as_dict(), second.as_dict())

    def test_two_action_mdp_spec(self):
        spec = qspec_from_mdp(TwoActionMDP(r_ext=(0.0, 1.0), r_int=(0.5, 0.0)))
        self.assertEqual(spec.q_ext, (1.0, 0.0), "Testing: actions reordered so a1 is optimal.")
        self.assertEqual(spec.delta, (0.0, 0.5))
        self.assertTrue(verify_lemma1(spec).holds)

    def test_tied_extrinsic_values_order_by_bonus(self):
        """
        Test an MDP whose two actions tie on Q_ext but not on δ.
        """
        # Precondition assertion
        mdp = TwoActionMDP(r_ext=(0.5, 0.5), r_int=(1.0, 0.0))
        self.assertEqual(mdp.q_ext()[0], mdp.q_ext()[1], "Precondition: extrinsic values tie.")
        # Testing assertion
        spec = qspec_from_mdp(mdp)
        self.assertEqual(spec.q_ext, (0.5, 0.5), "Testing: both actions keep Q_ext = 0.5.")
        self.assertEqual(spec.delta, (0.0, 1.0), "Testing: the smaller bonus goes first.")
        # Postcondition assertion
        self.assertFalse(lemma1_condition(spec), "Postcondition: a gap of 1 exceeds 2·0, outside the lemma.")
        equal = qspec_from_mdp(TwoActionMDP(r_ext=(0.5, 0.5), r_int=(0.3, 0.3)))
        self.assertTrue(verify_lemma1(equal).holds, "Postcondition: a full tie sits on the lemma boundary.")


class Theorem2TestCase(SimpleTestCase):
    """
    The three regimes of mastery-weighted bonuses.
    """

    def test_no_mastery_is_exploration_dominant(self):
        report = classify_theorem2(QSpec((1.0, 0.0), (0.0, 1.0)), 0.0)
        self.assertEqual(report.case_label, Case.EXPLORATION_DOMINANT)
        self.assertEqual(report.relation, Relation.NOT_GREATER)

    def test_full_mastery_leaves_the_policy_unchanged(self):
        for spec in (QSpec((1.0, 0.0), (0.0, 1.0)), QSpec((3.0, -2.0), (-4.0, 4.5))):
            report = classify_theorem2(spec, 1.0)
            self.assertEqual(report.case_label, Case.EXPLOITATION_DOMINANT)
            self.assertEqual(report.h_total, report.h_ext, "Testing: equality is exact.")
            self.assertEqual(report.max_policy_difference, 0.0)
            self.assertEqual(report.relation, Relation.EQUAL)

    def test_bonus_on_the_optimal_action_lowers_entropy(self):
        adaptive = AdaptiveQSpec((1.0, 0.0), (0.5, 0.0))
        self.assertTrue(is_case2_pattern(adaptive))
        report = classify_adaptive(adaptive)
        self.assertEqual(report.case_label, Case.ADAPTIVE_MIXED)
        self.assertEqual(report.relation, Relation.GREATER)

    def test_partial_mastery_scales_the_bonus(self):
        adaptive = AdaptiveQSpec.from_alpha(QSpec((1.0, 0.0), (0.0, 2.0)), (0.25, 0.5))
        self.assertEqual(adaptive.delta_hat, (0.0, 1.0))
        self.assertEqual(classify_theorem2(QSpec((1.0, 0.0), (0.0, 2.0)), (0.25, 0.5)).case_label, Case.ADAPTIVE_MIXED)

    def test_mastery_out_of_range_rejected(self):
        with self.assertRaises(ContractViolation):
            classify_theorem2(QSpec((1.0, 0.0), (0.0, 1.0)), 1.5)

    def test_inconsistent_report_rejected(self):
        with self.assertRaises(ContractViolation):
            CaseReport(Case.EXPLORATION_DOMINANT, 0.2, 0.6, Relation.GREATER)

    def test_case_suite(self):
        report = theorem2_suite(samples=500, seed=11)
        self.assertEqual(report.case1_failures, 0)
        self.assertEqual(report.case3_max_policy_difference, 0.0)
        self.assertEqual(report.case2_failures, 0)
        self.assertTrue(report.passed)


class MonotonicityTestCase(SimpleTestCase):

    def test_peak_at_one_half(self):
        self.assertAlmostEqual(float(binary_entropy(0.5)), math.log(2), places=15)

    def test_symmetry(self):
        self.assertAlmostEqual(float(binary_entropy(0.1)), float(binary_entropy(0.9)), places=15)

    def test_grid_scan(self):
        report = entropy_monotonicity_scan(999)
        self.assertEqual(report.increasing_violations, 0)
        self.assertEqual(report.decreasing_violations, 0)
        self.assertEqual(report.argmax_p, 0.5)
        self.assertLess(report.ln2_error, 1e-12)
        self.assertTrue(report.passed())

    def test_grid_too_small(self):
        with self.assertRaises(ContractViolation):
            entropy_monotonicity_scan(2)

    def test_scan_agrees_with_pairwise_comparison(self):
        p = np.arange(1, 100) / 100
        h = binary_entropy(p)
        self.assertTrue(np.all(np.diff(h[:50]) > 0))
        self.assertTrue(np.all(np.diff(h[49:]) < 0))
