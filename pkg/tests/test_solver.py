import random

import pytest

from gen import random_instance
from stocs import (
    DecisionNode,
    Leaf,
    PruneRules,
    bt_decide,
    bt_max,
    expr_constraint,
    fc_decide,
    fc_max,
    first_policy,
    oracle_max_satisfaction,
    policy_satisfaction,
    required_threshold,
    strip_zero_probability_values,
)
from stocs.errors import NonpositiveBranchProbabilityError, ThetaOutOfRangeError
from stocs.solver import _Search
from conftest import make_instance

TOL = 1e-9


class TestMaxMode:
    def test_known_maxima(self, instance_a, instance_b, instance_c):
        for inst, expected in ((instance_a, 0.5), (instance_b, 1.0),
                               (instance_c, 0.5)):
            assert bt_max(inst).probability == pytest.approx(expected, abs=TOL)
            assert fc_max(inst).probability == pytest.approx(expected, abs=TOL)

    def test_policy_rescores_to_reported_maximum(self):
        rng = random.Random(3)
        for _ in range(40):
            inst = random_instance(rng)
            for solve in (bt_max, fc_max):
                got = solve(inst)
                assert policy_satisfaction(inst, got.policy) == pytest.approx(
                    got.probability, abs=TOL)

    def test_agrees_with_oracle(self):
        rng = random.Random(17)
        for _ in range(40):
            inst = random_instance(rng)
            expected = oracle_max_satisfaction(inst).probability
            assert bt_max(inst).probability == pytest.approx(expected, abs=TOL)
            assert fc_max(inst).probability == pytest.approx(expected, abs=TOL)

    def test_argmax_matches_oracle_tie_breaking(self):
        rng = random.Random(29)
        for _ in range(25):
            inst = random_instance(rng, max_vars=4)
            expected = oracle_max_satisfaction(inst).policy
            assert bt_max(inst).policy == expected
            assert fc_max(inst).policy == expected


class TestDecideMode:
    def test_satisfiable_at_the_maximum(self, instance_a):
        got = bt_decide(instance_a)
        assert got.satisfiable
        assert policy_satisfaction(instance_a, got.policy) >= 0.5 - TOL

    def test_unsatisfiable_above_the_maximum(self, instance_a):
        assert not bt_decide(instance_a, theta_override=0.6).satisfiable
        assert not fc_decide(instance_a, theta_override=0.6).satisfiable

    def test_theta_zero_returns_the_first_depth_first_policy(self):
        rng = random.Random(47)
        for _ in range(15):
            inst = random_instance(rng)
            for solve in (bt_decide, fc_decide):
                got = solve(inst, theta_override=0.0)
                assert got.satisfiable
                assert got.policy == first_policy(inst)

    def test_theta_override_validated(self, instance_a):
        with pytest.raises(ThetaOutOfRangeError):
            bt_decide(instance_a, theta_override=1.5)

    def test_witnesses_meet_the_threshold(self):
        rng = random.Random(53)
        for _ in range(30):
            inst = random_instance(rng)
            for theta in (0.0, 0.25, 0.5, 0.75, 1.0):
                for solve in (bt_decide, fc_decide):
                    got = solve(inst, theta_override=theta)
                    if got.satisfiable:
                        score = policy_satisfaction(inst, got.policy)
                        assert score >= theta - TOL
                    else:
                        assert got.policy is None

    def test_verdicts_match_the_oracle_across_thetas(self):
        rng = random.Random(59)
        for _ in range(30):
            inst = random_instance(rng)
            best = oracle_max_satisfaction(inst).probability
            for theta in [k / 10 for k in range(11)]:
                expected = best >= theta - TOL
                assert bt_decide(inst, theta_override=theta).satisfiable == expected
                assert fc_decide(inst, theta_override=theta).satisfiable == expected

    def test_theta_monotone(self):
        rng = random.Random(61)
        for _ in range(20):
            inst = random_instance(rng)
            verdicts = [fc_decide(inst, theta_override=k / 10).satisfiable
                        for k in range(11)]
            # once unsatisfiable, stays unsatisfiable as theta grows
            assert verdicts == sorted(verdicts, reverse=True)

    def test_early_stopped_siblings_cannot_hide_mass(self):
        # x must cover the s1=1 half by matching the yet-unseen s2; the
        # s1=0 half satisfies for free. True max 0.75: a solver that
        # forgets the free half's surplus wrongly reports 0.7 UNSAT.
        inst = make_instance(
            [("s1", "s", (0, 1), (0.5, 0.5)),
             ("x", "d", (0, 1)),
             ("s2", "s", (0, 1), (0.5, 0.5))],
            [expr_constraint("s1 = 0 or x = s2")], theta=0.7)
        assert oracle_max_satisfaction(inst).probability == pytest.approx(0.75)
        for solve in (bt_decide, fc_decide):
            got = solve(inst)
            assert got.satisfiable
            assert policy_satisfaction(inst, got.policy) >= 0.7 - TOL


class TestForwardChecking:
    def test_mass_bound_abandons_the_weak_branch(self, fc_demo):
        got = fc_decide(fc_demo)
        assert got.satisfiable
        assert policy_satisfaction(fc_demo, got.policy) == pytest.approx(0.7)
        # x=0 leaves only 0.5 of s's mass, below 0.6: cut before expanding s
        assert got.stats.fc_mass_prunes >= 1

    def test_strictly_fewer_nodes_than_backtracking(self, fc_demo):
        bt_nodes = bt_decide(fc_demo).stats.nodes_visited
        fc_nodes = fc_decide(fc_demo).stats.nodes_visited
        assert fc_nodes < bt_nodes

    def test_never_more_nodes_than_backtracking(self):
        rng = random.Random(67)
        for _ in range(40):
            inst = random_instance(rng)
            assert (fc_max(inst).stats.nodes_visited
                    <= bt_max(inst).stats.nodes_visited)
            assert (fc_decide(inst).stats.nodes_visited
                    <= bt_decide(inst).stats.nodes_visited)

    def test_unconstrained_future_decision_prunes_nothing(self):
        inst = make_instance(
            [("s", "s", (0, 1), (0.5, 0.5)), ("x", "d", (0, 1)),
             ("y", "d", (0, 1))],
            [expr_constraint("x = s")], theta=0.5)
        bt_got = bt_max(inst)
        fc_got = fc_max(inst)
        assert fc_got.stats.fc_wipeouts == 0
        assert fc_got.probability == pytest.approx(bt_got.probability, abs=TOL)
        assert fc_got.policy == bt_got.policy

    def test_wipeout_of_a_future_decision(self):
        # any s value forbids both x values
        inst = make_instance(
            [("s", "s", (0, 1), (0.5, 0.5)), ("x", "d", (0, 1))],
            [expr_constraint("x + s < 0")], theta=0.5)
        got = fc_decide(inst)
        assert not got.satisfiable
        assert got.stats.fc_wipeouts >= 1


class TestPruneRules:
    @pytest.mark.parametrize("rule", ["decision_stop", "chance_abort",
                                      "fc_wipeout", "fc_mass"])
    def test_each_rule_only_changes_stats(self, rule):
        rng = random.Random(71)
        rules = PruneRules(**{rule: False})
        for _ in range(25):
            inst = random_instance(rng)
            assert fc_max(inst, rules=rules).probability == pytest.approx(
                fc_max(inst).probability, abs=TOL)
            assert bt_max(inst, rules=rules).probability == pytest.approx(
                bt_max(inst).probability, abs=TOL)
            for theta in (0.2, 0.6, 1.0):
                assert (fc_decide(inst, theta_override=theta, rules=rules).satisfiable
                        == fc_decide(inst, theta_override=theta).satisfiable)
                assert (bt_decide(inst, theta_override=theta, rules=rules).satisfiable
                        == bt_decide(inst, theta_override=theta).satisfiable)

    def test_all_rules_off_still_exact(self, instance_c):
        rules = PruneRules(decision_stop=False, chance_abort=False,
                           fc_wipeout=False, fc_mass=False)
        assert fc_max(instance_c, rules=rules).probability == pytest.approx(0.5)
        assert fc_decide(instance_c, rules=rules).satisfiable


class TestRequiredThreshold:
    def test_decision_passes_through(self):
        assert required_threshold(0.8) == 0.8

    def test_chance_branch_algebra(self):
        got = required_threshold(0.8, branch_probability=0.5, accumulated=0.0,
                                 remaining=0.5)
        assert got == pytest.approx(0.6)

    def test_settled_mass_clamps_to_zero(self):
        got = required_threshold(0.5, branch_probability=0.5, accumulated=0.6,
                                 remaining=0.0)
        assert got == 0.0

    def test_impossible_requirement_clamps_to_one(self):
        got = required_threshold(1.0, branch_probability=0.25, accumulated=0.0,
                                 remaining=0.0)
        assert got == 1.0

    def test_nonpositive_branch_probability(self):
        with pytest.raises(NonpositiveBranchProbabilityError):
            required_threshold(0.5, branch_probability=0.0)


class TestSearchState:
    def test_trail_restores_domains_exactly(self, fc_demo):
        search = _Search(fc_demo, fc=True, rules=PruneRules(), value_order=None)
        pruned_before = [set(p) for p in search.pruned]
        counts_before = list(search.active_count)
        search.max_value(0)
        assert search.pruned == pruned_before
        assert search.active_count == counts_before
        assert search.trail == []
        assert search.env == [None, None]

    def test_trail_restores_after_decide(self, production):
        search = _Search(production, fc=True, rules=PruneRules(), value_order=None)
        search.decide_value(0, production.theta)
        assert all(not p for p in search.pruned)
        assert search.trail == []

    def test_searches_do_not_leak_between_runs(self, instance_c):
        first = fc_max(instance_c)
        second = fc_max(instance_c)
        assert first.probability == second.probability
        assert first.policy == second.policy
        assert first.stats.as_dict() == second.stats.as_dict()


class TestZeroProbabilityValues:
    def test_kept_by_default_and_strippable(self):
        rng = random.Random(73)
        for _ in range(20):
            inst = random_instance(rng, zero_prob=True)
            slim = strip_zero_probability_values(inst)
            assert slim.scenario_count <= inst.scenario_count
            assert bt_max(slim).probability == pytest.approx(
                bt_max(inst).probability, abs=TOL)

    def test_drop_flag_returns_a_policy_over_full_domains(self):
        inst = make_instance(
            [("x", "d", (0, 1)), ("s", "s", (0, 1, 2), (0.5, 0.5, 0.0))],
            [expr_constraint("x = s")], theta=0.5)
        got = fc_max(inst, drop_zero_prob=True)
        assert got.probability == pytest.approx(0.5)
        # the re-expanded policy must still branch over all three values
        assert policy_satisfaction(inst, got.policy) == pytest.approx(0.5)

    def test_verdicts_unchanged_by_dropping(self):
        rng = random.Random(79)
        for _ in range(15):
            inst = random_instance(rng, zero_prob=True)
            assert (fc_decide(inst, drop_zero_prob=True).satisfiable
                    == fc_decide(inst).satisfiable)


class TestValueOrderHeuristic:
    def test_ub_ordering_never_changes_results(self):
        rng = random.Random(83)
        for _ in range(25):
            inst = random_instance(rng)
            plain = fc_max(inst)
            ordered = fc_max(inst, value_order="ub")
            assert ordered.probability == pytest.approx(plain.probability, abs=TOL)
            assert (fc_decide(inst, value_order="ub").satisfiable
                    == fc_decide(inst).satisfiable)

    def test_unknown_order_rejected(self, instance_a):
        with pytest.raises(ValueError):
            fc_max(instance_a, value_order="entropy")
