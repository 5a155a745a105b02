import random

import pytest

from gen import random_instance, random_policy
from stocs import (
    ChanceNode,
    DecisionNode,
    Leaf,
    check_assignment,
    enumerate_policies,
    expr_constraint,
    first_policy,
    induced_assignment,
    is_satisfiable_oracle,
    oracle_max_satisfaction,
    policy_satisfaction,
    scenario_probability,
    scenarios,
    serialize_policy,
)
from stocs.errors import (
    MalformedPolicyError,
    MissingAssignmentError,
    OracleCapExceededError,
    OutOfDomainValueError,
    PartialAssignmentError,
)
from conftest import make_instance

TOL = 1e-9


def rigid_a(value):
    return DecisionNode("x", value, ChanceNode("s", (Leaf(), Leaf())))


def recourse_b():
    return ChanceNode("s", (DecisionNode("x", 0, Leaf()),
                            DecisionNode("x", 1, Leaf())))


class TestScenarioProbability:
    def test_product_of_branch_probabilities(self):
        inst = make_instance([("s1", "s", (0, 1), (0.5, 0.5)),
                              ("s2", "s", (0, 1), (0.3, 0.7))])
        assert scenario_probability(inst, {"s1": 0, "s2": 1}) == pytest.approx(0.35)

    def test_empty_product_is_one(self):
        inst = make_instance([("x", "d", (0, 1))])
        assert scenario_probability(inst, {}) == 1.0

    def test_zero_probability_value(self):
        inst = make_instance([("s", "s", (0, 1), (1.0, 0.0))])
        assert scenario_probability(inst, {"s": 1}) == 0.0

    def test_missing_assignment(self):
        inst = make_instance([("s", "s", (0, 1), (0.5, 0.5))])
        with pytest.raises(MissingAssignmentError):
            scenario_probability(inst, {})

    def test_out_of_domain_value(self):
        inst = make_instance([("s", "s", (0, 1), (0.5, 0.5))])
        with pytest.raises(OutOfDomainValueError):
            scenario_probability(inst, {"s": 7})

    def test_probabilities_sum_to_one_over_all_scenarios(self):
        rng = random.Random(11)
        for _ in range(25):
            inst = random_instance(rng)
            total = sum(scenario_probability(inst, sc) for sc in scenarios(inst))
            assert total == pytest.approx(1.0, abs=TOL)


class TestCheckAssignment:
    def test_satisfying(self, instance_a):
        assert check_assignment(instance_a, {"x": 1, "s": 1}) is True

    def test_violating(self, instance_a):
        assert check_assignment(instance_a, {"x": 1, "s": 0}) is False

    def test_no_constraints_is_vacuously_true(self):
        inst = make_instance([("x", "d", (0, 1))])
        assert check_assignment(inst, {"x": 0}) is True

    def test_partial_assignment_rejected(self, instance_a):
        with pytest.raises(PartialAssignmentError):
            check_assignment(instance_a, {"x": 1})


class TestPolicySatisfaction:
    def test_rigid_policy_half(self, instance_a):
        assert policy_satisfaction(instance_a, rigid_a(0)) == pytest.approx(0.5)

    def test_recourse_policy_full(self, instance_b):
        assert policy_satisfaction(instance_b, recourse_b()) == pytest.approx(1.0)

    def test_complement_constraint(self):
        inst = make_instance(
            [("x", "d", (0, 1)), ("s", "s", (0, 1), (0.5, 0.5))],
            [expr_constraint("x != s")])
        assert policy_satisfaction(inst, rigid_a(0)) == pytest.approx(0.5)

    def test_wrong_variable_order(self, instance_a):
        bad = ChanceNode("s", (DecisionNode("x", 0, Leaf()),
                               DecisionNode("x", 0, Leaf())))
        with pytest.raises(MalformedPolicyError):
            policy_satisfaction(instance_a, bad)

    def test_wrong_branch_count(self, instance_a):
        bad = DecisionNode("x", 0, ChanceNode("s", (Leaf(),)))
        with pytest.raises(MalformedPolicyError):
            policy_satisfaction(instance_a, bad)

    def test_chosen_value_outside_domain(self, instance_a):
        bad = DecisionNode("x", 5, ChanceNode("s", (Leaf(), Leaf())))
        with pytest.raises(MalformedPolicyError):
            policy_satisfaction(instance_a, bad)

    def test_matches_scenario_sum_formulation(self):
        rng = random.Random(23)
        for _ in range(25):
            inst = random_instance(rng)
            policy = random_policy(rng, inst)
            by_walk = policy_satisfaction(inst, policy)
            by_sum = sum(
                scenario_probability(inst, sc)
                * check_assignment(inst, induced_assignment(inst, policy, sc))
                for sc in scenarios(inst))
            assert by_walk == pytest.approx(by_sum, abs=TOL)
            assert 0.0 <= by_walk <= 1.0


class TestEnumeration:
    def test_unconditional_decision_has_two_policies(self, instance_a):
        assert instance_a.policy_count == 2
        assert len(list(enumerate_policies(instance_a))) == 2

    def test_observed_branch_squares_the_choices(self, instance_b):
        assert instance_b.policy_count == 4
        assert len(list(enumerate_policies(instance_b))) == 4

    def test_three_choices_in_two_branches(self):
        inst = make_instance(
            [("s1", "s", (0, 1), (0.5, 0.5)),
             ("x", "d", (0, 1, 2)),
             ("s2", "s", (0, 1), (0.5, 0.5))])
        assert inst.policy_count == 9
        assert len(list(enumerate_policies(inst))) == 9

    def test_policies_are_distinct(self):
        rng = random.Random(31)
        for _ in range(15):
            inst = random_instance(rng, max_vars=4)
            seen = {serialize_policy(p) for p in enumerate_policies(inst)}
            assert len(seen) == inst.policy_count

    def test_cap_is_enforced(self, instance_b):
        with pytest.raises(OracleCapExceededError) as info:
            list(enumerate_policies(instance_b, cap=3))
        assert info.value.policy_count == 4


class TestOracle:
    def test_instance_a(self, instance_a):
        assert oracle_max_satisfaction(instance_a).probability == pytest.approx(0.5)

    def test_instance_b(self, instance_b):
        assert oracle_max_satisfaction(instance_b).probability == pytest.approx(1.0)

    def test_instance_c(self, instance_c):
        assert oracle_max_satisfaction(instance_c).probability == pytest.approx(0.5)

    def test_argmax_ties_break_to_first_enumerated(self, instance_a):
        # both rigid policies score 0.5; enumeration starts at x=0
        assert oracle_max_satisfaction(instance_a).policy == rigid_a(0)

    def test_satisfiable_at_its_threshold(self, instance_a):
        assert is_satisfiable_oracle(instance_a) is True

    def test_not_satisfiable_above_the_maximum(self, instance_a):
        assert is_satisfiable_oracle(instance_a, theta=0.6) is False

    def test_theta_zero_is_always_satisfiable(self):
        rng = random.Random(5)
        for _ in range(10):
            assert is_satisfiable_oracle(random_instance(rng), theta=0.0)

    def test_reported_policy_rescores_to_the_maximum(self):
        rng = random.Random(41)
        for _ in range(20):
            inst = random_instance(rng)
            got = oracle_max_satisfaction(inst)
            assert policy_satisfaction(inst, got.policy) == pytest.approx(
                got.probability, abs=TOL)


def test_first_policy_takes_first_domain_values(instance_a):
    assert first_policy(instance_a) == rigid_a(0)
