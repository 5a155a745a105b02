"""Policy-tree semantics and the brute-force oracle.

A policy fixes each decision variable's value as a function of the
stochastic outcomes observed before it in the variable order. Its
satisfaction is the probability mass of the leaves whose complete
assignments satisfy every constraint. An instance is satisfiable when
some policy reaches satisfaction >= theta (non-strict, with 1e-9 slack).

The oracle enumerates every policy and is the ground truth the search
algorithms are tested against. It is deliberately naive and guarded by a
policy-count cap.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Mapping, Union

from .errors import (
    MalformedPolicyError,
    MissingAssignmentError,
    OracleCapExceededError,
    OutOfDomainValueError,
    PartialAssignmentError,
    StocsError,
)
from .model import PROB_TOL, Instance

__all__ = [
    "Leaf", "DecisionNode", "ChanceNode", "PolicyNode",
    "SearchStats", "SatisfactionResult", "ORACLE_CAP",
    "scenario_probability", "check_assignment", "policy_satisfaction",
    "enumerate_policies", "oracle_max_satisfaction", "is_satisfiable_oracle",
    "scenarios", "induced_assignment", "first_policy",
]

ORACLE_CAP = 10 ** 6


@dataclass(frozen=True)
class Leaf:
    pass


@dataclass(frozen=True)
class DecisionNode:
    variable: str
    chosen_value: int
    child: "PolicyNode"


@dataclass(frozen=True)
class ChanceNode:
    variable: str
    children: tuple["PolicyNode", ...]  # one child per domain value, in domain order


PolicyNode = Union[Leaf, DecisionNode, ChanceNode]


@dataclass
class SearchStats:
    nodes_visited: int = 0
    chance_prunes: int = 0
    decision_prunes: int = 0
    fc_wipeouts: int = 0
    fc_mass_prunes: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "nodes_visited": self.nodes_visited,
            "chance_prunes": self.chance_prunes,
            "decision_prunes": self.decision_prunes,
            "fc_wipeouts": self.fc_wipeouts,
            "fc_mass_prunes": self.fc_mass_prunes,
        }


@dataclass(frozen=True)
class SatisfactionResult:
    probability: float
    policy: PolicyNode | None
    stats: SearchStats


def _env_from_mapping(instance: Instance, assignment: Mapping[str, int],
                      require_all: bool) -> list:
    env: list = [None] * instance.n
    for i, var in enumerate(instance.variables):
        if var.name in assignment:
            value = assignment[var.name]
            if value not in var.domain:
                raise OutOfDomainValueError(f"{var.name}={value} not in domain {var.domain}")
            env[i] = value
        elif require_all:
            raise PartialAssignmentError(f"no value for variable {var.name}")
    return env


def scenario_probability(instance: Instance, scenario: Mapping[str, int]) -> float:
    """Probability of a complete stochastic outcome under independence.

    The conditional-table version lives in the extensions module.
    """
    if instance.has_cpts:
        raise StocsError(
            "instance has conditional tables; use conditional_scenario_probability"
        )
    product = 1.0
    for i in instance.stochastic_indices:
        var = instance.variables[i]
        if var.name not in scenario:
            raise MissingAssignmentError(f"scenario misses stochastic variable {var.name}")
        value = scenario[var.name]
        if value not in var.domain:
            raise OutOfDomainValueError(f"{var.name}={value} not in domain {var.domain}")
        assert var.probabilities is not None
        product *= var.probabilities[var.domain.index(value)]
    return product


def check_assignment(instance: Instance, assignment: Mapping[str, int]) -> bool:
    """True iff the complete assignment satisfies every constraint."""
    env = _env_from_mapping(instance, assignment, require_all=True)
    return all(c.fn(env) for c in instance.compiled)


def _expect_decision(instance: Instance, depth: int, node: PolicyNode) -> DecisionNode:
    var = instance.variables[depth]
    if not isinstance(node, DecisionNode) or node.variable != var.name:
        raise MalformedPolicyError(
            f"expected a decision node for {var.name} at depth {depth}, got {node!r}"
        )
    if node.chosen_value not in var.domain:
        raise MalformedPolicyError(
            f"decision {var.name}={node.chosen_value} not in domain {var.domain}"
        )
    return node


def _expect_chance(instance: Instance, depth: int, node: PolicyNode) -> ChanceNode:
    var = instance.variables[depth]
    if not isinstance(node, ChanceNode) or node.variable != var.name:
        raise MalformedPolicyError(
            f"expected a chance node for {var.name} at depth {depth}, got {node!r}"
        )
    if len(node.children) != len(var.domain):
        raise MalformedPolicyError(
            f"chance node for {var.name} has {len(node.children)} children, "
            f"domain has {len(var.domain)}"
        )
    return node


def policy_satisfaction(instance: Instance, policy: PolicyNode) -> float:
    """Probability mass of the policy's satisfying leaves.

    Constraints are checked as soon as their last scope variable gets a
    value, so subtrees below a violated constraint contribute 0 without
    being walked (their structure is not inspected).
    """
    if any(not c.fn([]) for c in instance.constant_compiled):
        return 0.0
    env: list = [None] * instance.n

    def sat(depth: int, node: PolicyNode) -> float:
        if depth == instance.n:
            if not isinstance(node, Leaf):
                raise MalformedPolicyError(f"expected a leaf at depth {depth}, got {node!r}")
            return 1.0
        var = instance.variables[depth]
        if var.kind == "decision":
            dec = _expect_decision(instance, depth, node)
            env[depth] = dec.chosen_value
            if any(not c.fn(env) for c in instance.check_at[depth]):
                return 0.0
            return sat(depth + 1, dec.child)
        chance = _expect_chance(instance, depth, node)
        probs = instance.distribution(depth, env)
        total = 0.0
        for value, q, child in zip(var.domain, probs, chance.children):
            if q == 0.0:
                continue
            env[depth] = value
            if any(not c.fn(env) for c in instance.check_at[depth]):
                continue
            total += q * sat(depth + 1, child)
        env[depth] = None
        return total

    return sat(0, policy)


def _subpolicies(instance: Instance, depth: int) -> Iterator[PolicyNode]:
    if depth == instance.n:
        yield Leaf()
        return
    var = instance.variables[depth]
    if var.kind == "decision":
        for value in var.domain:
            for child in _subpolicies(instance, depth + 1):
                yield DecisionNode(var.name, value, child)
    else:
        # materializing the subtree pool is fine under the cap; the product
        # shares child trees between policies
        pool = list(_subpolicies(instance, depth + 1))
        for combo in itertools.product(pool, repeat=len(var.domain)):
            yield ChanceNode(var.name, combo)


def enumerate_policies(instance: Instance, cap: int = ORACLE_CAP) -> Iterator[PolicyNode]:
    """Yield every distinct policy once, in domain-order depth-first order.

    Earlier variables vary slowest, so the stream order matches the
    tie-breaking rule used by the search algorithms.
    """
    count = instance.policy_count
    if count > cap:
        raise OracleCapExceededError(count, cap)
    return _subpolicies(instance, 0)


def oracle_max_satisfaction(instance: Instance, cap: int = ORACLE_CAP) -> SatisfactionResult:
    """Exact maximum satisfaction by exhaustive policy enumeration.

    Ties go to the first policy in enumeration order. nodes_visited counts
    scored policies.
    """
    best = -1.0
    best_policy: PolicyNode | None = None
    stats = SearchStats()
    for policy in enumerate_policies(instance, cap=cap):
        stats.nodes_visited += 1
        score = policy_satisfaction(instance, policy)
        if score > best:
            best = score
            best_policy = policy
            if best >= 1.0:
                break
    return SatisfactionResult(best, best_policy, stats)


def is_satisfiable_oracle(instance: Instance, theta: float | None = None,
                          cap: int = ORACLE_CAP) -> bool:
    threshold = instance.theta if theta is None else theta
    return oracle_max_satisfaction(instance, cap=cap).probability >= threshold - PROB_TOL


def scenarios(instance: Instance) -> Iterator[dict[str, int]]:
    """All complete stochastic outcomes, in domain order per variable."""
    names = [instance.variables[i].name for i in instance.stochastic_indices]
    domains = [instance.variables[i].domain for i in instance.stochastic_indices]
    for combo in itertools.product(*domains):
        yield dict(zip(names, combo))


def induced_assignment(instance: Instance, policy: PolicyNode,
                       scenario: Mapping[str, int]) -> dict[str, int]:
    """Complete assignment obtained by running the policy on a scenario."""
    env: dict[str, int] = {}
    node = policy
    for depth, var in enumerate(instance.variables):
        if var.kind == "decision":
            dec = _expect_decision(instance, depth, node)
            env[var.name] = dec.chosen_value
            node = dec.child
        else:
            chance = _expect_chance(instance, depth, node)
            if var.name not in scenario:
                raise MissingAssignmentError(f"scenario misses stochastic variable {var.name}")
            value = scenario[var.name]
            if value not in var.domain:
                raise OutOfDomainValueError(f"{var.name}={value} not in domain {var.domain}")
            env[var.name] = value
            node = chance.children[var.domain.index(value)]
    if not isinstance(node, Leaf):
        raise MalformedPolicyError(f"expected a leaf after all variables, got {node!r}")
    return env


def first_policy(instance: Instance, depth: int = 0) -> PolicyNode:
    """The first policy in enumeration order from ``depth`` down.

    Decision variables take their first domain value; chance nodes branch
    over the full domain with identical subtrees.
    """
    tree: PolicyNode = Leaf()
    for var in reversed(instance.variables[depth:]):
        if var.kind == "decision":
            tree = DecisionNode(var.name, var.domain[0], tree)
        else:
            tree = ChanceNode(var.name, (tree,) * len(var.domain))
    return tree
