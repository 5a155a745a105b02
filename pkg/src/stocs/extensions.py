"""Extensions: dependent stochastic variables and objective optimization.

Conditional tables drop the independence assumption; scenario
probabilities become chain products of table rows selected by earlier
values. The search engine already reads branch weights through
Instance.distribution, so the conditional solver is the plain solver
(forward checking then keeps only its wipeout prune, since pruned mass is
no longer branch-independent).

optimize_expected maximizes the expected objective value, where leaves
violating a constraint score the objective's violation_value. That
penalized expectation decomposes over the tree (max at decisions,
weighted sum at chance nodes). Maximizing expectation subject to
satisfaction >= theta does not decompose; optimize_chance_constrained
does it by exhaustive policy enumeration and is exponential.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from . import expr as _expr
from .errors import (
    MissingAssignmentError,
    MissingParentValueError,
    NoFeasiblePolicyError,
    NoObjectiveError,
    OutOfDomainValueError,
)
from .model import PROB_TOL, Instance
from .semantics import (
    ORACLE_CAP,
    ChanceNode,
    DecisionNode,
    Leaf,
    PolicyNode,
    SatisfactionResult,
    enumerate_policies,
    first_policy,
    policy_satisfaction,
)
from .solver import bt_max

__all__ = [
    "OptimizeResult",
    "conditional_scenario_probability", "bt_max_conditional",
    "policy_expected_value", "optimize_expected", "optimize_chance_constrained",
]


@dataclass(frozen=True)
class OptimizeResult:
    policy: PolicyNode
    expected_value: float
    satisfaction: float


def conditional_scenario_probability(instance: Instance, scenario: Mapping[str, int],
                                     decisions: Mapping[str, int] | None = None) -> float:
    """Chain-rule probability of a stochastic outcome.

    Conditional variables read their parents from the scenario and, for
    decision parents, from ``decisions``. Without tables this equals the
    independent scenario probability.
    """
    decisions = decisions or {}
    env: list = [None] * instance.n
    for i, var in enumerate(instance.variables):
        source = scenario if var.kind == "stochastic" else decisions
        if var.name in source:
            value = source[var.name]
            if value not in var.domain:
                raise OutOfDomainValueError(f"{var.name}={value} not in domain {var.domain}")
            env[i] = value
    product = 1.0
    for i in instance.stochastic_indices:
        var = instance.variables[i]
        if env[i] is None:
            raise MissingAssignmentError(f"scenario misses stochastic variable {var.name}")
        if var.cpt is not None:
            for p in var.cpt.parents:
                if env[instance.index_of[p]] is None:
                    raise MissingParentValueError(
                        f"{var.name} needs a value for its parent {p}"
                    )
        probs = instance.distribution(i, env)
        product *= probs[var.domain.index(env[i])]
    return product


def bt_max_conditional(instance: Instance) -> SatisfactionResult:
    """Exact maximal satisfaction under conditional tables.

    The recursion is bt_max with branch weights looked up from the row
    selected by the partial assignment; on table-free instances it is
    bt_max exactly.
    """
    return bt_max(instance)


def _compiled_objective(instance: Instance):
    if instance.objective is None:
        raise NoObjectiveError("instance has no objective")
    fn = _expr.compile_expression(instance.objective.expression, instance.index_of)
    return fn, float(instance.objective.violation_value)


def policy_expected_value(instance: Instance, policy: PolicyNode) -> float:
    """Expected objective value of a policy, violation_value on bad leaves."""
    objective, violation = _compiled_objective(instance)
    if any(not c.fn([]) for c in instance.constant_compiled):
        return violation
    env: list = [None] * instance.n

    def walk(depth: int, node: PolicyNode) -> float:
        if depth == instance.n:
            return float(objective(env))
        var = instance.variables[depth]
        if var.kind == "decision":
            assert isinstance(node, DecisionNode)
            env[depth] = node.chosen_value
            if any(not c.fn(env) for c in instance.check_at[depth]):
                env[depth] = None
                return violation
            value = walk(depth + 1, node.child)
            env[depth] = None
            return value
        assert isinstance(node, ChanceNode)
        probs = instance.distribution(depth, env)
        total = 0.0
        for w, q, child in zip(var.domain, probs, node.children):
            if q == 0.0:
                continue
            env[depth] = w
            if any(not c.fn(env) for c in instance.check_at[depth]):
                total += q * violation
            else:
                total += q * walk(depth + 1, child)
            env[depth] = None
        return total

    return walk(0, policy)


def optimize_expected(instance: Instance) -> OptimizeResult:
    """Maximize the expected (violation-penalized) objective over policies.

    Ties go to the first policy in domain-order depth-first discovery.
    Also reports the winning policy's satisfaction probability.
    """
    objective, violation = _compiled_objective(instance)
    if any(not c.fn([]) for c in instance.constant_compiled):
        policy = first_policy(instance)
        return OptimizeResult(policy, violation, 0.0)
    env: list = [None] * instance.n

    def walk(depth: int) -> tuple[float, PolicyNode]:
        if depth == instance.n:
            return float(objective(env)), Leaf()
        var = instance.variables[depth]
        if var.kind == "decision":
            best = None
            best_value = var.domain[0]
            best_child: PolicyNode = first_policy(instance, depth + 1)
            for w in var.domain:
                env[depth] = w
                if any(not c.fn(env) for c in instance.check_at[depth]):
                    value, child = violation, first_policy(instance, depth + 1)
                else:
                    value, child = walk(depth + 1)
                env[depth] = None
                if best is None or value > best:
                    best, best_value, best_child = value, w, child
            assert best is not None
            return best, DecisionNode(var.name, best_value, best_child)
        probs = instance.distribution(depth, env)
        total = 0.0
        children = []
        for w, q in zip(var.domain, probs):
            if q == 0.0:
                children.append(first_policy(instance, depth + 1))
                continue
            env[depth] = w
            if any(not c.fn(env) for c in instance.check_at[depth]):
                total += q * violation
                children.append(first_policy(instance, depth + 1))
            else:
                value, child = walk(depth + 1)
                total += q * value
                children.append(child)
            env[depth] = None
        return total, ChanceNode(var.name, tuple(children))

    expected, policy = walk(0)
    return OptimizeResult(policy, expected, policy_satisfaction(instance, policy))


def optimize_chance_constrained(instance: Instance, theta: float | None = None,
                                cap: int = ORACLE_CAP) -> OptimizeResult:
    """Best expected objective among policies with satisfaction >= theta.

    Exhaustive policy enumeration (the threshold does not decompose over
    the tree); exponential and guarded by the oracle cap. Ties go to the
    first feasible policy in enumeration order.
    """
    threshold = instance.theta if theta is None else float(theta)
    _compiled_objective(instance)  # fail fast without an objective
    best: OptimizeResult | None = None
    for policy in enumerate_policies(instance, cap=cap):
        satisfaction = policy_satisfaction(instance, policy)
        if satisfaction < threshold - PROB_TOL:
            continue
        value = policy_expected_value(instance, policy)
        if best is None or value > best.expected_value:
            best = OptimizeResult(policy, value, satisfaction)
    if best is None:
        raise NoFeasiblePolicyError(f"no policy reaches satisfaction {threshold}")
    return best
