"""Instance model: variables, constraints, threshold, stage structure.

An instance is a sequence of variables (the order is the observation and
decision order), a constraint set, and a satisfaction threshold theta.
Decision variables are set by the solver; stochastic variables are drawn
from a given distribution, either unconditional or a conditional table
over earlier variables.

Instances are immutable once validated and safe to share between
concurrent searches.
"""

from __future__ import annotations

import itertools
import re
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Mapping, Sequence

from . import expr as _expr
from .errors import (
    ArityMismatchError,
    BadProbabilitySumError,
    CptCoverageError,
    CptParentOrderError,
    DuplicateNameError,
    DuplicateScopeVariableError,
    EmptyDomainError,
    InstanceValidationError,
    MissingDistributionError,
    NegativeProbabilityError,
    NonBooleanConstraintError,
    OutOfDomainValueError,
    ProbabilitiesOnDecisionError,
    ProbabilityLengthMismatchError,
    ThetaOutOfRangeError,
    UnknownScopeVariableError,
    UnsortedDomainError,
)

__all__ = [
    "ConditionalTable", "VariableSpec", "Constraint", "Objective", "Instance",
    "StageStructure", "CompiledConstraint", "validate_instance", "stage_blocks",
    "table_constraint", "expr_constraint", "ViolationValueWarning",
    "PROB_TOL",
]

# tolerance on distribution sums and on all probability comparisons
PROB_TOL = 1e-9

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class ViolationValueWarning(UserWarning):
    """The objective's violation value beats every achievable objective value."""


@dataclass(frozen=True)
class ConditionalTable:
    """Distribution of a stochastic variable given earlier variables.

    rows maps each full parent-value tuple (in parents order) to a
    distribution over the child's domain in domain order.
    """
    child: str
    parents: tuple[str, ...]
    rows: Mapping[tuple[int, ...], tuple[float, ...]]


@dataclass(frozen=True)
class VariableSpec:
    name: str
    kind: str  # "decision" | "stochastic"
    domain: tuple[int, ...]
    probabilities: tuple[float, ...] | None = None
    cpt: ConditionalTable | None = None


@dataclass(frozen=True)
class Constraint:
    """Either an extensional table over scope or an expression tree.

    Exactly one of allowed/expression is set. For expression constraints
    the scope is derived from the expression's variables.
    """
    scope: tuple[str, ...]
    allowed: frozenset[tuple[int, ...]] | None = None
    expression: _expr.Expr | None = None


@dataclass(frozen=True)
class Objective:
    """Integer-valued expression to maximize in expectation.

    Leaves that violate some constraint score violation_value instead of
    the expression's value.
    """
    expression: _expr.Expr
    violation_value: float = 0.0
    sense: str = "maximize"


def table_constraint(scope: Sequence[str], tuples: Sequence[Sequence[int]]) -> Constraint:
    return Constraint(
        scope=tuple(scope),
        allowed=frozenset(tuple(int(v) for v in t) for t in tuples),
    )


def expr_constraint(text_or_ast) -> Constraint:
    ast = text_or_ast if isinstance(text_or_ast, _expr.Expr) else _expr.parse_expression(text_or_ast)
    return Constraint(scope=tuple(_expr.variables_in(ast)), expression=ast)


@dataclass(frozen=True)
class CompiledConstraint:
    source: Constraint
    scope_idx: tuple[int, ...]  # ascending variable indices
    last_idx: int               # -1 for constant constraints
    second_last_idx: int        # -1 when fewer than two scope variables
    fn: Callable


@dataclass(frozen=True)
class StageStructure:
    """Maximal same-kind runs of the variable order.

    stage_count is the number of decision blocks (the m in an m-stage
    problem).
    """
    blocks: tuple[tuple[str, tuple[str, ...]], ...]
    stage_count: int


@dataclass(frozen=True)
class Instance:
    variables: tuple[VariableSpec, ...]
    constraints: tuple[Constraint, ...]
    theta: float
    objective: Objective | None = None
    name: str = ""

    @cached_property
    def index_of(self) -> dict[str, int]:
        return {v.name: i for i, v in enumerate(self.variables)}

    @property
    def n(self) -> int:
        return len(self.variables)

    @cached_property
    def is_stochastic(self) -> tuple[bool, ...]:
        return tuple(v.kind == "stochastic" for v in self.variables)

    @cached_property
    def stochastic_indices(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.is_stochastic) if s)

    @cached_property
    def has_cpts(self) -> bool:
        return any(v.cpt is not None for v in self.variables)

    @cached_property
    def policy_count(self) -> int:
        """Number of distinct policy trees.

        Leaf to root: a decision variable multiplies by its domain size, a
        stochastic variable raises to the power of its domain size (one
        independent subpolicy per observed value).
        """
        count = 1
        for v in reversed(self.variables):
            if v.kind == "decision":
                count *= len(v.domain)
            else:
                count **= len(v.domain)
        return count

    @cached_property
    def scenario_count(self) -> int:
        count = 1
        for i in self.stochastic_indices:
            count *= len(self.variables[i].domain)
        return count

    def distribution(self, index: int, env: Sequence) -> tuple[float, ...]:
        """Branch probabilities of variable ``index`` given earlier values.

        env is an environment list with positions before ``index`` filled.
        Unconditional variables ignore env.
        """
        var = self.variables[index]
        if var.cpt is None:
            assert var.probabilities is not None
            return var.probabilities
        key = tuple(env[self.index_of[p]] for p in var.cpt.parents)
        return var.cpt.rows[key]

    @cached_property
    def compiled(self) -> tuple[CompiledConstraint, ...]:
        out = []
        for c in self.constraints:
            idx = tuple(sorted(self.index_of[name] for name in c.scope))
            last = idx[-1] if idx else -1
            second = idx[-2] if len(idx) >= 2 else -1
            if c.expression is not None:
                fn = _expr.compile_expression(c.expression, self.index_of)
            else:
                positions = tuple(self.index_of[name] for name in c.scope)
                allowed = c.allowed

                def fn(env, positions=positions, allowed=allowed):
                    return tuple(env[p] for p in positions) in allowed

            out.append(CompiledConstraint(c, idx, last, second, fn))
        return tuple(out)

    @cached_property
    def check_at(self) -> tuple[tuple[CompiledConstraint, ...], ...]:
        """Constraints grouped by the depth at which they become checkable."""
        groups: list[list[CompiledConstraint]] = [[] for _ in range(self.n)]
        for c in self.compiled:
            if c.last_idx >= 0:
                groups[c.last_idx].append(c)
        return tuple(tuple(g) for g in groups)

    @cached_property
    def fc_fire_at(self) -> tuple[tuple[CompiledConstraint, ...], ...]:
        """Constraints that reach one unassigned variable at each depth."""
        groups: list[list[CompiledConstraint]] = [[] for _ in range(self.n)]
        for c in self.compiled:
            if c.second_last_idx >= 0:
                groups[c.second_last_idx].append(c)
        return tuple(tuple(g) for g in groups)

    @cached_property
    def unary_compiled(self) -> tuple[CompiledConstraint, ...]:
        return tuple(c for c in self.compiled if len(c.scope_idx) == 1)

    @cached_property
    def constant_compiled(self) -> tuple[CompiledConstraint, ...]:
        return tuple(c for c in self.compiled if not c.scope_idx)


def _check_name(name, what: str) -> str:
    if not isinstance(name, str) or not _NAME_RE.match(name):
        raise InstanceValidationError(f"{what} name {name!r} is not an identifier")
    return name


def _check_distribution(probs, domain: tuple[int, ...], what: str) -> tuple[float, ...]:
    if len(probs) != len(domain):
        raise ProbabilityLengthMismatchError(
            f"{what}: {len(probs)} probabilities for {len(domain)} domain values"
        )
    values = []
    for p in probs:
        p = float(p)
        if p < 0.0:
            raise NegativeProbabilityError(f"{what}: negative probability {p}")
        values.append(p)
    total = sum(values)
    if abs(total - 1.0) > PROB_TOL:
        raise BadProbabilitySumError(f"{what}: probabilities sum to {total!r}", total)
    return tuple(values)


def _validate_variable(raw: VariableSpec) -> VariableSpec:
    name = _check_name(raw.name, "variable")
    if raw.kind not in ("decision", "stochastic"):
        raise InstanceValidationError(f"variable {name}: unknown kind {raw.kind!r}")
    domain = tuple(raw.domain)
    if not domain:
        raise EmptyDomainError(f"variable {name}: empty domain")
    for v in domain:
        if not isinstance(v, int) or isinstance(v, bool):
            raise InstanceValidationError(f"variable {name}: non-integer domain value {v!r}")
    if any(a >= b for a, b in zip(domain, domain[1:])):
        raise UnsortedDomainError(f"variable {name}: domain must be strictly increasing")

    if raw.kind == "decision":
        if raw.probabilities is not None:
            raise ProbabilitiesOnDecisionError(f"variable {name}: probabilities on a decision variable")
        if raw.cpt is not None:
            raise ProbabilitiesOnDecisionError(f"variable {name}: conditional table on a decision variable")
        return VariableSpec(name, "decision", domain)

    if raw.probabilities is not None and raw.cpt is not None:
        raise InstanceValidationError(
            f"variable {name}: both probabilities and a conditional table"
        )
    if raw.probabilities is not None:
        probs = _check_distribution(raw.probabilities, domain, f"variable {name}")
        return VariableSpec(name, "stochastic", domain, probabilities=probs)
    if raw.cpt is None:
        raise MissingDistributionError(f"variable {name}: stochastic variable needs a distribution")
    return VariableSpec(name, "stochastic", domain, cpt=raw.cpt)  # cpt checked later


def _validate_cpt(var: VariableSpec, variables: tuple[VariableSpec, ...],
                  index_of: dict[str, int]) -> ConditionalTable:
    cpt = var.cpt
    assert cpt is not None
    child_idx = index_of[var.name]
    if cpt.child != var.name:
        raise InstanceValidationError(
            f"conditional table child {cpt.child!r} attached to variable {var.name!r}"
        )
    parents = tuple(cpt.parents)
    seen = set()
    for p in parents:
        if p not in index_of:
            raise UnknownScopeVariableError(f"conditional table for {var.name}: unknown parent {p!r}", p)
        if p in seen:
            raise DuplicateScopeVariableError(f"conditional table for {var.name}: duplicate parent {p!r}")
        seen.add(p)
        if index_of[p] >= child_idx:
            raise CptParentOrderError(
                f"conditional table for {var.name}: parent {p} does not precede it"
            )
    rows = {tuple(int(v) for v in given): probs for given, probs in cpt.rows.items()}
    parent_domains = [variables[index_of[p]].domain for p in parents]
    expected = set(itertools.product(*parent_domains))
    got = set(rows)
    if got != expected:
        missing = expected - got
        extra = got - expected
        parts = []
        if missing:
            parts.append(f"{len(missing)} parent combinations missing (e.g. {sorted(missing)[0]})")
        if extra:
            parts.append(f"{len(extra)} rows for unknown combinations (e.g. {sorted(extra)[0]})")
        raise CptCoverageError(f"conditional table for {var.name}: " + "; ".join(parts))
    checked = {
        given: _check_distribution(probs, var.domain, f"conditional table for {var.name} row {given}")
        for given, probs in sorted(rows.items())
    }
    return ConditionalTable(var.name, parents, checked)


def _validate_constraint(raw: Constraint, variables: tuple[VariableSpec, ...],
                         index_of: dict[str, int], label: str) -> Constraint:
    if (raw.allowed is None) == (raw.expression is None):
        raise InstanceValidationError(f"{label}: need exactly one of a table or an expression")

    if raw.expression is not None:
        names = _expr.variables_in(raw.expression)
        for name in names:
            if name not in index_of:
                raise UnknownScopeVariableError(f"{label}: unknown variable {name!r}", name)
        if _expr.infer_type(raw.expression) != "bool":
            raise NonBooleanConstraintError(
                f"{label}: expression {_expr.format_expression(raw.expression)!r} is not boolean"
            )
        return Constraint(scope=tuple(names), expression=raw.expression)

    scope = tuple(raw.scope)
    if not scope:
        raise InstanceValidationError(f"{label}: table constraint with empty scope")
    seen = set()
    for name in scope:
        if name not in index_of:
            raise UnknownScopeVariableError(f"{label}: unknown variable {name!r}", name)
        if name in seen:
            raise DuplicateScopeVariableError(f"{label}: duplicate scope variable {name!r}")
        seen.add(name)
    domains = [variables[index_of[name]].domain for name in scope]
    tuples = set()
    for t in raw.allowed:
        t = tuple(t)
        if len(t) != len(scope):
            raise ArityMismatchError(f"{label}: tuple {t} has arity {len(t)}, scope has {len(scope)}")
        for value, name, domain in zip(t, scope, domains):
            if value not in domain:
                raise OutOfDomainValueError(f"{label}: value {value} not in domain of {name}")
        tuples.add(t)
    return Constraint(scope=scope, allowed=frozenset(tuples))


def validate_instance(raw: Instance) -> Instance:
    """Check every model invariant and return a normalized instance.

    Idempotent: validating the result returns an equal instance.
    """
    variables_in_order = tuple(raw.variables)
    names = [v.name for v in variables_in_order]
    dup = {n for n in names if names.count(n) > 1}
    if dup:
        raise DuplicateNameError(f"duplicate variable name {sorted(dup)[0]!r}")
    index_of = {n: i for i, n in enumerate(names)}

    variables = tuple(_validate_variable(v) for v in variables_in_order)
    variables = tuple(
        v if v.cpt is None else VariableSpec(
            v.name, v.kind, v.domain, cpt=_validate_cpt(v, variables, index_of)
        )
        for v in variables
    )

    theta = float(raw.theta)
    if not 0.0 <= theta <= 1.0:
        raise ThetaOutOfRangeError(f"theta {theta!r} outside [0, 1]")

    constraints = tuple(
        _validate_constraint(c, variables, index_of, f"constraint {i}")
        for i, c in enumerate(raw.constraints)
    )

    objective = raw.objective
    if objective is not None:
        if objective.sense != "maximize":
            raise InstanceValidationError(f"objective sense {objective.sense!r} is not 'maximize'")
        for name in _expr.variables_in(objective.expression):
            if name not in index_of:
                raise UnknownScopeVariableError(f"objective: unknown variable {name!r}", name)
        _expr.infer_type(objective.expression)
        violation = float(objective.violation_value)
        domain_of = {v.name: v.domain for v in variables}
        low, _ = _expr.interval_range(objective.expression, domain_of)
        if violation > low:
            warnings.warn(
                f"violation_value {violation} exceeds the objective's lower bound {low}; "
                "violating leaves may be preferred to satisfying ones",
                ViolationValueWarning,
                stacklevel=2,
            )
        objective = Objective(objective.expression, violation, "maximize")

    return Instance(
        variables=variables,
        constraints=constraints,
        theta=theta,
        objective=objective,
        name=str(raw.name or ""),
    )


def stage_blocks(instance: Instance) -> StageStructure:
    """Split the variable order into maximal same-kind runs.

    The stage count is the number of decision blocks.
    """
    blocks: list[tuple[str, tuple[str, ...]]] = []
    for kind, group in itertools.groupby(instance.variables, key=lambda v: v.kind):
        blocks.append((kind, tuple(v.name for v in group)))
    stage_count = sum(1 for kind, _ in blocks if kind == "decision")
    return StageStructure(tuple(blocks), stage_count)
