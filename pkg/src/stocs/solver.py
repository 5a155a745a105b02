"""Complete search: backtracking and forward checking over policy trees.

Both algorithms walk the variable order depth-first, maximizing over
decision values and weighting stochastic branches by probability. They
run in two modes:

  max    - compute the exact maximal satisfaction and an argmax policy.
  decide - answer "is some policy >= theta" with a witness, pruning
           against locally required thresholds.

Forward checking additionally prunes future variables after each
assignment: every constraint with exactly one unassigned scope variable
filters that variable's values. A wiped-out future decision domain kills
the branch; pruned probability mass on future stochastic variables gives
the upper bound prod(remaining mass), used to abandon hopeless branches.
Under conditional tables the mass bound is disabled (pruned mass is no
longer branch-independent) and only domain wipeout remains.

Decide mode keeps a lower and an upper accumulator per chance node. The
locally required threshold only caps how much of a child's exact value
gets computed, so a child may report an interval rather than a point;
when the accumulated intervals straddle the threshold, straddling
children are re-scored exactly (max mode) until the verdict is settled.
A naive single-accumulator scheme is unsound there: an early-stopped
sibling's surplus above its local requirement can be exactly what a
later shortfall needs.

Prune rules can be disabled independently; verdicts and values never
change, only the work done (and the witness in decide mode).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import NonpositiveBranchProbabilityError, ThetaOutOfRangeError
from .model import (
    PROB_TOL,
    ConditionalTable,
    Constraint,
    Instance,
    VariableSpec,
    validate_instance,
)
from .semantics import (
    ChanceNode,
    DecisionNode,
    Leaf,
    PolicyNode,
    SatisfactionResult,
    SearchStats,
    first_policy,
)

__all__ = [
    "PruneRules", "DecideResult",
    "bt_max", "fc_max", "bt_decide", "fc_decide",
    "required_threshold", "strip_zero_probability_values",
]


@dataclass(frozen=True)
class PruneRules:
    decision_stop: bool = True   # stop scanning decision values once one suffices
    chance_abort: bool = True    # cut a chance node when settled either way
    fc_wipeout: bool = True      # cut on future decision domain wipeout
    fc_mass: bool = True         # use the probability-mass upper bound


@dataclass(frozen=True)
class DecideResult:
    satisfiable: bool
    policy: PolicyNode | None  # witness when satisfiable
    stats: SearchStats


def required_threshold(parent_required: float, branch_probability: float | None = None,
                       accumulated: float = 0.0, remaining: float = 0.0) -> float:
    """Threshold a child branch must reach for its parent to reach its own.

    A decision branch passes the requirement through. A chance branch of
    probability p, with mass `accumulated` already secured and mass
    `remaining` still unexplored on other branches, must reach
    (parent_required - accumulated - remaining) / p, clamped to [0, 1].
    """
    if branch_probability is None:
        return parent_required
    if branch_probability <= 0.0:
        raise NonpositiveBranchProbabilityError(
            f"chance branch probability {branch_probability!r} must be positive"
        )
    needed = (parent_required - accumulated - remaining) / branch_probability
    return min(1.0, max(0.0, needed))


class _Search:
    """One search over one instance; owns all mutable state."""

    def __init__(self, instance: Instance, fc: bool, rules: PruneRules,
                 value_order: str | None):
        if value_order not in (None, "domain", "ub"):
            raise ValueError(f"unknown value_order {value_order!r}")
        self.inst = instance
        self.fc = fc
        self.rules = rules
        self.order_by_ub = value_order == "ub"
        self.use_mass = fc and not instance.has_cpts
        self.stats = SearchStats()
        n = instance.n
        self.env: list = [None] * n
        self.pruned: list[set[int]] = [set() for _ in range(n)]
        self.active_count = [len(v.domain) for v in instance.variables]
        self.trail: list[tuple[int, int]] = []
        self.first = [first_policy(instance, d) for d in range(n + 1)]
        self.root_dead = any(not c.fn(self.env) for c in instance.constant_compiled)
        if fc and not self.root_dead:
            self.root_dead = self._preprocess_unary()

    # ------------------------------------------------------------------
    # forward-checking bookkeeping
    # ------------------------------------------------------------------

    def _preprocess_unary(self) -> bool:
        """Prune unary constraints once up front (permanent, not trailed)."""
        for c in self.inst.unary_compiled:
            j = c.last_idx
            var = self.inst.variables[j]
            for w in var.domain:
                if w in self.pruned[j]:
                    continue
                self.env[j] = w
                ok = c.fn(self.env)
                self.env[j] = None
                if not ok:
                    self.pruned[j].add(w)
                    self.active_count[j] -= 1
            if self.active_count[j] == 0:
                if var.kind == "decision":
                    if self.rules.fc_wipeout:
                        self.stats.fc_wipeouts += 1
                        return True
                elif self.rules.fc_mass:
                    self.stats.fc_mass_prunes += 1
                    return True
            elif (var.kind == "stochastic" and self.use_mass and self.rules.fc_mass
                    and self._remaining_mass(j) <= 0.0):
                self.stats.fc_mass_prunes += 1
                return True
        return False

    def _remaining_mass(self, j: int) -> float:
        var = self.inst.variables[j]
        if not self.pruned[j]:
            return 1.0
        assert var.probabilities is not None
        return sum(q for w, q in zip(var.domain, var.probabilities) if w not in self.pruned[j])

    def _ub(self, depth: int) -> float:
        """Upper bound on any policy's satisfaction below ``depth``."""
        if not self.use_mass:
            return 1.0
        bound = 1.0
        for j in self.inst.stochastic_indices:
            if j > depth:
                bound *= self._remaining_mass(j)
        return bound

    def _forward_check(self, depth: int) -> str:
        """Prune future variables reached by newly completed constraints.

        Returns "ok", "wipeout" (future decision domain emptied) or "mass"
        (future stochastic variable lost all its probability mass).
        """
        for c in self.inst.fc_fire_at[depth]:
            j = c.last_idx
            var = self.inst.variables[j]
            pruned_j = self.pruned[j]
            changed = False
            for w in var.domain:
                if w in pruned_j:
                    continue
                self.env[j] = w
                ok = c.fn(self.env)
                self.env[j] = None
                if not ok:
                    pruned_j.add(w)
                    self.active_count[j] -= 1
                    self.trail.append((j, w))
                    changed = True
            if not changed:
                continue
            if self.active_count[j] == 0:
                if var.kind == "decision":
                    if self.rules.fc_wipeout:
                        self.stats.fc_wipeouts += 1
                        return "wipeout"
                elif self.rules.fc_mass:
                    # zero mass under any distribution, conditional or not
                    self.stats.fc_mass_prunes += 1
                    return "mass"
            elif (var.kind == "stochastic" and self.use_mass and self.rules.fc_mass
                    and self._remaining_mass(j) <= 0.0):
                self.stats.fc_mass_prunes += 1
                return "mass"
        return "ok"

    def _undo(self, mark: int) -> None:
        while len(self.trail) > mark:
            j, w = self.trail.pop()
            self.pruned[j].discard(w)
            self.active_count[j] += 1

    def _enter(self, depth: int, value: int) -> str:
        """Assign env[depth]=value, check completed constraints, fire FC."""
        self.stats.nodes_visited += 1
        self.env[depth] = value
        for c in self.inst.check_at[depth]:
            if not c.fn(self.env):
                return "violated"
        if self.fc:
            return self._forward_check(depth)
        return "ok"

    def _decision_values(self, depth: int) -> list[int]:
        var = self.inst.variables[depth]
        values = [w for w in var.domain if w not in self.pruned[depth]]
        if not self.order_by_ub or not self.use_mass or len(values) < 2:
            return values
        scored = []
        for pos, w in enumerate(values):
            mark = len(self.trail)
            self.env[depth] = w
            violated = any(not c.fn(self.env) for c in self.inst.check_at[depth])
            if not violated and self._forward_check(depth) == "ok":
                bound = self._ub(depth)
            else:
                bound = 0.0
            self._undo(mark)
            self.env[depth] = None
            scored.append((-bound, pos, w))
        scored.sort()
        return [w for _, _, w in scored]

    # ------------------------------------------------------------------
    # max mode
    # ------------------------------------------------------------------

    def max_value(self, depth: int) -> tuple[float, PolicyNode]:
        if depth == self.inst.n:
            return 1.0, Leaf()
        var = self.inst.variables[depth]
        if var.kind == "decision":
            return self._max_decision(depth, var)
        return self._max_chance(depth, var)

    def _max_decision(self, depth: int, var: VariableSpec) -> tuple[float, PolicyNode]:
        best = -1.0
        best_value: int | None = None
        best_child: PolicyNode | None = None
        for w in self._decision_values(depth):
            mark = len(self.trail)
            status = self._enter(depth, w)
            score: float | None
            child: PolicyNode | None
            if status != "ok":
                score, child = 0.0, None
            elif (self.use_mass and self.rules.fc_mass and best >= 0.0
                    and self._ub(depth) <= best):
                self.stats.fc_mass_prunes += 1
                score, child = None, None  # cannot strictly improve; skip
            else:
                score, child = self.max_value(depth + 1)
            self._undo(mark)
            self.env[depth] = None
            if score is not None and score > best:
                best, best_value, best_child = score, w, child
        if best_value is None or best <= 0.0:
            # nothing scores: normalize to the first depth-first subtree so
            # the argmax matches plain backtracking and the oracle exactly
            return 0.0, DecisionNode(var.name, var.domain[0], self.first[depth + 1])
        if best_child is None:
            best_child = self.first[depth + 1]
        return best, DecisionNode(var.name, best_value, best_child)

    def _max_chance(self, depth: int, var: VariableSpec) -> tuple[float, PolicyNode]:
        probs = self.inst.distribution(depth, self.env)
        children: list[PolicyNode] = []
        total = 0.0
        for w, q in zip(var.domain, probs):
            if q == 0.0 or w in self.pruned[depth]:
                children.append(self.first[depth + 1])
                continue
            mark = len(self.trail)
            status = self._enter(depth, w)
            if status != "ok":
                children.append(self.first[depth + 1])
            else:
                score, child = self.max_value(depth + 1)
                total += q * score
                children.append(child)
            self._undo(mark)
            self.env[depth] = None
        return total, ChanceNode(var.name, tuple(children))

    # ------------------------------------------------------------------
    # decide mode
    # ------------------------------------------------------------------
    #
    # decide_value returns (lo, hi, policy) with:
    #   lo <= true subtree max <= hi
    #   the policy's exact satisfaction is >= lo
    #   conclusiveness: lo >= required or hi < required

    def decide_value(self, depth: int, required: float) -> tuple[float, float, PolicyNode]:
        if depth == self.inst.n:
            return 1.0, 1.0, Leaf()
        var = self.inst.variables[depth]
        if var.kind == "decision":
            return self._decide_decision(depth, var, required)
        return self._decide_chance(depth, var, required)

    def _decide_decision(self, depth: int, var: VariableSpec,
                         required: float) -> tuple[float, float, PolicyNode]:
        best_lo = -1.0
        best_value: int | None = None
        best_child: PolicyNode | None = None
        node_hi = 0.0
        stopped = False
        values = self._decision_values(depth)
        for pos, w in enumerate(values):
            mark = len(self.trail)
            status = self._enter(depth, w)
            if status != "ok":
                lo, hi, child = 0.0, 0.0, None
            else:
                bound = self._ub(depth)
                if self.use_mass and self.rules.fc_mass and bound < required:
                    self.stats.fc_mass_prunes += 1
                    lo, hi, child = 0.0, bound, None
                else:
                    lo, hi, child = self.decide_value(depth + 1, required)
                    hi = min(hi, bound)
            self._undo(mark)
            self.env[depth] = None
            if lo > best_lo:
                best_lo, best_value, best_child = lo, w, child
            node_hi = max(node_hi, hi)
            if lo >= required and self.rules.decision_stop:
                if pos + 1 < len(values):
                    self.stats.decision_prunes += 1
                    stopped = True
                break
        if best_value is None:
            return 0.0, 0.0, DecisionNode(var.name, var.domain[0], self.first[depth + 1])
        if best_child is None:
            best_child = self.first[depth + 1]
        hi = 1.0 if stopped else max(node_hi, best_lo)
        return best_lo, hi, DecisionNode(var.name, best_value, best_child)

    def _decide_chance(self, depth: int, var: VariableSpec,
                       required: float) -> tuple[float, float, PolicyNode]:
        probs = self.inst.distribution(depth, self.env)
        k = len(var.domain)
        suffix = [0.0] * (k + 1)
        for i in range(k - 1, -1, -1):
            suffix[i] = suffix[i + 1] + probs[i]
        children: list[PolicyNode] = [self.first[depth + 1]] * k
        bounds: list[tuple[float, float]] = [(0.0, 0.0)] * k
        a_lo = 0.0
        a_hi = 0.0
        abort_hi = None
        for i, (w, q) in enumerate(zip(var.domain, probs)):
            if self.rules.chance_abort:
                if a_lo >= required:
                    # settled satisfiable; leave the rest at the default subtree
                    self.stats.chance_prunes += 1
                    return a_lo, a_hi + suffix[i], ChanceNode(var.name, tuple(children))
                if a_hi + suffix[i] < required:
                    self.stats.chance_prunes += 1
                    abort_hi = a_hi + suffix[i]
                    break
            if q == 0.0 or w in self.pruned[depth]:
                continue  # exact 0 contribution, default child stands
            child_required = required_threshold(required, q, a_hi, suffix[i + 1])
            mark = len(self.trail)
            status = self._enter(depth, w)
            if status != "ok":
                lo, hi = 0.0, 0.0
            else:
                bound = self._ub(depth)
                if self.use_mass and self.rules.fc_mass and bound < child_required:
                    self.stats.fc_mass_prunes += 1
                    lo, hi = 0.0, bound
                else:
                    lo, hi, child = self.decide_value(depth + 1, child_required)
                    hi = min(hi, bound)
                    children[i] = child
            self._undo(mark)
            self.env[depth] = None
            bounds[i] = (lo, hi)
            a_lo += q * lo
            a_hi += q * min(hi, 1.0)
        node = ChanceNode(var.name, tuple(children))
        if abort_hi is not None:
            return a_lo, abort_hi, node
        if a_lo >= required or a_hi < required:
            return a_lo, a_hi, node
        # The intervals straddle the requirement: settle straddling branches
        # exactly, in domain order, until either accumulator crosses it.
        for i, (w, q) in enumerate(zip(var.domain, probs)):
            lo, hi = bounds[i]
            if q == 0.0 or lo >= hi:
                continue
            mark = len(self.trail)
            status = self._enter(depth, w)
            assert status == "ok", "straddling branch was explored before"
            exact, child = self.max_value(depth + 1)
            self._undo(mark)
            self.env[depth] = None
            children[i] = child
            a_lo += q * (exact - lo)
            a_hi += q * (exact - min(hi, 1.0))
            bounds[i] = (exact, exact)
            node = ChanceNode(var.name, tuple(children))
            if a_lo >= required or a_hi < required:
                return a_lo, a_hi, node
        # every branch exact: collapse the accumulators' rounding gap
        return a_lo, a_lo, node


def _strip_variable(var: VariableSpec, keep: dict[str, tuple[int, ...]]) -> VariableSpec:
    domain = keep[var.name]
    if var.kind == "decision":
        return var
    if var.probabilities is not None:
        probs = tuple(q for w, q in zip(var.domain, var.probabilities) if w in domain)
        return VariableSpec(var.name, var.kind, domain, probabilities=probs)
    assert var.cpt is not None
    keep_idx = [i for i, w in enumerate(var.domain) if w in domain]
    rows = {}
    for given, probs in var.cpt.rows.items():
        if all(g in keep[p] for g, p in zip(given, var.cpt.parents)):
            rows[given] = tuple(probs[i] for i in keep_idx)
    return VariableSpec(var.name, var.kind, domain,
                        cpt=ConditionalTable(var.name, var.cpt.parents, rows))


def strip_zero_probability_values(instance: Instance) -> Instance:
    """Remove stochastic values that have probability 0 in every context.

    Optional preprocessing: the default search keeps such values in the
    policy tree (they contribute nothing). Table constraints are filtered
    to the surviving domains; the maximal satisfaction is unchanged.
    """
    keep: dict[str, tuple[int, ...]] = {}
    for i, var in enumerate(instance.variables):
        if var.kind == "decision":
            keep[var.name] = var.domain
        elif var.probabilities is not None:
            keep[var.name] = tuple(w for w, q in zip(var.domain, var.probabilities) if q > 0.0)
        else:
            assert var.cpt is not None
            rows = list(var.cpt.rows.values())
            keep[var.name] = tuple(
                w for j, w in enumerate(var.domain) if any(r[j] > 0.0 for r in rows)
            )
    variables = tuple(_strip_variable(v, keep) for v in instance.variables)
    constraints = []
    for c in instance.constraints:
        if c.allowed is None:
            constraints.append(c)
        else:
            tuples = frozenset(
                t for t in c.allowed if all(v in keep[name] for v, name in zip(t, c.scope))
            )
            constraints.append(Constraint(scope=c.scope, allowed=tuples))
    return validate_instance(replace(
        instance, variables=variables, constraints=tuple(constraints)
    ))


def _inflate(original: Instance, stripped: Instance, node: PolicyNode,
             depth: int = 0) -> PolicyNode:
    """Re-expand a policy over stripped domains to the original domains."""
    if depth == original.n:
        return node
    var = original.variables[depth]
    if var.kind == "decision":
        assert isinstance(node, DecisionNode)
        return DecisionNode(var.name, node.chosen_value,
                            _inflate(original, stripped, node.child, depth + 1))
    assert isinstance(node, ChanceNode)
    slim = stripped.variables[depth].domain
    children = []
    for w in var.domain:
        if w in slim:
            children.append(_inflate(original, stripped, node.children[slim.index(w)], depth + 1))
        else:
            children.append(first_policy(original, depth + 1))
    return ChanceNode(var.name, tuple(children))


def _run_max(instance: Instance, fc: bool, rules: PruneRules | None,
             drop_zero_prob: bool, value_order: str | None) -> SatisfactionResult:
    rules = rules or PruneRules()
    target = strip_zero_probability_values(instance) if drop_zero_prob else instance
    search = _Search(target, fc, rules, value_order)
    if search.root_dead:
        return SatisfactionResult(0.0, first_policy(instance), search.stats)
    value, policy = search.max_value(0)
    value = min(1.0, max(value, 0.0))
    if drop_zero_prob:
        policy = _inflate(instance, target, policy)
    return SatisfactionResult(value, policy, search.stats)


def _run_decide(instance: Instance, fc: bool, theta_override: float | None,
                rules: PruneRules | None, drop_zero_prob: bool,
                value_order: str | None) -> DecideResult:
    theta = instance.theta if theta_override is None else float(theta_override)
    if not 0.0 <= theta <= 1.0:
        raise ThetaOutOfRangeError(f"theta {theta!r} outside [0, 1]")
    rules = rules or PruneRules()
    required = max(0.0, theta - PROB_TOL)
    if required <= 0.0:
        # every policy qualifies; hand back the first depth-first one
        return DecideResult(True, first_policy(instance), SearchStats())
    target = strip_zero_probability_values(instance) if drop_zero_prob else instance
    search = _Search(target, fc, rules, value_order)
    if search.root_dead:
        if required <= 0.0:
            return DecideResult(True, first_policy(instance), search.stats)
        return DecideResult(False, None, search.stats)
    lo, _, policy = search.decide_value(0, required)
    if lo >= required:
        if drop_zero_prob:
            policy = _inflate(instance, target, policy)
        return DecideResult(True, policy, search.stats)
    return DecideResult(False, None, search.stats)


def bt_max(instance: Instance, rules: PruneRules | None = None,
           drop_zero_prob: bool = False, value_order: str | None = None) -> SatisfactionResult:
    """Exact maximal satisfaction by plain depth-first recursion."""
    return _run_max(instance, False, rules, drop_zero_prob, value_order)


def fc_max(instance: Instance, rules: PruneRules | None = None,
           drop_zero_prob: bool = False, value_order: str | None = None) -> SatisfactionResult:
    """Exact maximal satisfaction with forward checking."""
    return _run_max(instance, True, rules, drop_zero_prob, value_order)


def bt_decide(instance: Instance, theta_override: float | None = None,
              rules: PruneRules | None = None, drop_zero_prob: bool = False,
              value_order: str | None = None) -> DecideResult:
    """Threshold decision by backtracking with threshold pruning."""
    return _run_decide(instance, False, theta_override, rules, drop_zero_prob, value_order)


def fc_decide(instance: Instance, theta_override: float | None = None,
              rules: PruneRules | None = None, drop_zero_prob: bool = False,
              value_order: str | None = None) -> DecideResult:
    """Threshold decision with forward checking."""
    return _run_decide(instance, True, theta_override, rules, drop_zero_prob, value_order)
