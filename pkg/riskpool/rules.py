import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .prob_core import (ABS_TOL, Partition, RiskPoolError, RiskVector,
                        SpaceMismatch, _validate_weights, cond_expectation,
                        convex_order_gap, covariance, expectation,
                        partition_of, refine, variance)

logger = logging.getLogger(__name__)

# Feasibility tolerance of the comonotonic improvement program, on values
# scaled to at most 1 in absolute value.
LP_TOL = 1e-10

# The comonotonic improvement may exceed a risk in convex order by at most
# IMPROVEMENT_TOL * max(1, max |X|).
IMPROVEMENT_TOL = ABS_TOL

RULE_NAMES = ('identity', 'all-in-one', 'mean-adjusted', 'uniform', 'cmrs',
              'mean-proportional', 'covariance', 'q-cmrs', 'generalized-cmrs',
              'mixture', 'gated', 'comono-improve', 'shifted-cmrs')


class NegativeRiskForProportional(RiskPoolError):
    pass


class DegenerateDenominator(RiskPoolError):
    pass


class BadMeasure(RiskPoolError):
    pass


class BadRuleParameter(RiskPoolError):
    pass


class UnknownRule(RiskPoolError):
    pass


class AllocationError(RiskPoolError):
    pass


class Allocation(RiskVector):
    """Allocation vector A^X; its components sum to the total risk S^X."""


@dataclass(frozen=True, eq=False)
class RuleSpec:
    """Declarative risk sharing rule: a canonical kind plus its parameters.

    Parameters
    ----------
    kind : str
        One of RULE_NAMES.
    weights : sequence of float, optional
        The measure Q of a 'q-cmrs' rule, one weight per outcome.
    partition : Partition, optional
        Target information of a 'generalized-cmrs' rule. When None, the rule
        takes the partition supplied at application time (see
        `apply_generalized`), or the trivial one.
    weight : float, optional
        Mixing weight lambda of a 'mixture' rule, applied to `first`.
    shift : float, optional
        Coefficient c of a 'shifted-cmrs' rule.
    first, second : RuleSpec, optional
        Component rules of 'mixture' and 'gated'.
    trigger : RiskVector, optional
        Designated input on which a 'gated' rule switches to `first`.
    """
    kind: str
    weights: tuple = None
    partition: Partition = None
    weight: float = None
    shift: float = None
    first: 'RuleSpec' = None
    second: 'RuleSpec' = None
    trigger: RiskVector = None

    def __post_init__(self):
        if self.kind not in RULE_NAMES:
            raise UnknownRule(f"unknown rule '{self.kind}'; expected one of "
                              f"{', '.join(RULE_NAMES)}")
        if self.kind == 'q-cmrs':
            if self.weights is None:
                raise BadMeasure('q-cmrs needs a weight sequence Q')
            object.__setattr__(self, 'weights',
                               _validate_weights(self.weights, BadMeasure))
        if self.kind in ('mixture', 'gated'):
            if self.first is None or self.second is None:
                raise BadRuleParameter(f'{self.kind} needs two component rules')
        if self.kind == 'mixture':
            if self.weight is None or not 0 <= self.weight <= 1:
                raise BadRuleParameter(
                    f'mixture weight must lie in [0, 1], got {self.weight!r}')
        if self.kind == 'gated' and self.trigger is None:
            raise BadRuleParameter('gated needs a trigger risk vector')
        if self.kind == 'shifted-cmrs' and self.shift is None:
            raise BadRuleParameter('shifted-cmrs needs a shift coefficient')

    @property
    def name(self):
        if self.kind == 'mixture':
            return (f'mixture({self.weight:g}, {self.first.name}, '
                    f'{self.second.name})')
        if self.kind == 'gated':
            return f'gated({self.first.name}, {self.second.name})'
        if self.kind == 'shifted-cmrs':
            return f'shifted-cmrs({self.shift:g})'
        return self.kind


def _as_allocation(x, matrix, kind):
    """Helper function. Wraps an n x m matrix as an Allocation after
    checking that it sums to S^X."""
    allocation = Allocation.from_matrix(x.space, matrix)
    total = x.total.values
    gap = float(np.max(np.abs(np.asarray(matrix).sum(axis=0) - total)))
    if gap > ABS_TOL * max(1.0, float(np.max(np.abs(total)))):
        raise AllocationError(
            f'{kind} allocation misses the total risk by {gap:.3e}')
    return allocation


def identity(x):
    return _as_allocation(x, x.matrix, 'identity')


def all_in_one(x):
    matrix = np.zeros((x.n, x.space.size))
    matrix[0] = x.total.values
    return _as_allocation(x, matrix, 'all-in-one')


def mean_adjusted(x):
    """(S - E[S], 0, ..., 0) + E[X]."""
    means = np.array([expectation(agent) for agent in x])
    total = x.total
    matrix = np.repeat(means[:, None], x.space.size, axis=1)
    matrix[0] = total.values - expectation(total) + means[0]
    return _as_allocation(x, matrix, 'mean-adjusted')


def uniform(x):
    matrix = np.repeat(x.total.values[None, :] / x.n, x.n, axis=0)
    return _as_allocation(x, matrix, 'uniform')


def cmrs(x):
    """Conditional mean risk sharing: A_i = E[X_i | S].

    Parameters
    ----------
    x : RiskVector

    Returns
    -------
    allocation : Allocation
    """
    levels = partition_of(x.total)
    matrix = [cond_expectation(agent, levels).values for agent in x]
    return _as_allocation(x, matrix, 'cmrs')


def q_cmrs(x, qweights):
    """CMRS computed under the measure Q instead of the space's own
    probabilities: A_i = E^Q[X_i | S]."""
    qweights = _validate_weights(qweights, BadMeasure)
    if qweights.size != x.space.size:
        raise BadMeasure(f'Q has {qweights.size} weights but the space has '
                         f'{x.space.size} outcomes')
    levels = partition_of(x.total)
    matrix = [cond_expectation(agent, levels, weights=qweights).values
              for agent in x]
    return _as_allocation(x, matrix, 'q-cmrs')


def mean_proportional(x):
    """S / E[S] * E[X], defined on non-negative risks only; 0/0 = 0."""
    matrix = x.matrix
    if np.any(matrix < 0):
        agent, outcome = np.argwhere(matrix < 0)[0]
        raise NegativeRiskForProportional(
            f'agent {agent} has negative risk {matrix[agent, outcome]!r} at '
            f'outcome {outcome}; mean-proportional needs non-negative risks')
    total = x.total
    expected_total = expectation(total)
    if expected_total == 0:
        if np.any(matrix > 0):
            # positive values whose expectation underflows to zero
            raise DegenerateDenominator(
                'E[S] vanishes although some risk is positive')
        return _as_allocation(x, np.zeros_like(matrix), 'mean-proportional')
    means = np.array([expectation(agent) for agent in x])
    return _as_allocation(
        x, np.outer(means / expected_total, total.values), 'mean-proportional')


def covariance_rule(x):
    """(S - E[S]) / Var(S) * Cov(X, S) + E[X]; 0/0 = 0 for constant S."""
    total = x.total
    means = np.array([expectation(agent) for agent in x])
    matrix = np.repeat(means[:, None], x.space.size, axis=1)
    if partition_of(total).n_blocks > 1:
        betas = np.array([covariance(agent, total) for agent in x])
        betas /= variance(total)
        matrix += np.outer(betas, total.values - expectation(total))
    return _as_allocation(x, matrix, 'covariance')


def generalized_cmrs(x, g):
    """Generalized CMRS: A_i = E[X_i | sigma(S, g)]."""
    target = refine(g, partition_of(x.total))
    matrix = [cond_expectation(agent, target).values for agent in x]
    return _as_allocation(x, matrix, 'generalized-cmrs')


def mixture(x, weight, first, second):
    """weight * A_first + (1 - weight) * A_second."""
    matrix = (weight * apply(first, x).matrix
              + (1 - weight) * apply(second, x).matrix)
    return _as_allocation(x, matrix, 'mixture')


def gated(x, trigger, first, second):
    """Applies `first` when x equals the trigger componentwise, otherwise
    `second`."""
    if trigger.space != x.space:
        raise SpaceMismatch('gated rule: trigger and input live on '
                            'different spaces')
    if trigger.n == x.n and x.allclose(trigger):
        return apply(first, x)
    return apply(second, x)


def shifted_cmrs(x, shift):
    """CMRS with the zero-mean transfer shift * (S - E[S]) moved from agent
    1 to agent 0."""
    base = cmrs(x).matrix
    total = x.total
    transfer = shift * (total.values - expectation(total))
    base[0] += transfer
    base[1] -= transfer
    return _as_allocation(x, base, 'shifted-cmrs')


def _lower_tail_integrals(values, probs, points):
    """Helper function. Integral of the quantile function of the discrete
    law (values, probs) from 0 to each p in `points`."""
    order = np.argsort(values, kind='stable')
    values, probs = values[order], probs[order]
    cum_probs = np.concatenate(([0.0], np.cumsum(probs)))
    cum_mass = np.concatenate(([0.0], np.cumsum(values * probs)))
    idx = np.clip(np.searchsorted(cum_probs, points, side='right') - 1, 0,
                  values.size - 1)
    return cum_mass[idx] + (points - cum_probs[idx]) * values[idx]


def _improvement_shares(levels, level_probs, gaps, floors):
    """Helper function. Solves the linear program of the comonotonic
    improvement.

    `levels` is the n x K matrix of cmrs values on the increasing levels of
    S, `gaps` holds the K - 1 increments of S and `floors` the n x (K - 1)
    lower tail integrals of each cmrs component at the level breakpoints.
    Per agent the variables are its values f, its lower tail integrals h
    and its shares w of every increment of S. A component whose lower tail
    integrals stay above those of its cmrs share, at equal means, is
    dominated by it in convex order.

    Returns
    -------
    shares : numpy.ndarray
        n x (K - 1) shares of the increments, each column summing to one.
    """
    n, n_levels = levels.shape
    ks = np.arange(1, n_levels)
    block = n * n_levels
    n_vars = 2 * block + n * (n_levels - 1)

    def f(i, k):
        return i * n_levels + k

    def h(i, k):
        return block + i * n_levels + k

    def w(i, k):
        return 2 * block + i * (n_levels - 1) + k - 1

    rows, cols, data, rhs = [], [], [], []
    row = 0
    for i in range(n):
        steps = row + ks - 1
        # f_k = f_{k-1} + gap_k * w_k
        rows += [steps, steps, steps]
        cols += [f(i, ks), f(i, ks - 1), w(i, ks)]
        data += [np.ones(ks.size), -np.ones(ks.size), -gaps]
        rhs.append(np.zeros(ks.size))
        row += ks.size
        # h_k = h_{k-1} + q_{k-1} * f_{k-1}
        steps = row + ks - 1
        rows += [steps, steps, steps]
        cols += [h(i, ks), h(i, ks - 1), f(i, ks - 1)]
        data += [np.ones(ks.size), -np.ones(ks.size), -level_probs[:-1]]
        rhs.append(np.zeros(ks.size))
        row += ks.size
        # the mean is kept
        rows.append(np.array([row, row]))
        cols.append(np.array([h(i, n_levels - 1), f(i, n_levels - 1)]))
        data.append(np.array([1.0, level_probs[-1]]))
        rhs.append(np.array([levels[i] @ level_probs]))
        row += 1
    steps = row + ks - 1
    for i in range(n):
        rows.append(steps)
        cols.append(w(i, ks))
        data.append(np.ones(ks.size))
    rhs.append(np.ones(ks.size))
    row += ks.size

    a_eq = sparse.csr_matrix((np.concatenate(data),
                              (np.concatenate(rows), np.concatenate(cols))),
                             shape=(row, n_vars))
    bounds = [(None, None)] * block
    for i in range(n):
        bounds += [(0.0, 0.0)] + [(float(b), None) for b in floors[i]]
    bounds += [(0.0, 1.0)] * (n * (n_levels - 1))

    result = linprog(np.zeros(n_vars), A_eq=a_eq, b_eq=np.concatenate(rhs),
                     bounds=bounds, method='highs',
                     options={'primal_feasibility_tolerance': LP_TOL,
                              'dual_feasibility_tolerance': LP_TOL})
    if result.status != 0:
        raise AllocationError(f'comonotonic improvement: {result.message}')
    return result.x[2 * block:].reshape(n, n_levels - 1)


def comonotonic_improvement(x):
    """Comonotonic allocation of S^X improving every component in convex
    order.

    Parameters
    ----------
    x : RiskVector

    Returns
    -------
    allocation : Allocation
        Comonotonic, sums to S^X, and A_i <=cx X_i for every agent.

    Notes
    -----
    Starts from the CMRS allocation, which is already <=cx X and constant on
    the levels of S. Each agent then receives a share of every increment of
    S, chosen by a linear program so that its lower tail integrals dominate
    those of its cmrs share. Agents with a constant cmrs share keep it.
    Only the three properties above are guaranteed, not a canonical
    representative.

    Raises
    ------
    AllocationError
        If the solver fails, or if some A_i exceeds X_i in convex order by
        more than IMPROVEMENT_TOL * max(1, max |X|).
    """
    levels = partition_of(x.total)
    base = cmrs(x).matrix
    if levels.n_blocks < 2:
        return _as_allocation(x, base, 'comono-improve')
    first = np.array([block[0] for block in levels.blocks])
    order = np.argsort(x.total.values[first], kind='stable')
    level_probs = np.bincount(levels.labels, weights=x.space.probs)[order]
    values = base[:, first[order]]
    totals = x.total.values[first[order]]
    means = values @ level_probs

    # constant rows are kept as they are
    improved = values.copy()
    free = np.flatnonzero(np.ptp(values, axis=1) > 0)
    if free.size == 1:
        improved[free[0]] = totals - np.delete(values[:, 0], free).sum()
    elif free.size > 1:
        scale = max(1.0, float(np.max(np.abs(values[free]))))
        gaps = np.diff(totals)
        breakpoints = np.cumsum(level_probs)[:-1]
        floors = np.array([_lower_tail_integrals(row / scale, level_probs,
                                                 breakpoints)
                           for row in values[free]])
        shares = _improvement_shares(values[free] / scale, level_probs,
                                     gaps / scale, floors)
        shares = np.clip(shares, 0.0, None)
        shares /= shares.sum(axis=0)
        cum = np.concatenate((np.zeros((free.size, 1)),
                              np.cumsum(shares * gaps, axis=1)), axis=1)
        improved[free] = (means[free] - cum @ level_probs)[:, None] + cum

    rank = np.argsort(order)
    allocation = _as_allocation(x, improved[:, rank[levels.labels]],
                                'comono-improve')
    tol = IMPROVEMENT_TOL * max(1.0, float(np.max(np.abs(x.matrix))))
    for agent, (share, risk) in enumerate(zip(allocation, x)):
        gap = convex_order_gap(share, risk)
        if gap > tol:
            raise AllocationError(
                f'comonotonic improvement of agent {agent} exceeds its risk '
                f'in convex order by {gap:.3e}')
    logger.debug(f'comonotonic improvement on {levels.n_blocks} levels, '
                 f'{free.size} agent(s) rearranged')
    return allocation


_DISPATCH = {
    'identity': lambda rule, x: identity(x),
    'all-in-one': lambda rule, x: all_in_one(x),
    'mean-adjusted': lambda rule, x: mean_adjusted(x),
    'uniform': lambda rule, x: uniform(x),
    'cmrs': lambda rule, x: cmrs(x),
    'mean-proportional': lambda rule, x: mean_proportional(x),
    'covariance': lambda rule, x: covariance_rule(x),
    'q-cmrs': lambda rule, x: q_cmrs(x, rule.weights),
    'generalized-cmrs': lambda rule, x: generalized_cmrs(
        x, rule.partition if rule.partition is not None
        else Partition.trivial(x.space)),
    'mixture': lambda rule, x: mixture(x, rule.weight, rule.first,
                                       rule.second),
    'gated': lambda rule, x: gated(x, rule.trigger, rule.first, rule.second),
    'comono-improve': lambda rule, x: comonotonic_improvement(x),
    'shifted-cmrs': lambda rule, x: shifted_cmrs(x, rule.shift),
}


def apply(rule, x):
    """Applies a risk sharing rule to a risk vector.

    Parameters
    ----------
    rule : RuleSpec
    x : RiskVector

    Returns
    -------
    allocation : Allocation
        Sums to S^X at every outcome.
    """
    return _DISPATCH[rule.kind](rule, x)


def apply_generalized(rule, x, g):
    """Generalized rule (X, G) -> A^{X|G}. A 'generalized-cmrs' rule without
    its own partition uses g; every other rule ignores g."""
    if rule.kind == 'generalized-cmrs' and rule.partition is None:
        return generalized_cmrs(x, g)
    return apply(rule, x)


IDENTITY = RuleSpec('identity')
ALL_IN_ONE = RuleSpec('all-in-one')
MEAN_ADJUSTED = RuleSpec('mean-adjusted')
UNIFORM = RuleSpec('uniform')
CMRS = RuleSpec('cmrs')
MEAN_PROPORTIONAL = RuleSpec('mean-proportional')
COVARIANCE = RuleSpec('covariance')
GENERALIZED_CMRS = RuleSpec('generalized-cmrs')
COMONO_IMPROVE = RuleSpec('comono-improve')


def catalog(nonnegative=False):
    """Rules that need no space-specific parameter, keyed by name.
    Mean-proportional joins only for batteries of non-negative risks."""
    rules = [IDENTITY, ALL_IN_ONE, MEAN_ADJUSTED, UNIFORM, CMRS, COVARIANCE,
             RuleSpec('mixture', weight=0.5, first=IDENTITY, second=CMRS),
             COMONO_IMPROVE, RuleSpec('shifted-cmrs', shift=1 / 6)]
    if nonnegative:
        rules.append(MEAN_PROPORTIONAL)
    return {rule.name: rule for rule in rules}
