import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

# Probability weights must sum to one within this absolute tolerance.
PROB_TOL = 1e-12

# Absolute tolerance used when comparing computed quantities.
ABS_TOL = 1e-9

# Relative tolerance for grouping values into one level: v joins the level
# anchored at its smallest value a iff v - a <= GROUPING_TOL * max(1, |v|, |a|).
GROUPING_TOL = 1e-9

# Upper bound on the number of outcome-pair products held in memory at once.
WITNESS_CHUNK = 1 << 20


class RiskPoolError(ValueError):
    """Base class of every error raised by riskpool."""


class SpaceMismatch(RiskPoolError):
    pass


class NonPositiveWeight(RiskPoolError):
    pass


class WeightsDoNotSumToOne(RiskPoolError):
    pass


class EmptySpace(RiskPoolError):
    pass


class LengthMismatch(RiskPoolError):
    pass


class InvalidPartition(RiskPoolError):
    pass


class TooFewAgents(RiskPoolError):
    pass


class BadVariance(RiskPoolError):
    pass


class NonFiniteValue(RiskPoolError):
    pass


def _validate_weights(weights, error=None):
    """Helper function. Returns weights as a read-only float array, raising
    `error` (or the specific weight errors) if they are not a probability
    vector with strictly positive entries."""
    try:
        weights = np.array(weights, dtype=float)
    except (TypeError, ValueError) as err:
        raise (error or EmptySpace)(f'weights are not numbers: {err}') from err
    if weights.ndim != 1 or weights.size == 0:
        raise (error or EmptySpace)(
            f'expected a non-empty sequence of weights, got shape {weights.shape}')
    if not np.all(weights > 0):
        bad = int(np.flatnonzero(~(weights > 0))[0])
        raise (error or NonPositiveWeight)(
            f'weight {weights[bad]!r} at outcome {bad} is not strictly positive')
    total = math.fsum(weights)
    if abs(total - 1) > PROB_TOL:
        raise (error or WeightsDoNotSumToOne)(
            f'weights sum to {total!r}, not 1')
    weights.setflags(write=False)
    return weights


@dataclass(frozen=True, eq=False)
class FiniteSpace:
    """Finite probability space: outcomes 0..m-1 with positive weights."""
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'probs', _validate_weights(self.probs))

    @property
    def size(self):
        return self.probs.size

    def __len__(self):
        return self.probs.size

    def __eq__(self, other):
        if not isinstance(other, FiniteSpace):
            return NotImplemented
        return self is other or np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())


def _check_space(first, second):
    if first != second:
        raise SpaceMismatch(
            f'objects live on different spaces ({first.size} and '
            f'{second.size} outcomes)')


@dataclass(frozen=True, eq=False)
class RandVar:
    """A real value per outcome of a FiniteSpace. Positive values are losses."""
    space: FiniteSpace
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size != self.space.size:
            raise LengthMismatch(
                f'expected {self.space.size} values, got shape {values.shape}')
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise NonFiniteValue(f'value {values[bad]!r} at outcome {bad}')
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def constant(cls, space, c):
        return cls(space, np.full(space.size, float(c)))

    @classmethod
    def indicator(cls, space, outcomes):
        values = np.zeros(space.size)
        values[list(outcomes)] = 1.0
        return cls(space, values)

    def _operand(self, other):
        if isinstance(other, RandVar):
            _check_space(self.space, other.space)
            return other.values
        return float(other)

    def __add__(self, other):
        return RandVar(self.space, self.values + self._operand(other))

    __radd__ = __add__

    def __sub__(self, other):
        return RandVar(self.space, self.values - self._operand(other))

    def __rsub__(self, other):
        return RandVar(self.space, self._operand(other) - self.values)

    def __neg__(self):
        return RandVar(self.space, -self.values)

    def __mul__(self, other):
        return RandVar(self.space, self.values * self._operand(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return RandVar(self.space, self.values / self._operand(other))

    def __len__(self):
        return self.values.size

    def max_deviation(self, other):
        return float(np.max(np.abs(self.values - self._operand(other))))

    def allclose(self, other, tol=ABS_TOL):
        return self.max_deviation(other) <= tol


def _canonical_labels(labels):
    """Helper function. Renumbers block labels by order of first appearance."""
    _, first_idx, inverse = np.unique(labels, return_index=True,
                                      return_inverse=True)
    rank = np.argsort(np.argsort(first_idx))
    return rank[inverse.reshape(-1)]


@dataclass(frozen=True, eq=False)
class Partition:
    """Partition of the outcomes of a space, stored as one block label per
    outcome. Blocks are numbered by their smallest outcome index."""
    space: FiniteSpace
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.size != self.space.size:
            raise InvalidPartition(
                f'expected one block label per outcome ({self.space.size}), '
                f'got shape {labels.shape}')
        labels = _canonical_labels(labels)
        labels.setflags(write=False)
        object.__setattr__(self, 'labels', labels)

    @classmethod
    def from_blocks(cls, space, blocks):
        """Builds a Partition from disjoint blocks of outcome indices that
        cover the space."""
        labels = np.full(space.size, -1)
        for idx, block in enumerate(blocks):
            block = list(block)
            if not block:
                raise InvalidPartition(f'block {idx} is empty')
            for outcome in block:
                if isinstance(outcome, bool) or not isinstance(
                        outcome, (int, np.integer)):
                    raise InvalidPartition(
                        f'outcome {outcome!r} in block {idx} is not an index')
                if not 0 <= outcome < space.size:
                    raise InvalidPartition(
                        f'outcome {outcome} in block {idx} is out of range')
                if labels[outcome] != -1:
                    raise InvalidPartition(
                        f'outcome {outcome} appears in more than one block')
                labels[outcome] = idx
        missing = np.flatnonzero(labels == -1)
        if missing.size:
            raise InvalidPartition(
                f'outcomes {missing.tolist()} are not covered by any block')
        return cls(space, labels)

    @classmethod
    def trivial(cls, space):
        return cls(space, np.zeros(space.size, dtype=int))

    @classmethod
    def singletons(cls, space):
        return cls(space, np.arange(space.size))

    @property
    def n_blocks(self):
        return int(self.labels.max()) + 1

    @property
    def blocks(self):
        return tuple(tuple(np.flatnonzero(self.labels == b).tolist())
                     for b in range(self.n_blocks))

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return (self.space == other.space
                and np.array_equal(self.labels, other.labels))

    def __hash__(self):
        return hash((self.space, self.labels.tobytes()))

    def is_finer_than(self, other):
        """True if every block of self lies inside a block of other."""
        return refine(self, other) == self


@dataclass(frozen=True, eq=False)
class RiskVector:
    """Ordered risks X_1..X_n (n >= 2) on one FiniteSpace. The total S is
    derived, not stored."""
    agents: tuple

    def __post_init__(self):
        agents = tuple(self.agents)
        if len(agents) < 2:
            raise TooFewAgents(f'a risk vector needs at least 2 agents, '
                               f'got {len(agents)}')
        space = agents[0].space
        for agent in agents[1:]:
            _check_space(space, agent.space)
        object.__setattr__(self, 'agents', agents)

    @classmethod
    def from_matrix(cls, space, matrix):
        return cls(tuple(RandVar(space, row) for row in np.asarray(matrix)))

    @property
    def space(self):
        return self.agents[0].space

    @property
    def n(self):
        return len(self.agents)

    @property
    def matrix(self):
        return np.vstack([agent.values for agent in self.agents])

    @property
    def total(self):
        return RandVar(self.space, self.matrix.sum(axis=0))

    def __len__(self):
        return len(self.agents)

    def __iter__(self):
        return iter(self.agents)

    def __getitem__(self, idx):
        return self.agents[idx]

    def permuted(self, perm):
        """Returns X_pi = (X_pi(0), ..., X_pi(n-1))."""
        return type(self)(tuple(self.agents[p] for p in perm))

    def merged(self, i, j):
        """Merges agent j into agent i: Y_i = X_i + X_j, Y_j = 0."""
        agents = list(self.agents)
        agents[i] = agents[i] + agents[j]
        agents[j] = RandVar.constant(self.space, 0.0)
        return RiskVector(tuple(agents))

    def max_deviation(self, other):
        _check_space(self.space, other.space)
        return float(np.max(np.abs(self.matrix - other.matrix)))

    def allclose(self, other, tol=ABS_TOL):
        return self.n == other.n and self.max_deviation(other) <= tol


def make_space(probs):
    """Builds a validated FiniteSpace.

    Parameters
    ----------
    probs : sequence of float
        One strictly positive weight per outcome, summing to 1 within
        PROB_TOL.

    Returns
    -------
    space : FiniteSpace
    """
    return FiniteSpace(probs)


def expectation(X):
    return float(np.dot(X.space.probs, X.values))


def essential_sup(X):
    # every outcome has positive mass, so the essential sup is the max
    return float(np.max(X.values))


def essential_inf(X):
    return float(np.min(X.values))


def variance(X):
    centred = X.values - expectation(X)
    return float(np.dot(X.space.probs, centred * centred))


def covariance(X, Y):
    _check_space(X.space, Y.space)
    return float(np.dot(X.space.probs, (X.values - expectation(X))
                        * (Y.values - expectation(Y))))


def _level_labels(values, tol=GROUPING_TOL):
    """Helper function. Labels values by level. Each level is anchored at
    its smallest value and takes every following value within the relative
    grouping tolerance of that anchor, so a run of close neighbours never
    chains into one level wider than the tolerance."""
    order = np.argsort(values, kind='stable')
    ordered = values[order]
    sorted_labels = np.empty(values.size, dtype=int)
    label, anchor = 0, ordered[0]
    for k, value in enumerate(ordered):
        if value - anchor > tol * max(1.0, abs(value), abs(anchor)):
            label, anchor = label + 1, value
        sorted_labels[k] = label
    labels = np.empty(values.size, dtype=int)
    labels[order] = sorted_labels
    return labels


def _join_labels(first, second):
    """Helper function. Labels of the blockwise intersections of two
    labelings."""
    codes = first.astype(np.int64) * (int(second.max()) + 1) + second
    return _canonical_labels(codes)


def partition_of(variables, tol=GROUPING_TOL):
    """Partition generated by the joint level sets of the given variables.

    Parameters
    ----------
    variables : RandVar or sequence of RandVar
        Variables sharing one space.
    tol : float
        Relative grouping tolerance.

    Returns
    -------
    partition : Partition
        Two outcomes share a block iff every variable takes the same value
        (within tolerance) on both.
    """
    if isinstance(variables, RandVar):
        variables = [variables]
    variables = list(variables)
    if not variables:
        raise RiskPoolError('partition_of needs at least one variable')
    space = variables[0].space
    labels = _level_labels(variables[0].values, tol)
    for var in variables[1:]:
        _check_space(space, var.space)
        labels = _join_labels(labels, _level_labels(var.values, tol))
    return Partition(space, labels)


def refine(p, q):
    """Coarsest partition finer than both p and q (the join of the
    generated sigma-fields)."""
    _check_space(p.space, q.space)
    return Partition(p.space, _join_labels(p.labels, q.labels))


def _block_range(values, g):
    """Helper function. Blockwise minimum and maximum of values."""
    lo = np.full(g.n_blocks, np.inf)
    hi = np.full(g.n_blocks, -np.inf)
    np.minimum.at(lo, g.labels, values)
    np.maximum.at(hi, g.labels, values)
    return lo, hi


def cond_expectation(X, g, weights=None):
    """Conditional expectation of X given the sigma-field generated by g.

    Parameters
    ----------
    X : RandVar
        The variable to project.
    g : Partition
        Conditioning partition, on the space of X.
    weights : array, optional
        Alternative measure over the same outcomes (strictly positive);
        defaults to the space's probabilities.

    Returns
    -------
    projected : RandVar
        Constant on every block of g, equal there to the weighted block
        average of X.

    Notes
    -----
    Blocks on which X is already constant keep X's exact value, so
    g-measurable inputs are fixed points without rounding drift. Block
    averages are clipped to the block range of X.
    """
    _check_space(X.space, g.space)
    if weights is None:
        weights = X.space.probs
    mass = np.bincount(g.labels, weights=weights, minlength=g.n_blocks)
    total = np.bincount(g.labels, weights=weights * X.values,
                        minlength=g.n_blocks)
    lo, hi = _block_range(X.values, g)
    means = np.clip(total / mass, lo, hi)
    means = np.where(lo == hi, lo, means)
    return RandVar(X.space, means[g.labels])


def measurability_gap(X, g):
    """Largest spread max - min of X inside one block of g."""
    _check_space(X.space, g.space)
    lo, hi = _block_range(X.values, g)
    return float(np.max(hi - lo))


def is_measurable(X, g, tol=GROUPING_TOL):
    """True iff X is constant, within the grouping tolerance, on every
    block of g."""
    _check_space(X.space, g.space)
    lo, hi = _block_range(X.values, g)
    scale = np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
    return bool(np.all(hi - lo <= tol * scale))


def stop_loss(X, d):
    """Stop-loss transform E[(X - d)+]. `d` may be a scalar or an array of
    retentions, in which case an array is returned."""
    retentions = np.asarray(d, dtype=float)
    order = np.argsort(X.values, kind='stable')
    values, probs = X.values[order], X.space.probs[order]
    # tail sums over the outcomes strictly above each retention
    tail_mass = np.concatenate((np.cumsum(probs[::-1])[::-1], [0.0]))
    tail_value = np.concatenate((np.cumsum((probs * values)[::-1])[::-1],
                                 [0.0]))
    idx = np.searchsorted(values, retentions.reshape(-1), side='right')
    result = np.maximum(tail_value[idx] - retentions.reshape(-1)
                        * tail_mass[idx], 0.0)
    if retentions.ndim == 0:
        return float(result[0])
    return result


def convex_order_gap(X, Y):
    """Largest violation of X <=cx Y: the larger of |E[X] - E[Y]| and the
    largest stop-loss excess of X over Y on the union of both supports.
    Zero when X <=cx Y holds exactly."""
    _check_space(X.space, Y.space)
    mean_gap = abs(expectation(X) - expectation(Y))
    retentions = np.union1d(X.values, Y.values)
    excess = stop_loss(X, retentions) - stop_loss(Y, retentions)
    return float(max(mean_gap, np.max(excess), 0.0))


def convex_order_leq(X, Y, tol=ABS_TOL):
    """X <=cx Y on finite supports: equal means and dominated stop-loss
    transforms at every support point of either variable."""
    return convex_order_gap(X, Y) <= tol


@dataclass(frozen=True)
class ComonotonicityWitness:
    """Two components moving in opposite directions across two outcomes."""
    agents: tuple
    outcomes: tuple
    magnitude: float


def _exactly_comonotone(first, second):
    """Helper function. True iff ordering the outcomes by (first, second)
    leaves second nondecreasing, i.e. the pair is exactly comonotonic."""
    order = np.lexsort((second, first))
    return bool(np.all(np.diff(second[order]) >= 0))


def _worst_product(first, second):
    """Helper function. Most negative (first(w) - first(w')) *
    (second(w) - second(w')) and its outcome pair, row by row in chunks."""
    size = first.size
    rows = max(1, WITNESS_CHUNK // size)
    lowest, pair = 0.0, None
    for start in range(0, size, rows):
        stop = min(start + rows, size)
        product = ((first[start:stop, None] - first[None, :])
                   * (second[start:stop, None] - second[None, :]))
        flat = int(np.argmin(product))
        if product.flat[flat] < lowest:
            lowest = float(product.flat[flat])
            omega, omega_prime = np.unravel_index(flat, product.shape)
            pair = (start + int(omega), int(omega_prime))
    return lowest, pair


def comonotonic_witness(variables, tol=ABS_TOL):
    """Returns the worst anti-monotone (component pair, outcome pair), or
    None if the variables are comonotonic within tol.

    Pairs of components that are exactly comonotonic are settled by one
    sort; the pairwise products are only formed for the others, in chunks
    of at most WITNESS_CHUNK entries.
    """
    variables = list(variables)
    space = variables[0].space
    for var in variables[1:]:
        _check_space(space, var.space)
    worst = None
    for i in range(len(variables)):
        for j in range(i + 1, len(variables)):
            first, second = variables[i].values, variables[j].values
            if _exactly_comonotone(first, second):
                continue
            lowest, pair = _worst_product(first, second)
            if lowest < -tol and (worst is None or -lowest > worst.magnitude):
                worst = ComonotonicityWitness(agents=(i, j), outcomes=pair,
                                              magnitude=-lowest)
    return worst


def is_comonotonic(variables, tol=ABS_TOL):
    return comonotonic_witness(variables, tol) is None


def discretize_gaussian(mean, variance, points):
    """Quantile-midpoint discretization of N(mean, variance).

    Parameters
    ----------
    mean : float
    variance : float
        Must be strictly positive.
    points : int
        Number of support points, at least 2.

    Returns
    -------
    support : list of (float, float)
        Pairs (value, probability) with value_k = quantile((k + 0.5) / points)
        and probability 1 / points each.
    """
    if not variance > 0:
        raise BadVariance(f'variance must be positive, got {variance!r}')
    if points < 2:
        raise RiskPoolError(f'need at least 2 points, got {points}')
    quantiles = norm.ppf((np.arange(points) + 0.5) / points)
    # exact antisymmetry, so the discretized mean is the requested mean
    quantiles = (quantiles - quantiles[::-1]) / 2
    values = mean + math.sqrt(variance) * quantiles
    return [(float(v), 1.0 / points) for v in values]
