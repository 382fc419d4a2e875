import itertools
import logging
import zlib
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from . import rules
from . import scenarios as scen
from .cache import memory
from .prob_core import (ABS_TOL, RandVar, RiskPoolError, RiskVector,
                        comonotonic_witness, convex_order_gap, essential_sup,
                        expectation, is_measurable, partition_of, refine,
                        variance)

logger = logging.getLogger(__name__)

AXIOMS = ('AF', 'RF', 'RA', 'OA', 'CP', 'ZP', 'UI', 'CM', 'SM', 'BT', 'IA',
          'IB')

# Axioms that single out cmrs, and generalized cmrs given target information.
CHARACTERIZING_AXIOMS = ('AF', 'RF', 'RA', 'OA')
TARGET_CHARACTERIZING_AXIOMS = ('AF', 'RF', 'OA', 'IA', 'IB')

# SM enumerates every permutation up to this many agents, and samples
# SM_SAMPLES random ones above it.
SM_EXHAUSTIVE_MAX_N = 4
SM_SAMPLES = 20

PASS = 'pass'
FAIL = 'fail'

# Tolerances of the two-agent Gaussian regression (discretization slack).
GAUSSIAN_MEAN_TOL = 2e-2
GAUSSIAN_STOP_LOSS_TOL = 2e-2
GAUSSIAN_VARIANCE_RTOL = 0.05

# Below this many grid points per factor the discretized variance falls
# outside GAUSSIAN_VARIANCE_RTOL.
GAUSSIAN_MIN_POINTS = 50


class RuleApplicationError(RiskPoolError):
    """A rule raised while being applied to a scenario; carries the scenario
    identifier and the original error."""

    def __init__(self, scenario, error):
        self.scenario = scenario
        self.error = error
        super().__init__(f'{scenario}: {type(error).__name__}: {error}')


class UnknownAxiom(RiskPoolError):
    pass


@dataclass(frozen=True)
class Witness:
    """Concrete violation: scenario, agent and magnitude, plus the outcome(s)
    and second agent where the axiom needs them."""
    scenario: str
    agent: int
    magnitude: float
    outcome: int = None
    other_agent: int = None
    other_outcome: int = None
    note: str = ''


@dataclass(frozen=True)
class AxiomReport:
    """Verdict of one axiom for one rule over a finite battery.

    A pass means no violation was found on the scenarios checked, not a
    proof. `skipped` counts scenarios the axiom does not apply to.
    """
    axiom: str
    rule: str
    verdict: str
    witnesses: tuple = ()
    scenarios_checked: int = 0
    skipped: int = 0
    notes: tuple = ()
    metrics: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.verdict == PASS


def _allocate(rule, scenario, vector=None):
    """Helper function. Applies the rule, handing over the scenario's target
    information to rules that use it."""
    vector = scenario.vector if vector is None else vector
    if scenario.partition is not None:
        return rules.apply_generalized(rule, vector, scenario.partition)
    return rules.apply(rule, vector)


def _worst_outcome(difference):
    outcome = int(np.argmax(np.abs(difference)))
    return outcome, float(abs(difference[outcome]))


def _worst_block(values, g):
    """Helper function. Largest spread of values inside a block of g, with
    the outcomes holding the block minimum and maximum."""
    worst = (0.0, None, None)
    for block in g.blocks:
        block = np.asarray(block)
        low, high = block[np.argmin(values[block])], block[np.argmax(values[block])]
        spread = float(values[high] - values[low])
        if spread > worst[0]:
            worst = (spread, int(low), int(high))
    return worst


def _witness(scenario, agent, magnitude, **kwargs):
    return Witness(scenario.name, agent, magnitude, **kwargs)


def _af(rule, scenario, tol):
    x, allocation = scenario.vector, _allocate(rule, scenario)
    found = []
    for i, (agent, share) in enumerate(zip(x, allocation)):
        gap = abs(expectation(share) - expectation(agent))
        if gap > tol:
            found.append(_witness(scenario, i, gap))
    return True, found, None


def _rf(rule, scenario, tol):
    x, allocation = scenario.vector, _allocate(rule, scenario)
    found = []
    for i, (agent, share) in enumerate(zip(x, allocation)):
        excess = share.values - essential_sup(agent)
        outcome = int(np.argmax(excess))
        if excess[outcome] > tol:
            found.append(_witness(scenario, i, float(excess[outcome]),
                                  outcome=outcome))
    return True, found, None


def _measurability_witnesses(scenario, allocation, g, tol):
    found = []
    for i, share in enumerate(allocation):
        spread, low, high = _worst_block(share.values, g)
        if spread > tol:
            found.append(_witness(scenario, i, spread, outcome=low,
                                  other_outcome=high))
    return found


def _ra(rule, scenario, tol):
    allocation = _allocate(rule, scenario)
    levels = partition_of(scenario.vector.total)
    return True, _measurability_witnesses(scenario, allocation, levels, tol), None


def _oa(rule, scenario, tol):
    x = scenario.vector
    if x.n < 3:
        logger.warning(f'{scenario.name}: OA is empty for two agents, skipped')
        return False, [], f'{scenario.name}: OA skipped, no merge possible with 2 agents'
    base = _allocate(rule, scenario).matrix
    found = []
    for i, j in itertools.permutations(range(x.n), 2):
        merged = _allocate(rule, scenario, x.merged(i, j)).matrix
        for k in range(x.n):
            if k in (i, j):
                continue
            outcome, gap = _worst_outcome(merged[k] - base[k])
            if gap > tol:
                found.append(_witness(scenario, k, gap, outcome=outcome,
                                      note=f'merge {j} into {i}'))
    # consequence of OA: A_i depends on X only through (X_i, S)
    total = x.total
    for i in range(x.n):
        j = (i + 1) % x.n
        agents = [RandVar.constant(x.space, 0.0)] * x.n
        agents[i], agents[j] = x[i], total - x[i]
        reduced = _allocate(rule, scenario, RiskVector(tuple(agents))).matrix
        outcome, gap = _worst_outcome(reduced[i] - base[i])
        if gap > tol:
            found.append(_witness(scenario, i, gap, outcome=outcome,
                                  note='not determined by (X_i, S)'))
    return True, found, None


def _constant_agents(x, tol, zero):
    if zero:
        return [i for i, agent in enumerate(x)
                if np.max(np.abs(agent.values)) <= tol]
    return [i for i, agent in enumerate(x) if np.ptp(agent.values) <= tol]


def _constant_check(rule, scenario, tol, zero):
    x = scenario.vector
    agents = _constant_agents(x, tol, zero)
    if not agents:
        return False, [], None
    allocation = _allocate(rule, scenario).matrix
    found = []
    for i in agents:
        target = 0.0 if zero else x[i].values[0]
        outcome, gap = _worst_outcome(allocation[i] - target)
        if gap > tol:
            found.append(_witness(scenario, i, gap, outcome=outcome))
    return True, found, None


def _cp(rule, scenario, tol):
    return _constant_check(rule, scenario, tol, zero=False)


def _zp(rule, scenario, tol):
    return _constant_check(rule, scenario, tol, zero=True)


def _ui(rule, scenario, tol):
    x, allocation = scenario.vector, _allocate(rule, scenario)
    found = []
    for i, (agent, share) in enumerate(zip(x, allocation)):
        gap = convex_order_gap(share, agent)
        if gap > tol:
            found.append(_witness(scenario, i, gap))
    return True, found, None


def _cm(rule, scenario, tol):
    allocation = _allocate(rule, scenario)
    witness = comonotonic_witness(allocation, tol)
    if witness is None:
        return True, [], None
    (i, j), (omega, omega_prime) = witness.agents, witness.outcomes
    return True, [_witness(scenario, i, witness.magnitude, outcome=omega,
                           other_agent=j, other_outcome=omega_prime)], None


def _permutations(n, name):
    """Helper function. Every non-trivial permutation for small n, else
    SM_SAMPLES random ones seeded by the scenario name."""
    if n <= SM_EXHAUSTIVE_MAX_N:
        return list(itertools.permutations(range(n)))[1:]
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    return [tuple(rng.permutation(n)) for _ in range(SM_SAMPLES)]


def _sm(rule, scenario, tol):
    x = scenario.vector
    base = _allocate(rule, scenario).matrix
    found = []
    for perm in _permutations(x.n, scenario.name):
        permuted = _allocate(rule, scenario, x.permuted(perm)).matrix
        difference = permuted - base[list(perm)]
        agent, outcome = np.unravel_index(np.argmax(np.abs(difference)),
                                          difference.shape)
        gap = float(abs(difference[agent, outcome]))
        if gap > tol:
            found.append(_witness(scenario, int(perm[agent]), gap,
                                  outcome=int(outcome),
                                  note=f'permutation {list(perm)}'))
    return True, found, None


def _identity_check(rule, scenario, tol, g):
    x = scenario.vector
    if not all(is_measurable(agent, g) for agent in x):
        return False, [], None
    difference = _allocate(rule, scenario).matrix - x.matrix
    found = []
    for i, row in enumerate(difference):
        outcome, gap = _worst_outcome(row)
        if gap > tol:
            found.append(_witness(scenario, i, gap, outcome=outcome))
    return True, found, None


def _bt(rule, scenario, tol):
    return _identity_check(rule, scenario, tol,
                           partition_of(scenario.vector.total))


def _target_information(scenario):
    return refine(scenario.partition, partition_of(scenario.vector.total))


def _ia(rule, scenario, tol):
    if scenario.partition is None:
        return False, [], None
    allocation = _allocate(rule, scenario)
    return True, _measurability_witnesses(
        scenario, allocation, _target_information(scenario), tol), None


def _ib(rule, scenario, tol):
    if scenario.partition is None:
        return False, [], None
    return _identity_check(rule, scenario, tol, _target_information(scenario))


_CHECKS = {'AF': _af, 'RF': _rf, 'RA': _ra, 'OA': _oa, 'CP': _cp, 'ZP': _zp,
           'UI': _ui, 'CM': _cm, 'SM': _sm, 'BT': _bt, 'IA': _ia, 'IB': _ib}


def _guarded(check, rule, scenario, tol):
    """Helper function. Runs one scenario check, attaching the scenario id
    to rule errors."""
    try:
        return check(rule, scenario, tol)
    except RuleApplicationError:
        raise
    except RiskPoolError as err:
        raise RuleApplicationError(scenario.name, err) from err


def check_axiom(axiom, rule, scenarios, tol=ABS_TOL, n_jobs=1):
    """Checks one axiom or property of a rule over a scenario battery.

    Parameters
    ----------
    axiom : str
        One of AXIOMS.
    rule : rules.RuleSpec
    scenarios : ScenarioSet, Scenario, RiskVector or sequence of those
    tol : float
        Absolute tolerance of every comparison.
    n_jobs : int
        joblib workers; results are merged in scenario order.

    Returns
    -------
    report : AxiomReport
    """
    if axiom not in _CHECKS:
        raise UnknownAxiom(f"unknown axiom '{axiom}'; expected one of "
                           f"{', '.join(AXIOMS)}")
    battery = scen.as_scenario_set(scenarios)
    results = Parallel(n_jobs=n_jobs)(
        delayed(_guarded)(_CHECKS[axiom], rule, scenario, tol)
        for scenario in battery)

    witnesses, notes = [], []
    checked = skipped = 0
    for applicable, found, note in results:
        checked += applicable
        skipped += not applicable
        witnesses.extend(found)
        if note:
            notes.append(note)
    verdict = FAIL if witnesses else PASS
    logger.info(f'{axiom} for {rule.name}: {verdict} on {checked} scenario(s), '
                f'{skipped} skipped')
    return AxiomReport(axiom, rule.name, verdict, tuple(witnesses), checked,
                       skipped, tuple(notes))


def check_AF(rule, scenarios, tol=ABS_TOL, n_jobs=1):
    """Actuarial fairness: E[A_i] = E[X_i] for every agent."""
    return check_axiom('AF', rule, scenarios, tol, n_jobs)


def check_RF(rule, scenarios, tol=ABS_TOL, n_jobs=1):
    """Risk fairness: A_i <= sup X_i at every outcome."""
    return check_axiom('RF', rule, scenarios, tol, n_jobs)


def check_RA(rule, scenarios, tol=ABS_TOL, n_jobs=1):
    """Risk anonymity: A is constant on every level set of S."""
    return check_axiom('RA', rule, scenarios, tol, n_jobs)


def check_OA(rule, scenarios, tol=ABS_TOL, n_jobs=1):
    """Operational anonymity, over every ordered merge of two agents, plus
    the consequence that A_i is determined by (X_i, S). Two-agent
    scenarios are skipped."""
    return check_axiom('OA', rule, scenarios, tol, n_jobs)


def check_CP(rule, scenarios, tol=ABS_TOL, n_jobs=1):
    return check_axiom('CP', rule, scenarios, tol, n_jobs)


def check_ZP(rule, scenarios, tol=ABS_TOL, n_jobs=1):
    return check_axiom('ZP', rule, scenarios, tol, n_jobs)


def check_UI(rule, scenarios, tol=ABS_TOL, n_jobs=1):
    return check_axiom('UI', rule, scenarios, tol, n_jobs)


def check_CM(rule, scenarios, tol=ABS_TOL, n_jobs=1):
    return check_axiom('CM', rule, scenarios, tol, n_jobs)


def check_SM(rule, scenarios, tol=ABS_TOL, n_jobs=1):
    return check_axiom('SM', rule, scenarios, tol, n_jobs)


def check_BT(rule, scenarios, tol=ABS_TOL, n_jobs=1):
    return check_axiom('BT', rule, scenarios, tol, n_jobs)


def check_IA(rule, scenarios, tol=ABS_TOL, n_jobs=1):
    return check_axiom('IA', rule, scenarios, tol, n_jobs)


def check_IB(rule, scenarios, tol=ABS_TOL, n_jobs=1):
    return check_axiom('IB', rule, scenarios, tol, n_jobs)


def characterizing_axioms(rule):
    """Axioms singling out the family of `rule`: target information enters
    only for generalized cmrs."""
    if rule.kind == 'generalized-cmrs':
        return TARGET_CHARACTERIZING_AXIOMS
    return CHARACTERIZING_AXIOMS


def property_matrix(rule_set, scenarios, axioms=AXIOMS, tol=ABS_TOL,
                    n_jobs=1):
    """Verdicts of every rule on every requested axiom.

    Parameters
    ----------
    rule_set : dict
        Rule name to RuleSpec, e.g. `rules.catalog()`.
    scenarios : ScenarioSet or sequence
    axioms : sequence of str

    Returns
    -------
    matrix : dict
        matrix[rule name][axiom] is an AxiomReport.
    """
    battery = scen.as_scenario_set(scenarios)
    return {name: {axiom: check_axiom(axiom, rule, battery, tol, n_jobs)
                   for axiom in axioms}
            for name, rule in rule_set.items()}


# premise -> conclusions that must hold on the same battery
IMPLICATIONS = (('UI', 'AF'), ('UI', 'RF'), ('UI', 'CP'), ('CP', 'ZP'),
                ('CM', 'RA'))


def implication_audit(rule, scenarios, tol=ABS_TOL, n_jobs=1):
    """Returns the implications among verdicts broken on this battery, as
    (premise, conclusion) pairs. Always empty for sound checkers."""
    battery = scen.as_scenario_set(scenarios)
    needed = sorted({a for pair in IMPLICATIONS for a in pair})
    verdicts = {axiom: check_axiom(axiom, rule, battery, tol, n_jobs).passed
                for axiom in needed}
    return [(premise, conclusion) for premise, conclusion in IMPLICATIONS
            if verdicts[premise] and not verdicts[conclusion]]


INDEPENDENCE_AXIOMS = CHARACTERIZING_AXIOMS


@dataclass(frozen=True)
class IndependenceRow:
    """One rule of the independence battery with its expected failure."""
    label: str
    rule: str
    expected_failure: str
    reports: tuple

    @property
    def failures(self):
        return tuple(r.axiom for r in self.reports if not r.passed)

    @property
    def matches(self):
        expected = () if self.expected_failure is None else (self.expected_failure,)
        return self.failures == expected


def independence_suites():
    """(label, rule, scenarios, expected failure) for every row of the
    independence battery."""
    q_vectors, q_weights = scen.q_measure_vectors()
    demo = scen.demo_vector()
    skewed = scen.skewed_bernoulli_vector()
    trigger = scen.gated_trigger()
    q_rule = rules.RuleSpec('q-cmrs', weights=q_weights)
    gated = rules.RuleSpec('gated', trigger=trigger, first=rules.ALL_IN_ONE,
                           second=rules.CMRS)
    linear_suite = scen.as_scenario_set([demo, skewed], 'linear')
    return [
        ('(i)', q_rule, scen.as_scenario_set(q_vectors, 'q-measure'), 'AF'),
        ('(ii)', rules.MEAN_ADJUSTED, linear_suite, 'RF'),
        ('(iii)', rules.IDENTITY, scen.as_scenario_set(demo, 'demo'), 'RA'),
        ('(iv)', gated, scen.as_scenario_set([trigger, demo], 'gated'), 'OA'),
        ('(ii) covariance', rules.COVARIANCE, linear_suite, 'RF'),
        ('(ii) mean-proportional', rules.MEAN_PROPORTIONAL, linear_suite, 'RF'),
        ('cmrs', rules.CMRS,
         scen.as_scenario_set(list(q_vectors) + [demo, skewed, trigger],
                              'combined'), None),
    ]


@memory.cache
def independence_battery(tol=ABS_TOL):
    """Runs AF, RF, RA and OA on every witness rule of the independence
    battery.

    Returns
    -------
    rows : tuple of IndependenceRow
        Each witness rule fails exactly its designated axiom; the cmrs row
        passes all four.
    """
    rows = []
    for label, rule, suite, expected in independence_suites():
        reports = tuple(check_axiom(axiom, rule, suite, tol)
                        for axiom in INDEPENDENCE_AXIOMS)
        rows.append(IndependenceRow(label, rule.name, expected, reports))
        logger.debug(f'independence row {label}: fails {rows[-1].failures}')
    return tuple(rows)


@dataclass(frozen=True)
class ConflictResult:
    """cmrs on (-S, 2S, 0): CM fails while OA and ZP pass."""
    cm: AxiomReport
    oa: AxiomReport
    zp: AxiomReport

    @property
    def matches(self):
        return not self.cm.passed and self.oa.passed and self.zp.passed


def conflict_demonstration(rule=rules.CMRS, total=(0.0, 1.0), tol=ABS_TOL):
    battery = scen.as_scenario_set(scen.conflict_vector(total), 'conflict')
    return ConflictResult(check_CM(rule, battery, tol),
                          check_OA(rule, battery, tol),
                          check_ZP(rule, battery, tol))


def _metric_witness(name, agent, magnitude):
    return Witness('gaussian-n2', agent, float(magnitude), note=name)


@memory.cache
def gaussian_n2_regression(points=50):
    """Two-agent counterexample: a rule that is not cmrs but still reduces
    risk in convex order.

    Independent risks near N(0, 1) and N(0, 2) are discretized on a product
    space, and agent 0 is given E[Y_0 | S] + S/6 (agent 1 the rest), which
    is S/2 for both.

    Parameters
    ----------
    points : int
        Grid points per factor, at least GAUSSIAN_MIN_POINTS.

    Returns
    -------
    report : AxiomReport
        UI report for the perturbed rule on this single scenario; `metrics`
        holds the mean, half-split, variance, stop-loss and cmrs gaps.
    """
    if points < GAUSSIAN_MIN_POINTS:
        raise RiskPoolError(f'the Gaussian regression needs at least '
                            f'{GAUSSIAN_MIN_POINTS} points, got {points}')
    y = scen.gaussian_pair(points)
    rule = rules.RuleSpec('gated', trigger=y,
                          first=rules.RuleSpec('shifted-cmrs', shift=1 / 6),
                          second=rules.CMRS)
    allocation = rules.apply(rule, y)
    total = y.total
    half = total / 2
    sd_total = variance(total) ** 0.5

    metrics = {
        'mean_gap': max(abs(expectation(a) - expectation(x))
                        for a, x in zip(allocation, y)),
        'half_split_gap': max(a.max_deviation(half) for a in allocation),
        'variance_a0': variance(allocation[0]),
        'stop_loss_gap': max(convex_order_gap(a, x)
                             for a, x in zip(allocation, y)),
        'cmrs_gap': allocation[0].max_deviation(total / 3),
        'sd_total': sd_total,
    }

    witnesses = []
    if metrics['mean_gap'] > GAUSSIAN_MEAN_TOL:
        witnesses.append(_metric_witness('mean', 0, metrics['mean_gap']))
    if metrics['half_split_gap'] > ABS_TOL:
        witnesses.append(_metric_witness('half split', 0,
                                         metrics['half_split_gap']))
    variance_error = abs(metrics['variance_a0'] / 0.75 - 1)
    if variance_error > GAUSSIAN_VARIANCE_RTOL:
        witnesses.append(_metric_witness('variance', 0, variance_error))
    for i, (a, x) in enumerate(zip(allocation, y)):
        gap = convex_order_gap(a, x)
        if gap > GAUSSIAN_STOP_LOSS_TOL:
            witnesses.append(_metric_witness('stop-loss', i, gap))
    if metrics['cmrs_gap'] < 0.1 * sd_total:
        witnesses.append(_metric_witness('equals cmrs', 0,
                                         0.1 * sd_total - metrics['cmrs_gap']))

    verdict = FAIL if witnesses else PASS
    return AxiomReport('UI', rule.name, verdict, tuple(witnesses), 1, 0,
                       (f'{points} x {points} grid, two agents',), metrics)


@dataclass(frozen=True)
class BacktrackingResult:
    max_deviation: float
    report: AxiomReport


@memory.cache
def backtracking_check(digits=10, tol=ABS_TOL):
    """cmrs on the digits scenario X_i = sigma_i Y_i, sigma = (1001, 1010,
    1100): S reveals every Y_i, so the allocation must be X itself."""
    x = scen.backtracking_vector(digits)
    allocation = rules.cmrs(x)
    deviation = x.max_deviation(allocation)
    report = check_BT(rules.CMRS, scen.as_scenario_set(x, 'digits'), tol)
    return BacktrackingResult(deviation, report)


@dataclass(frozen=True)
class SharingKernel:
    """Level-wise shares of agent 0 on the unit inputs (1_w, S - 1_w, 0...).

    `matrix[k, w]` is agent 0's allocation on the k-th level of S when it
    holds the indicator of outcome w; `conditional[k, w]` is P(w | S = s_k).
    """
    levels: np.ndarray
    matrix: np.ndarray
    conditional: np.ndarray
    non_measurable: float


def sharing_kernel(rule, total, n=3):
    """Feeds a rule indicator contributions to recover its sharing
    kernel with respect to the total S.

    Parameters
    ----------
    rule : rules.RuleSpec
    total : RandVar
        The total risk S.
    n : int
        Number of agents in each input, at least 2.

    Returns
    -------
    kernel : SharingKernel
        For every rule satisfying AF, RF, RA and OA, `matrix` equals the
        conditional probabilities of the outcomes given S.
    """
    space = total.space
    levels = partition_of(total)
    level_values = np.array([total.values[block[0]] for block in levels.blocks])
    level_mass = np.bincount(levels.labels, weights=space.probs)
    matrix = np.zeros((levels.n_blocks, space.size))
    conditional = np.zeros_like(matrix)
    spread = 0.0
    zero = RandVar.constant(space, 0.0)
    for outcome in range(space.size):
        unit = RandVar.indicator(space, [outcome])
        vector = RiskVector((unit, total - unit) + (zero,) * (n - 2))
        share = rules.apply(rule, vector)[0].values
        block_sum = np.bincount(levels.labels, weights=space.probs * share)
        matrix[:, outcome] = block_sum / level_mass
        spread = max(spread, _worst_block(share, levels)[0])
        conditional[levels.labels[outcome], outcome] = \
            space.probs[outcome] / level_mass[levels.labels[outcome]]
    return SharingKernel(level_values, matrix, conditional, spread)


def kernel_deviation(kernel):
    """Largest gap between a recovered kernel and P(. | S); also counts an input
    that is not constant on the levels of S."""
    return max(float(np.max(np.abs(kernel.matrix - kernel.conditional))),
               kernel.non_measurable)
