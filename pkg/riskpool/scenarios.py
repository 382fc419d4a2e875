import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rules
from .prob_core import (Partition, RandVar, RiskPoolError, RiskVector,
                        discretize_gaussian, make_space)

logger = logging.getLogger(__name__)

BATTERY_SIZE = 200
VALUE_GRID = range(-3, 4)
MAX_OUTCOMES = 64
AGENT_COUNTS = (3, 4, 5)

# smallest outcome weight drawn into a random battery, before renormalizing
MIN_WEIGHT = 1e-4

BACKTRACKING_SIGMA = (1001, 1010, 1100)


class ScenarioFileError(RiskPoolError):
    pass


@dataclass(frozen=True, eq=False)
class Scenario:
    """A risk vector with an identifier, optionally carrying target
    information (a Partition) and a rule read from a scenario file."""
    name: str
    vector: RiskVector
    partition: Partition = None
    agent_names: tuple = None
    rule: rules.RuleSpec = None

    def __post_init__(self):
        if self.agent_names is None:
            names = tuple(f'agent_{idx}' for idx in range(self.vector.n))
            object.__setattr__(self, 'agent_names', names)
        elif len(self.agent_names) != self.vector.n:
            raise ScenarioFileError(
                f'{self.name}: {len(self.agent_names)} agent names for '
                f'{self.vector.n} agents')
        if self.partition is not None and \
                self.partition.space != self.vector.space:
            raise ScenarioFileError(
                f'{self.name}: target partition lives on another space')


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    """Finite battery of scenarios; `seed` is set for generated batteries."""
    scenarios: tuple
    seed: int = None

    def __post_init__(self):
        scenarios = tuple(self.scenarios)
        if not scenarios:
            raise RiskPoolError('a scenario set needs at least one scenario')
        object.__setattr__(self, 'scenarios', scenarios)

    def __len__(self):
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    def __getitem__(self, idx):
        return self.scenarios[idx]

    def __add__(self, other):
        return ScenarioSet(self.scenarios + tuple(other), seed=self.seed)


def as_scenario_set(items, prefix='scenario'):
    """Wraps a Scenario, a RiskVector, or a sequence of either into a
    ScenarioSet."""
    if isinstance(items, ScenarioSet):
        return items
    if isinstance(items, (Scenario, RiskVector)):
        items = [items]
    scenarios = []
    for idx, item in enumerate(items):
        if isinstance(item, RiskVector):
            item = Scenario(f'{prefix}#{idx}', item)
        scenarios.append(item)
    return ScenarioSet(tuple(scenarios))


def _random_space(rng, max_outcomes):
    """Helper function. Draws an outcome count and Dirichlet weights."""
    size = int(rng.integers(2, max_outcomes + 1))
    weights = np.maximum(rng.dirichlet(np.ones(size)), MIN_WEIGHT)
    return make_space(weights / math.fsum(weights))


def _random_partition(rng, space):
    n_labels = int(rng.integers(1, space.size + 1))
    return Partition(space, rng.integers(0, n_labels, size=space.size))


def random_battery(seed, size=BATTERY_SIZE, agent_counts=AGENT_COUNTS,
                   max_outcomes=MAX_OUTCOMES, nonnegative=False):
    """Generates a reproducible battery of random scenarios.

    Parameters
    ----------
    seed : int
        Seed of the numpy generator; the same seed yields the same battery.
    size : int
        Number of scenarios, at least 3.
    agent_counts : sequence of int
        Agent counts to draw from.
    max_outcomes : int
        Largest outcome count of a scenario space.
    nonnegative : bool
        Restricts values to the non-negative part of VALUE_GRID.

    Returns
    -------
    battery : ScenarioSet
        Every scenario carries a random target partition. Scenario 0 has a
        constant component and a zero component, scenario 1 is
        sigma(S)-measurable and scenario 2 carries the singleton partition.
    """
    if size < 3:
        raise RiskPoolError(f'a battery needs at least 3 scenarios, got {size}')
    rng = np.random.default_rng(seed)
    grid = np.array([v for v in VALUE_GRID if v >= 0 or not nonnegative],
                    dtype=float)
    scenarios = []
    for idx in range(size):
        n = int(rng.choice(agent_counts))
        space = _random_space(rng, max_outcomes)
        matrix = rng.choice(grid, size=(n, space.size))
        if idx == 0:
            matrix[-1] = 0.0
            matrix[-2] = rng.choice(grid[grid != 0])
        elif idx == 1:
            driver = rng.choice(grid, size=space.size)
            slopes = rng.integers(1, 3, size=n)
            offsets = rng.choice(grid, size=n)
            matrix = np.outer(slopes, driver) + offsets[:, None]
        partition = (Partition.singletons(space) if idx == 2
                     else _random_partition(rng, space))
        scenarios.append(Scenario(f'battery[{seed}]#{idx}',
                                  RiskVector.from_matrix(space, matrix),
                                  partition))
    logger.info(f'generated battery seed={seed} with {size} scenarios')
    return ScenarioSet(tuple(scenarios), seed=seed)


def uniform_space(size):
    return make_space(np.full(size, 1.0 / size))


def demo_vector():
    """Uniform 4-outcome space, X = ([0,1,0,1], [0,0,1,1], 0)."""
    return RiskVector.from_matrix(uniform_space(4), [[0, 1, 0, 1],
                                                     [0, 0, 1, 1],
                                                     [0, 0, 0, 0]])


def skewed_bernoulli_vector():
    """Two independent Bernoulli risks of very different scales; the
    linear rules push agent 0 above its own worst case here."""
    space = make_space([0.495, 0.495, 0.005, 0.005])
    return RiskVector.from_matrix(space, [[0, 1, 0, 1],
                                          [0, 0, 10, 10],
                                          [0, 0, 0, 0]])


def q_measure_vectors():
    """Two-outcome scenarios for the change-of-measure rule, with the
    measure Q = (0.25, 0.75)."""
    space = uniform_space(2)
    first = RiskVector.from_matrix(space, [[1, 0], [0, 1], [0, 0]])
    second = RiskVector.from_matrix(space, [[2, 0], [0, 1], [1, 1]])
    return (first, second), (0.25, 0.75)


def conflict_vector(total=(0.0, 1.0), probs=None):
    """(-S, 2S, 0): every rule with OA and ZP allocates it
    non-comonotonically when S is not constant."""
    space = make_space(probs) if probs is not None else uniform_space(len(total))
    total = np.asarray(total, dtype=float)
    return RiskVector.from_matrix(space, [-total, 2 * total,
                                          np.zeros_like(total)])


def gated_trigger():
    """Three agents on a uniform 4-space, agents 1 and 2 with zero mean and
    S never above sup X_0, so the all-in-one branch keeps RF."""
    return RiskVector.from_matrix(uniform_space(4), [[0, 2, 0, 2],
                                                     [1, -1, 0, 0],
                                                     [1, 0, 0, -1]])


def independent_binary_vector():
    """Three iid fair Bernoulli risks on their 8-outcome product space."""
    outcomes = np.array([[(k >> bit) & 1 for k in range(8)]
                         for bit in range(3)], dtype=float)
    return RiskVector.from_matrix(uniform_space(8), outcomes)


def backtracking_vector(digits=10, sigma=BACKTRACKING_SIGMA):
    """X_i = sigma_i * Y_i with Y_i iid uniform on {0, ..., digits - 1}.

    With sigma = (1001, 1010, 1100) and decimal digits the last three digits
    of S are Y_2, Y_1, Y_0, so X is sigma(S)-measurable.
    """
    grids = np.meshgrid(*[np.arange(digits)] * len(sigma), indexing='ij')
    values = [s * grid.ravel() for s, grid in zip(sigma, grids)]
    return RiskVector.from_matrix(uniform_space(digits ** len(sigma)), values)


def gaussian_pair(points):
    """Two uncorrelated risks approximating N(0, 1) and N(0, 2).

    The space is the product of a grid for S (discretized N(0, 3)) and a
    grid for Z (discretized N(0, 1)); Y_0 = S/3 + sqrt(2/3) Z and
    Y_1 = 2S/3 - sqrt(2/3) Z. On this grid E[Y_0 | S] = S/3 exactly.
    """
    s_grid = np.array([v for v, _ in discretize_gaussian(0.0, 3.0, points)])
    z_grid = np.array([v for v, _ in discretize_gaussian(0.0, 1.0, points)])
    total = np.repeat(s_grid, points)
    noise = np.tile(z_grid, points)
    scale = math.sqrt(2 / 3)
    return RiskVector.from_matrix(uniform_space(points * points),
                                  [total / 3 + scale * noise,
                                   2 * total / 3 - scale * noise])


def _vector_from_document(document, space, source, where):
    """Helper function. Reads agents given as {name: values} or as a list
    of value lists."""
    if isinstance(document, dict):
        names, rows = tuple(document), list(document.values())
    elif isinstance(document, list):
        names, rows = None, document
    else:
        raise ScenarioFileError(f'{source}: {where} must be an object or a list')
    try:
        agents = tuple(RandVar(space, row) for row in rows)
        return RiskVector(agents), names
    except (TypeError, ValueError) as err:
        raise ScenarioFileError(f'{source}: {where}: {err}') from err


def _finite(value):
    number = float(value)
    if not math.isfinite(number):
        raise ValueError(f'{value!r} is not a finite number')
    return number


def _component_rule(value, space, source):
    if isinstance(value, str):
        return rule_from_document({'name': value}, space, source)
    return rule_from_document(value, space, source)


def rule_from_document(document, space, source='<rule>'):
    """Builds a RuleSpec from its document form {"name": ..., "params": {...}}.

    Parameters per rule: q-cmrs `weights`; generalized-cmrs `partition`
    (optional list of blocks); mixture `lambda`, `a`, `b`; gated `trigger`
    (agent values), `a`, `b`; shifted-cmrs `shift`. Component rules `a` and
    `b` are names or nested documents.
    """
    if not isinstance(document, dict) or 'name' not in document:
        raise ScenarioFileError(f'{source}: a rule needs a "name"')
    name = document['name']
    params = dict(document.get('params') or {})
    allowed = {'q-cmrs': {'weights'}, 'generalized-cmrs': {'partition'},
               'mixture': {'lambda', 'a', 'b'}, 'gated': {'trigger', 'a', 'b'},
               'shifted-cmrs': {'shift'}}.get(name, set())
    unexpected = set(params) - allowed
    if unexpected:
        raise rules.BadRuleParameter(
            f'{source}: rule {name} takes no parameter(s) '
            f'{", ".join(sorted(unexpected))}')
    kwargs = {}
    try:
        if 'weights' in params:
            kwargs['weights'] = tuple(float(w) for w in params['weights'])
        if 'partition' in params:
            kwargs['partition'] = Partition.from_blocks(space,
                                                        params['partition'])
        if 'lambda' in params:
            kwargs['weight'] = _finite(params['lambda'])
        if 'shift' in params:
            kwargs['shift'] = _finite(params['shift'])
    except (TypeError, ValueError) as err:
        raise rules.BadRuleParameter(f'{source}: rule {name}: {err}') from err
    if 'trigger' in params:
        kwargs['trigger'], _ = _vector_from_document(
            params['trigger'], space, source, 'rule trigger')
    for key, field in (('a', 'first'), ('b', 'second')):
        if key in params:
            kwargs[field] = _component_rule(params[key], space, source)
    return rules.RuleSpec(name, **kwargs)


def rule_to_document(rule):
    document = {'name': rule.kind}
    params = {}
    if rule.weights is not None:
        params['weights'] = [float(w) for w in rule.weights]
    if rule.partition is not None:
        params['partition'] = [list(block) for block in rule.partition.blocks]
    if rule.weight is not None:
        params['lambda'] = rule.weight
    if rule.shift is not None:
        params['shift'] = rule.shift
    if rule.trigger is not None:
        params['trigger'] = [agent.values.tolist() for agent in rule.trigger]
    if rule.first is not None:
        params['a'] = rule_to_document(rule.first)
        params['b'] = rule_to_document(rule.second)
    if params:
        document['params'] = params
    return document


def load_scenario_file(path):
    """Reads a JSON scenario file.

    Parameters
    ----------
    path : str or pathlib.Path
        Document with keys "space" (probabilities), "agents" (name: values,
        in agent order), optionally "target_partition" (list of outcome
        blocks) and "rule" ({"name": ..., "params": {...}}).

    Returns
    -------
    scenario : Scenario
        Named after the file stem.
    """
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as err:
        raise ScenarioFileError(
            f'{path}: line {err.lineno}, column {err.colno}: {err.msg}') from err
    except UnicodeDecodeError as err:
        raise ScenarioFileError(f'{path}: not UTF-8 text: {err.reason}') from err
    if not isinstance(document, dict):
        raise ScenarioFileError(f'{path}: expected a JSON object')
    for key in ('space', 'agents'):
        if key not in document:
            raise ScenarioFileError(f'{path}: missing key "{key}"')
    try:
        space = make_space(document['space'])
        vector, names = _vector_from_document(document['agents'], space, path,
                                              'agents')
        partition = None
        if document.get('target_partition') is not None:
            partition = Partition.from_blocks(space,
                                              document['target_partition'])
        rule = None
        if document.get('rule') is not None:
            rule = rule_from_document(document['rule'], space, path)
    except ScenarioFileError:
        raise
    except (TypeError, ValueError) as err:
        # RiskPoolError is a ValueError
        raise ScenarioFileError(f'{path}: {err}') from err
    return Scenario(path.stem, vector, partition, names, rule)


def scenario_to_document(scenario):
    document = {
        'space': scenario.vector.space.probs.tolist(),
        'agents': {name: agent.values.tolist()
                   for name, agent in zip(scenario.agent_names,
                                          scenario.vector)},
    }
    if scenario.partition is not None:
        document['target_partition'] = [list(block) for block in
                                        scenario.partition.blocks]
    if scenario.rule is not None:
        document['rule'] = rule_to_document(scenario.rule)
    return document


def dump_scenario_file(scenario, path):
    """Writes a scenario as JSON; load_scenario_file reads it back to an
    identical risk vector."""
    path = Path(path)
    path.write_text(json.dumps(scenario_to_document(scenario), indent=2) + '\n')
    return path
