import numpy as np
import pytest

from numpy.testing import assert_allclose, assert_array_equal
from riskpool import prob_core as pc
from riskpool import rules
from riskpool import scenarios

PATH_TEST_FILES = 'riskpool/tests/test_files'


@pytest.fixture(scope='module')
def battery():
    return scenarios.random_battery(seed=7, size=40)


def test_random_battery_guarantees(battery):
    """Checks the structure of a generated battery.

    Summary
    -------
    A battery of 40 scenarios is generated with seed 7.

    Expected
    --------
    Names carry the seed; agent counts come from AGENT_COUNTS; values come
    from VALUE_GRID; scenario 0 has a constant and a zero component,
    scenario 1 is sigma(S)-measurable and scenario 2 carries the singleton
    partition.
    """
    assert len(battery) == 40
    assert battery.seed == 7
    assert battery[5].name == 'battery[7]#5'

    grid = set(scenarios.VALUE_GRID)
    for idx, scenario in enumerate(battery):
        assert scenario.vector.n in scenarios.AGENT_COUNTS
        assert 2 <= scenario.vector.space.size <= scenarios.MAX_OUTCOMES
        assert scenario.partition is not None
        if idx != 1:
            assert set(np.unique(scenario.vector.matrix)) <= grid

    first = battery[0].vector
    assert_array_equal(first[-1].values, 0)
    assert len(np.unique(first[-2].values)) == 1
    assert first[-2].values[0] != 0

    levels = pc.partition_of(battery[1].vector.total)
    assert all(pc.is_measurable(agent, levels) for agent in battery[1].vector)

    assert battery[2].partition == pc.Partition.singletons(
        battery[2].vector.space)


def test_random_battery_is_reproducible(battery):
    again = scenarios.random_battery(seed=7, size=40)
    for left, right in zip(battery, again):
        assert left.name == right.name
        assert left.vector.space == right.vector.space
        assert_array_equal(left.vector.matrix, right.vector.matrix)
        assert left.partition == right.partition

    other = scenarios.random_battery(seed=8, size=40)
    assert any(left.vector.space != right.vector.space
               for left, right in zip(battery, other))


def test_random_battery_nonnegative():
    battery = scenarios.random_battery(seed=3, size=20, nonnegative=True)
    assert all(np.all(scenario.vector.matrix >= 0) for scenario in battery)

    with pytest.raises(pc.RiskPoolError):
        scenarios.random_battery(seed=3, size=2)


def test_canned_vectors():
    backtracking = scenarios.backtracking_vector()
    assert backtracking.space.size == 1000
    levels = pc.partition_of(backtracking.total)
    assert levels.n_blocks == 1000

    pair = scenarios.gaussian_pair(10)
    assert pair.space.size == 100
    assert abs(pc.covariance(pair[0], pair[1])) <= 1e-9
    assert_allclose(pc.variance(pair[1]) / pc.variance(pair[0]), 2, rtol=1e-9)

    independent = scenarios.independent_binary_vector()
    assert_allclose([pc.expectation(agent) for agent in independent], 0.5)

    conflict = scenarios.conflict_vector((0.0, 1.0, 3.0))
    assert_allclose(conflict.total.values, [0, 1, 3])


def test_load_scenario_file():
    scenario = scenarios.load_scenario_file(f'{PATH_TEST_FILES}/demo.json')
    assert scenario.name == 'demo'
    assert scenario.agent_names == ('alice', 'bob', 'carol')
    assert scenario.rule.kind == 'cmrs'
    assert scenario.partition is None
    assert_array_equal(scenario.vector.matrix,
                       scenarios.demo_vector().matrix)

    targeted = scenarios.load_scenario_file(f'{PATH_TEST_FILES}/targeted.json')
    assert targeted.partition.blocks == ((0, 1), (2, 3))
    assert targeted.rule.kind == 'generalized-cmrs'


def test_load_broken_scenario_file():
    with pytest.raises(scenarios.ScenarioFileError, match='line'):
        scenarios.load_scenario_file(f'{PATH_TEST_FILES}/broken.json')


def test_load_invalid_scenario_file(tmp_path):
    path = tmp_path / 'bad_space.json'
    path.write_text('{"space": [0.5, 0.6], "agents": [[0, 1], [1, 0]]}')
    with pytest.raises(scenarios.ScenarioFileError, match='sum'):
        scenarios.load_scenario_file(path)

    path.write_text('{"space": [0.5, 0.5], "agents": [[0, 1], [1, 0, 2]]}')
    with pytest.raises(scenarios.ScenarioFileError):
        scenarios.load_scenario_file(path)

    path.write_text('{"space": [0.5, 0.5]}')
    with pytest.raises(scenarios.ScenarioFileError, match='agents'):
        scenarios.load_scenario_file(path)


MALFORMED_DOCUMENTS = [
    '{"space": "abc", "agents": [[0, 1], [1, 0]]}',
    '{"space": [0.5, 0.5], "agents": [[0, 1], [1, 0]], '
    '"target_partition": [[0], ["a"]]}',
    '{"space": [0.5, 0.5], "agents": [[0, 1], [1, 0]], '
    '"target_partition": [[0], [1.5]]}',
    '{"space": [0.5, 0.5], "agents": [[0, 1], [1, 0]], '
    '"rule": {"name": "mixture", "params": {"lambda": "x", "a": "identity", '
    '"b": "cmrs"}}}',
    '{"space": [0.5, 0.5], "agents": [[0, NaN], [1, 0]]}',
    '{"space": [0.5, 0.5], "agents": [[0, "x"], [1, 0]]}',
    '{"space": [0.5, 0.5], "agents": [[0, 1], [1, 0]], '
    '"rule": {"name": "q-cmrs", "params": {"weights": [0.5, null]}}}',
]


@pytest.mark.parametrize('text', MALFORMED_DOCUMENTS)
def test_load_malformed_scenario_file(tmp_path, text):
    path = tmp_path / 'malformed.json'
    path.write_text(text)
    with pytest.raises(scenarios.ScenarioFileError):
        scenarios.load_scenario_file(path)


def test_load_scenario_file_not_utf8(tmp_path):
    path = tmp_path / 'latin.json'
    path.write_bytes(b'{"space": [1.0], "agents": {"caf\xe9": [1]}}')
    with pytest.raises(scenarios.ScenarioFileError, match='UTF-8'):
        scenarios.load_scenario_file(path)


def test_dump_and_load(tmp_path):
    """Writes a scenario with a nested rule and reads it back.

    Summary
    -------
    The scenario carries target information and a gated rule whose
    components are a mixture and cmrs.

    Expected
    --------
    The risk vector, partition and rule document survive unchanged.
    """
    vector = scenarios.gated_trigger()
    inner = rules.RuleSpec('mixture', weight=0.25, first=rules.IDENTITY,
                           second=rules.UNIFORM)
    rule = rules.RuleSpec('gated', first=inner, second=rules.CMRS,
                          trigger=vector)
    scenario = scenarios.Scenario(
        'roundtrip', vector,
        pc.Partition.from_blocks(vector.space, [[0, 3], [1, 2]]),
        ('a', 'b', 'c'), rule)

    path = scenarios.dump_scenario_file(scenario, tmp_path / 'roundtrip.json')
    loaded = scenarios.load_scenario_file(path)

    assert loaded.agent_names == ('a', 'b', 'c')
    assert_array_equal(loaded.vector.matrix, vector.matrix)
    assert loaded.partition == scenario.partition
    assert scenarios.rule_to_document(loaded.rule) == \
        scenarios.rule_to_document(rule)
    assert rules.apply(loaded.rule, loaded.vector).allclose(
        rules.apply(inner, vector))


def test_rule_from_document():
    space = scenarios.uniform_space(2)
    rule = scenarios.rule_from_document(
        {'name': 'mixture', 'params': {'lambda': 0.5, 'a': 'identity',
                                       'b': {'name': 'cmrs'}}}, space)
    assert rule.name == 'mixture(0.5, identity, cmrs)'

    rule = scenarios.rule_from_document(
        {'name': 'q-cmrs', 'params': {'weights': [0.25, 0.75]}}, space)
    assert_allclose(rule.weights, [0.25, 0.75])

    with pytest.raises(rules.BadRuleParameter):
        scenarios.rule_from_document(
            {'name': 'cmrs', 'params': {'lambda': 0.5}}, space)
    with pytest.raises(scenarios.ScenarioFileError):
        scenarios.rule_from_document({'params': {}}, space)
    with pytest.raises(rules.UnknownRule):
        scenarios.rule_from_document({'name': 'nope'}, space)


def test_scenario_validation():
    vector = scenarios.demo_vector()
    assert scenarios.Scenario('x', vector).agent_names == \
        ('agent_0', 'agent_1', 'agent_2')
    with pytest.raises(scenarios.ScenarioFileError):
        scenarios.Scenario('x', vector, agent_names=('a', 'b'))
    with pytest.raises(scenarios.ScenarioFileError):
        scenarios.Scenario('x', vector, pc.Partition.trivial(
            scenarios.uniform_space(2)))

    items = scenarios.as_scenario_set([vector, scenarios.conflict_vector()],
                                      prefix='demo')
    assert [s.name for s in items] == ['demo#0', 'demo#1']
