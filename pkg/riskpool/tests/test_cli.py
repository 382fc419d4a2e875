import json
import subprocess
import sys

import pytest

from csv import reader
from riskpool import cli

PATH_TEST_FILES = 'riskpool/tests/test_files'
TIMEOUT_TIME = 180


def _run(capsys, *argv):
    status = cli.main(list(argv))
    out, err = capsys.readouterr()
    return status, out, err


def test_allocate_table(capsys):
    status, out, _ = _run(capsys, 'allocate', f'{PATH_TEST_FILES}/demo.json')
    assert status == cli.EXIT_PASS
    assert '* applying cmrs to' in out
    lines = out.splitlines()
    alice = next(line for line in lines if line.startswith('alice'))
    assert alice.split() == ['alice', '0.500000', '0.500000', '0.000000',
                             '0.500000', '0.500000', '1.000000']


def test_allocate_rule_flags(capsys):
    status, out, _ = _run(capsys, 'allocate', f'{PATH_TEST_FILES}/demo.json',
                          '-r', 'mixture', '-P', 'lambda=0.5',
                          '-P', 'a=identity', '-P', 'b=cmrs', '-f', 'csv')
    assert status == cli.EXIT_PASS
    rows = list(reader(out.splitlines()))
    assert rows[0][:3] == ['agent', 'E[X]', 'E[A]']
    assert rows[1] == ['alice', '0.500000', '0.500000', '0.000000',
                       '0.750000', '0.250000', '1.000000']


def test_allocate_machine(capsys):
    status, out, _ = _run(capsys, 'allocate', f'{PATH_TEST_FILES}/targeted.json',
                          '-f', 'machine')
    assert status == cli.EXIT_PASS
    document = json.loads(out)
    assert document['rule'] == 'generalized-cmrs'
    assert document['exit_status'] == 0
    assert document['allocations']['targeted']['alice'] == [0.5, 0.5, 0, 1]


def test_allocate_errors(capsys):
    """Checks the exit codes of bad inputs and failing rules.

    Summary
    -------
    A malformed scenario file, an unknown rule name and mean-proportional
    on a scenario with a negative value.

    Expected
    --------
    Exit code 2 for the first two, 3 for the rule error, each with a message
    on stderr.
    """
    status, _, err = _run(capsys, 'allocate', f'{PATH_TEST_FILES}/broken.json')
    assert status == cli.EXIT_INPUT
    assert 'line' in err

    status, _, err = _run(capsys, 'allocate', f'{PATH_TEST_FILES}/demo.json',
                          '-r', 'proportional')
    assert status == cli.EXIT_INPUT
    assert 'unknown rule' in err

    status, _, err = _run(capsys, 'allocate',
                          f'{PATH_TEST_FILES}/negative.json',
                          '-r', 'mean-proportional')
    assert status == cli.EXIT_RULE
    assert 'negative' in err

    status, _, _ = _run(capsys, 'allocate', f'{PATH_TEST_FILES}/none.json')
    assert status == cli.EXIT_INPUT


def test_verify_files(capsys):
    status, out, _ = _run(capsys, 'verify', f'{PATH_TEST_FILES}/demo.json',
                          'AF', 'RF', 'RA', 'OA')
    assert status == cli.EXIT_PASS
    assert 'cmrs' in out

    status, out, _ = _run(capsys, 'verify', f'{PATH_TEST_FILES}/demo.json',
                          'RA', '-r', 'identity')
    assert status == cli.EXIT_FAIL
    assert 'RA demo: agent 0' in out


def test_verify_input_file(capsys):
    status, out, _ = _run(capsys, 'verify',
                          f'{PATH_TEST_FILES}/input_file.txt', 'AF', 'UI')
    assert status == cli.EXIT_PASS
    assert 'on 2 scenario(s)' in out
    # two agents: OA does not apply and is reported as such
    status, out, _ = _run(capsys, 'verify',
                          f'{PATH_TEST_FILES}/two_agents.json', 'OA')
    assert status == cli.EXIT_PASS
    assert 'OA skipped' in out


def test_verify_battery_machine(capsys):
    """Checks that machine output of a seeded battery is reproducible.

    Summary
    -------
    The same battery is checked twice in machine format.

    Expected
    --------
    Both documents are identical and carry the seed.
    """
    argv = ['verify', '--battery', 'seed=7', '--battery-size', '20',
            'AF', 'RA', '-f', 'machine']
    status, first, _ = _run(capsys, *argv)
    assert status == cli.EXIT_PASS
    _, second, _ = _run(capsys, *argv)
    assert first == second

    document = json.loads(first)
    assert document['seed'] == 7
    assert document['command'] == argv
    assert [r['axiom'] for r in document['reports']] == ['AF', 'RA']
    assert all(r['scenarios_checked'] == 20 for r in document['reports'])


def test_verify_all_axioms(capsys):
    """Checks the default axiom group on the seeded battery.

    Summary
    -------
    cmrs against 'all' on 200 scenarios with seed 7, then generalized cmrs
    and identity on the example file.

    Expected
    --------
    cmrs passes AF, RF, RA and OA; generalized cmrs is checked on AF, RF,
    OA, IA and IB; 'every' makes identity fail.
    """
    status, out, _ = _run(capsys, 'verify', '--rule', 'cmrs', '--battery',
                          'seed=7', 'all', '-f', 'machine')
    assert status == cli.EXIT_PASS
    document = json.loads(out)
    assert [r['axiom'] for r in document['reports']] == ['AF', 'RF', 'RA',
                                                         'OA']

    status, out, _ = _run(capsys, 'verify', f'{PATH_TEST_FILES}/targeted.json',
                          '-r', 'generalized-cmrs', '-f', 'machine')
    assert status == cli.EXIT_PASS
    document = json.loads(out)
    assert [r['axiom'] for r in document['reports']] == ['AF', 'RF', 'OA',
                                                         'IA', 'IB']

    status, out, _ = _run(capsys, 'verify', f'{PATH_TEST_FILES}/demo.json',
                          'every', '-r', 'identity', '-f', 'machine')
    assert status == cli.EXIT_FAIL
    assert len(json.loads(out)['reports']) == 12


def test_verify_battery_needs_seed_in_machine_format(capsys):
    status, _, err = _run(capsys, 'verify', '--battery', '-f', 'machine')
    assert status == cli.EXIT_INPUT
    assert 'seed' in err

    status, _, _ = _run(capsys, 'verify')
    assert status == cli.EXIT_INPUT


def test_verify_catalog(capsys):
    status, out, _ = _run(capsys, 'verify', '--battery', '--seed', '3',
                          '--battery-size', '10', '-r', 'all', 'AF', '-f',
                          'csv')
    # uniform and all-in-one are not actuarially fair
    assert status == cli.EXIT_FAIL
    rows = list(reader(out.splitlines()))
    verdicts = {row[0]: row[2] for row in rows[1:]}
    assert verdicts['cmrs'] == 'pass'
    assert verdicts['uniform'] == 'fail'


def test_pool(capsys, tmp_path):
    status, out, _ = _run(capsys, 'pool',
                          '--shares', f'{PATH_TEST_FILES}/miners.csv',
                          '--price', '100', '--winner', 'm2', '--check-cmrs',
                          '-csv', str(tmp_path / 'payouts.csv'))
    assert status == cli.EXIT_PASS
    assert 'max deviation 0.000000' in out
    with open(tmp_path / 'payouts.csv') as csv_file:
        assert list(reader(csv_file)) == [['id', 'payout'],
                                          ['m1', '20.000000'],
                                          ['m2', '30.000000'],
                                          ['m3', '50.000000']]

    status, _, err = _run(capsys, 'pool',
                          '--shares', f'{PATH_TEST_FILES}/miners.csv',
                          '--price', '100', '--winner', 'm9')
    assert status == cli.EXIT_INPUT
    assert 'm9' in err

    status, _, _ = _run(capsys, 'pool',
                        '--shares', f'{PATH_TEST_FILES}/miners_excess.csv',
                        '--price', '100')
    assert status == cli.EXIT_INPUT


def test_malformed_inputs_exit_code(capsys, tmp_path):
    """Checks that malformed files end with the input error code.

    Summary
    -------
    A scenario file that is not UTF-8, a scenario with a NaN risk, a
    scenario whose target partition holds a string, a pool CSV with a
    0xff byte and an unparsable realized price.

    Expected
    --------
    Exit code 2 and a message on stderr for each of them.
    """
    latin = tmp_path / 'latin.json'
    latin.write_bytes(b'{"space": [1.0], "agents": {"caf\xe9": [1]}}')
    status, _, err = _run(capsys, 'allocate', str(latin))
    assert status == cli.EXIT_INPUT
    assert 'UTF-8' in err

    nan = tmp_path / 'nan.json'
    nan.write_text('{"space": [0.5, 0.5], "agents": [[0, NaN], [1, 0]]}')
    status, _, err = _run(capsys, 'allocate', str(nan))
    assert status == cli.EXIT_INPUT
    assert 'nan' in err

    targeted = tmp_path / 'targeted.json'
    targeted.write_text('{"space": [0.5, 0.5], "agents": [[0, 1], [1, 0]], '
                        '"target_partition": [[0], ["1"]]}')
    status, _, _ = _run(capsys, 'verify', str(targeted), 'IA')
    assert status == cli.EXIT_INPUT

    shares = tmp_path / 'shares.csv'
    shares.write_bytes(b'miner_id,share\nm\xff1,0.5\n')
    status, _, err = _run(capsys, 'pool', '--shares', str(shares),
                          '--price', '100')
    assert status == cli.EXIT_INPUT
    assert 'UTF-8' in err

    for price in ('abc', 'nan'):
        status, _, err = _run(capsys, 'pool',
                              '--shares', f'{PATH_TEST_FILES}/miners.csv',
                              '--price', f'{PATH_TEST_FILES}/prices.csv',
                              '--winner', 'm1', '--realized-price', price)
        assert status == cli.EXIT_INPUT
        assert '--realized-price' in err


def test_pool_single_value_price_file(capsys, tmp_path):
    price = tmp_path / 'price.txt'
    price.write_text('100\n')
    status, out, _ = _run(capsys, 'pool',
                          '--shares', f'{PATH_TEST_FILES}/miners.csv',
                          '--price', str(price), '--winner', 'm2',
                          '--realized-price', '100.0', '-f', 'csv')
    assert status == cli.EXIT_PASS
    assert list(reader(out.splitlines()))[1:] == [['m1', '20.000000'],
                                                  ['m2', '30.000000'],
                                                  ['m3', '50.000000']]



def test_pool_audit_machine(capsys):
    status, out, _ = _run(capsys, 'pool',
                          '--shares', f'{PATH_TEST_FILES}/miners.csv',
                          '--price', f'{PATH_TEST_FILES}/prices.csv',
                          '--winner', 'm1', '--realized-price', '150',
                          '--audit', '-f', 'machine')
    assert status == cli.EXIT_PASS
    document = json.loads(out)
    assert document['allocations']['payouts'] == pytest.approx(
        {'m1': 30.0, 'm2': 45.0, 'm3': 75.0})
    assert [r['axiom'] for r in document['reports']] == ['AF', 'RF', 'RA',
                                                         'OA']


def test_multipool(capsys):
    status, out, _ = _run(capsys, 'multipool',
                          '--shares', f'{PATH_TEST_FILES}/multipool.csv',
                          '--price', '100', '--pool', 'P1', '-f', 'csv')
    assert status == cli.EXIT_PASS
    assert list(reader(out.splitlines())) == [['id', 'payout'],
                                              ['m1', '33.333333'],
                                              ['m2', '66.666667']]


def test_multicoin(capsys):
    status, out, _ = _run(capsys, 'multicoin',
                          '--shares', f'{PATH_TEST_FILES}/multicoin.csv',
                          '--price', 'BTC=100', '--price', 'ETH=60',
                          '--mined', 'BTC', '--mined', 'ETH',
                          '--check-cmrs', '-f', 'csv')
    assert status == cli.EXIT_PASS
    assert list(reader(out.splitlines())) == [['id', 'payout'],
                                              ['m1', '65.000000'],
                                              ['m2', '95.000000']]

    status, _, err = _run(capsys, 'multicoin',
                          '--shares', f'{PATH_TEST_FILES}/multicoin.csv',
                          '--price', 'BTC=100', '--price', 'ETH=60',
                          '--mined', 'DOGE')
    assert status == cli.EXIT_INPUT
    assert 'DOGE' in err


def test_revenue(capsys):
    status, out, _ = _run(capsys, 'revenue',
                          '--users', f'{PATH_TEST_FILES}/users.csv',
                          '--streams', f'{PATH_TEST_FILES}/streams.csv',
                          '--check-cmrs', '-f', 'csv')
    assert status == cli.EXIT_PASS
    assert list(reader(out.splitlines())) == [['id', 'payout'],
                                              ['a1', '7.000000'],
                                              ['a2', '3.000000']]

    status, _, err = _run(capsys, 'revenue',
                          '--users', f'{PATH_TEST_FILES}/users_silent.csv',
                          '--streams', f'{PATH_TEST_FILES}/streams_silent.csv')
    assert status == cli.EXIT_INPUT
    assert 'u2' in err


@pytest.mark.timeout(TIMEOUT_TIME)
def test_counterexamples_main():
    """Runs the counterexample suite through riskshare.py.

    Summary
    -------
    The script is called with machine output.

    Expected
    --------
    Exit code 0, every check reported as reproduced.
    """
    test_command = [sys.executable, 'riskshare.py', 'counterexamples',
                    '-f', 'machine']

    # testing is done by calling the riskshare.py file with the test_command
    result = subprocess.run(test_command, capture_output=True, text=True)

    assert result.returncode == 0, result.stderr
    document = json.loads(result.stdout)
    assert document['checks'] == {'independence': True, 'conflict': True,
                                  'gaussian_n2': True, 'backtracking': True}
    assert document['backtracking_max_deviation'] == 0


@pytest.mark.timeout(TIMEOUT_TIME)
def test_counterexamples_machine_is_reproducible(capsys):
    first = _run(capsys, 'counterexamples', '-f', 'machine')
    second = _run(capsys, 'counterexamples', '-f', 'machine')
    assert first[0] == cli.EXIT_PASS
    assert first[1] == second[1]
