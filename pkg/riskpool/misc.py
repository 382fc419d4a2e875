import argparse
import json
import os

from .rules import RULE_NAMES
from .scenarios import BATTERY_SIZE

SUPPORTED_SCENARIO_EXT = ('.json',)
SUPPORTED_TEXT_EXT = ('.txt', '.text')


def _add_global_arguments(parser):
    """Helper function. Flags shared by every command."""
    parser.add_argument('-f', '--format',
                        choices=('table', 'csv', 'machine'),
                        help='Output format: aligned text table, CSV on\
                        stdout, or a JSON run report',
                        default='table')

    parser.add_argument('-t', '--tolerance',
                        type=float,
                        help='Absolute tolerance of every check (default\
                        1e-9)',
                        default=None)

    parser.add_argument('--seed',
                        type=int,
                        help='Seed of generated scenario batteries',
                        default=None)

    parser.add_argument('-j', '--jobs',
                        type=int,
                        help='Number of joblib workers for scenario checks',
                        default=1)

    # CSV output path
    parser.add_argument('-csv', '--path_csv',
                        type=str,
                        help='Also write the resulting table to this CSV file',
                        default=None)

    parser.add_argument('--cache',
                        action='store_true',
                        help='Enable computation cache for the fixed\
                        counterexample batteries')

    parser.add_argument('-v', '--verbose',
                        action='store_true',
                        help='Log debug messages on stderr')


def _add_rule_arguments(parser, default):
    parser.add_argument('-r', '--rule',
                        type=str,
                        help=f"Rule name ({', '.join(RULE_NAMES)}), or\
                        'all' to run the parameter-free catalog",
                        default=default)

    parser.add_argument('-P', '--param',
                        action='append',
                        metavar='KEY=VALUE',
                        help='Rule parameter; VALUE is read as JSON when\
                        possible, e.g. weights=[0.25,0.75] or lambda=0.5',
                        default=[])


def _generate_parser():
    # Assign description to the help doc
    parser = argparse.ArgumentParser(
        description='This is riskshare, a tool to apply risk sharing rules\
        on finite probability spaces, verify their axioms, and compute\
        mining-pool and revenue allocations.')
    commands = parser.add_subparsers(dest='command', required=True)

    allocate = commands.add_parser('allocate',
                                   help='Apply a rule to a scenario file')
    allocate.add_argument('scenario', type=str, help='Scenario JSON file')
    _add_rule_arguments(allocate, default=None)

    verify = commands.add_parser('verify',
                                 help='Check axioms of a rule on scenarios')
    verify.add_argument('targets', nargs='*',
                        help="Scenario files, folders or text files listing\
                        them, followed by axioms (AF, RF,\
                        RA, OA, CP, ZP, UI, CM, SM, BT, IA, IB), 'all' for the\
                        axioms characterizing the rule (default) or 'every'")
    verify.add_argument('-b', '--battery',
                        nargs='?',
                        const='',
                        help='Check a generated battery, optionally given as\
                        seed=N',
                        default=None)
    verify.add_argument('--battery-size',
                        type=int,
                        help='Scenarios in a generated battery',
                        default=BATTERY_SIZE)
    verify.add_argument('--nonnegative',
                        action='store_true',
                        help='Generate non-negative risks only')
    _add_rule_arguments(verify, default='cmrs')

    counter = commands.add_parser('counterexamples',
                                  help='Reproduce the counterexample suite')
    counter.add_argument('--points',
                         type=int,
                         help='Grid points per factor of the two-agent Gaussian\
                         regression, at least 50',
                         default=50)

    pool = commands.add_parser('pool', help='Single mining pool payouts')
    pool.add_argument('--shares', type=str, required=True,
                      help='CSV with columns miner_id,share')
    pool.add_argument('--price', type=str, required=True,
                      help='Block price: a decimal or a value,probability CSV')
    pool.add_argument('--winner', type=str, default=None,
                      help='miner_id of the miner who issued the block')
    pool.add_argument('--realized-price', type=str, default=None,
                      help='Realized price, for a random price')
    pool.add_argument('--expected', action='store_true',
                      help='Print ex-ante expected payouts instead')

    multipool = commands.add_parser('multipool',
                                    help='Payouts across several pools')
    multipool.add_argument('--shares', type=str, required=True,
                           help='CSV with columns miner_id,pool_id,share')
    multipool.add_argument('--price', type=str, required=True,
                           help='Block price: a decimal or a CSV')
    multipool.add_argument('--pool', type=str, default=None,
                           help='pool_id of the pool that issued the block')
    multipool.add_argument('--realized-price', type=str, default=None,
                           help='Realized price, for a random price')

    multicoin = commands.add_parser('multicoin',
                                    help='Payouts across several coins')
    multicoin.add_argument('--shares', type=str, required=True,
                           help='CSV with columns miner_id,coin_id,share')
    multicoin.add_argument('--price', action='append', metavar='COIN=PRICE',
                           required=True,
                           help='Price of one coin: a decimal or a price file')
    multicoin.add_argument('--mined', action='append', metavar='COIN[=PRICE]',
                           default=[],
                           help='A coin whose block the pool issued, with its\
                           realized price when random')

    revenue = commands.add_parser('revenue',
                                  help='User-centric streaming revenue')
    revenue.add_argument('--users', type=str, required=True,
                         help='CSV with columns user_id,fee,theta,subscribed')
    revenue.add_argument('--streams', type=str, required=True,
                         help='CSV with columns artist_id,user_id,streams')

    for sub in (pool, multipool, multicoin, revenue):
        sub.add_argument('--check-cmrs', action='store_true',
                         help='Build the finite space and compare with\
                         (generalized) cmrs')
        sub.add_argument('--audit', action='store_true',
                         help='Also check AF, RF, RA/IA and OA of the reward\
                         allocation')

    for sub in (allocate, verify, counter, pool, multipool, multicoin,
                revenue):
        _add_global_arguments(sub)

    return parser


def parse_key_values(pairs, parse_json=True):
    """Turns KEY=VALUE strings into a dict; values are read as JSON when
    they parse, else kept as text."""
    params = {}
    for pair in pairs:
        key, sep, value = pair.partition('=')
        if not sep or not key:
            raise ValueError(f"expected KEY=VALUE, got '{pair}'")
        if parse_json:
            try:
                value = json.loads(value)
            except json.JSONDecodeError:
                pass
        params[key.strip()] = value
    return params


def process_paths_in_input(input_name):
    """Helper function. Process the input argument and returns the scenario
    files in path."""
    scenario_paths = []
    if os.path.isfile(input_name):
        # if input is a text file, reads paths listed in it.
        if input_name.lower().endswith(SUPPORTED_TEXT_EXT):
            scenario_paths = _read_paths_in_file(input_name)
        else:
            scenario_paths = [input_name]
    elif os.path.isdir(input_name):
        scenario_paths = _read_filenames_in_folder(input_name)
    else:
        raise FileNotFoundError(f'no scenario file or folder at {input_name}')
    return scenario_paths


def _read_paths_in_file(input_name):
    """Helper function. Reads scenario paths in input file; relative paths
    are taken from the current directory."""
    scenario_paths, aux_paths = [], []
    with open(input_name) as txt_file:
        for item in txt_file:
            item = item.strip()
            if not item or item.startswith('#'):
                continue
            if os.path.isdir(item):
                aux_paths = _read_filenames_in_folder(item)
            elif os.path.isfile(item):
                aux_paths = [item]
            else:
                raise FileNotFoundError(
                    f'{input_name}: no scenario file or folder at {item}')
            scenario_paths.extend(aux_paths)

    # remove duplicated entries, keeping the listed order
    return list(dict.fromkeys(scenario_paths))


def _read_filenames_in_folder(folder):
    """Helper function. Reads scenario filenames in folder, sorted."""
    scenario_paths = []
    for path, _, items in os.walk(folder):
        for item in items:
            item = os.path.join(path, item)
            if not item.lower().endswith(SUPPORTED_SCENARIO_EXT):
                continue
            scenario_paths.append(item)

    return sorted(scenario_paths)
