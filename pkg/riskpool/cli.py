import json
import logging
import sys
from csv import writer

import numpy as np

from . import applications as apps
from . import axiom_engine, misc, rules, writing
from . import scenarios as scen
from .prob_core import ABS_TOL, RiskPoolError

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_RULE = 3

# 'all' is the rule's characterizing axioms, 'every' is AXIOMS
AXIOM_GROUPS = ('all', 'every')


class InputError(RiskPoolError):
    """Command-line input that cannot be used (bad flags, missing seed)."""


def _say(args, text):
    """Progress lines go to stdout in table format only."""
    if args.format == 'table':
        print(f'* {text}')


def _emit_table(args, header, rows, title=None):
    """Prints a table in the requested format and mirrors it to -csv."""
    if args.format == 'table':
        if title:
            print(f'* {title}')
        print(writing.render_table(header, rows))
    elif args.format == 'csv':
        write_to_stdout = writer(sys.stdout)
        write_to_stdout.writerow(header)
        for row in rows:
            write_to_stdout.writerow(row)
    if args.path_csv:
        written = writing.write_table_csv(args.path_csv, header, rows)
        _say(args, f'table written to {written}')


def _emit_report(args, run_report):
    if args.format == 'machine':
        print(writing.machine_document(run_report))


def _run_report(args, argv, exit_status, **fields):
    report = {'command': list(argv), 'seed': getattr(args, 'seed', None),
              'allocations': {}, 'reports': [], 'exit_status': exit_status}
    report.update(fields)
    return report


def _tolerance(args):
    return ABS_TOL if args.tolerance is None else args.tolerance


def _rule_from_args(args, space, fallback=None):
    """Rule named on the command line, else the scenario's own rule, else
    cmrs."""
    if args.rule is None:
        return fallback if fallback is not None else rules.CMRS
    try:
        params = misc.parse_key_values(args.param)
    except ValueError as err:
        raise InputError(str(err)) from err
    return scen.rule_from_document({'name': args.rule, 'params': params},
                                   space, '--rule')


def cmd_allocate(args, argv):
    """Applies a rule to one scenario file and prints the allocation."""
    scenario = scen.load_scenario_file(args.scenario)
    rule = _rule_from_args(args, scenario.vector.space, scenario.rule)
    _say(args, f'applying {rule.name} to {args.scenario}')
    try:
        if scenario.partition is not None:
            allocation = rules.apply_generalized(rule, scenario.vector,
                                                 scenario.partition)
        else:
            allocation = rules.apply(rule, scenario.vector)
    except RiskPoolError as err:
        raise axiom_engine.RuleApplicationError(scenario.name, err) from err

    header, rows = writing.allocation_rows(scenario.agent_names,
                                           scenario.vector, allocation)
    _emit_table(args, header, rows)
    _emit_report(args, _run_report(
        args, argv, EXIT_PASS, rule=rule.name,
        allocations={scenario.name: {name: share.values.tolist()
                                     for name, share in
                                     zip(scenario.agent_names, allocation)}}))
    return EXIT_PASS


def _split_targets(targets):
    """Separates axiom names (and the groups 'all' and 'every') from
    scenario paths."""
    axioms, paths = [], []
    for target in targets:
        if target in axiom_engine.AXIOMS or target in AXIOM_GROUPS:
            axioms.append(target)
        else:
            paths.append(target)
    return axioms or ['all'], paths


def _expand_axioms(axioms, rule):
    """'all' stands for the axioms characterizing the rule's family, 'every'
    for every known axiom."""
    expanded = []
    for axiom in axioms:
        if axiom == 'every':
            expanded.extend(axiom_engine.AXIOMS)
        elif axiom == 'all':
            expanded.extend(axiom_engine.characterizing_axioms(rule))
        else:
            expanded.append(axiom)
    return list(dict.fromkeys(expanded))


def _battery_seed(args, targets):
    """Seed of the generated battery from `--battery seed=N`, `--battery N`
    or `--seed`. A mandatory flag in machine format."""
    value = args.battery
    if value and not value.startswith('seed=') and not value.isdigit():
        # argparse took a target for the optional battery value
        targets.insert(0, value)
        value = ''
    if value:
        seed = int(value.partition('=')[2] if value.startswith('seed=')
                   else value)
    elif args.seed is not None:
        seed = args.seed
    elif args.format == 'machine':
        raise InputError('a battery seed is mandatory in machine format')
    else:
        seed = 0
    args.seed = seed
    return seed


def cmd_verify(args, argv):
    """Runs axiom checkers on scenario files and/or a generated battery."""
    targets = list(args.targets)
    seed = _battery_seed(args, targets) if args.battery is not None else None
    axioms, paths = _split_targets(targets)

    battery = []
    for path in paths:
        for scenario_path in misc.process_paths_in_input(path):
            battery.append(scen.load_scenario_file(scenario_path))
    if seed is not None:
        battery.extend(scen.random_battery(seed, args.battery_size,
                                           nonnegative=args.nonnegative))
    if not battery:
        raise InputError('nothing to verify: give scenario files or '
                         '--battery')
    battery = scen.ScenarioSet(tuple(battery), seed=seed)

    if args.rule == 'all':
        rule_set = rules.catalog(nonnegative=args.nonnegative)
    else:
        rule = _rule_from_args(args, battery[0].vector.space)
        rule_set = {rule.name: rule}
    _say(args, f'checking {", ".join(axioms)} on {len(battery)} scenario(s)')

    matrix = {}
    for name, rule in rule_set.items():
        matrix.update(axiom_engine.property_matrix(
            {name: rule}, battery, _expand_axioms(axioms, rule),
            _tolerance(args), args.jobs))
    reports = [report for row in matrix.values() for report in row.values()]
    status = EXIT_PASS if all(r.passed for r in reports) else EXIT_FAIL

    header, rows = writing.verdict_rows(reports)
    _emit_table(args, header, rows)
    if args.format == 'table':
        for report in reports:
            for line in list(report.notes) + writing.witness_lines(report):
                print(f'  {line}')
    _emit_report(args, _run_report(
        args, argv, status,
        reports=[writing.report_to_dict(r) for r in reports]))
    return status


def cmd_counterexamples(args, argv):
    """Reproduces the independence battery, the comonotonicity conflict,
    the two-agent Gaussian regression and the backtracking scenario."""
    tol = _tolerance(args)
    rows = axiom_engine.independence_battery(tol)
    conflict = axiom_engine.conflict_demonstration(tol=tol)
    gaussian = axiom_engine.gaussian_n2_regression(args.points)
    backtracking = axiom_engine.backtracking_check(tol=tol)

    checks = {
        'independence': all(row.matches for row in rows),
        'conflict': conflict.matches,
        'gaussian_n2': gaussian.passed,
        'backtracking': backtracking.max_deviation == 0
        and backtracking.report.passed,
    }
    status = EXIT_PASS if all(checks.values()) else EXIT_FAIL

    header = ['row', 'rule'] + list(axiom_engine.INDEPENDENCE_AXIOMS) + \
        ['expected failure', 'match']
    table = []
    for row in rows:
        table.append([row.label, row.rule]
                     + [report.verdict for report in row.reports]
                     + [row.expected_failure or '-',
                        'yes' if row.matches else 'NO'])
    _emit_table(args, header, table, title='independence of AF, RF, RA, OA')

    if args.format == 'table':
        for row in rows:
            if not row.matches:
                expected = row.expected_failure or 'none'
                print(f'  {row.label}: expected failure {expected}, observed '
                      f'{", ".join(row.failures) or "none"}')
        print(f'* conflict (-S, 2S, 0) under cmrs: CM {conflict.cm.verdict}, '
              f'OA {conflict.oa.verdict}, ZP {conflict.zp.verdict}')
        for line in writing.witness_lines(conflict.cm):
            print(f'  {line}')
        metrics = gaussian.metrics
        print(f'* two-agent Gaussian: {gaussian.verdict}, A_i = S/2 within '
              f'{metrics["half_split_gap"]:.1e}, Var(A_0) '
              f'{writing.format_decimal(metrics["variance_a0"])}, stop-loss '
              f'gap {metrics["stop_loss_gap"]:.1e}')
        for line in writing.witness_lines(gaussian):
            print(f'  {line}')
        print(f'* backtracking digits: allocation == input: '
              f'{"yes" if backtracking.max_deviation == 0 else "no"} '
              f'(max deviation {backtracking.max_deviation!r}), BT '
              f'{backtracking.report.verdict}')

    _emit_report(args, _run_report(
        args, argv, status,
        checks=checks,
        independence=[{'label': row.label, 'rule': row.rule,
                       'expected_failure': row.expected_failure,
                       'observed_failures': list(row.failures),
                       'verdicts': {r.axiom: r.verdict for r in row.reports}}
                      for row in rows],
        reports=[writing.report_to_dict(r) for r in
                 (conflict.cm, conflict.oa, conflict.zp, gaussian,
                  backtracking.report)],
        backtracking_max_deviation=backtracking.max_deviation))
    return status


def _index_of(names, value, error, what):
    if value is None:
        return None
    if value not in names:
        raise error(f"unknown {what} '{value}'; expected one of "
                    f"{', '.join(names)}")
    return names.index(value)


def _realized_price(args):
    if args.realized_price is None:
        return None
    return apps.parse_decimal(args.realized_price, '--realized-price')


def _finish_application(args, argv, names, payouts, model_builder):
    """Prints payouts, then runs the optional cmrs comparison and reward
    audit on the constructed space."""
    header, rows = writing.payout_rows(names, payouts)
    _emit_table(args, header, rows)
    fields = {'allocations': {'payouts': dict(zip(names,
                                                  np.asarray(payouts).tolist()))}}
    status = EXIT_PASS
    if args.check_cmrs or args.audit:
        model = model_builder()
        if args.check_cmrs:
            deviation = apps.cmrs_deviation(model)
            _say(args, f'max deviation {writing.format_decimal(deviation)}')
            fields['max_deviation'] = deviation
            if deviation > _tolerance(args):
                status = EXIT_FAIL
        if args.audit:
            reports = apps.reward_axiom_reports(model, _tolerance(args))
            header, rows = writing.verdict_rows(reports)
            _emit_table(args, header, rows)
            fields['reports'] = [writing.report_to_dict(r) for r in reports]
            if not all(r.passed for r in reports):
                status = EXIT_FAIL
    _emit_report(args, _run_report(args, argv, status, **fields))
    return status


def cmd_pool(args, argv):
    spec = apps.ingest_pool(args.shares, args.price)
    if args.expected:
        payouts = apps.expected_pool_payout(spec)
    else:
        winner = _index_of(spec.miners, args.winner, apps.WinnerOutOfRange,
                           'miner')
        payouts = apps.pool_allocate(spec, winner, _realized_price(args))
    _say(args, f'pool of {len(spec.miners)} miner(s), share '
               f'{writing.format_decimal(spec.pool_share)}')
    return _finish_application(args, argv, spec.miners, payouts,
                               lambda: apps.pool_as_risk_vector(spec))


def cmd_multipool(args, argv):
    spec = apps.ingest_multipool(args.shares, args.price)
    pool = _index_of(spec.pools, args.pool, apps.PoolOutOfRange, 'pool')
    payouts = apps.multi_pool_allocate(spec, pool, _realized_price(args))
    return _finish_application(args, argv, spec.miners, payouts,
                               lambda: apps.multi_pool_as_risk_vector(spec))


def cmd_multicoin(args, argv):
    try:
        prices = misc.parse_key_values(args.price, parse_json=False)
        mined = misc.parse_key_values(
            [m if '=' in m else f'{m}=' for m in args.mined], parse_json=False)
    except ValueError as err:
        raise InputError(str(err)) from err
    spec = apps.ingest_multicoin(args.shares, prices)
    unknown = sorted(set(mined) - set(spec.coins))
    if unknown:
        raise InputError(f'unknown coin(s) {", ".join(unknown)}')
    realized = []
    for coin in spec.coins:
        price = mined.get(coin) or None
        realized.append((coin in mined, None if price is None else
                         apps.parse_decimal(price, f'--mined {coin}')))
    payouts = apps.multi_coin_allocate(spec, realized)
    return _finish_application(args, argv, spec.miners, payouts,
                               lambda: apps.multi_coin_as_risk_vector(spec))


def cmd_revenue(args, argv):
    spec = apps.ingest_revenue(args.users, args.streams)
    if not spec.realized:
        _say(args, 'subscriptions given as probabilities: expected payouts')
    payouts = apps.revenue_share(spec)
    return _finish_application(args, argv, spec.artists, payouts,
                               lambda: apps.revenue_as_risk_vector(spec))


COMMANDS = {
    'allocate': cmd_allocate,
    'verify': cmd_verify,
    'counterexamples': cmd_counterexamples,
    'pool': cmd_pool,
    'multipool': cmd_multipool,
    'multicoin': cmd_multicoin,
    'revenue': cmd_revenue,
}


def run(args, argv=()):
    """Runs one parsed command and maps errors to exit codes: 2 for input
    errors, 3 for rule-application errors."""
    try:
        return COMMANDS[args.command](args, argv)
    except axiom_engine.RuleApplicationError as err:
        print(f'* Sorry, could not apply the rule: {err}', file=sys.stderr)
        return EXIT_RULE
    except (RiskPoolError, OSError, json.JSONDecodeError) as err:
        print(f'* Sorry, could not read the input: {err}', file=sys.stderr)
        return EXIT_INPUT


def configure_logging(verbose=False):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')


def main(argv=None):
    """In-process entry point; riskshare.py also swaps in the disk cache."""
    argv = sys.argv[1:] if argv is None else list(argv)
    args = misc._generate_parser().parse_args(argv)
    configure_logging(args.verbose)
    return run(args, argv)
