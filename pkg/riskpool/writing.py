import json
from csv import writer
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from pathlib import Path

from .prob_core import expectation

OUTPUT_DIGITS = 6

ALLOCATION_COLS = ['agent', 'E[X]', 'E[A]']
PAYOUT_COLS = ['id', 'payout']
VERDICT_COLS = ['rule', 'axiom', 'verdict', 'checked', 'skipped', 'witnesses']


def format_decimal(value, digits=OUTPUT_DIGITS):
    """Fixed-point text of a float, rounded half-even to `digits`
    fractional digits. Negative zero prints as zero."""
    quantum = Decimal(1).scaleb(-digits)
    with localcontext() as ctx:
        ctx.rounding = ROUND_HALF_EVEN
        rounded = Decimal(repr(float(value))).quantize(quantum)
    if rounded == 0:
        rounded = abs(rounded)
    return str(rounded)


def initialize_csv_file(csv_fname, columns):
    """Sets up a CSV file holding one table of results.

    Parameters
    ----------
    csv_fname : str or pathlib.Path
        The filename of the CSV file. An existing file is never overwritten;
        a numbered name is used instead.
    columns : list of str
        Header row.

    Returns
    -------
    csv_fname : pathlib.Path
        The file actually created.
    """
    csv_fname = _check_aux_file(Path(csv_fname))
    csv_fname.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_fname, 'w', newline='') as csv_file:
        writer(csv_file).writerow(columns)
    return csv_fname


def write_csv_data(csv_file, rows):
    """Helper function. Appends table rows to an open CSV file."""
    write_to_file = writer(csv_file)
    for row in rows:
        write_to_file.writerow(row)


def write_table_csv(csv_fname, header, rows):
    csv_fname = initialize_csv_file(csv_fname, header)
    with open(csv_fname, 'a', newline='') as csv_file:
        write_csv_data(csv_file, rows)
    return csv_fname


def _check_aux_file(filename):
    """Helper function. Checks if filename exists; if yes, adds a number to
    it."""
    while filename.is_file():
        name, _, number = filename.stem.rpartition('_')
        if name and number.isdigit():
            stem = f'{name}_{int(number) + 1}'
        else:
            stem = f'{filename.stem}_1'
        filename = filename.with_name(f'{stem}{filename.suffix}')
    return filename


def allocation_rows(names, vector, allocation):
    """One row per agent: name, E[X_i], E[A_i] and A_i at every outcome."""
    header = ALLOCATION_COLS + [f'w{k}' for k in range(vector.space.size)]
    rows = []
    for name, agent, share in zip(names, vector, allocation):
        rows.append([name, format_decimal(expectation(agent)),
                     format_decimal(expectation(share))]
                    + [format_decimal(v) for v in share.values])
    return header, rows


def payout_rows(names, payouts):
    return PAYOUT_COLS, [[name, format_decimal(value)]
                         for name, value in zip(names, payouts)]


def verdict_rows(reports):
    return VERDICT_COLS, [[r.rule, r.axiom, r.verdict, str(r.scenarios_checked),
                           str(r.skipped), str(len(r.witnesses))]
                          for r in reports]


def witness_lines(report, limit=5):
    """Readable lines for the first `limit` witnesses of a failed report."""
    lines = []
    for witness in report.witnesses[:limit]:
        where = f'agent {witness.agent}'
        if witness.other_agent is not None:
            where += f' vs agent {witness.other_agent}'
        if witness.outcome is not None:
            where += f', outcome {witness.outcome}'
        if witness.other_outcome is not None:
            where += f'/{witness.other_outcome}'
        note = f' ({witness.note})' if witness.note else ''
        lines.append(f'{report.axiom} {witness.scenario}: {where}, magnitude '
                     f'{witness.magnitude:.3e}{note}')
    hidden = len(report.witnesses) - limit
    if hidden > 0:
        lines.append(f'{report.axiom}: {hidden} more witness(es)')
    return lines


def render_table(header, rows):
    """Line-oriented text table with left-aligned columns."""
    table = [list(map(str, header))] + [list(map(str, row)) for row in rows]
    widths = [max(len(row[c]) for row in table) for c in range(len(header))]
    return '\n'.join('  '.join(cell.ljust(w) for cell, w in zip(row, widths))
                     .rstrip() for row in table)


def report_to_dict(report):
    return {
        'axiom': report.axiom,
        'rule': report.rule,
        'verdict': report.verdict,
        'scenarios_checked': report.scenarios_checked,
        'skipped': report.skipped,
        'notes': list(report.notes),
        'metrics': {key: float(value) for key, value in report.metrics.items()},
        'witnesses': [{'scenario': w.scenario, 'agent': w.agent,
                       'magnitude': w.magnitude, 'outcome': w.outcome,
                       'other_agent': w.other_agent,
                       'other_outcome': w.other_outcome, 'note': w.note}
                      for w in report.witnesses],
    }


def machine_document(run_report):
    """Deterministic JSON text of a run report: sorted keys, full float
    precision."""
    return json.dumps(run_report, sort_keys=True, indent=2)
