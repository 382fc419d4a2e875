import itertools
import logging
import math
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np
import pandas as pd

from . import axiom_engine, rules
from .prob_core import (ABS_TOL, PROB_TOL, Partition, RiskPoolError,
                        RiskVector, _validate_weights, make_space)
from .scenarios import Scenario

logger = logging.getLogger(__name__)

# attribution ratios of one user must sum to one within this tolerance
RATIO_TOL = 1e-9

# revenue models live on (artists + 1) ** users outcomes
REVENUE_MODEL_MAX_USERS = 6

POOL_COLUMNS = ('miner_id', 'share')
MULTIPOOL_COLUMNS = ('miner_id', 'pool_id', 'share')
MULTICOIN_COLUMNS = ('miner_id', 'coin_id', 'share')
PRICE_COLUMNS = ('value', 'probability')
USER_COLUMNS = ('user_id', 'fee', 'theta', 'subscribed')
STREAM_COLUMNS = ('artist_id', 'user_id', 'streams')


class SchemaError(RiskPoolError):
    pass


class NegativeShare(RiskPoolError):
    pass


class SharesExceedOne(RiskPoolError):
    pass


class ColumnNotNormalized(RiskPoolError):
    pass


class WinnerOutOfRange(RiskPoolError):
    pass


class PoolOutOfRange(RiskPoolError):
    pass


class PriceNotInSupport(RiskPoolError):
    pass


class BadPrice(RiskPoolError):
    pass


class BadFee(RiskPoolError):
    pass


class ModelTooLarge(RiskPoolError):
    pass


@dataclass(frozen=True)
class PriceLaw:
    """Finite price distribution, independent of block issuance."""
    values: tuple
    probs: tuple

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if len(values) != len(self.probs):
            raise BadPrice(f'{len(values)} prices but {len(self.probs)} '
                           f'probabilities')
        if not all(v > 0 for v in values):
            raise BadPrice(f'prices must be strictly positive, got {values}')
        probs = tuple(_validate_weights(self.probs, BadPrice).tolist())
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'probs', probs)

    @classmethod
    def constant(cls, value):
        return cls((value,), (1.0,))

    @property
    def mean(self):
        return math.fsum(v * p for v, p in zip(self.values, self.probs))

    def index_of(self, price):
        for idx, value in enumerate(self.values):
            if abs(value - price) <= ABS_TOL * max(1.0, abs(value)):
                return idx
        raise PriceNotInSupport(f'price {price!r} is not in the support '
                                f'{list(self.values)}')

    def resolve(self, price):
        """The realized price: `price` if given (it must lie in the support),
        else the only value of a constant law."""
        if price is None:
            if len(self.values) != 1:
                raise PriceNotInSupport('a realized price is needed for a '
                                        'random price')
            return self.values[0]
        return self.values[self.index_of(price)]


def _default_names(prefix, count):
    return tuple(f'{prefix}{idx}' for idx in range(count))


def _check_shares(shares, what):
    shares = np.asarray(shares, dtype=float)
    if np.any(shares < 0):
        raise NegativeShare(f'{what}: negative share {shares.min()!r}')
    total = math.fsum(shares.ravel())
    if total > 1 + PROB_TOL:
        raise SharesExceedOne(f'{what}: shares sum to {total!r} > 1')
    return shares


@dataclass(frozen=True)
class PoolSpec:
    """Single pool: P(D_i) per miner, mutually exclusive events."""
    shares: tuple
    price: PriceLaw
    miners: tuple = None

    def __post_init__(self):
        shares = _check_shares(self.shares, 'pool')
        object.__setattr__(self, 'shares', tuple(shares.tolist()))
        if self.miners is None:
            object.__setattr__(self, 'miners',
                               _default_names('m', len(shares)))

    @property
    def pool_share(self):
        return math.fsum(self.shares)


@dataclass(frozen=True)
class MultiPoolSpec:
    """memberships[i][j] = P(D_i and E_j): miner i issues the block through
    pool j."""
    memberships: tuple
    price: PriceLaw
    miners: tuple = None
    pools: tuple = None

    def __post_init__(self):
        q = _check_shares(self.memberships, 'multi-pool')
        if q.ndim != 2:
            raise SchemaError('memberships must be a miners x pools matrix')
        object.__setattr__(self, 'memberships',
                           tuple(tuple(row) for row in q.tolist()))
        if self.miners is None:
            object.__setattr__(self, 'miners', _default_names('m', q.shape[0]))
        if self.pools is None:
            object.__setattr__(self, 'pools', _default_names('p', q.shape[1]))

    @property
    def matrix(self):
        return np.array(self.memberships)

    @property
    def pool_shares(self):
        return self.matrix.sum(axis=0)


@dataclass(frozen=True)
class MultiCoinSpec:
    """shares[j][i] = P(D_ij): miner i issues the block of coin j. Coins
    are issued independently, each with its own price law."""
    shares: tuple
    prices: tuple
    miners: tuple = None
    coins: tuple = None

    def __post_init__(self):
        d = np.asarray(self.shares, dtype=float)
        if d.ndim != 2 or d.shape[0] != len(self.prices):
            raise SchemaError('expected one share row and one price law per '
                              'coin')
        for j, row in enumerate(d):
            _check_shares(row, f'coin {j}')
        object.__setattr__(self, 'shares',
                           tuple(tuple(row) for row in d.tolist()))
        object.__setattr__(self, 'prices', tuple(self.prices))
        if self.miners is None:
            object.__setattr__(self, 'miners', _default_names('m', d.shape[1]))
        if self.coins is None:
            object.__setattr__(self, 'coins', _default_names('c', d.shape[0]))

    @property
    def matrix(self):
        return np.array(self.shares)


@dataclass(frozen=True)
class RevenueSpec:
    """User-centric revenue sharing.

    fees[j] is the distributable amount p_j of user j, subscribed[j] a
    realized indicator or a subscription probability, ratios[i][j] the
    share of user j's streams going to artist i.
    """
    fees: tuple
    subscribed: tuple
    ratios: tuple
    artists: tuple = None
    users: tuple = None

    def __post_init__(self):
        fees = np.asarray(self.fees, dtype=float)
        subscribed = np.asarray(self.subscribed, dtype=float)
        r = np.asarray(self.ratios, dtype=float)
        if not np.all(fees > 0):
            raise BadFee(f'fees must be strictly positive, got {fees.tolist()}')
        if np.any((subscribed < 0) | (subscribed > 1)):
            raise SchemaError('subscriptions must be indicators or '
                              'probabilities in [0, 1]')
        if r.ndim != 2 or r.shape[1] != fees.size or subscribed.size != fees.size:
            raise SchemaError('ratios must be an artists x users matrix '
                              'matching the fees')
        if np.any(r < 0):
            raise NegativeShare('attribution ratios must be non-negative')
        for j, column_sum in enumerate(r.sum(axis=0)):
            if abs(column_sum - 1) > RATIO_TOL:
                raise ColumnNotNormalized(
                    f'ratios of user {j} sum to {column_sum!r}, not 1')
        object.__setattr__(self, 'fees', tuple(fees.tolist()))
        object.__setattr__(self, 'subscribed', tuple(subscribed.tolist()))
        object.__setattr__(self, 'ratios', tuple(tuple(row) for row in r.tolist()))
        if self.artists is None:
            object.__setattr__(self, 'artists', _default_names('a', r.shape[0]))
        if self.users is None:
            object.__setattr__(self, 'users', _default_names('u', r.shape[1]))

    @property
    def realized(self):
        return all(s in (0.0, 1.0) for s in self.subscribed)


def pool_allocate(spec, winner=None, price=None):
    """Proportional pool reward.

    Parameters
    ----------
    spec : PoolSpec
    winner : int, optional
        Index of the miner who issued the block; None if no pool miner did.
    price : float, optional
        Realized price, from the support of `spec.price`. May be omitted for
        a constant price.

    Returns
    -------
    payouts : numpy.ndarray
        shares_i / sum(shares) * price for every miner when a block was
        issued, zeros otherwise.
    """
    shares = np.array(spec.shares)
    if winner is None:
        return np.zeros_like(shares)
    if not 0 <= winner < shares.size:
        raise WinnerOutOfRange(f'winner {winner} is not one of the '
                               f'{shares.size} miners')
    if shares[winner] == 0:
        raise WinnerOutOfRange(f'miner {winner} has no share and cannot '
                               f'issue a block')
    return shares / spec.pool_share * spec.price.resolve(price)


def expected_pool_payout(spec):
    """Ex-ante payouts shares_i * E[price]."""
    return np.array(spec.shares) * spec.price.mean


def multi_pool_allocate(spec, pool=None, price=None):
    """payout_i = q[i][pool] / P(E_pool) * price if `pool` issued the block,
    else zeros."""
    q = spec.matrix
    if pool is None:
        return np.zeros(q.shape[0])
    if not 0 <= pool < q.shape[1]:
        raise PoolOutOfRange(f'pool {pool} is not one of the {q.shape[1]} '
                             f'pools')
    pool_share = q[:, pool].sum()
    if pool_share == 0:
        raise PoolOutOfRange(f'pool {pool} has no share and cannot issue a '
                             f'block')
    return q[:, pool] / pool_share * spec.price.resolve(price)


def multi_coin_allocate(spec, realized):
    """Sums the per-coin proportional payouts of every mined coin.

    Parameters
    ----------
    spec : MultiCoinSpec
    realized : sequence of (bool, float or None)
        Per coin: whether the pool issued its block, and the realized price.

    Returns
    -------
    payouts : numpy.ndarray
    """
    d = spec.matrix
    if len(realized) != d.shape[0]:
        raise SchemaError(f'expected {d.shape[0]} realized coin events, got '
                          f'{len(realized)}')
    payouts = np.zeros(d.shape[1])
    for j, (mined, price) in enumerate(realized):
        if not mined:
            continue
        coin_share = d[j].sum()
        if coin_share == 0:
            raise WinnerOutOfRange(f'coin {j} has no share and cannot be mined')
        payouts += d[j] / coin_share * spec.prices[j].resolve(price)
    return payouts


def revenue_share(spec):
    """payout_i = sum over users j of ratios[i][j] * fee_j * subscribed_j;
    expected payouts when `subscribed` holds probabilities."""
    r = np.array(spec.ratios)
    return r @ (np.array(spec.fees) * np.array(spec.subscribed))


@dataclass(frozen=True, eq=False)
class MarketModel:
    """An application on its constructed finite space.

    `vector` holds the rewards X_i per outcome, `outcomes` a readable label
    per outcome, `target` the target information (None for plain cmrs) and
    `payouts` the closed-form allocation evaluated at every outcome.
    """
    vector: RiskVector
    outcomes: tuple
    target: Partition
    payouts: np.ndarray

    @property
    def space(self):
        return self.vector.space


def _product_space(factors):
    """Helper function. Product of independent factors, each a list of
    (label, probability); outcomes of probability zero are dropped."""
    labels, probs = [], []
    for combination in itertools.product(*factors):
        prob = math.prod(p for _, p in combination)
        if prob > 0:
            labels.append(tuple(label for label, _ in combination))
            probs.append(prob)
    probs = np.array(probs)
    return labels, make_space(probs / math.fsum(probs))


def _winner_factor(shares):
    """Helper function. Which miner (or nobody, label None) issues a block."""
    factor = [(i, s) for i, s in enumerate(shares)]
    factor.append((None, max(0.0, 1 - math.fsum(shares))))
    return factor


def _price_factor(law):
    return list(zip(law.values, law.probs))


def _model(matrix, labels, space, target, payouts):
    return MarketModel(RiskVector.from_matrix(space, matrix), tuple(labels),
                       target, np.asarray(payouts))


def pool_as_risk_vector(spec):
    """Single pool on the space (winner or nobody) x price.

    X_i = price * 1{miner i issues the block}; cmrs on this vector is the
    proportional reward outcome by outcome.
    """
    labels, space = _product_space([_winner_factor(spec.shares),
                                    _price_factor(spec.price)])
    n = len(spec.shares)
    matrix = np.zeros((n, space.size))
    payouts = np.zeros_like(matrix)
    for k, (winner, price) in enumerate(labels):
        if winner is not None:
            matrix[winner, k] = price
        payouts[:, k] = pool_allocate(spec, winner, price)
    return _model(matrix, labels, space, None, payouts)


def multi_pool_as_risk_vector(spec):
    """Multiple pools on the space (miner, pool) x price; the target
    information is the winning pool together with the price."""
    q = spec.matrix
    issuers = [((i, j), q[i, j]) for i in range(q.shape[0])
               for j in range(q.shape[1])]
    issuers.append((None, max(0.0, 1 - math.fsum(q.ravel()))))
    labels, space = _product_space([issuers, _price_factor(spec.price)])
    matrix = np.zeros((q.shape[0], space.size))
    payouts = np.zeros_like(matrix)
    keys = []
    for k, (issuer, price) in enumerate(labels):
        pool = None if issuer is None else issuer[1]
        if issuer is not None:
            matrix[issuer[0], k] = price
        payouts[:, k] = multi_pool_allocate(spec, pool, price)
        keys.append((-1 if pool is None else pool, price))
    return _model(matrix, labels, space, _partition_of_keys(space, keys),
                  payouts)


def multi_coin_as_risk_vector(spec):
    """Multiple coins on the product over coins of (winner x price); the
    target information is every coin's mined indicator and price."""
    d = spec.matrix
    factors = []
    for j in range(d.shape[0]):
        factors.append(_winner_factor(d[j]))
        factors.append(_price_factor(spec.prices[j]))
    labels, space = _product_space(factors)
    matrix = np.zeros((d.shape[1], space.size))
    payouts = np.zeros_like(matrix)
    keys = []
    for k, label in enumerate(labels):
        events = list(zip(label[::2], label[1::2]))
        for j, (winner, price) in enumerate(events):
            if winner is not None:
                matrix[winner, k] += price
        payouts[:, k] = multi_coin_allocate(
            spec, [(winner is not None, price) for winner, price in events])
        keys.append(tuple((winner is not None, price) for winner, price in events))
    return _model(matrix, labels, space, _partition_of_keys(space, keys),
                  payouts)


def revenue_as_risk_vector(spec):
    """Revenue sharing on the product over users of (artist credited with the
    subscription, or no subscription), with P(D_ij) = subscribed_j *
    ratios[i][j]. The target information is which users subscribed."""
    r = np.array(spec.ratios)
    n_artists, n_users = r.shape
    if n_users > REVENUE_MODEL_MAX_USERS:
        raise ModelTooLarge(f'the revenue model is limited to '
                            f'{REVENUE_MODEL_MAX_USERS} users, got {n_users}')
    factors = []
    for j, sub in enumerate(spec.subscribed):
        factor = [(i, sub * r[i, j]) for i in range(n_artists)]
        factor.append((None, 1 - sub))
        factors.append(factor)
    labels, space = _product_space(factors)
    fees = np.array(spec.fees)
    matrix = np.zeros((n_artists, space.size))
    payouts = np.zeros_like(matrix)
    keys = []
    for k, label in enumerate(labels):
        flags = np.array([artist is not None for artist in label], dtype=float)
        for j, artist in enumerate(label):
            if artist is not None:
                matrix[artist, k] += fees[j]
        payouts[:, k] = r @ (fees * flags)
        keys.append(tuple(flags))
    return _model(matrix, labels, space, _partition_of_keys(space, keys),
                  payouts)


def _partition_of_keys(space, keys):
    """Helper function. Partition whose blocks are the outcomes sharing a
    key."""
    codes = {key: idx for idx, key in enumerate(dict.fromkeys(keys))}
    return Partition(space, np.array([codes[key] for key in keys]))


def cmrs_deviation(model, closed_form=None):
    """Largest gap between the closed-form payouts and (generalized) cmrs
    on the model's constructed space.

    Parameters
    ----------
    model : MarketModel
    closed_form : array, optional
        n x m payouts to compare; defaults to `model.payouts`.

    Returns
    -------
    deviation : float
    """
    if model.target is None:
        allocation = rules.cmrs(model.vector)
    else:
        allocation = rules.generalized_cmrs(model.vector, model.target)
    closed_form = model.payouts if closed_form is None else closed_form
    return float(np.max(np.abs(allocation.matrix - np.asarray(closed_form))))


def reward_axiom_reports(model, tol=ABS_TOL):
    """AF, RF, RA (IA with target information) and OA for the cmrs reward
    allocation of a model.

    Rewards are gains; the checks run on the negated, loss-signed vector,
    where RF reads A_i >= inf X_i for the rewards.
    """
    losses = RiskVector(tuple(-agent for agent in model.vector))
    scenario = Scenario('reward-model', losses, model.target)
    rule = rules.CMRS if model.target is None else rules.GENERALIZED_CMRS
    measurability = 'RA' if model.target is None else 'IA'
    return tuple(axiom_engine.check_axiom(axiom, rule, scenario, tol)
                 for axiom in ('AF', 'RF', measurability, 'OA'))


def parse_decimal(text, where):
    """Parses a decimal field exactly, then converts it to float."""
    try:
        value = Decimal(str(text).strip())
    except InvalidOperation:
        raise SchemaError(f'{where}: {text!r} is not a decimal number') from None
    if not value.is_finite():
        raise SchemaError(f'{where}: {text!r} is not a finite number')
    return float(value)


def read_table(path, columns):
    """Reads a CSV file as strings and checks its header.

    Parameters
    ----------
    path : str or pathlib.Path
    columns : sequence of str
        Required column names.

    Returns
    -------
    table : pandas.DataFrame
        `attrs['source']` keeps the file name for error messages.
    """
    try:
        table = pd.read_csv(path, dtype=str, skipinitialspace=True)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as err:
        raise SchemaError(f'{path}: {err}') from err
    except UnicodeDecodeError as err:
        raise SchemaError(f'{path}: not UTF-8 text: {err.reason}') from err
    table.attrs['source'] = str(path)
    _check_columns(table, columns)
    return table


def _source(table):
    return table.attrs.get('source', '<table>')


def _check_columns(table, columns):
    missing = [c for c in columns if c not in table.columns]
    if missing:
        raise SchemaError(f'{_source(table)}: missing column(s) '
                          f'{", ".join(missing)}; expected {", ".join(columns)}')
    for row, record in enumerate(table[list(columns)].itertuples(index=False),
                                 start=1):
        for column, value in zip(columns, record):
            if pd.isna(value) or not str(value).strip():
                raise SchemaError(f'{_source(table)}: row {row}, column '
                                  f'{column}: empty value')


def _numbers(table, column):
    return [parse_decimal(value, f'{_source(table)}: row {row}, column {column}')
            for row, value in enumerate(table[column], start=1)]


def _labels(table, column):
    return [str(value).strip() for value in table[column]]


def _check_unique(table, columns):
    duplicated = table.duplicated(subset=list(columns))
    if duplicated.any():
        row = int(np.flatnonzero(duplicated.to_numpy())[0]) + 1
        raise SchemaError(f'{_source(table)}: row {row}: duplicate '
                          f'{"/".join(columns)}')


def _non_negative(table, column):
    values = _numbers(table, column)
    for row, value in enumerate(values, start=1):
        if value < 0:
            raise NegativeShare(f'{_source(table)}: row {row}, column '
                                f'{column}: negative value {value!r}')
    return values


def parse_price(spec):
    """Price law from a decimal ("100"), or a file holding either one
    decimal or value,probability rows."""
    if isinstance(spec, PriceLaw):
        return spec
    text = str(spec).strip()
    if Path(text).is_file():
        try:
            fields = Path(text).read_text(encoding='utf-8').split()
        except UnicodeDecodeError as err:
            raise SchemaError(f'{text}: not UTF-8 text: {err.reason}') from err
        if len(fields) == 1 and ',' not in fields[0]:
            return PriceLaw.constant(parse_decimal(fields[0], text))
        table = read_table(text, PRICE_COLUMNS)
        return PriceLaw(tuple(_numbers(table, 'value')),
                        tuple(_numbers(table, 'probability')))
    try:
        return PriceLaw.constant(parse_decimal(text, 'price'))
    except SchemaError as err:
        raise BadPrice(f'price {text!r} is neither a decimal nor a price '
                       f'file') from err


def _pivot(table, row_key, column_key, value_key):
    """Helper function. Dense matrix from (row label, column label, value)
    records, with labels in order of first appearance."""
    _check_unique(table, (row_key, column_key))
    rows = list(dict.fromkeys(_labels(table, row_key)))
    columns = list(dict.fromkeys(_labels(table, column_key)))
    matrix = np.zeros((len(rows), len(columns)))
    for r, c, v in zip(_labels(table, row_key), _labels(table, column_key),
                       _non_negative(table, value_key)):
        matrix[rows.index(r), columns.index(c)] = v
    return matrix, tuple(rows), tuple(columns)


def ingest_contributions(kind, tables, prices=None):
    """Builds a validated application spec from tabular rows.

    Parameters
    ----------
    kind : str
        'pool', 'multipool', 'multicoin' or 'revenue'.
    tables : pandas.DataFrame or tuple of DataFrames
        Rows following the CSV schemas (string cells); for 'revenue' the
        (users, streams) pair.
    prices : PriceLaw or dict, optional
        The price law ('pool', 'multipool') or coin id -> PriceLaw
        ('multicoin').

    Returns
    -------
    spec : PoolSpec, MultiPoolSpec, MultiCoinSpec or RevenueSpec
    """
    if kind == 'pool':
        _check_columns(tables, POOL_COLUMNS)
        _check_unique(tables, ('miner_id',))
        return PoolSpec(tuple(_non_negative(tables, 'share')), prices,
                        tuple(_labels(tables, 'miner_id')))
    if kind == 'multipool':
        _check_columns(tables, MULTIPOOL_COLUMNS)
        q, miners, pools = _pivot(tables, 'miner_id', 'pool_id', 'share')
        return MultiPoolSpec(q, prices, miners, pools)
    if kind == 'multicoin':
        _check_columns(tables, MULTICOIN_COLUMNS)
        d, coins, miners = _pivot(tables, 'coin_id', 'miner_id', 'share')
        missing = [coin for coin in coins if coin not in (prices or {})]
        if missing:
            raise BadPrice(f'no price given for coin(s) {", ".join(missing)}')
        return MultiCoinSpec(d, tuple(prices[coin] for coin in coins), miners,
                             coins)
    if kind == 'revenue':
        return _ingest_revenue(*tables)
    raise SchemaError(f"unknown contribution kind '{kind}'")


def _ingest_revenue(users, streams):
    _check_columns(users, USER_COLUMNS)
    _check_columns(streams, STREAM_COLUMNS)
    _check_unique(users, ('user_id',))
    user_ids = _labels(users, 'user_id')
    fees = []
    for row, (fee, theta) in enumerate(zip(_numbers(users, 'fee'),
                                           _numbers(users, 'theta')), start=1):
        if not (fee > 0 and 0 < theta <= 1):
            raise SchemaError(f'{_source(users)}: row {row}: need fee > 0 and '
                              f'0 < theta <= 1, got {fee!r}, {theta!r}')
        fees.append(fee * theta)
    subscribed = []
    for row, text in enumerate(users['subscribed'], start=1):
        flag = str(text).strip().lower()
        if flag in ('true', 'false'):
            subscribed.append(float(flag == 'true'))
        else:
            subscribed.append(parse_decimal(
                text, f'{_source(users)}: row {row}, column subscribed'))

    unknown = sorted(set(_labels(streams, 'user_id')) - set(user_ids))
    if unknown:
        raise SchemaError(f'{_source(streams)}: unknown user(s) '
                          f'{", ".join(unknown)}')
    counts, artists, stream_users = _pivot(streams, 'artist_id', 'user_id',
                                           'streams')
    matrix = np.zeros((len(artists), len(user_ids)))
    for c, user in enumerate(stream_users):
        matrix[:, user_ids.index(user)] = counts[:, c]
    totals = matrix.sum(axis=0)
    silent = [user_ids[j] for j in np.flatnonzero(totals == 0)]
    if silent:
        raise ColumnNotNormalized(f'{_source(streams)}: no streams for '
                                  f'user(s) {", ".join(silent)}')
    return RevenueSpec(tuple(fees), tuple(subscribed), matrix / totals,
                       tuple(artists), tuple(user_ids))


def ingest_pool(path, price):
    return ingest_contributions('pool', read_table(path, POOL_COLUMNS),
                                parse_price(price))


def ingest_multipool(path, price):
    return ingest_contributions('multipool',
                                read_table(path, MULTIPOOL_COLUMNS),
                                parse_price(price))


def ingest_multicoin(path, prices):
    """`prices` maps coin id to a price spec (decimal or price file)."""
    laws = {coin: parse_price(spec) for coin, spec in prices.items()}
    return ingest_contributions('multicoin',
                                read_table(path, MULTICOIN_COLUMNS), laws)


def ingest_revenue(users_path, streams_path):
    return ingest_contributions('revenue',
                                (read_table(users_path, USER_COLUMNS),
                                 read_table(streams_path, STREAM_COLUMNS)))
