"""
Reusable sub-circuits: the sorted-permutation lookup argument, batched and
byte-wise range checks, conditional less-than, is-zero, running
accumulators, multiset shuffles and set disjointness.

Every builder takes a CircuitBuilder, opens its own region and returns a
witness record naming the columns and gates it created.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

from config import get_config
from constraints import (
    CircuitBuilder,
    ColumnId,
    Constant,
    Expression,
    ExprLike,
    as_expr,
    sum_exprs,
)
from errors import WitnessInfeasible
from field import MODULUS, inv

logger = logging.getLogger(__name__)


def align_permutation(P: Sequence[int], Q: Sequence[int]) -> Tuple[List[int], List[int]]:
    """
    Sort P and align Q against it so that every row where P' takes a new
    value has Q' equal to it. Leftover Q values fill the other rows in
    ascending order.

    Raises:
        WitnessInfeasible: If some P value does not occur in Q
    """
    p_sorted = sorted(P)
    remaining = Counter(Q)
    q_sorted: List[Optional[int]] = [None] * len(p_sorted)
    for i, v in enumerate(p_sorted):
        if i == 0 or v != p_sorted[i - 1]:
            if remaining[v] == 0:
                raise WitnessInfeasible(f"value {v} does not occur in the lookup table")
            remaining[v] -= 1
            q_sorted[i] = v
    leftovers = iter(sorted(remaining.elements()))
    for i, v in enumerate(q_sorted):
        if v is None:
            q_sorted[i] = next(leftovers)
    return p_sorted, q_sorted


@dataclass
class PermutationWitness:
    P: List[int]
    P_prime: List[int]
    Q: List[int]
    Q_prime: List[int]
    Z: List[int]
    alpha: int
    beta: int
    p_sorted: ColumnId
    q_sorted: ColumnId
    z: ColumnId
    order_gate: str
    product_gate: str


def build_permutation_argument(b: CircuitBuilder, p_col: ColumnId, q_col: ColumnId, n: int,
                               name: str = 'permutation') -> PermutationWitness:
    """
    Prove every value of P occurs in Q through a sorted permutation pair
    (P', Q') and a grand-product accumulator Z over challenges alpha, beta.
    P and Q must both have n rows.
    """
    with b.region(name):
        P = b.column_values(p_col, n)
        Q = b.column_values(q_col, n)
        p_prime, q_prime = align_permutation(P, Q)
        ps = b.advice('p_sorted', p_prime)
        qs = b.advice('q_sorted', q_prime)
        first = b.first_row()
        active = b.selector(0, n)

        order_gate = b.gate('order', active, [
            (ps.cur - qs.cur) * ((1 - first.cur) * (ps.cur - ps.prev) + first.cur),
        ])

        alpha, a = b.challenge('alpha', [p_col, q_col, ps, qs])
        beta, bt = b.challenge('beta', [])

        z = [1]
        for i in range(n):
            num = (P[i] + a) * (Q[i] + bt) % MODULUS
            den = (p_prime[i] + a) * (q_prime[i] + bt) % MODULUS
            z.append(z[-1] * num % MODULUS * inv(den) % MODULUS)
        zc = b.advice('z', z)
        product_gate = b.gate('grand_product', active, [
            zc.next * (ps.cur + alpha) * (qs.cur + beta) - zc.cur * (p_col.cur + alpha) * (q_col.cur + beta),
        ])
        b.constrain_constant((zc, 0), 1)
        b.constrain_constant((zc, n), 1)
        logger.debug("permutation argument %s over %d rows", b.qualify(name), n)

    return PermutationWitness(P, p_prime, Q, q_prime, z, a, bt, ps, qs, zc, order_gate, product_gate)


@dataclass
class RangeCheckBatch:
    values: List[int]
    table: ColumnId
    permutation: PermutationWitness
    rows: int


def build_range_check_batch(b: CircuitBuilder, values_col: ColumnId, n: int, t: int,
                            name: str = 'range') -> RangeCheckBatch:
    """
    Check n values against the Fixed table [0..t] (inclusive) with one
    permutation argument sized max(n, t + 1).

    Raises:
        ValueError: If the table would exceed MAX_TABLE_ROWS
        WitnessInfeasible: If a value lies outside [0, t]
    """
    if t + 1 > get_config().MAX_TABLE_ROWS:
        raise ValueError(f"range table of {t + 1} rows exceeds MAX_TABLE_ROWS")
    with b.region(name):
        values = b.column_values(values_col, n)
        for v in values:
            if v > t:
                raise WitnessInfeasible(f"range check: value outside [0, {t}]")
        rows = max(n, t + 1)
        table = b.fixed('table', list(range(t + 1)) + [t] * (rows - t - 1))
        if rows == n:
            p_col = values_col
        else:
            p_col = b.advice('padded', values + [0] * (rows - n))
            for i in range(n):
                b.copy((values_col, i), (p_col, i))
        perm = build_permutation_argument(b, p_col, table, rows)
        b.annotate('range_check_batch', {'P': n, 'Q': t + 1},
                   expected={'lookup_rows': max(n, t + 1)},
                   members={'lookup_rows': [perm.order_gate]})
    return RangeCheckBatch(values, table, perm, rows)


@dataclass
class U8Decomposition:
    N: List[int]
    limbs: List[ColumnId]
    decompose_gate: str
    lookups: List[str]


def decompose_u8(value: int, limbs: int = 8) -> List[int]:
    """Little-endian byte limbs of value."""
    return [(value >> (8 * i)) & 0xFF for i in range(limbs)]


def build_u8_range_check(b: CircuitBuilder, value: ExprLike, n: int, limbs: int = 8,
                         name: str = 'u8') -> U8Decomposition:
    """
    Range-check value < 2^(8*limbs) on rows [0, n) by byte decomposition,
    each limb looked up in the shared 256-entry table.

    Raises:
        WitnessInfeasible: If a value does not fit in the limbs
    """
    value = as_expr(value)
    bound = 1 << (8 * limbs)
    with b.region(name):
        values = b.evaluate(value, n)
        if any(v >= bound for v in values):
            raise WitnessInfeasible(f"value does not fit in {limbs} bytes")
        cols = [b.advice(f'c{i}', [(v >> (8 * i)) & 0xFF for v in values]) for i in range(limbs)]
        active = b.selector(0, n)
        decompose_gate = b.gate('decompose', active, [
            value - sum_exprs(c.cur * (1 << (8 * i)) for i, c in enumerate(cols)),
        ])
        table = b.u8_table()
        lookups = [b.lookup(f'limb{i}', active, [c.cur], [table]) for i, c in enumerate(cols)]
        b.annotate('u8_range_check', {'P': n, 'limbs': limbs},
                   expected={'lookup_rows': limbs * n, 'decompositions': n},
                   members={'lookup_rows': lookups, 'decompositions': [decompose_gate]})
    return U8Decomposition(values, cols, decompose_gate, lookups)


@dataclass
class LessThanWitness:
    x: List[int]
    t: List[int]
    u: int
    check: List[int]
    check_col: Optional[ColumnId]
    diff: ColumnId
    shifted: ColumnId
    predicate: Expression
    shift_gate: str
    range_check: Union[U8Decomposition, RangeCheckBatch]


def _u8_limbs(u: int) -> Optional[int]:
    bits = u.bit_length() - 1
    if u > 1 and u & (u - 1) == 0 and bits % 8 == 0:
        return bits // 8
    return None


def build_less_than(b: CircuitBuilder, x: ExprLike, t: ExprLike, n: int, u: Optional[int] = None,
                    check_values: Optional[Sequence[int]] = None, expect: Optional[int] = None,
                    name: str = 'less_than') -> LessThanWitness:
    """
    Prove 0 <= (x - t) + check*u < u on rows [0, n), so check = 1 exactly
    when x < t for x, t < u.

    Args:
        b: Circuit builder
        x, t: Operand expressions
        n: Number of active rows
        u: Upper bound; a power of 256 uses byte limbs, anything else a batched table
        check_values: Prover-chosen check bits (default: the honest ones)
        expect: Pin check to a constant (1 strict, 0 non-strict) instead of a column

    Raises:
        WitnessInfeasible: If the check bits are inconsistent with x and t
    """
    if u is None:
        u = 1 << get_config().DEFAULT_LESS_THAN_BOUND_BITS
    x, t = as_expr(x), as_expr(t)
    with b.region(name):
        xs = b.evaluate(x, n)
        ts = b.evaluate(t, n)
        active = b.selector(0, n)
        if expect is None:
            checks = list(check_values) if check_values is not None else [
                1 if xi < ti else 0 for xi, ti in zip(xs, ts)
            ]
            check_col = b.advice('check', checks)
            predicate: Expression = check_col.cur
            b.gate('boolean', active, [predicate * (1 - predicate)])
        else:
            checks = [expect] * n
            check_col = None
            predicate = Constant(expect)

        diffs = [(xi - ti) % MODULUS for xi, ti in zip(xs, ts)]
        shifted = [(d + c * u) % MODULUS for d, c in zip(diffs, checks)]
        diff_col = b.advice('diff', diffs)
        shifted_col = b.advice('shifted', shifted)
        b.gate('link', active, [x - t - diff_col.cur])
        shift_gate = b.gate('shift', active, [shifted_col.cur - diff_col.cur - predicate * u])

        if any(s >= u for s in shifted):
            raise WitnessInfeasible("less-than: check bit inconsistent with operands")
        limbs = _u8_limbs(u)
        if limbs is not None:
            rng = build_u8_range_check(b, shifted_col.cur, n, limbs)
        else:
            rng = build_range_check_batch(b, shifted_col, n, u - 1)
        b.annotate('less_than', {'P': n, 'u': u},
                   expected={'shift': n}, members={'shift': [shift_gate]})
    return LessThanWitness(xs, ts, u, checks, check_col, diff_col, shifted_col, predicate, shift_gate, rng)


@dataclass
class IsZeroWitness:
    v1: List[int]
    v2: List[int]
    p: ColumnId
    b: ColumnId
    gate: str

    @property
    def is_equal(self) -> Expression:
        return self.b.cur


def build_is_zero(b: CircuitBuilder, v1: ExprLike, v2: ExprLike, n: int,
                  name: str = 'is_zero') -> IsZeroWitness:
    """Flag b = 1 exactly where v1 = v2, certified with a prover-supplied inverse p."""
    v1, v2 = as_expr(v1), as_expr(v2)
    with b.region(name):
        a = b.evaluate(v1, n)
        c = b.evaluate(v2, n)
        diffs = [(x - y) % MODULUS for x, y in zip(a, c)]
        p_col = b.advice('p', [inv(d) for d in diffs])
        b_col = b.advice('b', [0 if d else 1 for d in diffs])
        diff = v1 - v2
        gate = b.gate('flag', b.selector(0, n), [
            b_col.cur - 1 + diff * p_col.cur,
            b_col.cur * diff,
        ])
        b.annotate('is_zero', {'D': n}, expected={'constraints': 2 * n},
                   members={'constraints': [gate]})
    return IsZeroWitness(a, c, p_col, b_col, gate)


@dataclass
class Accumulator:
    values: List[int]
    resets: List[int]
    M: List[int]
    column: ColumnId
    gate: str


def build_running_accumulator(b: CircuitBuilder, value: ExprLike, reset: ExprLike, n: int,
                              name: str = 'accumulator') -> Accumulator:
    """
    M_i = reset_i*v_i + (1 - reset_i)*(M_{i-1} + v_i), with M_0 = v_0.
    reset must be a degree-1 expression.
    """
    value, reset = as_expr(value), as_expr(reset)
    with b.region(name):
        vs = b.evaluate(value, n)
        rs = b.evaluate(reset, n)
        m: List[int] = []
        for i, (v, r) in enumerate(zip(vs, rs)):
            if i == 0:
                m.append(v)
            else:
                m.append((r * v + (1 - r) * (m[-1] + v)) % MODULUS)
        col = b.advice('M', m)
        first = b.first_row()
        gate = b.gate('running', b.selector(0, n), [
            col.cur - value - (1 - first.cur) * (1 - reset) * col.prev,
        ])
    return Accumulator(vs, rs, m, col, gate)


def fingerprint(columns: Sequence[ColumnId], gamma: Expression) -> Expression:
    """Random linear combination sum_j gamma^j * col_j (Horner form)."""
    expr: Expression = columns[-1].cur
    for col in reversed(columns[:-1]):
        expr = col.cur + gamma * expr
    return expr


@dataclass
class ShuffleWitness:
    Z: List[int]
    z: ColumnId
    gate: str


def build_shuffle(b: CircuitBuilder, src: Sequence[ColumnId], dst: Sequence[ColumnId], n: int,
                  name: str = 'shuffle') -> ShuffleWitness:
    """
    Prove the n row tuples of dst are a permutation of those of src with a
    single grand product over row fingerprints.

    Raises:
        WitnessInfeasible: If the row multisets differ
    """
    if len(src) != len(dst):
        raise ValueError("shuffle: source and destination widths differ")
    with b.region(name):
        src_rows = list(zip(*(b.column_values(c, n) for c in src)))
        dst_rows = list(zip(*(b.column_values(c, n) for c in dst)))
        if Counter(src_rows) != Counter(dst_rows):
            raise WitnessInfeasible(f"{b.qualify(name)}: rows are not a permutation")
        if len(src) > 1:
            gamma, _ = b.challenge('gamma', [*src, *dst])
            alpha, _ = b.challenge('alpha', [])
        else:
            alpha, _ = b.challenge('alpha', [*src, *dst])
            gamma = Constant(0)
        src_fp = fingerprint(src, gamma)
        dst_fp = fingerprint(dst, gamma)
        fs = b.evaluate(src_fp + alpha, n)
        fd = b.evaluate(dst_fp + alpha, n)
        z = [1]
        for i in range(n):
            z.append(z[-1] * fs[i] % MODULUS * inv(fd[i]) % MODULUS)
        zc = b.advice('z', z)
        gate = b.gate('grand_product', b.selector(0, n), [
            zc.next * (dst_fp + alpha) - zc.cur * (src_fp + alpha),
        ])
        b.constrain_constant((zc, 0), 1)
        b.constrain_constant((zc, n), 1)
    return ShuffleWitness(z, zc, gate)


@dataclass
class DisjointnessWitness:
    a_distinct: ColumnId
    b_distinct: ColumnId
    merged: ColumnId
    sorted: ColumnId
    dedup_lookups: List[str]
    strict: LessThanWitness
    shuffle: ShuffleWitness
    members: dict = field(default_factory=dict)


def build_disjointness(b: CircuitBuilder, a: ExprLike, na: int, c: ExprLike, nc: int, bits: int = 64,
                       name: str = 'disjoint') -> DisjointnessWitness:
    """
    Prove the nonzero values of a (rows [0, na)) and of c (rows [0, nc))
    share no element. Each side is deduplicated into a column padded with
    distinct sentinels 2^(bits+1) + row, both columns are merged, and the
    merge is shown to sort strictly increasing. Values must be < 2^(bits+1).

    Raises:
        WitnessInfeasible: If the two sides share a nonzero value
    """
    a, c = as_expr(a), as_expr(c)
    base = 1 << (bits + 1)
    with b.region(name):
        av = b.evaluate(a, na)
        cv = b.evaluate(c, nc)
        if any(v >= base for v in av + cv):
            raise WitnessInfeasible(f"disjointness: value exceeds 2^{bits + 1}")
        a_set = sorted(set(v for v in av if v))
        c_set = sorted(set(v for v in cv if v))
        shared = set(a_set) & set(c_set)
        if shared:
            raise WitnessInfeasible(f"disjointness: sides share {len(shared)} values")
        a_de = a_set + [base + i for i in range(len(a_set), na)]
        c_de = c_set + [base + na + j for j in range(len(c_set), nc)]
        a_col = b.advice('distinct_a', a_de)
        c_col = b.advice('distinct_b', c_de)
        dedup = [
            b.lookup('dedup_a', b.selector(0, na), [a], [a_col]),
            b.lookup('dedup_b', b.selector(0, nc), [c], [c_col]),
        ]
        total = na + nc
        merged = b.advice('merged', a_de + c_de)
        for i in range(na):
            b.copy((a_col, i), (merged, i))
        for j in range(nc):
            b.copy((c_col, j), (merged, na + j))
        s_col = b.advice('sorted', sorted(a_de + c_de))
        shuffle = build_shuffle(b, [merged], [s_col], total, name='merge')
        strict = build_less_than(b, s_col.cur, s_col.next, total - 1, u=1 << (bits + 8),
                                 expect=1, name='strict')
        members = {'dedup': dedup, 'strict': [strict.shift_gate]}
        b.annotate('disjointness', {'A': na, 'B': nc},
                   expected={'dedup': na + nc, 'strict': max(total - 1, 0)}, members=members)
    return DisjointnessWitness(a_col, c_col, merged, s_col, dedup, strict, shuffle, members)
