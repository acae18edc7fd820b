"""
Operator circuits for SQL: scan, filter, sort, group-by with aggregates,
projection, joins and set operations, plus widening and the final output
binding to Instance columns.

Every operator works on a CircuitTable: a fixed number of padded rows whose
validity column marks the real ones. Shapes depend only on row budgets.
"""
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from constraints import CircuitBuilder, ColumnId, Expression, ExprLike, sum_exprs
from errors import (
    BudgetExceeded,
    DivisionByZeroGroup,
    UnknownColumn,
    UnsupportedFeature,
    WitnessInfeasible,
)
from gadgets import (
    DisjointnessWitness,
    IsZeroWitness,
    LessThanWitness,
    ShuffleWitness,
    build_disjointness,
    build_is_zero,
    build_less_than,
    build_running_accumulator,
    build_shuffle,
    build_u8_range_check,
)

logger = logging.getLogger(__name__)

WORD_BITS = 64
WORD = 1 << WORD_BITS
MAX_KEY_ATTRS = 3
FILTER_OPS = ('<', '<=', '=', '>=', '>')
AGGREGATES = ('SUM', 'COUNT', 'AVG', 'MIN', 'MAX')


@dataclass
class CircuitTable:
    """Padded relation inside the circuit."""
    names: List[str]
    columns: List[ColumnId]
    valid: ColumnId
    n: int
    unique: Set[str] = field(default_factory=set)
    visible: Optional[List[str]] = None

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownColumn(f"column {name} is not part of this relation") from None

    def column(self, name: str) -> ColumnId:
        return self.columns[self.index(name)]

    def rows(self, b: CircuitBuilder) -> List[Tuple[int, ...]]:
        """Valid rows, read from the builder."""
        valid = b.column_values(self.valid, self.n)
        data = [b.column_values(c, self.n) for c in self.columns]
        return [tuple(col[r] for col in data) for r in range(self.n) if valid[r] == 1]


def composite_key(cols: Sequence[Tuple[ColumnId, bool]], first: Optional[ColumnId] = None) -> Expression:
    """
    Big-endian composite of 64-bit attributes, most significant first.
    Descending attributes are complemented; rows with first = 1 order
    before rows with first = 0 through one extra high bit.
    """
    m = len(cols)
    terms: List[ExprLike] = []
    for j, (col, desc) in enumerate(cols):
        attr = (WORD - 1) - col.cur if desc else col.cur
        terms.append(attr * (1 << (WORD_BITS * (m - 1 - j))))
    if first is not None:
        terms.append((1 - first.cur) * (1 << (WORD_BITS * m)))
    return sum_exprs(terms)


def _check_key_width(m: int):
    if m > MAX_KEY_ATTRS:
        raise UnsupportedFeature(f"composite keys are limited to {MAX_KEY_ATTRS} attributes, got {m}")


# --- scan and filter ---

def build_scan(b: CircuitBuilder, table: str, names: Sequence[str], rows: Sequence[Sequence[int]], n: int,
               unique: Optional[Set[str]] = None) -> CircuitTable:
    """
    Load rows into n padded Advice rows. Validity is boolean and
    prefix-shaped, and dummy rows are all zero.

    Raises:
        BudgetExceeded: If the table has more than n rows
    """
    if len(rows) > n:
        raise BudgetExceeded(f"table {table} has {len(rows)} rows, budget is {n}")
    with b.region(f"scan_{table}"):
        padded = [list(r) for r in rows] + [[0] * len(names)] * (n - len(rows))
        cols = [b.advice(name, [row[j] for row in padded]) for j, name in enumerate(names)]
        valid = b.advice('valid', [1] * len(rows) + [0] * (n - len(rows)))
        active = b.selector(0, n)
        first = b.first_row()
        b.gate('validity', active, [
            valid.cur * (1 - valid.cur),
            (1 - first.cur) * valid.cur * (1 - valid.prev),
        ])
        b.gate('dummy_zero', active, [(1 - valid.cur) * c.cur for c in cols])
    logger.debug("scan %s: %d rows into budget %d", table, len(rows), n)
    return CircuitTable(list(names), cols, valid, n, set(unique or ()))


@dataclass
class FilterWitness:
    output: CircuitTable
    predicate: Expression
    comparison: object


def build_filter(b: CircuitBuilder, table: CircuitTable, column: str, op: str, literal: int,
                 u: Optional[int] = None) -> FilterWitness:
    """Narrow validity to rows where `column op literal` holds."""
    if op not in FILTER_OPS:
        raise UnsupportedFeature(f"comparison {op} is not supported")
    n = table.n
    with b.region('filter'):
        attr = table.column(column)
        lit = b.fixed('literal', [literal] * n)
        if op == '=':
            comparison = build_is_zero(b, attr.cur, lit.cur, n, name='equal')
            predicate = comparison.is_equal
        elif op in ('<', '>='):
            comparison = build_less_than(b, attr.cur, lit.cur, n, u=u)
            predicate = comparison.predicate if op == '<' else 1 - comparison.predicate
        else:
            comparison = build_less_than(b, lit.cur, attr.cur, n, u=u)
            predicate = comparison.predicate if op == '>' else 1 - comparison.predicate
        keep = b.evaluate(table.valid.cur * predicate, n)
        valid = b.advice('valid', keep)
        b.gate('narrow', b.selector(0, n), [valid.cur - table.valid.cur * predicate])
    out = CircuitTable(table.names, table.columns, valid, n, set(table.unique))
    return FilterWitness(out, predicate, comparison)


# --- sort ---

@dataclass
class SortWitness:
    input: CircuitTable
    output: CircuitTable
    order: List[int]
    carried: List[ColumnId]
    shuffle: ShuffleWitness
    adjacency: LessThanWitness


def build_sort_gate(b: CircuitBuilder, table: CircuitTable, keys: Sequence[Tuple[str, bool]],
                    first: Optional[ColumnId] = None, carry: Sequence[ColumnId] = (),
                    name: str = 'sort') -> SortWitness:
    """
    Sort rows by a composite key with a multiset shuffle for the permutation
    and n - 1 non-strict adjacency checks. Rows with first = 1 (default: the
    valid ones) come before all others; ties keep their input order.

    Args:
        b: Circuit builder
        table: Input relation
        keys: (column name, descending) pairs, most significant first
        first: 0/1 column among the table's columns, validity or carry
        carry: Extra aligned columns permuted along with the rows
    """
    _check_key_width(len(keys))
    n = table.n
    first = first or table.valid
    with b.region(name):
        src = [*table.columns, table.valid, *carry]
        if first not in src:
            raise ValueError("sort priority column must be part of the sorted rows")
        key_in = composite_key([(table.column(k), desc) for k, desc in keys], first)
        key_values = b.evaluate(key_in, n)
        order = sorted(range(n), key=lambda i: (key_values[i], i))

        dst = []
        for col in src:
            values = b.column_values(col, n)
            dst.append(b.advice(f"sorted_{col.name.rsplit('/', 1)[-1]}", [values[i] for i in order]))
        mapping = dict(zip(src, dst))
        shuffle = build_shuffle(b, src, dst, n, name='permutation')

        key_out = composite_key([(mapping[table.column(k)], desc) for k, desc in keys], mapping[first])
        bits = WORD_BITS * len(keys) + 8
        adjacency = build_less_than(b, key_out.rotate(1), key_out, n - 1, u=1 << bits,
                                    expect=0, name='adjacent')
        b.annotate('sort', {'D': n, 'attributes': len(keys)},
                   expected={'permutation': n, 'adjacency': max(n - 1, 0)},
                   members={'permutation': [shuffle.gate], 'adjacency': [adjacency.shift_gate]})

    k = len(table.columns)
    out = CircuitTable(table.names, dst[:k], dst[k], n, set(table.unique), table.visible)
    return SortWitness(table, out, order, dst[k + 1:], shuffle, adjacency)


# --- group-by and aggregates ---

@dataclass
class AggregateSpec:
    fn: str
    attr: Optional[str]
    output: str


@dataclass
class GroupContext:
    table: CircuitTable
    start: ColumnId
    end: ColumnId
    boundaries: IsZeroWitness


@dataclass
class GroupByWitness:
    sort: SortWitness
    context: GroupContext
    aggregates: Dict[str, ColumnId]
    output: CircuitTable


def build_aggregate(b: CircuitBuilder, group: GroupContext, spec: AggregateSpec) -> ColumnId:
    """
    Per-group aggregate column; its value at each group's end row is the
    result. SUM and COUNT accumulate, AVG divides with a certified
    remainder, MIN carries the start row and MAX reads the end row.

    Raises:
        DivisionByZeroGroup: If an AVG divisor is zero
    """
    fn = spec.fn.upper()
    if fn not in AGGREGATES:
        raise UnsupportedFeature(f"aggregate {spec.fn} is not supported")
    table = group.table
    n = table.n
    valid = table.valid.cur
    start = group.start
    attr = table.column(spec.attr) if spec.attr is not None else None
    if attr is None and fn != 'COUNT':
        raise UnsupportedFeature(f"{fn} needs an attribute")

    with b.region(fn.lower()):
        if fn == 'SUM':
            return build_running_accumulator(b, valid * attr.cur, start.cur, n, name='sum').column
        if fn == 'COUNT':
            return build_running_accumulator(b, valid, start.cur, n, name='count').column
        if fn == 'MAX':
            return attr
        if fn == 'MIN':
            a = b.column_values(attr, n)
            s = b.column_values(start, n)
            carried: List[int] = []
            for i in range(n):
                carried.append(a[i] if s[i] or i == 0 else carried[-1])
            col = b.advice('min', carried)
            b.gate('carry', b.selector(0, n), [
                col.cur - start.cur * attr.cur - (1 - start.cur) * col.prev,
            ])
            return col

        total = build_running_accumulator(b, valid * attr.cur, start.cur, n, name='sum')
        count = build_running_accumulator(b, valid, start.cur, n, name='count')
        divisor = count.column.cur + 1 - valid
        d = b.evaluate(divisor, n)
        if any(v == 0 for v in d):
            raise DivisionByZeroGroup("AVG over an empty group")
        q = [s // v for s, v in zip(total.M, d)]
        r = [s % v for s, v in zip(total.M, d)]
        q_col = b.advice('quotient', q)
        r_col = b.advice('remainder', r)
        b.gate('divide', b.selector(0, n), [total.column.cur - q_col.cur * divisor - r_col.cur])
        build_less_than(b, r_col.cur, divisor, n, expect=1, name='remainder_bound')
        build_u8_range_check(b, r_col.cur, n, name='remainder_range')
        build_u8_range_check(b, q_col.cur, n, name='quotient_range')
        return q_col


def build_groupby_gate(b: CircuitBuilder, table: CircuitTable, group_attrs: Sequence[str],
                       aggregates: Sequence[AggregateSpec], name: str = 'group_by') -> GroupByWitness:
    """
    Sort on the group attributes, flag group starts and ends with is-zero
    comparisons of adjacent group keys and compute each aggregate. The
    output keeps all rows; only group end rows of real groups stay valid.
    """
    extremes = sorted({a.attr for a in aggregates if a.fn.upper() in ('MIN', 'MAX')})
    if len(extremes) > 1:
        raise UnsupportedFeature("MIN/MAX over more than one attribute in a single group-by")
    _check_key_width(len(group_attrs) + len(extremes))
    n = table.n
    with b.region(name):
        keys = [(a, False) for a in [*group_attrs, *extremes]]
        sort = build_sort_gate(b, table, keys)
        sd = sort.output
        group_key = composite_key([(sd.column(a), False) for a in group_attrs], sd.valid)
        boundaries = build_is_zero(b, group_key, group_key.rotate(-1), n, name='boundary')

        eq = b.column_values(boundaries.b, n)
        starts = [1] + [1 - e for e in eq[1:]]
        ends = starts[1:] + [1]
        start = b.advice('start', starts)
        end = b.advice('end', ends)
        first = b.first_row()
        last = b.row_flag(n - 1)
        active = b.selector(0, n)
        b.gate('start_flag', active, [start.cur - first.cur - (1 - first.cur) * (1 - boundaries.is_equal)])
        b.gate('end_flag', active, [end.cur - last.cur - (1 - last.cur) * start.next])
        b.annotate('group_by', {'D': n, 'attributes': len(group_attrs)},
                   expected={'boundaries': 2 * n}, members={'boundaries': [boundaries.gate]})

        context = GroupContext(sd, start, end, boundaries)
        results = {spec.output: build_aggregate(b, context, spec) for spec in aggregates}

        out_valid = b.advice('valid', b.evaluate(end.cur * sd.valid.cur, n))
        b.gate('output_valid', active, [out_valid.cur - end.cur * sd.valid.cur])

    names = [*group_attrs, *results.keys()]
    columns = [sd.column(a) for a in group_attrs] + list(results.values())
    unique = set(group_attrs) if len(group_attrs) == 1 else set()
    output = CircuitTable(names, columns, out_valid, n, unique)
    return GroupByWitness(sort, context, results, output)


# --- projection ---

@dataclass
class ProjectionWitness:
    masks: List[ColumnId]
    output: CircuitTable
    lookup: str


def build_projection(b: CircuitBuilder, table: CircuitTable, keep: Sequence[str],
                     name: str = 'project') -> ProjectionWitness:
    """
    out = mask * in per column with Fixed 0/1 masks, and a lookup binding
    each kept output tuple to a source tuple. `keep` also fixes the
    visible column order.
    """
    for k in keep:
        table.index(k)
    n = table.n
    with b.region(name):
        active = b.selector(0, n)
        masks, outs = [], []
        for col_name, col in zip(table.names, table.columns):
            bit = 1 if col_name in keep else 0
            mask = b.fixed(f"mask_{col_name}", [bit] * n)
            out = b.advice(f"out_{col_name}", b.evaluate(mask.cur * col.cur, n))
            masks.append(mask)
            outs.append(out)
        b.gate('select', active, [o.cur - m.cur * c.cur for o, m, c in zip(outs, masks, table.columns)])
        kept = [i for i, nm in enumerate(table.names) if nm in keep]
        lookup = b.lookup('source', active,
                          [table.valid.cur, *(outs[i].cur for i in kept)],
                          [table.valid, *(table.columns[i] for i in kept)])
    out_table = CircuitTable(table.names, outs, table.valid, n, set(table.unique) & set(keep), list(keep))
    return ProjectionWitness(masks, out_table, lookup)


# --- joins ---

@dataclass
class JoinWitness:
    mode: str
    left_flags: ColumnId
    right_flags: ColumnId
    left_reordered: CircuitTable
    right_reordered: CircuitTable
    left_disjoint: DisjointnessWitness
    right_disjoint: DisjointnessWitness
    output: CircuitTable


def join_key(col: ColumnId, valid: ColumnId, dummy: int) -> Expression:
    """Real rows map to J + 2, dummy rows to the constant `dummy` (0 or 1)."""
    return valid.cur * (col.cur + 2) + (1 - valid.cur) * dummy


def _reorder(b: CircuitBuilder, table: CircuitTable, flags: ColumnId, label: str):
    """Permute rows so flagged (contributing) rows come first, stably."""
    n = table.n
    f = b.column_values(flags, n)
    order = sorted(range(n), key=lambda i: (1 - f[i], i))
    src = [*table.columns, table.valid, flags]
    dst = []
    for col in src:
        values = b.column_values(col, n)
        dst.append(b.advice(f"{label}_{col.name.rsplit('/', 1)[-1]}", [values[i] for i in order]))
    shuffle = build_shuffle(b, src, dst, n, name=f"{label}_permutation")
    k = len(table.columns)
    return CircuitTable(table.names, dst[:k], dst[k], n, set(table.unique)), dst[k + 1], shuffle


def build_join_gate(b: CircuitBuilder, t1: CircuitTable, t2: CircuitTable, attr1: str, attr2: str,
                    mode: str = 'pkfk', name: str = 'join') -> JoinWitness:
    """
    Equality join T1.attr1 = T2.attr2.

    Each side gets contributing flags and is reordered contributing-first.
    Non-contributing keys of either side are proven disjoint from every key
    of the other side. In pkfk mode (attr2 unique) the output has one row
    per T1 row carrying its matched T2 row, checked by an equality gate and
    a source lookup into T2'. In general mode the output enumerates all
    n1*n2 row pairs and keeps the equal, contributing ones.

    Raises:
        WitnessInfeasible: If pkfk mode meets duplicate keys on the right
    """
    if mode not in ('pkfk', 'general'):
        raise UnsupportedFeature(f"join mode {mode}")
    n1, n2 = t1.n, t2.n
    j1, j2 = t1.column(attr1), t2.column(attr2)
    with b.region(name):
        k1 = join_key(j1, t1.valid, 0)
        k2 = join_key(j2, t2.valid, 1)
        keys1 = b.evaluate(k1, n1)
        keys2 = b.evaluate(k2, n2)
        valid1 = b.column_values(t1.valid, n1)
        valid2 = b.column_values(t2.valid, n2)
        real1 = Counter(k for k, v in zip(keys1, valid1) if v)
        real2 = Counter(k for k, v in zip(keys2, valid2) if v)
        if mode == 'pkfk' and any(c > 1 for c in real2.values()):
            raise WitnessInfeasible(f"pkfk join: {attr2} has duplicate values")

        c1 = b.advice('left_contributing', [1 if v and k in real2 else 0 for k, v in zip(keys1, valid1)])
        c2 = b.advice('right_contributing', [1 if v and k in real1 else 0 for k, v in zip(keys2, valid2)])
        b.gate('left_flags', b.selector(0, n1), [c1.cur * (1 - c1.cur), c1.cur * (1 - t1.valid.cur)])
        b.gate('right_flags', b.selector(0, n2), [c2.cur * (1 - c2.cur), c2.cur * (1 - t2.valid.cur)])

        left, c1p, perm1 = _reorder(b, t1, c1, 'left')
        right, c2p, perm2 = _reorder(b, t2, c2, 'right')

        left_disjoint = build_disjointness(b, (1 - c1.cur) * k1, n1, k2, n2, name='left_disjoint')
        right_disjoint = build_disjointness(b, (1 - c2.cur) * k2, n2, k1, n1, name='right_disjoint')

        if mode == 'pkfk':
            output, equality, source = _pkfk_output(b, left, c1p, right, c2p, attr1, attr2)
            eq_count, source_count = n1, n1
        else:
            output, equality, source = _pairwise_output(b, left, c1p, right, c2p, attr1, attr2)
            eq_count, source_count = 2 * n1 * n2, 2 * n1 * n2

        b.annotate('join', {'T1': n1, 'T2': n2, 'mode': mode},
                   expected={
                       'permutation': n1 + n2,
                       'dedup': 2 * (n1 + n2),
                       'sortedness': 2 * (n1 + n2 - 1),
                       'equality': eq_count,
                       'source': source_count,
                   },
                   members={
                       'permutation': [perm1.gate, perm2.gate],
                       'dedup': left_disjoint.dedup_lookups + right_disjoint.dedup_lookups,
                       'sortedness': [left_disjoint.strict.shift_gate, right_disjoint.strict.shift_gate],
                       'equality': equality,
                       'source': source,
                   })
    logger.debug("join %s = %s (%s): %d x %d rows", attr1, attr2, mode, n1, n2)
    return JoinWitness(mode, c1, c2, left, right, left_disjoint, right_disjoint, output)


def _pkfk_output(b: CircuitBuilder, left: CircuitTable, c1: ColumnId, right: CircuitTable,
                 c2: ColumnId, attr1: str, attr2: str):
    n1, n2 = left.n, right.n
    flags = b.column_values(c1, n1)
    lkeys = b.column_values(left.column(attr1), n1)
    rkeys = b.column_values(right.column(attr2), n2)
    rflags = b.column_values(c2, n2)
    rdata = [b.column_values(c, n2) for c in right.columns]
    partner = {rkeys[j]: j for j in range(n2) if rflags[j]}

    matched = []
    for col_index, col_name in enumerate(right.names):
        values = [rdata[col_index][partner[lkeys[i]]] if flags[i] else 0 for i in range(n1)]
        matched.append(b.advice(f"matched_{col_name}", values))
    active = b.selector(0, n1)
    mkey = matched[right.index(attr2)]
    equality = b.gate('equality', active, [c1.cur * (left.column(attr1).cur - mkey.cur)])
    source = b.lookup('source', active,
                      [c1.cur, *(c1.cur * m.cur for m in matched)],
                      [c2, *right.columns])
    output = CircuitTable(left.names + right.names, left.columns + matched, c1, n1, set(left.unique))
    return output, [equality], [source]


def _pairwise_output(b: CircuitBuilder, left: CircuitTable, c1: ColumnId, right: CircuitTable,
                     c2: ColumnId, attr1: str, attr2: str):
    n1, n2 = left.n, right.n
    total = n1 * n2
    idx1 = b.fixed('left_index', list(range(1, n1 + 1)))
    idx2 = b.fixed('right_index', list(range(1, n2 + 1)))
    pair1 = b.fixed('pair_left', [i // n2 + 1 for i in range(total)])
    pair2 = b.fixed('pair_right', [i % n2 + 1 for i in range(total)])

    def spread(cols, rows_of):
        out = []
        for col in cols:
            values = b.column_values(col, col_len[col])
            out.append(b.advice(f"pair_{col.name.rsplit('/', 1)[-1]}", [values[rows_of(r)] for r in range(total)]))
        return out

    col_len = {c: n1 for c in [*left.columns, c1]}
    col_len.update({c: n2 for c in [*right.columns, c2]})
    lcols = spread([*left.columns, c1], lambda r: r // n2)
    rcols = spread([*right.columns, c2], lambda r: r % n2)
    active = b.selector(0, total)
    source = [
        b.lookup('source_left', active, [pair1.cur, *(c.cur for c in lcols)], [idx1, *left.columns, c1]),
        b.lookup('source_right', active, [pair2.cur, *(c.cur for c in rcols)], [idx2, *right.columns, c2]),
    ]
    lkey = lcols[left.index(attr1)]
    rkey = rcols[right.index(attr2)]
    eq = build_is_zero(b, lkey.cur, rkey.cur, total, name='equality')
    lflag, rflag = lcols[-1], rcols[-1]
    valid = b.advice('valid', b.evaluate(lflag.cur * rflag.cur * eq.is_equal, total))
    b.gate('pair_valid', active, [valid.cur - lflag.cur * rflag.cur * eq.is_equal])
    output = CircuitTable(left.names + right.names, lcols[:-1] + rcols[:-1], valid, total)
    return output, [eq.gate], source


# --- set operations ---

def build_widen(b: CircuitBuilder, table: CircuitTable, n: int, name: str = 'widen') -> CircuitTable:
    """Pad a relation to n rows; the new rows are constrained to zero and invalid."""
    if n == table.n:
        return table
    if n < table.n:
        raise BudgetExceeded(f"cannot narrow a relation of {table.n} rows to {n}")
    with b.region(name):
        cols = []
        for col in [*table.columns, table.valid]:
            new = b.advice(col.name.rsplit('/', 1)[-1], b.column_values(col, table.n))
            for r in range(table.n):
                b.copy((col, r), (new, r))
            cols.append(new)
        b.gate('padding', b.selector(table.n, n), [c.cur for c in cols])
    return CircuitTable(table.names, cols[:-1], cols[-1], n, set(table.unique), table.visible)


def tuple_key(table: CircuitTable, dummy: int) -> Expression:
    """Composite row key remapped like join keys: real rows K + 2, dummies `dummy`."""
    k = composite_key([(c, False) for c in table.columns])
    return table.valid.cur * (k + 2) + (1 - table.valid.cur) * dummy


@dataclass
class SetOpWitness:
    op: str
    output: Optional[CircuitTable]
    components: dict = field(default_factory=dict)


def _multiset_flags(rows_a: Sequence[tuple], valid_a: Sequence[int],
                    rows_b: Sequence[tuple], valid_b: Sequence[int]) -> Tuple[List[int], List[int]]:
    """Mark min(multiplicity) occurrences of each shared tuple on both sides, first ones first."""
    budget = Counter(r for r, v in zip(rows_a, valid_a) if v) & Counter(r for r, v in zip(rows_b, valid_b) if v)

    def mark(rows, valid):
        left = defaultdict(int, budget)
        flags = []
        for r, v in zip(rows, valid):
            take = 1 if v and left[r] > 0 else 0
            left[r] -= take
            flags.append(take)
        return flags

    return mark(rows_a, valid_a), mark(rows_b, valid_b)


def _common_part(b: CircuitBuilder, R: CircuitTable, S: CircuitTable, bits: int) -> dict:
    """Prove flagged parts of R and S are equal multisets and the rest disjoint."""
    n = R.n
    rows_r = [tuple(v) for v in zip(*(b.column_values(c, n) for c in R.columns))]
    rows_s = [tuple(v) for v in zip(*(b.column_values(c, n) for c in S.columns))]
    fr, fs = _multiset_flags(rows_r, b.column_values(R.valid, n), rows_s, b.column_values(S.valid, n))
    cr = b.advice('left_common', fr)
    cs_ = b.advice('right_common', fs)
    active = b.selector(0, n)
    b.gate('flags', active, [
        cr.cur * (1 - cr.cur), cr.cur * (1 - R.valid.cur),
        cs_.cur * (1 - cs_.cur), cs_.cur * (1 - S.valid.cur),
    ])
    keys = [(nm, False) for nm in R.names]
    skeys = [(nm, False) for nm in S.names]
    sort_r = build_sort_gate(b, R, keys, first=cr, carry=[cr], name='left_sort')
    sort_s = build_sort_gate(b, S, skeys, first=cs_, carry=[cs_], name='right_sort')
    cr_sorted, cs_sorted = sort_r.carried[0], sort_s.carried[0]
    b.gate('aligned', active, [
        cr_sorted.cur - cs_sorted.cur,
        *(cr_sorted.cur * (a.cur - c.cur) for a, c in zip(sort_r.output.columns, sort_s.output.columns)),
    ])
    disjoint = build_disjointness(b, (1 - cr.cur) * tuple_key(R, 0), n, (1 - cs_.cur) * tuple_key(S, 1), n,
                                  bits=bits, name='rest_disjoint')
    return {'left_flags': cr, 'right_flags': cs_, 'left_sort': sort_r, 'right_sort': sort_s,
            'disjoint': disjoint}


def build_set_op(b: CircuitBuilder, R: CircuitTable, S: CircuitTable, op: str,
                 name: Optional[str] = None) -> SetOpWitness:
    """
    Set operations over row tuples with multiset semantics.

    equality: both sides hold the same valid rows (assertion, no output).
    disjoint: no valid row of R equals a valid row of S (assertion).
    intersect: min-multiplicity intersection.
    union: max-multiplicity union; R followed by the rows of S not matched in R.

    Raises:
        WitnessInfeasible: If an equality or disjointness claim is false
    """
    if len(R.columns) != len(S.columns):
        raise UnsupportedFeature("set operation over relations of different arity")
    _check_key_width(len(R.columns))
    bits = WORD_BITS * len(R.columns)
    with b.region(name or op):
        if op == 'disjoint':
            w = build_disjointness(b, tuple_key(R, 0), R.n, tuple_key(S, 1), S.n, bits=bits, name='disjoint')
            return SetOpWitness(op, None, {'disjoint': w})

        n = max(R.n, S.n)
        R2 = build_widen(b, R, n, name='widen_left')
        S2 = build_widen(b, S, n, name='widen_right')

        if op == 'equality':
            if Counter(R2.rows(b)) != Counter(S2.rows(b)):
                raise WitnessInfeasible("set equality: relations differ")
            keys = [(nm, False) for nm in R2.names]
            sr = build_sort_gate(b, R2, keys, name='left_sort')
            ss = build_sort_gate(b, S2, [(nm, False) for nm in S2.names], name='right_sort')
            ro, so = sr.output, ss.output
            b.gate('rows_equal', b.selector(0, n), [
                ro.valid.cur - so.valid.cur,
                *(ro.valid.cur * a.cur - so.valid.cur * c.cur for a, c in zip(ro.columns, so.columns)),
            ])
            return SetOpWitness(op, None, {'left_sort': sr, 'right_sort': ss})

        common = _common_part(b, R2, S2, bits)
        if op == 'intersect':
            sorted_r = common['left_sort']
            out = CircuitTable(R.names, sorted_r.output.columns, sorted_r.carried[0], n)
            return SetOpWitness(op, out, common)
        if op != 'union':
            raise UnsupportedFeature(f"set operation {op}")

        rest = b.advice('right_rest', b.evaluate(S2.valid.cur - common['right_flags'].cur, n))
        b.gate('right_rest', b.selector(0, n), [rest.cur - S2.valid.cur + common['right_flags'].cur])
        cols = []
        for rc, sc in zip([*R2.columns, R2.valid], [*S2.columns, rest]):
            values = b.column_values(rc, n) + b.column_values(sc, n)
            out_col = b.advice(f"union_{rc.name.rsplit('/', 1)[-1]}", values)
            for r in range(n):
                b.copy((rc, r), (out_col, r))
                b.copy((sc, r), (out_col, n + r))
            cols.append(out_col)
        out = CircuitTable(R.names, cols[:-1], cols[-1], 2 * n)
        return SetOpWitness(op, out, common)


# --- output binding ---

@dataclass
class OutputWitness:
    names: List[str]
    scrubbed: List[ColumnId]
    instance: List[ColumnId]
    valid_instance: ColumnId
    rows: List[Tuple[int, ...]]


def build_output(b: CircuitBuilder, table: CircuitTable) -> OutputWitness:
    """
    Mask visible columns with validity and copy them, with the validity
    column, into Instance columns. Returns the public result rows.
    """
    names = list(table.visible or table.names)
    n = table.n
    with b.region('output'):
        scrubbed, instance = [], []
        for nm in names:
            col = table.column(nm)
            out = b.advice(f"scrub_{nm}", b.evaluate(table.valid.cur * col.cur, n))
            scrubbed.append(out)
            instance.append(b.instance(nm, b.column_values(out, n)))
        b.gate('scrub', b.selector(0, n),
               [o.cur - table.valid.cur * table.column(nm).cur for o, nm in zip(scrubbed, names)])
        valid_inst = b.instance('valid', b.column_values(table.valid, n))
        for r in range(n):
            for out, inst in zip(scrubbed, instance):
                b.copy((out, r), (inst, r))
            b.copy((table.valid, r), (valid_inst, r))
        valid = b.column_values(table.valid, n)
        data = [b.column_values(c, n) for c in scrubbed]
        rows = [tuple(col[r] for col in data) for r in range(n) if valid[r] == 1]
    return OutputWitness(names, scrubbed, instance, valid_inst, rows)
