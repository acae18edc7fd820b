"""
SQL frontend: schema loading and translation of a SQL subset into a
QueryPlan, the ordered list of operator steps the compiler turns into gates.
"""
import json
import logging
import re
from dataclasses import asdict, dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Dict, List, Optional, Sequence, Tuple

import sqlglot
from sqlglot import exp

from errors import ParseError, UnknownColumn, UnsupportedFeature

logger = logging.getLogger(__name__)

MAX_VALUE = (1 << 64) - 1

_COMPARISONS = {
    exp.EQ: '=',
    exp.LT: '<',
    exp.LTE: '<=',
    exp.GT: '>',
    exp.GTE: '>=',
}
_FLIPPED = {'=': '=', '<': '>', '<=': '>=', '>': '<', '>=': '<='}
_AGGREGATES = {
    exp.Sum: 'SUM',
    exp.Count: 'COUNT',
    exp.Avg: 'AVG',
    exp.Min: 'MIN',
    exp.Max: 'MAX',
}


# --- schema ---

@dataclass
class TableSchema:
    name: str
    columns: List[str]
    scales: Dict[str, int] = field(default_factory=dict)
    primary_key: List[str] = field(default_factory=list)
    foreign_keys: Dict[str, str] = field(default_factory=dict)

    def qualified(self, column: str) -> str:
        return f"{self.name}.{column}"

    def scale(self, column: str) -> int:
        return self.scales.get(column, 0)

    @property
    def unique_columns(self) -> List[str]:
        """Columns whose values are distinct: a single-column primary key."""
        return list(self.primary_key) if len(self.primary_key) == 1 else []


@dataclass
class Schema:
    tables: Dict[str, TableSchema]

    def table(self, name: str) -> TableSchema:
        if name not in self.tables:
            raise UnknownColumn(f"unknown table {name}")
        return self.tables[name]

    @classmethod
    def from_dict(cls, data: dict) -> 'Schema':
        """
        Build a schema from its JSON form.

        Columns are either a list of names, a list of {"name", "scale"}
        objects or a name -> scale mapping; scale is a power-of-ten exponent.
        """
        tables = {}
        for name, spec in data.get('tables', {}).items():
            raw = spec.get('columns', [])
            columns, scales = [], {}
            if isinstance(raw, dict):
                for col, scale in raw.items():
                    columns.append(col)
                    scales[col] = int(scale)
            else:
                for col in raw:
                    if isinstance(col, dict):
                        columns.append(col['name'])
                        scales[col['name']] = int(col.get('scale', 0))
                    else:
                        columns.append(col)
            pk = spec.get('primary_key', [])
            if isinstance(pk, str):
                pk = [pk]
            for col in pk:
                if col not in columns:
                    raise UnknownColumn(f"primary key {name}.{col} is not a column")
            tables[name] = TableSchema(name, columns, scales, list(pk), dict(spec.get('foreign_keys', {})))
        return cls(tables)

    def to_dict(self) -> dict:
        return {'tables': {
            t.name: {
                'columns': [{'name': c, 'scale': t.scale(c)} for c in t.columns],
                'primary_key': t.primary_key,
                'foreign_keys': t.foreign_keys,
            } for t in self.tables.values()
        }}


def load_schema(path: str) -> Schema:
    with open(path, 'r', encoding='utf-8') as f:
        return Schema.from_dict(json.load(f))


def scale_literal(text: str, scale: int) -> int:
    """
    Integerize a decimal literal by 10^scale.

    Raises:
        ParseError: If the literal is not numeric or keeps a fraction after scaling
        UnsupportedFeature: If the scaled value is negative or exceeds 64 bits
    """
    try:
        value = Decimal(text) * (Decimal(10) ** scale)
    except InvalidOperation:
        raise ParseError(f"not a numeric literal: {text}") from None
    if value != value.to_integral_value():
        raise ParseError(f"literal {text} has more decimals than the column scale {scale}")
    value = int(value)
    if not 0 <= value <= MAX_VALUE:
        raise UnsupportedFeature(f"literal {text} is outside the unsigned 64-bit range")
    return value


# --- plan ---

@dataclass(frozen=True)
class Scan:
    table: str
    columns: Tuple[str, ...]
    op: str = 'scan'

    @property
    def inputs(self) -> Tuple[int, ...]:
        return ()


@dataclass(frozen=True)
class Filter:
    input: int
    column: str
    comparison: str
    literal: int
    op: str = 'filter'

    @property
    def inputs(self) -> Tuple[int, ...]:
        return (self.input,)


@dataclass(frozen=True)
class Join:
    left: int
    right: int
    left_attr: str
    right_attr: str
    mode: str
    op: str = 'join'

    @property
    def inputs(self) -> Tuple[int, ...]:
        return (self.left, self.right)


@dataclass(frozen=True)
class GroupBy:
    input: int
    attrs: Tuple[str, ...]
    op: str = 'group_by'

    @property
    def inputs(self) -> Tuple[int, ...]:
        return (self.input,)


@dataclass(frozen=True)
class Aggregate:
    input: int
    fn: str
    attr: Optional[str]
    output: str
    op: str = 'aggregate'

    @property
    def inputs(self) -> Tuple[int, ...]:
        return (self.input,)


@dataclass(frozen=True)
class Sort:
    input: int
    attrs: Tuple[str, ...]
    descending: Tuple[bool, ...]
    op: str = 'sort'

    @property
    def inputs(self) -> Tuple[int, ...]:
        return (self.input,)


@dataclass(frozen=True)
class Project:
    input: int
    columns: Tuple[str, ...]
    mask: Tuple[int, ...]
    op: str = 'project'

    @property
    def inputs(self) -> Tuple[int, ...]:
        return (self.input,)


@dataclass(frozen=True)
class SetOp:
    left: int
    right: int
    kind: str
    op: str = 'set_op'

    @property
    def inputs(self) -> Tuple[int, ...]:
        return (self.left, self.right)


STEP_TYPES = {cls.op: cls for cls in (Scan, Filter, Join, GroupBy, Aggregate, Sort, Project, SetOp)}


@dataclass
class QueryPlan:
    sql: str
    steps: List[object]
    columns: List[str]

    @property
    def output(self) -> int:
        return len(self.steps) - 1

    def scanned_tables(self) -> List[str]:
        seen = []
        for step in self.steps:
            if isinstance(step, Scan) and step.table not in seen:
                seen.append(step.table)
        return seen

    def aggregate_root(self, index: int) -> int:
        """First step below a chain of Aggregate steps."""
        step = self.steps[index]
        while isinstance(step, Aggregate):
            index = step.input
            step = self.steps[index]
        return index

    def to_dict(self) -> dict:
        steps = []
        for i, step in enumerate(self.steps):
            entry = {'id': i}
            entry.update({k: list(v) if isinstance(v, tuple) else v for k, v in asdict(step).items()})
            steps.append(entry)
        return {'sql': self.sql, 'steps': steps, 'columns': list(self.columns)}

    @classmethod
    def from_dict(cls, data: dict) -> 'QueryPlan':
        steps = []
        for entry in data['steps']:
            entry = dict(entry)
            entry.pop('id', None)
            step_cls = STEP_TYPES[entry['op']]
            kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in entry.items()}
            steps.append(step_cls(**kwargs))
        return cls(data['sql'], steps, list(data['columns']))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# --- parsing ---

_STRING_OR_PRIMED = re.compile(r"(?P<string>(?<![\w'])'(?:[^']|'')*')|(?P<primed>\b[A-Za-z_]\w*'+)")


def _quote_primed_identifiers(sql: str) -> str:
    """Quote identifiers carrying trailing primes (D1') so the SQL tokenizer accepts them."""
    def replace(match):
        if match.group('primed'):
            return f'"{match.group("primed")}"'
        return match.group(0)
    return _STRING_OR_PRIMED.sub(replace, sql)


@dataclass
class _Scope:
    """Relation produced by a step: its qualified column names and unique columns."""
    step: int
    columns: List[str]
    unique: set


class QueryPlanner:
    """Translates one SQL statement into a canonical QueryPlan."""

    def __init__(self, schema: Schema, dialect: Optional[str] = None):
        self.schema = schema
        self.dialect = dialect
        self.steps: List[object] = []

    def _emit(self, step) -> int:
        self.steps.append(step)
        return len(self.steps) - 1

    def plan(self, sql: str) -> QueryPlan:
        try:
            ast = sqlglot.parse_one(_quote_primed_identifiers(sql), read=self.dialect)
        except sqlglot.errors.ParseError as e:
            raise ParseError(f"cannot parse query: {e}") from None
        if ast is None:
            raise ParseError("empty query")
        self.steps = []
        scope = self._plan_query(ast)
        logger.debug("planned %d steps for %s", len(self.steps), sql)
        return QueryPlan(sql, list(self.steps), list(scope.columns))

    def _plan_query(self, node: exp.Expression) -> _Scope:
        if isinstance(node, exp.Subquery):
            return self._plan_query(node.this)
        if isinstance(node, exp.Union):
            if node.args.get('distinct') is False:
                raise UnsupportedFeature("UNION ALL is not supported")
            return self._plan_set_op(node, 'union')
        if isinstance(node, exp.Intersect):
            return self._plan_set_op(node, 'intersect')
        if isinstance(node, exp.Except):
            raise UnsupportedFeature("EXCEPT is not supported")
        if isinstance(node, exp.Select):
            return self._plan_select(node)
        raise UnsupportedFeature(f"statement {node.key} is not supported")

    def _plan_set_op(self, node: exp.Expression, kind: str) -> _Scope:
        left = self._plan_query(node.this)
        right = self._plan_query(node.expression)
        if len(left.columns) != len(right.columns):
            raise ParseError(f"{kind.upper()} operands have {len(left.columns)} and {len(right.columns)} columns")
        step = self._emit(SetOp(left.step, right.step, kind))
        return _Scope(step, list(left.columns), set())

    # SELECT

    def _plan_select(self, select: exp.Select) -> _Scope:
        for key in ('having', 'limit', 'offset', 'qualify', 'windows', 'with'):
            if select.args.get(key):
                raise UnsupportedFeature(f"{key.upper()} is not supported")
        if select.args.get('distinct'):
            raise UnsupportedFeature("SELECT DISTINCT is not supported")

        aliases, tables, on_predicates = self._from_tables(select)
        where = select.args.get('where')
        predicates = on_predicates + (self._conjuncts(where.this) if where is not None else [])

        filters: Dict[str, List[Tuple[str, str, int]]] = {t: [] for t in tables}
        joins: List[Tuple[str, str]] = []
        for pred in predicates:
            kind, payload = self._classify(pred, aliases, tables)
            if kind == 'filter':
                table = payload[0].split('.', 1)[0]
                filters[table].extend(self._filters_of(payload))
            else:
                joins.append(payload)

        scopes = {}
        for table in tables:
            ts = self.schema.table(table)
            cols = tuple(ts.qualified(c) for c in ts.columns)
            step = self._emit(Scan(table, cols))
            for column, op, literal in filters[table]:
                step = self._emit(Filter(step, column, op, literal))
            scopes[table] = _Scope(step, list(cols), {ts.qualified(c) for c in ts.unique_columns})

        scope = self._plan_joins(tables, scopes, joins)
        scope, outputs = self._plan_aggregates(select, scope, aliases, tables)
        scope = self._plan_order(select, scope, outputs, aliases, tables)
        return self._plan_project(scope, outputs)

    def _from_tables(self, select: exp.Select):
        from_clause = select.args.get('from') or select.args.get('from_')
        if from_clause is None:
            raise ParseError("SELECT must have a FROM clause")
        sources = [from_clause.this, *from_clause.expressions] if from_clause.this else list(from_clause.expressions)
        on_predicates = []
        for join in select.args.get('joins') or []:
            side = (join.args.get('side') or '').upper()
            kind = (join.args.get('kind') or '').upper()
            if side or kind in ('CROSS', 'OUTER', 'SEMI', 'ANTI'):
                raise UnsupportedFeature(f"{side or kind} JOIN is not supported")
            if join.args.get('using'):
                raise UnsupportedFeature("JOIN ... USING is not supported")
            sources.append(join.this)
            if join.args.get('on') is not None:
                on_predicates.extend(self._conjuncts(join.args['on']))

        aliases: Dict[str, str] = {}
        tables: List[str] = []
        for source in sources:
            if not isinstance(source, exp.Table):
                raise UnsupportedFeature("subqueries in FROM are not supported")
            name = source.name
            self.schema.table(name)
            if name in tables:
                raise UnsupportedFeature(f"table {name} appears twice")
            tables.append(name)
            aliases[source.alias_or_name] = name
            aliases[name] = name
        return aliases, tables, on_predicates

    def _conjuncts(self, node: exp.Expression) -> List[exp.Expression]:
        if isinstance(node, exp.Paren):
            return self._conjuncts(node.this)
        if isinstance(node, exp.And):
            return self._conjuncts(node.this) + self._conjuncts(node.expression)
        if isinstance(node, exp.Or):
            raise UnsupportedFeature("OR predicates are not supported")
        return [node]

    def _resolve(self, column: exp.Column, aliases: Dict[str, str], tables: Sequence[str]) -> str:
        """Qualified table.column name for a column reference."""
        name = column.name
        if column.table:
            if column.table not in aliases:
                raise UnknownColumn(f"unknown table {column.table}")
            table = self.schema.table(aliases[column.table])
            if name not in table.columns:
                raise UnknownColumn(f"unknown column {column.table}.{name}")
            return table.qualified(name)
        owners = [t for t in tables if name in self.schema.table(t).columns]
        if not owners:
            raise UnknownColumn(f"unknown column {name}")
        if len(owners) > 1:
            raise ParseError(f"ambiguous column {name}")
        return self.schema.table(owners[0]).qualified(name)

    def _literal(self, node: exp.Expression, column: str) -> int:
        table, col = column.split('.', 1)
        scale = self.schema.table(table).scale(col)
        if isinstance(node, exp.Neg):
            raise UnsupportedFeature("negative literals are not supported")
        if isinstance(node, exp.Literal) and not node.is_string:
            return scale_literal(node.this, scale)
        if isinstance(node, exp.Literal):
            raise UnsupportedFeature("string literals are not supported")
        raise UnsupportedFeature(f"expression {node.sql()} in a predicate is not supported")

    def _classify(self, pred: exp.Expression, aliases, tables):
        if isinstance(pred, (exp.Like, exp.ILike)):
            raise UnsupportedFeature("LIKE predicates are not supported")
        if isinstance(pred, exp.Between):
            column = pred.this
            if not isinstance(column, exp.Column):
                raise UnsupportedFeature("BETWEEN needs a column on the left")
            name = self._resolve(column, aliases, tables)
            low = self._literal(pred.args['low'], name)
            high = self._literal(pred.args['high'], name)
            return 'filter', (name, [('>=', low), ('<=', high)])
        op = _COMPARISONS.get(type(pred))
        if op is None:
            raise UnsupportedFeature(f"predicate {pred.sql()} is not supported")
        left, right = pred.this, pred.expression
        if isinstance(left, exp.Column) and isinstance(right, exp.Column):
            if op != '=':
                raise UnsupportedFeature("only equality compares two columns")
            a = self._resolve(left, aliases, tables)
            c = self._resolve(right, aliases, tables)
            if a.split('.', 1)[0] == c.split('.', 1)[0]:
                raise UnsupportedFeature("comparing two columns of one table is not supported")
            return 'join', (a, c)
        if not isinstance(left, exp.Column):
            left, right, op = right, left, _FLIPPED[op]
        if not isinstance(left, exp.Column):
            raise UnsupportedFeature(f"predicate {pred.sql()} is not supported")
        name = self._resolve(left, aliases, tables)
        return 'filter', (name, [(op, self._literal(right, name))])

    @staticmethod
    def _filters_of(payload) -> List[Tuple[str, str, int]]:
        name, comparisons = payload
        return [(name, op, literal) for op, literal in comparisons]

    def _plan_joins(self, tables: List[str], scopes: Dict[str, _Scope], joins: List[Tuple[str, str]]) -> _Scope:
        current = scopes[tables[0]]
        joined = {tables[0]}
        pending = list(joins)
        for table in tables[1:]:
            match = None
            for pred in pending:
                a, c = pred
                ta, tc = a.split('.', 1)[0], c.split('.', 1)[0]
                if ta in joined and tc == table:
                    match = (pred, a, c)
                    break
                if tc in joined and ta == table:
                    match = (pred, c, a)
                    break
            if match is None:
                raise UnsupportedFeature(f"no join predicate connects {table}; cross products are not supported")
            pred, mine, theirs = match
            pending.remove(pred)
            right = scopes[table]
            if theirs in right.unique:
                step = self._emit(Join(current.step, right.step, mine, theirs, 'pkfk'))
                unique = set(current.unique)
                columns = current.columns + right.columns
            elif mine in current.unique:
                step = self._emit(Join(right.step, current.step, theirs, mine, 'pkfk'))
                unique = set(right.unique)
                columns = right.columns + current.columns
            else:
                step = self._emit(Join(current.step, right.step, mine, theirs, 'general'))
                unique = set()
                columns = current.columns + right.columns
            current = _Scope(step, columns, unique)
            joined.add(table)
        if pending:
            raise UnsupportedFeature("more than one join predicate between the same tables")
        return current

    def _select_items(self, select: exp.Select, aliases, tables):
        """(kind, payload, output name) per SELECT item."""
        items = []
        for node in select.expressions:
            alias = None
            if isinstance(node, exp.Alias):
                alias, node = node.alias, node.this
            if isinstance(node, exp.Star):
                for t in tables:
                    ts = self.schema.table(t)
                    items.extend(('column', ts.qualified(c), ts.qualified(c)) for c in ts.columns)
                continue
            if isinstance(node, exp.Column):
                if isinstance(node.this, exp.Star):
                    ts = self.schema.table(aliases.get(node.table, node.table))
                    items.extend(('column', ts.qualified(c), ts.qualified(c)) for c in ts.columns)
                    continue
                name = self._resolve(node, aliases, tables)
                items.append(('column', name, alias or name))
                continue
            fn = next((label for cls, label in _AGGREGATES.items() if isinstance(node, cls)), None)
            if fn is None:
                raise UnsupportedFeature(f"SELECT expression {node.sql()} is not supported")
            if node.args.get('distinct') or isinstance(node.this, exp.Distinct):
                raise UnsupportedFeature(f"{fn}(DISTINCT ...) is not supported")
            arg = node.this
            if isinstance(arg, exp.Star) or (fn == 'COUNT' and arg is None):
                attr = None
            elif isinstance(arg, exp.Column):
                attr = self._resolve(arg, aliases, tables)
            else:
                raise UnsupportedFeature(f"aggregate argument {arg.sql()} is not supported")
            if attr is None and fn != 'COUNT':
                raise UnsupportedFeature(f"{fn}(*) is not supported")
            output = alias or f"{fn.lower()}({attr or '*'})"
            items.append(('aggregate', (fn, attr), output))
        return items

    def _plan_aggregates(self, select: exp.Select, scope: _Scope, aliases, tables):
        items = self._select_items(select, aliases, tables)
        group = select.args.get('group')
        group_attrs = []
        if group is not None:
            for node in group.expressions:
                if not isinstance(node, exp.Column):
                    raise UnsupportedFeature(f"GROUP BY {node.sql()} is not supported")
                group_attrs.append(self._resolve(node, aliases, tables))
        aggregates = [item for item in items if item[0] == 'aggregate']
        outputs = {name: payload if kind == 'column' else name for kind, payload, name in items}
        outputs = {'__order__': [name for _, _, name in items], **outputs}

        if not aggregates and not group_attrs:
            return scope, outputs
        for kind, payload, name in items:
            if kind == 'column' and payload not in group_attrs:
                raise UnsupportedFeature(f"column {payload} is neither grouped nor aggregated")

        step = scope.step
        if group_attrs:
            step = self._emit(GroupBy(step, tuple(group_attrs)))
        names = list(group_attrs)
        for _, (fn, attr), output in aggregates:
            if output in names:
                raise ParseError(f"duplicate output name {output}")
            step = self._emit(Aggregate(step, fn, attr, output))
            names.append(output)
        unique = set(group_attrs) if len(group_attrs) == 1 else set()
        return _Scope(step, names, unique), outputs

    def _plan_order(self, select: exp.Select, scope: _Scope, outputs: dict, aliases, tables) -> _Scope:
        order = select.args.get('order')
        if order is None:
            return scope
        attrs, desc = [], []
        for node in order.expressions:
            target = node.this
            if not isinstance(target, exp.Column):
                raise UnsupportedFeature(f"ORDER BY {target.sql()} is not supported")
            name = None
            if not target.table and target.name in outputs and target.name != '__order__':
                name = outputs[target.name]
            if name is None:
                name = self._resolve(target, aliases, tables)
            if name not in scope.columns:
                raise UnknownColumn(f"ORDER BY column {name} is not available after grouping")
            attrs.append(name)
            desc.append(bool(node.args.get('desc')))
        step = self._emit(Sort(scope.step, tuple(attrs), tuple(desc)))
        return _Scope(step, scope.columns, scope.unique)

    def _plan_project(self, scope: _Scope, outputs: dict) -> _Scope:
        selected = [outputs[name] for name in outputs['__order__']]
        for name in selected:
            if name not in scope.columns:
                raise UnknownColumn(f"column {name} is not available")
        if len(set(selected)) != len(selected):
            raise UnsupportedFeature("selecting the same column twice is not supported")
        mask = tuple(1 if c in selected else 0 for c in scope.columns)
        step = self._emit(Project(scope.step, tuple(selected), mask))
        return _Scope(step, selected, scope.unique & set(selected))


def parse(sql: str, schema: Schema) -> QueryPlan:
    """
    Parse a SQL query into a QueryPlan.

    Raises:
        ParseError: For text outside the grammar
        UnknownColumn: For unknown tables or columns
        UnsupportedFeature: For SQL with no circuit counterpart
    """
    return QueryPlanner(schema).plan(sql)
