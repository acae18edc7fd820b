import json

import pytest

from errors import ParseError, UnknownColumn, UnsupportedFeature
from frontend import (
    Aggregate,
    Filter,
    GroupBy,
    Join,
    Project,
    QueryPlan,
    Scan,
    Schema,
    SetOp,
    Sort,
    load_schema,
    parse,
    scale_literal,
)


def ops(plan):
    return [step.op for step in plan.steps]


def test_schema_column_forms():
    schema = Schema.from_dict({'tables': {
        'A': {'columns': ['x', 'y'], 'primary_key': 'x'},
        'B': {'columns': [{'name': 'p', 'scale': 2}, {'name': 'q'}]},
        'C': {'columns': {'m': 0, 'n': 3}, 'primary_key': ['m', 'n']},
    }})
    assert schema.table('A').unique_columns == ['x']
    assert schema.table('B').scale('p') == 2
    assert schema.table('B').scale('q') == 0
    assert schema.table('C').scale('n') == 3
    # Composite keys do not make a single column unique
    assert schema.table('C').unique_columns == []
    assert Schema.from_dict(schema.to_dict()).to_dict() == schema.to_dict()


def test_schema_errors():
    with pytest.raises(UnknownColumn):
        Schema.from_dict({'tables': {'A': {'columns': ['x'], 'primary_key': 'y'}}})
    with pytest.raises(UnknownColumn):
        Schema.from_dict({'tables': {}}).table('missing')


def test_load_schema(tmp_path):
    path = tmp_path / 'schema.json'
    path.write_text(json.dumps({'tables': {'A': {'columns': ['x']}}}))
    assert load_schema(str(path)).table('A').columns == ['x']


def test_scale_literal():
    assert scale_literal('12.34', 2) == 1234
    assert scale_literal('7', 2) == 700
    assert scale_literal('7', 0) == 7
    with pytest.raises(ParseError):
        scale_literal('1.234', 2)
    with pytest.raises(ParseError):
        scale_literal('abc', 0)
    with pytest.raises(UnsupportedFeature):
        scale_literal(str(1 << 64), 0)


def test_filter_and_projection(schema):
    plan = parse("SELECT a FROM R WHERE b > 1 AND a <= 3", schema)
    assert ops(plan) == ['scan', 'filter', 'filter', 'project']
    assert plan.steps[0] == Scan('R', ('R.a', 'R.b'))
    assert plan.steps[1] == Filter(0, 'R.b', '>', 1)
    assert plan.steps[2] == Filter(1, 'R.a', '<=', 3)
    assert plan.steps[3] == Project(2, ('R.a',), (1, 0))
    assert plan.columns == ['R.a']
    assert plan.scanned_tables() == ['R']


def test_reversed_comparison_and_between(schema):
    plan = parse("SELECT a FROM R WHERE 5 > a AND b BETWEEN 2 AND 4", schema)
    filters = [s for s in plan.steps if isinstance(s, Filter)]
    assert [(f.column, f.comparison, f.literal) for f in filters] == [
        ('R.a', '<', 5), ('R.b', '>=', 2), ('R.b', '<=', 4),
    ]


def test_scaled_literal_in_predicate(schema):
    plan = parse("SELECT id FROM P WHERE price > 19.99", schema)
    assert plan.steps[1] == Filter(0, 'P.price', '>', 1999)


def test_group_by_with_aggregates(schema):
    plan = parse("SELECT D1, SUM(D2) AS total, COUNT(*) FROM T GROUP BY D1 ORDER BY total DESC", schema)
    assert ops(plan) == ['scan', 'group_by', 'aggregate', 'aggregate', 'sort', 'project']
    assert plan.steps[1] == GroupBy(0, ('T.D1',))
    assert plan.steps[2] == Aggregate(1, 'SUM', 'T.D2', 'total')
    assert plan.steps[3] == Aggregate(2, 'COUNT', None, 'count(*)')
    assert plan.steps[4] == Sort(3, ('total',), (True,))
    assert plan.columns == ['T.D1', 'total', 'count(*)']
    assert plan.aggregate_root(3) == 1


def test_global_aggregate(schema):
    plan = parse("SELECT AVG(D2) FROM T", schema)
    assert ops(plan) == ['scan', 'aggregate', 'project']
    assert plan.columns == ['avg(T.D2)']


def test_pkfk_join_puts_the_key_side_right(schema):
    plan = parse("SELECT T2.D2', T1.D2 FROM T2, T1 WHERE T2.D1' = T1.D1", schema)
    join = next(s for s in plan.steps if isinstance(s, Join))
    assert join.mode == 'pkfk'
    assert (join.left_attr, join.right_attr) == ("T2.D1'", 'T1.D1')

    # Same join written with the key table first
    plan = parse("SELECT T1.D2 FROM T1 JOIN T2 ON T1.D1 = T2.D1'", schema)
    join = next(s for s in plan.steps if isinstance(s, Join))
    assert join.mode == 'pkfk'
    assert (join.left_attr, join.right_attr) == ("T2.D1'", 'T1.D1')


def test_general_join(schema):
    plan = parse("SELECT R.a, S.b FROM R, S WHERE R.a = S.a", schema)
    join = next(s for s in plan.steps if isinstance(s, Join))
    assert join.mode == 'general'
    assert plan.columns == ['R.a', 'S.b']


def test_set_operations(schema):
    plan = parse("SELECT a, b FROM R UNION SELECT a, b FROM S", schema)
    assert plan.steps[-1] == SetOp(1, 3, 'union')
    plan = parse("SELECT a, b FROM R INTERSECT SELECT a, b FROM S", schema)
    assert plan.steps[-1].kind == 'intersect'


def test_aliases_and_order_by_alias(schema):
    plan = parse("SELECT x.a AS k FROM R AS x ORDER BY k", schema)
    sort = next(s for s in plan.steps if isinstance(s, Sort))
    assert sort.attrs == ('R.a',)


@pytest.mark.parametrize('sql, error', [
    ("SELECT a FROM R WHERE a = 1 OR b = 2", UnsupportedFeature),
    ("SELECT a FROM R LEFT JOIN S ON R.a = S.a", UnsupportedFeature),
    ("SELECT a, b FROM R UNION ALL SELECT a, b FROM S", UnsupportedFeature),
    ("SELECT a, b FROM R EXCEPT SELECT a, b FROM S", UnsupportedFeature),
    ("SELECT a FROM R WHERE a LIKE '1%'", UnsupportedFeature),
    ("SELECT R.a FROM R, S", UnsupportedFeature),
    ("SELECT a FROM R WHERE a < b", UnsupportedFeature),
    ("SELECT a, SUM(b) FROM R", UnsupportedFeature),
    ("SELECT DISTINCT a FROM R", UnsupportedFeature),
    ("SELECT a FROM R LIMIT 3", UnsupportedFeature),
    ("SELECT a FROM R WHERE a = -1", UnsupportedFeature),
    ("SELECT z FROM R", UnknownColumn),
    ("SELECT a FROM Missing", UnknownColumn),
    ("SELECT a FROM R, S WHERE R.a = S.a", ParseError),
    ("SELECT a FROM R WHERE (a = 1", ParseError),
])
def test_rejected_queries(schema, sql, error):
    with pytest.raises(error):
        parse(sql, schema)


def test_plan_round_trips_through_json(schema):
    plan = parse("SELECT D1, MAX(D2) AS top FROM T WHERE D2 > 3 GROUP BY D1 ORDER BY D1", schema)
    again = QueryPlan.from_dict(json.loads(plan.to_json()))
    assert again.steps == plan.steps
    assert again.columns == plan.columns
