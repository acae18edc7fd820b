import pytest

from constraints import ColumnKind
from errors import BudgetExceeded, OutOfRange, StorageError
from frontend import parse
from witness import (
    Relation,
    evaluate_reference,
    instance_locations,
    load_database,
    prove,
    results_agree,
    scale_value,
    tamper,
    write_database,
)


def test_scale_value():
    # Integer cells are already scaled
    assert scale_value('1999', 2) == 1999
    assert scale_value('19.99', 2) == 1999
    assert scale_value('7.5', 1) == 75
    assert scale_value(' 3 ', 0) == 3


@pytest.mark.parametrize('text, scale', [('1.234', 2), ('-1', 0), ('abc', 0), (str(1 << 64), 0), ('0.5', 0)])
def test_scale_value_rejects(text, scale):
    with pytest.raises(StorageError):
        scale_value(text, scale)


def test_database_round_trip(tmp_path, schema, example_db):
    write_database(str(tmp_path), example_db)
    loaded = load_database(str(tmp_path), schema)
    assert loaded == example_db
    assert list(load_database(str(tmp_path), schema, tables=['R'])) == ['R']


def test_load_database_scales_decimal_cells(tmp_path, schema):
    (tmp_path / 'P.csv').write_text('price,id\n19.99,1\n250,2\n')
    db = load_database(str(tmp_path), schema, tables=['P'])
    # Columns come back in schema order
    assert db['P'].columns == ['id', 'price']
    assert db['P'].rows == [(1, 1999), (2, 250)]


def test_load_database_errors(tmp_path, schema):
    with pytest.raises(StorageError):
        load_database(str(tmp_path), schema, tables=['R'])
    (tmp_path / 'R.csv').write_text('a\n1\n')
    with pytest.raises(StorageError):
        load_database(str(tmp_path), schema, tables=['R'])
    (tmp_path / 'R.csv').write_text('a,b\n1,2,3\n')
    with pytest.raises(StorageError):
        load_database(str(tmp_path), schema, tables=['R'])
    (tmp_path / 'R.csv').write_text('')
    with pytest.raises(StorageError):
        load_database(str(tmp_path), schema, tables=['R'])


def test_relation_values():
    rel = Relation('A', ['x', 'y'], [(1, 2), (3, 4)])
    assert rel.values(['y', 'x']) == [(2, 1), (4, 3)]
    with pytest.raises(StorageError):
        rel.values(['z'])


def test_reference_group_by(schema, example_db):
    plan = parse("SELECT D1, SUM(D2) AS total FROM T GROUP BY D1 ORDER BY total DESC", schema)
    assert evaluate_reference(plan, example_db).rows == [(1, 40), (2, 20), (3, 5)]


def test_reference_join(schema, example_db):
    plan = parse("SELECT T2.D2', T1.D2 FROM T2, T1 WHERE T2.D1' = T1.D1", schema)
    assert sorted(evaluate_reference(plan, example_db).rows) == [(7, 100), (8, 100), (9, 300)]


def test_reference_set_operations_are_multisets(schema, example_db):
    union = parse("SELECT a, b FROM R UNION SELECT a, b FROM S", schema)
    assert sorted(evaluate_reference(union, example_db).rows) == [
        (1, 1), (2, 2), (2, 2), (3, 3), (3, 3), (4, 4),
    ]
    intersect = parse("SELECT a, b FROM R INTERSECT SELECT a, b FROM S", schema)
    assert sorted(evaluate_reference(intersect, example_db).rows) == [(2, 2), (3, 3)]


def test_reference_empty_global_aggregate(schema, example_db):
    plan = parse("SELECT SUM(D2) FROM T WHERE D2 > 1000", schema)
    assert evaluate_reference(plan, example_db).rows == []


def test_results_agree_checks_order_keys(schema, example_db):
    plan = parse("SELECT D1, SUM(D2) AS total FROM T GROUP BY D1 ORDER BY total DESC", schema)
    reference = evaluate_reference(plan, example_db)
    assert results_agree(plan, [(1, 40), (2, 20), (3, 5)], reference)
    assert not results_agree(plan, [(3, 5), (2, 20), (1, 40)], reference)
    assert not results_agree(plan, [(1, 40), (2, 20)], reference)

    unordered = parse("SELECT a FROM R WHERE a > 1", schema)
    reference = evaluate_reference(unordered, example_db)
    assert results_agree(unordered, [(3,), (2,), (2,)], reference)


def test_prove_returns_checked_bundle(schema, example_db):
    bundle = prove("SELECT a FROM R WHERE b >= 2", schema, example_db)
    assert bundle.budgets == {'R': 4}
    assert sorted(bundle.public_result) == [(2,), (2,), (3,)]
    assert bundle.output_columns == ['R.a']

    public = bundle.to_dict(public_only=True)
    assert public['circuit']['public_only'] is True
    advice = {c.key for c in bundle.cs.columns if c.kind == ColumnKind.ADVICE}
    assert advice and not advice & set(public['circuit']['cells'])
    assert public['output']['rows'] == [[str(v) for v in row] for row in bundle.public_result]


def test_prove_rejects_oversized_tables(schema, example_db):
    with pytest.raises(BudgetExceeded):
        prove("SELECT a FROM R", schema, example_db, budgets={'R': 2})


def test_tamper(schema, example_db):
    bundle = prove("SELECT a FROM R", schema, example_db)
    key, row = instance_locations(bundle)[0]
    forged = tamper(bundle, (key, row), 77)
    column = next(c for c in bundle.cs.columns if c.key == key)
    assert forged.assignment.cells[column][row] == 77
    # The original bundle is untouched
    assert bundle.assignment.cells[column][row] != 77

    fixed = next(c for c in bundle.cs.columns if c.kind == ColumnKind.FIXED)
    with pytest.raises(OutOfRange):
        tamper(bundle, (fixed.key, 0), 1)
    with pytest.raises(OutOfRange):
        tamper(bundle, ('nope', 0), 1)
    with pytest.raises(OutOfRange):
        tamper(bundle, (key, bundle.assignment.row_count), 1)
