import pytest

from commitment import bind_commitment, commit_database
from compiler import compile_plan, resolve_budgets, synthesize
from constraints import ColumnKind, check_satisfied
from datagen import DESK_QUERIES, generate_lineitem_database, lineitem_schema
from errors import CommitmentMismatch, ConstraintFailure, ShapeMismatch, UnsupportedFeature
from frontend import QueryPlan, Scan, SetOp, parse
from witness import Relation, evaluate_reference, prove, results_agree, tamper, verify_bundle

QUERIES = [
    "SELECT a FROM R WHERE b >= 2",
    "SELECT id FROM P WHERE price > 19.99",
    "SELECT D1, SUM(D2) AS total, COUNT(*) FROM T GROUP BY D1 ORDER BY total DESC",
    "SELECT D1, MAX(D2) AS top FROM T WHERE D2 > 3 GROUP BY D1 ORDER BY D1",
    "SELECT AVG(D2) FROM T",
    "SELECT T2.D2', T1.D2 FROM T2, T1 WHERE T2.D1' = T1.D1",
    "SELECT R.a, S.b FROM R, S WHERE R.a = S.a",
    "SELECT a, b FROM R UNION SELECT a, b FROM S",
    "SELECT a, b FROM R INTERSECT SELECT a, b FROM S",
]


def bound_bundle(sql, schema, db, budgets=None):
    bundle = prove(sql, schema, db, budgets)
    return bind_commitment(bundle, commit_database(db), db)


def scan_valid_column(bundle):
    return next(c for c in bundle.cs.columns
                if c.kind == ColumnKind.ADVICE and c.name.startswith('scan_') and c.name.endswith('/valid'))


@pytest.mark.parametrize('sql', QUERIES)
def test_proved_results_match_reference(sql, schema, example_db):
    bundle = prove(sql, schema, example_db)
    reference = evaluate_reference(bundle.plan, example_db)
    assert results_agree(bundle.plan, bundle.public_result, reference)
    assert check_satisfied(bundle.cs, bundle.assignment).ok


def test_circuit_shape_ignores_table_contents(schema, example_db):
    sql = "SELECT D1, SUM(D2) AS total FROM T GROUP BY D1"
    other = dict(example_db, T=Relation('T', ['D1', 'D2'], [(9, 9)]))
    first = prove(sql, schema, example_db, budgets={'T': 8})
    second = prove(sql, schema, other, budgets={'T': 8})
    assert first.digest.hexdigest() == second.digest.hexdigest()

    # Compiling without any data gives the same shape
    plan = parse(sql, schema)
    assert compile_plan(plan, schema, {'T': 8}).digest.hexdigest() == first.digest.hexdigest()

    # A different budget is a different circuit
    assert prove(sql, schema, example_db, budgets={'T': 16}).digest.hexdigest() != first.digest.hexdigest()


def test_budget_defaults_to_next_power_of_two(schema, example_db):
    plan = parse("SELECT a FROM R", schema)
    assert resolve_budgets(plan, None, example_db) == {'R': 4}
    assert resolve_budgets(plan, {'R': 32}, example_db) == {'R': 32}


def test_verify_public_and_full(schema, example_db):
    bundle = bound_bundle("SELECT a FROM R WHERE b >= 2", schema, example_db)
    root = commit_database(example_db).to_dict()
    public, full = bundle.to_dict(public_only=True), bundle.to_dict()

    report = verify_bundle(public, root)
    assert report.ok and not report.full
    assert report.result_rows == 3
    assert report.commitment_root == root['root']

    report = verify_bundle(public, root, full, example_db)
    assert report.ok and report.full
    assert report.failures == []


def test_verify_rejects_forged_witness(schema, example_db):
    bundle = bound_bundle("SELECT a FROM R WHERE b >= 2", schema, example_db)
    forged = tamper(bundle, (scan_valid_column(bundle).key, 0), 5)
    with pytest.raises(ConstraintFailure) as exc:
        verify_bundle(bundle.to_dict(True), commit_database(example_db).to_dict(), forged.to_dict())
    assert exc.value.failures
    assert exc.value.exit_code == 41


def test_verify_rejects_altered_published_result(schema, example_db):
    bundle = bound_bundle("SELECT a FROM R WHERE b >= 2", schema, example_db)
    public = bundle.to_dict(True)
    public['output']['rows'][0] = ['99']
    with pytest.raises(ConstraintFailure):
        verify_bundle(public, commit_database(example_db).to_dict())


def test_verify_rejects_other_commitment(schema, example_db):
    bundle = bound_bundle("SELECT a FROM R", schema, example_db)
    other_db = dict(example_db, R=Relation('R', ['a', 'b'], [(1, 1), (2, 2), (2, 2), (3, 4)]))
    with pytest.raises(CommitmentMismatch):
        verify_bundle(bundle.to_dict(True), commit_database(other_db).to_dict())

    # Right root, but the database handed in no longer hashes to it
    with pytest.raises(CommitmentMismatch):
        verify_bundle(bundle.to_dict(True), commit_database(example_db).to_dict(), bundle.to_dict(), other_db)


def test_binding_rejects_a_different_database(schema, example_db):
    bundle = prove("SELECT a FROM R", schema, example_db)
    other_db = dict(example_db, R=Relation('R', ['a', 'b'], [(1, 1), (2, 2), (2, 2), (3, 4)]))
    with pytest.raises(CommitmentMismatch):
        bind_commitment(bundle, commit_database(other_db), other_db)


def test_verify_rejects_changed_budgets(schema, example_db):
    bundle = bound_bundle("SELECT a FROM R", schema, example_db)
    public = bundle.to_dict(True)
    public['budgets'] = {'R': 8}
    with pytest.raises(ShapeMismatch):
        verify_bundle(public, commit_database(example_db).to_dict())


@pytest.mark.parametrize('kind', ['equality', 'disjoint'])
def test_assertion_set_ops_cannot_end_a_plan(kind, schema, example_db):
    plan = QueryPlan('', [Scan('R', ('R.a', 'R.b')), Scan('S', ('S.a', 'S.b')), SetOp(0, 1, kind)], ['a', 'b'])
    with pytest.raises(UnsupportedFeature, match=kind):
        synthesize(plan, schema, {'R': 4, 'S': 4}, example_db)


@pytest.fixture(scope='module')
def desk_db():
    return generate_lineitem_database(seed=7, rows=1000)


@pytest.mark.slow
@pytest.mark.parametrize('name', sorted(DESK_QUERIES))
def test_desk_queries(name, desk_db):
    schema = lineitem_schema()
    root = commit_database(desk_db).to_dict()
    bundle = bound_bundle(DESK_QUERIES[name], schema, desk_db)
    reference = evaluate_reference(bundle.plan, desk_db)
    assert results_agree(bundle.plan, bundle.public_result, reference)
    report = verify_bundle(bundle.to_dict(True), root, bundle.to_dict(), desk_db)
    assert report.ok

    # Flipping the validity of the first published row changes the result
    public = bundle.to_dict(True)
    valid_key = bundle.cs.columns_of(ColumnKind.INSTANCE)[-1].key
    public['circuit']['cells'][valid_key][0] = str(1 - int(public['circuit']['cells'][valid_key][0]))
    with pytest.raises(ConstraintFailure):
        verify_bundle(public, root)

    if bundle.public_result:
        public = bundle.to_dict(True)
        data_key = bundle.cs.columns_of(ColumnKind.INSTANCE)[0].key
        cells = public['circuit']['cells']
        row = next(r for r, v in enumerate(cells[valid_key]) if v == '1')
        cells[data_key][row] = str(int(cells[data_key][row]) + 1)
        with pytest.raises(ConstraintFailure):
            verify_bundle(public, root)
