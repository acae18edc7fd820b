import json

import pytest
from click.testing import CliRunner

from cli import cli
from witness import Relation, write_database

SQL = "SELECT a FROM R WHERE b >= 2"


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args):
    return runner.invoke(cli, [str(a) for a in args])


def output_fields(result):
    fields = {}
    for line in result.output.splitlines():
        key, sep, value = line.partition(': ')
        if sep:
            fields[key] = value
    return fields


@pytest.fixture
def committed(runner, db_dir, schema_path, tmp_path):
    path = tmp_path / 'commitment.json'
    result = invoke(runner, 'commit', db_dir, '--schema', schema_path, '--out', path)
    assert result.exit_code == 0, result.output
    return path


@pytest.fixture
def proved(runner, db_dir, schema_path, committed):
    result = invoke(runner, 'prove', SQL, '--schema', schema_path, '--db', db_dir, '--commitment', committed)
    assert result.exit_code == 0, result.output
    return output_fields(result)


def test_commit(runner, db_dir, schema_path, committed):
    data = json.loads(committed.read_text())
    assert data['leaf_count'] == 22
    result = invoke(runner, 'commit', db_dir, '--schema', schema_path, '--out', committed)
    assert f"root: {data['root']}" in result.output


def test_commit_rerun_is_identical(runner, db_dir, schema_path, committed, tmp_path):
    again = tmp_path / 'again.json'
    invoke(runner, 'commit', db_dir, '--schema', schema_path, '--out', again)
    assert again.read_text() == committed.read_text()


def test_commit_names_missing_table(runner, db_dir, schema_path):
    (db_dir / 'S.csv').unlink()
    result = invoke(runner, 'commit', db_dir, '--schema', schema_path)
    assert result.exit_code == 50
    assert 'S' in result.output


def test_plan_and_compile(runner, schema_path, db_dir):
    result = invoke(runner, 'plan', SQL, '--schema', schema_path)
    assert result.exit_code == 0
    assert [s['op'] for s in json.loads(result.output)['steps']] == ['scan', 'filter', 'project']

    result = invoke(runner, 'compile', SQL, '--schema', schema_path, '--budget', 'R=8')
    assert result.exit_code == 0
    shape = json.loads(result.output)
    assert shape['budgets'] == {'R': 8}

    # Budgets taken from the database match an explicit one of the same size
    sized = json.loads(invoke(runner, 'compile', SQL, '--schema', schema_path, '--db', db_dir).output)
    explicit = json.loads(invoke(runner, 'compile', SQL, '--schema', schema_path, '--budget', 'R=4').output)
    assert sized['digest'] == explicit['digest']


def test_bad_budget_is_a_usage_error(runner, schema_path):
    result = invoke(runner, 'compile', SQL, '--schema', schema_path, '--budget', 'R=3')
    assert result.exit_code == 2


def test_unsupported_query_exit_code(runner, schema_path):
    result = invoke(runner, 'plan', "SELECT a FROM R WHERE a = 1 OR b = 2", '--schema', schema_path)
    assert result.exit_code == 31
    assert 'UnsupportedFeature' in result.output


def test_prove_writes_bundles(proved):
    assert set(proved) >= {'run', 'budgets', 'public', 'full', 'manifest'}
    assert proved['budgets'] == 'R=4'
    manifest = json.loads(open(proved['manifest']).read())
    assert manifest['verdict'] == 'ok'
    assert manifest['run_id'] == proved['run']
    public = json.loads(open(proved['public']).read())
    assert public['circuit']['public_only'] is True
    assert sorted(public['output']['rows']) == [['2'], ['2'], ['3']]


def test_prove_public_only(runner, db_dir, schema_path):
    result = invoke(runner, 'prove', SQL, '--schema', schema_path, '--db', db_dir, '--public-only')
    assert result.exit_code == 0, result.output
    fields = output_fields(result)
    assert 'full' not in fields
    public = json.loads(open(fields['public']).read())
    advice = {c['key'] for c in public['circuit']['columns'] if c['kind'] == 'advice'}
    assert advice and not advice & set(public['circuit']['cells'])


def test_prove_over_budget(runner, db_dir, schema_path):
    result = invoke(runner, 'prove', SQL, '--schema', schema_path, '--db', db_dir, '--budget', 'R=2')
    assert result.exit_code == 22
    assert 'BudgetExceeded' in result.output


def test_verify(runner, proved, committed, db_dir):
    result = invoke(runner, 'verify', proved['public'], committed)
    assert result.exit_code == 0, result.output
    assert 'ok: 3 result rows' in result.output
    assert 'public check' in result.output

    result = invoke(runner, 'verify', proved['public'], committed, '--full', proved['full'], '--db', db_dir)
    assert result.exit_code == 0, result.output
    assert 'full check' in result.output


def test_verify_tampered_full_bundle(runner, proved, committed, tmp_path):
    bundle = json.loads(open(proved['full']).read())
    valid = next(c for c in bundle['circuit']['columns']
                 if c['kind'] == 'advice' and c['name'].startswith('scan_') and c['name'].endswith('/valid'))
    bundle['circuit']['cells'][valid['key']][0] = '5'
    forged = tmp_path / 'forged.json'
    forged.write_text(json.dumps(bundle))

    result = invoke(runner, 'verify', proved['public'], committed, '--full', forged)
    assert result.exit_code == 41
    assert 'at row' in result.output

    failed = invoke(runner, 'runs', '--failed')
    assert 'ConstraintFailure' in failed.output


def test_verify_against_other_commitment(runner, proved, schema_path, example_db, tmp_path):
    other_dir = tmp_path / 'other'
    write_database(str(other_dir), dict(example_db, R=Relation('R', ['a', 'b'], [(5, 5)])))
    other = tmp_path / 'other.json'
    assert invoke(runner, 'commit', other_dir, '--schema', schema_path, '--out', other).exit_code == 0

    result = invoke(runner, 'verify', proved['public'], other)
    assert result.exit_code == 40
    assert 'CommitmentMismatch' in result.output


def test_report(runner, proved):
    result = invoke(runner, 'report', proved['public'])
    assert result.exit_code == 0, result.output
    assert result.output.rstrip().endswith(', 0 mismatches')

    result = invoke(runner, 'report', proved['public'], '--json')
    data = json.loads(result.output)
    assert all(row['match'] for row in data['components'])
    # The b >= 2 filter over a budget of 4 byte-decomposes 4 shifted differences
    u8 = {row['category']: row for row in data['components'] if row['kind'] == 'u8_range_check'}
    assert u8['lookup_rows']['params'] == {'P': 4, 'limbs': 8}
    assert u8['lookup_rows']['actual'] == 8 * 4
    assert u8['decompositions']['actual'] == 4
    shift = next(row for row in data['components'] if row['kind'] == 'less_than')
    assert shift['actual'] == 4
    assert data['totals']['lookup_rows'] >= 32


def test_runs_lists_proofs(runner, proved):
    result = invoke(runner, 'runs', '--limit', 50)
    assert result.exit_code == 0
    assert proved['run'][:8] in result.output


def test_config_and_field_info(runner):
    result = invoke(runner, 'config')
    assert 'storage_backend: local' in result.output
    assert 'default_budget: auto' in result.output

    result = invoke(runner, '--field-info')
    assert result.exit_code == 0
    assert 'modulus_bits: 254' in result.output
    assert 'hash: sha256' in result.output
