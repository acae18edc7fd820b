"""
Command-line driver: commit, plan, compile, prove, verify and report.
"""
import functools
import json
import logging
import os
import sys
import time

import click
from dotenv import load_dotenv

# Load environment variables FIRST, before any other imports that read env vars
env_path = os.path.join(os.path.dirname(os.path.abspath(__file__)), '.env')
load_dotenv(dotenv_path=env_path)

from commitment import CommitmentRoot, bind_commitment, commit_database  # noqa: E402
from compiler import compile_plan, resolve_budgets  # noqa: E402
from config import get_config  # noqa: E402
from constraints import component_report, count_constraints  # noqa: E402
from errors import CircuitQLError, ConstraintFailure  # noqa: E402
from field import field_info  # noqa: E402
from frontend import Schema, load_schema, parse  # noqa: E402
from models import RunRepository  # noqa: E402
from storage import get_artifact_store  # noqa: E402
from utils import format_budgets, format_table, generate_run_id, parse_budgets, utc_timestamp  # noqa: E402
from witness import generate_witness, load_database, verify_bundle  # noqa: E402

logger = logging.getLogger('circuitql')

MAX_FAILURES_SHOWN = 10


def _budget_option(ctx, param, value):
    try:
        return parse_budgets(value or '')
    except ValueError as e:
        raise click.BadParameter(str(e)) from None


def _read_json(path: str) -> dict:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise click.BadParameter(f"{path} is not valid JSON: {e}") from None


def reports_errors(command):
    """Print CircuitQL errors and exit with their status code."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ConstraintFailure as e:
            click.echo(f"error: {e}", err=True)
            for name, row in e.failures[:MAX_FAILURES_SHOWN]:
                click.echo(f"  {name} at row {row}", err=True)
            if len(e.failures) > MAX_FAILURES_SHOWN:
                click.echo(f"  ... {len(e.failures) - MAX_FAILURES_SHOWN} more", err=True)
            sys.exit(e.exit_code)
        except CircuitQLError as e:
            click.echo(f"error: {type(e).__name__}: {e}", err=True)
            sys.exit(e.exit_code)
    return wrapper


@click.group(invoke_without_command=True)
@click.option('--field-info', 'show_field', is_flag=True, help='Print the field modulus and hash, then exit.')
@click.option('--log-level', default=None, help='Override LOG_LEVEL.')
@click.pass_context
def cli(ctx, show_field, log_level):
    """CircuitQL: SQL queries compiled to checked PLONKish circuits."""
    config = get_config()
    try:
        config.validate()
    except ValueError as e:
        raise click.UsageError(f"invalid configuration: {e}")
    logging.basicConfig(
        level=(log_level or config.LOG_LEVEL).upper(),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )
    ctx.obj = config
    if show_field:
        for key, value in field_info().items():
            click.echo(f"{key}: {value}")
        ctx.exit(0)
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


schema_option = click.option('--schema', 'schema_path', required=True, type=click.Path(exists=True, dir_okay=False),
                             help='Schema JSON file.')
budget_option = click.option('--budget', 'budgets', default='', callback=_budget_option,
                             help='Row budgets, e.g. lineitem=1024,orders=256.')
seed_option = click.option('--seed', default='', help='Transcript salt (testing only).')


@cli.command()
@click.argument('db_dir', type=click.Path(exists=True, file_okay=False))
@schema_option
@click.option('--out', 'out_path', default=None, type=click.Path(dir_okay=False),
              help='Output file (default: commitment.json beside DB_DIR).')
@reports_errors
def commit(db_dir, schema_path, out_path):
    """Commit to the database in DB_DIR (one CSV file per table)."""
    schema = load_schema(schema_path)
    db = load_database(db_dir, schema)
    root = commit_database(db)
    if out_path is None:
        out_path = os.path.join(os.path.dirname(os.path.abspath(db_dir.rstrip('/\\'))), 'commitment.json')
    with open(out_path, 'w', encoding='utf-8') as f:
        f.write(root.to_json() + '\n')
    click.echo(f"root: {root.root}")
    click.echo(f"leaves: {root.leaf_count}")
    click.echo(f"written: {out_path}")


@cli.command()
@click.argument('sql')
@schema_option
@reports_errors
def plan(sql, schema_path):
    """Print the plan of SQL as JSON."""
    click.echo(parse(sql, load_schema(schema_path)).to_json())


@cli.command(name='compile')
@click.argument('sql')
@schema_option
@budget_option
@click.option('--db', 'db_dir', default=None, type=click.Path(exists=True, file_okay=False),
              help='Database directory used to size missing budgets.')
@reports_errors
def compile_command(sql, schema_path, budgets, db_dir):
    """Compile SQL and print the circuit shape digest."""
    schema = load_schema(schema_path)
    query_plan = parse(sql, schema)
    db = load_database(db_dir, schema, query_plan.scanned_tables()) if db_dir else None
    blueprint = compile_plan(query_plan, schema, resolve_budgets(query_plan, budgets, db))
    totals = count_constraints(blueprint.cs)['totals']
    click.echo(json.dumps({'budgets': blueprint.budgets, 'digest': blueprint.digest.to_dict(),
                           'totals': totals}, indent=2, sort_keys=True))


@cli.command()
@click.argument('sql')
@schema_option
@click.option('--db', 'db_dir', required=True, type=click.Path(exists=True, file_okay=False),
              help='Database directory.')
@budget_option
@seed_option
@click.option('--commitment', 'commitment_path', default=None, type=click.Path(exists=True, dir_okay=False),
              help='Commitment to bind to (default: computed from --db).')
@click.option('--public-only', is_flag=True, help='Write only the public bundle.')
@click.pass_obj
@reports_errors
def prove(config, sql, schema_path, db_dir, budgets, seed, commitment_path, public_only):
    """Prove SQL over the database and write bundles plus a manifest."""
    timings = {}
    started = time.perf_counter()
    schema = load_schema(schema_path)
    db = load_database(db_dir, schema)
    query_plan = parse(sql, schema)
    sizes = resolve_budgets(query_plan, budgets, db)
    timings['plan'] = time.perf_counter() - started

    mark = time.perf_counter()
    salt = seed.encode('utf-8')
    blueprint = compile_plan(query_plan, schema, sizes, salt)
    timings['compile'] = time.perf_counter() - mark

    mark = time.perf_counter()
    bundle = generate_witness(query_plan, schema, db, blueprint, salt)
    timings['witness'] = time.perf_counter() - mark

    mark = time.perf_counter()
    root = CommitmentRoot.from_dict(_read_json(commitment_path)) if commitment_path else commit_database(db)
    bundle = bind_commitment(bundle, root, db)
    timings['commit'] = time.perf_counter() - mark

    run_id = generate_run_id()
    store = get_artifact_store(config)
    artifacts = {'public': store.save(f"{run_id}/bundle.public.json", bundle.to_json(True).encode('utf-8'))}
    if not public_only:
        artifacts['full'] = store.save(f"{run_id}/bundle.full.json", bundle.to_json(False).encode('utf-8'))
    timings['total'] = time.perf_counter() - started

    manifest = {
        'run_id': run_id,
        'kind': 'prove',
        'query': sql,
        'schema': os.path.abspath(schema_path),
        'db': os.path.abspath(db_dir),
        'budgets': bundle.budgets,
        'seed': seed,
        'commitment_root': root.root,
        'verdict': 'ok',
        'digest': bundle.digest.hexdigest(),
        'counts': count_constraints(bundle.cs)['totals'],
        'timings': {k: round(v, 4) for k, v in timings.items()},
        'artifacts': artifacts,
        'created_at': utc_timestamp(),
    }
    artifacts['manifest'] = store.save(f"{run_id}/manifest.json",
                                       json.dumps(manifest, indent=2, sort_keys=True).encode('utf-8'))
    RunRepository(path=config.RUNS_DB_PATH).record(manifest)

    click.echo(f"run: {run_id}")
    click.echo(f"budgets: {format_budgets(bundle.budgets)}")
    for name, path in artifacts.items():
        click.echo(f"{name}: {path}")
    click.echo(format_table(bundle.output_columns, bundle.public_result))


@cli.command()
@click.argument('public_path', type=click.Path(exists=True, dir_okay=False))
@click.argument('commitment_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--full', 'full_path', default=None, type=click.Path(exists=True, dir_okay=False),
              help='Full bundle for complete constraint checking.')
@click.option('--db', 'db_dir', default=None, type=click.Path(exists=True, file_okay=False),
              help='Database directory to re-check the commitment and scanned rows against.')
@click.pass_obj
@reports_errors
def verify(config, public_path, commitment_path, full_path, db_dir):
    """Verify a public bundle against a commitment."""
    started = time.perf_counter()
    public = _read_json(public_path)
    root = _read_json(commitment_path)
    full = _read_json(full_path) if full_path else None
    ledger = RunRepository(path=config.RUNS_DB_PATH)
    entry = {'kind': 'verify', 'query': public.get('sql', ''), 'budgets': public.get('budgets', {}),
             'commitment_root': root.get('root'), 'artifacts': {'public': public_path, 'full': full_path}}
    try:
        db = load_database(db_dir, Schema.from_dict(public['schema'])) if db_dir else None
        report = verify_bundle(public, root, full, db)
    except CircuitQLError as e:
        entry.update(verdict=type(e).__name__, timings={'total': round(time.perf_counter() - started, 4)})
        ledger.record(entry)
        raise
    entry.update(verdict='ok', timings={'total': round(time.perf_counter() - started, 4)})
    ledger.record(entry)
    click.echo(f"ok: {report.result_rows} result rows, circuit {report.digest[:16]}, "
               f"{'full' if report.full else 'public'} check")


@cli.command()
@click.argument('bundle_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--json', 'as_json', is_flag=True, help='Print the report as JSON.')
@reports_errors
def report(bundle_path, as_json):
    """Constraint counts per component against their analytic expectations."""
    bundle = _read_json(bundle_path)
    schema = Schema.from_dict(bundle['schema'])
    blueprint = compile_plan(parse(bundle['sql'], schema), schema, bundle['budgets'],
                             bytes.fromhex(bundle.get('seed', '')))
    rows = component_report(blueprint.cs)
    if as_json:
        click.echo(json.dumps({'components': rows, 'totals': count_constraints(blueprint.cs)['totals']},
                              indent=2, sort_keys=True))
        return
    click.echo(format_table(
        ['kind', 'region', 'category', 'expected', 'actual', 'match'],
        [[r['kind'], r['region'], r['category'], r['expected'], r['actual'], 'yes' if r['match'] else 'NO']
         for r in rows],
    ))
    mismatches = sum(1 for r in rows if not r['match'])
    click.echo(f"{len(rows)} counts, {mismatches} mismatches")


@cli.command()
@click.option('--limit', default=20, show_default=True, help='Number of runs to list.')
@click.option('--failed', is_flag=True, help='Only runs whose verdict is not ok.')
@click.pass_obj
def runs(config, limit, failed):
    """List recorded runs, newest first."""
    repo = RunRepository(path=config.RUNS_DB_PATH)
    entries = repo.by_verdict(False) if failed else repo.recent(limit)
    click.echo(format_table(
        ['id', 'kind', 'verdict', 'created_at', 'query'],
        [[e['id'][:8], e['kind'], e['verdict'], e['created_at'], e['query'][:60]] for e in entries[:limit]],
    ))


@cli.command(name='config')
@click.pass_obj
def show_config(config):
    """Print the sanitized configuration."""
    for key, value in config.get_display_info().items():
        click.echo(f"{key}: {value}")


def main():
    cli(prog_name='circuitql')


if __name__ == '__main__':
    main()
