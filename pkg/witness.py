"""
Witness generation, the reference evaluator and proof bundles.

The reference evaluator runs a plan with plain multiset semantics and
shares no code with the circuit path; every honest witness is checked
against it before a bundle is returned.
"""
import csv
import json
import logging
import operator
import os
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from commitment import CommitmentRoot, check_root, check_scanned_rows, commit_database
from compiler import Blueprint, compile_plan, resolve_budgets, synthesize
from constraints import (
    Assignment,
    ColumnKind,
    ConstraintSystem,
    ShapeDigest,
    assignment_from_dict,
    check_satisfied,
    serialize,
)
from errors import (
    CommitmentMismatch,
    ConstraintFailure,
    InternalInconsistency,
    OutOfRange,
    ShapeMismatch,
    StorageError,
)
from field import MODULUS
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
    TableSchema,
    parse,
)
from utils import resolve_table_path

logger = logging.getLogger(__name__)

BUNDLE_VERSION = 1
MAX_VALUE = (1 << 64) - 1


# --- relations ---

@dataclass
class Relation:
    name: str
    columns: List[str]
    rows: List[Tuple[int, ...]] = field(default_factory=list)

    @property
    def row_count(self) -> int:
        return len(self.rows)

    def values(self, names: Sequence[str]) -> List[Tuple[int, ...]]:
        """Rows restricted to the named columns, in that order."""
        try:
            idx = [self.columns.index(n) for n in names]
        except ValueError as e:
            raise StorageError(f"relation {self.name} lacks a column: {e}") from None
        return [tuple(row[i] for i in idx) for row in self.rows]


Database = Dict[str, Relation]


def scale_value(text: str, scale: int) -> int:
    """
    Integerize one CSV cell. Integer cells are taken as already scaled;
    cells with a decimal point are multiplied by 10^scale.

    Raises:
        StorageError: If the cell is not a non-negative 64-bit value after scaling
    """
    text = text.strip()
    try:
        value = Decimal(text)
    except InvalidOperation:
        raise StorageError(f"not a numeric cell: {text!r}") from None
    if '.' in text:
        value *= Decimal(10) ** scale
    if value != value.to_integral_value():
        raise StorageError(f"cell {text} has more decimals than the column scale {scale}")
    value = int(value)
    if not 0 <= value <= MAX_VALUE:
        raise StorageError(f"cell {text} is outside the unsigned 64-bit range")
    return value


def load_relation(path: str, table: TableSchema) -> Relation:
    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise StorageError(f"table file for {table.name} is empty: {path}") from None
        missing = [c for c in table.columns if c not in header]
        if missing:
            raise StorageError(f"table {table.name} lacks columns {missing}")
        idx = [header.index(c) for c in table.columns]
        rows = []
        for line_no, record in enumerate(reader, start=2):
            if not any(cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise StorageError(f"{table.name}.csv line {line_no}: expected {len(header)} cells")
            rows.append(tuple(scale_value(record[i], table.scale(c)) for i, c in zip(idx, table.columns)))
    return Relation(table.name, list(table.columns), rows)


def load_database(db_dir: str, schema: Schema, tables: Optional[Iterable[str]] = None) -> Database:
    """
    Load one CSV file per table from db_dir.

    Raises:
        StorageError: Naming the table whose file is missing or malformed
    """
    names = list(tables) if tables is not None else list(schema.tables)
    db = {}
    for name in names:
        table = schema.table(name)
        db[name] = load_relation(resolve_table_path(db_dir, name), table)
        logger.debug("loaded %s: %d rows", name, db[name].row_count)
    return db


def write_database(db_dir: str, db: Mapping[str, Relation]):
    """Write relations as CSV files with a header row."""
    os.makedirs(db_dir, exist_ok=True)
    for rel in db.values():
        with open(os.path.join(db_dir, f"{rel.name}.csv"), 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(rel.columns)
            writer.writerows(rel.rows)


# --- reference evaluator ---

_COMPARE = {
    '<': operator.lt,
    '<=': operator.le,
    '=': operator.eq,
    '>=': operator.ge,
    '>': operator.gt,
}


def _aggregate(rel: Relation, attrs: Sequence[str], specs: Sequence[Aggregate]) -> Relation:
    columns = list(attrs) + [s.output for s in specs]
    if not attrs and not rel.rows:
        return Relation('aggregate', columns, [])
    key_idx = [rel.columns.index(a) for a in attrs]
    groups: Dict[tuple, List[tuple]] = {}
    for row in rel.rows:
        groups.setdefault(tuple(row[i] for i in key_idx), []).append(row)

    rows = []
    for key, members in groups.items():
        out = list(key)
        for spec in specs:
            values = [r[rel.columns.index(spec.attr)] for r in members] if spec.attr else []
            if spec.fn == 'COUNT':
                out.append(len(members))
            elif spec.fn == 'SUM':
                out.append(sum(values))
            elif spec.fn == 'AVG':
                out.append(sum(values) // len(values))
            elif spec.fn == 'MIN':
                out.append(min(values))
            else:
                out.append(max(values))
        rows.append(tuple(out))
    return Relation('aggregate', columns, rows)


def evaluate_reference(plan: QueryPlan, db: Mapping[str, Relation]) -> Relation:
    """Evaluate plan over db with nested loops and multiset counters."""
    results: Dict[int, Relation] = {}
    for i, step in enumerate(plan.steps):
        if isinstance(step, Scan):
            bare = [c.split('.', 1)[1] for c in step.columns]
            results[i] = Relation(step.table, list(step.columns), db[step.table].values(bare))
        elif isinstance(step, Filter):
            rel = results[step.input]
            j = rel.columns.index(step.column)
            test = _COMPARE[step.comparison]
            results[i] = Relation(rel.name, rel.columns, [r for r in rel.rows if test(r[j], step.literal)])
        elif isinstance(step, Join):
            left, right = results[step.left], results[step.right]
            li, ri = left.columns.index(step.left_attr), right.columns.index(step.right_attr)
            rows = [a + b for a in left.rows for b in right.rows if a[li] == b[ri]]
            results[i] = Relation('join', left.columns + right.columns, rows)
        elif isinstance(step, GroupBy):
            results[i] = _aggregate(results[step.input], step.attrs, [])
        elif isinstance(step, Aggregate):
            specs = [step]
            below = plan.steps[step.input]
            index = step.input
            while isinstance(below, Aggregate):
                specs.insert(0, below)
                index = below.input
                below = plan.steps[index]
            if isinstance(below, GroupBy):
                results[i] = _aggregate(results[below.input], below.attrs, specs)
            else:
                results[i] = _aggregate(results[index], [], specs)
        elif isinstance(step, Sort):
            rel = results[step.input]
            rows = list(rel.rows)
            for attr, desc in reversed(list(zip(step.attrs, step.descending))):
                j = rel.columns.index(attr)
                rows.sort(key=lambda r: r[j], reverse=desc)
            results[i] = Relation(rel.name, rel.columns, rows)
        elif isinstance(step, Project):
            rel = results[step.input]
            results[i] = Relation(rel.name, list(step.columns), rel.values(step.columns))
        elif isinstance(step, SetOp):
            left, right = Counter(results[step.left].rows), Counter(results[step.right].rows)
            merged = left | right if step.kind == 'union' else left & right
            results[i] = Relation(step.kind, list(results[step.left].columns), list(merged.elements()))
    return results[plan.output]


def _order_attrs(plan: QueryPlan) -> List[str]:
    step = plan.steps[plan.output]
    if isinstance(step, Project) and isinstance(plan.steps[step.input], Sort):
        return list(plan.steps[step.input].attrs)
    return []


def results_agree(plan: QueryPlan, rows: Sequence[Sequence[int]], reference: Relation) -> bool:
    """Multiset equality, plus equal ORDER BY key sequences for sorted outputs."""
    produced = [tuple(r) for r in rows]
    if Counter(produced) != Counter(reference.rows):
        return False
    idx = [plan.columns.index(a) for a in _order_attrs(plan) if a in plan.columns]
    if idx:
        return [tuple(r[k] for k in idx) for r in produced] == [tuple(r[k] for k in idx) for r in reference.rows]
    return True


# --- bundles ---

@dataclass
class WitnessBundle:
    sql: str
    schema: Schema
    plan: QueryPlan
    budgets: Dict[str, int]
    seed: bytes
    cs: ConstraintSystem
    assignment: Assignment
    digest: ShapeDigest
    output_columns: List[str]
    public_result: List[Tuple[int, ...]]
    commitment: Optional[dict] = None

    def to_dict(self, public_only: bool = False) -> dict:
        return {
            'version': BUNDLE_VERSION,
            'sql': self.sql,
            'schema': self.schema.to_dict(),
            'plan': self.plan.to_dict(),
            'budgets': dict(sorted(self.budgets.items())),
            'seed': self.seed.hex(),
            'digest': self.digest.to_dict(),
            'output': {'columns': list(self.output_columns),
                       'rows': [[str(v) for v in row] for row in self.public_result]},
            'commitment': self.commitment,
            'circuit': serialize(self.cs, self.assignment, public_only),
        }

    def to_json(self, public_only: bool = False) -> str:
        return json.dumps(self.to_dict(public_only), sort_keys=True)


def generate_witness(plan: QueryPlan, schema: Schema, db: Mapping[str, Relation], blueprint: Blueprint,
                     seed: bytes = b'') -> WitnessBundle:
    """
    Fill every circuit column from db and check the result.

    Raises:
        BudgetExceeded: If a table exceeds the blueprint's budget
        InternalInconsistency: If the filled circuit differs in shape from the
            blueprint, fails its constraints or disagrees with the reference result
    """
    started = time.perf_counter()
    budgets = resolve_budgets(plan, blueprint.budgets, db)
    synthesis = synthesize(plan, schema, budgets, db, seed)
    digest = synthesis.digest
    if digest.hexdigest() != blueprint.digest.hexdigest():
        raise InternalInconsistency("witness circuit shape differs from the compiled blueprint")
    verdict = check_satisfied(synthesis.cs, synthesis.assignment)
    if not verdict.ok:
        raise InternalInconsistency(f"honest witness fails {len(verdict.failures)} constraints, "
                                    f"first {verdict.failures[0]}")
    reference = evaluate_reference(plan, db)
    if not results_agree(plan, synthesis.output.rows, reference):
        raise InternalInconsistency("circuit output disagrees with the reference evaluator")
    logger.info("witness generated: %d result rows in %.3fs", len(synthesis.output.rows),
                time.perf_counter() - started)
    return WitnessBundle(plan.sql, schema, plan, budgets, seed, synthesis.cs, synthesis.assignment,
                         digest, list(synthesis.output.names), list(synthesis.output.rows))


def prove(sql: str, schema: Schema, db: Mapping[str, Relation], budgets: Optional[Mapping[str, int]] = None,
          seed: bytes = b'') -> WitnessBundle:
    """Parse, compile and fill in one call."""
    plan = parse(sql, schema)
    sizes = resolve_budgets(plan, budgets, db)
    blueprint = compile_plan(plan, schema, sizes, seed)
    return generate_witness(plan, schema, db, blueprint, seed)


def tamper(bundle: WitnessBundle, location: Tuple[str, int], value: int) -> WitnessBundle:
    """
    Copy of bundle with one Advice or Instance cell replaced.

    Args:
        location: (column key such as "A12", row)

    Raises:
        OutOfRange: If the location is not an Advice or Instance cell
    """
    key, row = location
    column = next((c for c in bundle.cs.columns if c.key == key), None)
    if column is None or column.kind == ColumnKind.FIXED:
        raise OutOfRange(f"{key} is not an Advice or Instance column")
    if not 0 <= row < bundle.assignment.row_count:
        raise OutOfRange(f"row {row} outside 0..{bundle.assignment.row_count - 1}")
    assignment = bundle.assignment.copy()
    assignment.cells[column][row] = value % MODULUS
    return replace(bundle, assignment=assignment)


def instance_locations(bundle: WitnessBundle) -> List[Tuple[str, int]]:
    """Instance cells bound to the output region, all copy-constrained."""
    bound = set()
    for copy in bundle.cs.copies:
        for col, r in (copy.left, copy.right):
            if col.kind == ColumnKind.INSTANCE:
                bound.add((col.key, r))
    return sorted(bound)


def output_rows(cs: ConstraintSystem, assignment: Assignment) -> List[Tuple[int, ...]]:
    """Valid result rows read from the Instance columns; the last one is validity."""
    instance = cs.columns_of(ColumnKind.INSTANCE)
    if not instance:
        return []
    *data, valid = instance
    cells = assignment.cells
    return [tuple(cells[c][r] for c in data) for r in range(assignment.row_count) if cells[valid][r] == 1]


# --- verification ---

@dataclass
class VerificationReport:
    ok: bool
    digest: str
    result_rows: int
    full: bool
    commitment_root: Optional[str] = None
    failures: List[Tuple[str, int]] = field(default_factory=list)


def verify_bundle(public: dict, root: Optional[dict] = None, full: Optional[dict] = None,
                  db: Optional[Mapping[str, Relation]] = None) -> VerificationReport:
    """
    Verify a public bundle, optionally with its private half.

    Re-parses and recompiles the query from the bundle's SQL, schema and
    budgets, compares the circuit shape, checks that the Instance columns
    carry the published result and, with `full`, checks every constraint.
    With `db` the database must hash to root, and with both `db` and `full`
    every scanned relation must equal its database table.

    Raises:
        ShapeMismatch: If the bundle's plan or circuit shape differs from the recompiled one
        CommitmentMismatch: If root disagrees with the bundle's commitment
        ConstraintFailure: If the Instance cells or any constraint fail
    """
    if public.get('version') != BUNDLE_VERSION:
        raise ShapeMismatch(f"unsupported bundle version {public.get('version')}")
    schema = Schema.from_dict(public['schema'])
    plan = parse(public['sql'], schema)
    if plan.to_dict() != public['plan']:
        raise ShapeMismatch("bundle plan differs from the plan of its query")
    seed = bytes.fromhex(public.get('seed', ''))
    blueprint = compile_plan(plan, schema, public['budgets'], seed)
    digest = blueprint.digest.hexdigest()
    if digest != public['digest']['digest']:
        raise ShapeMismatch("bundle circuit shape differs from the recompiled blueprint")

    committed = None
    if root is not None:
        committed = check_root(public.get('commitment'), root)
        if db is not None:
            actual = commit_database(db)
            if actual != CommitmentRoot.from_dict(root):
                raise CommitmentMismatch(f"database hashes to {actual.root}, expected {committed}")

    if full is not None:
        if full['circuit'].get('public_only', False):
            raise ShapeMismatch("full bundle carries no Advice cells")
        for key in ('sql', 'budgets', 'seed'):
            if full.get(key) != public.get(key):
                raise ShapeMismatch(f"full bundle {key} differs from the public bundle")
        assignment = assignment_from_dict(blueprint.cs, public['circuit'], private=full['circuit'])
    else:
        assignment = _public_assignment(blueprint, public)

    published = sorted(tuple(int(v) for v in row) for row in public['output']['rows'])
    if sorted(output_rows(blueprint.cs, assignment)) != published:
        raise ConstraintFailure("Instance columns do not carry the published result", [('instance:result', 0)])

    failures: List[Tuple[str, int]] = []
    if full is not None:
        failures = check_satisfied(blueprint.cs, assignment).failures
        if failures:
            raise ConstraintFailure(f"{len(failures)} constraints fail, first {failures[0]}", failures)
        if db is not None and root is not None:
            check_scanned_rows(blueprint.cs, assignment, db)
    logger.info("verified bundle %s (%s)", digest[:16], 'full' if full is not None else 'public')
    return VerificationReport(True, digest, len(published), full is not None, committed, failures)


def _public_assignment(blueprint: Blueprint, public: dict) -> Assignment:
    """Assignment with public cells from the bundle and blueprint zeros for Advice."""
    cells = {}
    for col in blueprint.cs.columns:
        if col.kind == ColumnKind.ADVICE:
            cells[col] = [0] * blueprint.assignment.row_count
        elif col.kind == ColumnKind.FIXED:
            cells[col] = list(blueprint.cs.fixed_values[col])
        else:
            values = public['circuit']['cells'].get(col.key)
            if values is None:
                raise ShapeMismatch(f"public bundle lacks Instance column {col.key}")
            cells[col] = [int(v) % MODULUS for v in values]
    row_count = int(public['circuit']['row_count'])
    if row_count != blueprint.assignment.row_count:
        raise ShapeMismatch(f"bundle row count {row_count} differs from {blueprint.assignment.row_count}")
    return Assignment(row_count, cells, bytes.fromhex(public.get('seed', '')))
