"""
Compile a QueryPlan into a circuit.

`synthesize` runs every plan step through its operator gate on a shared
CircuitBuilder; the output of each step is the input of the next one.
`compile_plan` does the same over empty tables to obtain the blueprint,
whose shape depends only on the plan and the row budgets.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

from config import get_config
from constraints import Assignment, CircuitBuilder, ConstraintSystem, ShapeDigest, shape_digest
from errors import BudgetExceeded, StorageError, UnsupportedFeature
from frontend import Aggregate, Filter, GroupBy, Join, Project, QueryPlan, Scan, Schema, SetOp, Sort
from gates import (
    AggregateSpec,
    CircuitTable,
    OutputWitness,
    build_filter,
    build_groupby_gate,
    build_join_gate,
    build_output,
    build_projection,
    build_scan,
    build_set_op,
    build_sort_gate,
)
from utils import is_power_of_two, next_power_of_two

logger = logging.getLogger(__name__)


@dataclass
class Synthesis:
    """A finished circuit with its assignment and the tables each step produced."""
    cs: ConstraintSystem
    assignment: Assignment
    output: OutputWitness
    budgets: Dict[str, int]
    tables: Dict[int, CircuitTable] = field(default_factory=dict)

    @property
    def digest(self) -> ShapeDigest:
        return shape_digest(self.cs, self.assignment)


@dataclass
class Blueprint:
    plan: QueryPlan
    budgets: Dict[str, int]
    cs: ConstraintSystem
    assignment: Assignment
    digest: ShapeDigest
    output_columns: List[str]


def resolve_budgets(plan: QueryPlan, budgets: Optional[Mapping[str, int]] = None,
                    db: Optional[Mapping[str, object]] = None) -> Dict[str, int]:
    """
    Padded row budget of every scanned table.

    Explicit budgets win. Otherwise DEFAULT_BUDGET applies, and when that is
    0 the next power of two of the table's row count in db.

    Raises:
        BudgetExceeded: If a table has more rows than its budget
        ValueError: If a budget is not a power of two or cannot be determined
    """
    config = get_config()
    budgets = dict(budgets or {})
    resolved = {}
    for table in plan.scanned_tables():
        size = budgets.get(table)
        rows = len(db[table].rows) if db is not None and table in db else None
        if size is None:
            if config.DEFAULT_BUDGET:
                size = config.DEFAULT_BUDGET
            elif rows is not None:
                size = next_power_of_two(rows)
            else:
                raise ValueError(f"no row budget for table {table}")
        if size < 2 or not is_power_of_two(size):
            raise ValueError(f"budget for {table} must be a power of two >= 2, got {size}")
        if size > config.MAX_TABLE_ROWS:
            raise BudgetExceeded(f"budget {size} for {table} exceeds MAX_TABLE_ROWS={config.MAX_TABLE_ROWS}")
        if rows is not None and rows > size:
            raise BudgetExceeded(f"table {table} has {rows} rows, budget is {size}")
        resolved[table] = size
    return resolved


def _aggregate_tops(plan: QueryPlan) -> Dict[int, bool]:
    """Steps that end an Aggregate chain, or a GroupBy nothing aggregates."""
    consumed = {s.input for s in plan.steps if isinstance(s, Aggregate)}
    return {
        i: i not in consumed
        for i, s in enumerate(plan.steps)
        if isinstance(s, (Aggregate, GroupBy))
    }


def _group_by(b: CircuitBuilder, plan: QueryPlan, index: int, tables: Dict[int, CircuitTable]) -> CircuitTable:
    specs: List[AggregateSpec] = []
    step = plan.steps[index]
    while isinstance(step, Aggregate):
        specs.append(AggregateSpec(step.fn, step.attr, step.output))
        index = step.input
        step = plan.steps[index]
    specs.reverse()
    if isinstance(step, GroupBy):
        source, attrs = tables[step.input], list(step.attrs)
    else:
        source, attrs = tables[index], []
    return build_groupby_gate(b, source, attrs, specs).output


def _visible(table: CircuitTable) -> CircuitTable:
    """Narrow a relation to its visible columns, in visible order."""
    if table.visible is None:
        return table
    cols = [table.column(name) for name in table.visible]
    return CircuitTable(list(table.visible), cols, table.valid, table.n)


def synthesize(plan: QueryPlan, schema: Schema, budgets: Mapping[str, int],
               db: Optional[Mapping[str, object]] = None, seed: bytes = b'') -> Synthesis:
    """
    Build the circuit for plan and fill it from db.

    With db None every table is empty, which yields the blueprint assignment.

    Raises:
        StorageError: If db lacks a scanned table
        BudgetExceeded: If a table exceeds its budget
    """
    config = get_config()
    u = 1 << config.DEFAULT_LESS_THAN_BOUND_BITS
    b = CircuitBuilder(config.MIN_ROW_COUNT, config.TRANSCRIPT_DOMAIN, seed)
    tops = _aggregate_tops(plan)
    tables: Dict[int, CircuitTable] = {}
    started = time.perf_counter()

    for index, step in enumerate(plan.steps):
        if isinstance(step, Scan):
            ts = schema.table(step.table)
            if db is None:
                rows = []
            elif step.table not in db:
                raise StorageError(f"database has no table {step.table}")
            else:
                bare = [c.split('.', 1)[1] for c in step.columns]
                rows = db[step.table].values(bare)
            unique = {ts.qualified(c) for c in ts.unique_columns}
            tables[index] = build_scan(b, step.table, step.columns, rows, budgets[step.table], unique)
        elif isinstance(step, Filter):
            tables[index] = build_filter(b, tables[step.input], step.column, step.comparison,
                                         step.literal, u=u).output
        elif isinstance(step, Join):
            tables[index] = build_join_gate(b, tables[step.left], tables[step.right],
                                            step.left_attr, step.right_attr, step.mode).output
        elif isinstance(step, (GroupBy, Aggregate)):
            if tops[index]:
                tables[index] = _group_by(b, plan, index, tables)
        elif isinstance(step, Sort):
            keys = list(zip(step.attrs, step.descending))
            tables[index] = build_sort_gate(b, tables[step.input], keys).output
        elif isinstance(step, Project):
            tables[index] = build_projection(b, tables[step.input], step.columns).output
        elif isinstance(step, SetOp):
            if step.kind not in ('union', 'intersect'):
                raise UnsupportedFeature(f"set operation {step.kind} has no result relation")
            tables[index] = build_set_op(b, _visible(tables[step.left]), _visible(tables[step.right]),
                                         step.kind).output
        else:
            raise UnsupportedFeature(f"plan step {step!r}")
        logger.debug("step %d %s done", index, step.op)

    output = build_output(b, tables[plan.output])
    cs, assignment = b.finish()
    logger.info("synthesized %d steps into %d rows x %d columns in %.3fs",
                len(plan.steps), assignment.row_count, len(cs.columns), time.perf_counter() - started)
    return Synthesis(cs, assignment, output, dict(budgets), tables)


def compile_plan(plan: QueryPlan, schema: Schema, sizes: Mapping[str, int], seed: bytes = b'') -> Blueprint:
    """
    Compile the data-independent blueprint of a plan under fixed budgets.

    Args:
        plan: Parsed query
        schema: Database schema
        sizes: Padded row budget per scanned table
        seed: Transcript salt
    """
    budgets = resolve_budgets(plan, sizes)
    synthesis = synthesize(plan, schema, budgets, None, seed)
    digest = synthesis.digest
    logger.info("compiled blueprint %s for budgets %s", digest.hexdigest()[:16], budgets)
    return Blueprint(plan, budgets, synthesis.cs, synthesis.assignment, digest, list(synthesis.output.names))
