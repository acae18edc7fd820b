"""
PLONKish constraint system: column declarations, polynomial gates, copy
constraints and lookup arguments, plus the mock prover that checks an
assignment cell by cell instead of producing a proof.
"""
import hashlib
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from errors import (
    DegreeTooHigh,
    FrozenSystem,
    InternalInconsistency,
    ShapeMismatch,
    UnknownColumn,
)
from field import MODULUS, FieldElement, Transcript

logger = logging.getLogger(__name__)

MAX_DEGREE = 3
ROTATIONS = (-1, 0, 1)


class ColumnKind(str, Enum):
    FIXED = 'fixed'
    ADVICE = 'advice'
    INSTANCE = 'instance'


@dataclass(frozen=True)
class ColumnId:
    """A column handle; identity is (kind, index), the name is a label only."""
    kind: ColumnKind
    index: int
    name: str = field(default='', compare=False)

    @property
    def key(self) -> str:
        return f"{self.kind.value[0].upper()}{self.index}"

    @property
    def label(self) -> str:
        return self.name or self.key

    def at(self, rotation: int = 0) -> 'Cell':
        return Cell(self, rotation)

    @property
    def cur(self) -> 'Cell':
        return Cell(self, 0)

    @property
    def next(self) -> 'Cell':
        return Cell(self, 1)

    @property
    def prev(self) -> 'Cell':
        return Cell(self, -1)


# --- polynomial expressions ---

ExprLike = Union['Expression', int, FieldElement]


def as_expr(value: ExprLike) -> 'Expression':
    if isinstance(value, Expression):
        return value
    if isinstance(value, FieldElement):
        return Constant(value.value)
    if isinstance(value, int):
        return Constant(value % MODULUS)
    raise TypeError(f"cannot use {type(value).__name__} in a polynomial expression")


class Expression:
    """Base of the PolyExpr tree. Operators build new nodes."""

    def __add__(self, other: ExprLike) -> 'Expression':
        return Sum(self, as_expr(other))

    def __radd__(self, other: ExprLike) -> 'Expression':
        return Sum(as_expr(other), self)

    def __sub__(self, other: ExprLike) -> 'Expression':
        return Sum(self, Negate(as_expr(other)))

    def __rsub__(self, other: ExprLike) -> 'Expression':
        return Sum(as_expr(other), Negate(self))

    def __mul__(self, other: ExprLike) -> 'Expression':
        return Product(self, as_expr(other))

    def __rmul__(self, other: ExprLike) -> 'Expression':
        return Product(as_expr(other), self)

    def __neg__(self) -> 'Expression':
        return Negate(self)

    def degree(self) -> int:
        raise NotImplementedError

    def columns(self) -> set:
        raise NotImplementedError

    def rotate(self, k: int) -> 'Expression':
        raise NotImplementedError

    def compile(self, column: Callable[[ColumnId], Sequence[int]], n: int,
                challenges: Sequence[int]) -> Callable[[int], int]:
        """Return a function row -> unreduced integer value of this expression."""
        raise NotImplementedError

    def to_sexpr(self) -> str:
        raise NotImplementedError

    def __repr__(self) -> str:
        return self.to_sexpr()


@dataclass(frozen=True, repr=False, eq=False)
class Constant(Expression):
    value: int

    def degree(self) -> int:
        return 0

    def columns(self) -> set:
        return set()

    def rotate(self, k: int) -> Expression:
        return self

    def compile(self, column, n, challenges):
        v = self.value
        return lambda r: v

    def to_sexpr(self) -> str:
        return str(self.value)


@dataclass(frozen=True, repr=False, eq=False)
class Cell(Expression):
    column: ColumnId
    rotation: int = 0

    def __post_init__(self):
        if self.rotation not in ROTATIONS:
            raise ValueError(f"rotation {self.rotation} outside {ROTATIONS}")

    def degree(self) -> int:
        return 1

    def columns(self) -> set:
        return {self.column}

    def rotate(self, k: int) -> Expression:
        return Cell(self.column, self.rotation + k)

    def compile(self, column, n, challenges):
        values = column(self.column)
        rot = self.rotation
        if rot == 0:
            return lambda r: values[r]
        return lambda r: values[(r + rot) % n]

    def to_sexpr(self) -> str:
        suffix = {-1: '@prev', 0: '', 1: '@next'}[self.rotation]
        return f"{self.column.key}{suffix}"


@dataclass(frozen=True, repr=False, eq=False)
class Challenge(Expression):
    """Verifier challenge squeezed from the transcript; degree 0."""
    index: int

    def degree(self) -> int:
        return 0

    def columns(self) -> set:
        return set()

    def rotate(self, k: int) -> Expression:
        return self

    def compile(self, column, n, challenges):
        v = challenges[self.index]
        return lambda r: v

    def to_sexpr(self) -> str:
        return f"ch{self.index}"


@dataclass(frozen=True, repr=False, eq=False)
class Sum(Expression):
    left: Expression
    right: Expression

    def degree(self) -> int:
        return max(self.left.degree(), self.right.degree())

    def columns(self) -> set:
        return self.left.columns() | self.right.columns()

    def rotate(self, k: int) -> Expression:
        return Sum(self.left.rotate(k), self.right.rotate(k))

    def compile(self, column, n, challenges):
        fa = self.left.compile(column, n, challenges)
        fb = self.right.compile(column, n, challenges)
        return lambda r: fa(r) + fb(r)

    def to_sexpr(self) -> str:
        return f"(+ {self.left.to_sexpr()} {self.right.to_sexpr()})"


@dataclass(frozen=True, repr=False, eq=False)
class Product(Expression):
    left: Expression
    right: Expression

    def degree(self) -> int:
        return self.left.degree() + self.right.degree()

    def columns(self) -> set:
        return self.left.columns() | self.right.columns()

    def rotate(self, k: int) -> Expression:
        return Product(self.left.rotate(k), self.right.rotate(k))

    def compile(self, column, n, challenges):
        fa = self.left.compile(column, n, challenges)
        fb = self.right.compile(column, n, challenges)
        return lambda r: fa(r) * fb(r) % MODULUS

    def to_sexpr(self) -> str:
        return f"(* {self.left.to_sexpr()} {self.right.to_sexpr()})"


@dataclass(frozen=True, repr=False, eq=False)
class Negate(Expression):
    inner: Expression

    def degree(self) -> int:
        return self.inner.degree()

    def columns(self) -> set:
        return self.inner.columns()

    def rotate(self, k: int) -> Expression:
        return Negate(self.inner.rotate(k))

    def compile(self, column, n, challenges):
        fa = self.inner.compile(column, n, challenges)
        return lambda r: -fa(r)

    def to_sexpr(self) -> str:
        return f"(- {self.inner.to_sexpr()})"


def sum_exprs(terms: Iterable[ExprLike]) -> Expression:
    """Sum of terms; the empty sum is the constant zero."""
    total: Optional[Expression] = None
    for term in terms:
        total = as_expr(term) if total is None else total + term
    return total if total is not None else Constant(0)


# --- circuit components ---

@dataclass(frozen=True)
class Gate:
    name: str
    selector: ColumnId
    constraints: Tuple[Expression, ...]


@dataclass(frozen=True)
class CopyConstraint:
    left: Tuple[ColumnId, int]
    right: Tuple[ColumnId, int]

    @property
    def id(self) -> str:
        (lc, lr), (rc, rr) = self.left, self.right
        return f"copy:{lc.label}[{lr}]={rc.label}[{rr}]"


@dataclass(frozen=True)
class LookupArgument:
    name: str
    selector: ColumnId
    inputs: Tuple[Expression, ...]
    table: Tuple[ColumnId, ...]


@dataclass(frozen=True)
class ChallengeSpec:
    label: str
    columns: Tuple[ColumnId, ...]


class ConstraintSystem:
    """
    Circuit shape. Columns, gates, copies, lookups and challenges are
    registered until freeze(); afterwards the shape is immutable and the
    Fixed column contents are part of it.
    """

    def __init__(self, transcript_domain: str = 'circuitql/v1'):
        self.transcript_domain = transcript_domain
        self.columns: List[ColumnId] = []
        self._counts = {kind: 0 for kind in ColumnKind}
        self.gates: List[Gate] = []
        self.copies: List[CopyConstraint] = []
        self.lookups: List[LookupArgument] = []
        self.challenges: List[ChallengeSpec] = []
        self.fixed_values: Dict[ColumnId, List[int]] = {}
        self.components: List[dict] = []
        self.frozen = False
        self._known: set = set()
        self._names: set = set()

    def _check_open(self):
        if self.frozen:
            raise FrozenSystem("constraint system is frozen")

    def _check_columns(self, columns: Iterable[ColumnId]):
        for col in columns:
            if col not in self._known:
                raise UnknownColumn(f"column {col.label} ({col.key}) was never declared")

    def declare_column(self, kind: ColumnKind, name: str = '') -> ColumnId:
        self._check_open()
        col = ColumnId(ColumnKind(kind), self._counts[ColumnKind(kind)], name)
        self._counts[col.kind] += 1
        self.columns.append(col)
        self._known.add(col)
        return col

    def add_gate(self, gate: Gate) -> int:
        """
        Register a gate; every constraint is checked as selector * expr = 0.

        Returns:
            Gate handle (position in registration order)

        Raises:
            FrozenSystem, UnknownColumn, DegreeTooHigh
        """
        self._check_open()
        if gate.selector.kind != ColumnKind.FIXED:
            raise ValueError(f"selector of gate {gate.name} must be a Fixed column")
        if gate.name in self._names:
            raise ValueError(f"duplicate gate or lookup name: {gate.name}")
        self._check_columns([gate.selector])
        for expr in gate.constraints:
            self._check_columns(expr.columns())
            if expr.degree() > MAX_DEGREE:
                raise DegreeTooHigh(
                    f"gate {gate.name}: degree {expr.degree()} exceeds {MAX_DEGREE}"
                )
        self._names.add(gate.name)
        self.gates.append(gate)
        return len(self.gates) - 1

    def add_copy(self, left: Tuple[ColumnId, int], right: Tuple[ColumnId, int]) -> int:
        self._check_open()
        self._check_columns([left[0], right[0]])
        self.copies.append(CopyConstraint(left, right))
        return len(self.copies) - 1

    def add_lookup(self, lookup: LookupArgument) -> int:
        self._check_open()
        if len(lookup.inputs) != len(lookup.table):
            raise ValueError(f"lookup {lookup.name}: input and table widths differ")
        if lookup.name in self._names:
            raise ValueError(f"duplicate gate or lookup name: {lookup.name}")
        self._check_columns([lookup.selector, *lookup.table])
        for expr in lookup.inputs:
            self._check_columns(expr.columns())
            if expr.degree() > MAX_DEGREE:
                raise DegreeTooHigh(f"lookup {lookup.name}: input degree exceeds {MAX_DEGREE}")
        self._names.add(lookup.name)
        self.lookups.append(lookup)
        return len(self.lookups) - 1

    def declare_challenge(self, label: str, columns: Sequence[ColumnId]) -> Challenge:
        self._check_open()
        self._check_columns(columns)
        self.challenges.append(ChallengeSpec(label, tuple(columns)))
        return Challenge(len(self.challenges) - 1)

    def freeze(self, fixed_values: Optional[Dict[ColumnId, List[int]]] = None):
        if fixed_values is not None:
            self.fixed_values = {c: list(v) for c, v in fixed_values.items()}
        self.frozen = True

    def column_counts(self) -> Dict[str, int]:
        return {kind.value: self._counts[kind] for kind in ColumnKind}

    def columns_of(self, kind: ColumnKind) -> List[ColumnId]:
        return [c for c in self.columns if c.kind == kind]


def declare_column(cs: ConstraintSystem, kind: ColumnKind, name: str = '') -> ColumnId:
    return cs.declare_column(kind, name)


def add_gate(cs: ConstraintSystem, g: Gate) -> int:
    return cs.add_gate(g)


# --- assignment and checking ---

@dataclass
class Assignment:
    """The rectangular matrix: canonical ints per column, row_count rows each."""
    row_count: int
    cells: Dict[ColumnId, List[int]]
    seed: bytes = b''

    def value(self, column: ColumnId, row: int) -> FieldElement:
        return FieldElement(self.cells[column][row])

    def copy(self) -> 'Assignment':
        return Assignment(self.row_count, {c: list(v) for c, v in self.cells.items()}, self.seed)


@dataclass
class Verdict:
    failures: List[Tuple[str, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def __bool__(self) -> bool:
        return self.ok


def column_commitment(values: Sequence[int]) -> bytes:
    """SHA-256 of the column's 32-byte cells with trailing zero cells stripped."""
    end = len(values)
    while end and values[end - 1] == 0:
        end -= 1
    h = hashlib.sha256()
    for v in values[:end]:
        h.update((v % MODULUS).to_bytes(32, 'big'))
    return h.digest()


def derive_challenges(cs: ConstraintSystem, column: Callable[[ColumnId], Sequence[int]],
                      seed: bytes) -> List[int]:
    """Replay the transcript in challenge declaration order."""
    transcript = Transcript(cs.transcript_domain, seed)
    values = []
    for spec in cs.challenges:
        for col in spec.columns:
            transcript.absorb(b'column', column_commitment(column(col)))
        values.append(transcript.challenge(spec.label.encode('utf-8')).value)
    return values


def _check_dimensions(cs: ConstraintSystem, asg: Assignment):
    declared = set(cs.columns)
    present = set(asg.cells)
    if declared != present:
        missing = sorted(c.key for c in declared - present)
        extra = sorted(c.key for c in present - declared)
        raise ShapeMismatch(f"assignment columns differ (missing {missing}, unexpected {extra})")
    for col, values in asg.cells.items():
        if len(values) != asg.row_count:
            raise ShapeMismatch(
                f"column {col.label} has {len(values)} cells, expected {asg.row_count}"
            )


def check_satisfied(cs: ConstraintSystem, asg: Assignment) -> Verdict:
    """
    Evaluate every gate, copy constraint and lookup against the assignment.

    Challenges are re-derived from a fresh transcript over the assignment,
    so a witness cannot pick its own randomness.

    Raises:
        ShapeMismatch: If the assignment does not cover the declared columns
    """
    _check_dimensions(cs, asg)
    n = asg.row_count
    cells = asg.cells
    column = cells.__getitem__
    challenges = derive_challenges(cs, column, asg.seed)
    failures: List[Tuple[str, int]] = []

    for gate in cs.gates:
        selector = cells[gate.selector]
        active = [r for r in range(n) if selector[r]]
        for r in active:
            if selector[r] != 1:
                failures.append((f"selector:{gate.name}", r))
        evaluators = [c.compile(column, n, challenges) for c in gate.constraints]
        for k, evaluate in enumerate(evaluators):
            tag = f"gate:{gate.name}#{k}"
            for r in active:
                if selector[r] * evaluate(r) % MODULUS:
                    failures.append((tag, r))

    for copy in cs.copies:
        (lc, lr), (rc, rr) = copy.left, copy.right
        if not (0 <= lr < n and 0 <= rr < n):
            raise ShapeMismatch(f"{copy.id} references a row outside {n}")
        if cells[lc][lr] != cells[rc][rr]:
            failures.append((copy.id, lr))

    for lookup in cs.lookups:
        table = set(zip(*(cells[c] for c in lookup.table)))
        selector = cells[lookup.selector]
        evaluators = [e.compile(column, n, challenges) for e in lookup.inputs]
        tag = f"lookup:{lookup.name}"
        for r in range(n):
            if selector[r] and tuple(f(r) % MODULUS for f in evaluators) not in table:
                failures.append((tag, r))

    failures.sort()
    if failures:
        logger.debug("constraint check: %d failures, first %s", len(failures), failures[0])
    return Verdict(failures)


# --- shape digest and reporting ---

@dataclass(frozen=True)
class ShapeDigest:
    fixed_columns: int
    advice_columns: int
    instance_columns: int
    row_count: int
    gates: Tuple[Tuple[str, int], ...]
    lookup_count: int
    copy_count: int
    structure_hash: str
    fixed_hash: str

    def hexdigest(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.fixed_columns, self.advice_columns, self.instance_columns,
                       self.row_count, self.gates, self.lookup_count, self.copy_count,
                       self.structure_hash, self.fixed_hash)).encode('utf-8'))
        return h.hexdigest()

    def to_dict(self) -> dict:
        return {
            'fixed_columns': self.fixed_columns,
            'advice_columns': self.advice_columns,
            'instance_columns': self.instance_columns,
            'row_count': self.row_count,
            'gates': [list(g) for g in self.gates],
            'lookup_count': self.lookup_count,
            'copy_count': self.copy_count,
            'structure_hash': self.structure_hash,
            'fixed_hash': self.fixed_hash,
            'digest': self.hexdigest(),
        }


def _structure_lines(cs: ConstraintSystem) -> List[str]:
    lines = [f"col {c.key} {c.label}" for c in cs.columns]
    for g in cs.gates:
        lines.append(f"gate {g.name} {g.selector.key} " + ' '.join(e.to_sexpr() for e in g.constraints))
    for lk in cs.lookups:
        lines.append(
            f"lookup {lk.name} {lk.selector.key} "
            + ' '.join(e.to_sexpr() for e in lk.inputs) + ' -> ' + ' '.join(c.key for c in lk.table)
        )
    for cp in cs.copies:
        lines.append(f"copy {cp.left[0].key}[{cp.left[1]}] {cp.right[0].key}[{cp.right[1]}]")
    for ch in cs.challenges:
        lines.append(f"challenge {ch.label} " + ' '.join(c.key for c in ch.columns))
    return lines


def shape_digest(cs: ConstraintSystem, asg: Assignment) -> ShapeDigest:
    """Digest of circuit structure and Fixed contents; Advice and Instance values never enter."""
    structure = hashlib.sha256('\n'.join(_structure_lines(cs)).encode('utf-8')).hexdigest()
    fixed = hashlib.sha256()
    for col in cs.columns_of(ColumnKind.FIXED):
        fixed.update(col.key.encode('utf-8'))
        fixed.update(column_commitment(asg.cells.get(col, [])))
    counts = cs.column_counts()
    return ShapeDigest(
        fixed_columns=counts['fixed'],
        advice_columns=counts['advice'],
        instance_columns=counts['instance'],
        row_count=asg.row_count,
        gates=tuple((g.name, len(g.constraints)) for g in cs.gates),
        lookup_count=len(cs.lookups),
        copy_count=len(cs.copies),
        structure_hash=structure,
        fixed_hash=fixed.hexdigest(),
    )


def count_constraints(cs: ConstraintSystem) -> dict:
    """
    Active-row constraint counts per gate and lookup, read from the Fixed
    selector contents stored at freeze time.
    """
    gates = {}
    for g in cs.gates:
        rows = sum(1 for v in cs.fixed_values.get(g.selector, []) if v)
        gates[g.name] = {
            'active_rows': rows,
            'constraints_per_row': len(g.constraints),
            'total': rows * len(g.constraints),
        }
    lookups = {}
    for lk in cs.lookups:
        lookups[lk.name] = sum(1 for v in cs.fixed_values.get(lk.selector, []) if v)
    return {
        'gates': gates,
        'lookups': lookups,
        'copies': len(cs.copies),
        'totals': {
            'gate_constraints': sum(g['total'] for g in gates.values()),
            'lookup_rows': sum(lookups.values()),
            'copies': len(cs.copies),
        },
    }


def count_members(report: dict, names: Iterable[str]) -> int:
    """Sum of gate constraints and lookup rows over the named components."""
    total = 0
    for name in names:
        if name in report['gates']:
            total += report['gates'][name]['total']
        else:
            total += report['lookups'].get(name, 0)
    return total


def component_report(cs: ConstraintSystem) -> List[dict]:
    """Analytic against actual counts for every annotated component."""
    counts = count_constraints(cs)
    rows = []
    for comp in cs.components:
        for category, expected in comp['expected'].items():
            actual = count_members(counts, comp['members'].get(category, []))
            rows.append({
                'kind': comp['kind'],
                'region': comp['region'],
                'params': comp['params'],
                'category': category,
                'expected': expected,
                'actual': actual,
                'match': expected == actual,
            })
    return rows


# --- serialization ---

def serialize(cs: ConstraintSystem, asg: Assignment, public_only: bool = False) -> dict:
    """JSON-ready circuit plus cell values as decimal strings; Advice omitted when public_only."""
    columns = {}
    for col in cs.columns:
        if public_only and col.kind == ColumnKind.ADVICE:
            continue
        columns[col.key] = [str(v) for v in asg.cells[col]]
    return {
        'row_count': asg.row_count,
        'seed': asg.seed.hex(),
        'public_only': public_only,
        'columns': [{'key': c.key, 'kind': c.kind.value, 'index': c.index, 'name': c.name}
                    for c in cs.columns],
        'gates': [{'name': g.name, 'selector': g.selector.key,
                   'constraints': [e.to_sexpr() for e in g.constraints]} for g in cs.gates],
        'lookups': [{'name': lk.name, 'selector': lk.selector.key,
                     'inputs': [e.to_sexpr() for e in lk.inputs],
                     'table': [c.key for c in lk.table]} for lk in cs.lookups],
        'copies': [[cp.left[0].key, cp.left[1], cp.right[0].key, cp.right[1]] for cp in cs.copies],
        'cells': columns,
    }


def assignment_from_dict(cs: ConstraintSystem, data: dict,
                         private: Optional[dict] = None) -> Assignment:
    """
    Rebuild an Assignment for cs from serialized cells. Public cells come
    from data; Advice cells come from private when given. Fixed cells always
    come from the compiled circuit.
    """
    row_count = int(data['row_count'])
    cells = {}
    for col in cs.columns:
        if col.kind == ColumnKind.FIXED:
            values = cs.fixed_values.get(col)
        elif col.kind == ColumnKind.INSTANCE:
            values = data['cells'].get(col.key)
        else:
            source = private if private is not None else data
            values = source['cells'].get(col.key)
        if values is None:
            raise ShapeMismatch(f"serialized assignment lacks column {col.key}")
        cells[col] = [int(v) % MODULUS for v in values]
    return Assignment(row_count, cells, bytes.fromhex(data.get('seed', '')))


# --- layouter ---

class CircuitBuilder:
    """
    Grows a ConstraintSystem and its assignment together. Every region
    starts at row 0 in fresh columns; reading past a column's filled
    length yields zero, which matches the final zero padding.
    """

    def __init__(self, min_rows: int = 512, domain: str = 'circuitql/v1', seed: bytes = b''):
        self.cs = ConstraintSystem(domain)
        self.values: Dict[ColumnId, List[int]] = {}
        self.min_rows = min_rows
        self.seed = seed
        self.transcript = Transcript(domain, seed)
        self.challenge_values: List[int] = []
        self._sealed: set = set()
        self._path: List[str] = []
        self._counter = 0
        self._constants: Optional[ColumnId] = None
        self._constant_rows: Dict[int, int] = {}
        self._u8_table: Optional[ColumnId] = None
        self._selectors: Dict[Tuple[int, int], ColumnId] = {}

    # naming

    @contextmanager
    def region(self, name: str):
        """Scope gate and column names under a unique region prefix."""
        self._counter += 1
        self._path.append(f"{name}#{self._counter}")
        try:
            yield self.prefix
        finally:
            self._path.pop()

    @property
    def prefix(self) -> str:
        return '/'.join(self._path)

    def qualify(self, name: str) -> str:
        return f"{self.prefix}/{name}" if self._path else name

    # columns

    def _declare(self, kind: ColumnKind, name: str, values: Sequence[int]) -> ColumnId:
        col = self.cs.declare_column(kind, self.qualify(name))
        self.values[col] = [int(v) % MODULUS for v in values]
        return col

    def advice(self, name: str, values: Sequence[int]) -> ColumnId:
        return self._declare(ColumnKind.ADVICE, name, values)

    def fixed(self, name: str, values: Sequence[int]) -> ColumnId:
        return self._declare(ColumnKind.FIXED, name, values)

    def instance(self, name: str, values: Sequence[int]) -> ColumnId:
        return self._declare(ColumnKind.INSTANCE, name, values)

    def selector(self, start: int, stop: int) -> ColumnId:
        """Shared Fixed selector that is 1 on rows [start, stop)."""
        key = (start, stop)
        if key not in self._selectors:
            col = self.cs.declare_column(ColumnKind.FIXED, f"q[{start}:{stop})")
            self.values[col] = [0] * start + [1] * max(stop - start, 0)
            self._selectors[key] = col
        return self._selectors[key]

    def first_row(self) -> ColumnId:
        """Fixed column that is 1 on row 0 only."""
        return self.selector(0, 1)

    def row_flag(self, row: int) -> ColumnId:
        """Fixed column that is 1 on a single row."""
        return self.selector(row, row + 1)

    def assign(self, col: ColumnId, row: int, value: int):
        if col in self._sealed:
            raise InternalInconsistency(f"column {col.label} is bound to a challenge and sealed")
        values = self.values[col]
        if row >= len(values):
            values.extend([0] * (row + 1 - len(values)))
        values[row] = int(value) % MODULUS

    def column_values(self, col: ColumnId, n: Optional[int] = None) -> List[int]:
        values = self.values[col]
        if n is None:
            return list(values)
        return [values[r] if r < len(values) else 0 for r in range(n)]

    def evaluate(self, expr: ExprLike, n: int) -> List[int]:
        """Evaluate expr on rows [0, n) against current values."""
        expr = as_expr(expr)

        def read(values, r):
            return values[r] if 0 <= r < len(values) else 0

        return [self._eval(expr, r, read) % MODULUS for r in range(n)]

    def _eval(self, expr: Expression, r: int, read) -> int:
        if isinstance(expr, Constant):
            return expr.value
        if isinstance(expr, Cell):
            return read(self.values[expr.column], r + expr.rotation)
        if isinstance(expr, Challenge):
            return self.challenge_values[expr.index]
        if isinstance(expr, Sum):
            return self._eval(expr.left, r, read) + self._eval(expr.right, r, read)
        if isinstance(expr, Product):
            return self._eval(expr.left, r, read) * self._eval(expr.right, r, read) % MODULUS
        if isinstance(expr, Negate):
            return -self._eval(expr.inner, r, read)
        raise TypeError(f"unknown expression node {type(expr).__name__}")

    # constraints

    def gate(self, name: str, selector: ColumnId, constraints: Sequence[ExprLike]) -> str:
        full = self.qualify(name)
        self.cs.add_gate(Gate(full, selector, tuple(as_expr(c) for c in constraints)))
        return full

    def lookup(self, name: str, selector: ColumnId, inputs: Sequence[ExprLike],
               table: Sequence[ColumnId]) -> str:
        full = self.qualify(name)
        self.cs.add_lookup(LookupArgument(full, selector, tuple(as_expr(e) for e in inputs), tuple(table)))
        return full

    def copy(self, left: Tuple[ColumnId, int], right: Tuple[ColumnId, int]):
        self.cs.add_copy(left, right)

    def constant(self, value: int) -> Tuple[ColumnId, int]:
        """Cell of the shared constants column holding value."""
        value %= MODULUS
        if self._constants is None:
            self._constants = self.cs.declare_column(ColumnKind.FIXED, 'constants')
            self.values[self._constants] = []
        if value not in self._constant_rows:
            self._constant_rows[value] = len(self.values[self._constants])
            self.values[self._constants].append(value)
        return self._constants, self._constant_rows[value]

    def constrain_constant(self, cell: Tuple[ColumnId, int], value: int):
        self.copy(cell, self.constant(value))

    def u8_table(self) -> ColumnId:
        """Shared Fixed column holding 0..255."""
        if self._u8_table is None:
            self._u8_table = self.cs.declare_column(ColumnKind.FIXED, 'u8_table')
            self.values[self._u8_table] = list(range(256))
        return self._u8_table

    def challenge(self, label: str, columns: Sequence[ColumnId]) -> Tuple[Challenge, int]:
        """
        Absorb the bound columns, squeeze a challenge and seal the columns.

        Returns:
            The Challenge expression node and its value
        """
        label = self.qualify(label)
        node = self.cs.declare_challenge(label, columns)
        for col in columns:
            self.transcript.absorb(b'column', column_commitment(self.values[col]))
            self._sealed.add(col)
        value = self.transcript.challenge(label.encode('utf-8')).value
        self.challenge_values.append(value)
        return node, value

    def annotate(self, kind: str, params: dict, expected: Dict[str, int],
                 members: Dict[str, List[str]]):
        """Record a component with its analytic constraint counts for reporting."""
        self.cs.components.append({
            'kind': kind,
            'region': self.prefix,
            'params': params,
            'expected': expected,
            'members': members,
        })

    # finish

    def used_rows(self) -> int:
        return max((len(v) for v in self.values.values()), default=0)

    def finish(self) -> Tuple[ConstraintSystem, Assignment]:
        """Pad every column to the row count, freeze the system and return both."""
        used = self.used_rows()
        row_count = self.min_rows
        while row_count <= used:
            row_count *= 2
        cells = {}
        for col in self.cs.columns:
            values = self.values[col]
            cells[col] = values + [0] * (row_count - len(values))
        fixed = {c: cells[c] for c in self.cs.columns if c.kind == ColumnKind.FIXED}
        self.cs.freeze(fixed)
        logger.debug("circuit finished: %d columns, %d rows, %d gates, %d lookups, %d copies",
                     len(self.cs.columns), row_count, len(self.cs.gates),
                     len(self.cs.lookups), len(self.cs.copies))
        return self.cs, Assignment(row_count, cells, self.seed)
