"""
Database commitment as a SHA-256 hash tree over table rows.

Leaves are ordered by table name, then row index. Odd levels duplicate
their last node.
"""
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from constraints import Assignment, ColumnKind, ConstraintSystem
from errors import CommitmentMismatch

logger = logging.getLogger(__name__)

ENCODING_VERSION = 1
EMPTY_MARKER = b'circuitql/empty-database'
LEAF_PREFIX = b'\x00'
NODE_PREFIX = b'\x01'


def _length_prefixed(data: bytes) -> bytes:
    return len(data).to_bytes(4, 'big') + data


def encode_row(table: str, row: int, values: Sequence[int]) -> bytes:
    """(table name, row index, values as 64-bit big-endian), each part length-prefixed."""
    payload = b''.join(int(v).to_bytes(8, 'big') for v in values)
    return _length_prefixed(table.encode('utf-8')) + row.to_bytes(8, 'big') + _length_prefixed(payload)


def leaf_hash(table: str, row: int, values: Sequence[int]) -> bytes:
    return hashlib.sha256(LEAF_PREFIX + encode_row(table, row, values)).digest()


def node_hash(left: bytes, right: bytes) -> bytes:
    return hashlib.sha256(NODE_PREFIX + left + right).digest()


def empty_root() -> bytes:
    return hashlib.sha256(LEAF_PREFIX + EMPTY_MARKER).digest()


def database_leaves(db: Mapping[str, object]) -> List[Tuple[str, int, bytes]]:
    leaves = []
    for name in sorted(db):
        for i, row in enumerate(db[name].rows):
            leaves.append((name, i, leaf_hash(name, i, row)))
    return leaves


class MerkleTree:
    """Binary hash tree keeping every level so a single leaf can be updated."""

    def __init__(self, leaves: Sequence[bytes]):
        self.levels: List[List[bytes]] = [list(leaves)]
        while len(self.levels[-1]) > 1:
            level = self.levels[-1]
            if len(level) % 2:
                level = level + [level[-1]]
            self.levels.append([node_hash(level[i], level[i + 1]) for i in range(0, len(level), 2)])

    @property
    def leaf_count(self) -> int:
        return len(self.levels[0])

    @property
    def root(self) -> bytes:
        if not self.levels[0]:
            return empty_root()
        return self.levels[-1][0]

    def update(self, index: int, leaf: bytes) -> bytes:
        """Replace one leaf and recompute its path to the root."""
        if not 0 <= index < self.leaf_count:
            raise IndexError(f"leaf {index} outside 0..{self.leaf_count - 1}")
        self.levels[0][index] = leaf
        for depth in range(len(self.levels) - 1):
            level = self.levels[depth]
            pair = index - index % 2
            right = level[pair + 1] if pair + 1 < len(level) else level[pair]
            index //= 2
            self.levels[depth + 1][index] = node_hash(level[pair], right)
        return self.root

    def proof(self, index: int) -> List[Tuple[str, bool]]:
        """Sibling hashes bottom-up, each with whether the sibling is on the right."""
        if not 0 <= index < self.leaf_count:
            raise IndexError(f"leaf {index} outside 0..{self.leaf_count - 1}")
        path = []
        for level in self.levels[:-1]:
            if index % 2:
                path.append((level[index - 1].hex(), False))
            else:
                sibling = level[index + 1] if index + 1 < len(level) else level[index]
                path.append((sibling.hex(), True))
            index //= 2
        return path


def verify_proof(leaf: bytes, proof: Sequence[Tuple[str, bool]], root: bytes) -> bool:
    node = leaf
    for sibling, on_right in proof:
        other = bytes.fromhex(sibling)
        node = node_hash(node, other) if on_right else node_hash(other, node)
    return node == root


@dataclass(frozen=True)
class CommitmentRoot:
    root: str
    leaf_count: int
    encoding_version: int = ENCODING_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'CommitmentRoot':
        return cls(str(data['root']), int(data['leaf_count']), int(data.get('encoding_version', 0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def commit_database(db: Mapping[str, object]) -> CommitmentRoot:
    """Root over every row of every table; an empty database hashes the empty marker."""
    leaves = database_leaves(db)
    tree = MerkleTree([h for _, _, h in leaves])
    root = CommitmentRoot(tree.root.hex(), tree.leaf_count)
    logger.info("committed %d tables, %d rows: %s", len(db), root.leaf_count, root.root)
    return root


def prove_row(db: Mapping[str, object], table: str, row: int) -> dict:
    """Inclusion proof for one row."""
    leaves = database_leaves(db)
    index = next((i for i, (t, r, _) in enumerate(leaves) if t == table and r == row), None)
    if index is None:
        raise IndexError(f"{table} has no row {row}")
    tree = MerkleTree([h for _, _, h in leaves])
    return {'table': table, 'row': row, 'leaf_index': index, 'path': tree.proof(index)}


def verify_row(root: CommitmentRoot, table: str, row: int, values: Sequence[int], proof: dict) -> bool:
    if root.encoding_version != ENCODING_VERSION:
        return False
    if proof.get('table') != table or proof.get('row') != row:
        return False
    return verify_proof(leaf_hash(table, row, values), proof['path'], bytes.fromhex(root.root))


def check_root(recorded: Optional[dict], root: dict) -> str:
    """
    Compare the commitment recorded in a bundle with a published root.

    Raises:
        CommitmentMismatch: On a version mismatch, a missing record or different roots
    """
    expected = CommitmentRoot.from_dict(root)
    if expected.encoding_version != ENCODING_VERSION:
        raise CommitmentMismatch(f"unsupported commitment encoding version {expected.encoding_version}")
    if recorded is None:
        raise CommitmentMismatch("bundle is not bound to a database commitment")
    actual = CommitmentRoot.from_dict(recorded)
    if actual != expected:
        raise CommitmentMismatch(f"bundle commitment {actual.root} differs from {expected.root}")
    return expected.root


def scanned_rows(cs: ConstraintSystem, assignment: Assignment) -> Dict[str, Dict[str, List[Tuple[int, ...]]]]:
    """
    Valid rows of every scan region, keyed by region then table.

    Scan regions are the top-level regions named scan_<table>; their
    columns are the table's qualified columns plus `valid`.
    """
    regions: Dict[str, Dict[str, List[int]]] = {}
    for col in cs.columns:
        if col.kind != ColumnKind.ADVICE or '/' not in col.name:
            continue
        region, _, name = col.name.partition('/')
        if region.startswith('scan_') and '/' not in name:
            regions.setdefault(region, {})[name] = assignment.cells[col]
    result: Dict[str, Dict[str, List[Tuple[int, ...]]]] = {}
    for region, cols in regions.items():
        table = region[len('scan_'):].rsplit('#', 1)[0]
        valid = cols.pop('valid')
        names = list(cols)
        rows = [tuple(cols[c][r] for c in names) for r in range(len(valid)) if valid[r] == 1]
        result[region] = {'table': table, 'columns': names, 'rows': rows}
    return result


def bind_commitment(bundle, root: CommitmentRoot, db: Mapping[str, object]):
    """
    Bind a witness bundle to a database commitment.

    The root is recomputed over db, and every scanned relation in the
    bundle must equal the corresponding rows of db.

    Raises:
        CommitmentMismatch: If the version is unknown, db does not hash to
            root or the bundle scanned rows that differ from db
    """
    if root.encoding_version != ENCODING_VERSION:
        raise CommitmentMismatch(f"unsupported commitment encoding version {root.encoding_version}")
    actual = commit_database(db)
    if actual.root != root.root or actual.leaf_count != root.leaf_count:
        raise CommitmentMismatch(f"database hashes to {actual.root}, expected {root.root}")
    check_scanned_rows(bundle.cs, bundle.assignment, db)
    return replace(bundle, commitment=root.to_dict())


def check_scanned_rows(cs: ConstraintSystem, assignment: Assignment, db: Mapping[str, object]):
    """
    Raises:
        CommitmentMismatch: If a scanned relation differs from the database table
    """
    for region, scan in scanned_rows(cs, assignment).items():
        table = scan['table']
        if table not in db:
            raise CommitmentMismatch(f"{region} scans {table}, which is not in the database")
        bare = [c.split('.', 1)[1] for c in scan['columns']]
        if scan['rows'] != db[table].values(bare):
            raise CommitmentMismatch(f"{region} rows differ from the committed table {table}")
