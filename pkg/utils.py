"""
Utility functions for CircuitQL.
"""
import os
import uuid
from datetime import datetime, timezone
from typing import Dict, List, Sequence

from werkzeug.utils import safe_join

from errors import StorageError


def next_power_of_two(n: int, minimum: int = 2) -> int:
    """
    Smallest power of two that is at least max(n, minimum).

    Example:
        >>> next_power_of_two(5)
        8
    """
    size = minimum
    while size < n:
        size *= 2
    return size


def is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def parse_budgets(text: str) -> Dict[str, int]:
    """
    Parse a budget option of the form "table=rows,table=rows".

    Args:
        text: Comma separated table=rows pairs (empty string allowed)

    Returns:
        Mapping of table name to padded row budget

    Raises:
        ValueError: If a pair is malformed or a budget is not a power of two >= 2
    """
    budgets = {}
    if not text:
        return budgets
    for part in text.split(','):
        part = part.strip()
        if not part:
            continue
        if '=' not in part:
            raise ValueError(f"budget '{part}' must look like table=rows")
        name, _, value = part.partition('=')
        try:
            rows = int(value)
        except ValueError:
            raise ValueError(f"budget for {name.strip()} is not an integer: {value}") from None
        if rows < 2 or not is_power_of_two(rows):
            raise ValueError(f"budget for {name.strip()} must be a power of two >= 2, got {rows}")
        budgets[name.strip()] = rows
    return budgets


def format_budgets(budgets: Dict[str, int]) -> str:
    return ','.join(f"{k}={v}" for k, v in sorted(budgets.items()))


def resolve_table_path(db_dir: str, table: str) -> str:
    """
    Path of a table's CSV file inside a database directory.

    Raises:
        StorageError: If the table name escapes the directory or the file is missing
    """
    path = safe_join(db_dir, f"{table}.csv")
    if path is None:
        raise StorageError(f"invalid table name: {table}")
    if not os.path.isfile(path):
        raise StorageError(f"missing table file for {table}: {path}")
    return path


def generate_run_id() -> str:
    return str(uuid.uuid4())


def utc_timestamp() -> str:
    """Current time as an ISO 8601 UTC string."""
    return datetime.now(timezone.utc).isoformat()


def format_table(headers: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    """
    Render rows as a plain aligned text table.

    Example:
        >>> print(format_table(['a', 'b'], [[1, 22]]))
        a  b
        -  --
        1  22
    """
    cells: List[List[str]] = [[str(h) for h in headers]] + [[str(c) for c in r] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    lines = ['  '.join(c.ljust(w) for c, w in zip(cells[0], widths)).rstrip()]
    lines.append('  '.join('-' * w for w in widths))
    for row in cells[1:]:
        lines.append('  '.join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return '\n'.join(lines)
