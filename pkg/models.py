"""
Run ledger for CircuitQL.
Keeps one TinyDB record per prove or verify run.
"""
from typing import List, Optional

from tinydb import Query, TinyDB

from utils import generate_run_id, utc_timestamp


class RunRepository:
    """Repository for run ledger operations."""

    def __init__(self, runs_table=None, path: Optional[str] = None):
        """
        Args:
            runs_table: TinyDB table instance (optional)
            path: TinyDB file to open when no table is given
        """
        if runs_table is None:
            runs_table = TinyDB(path or 'runs.json').table('runs')
        self.table = runs_table
        self.query = Query()

    def record(self, manifest: dict, run_id: Optional[str] = None) -> str:
        """
        Store a run summary.

        Args:
            manifest: RunManifest dict; kind, query and verdict are required,
                budgets, commitment_root, counts, timings and artifacts optional

        Returns:
            Run ID (UUID string)
        """
        if run_id is None:
            run_id = manifest.get('run_id') or generate_run_id()

        entry = {
            'id': run_id,
            'kind': manifest['kind'],
            'query': manifest['query'],
            'schema': manifest.get('schema'),
            'db': manifest.get('db'),
            'budgets': manifest.get('budgets', {}),
            'commitment_root': manifest.get('commitment_root'),
            'verdict': manifest['verdict'],
            'ok': manifest['verdict'] == 'ok',
            'timings': manifest.get('timings', {}),
            'artifacts': manifest.get('artifacts', {}),
            'created_at': utc_timestamp(),
        }
        self.table.insert(entry)
        return run_id

    def get_by_id(self, run_id: str) -> Optional[dict]:
        return self.table.get(self.query.id == run_id)

    def recent(self, limit: int = 20) -> List[dict]:
        """Newest runs first."""
        runs = sorted(self.table.all(), key=lambda r: r['created_at'], reverse=True)
        return runs[:limit]

    def by_verdict(self, ok: bool) -> List[dict]:
        return self.table.search(self.query.ok == ok)

    def delete(self, run_id: str):
        self.table.remove(self.query.id == run_id)
