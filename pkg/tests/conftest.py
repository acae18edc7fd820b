import json
import os
import random
import sys
import tempfile

import pytest
from dotenv import load_dotenv

# Set required environment variables before any module reads its configuration
os.environ['CIRCUITQL_ENV'] = 'testing'
os.environ['MIN_ROW_COUNT'] = '512'
os.environ['DEFAULT_BUDGET'] = '0'
os.environ['STORAGE_BACKEND'] = 'local'
_session_dir = tempfile.mkdtemp(prefix='circuitql-tests-')
os.environ['OUTPUT_DIR'] = os.path.join(_session_dir, 'runs')
os.environ['RUNS_DB_PATH'] = os.path.join(_session_dir, 'runs.json')

# Load .env.example for all test runs
load_dotenv(dotenv_path=os.path.join(os.path.dirname(os.path.dirname(__file__)), '.env.example'), override=False)

# Add parent directory to sys.path to allow direct import of the modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from constraints import CircuitBuilder, check_satisfied  # noqa: E402
from frontend import Schema  # noqa: E402
from witness import Relation, write_database  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: end-to-end runs over the 1000-row desk database')


# Two tables in the shape of the group-by and join walkthroughs:
# T(D1, D2) for aggregation, T1(D1 primary key, D2) and T2(D1', D2') for joins.
EXAMPLE_SCHEMA = {
    'tables': {
        'T': {'columns': ['D1', 'D2']},
        'T1': {'columns': ['D1', 'D2'], 'primary_key': 'D1'},
        'T2': {'columns': ["D1'", "D2'"], 'foreign_keys': {"D1'": 'T1.D1'}},
        'R': {'columns': ['a', 'b']},
        'S': {'columns': ['a', 'b']},
        'P': {'columns': [{'name': 'id'}, {'name': 'price', 'scale': 2}], 'primary_key': 'id'},
    }
}


@pytest.fixture
def rng():
    """Seeded random source so randomized tests are reproducible."""
    return random.Random(20240518)


@pytest.fixture
def builder():
    return CircuitBuilder(min_rows=512)


@pytest.fixture
def satisfied():
    """Finish a builder and return the constraint check verdict."""
    def check(b: CircuitBuilder):
        cs, asg = b.finish()
        return check_satisfied(cs, asg)
    return check


@pytest.fixture
def schema():
    return Schema.from_dict(EXAMPLE_SCHEMA)


@pytest.fixture
def example_db():
    return {
        'T': Relation('T', ['D1', 'D2'], [(1, 10), (2, 20), (1, 30), (3, 5)]),
        'T1': Relation('T1', ['D1', 'D2'], [(1, 100), (2, 200), (3, 300)]),
        'T2': Relation('T2', ["D1'", "D2'"], [(1, 7), (1, 8), (3, 9), (4, 6)]),
        'R': Relation('R', ['a', 'b'], [(1, 1), (2, 2), (2, 2), (3, 3)]),
        'S': Relation('S', ['a', 'b'], [(2, 2), (3, 3), (3, 3), (4, 4)]),
        'P': Relation('P', ['id', 'price'], [(1, 1999), (2, 250), (3, 100000)]),
    }


@pytest.fixture
def db_dir(tmp_path, example_db):
    """Example database written as CSV files, plus the schema file beside it."""
    directory = tmp_path / 'db'
    write_database(str(directory), example_db)
    schema_path = tmp_path / 'schema.json'
    schema_path.write_text(json.dumps(EXAMPLE_SCHEMA))
    return directory


@pytest.fixture
def schema_path(db_dir):
    return db_dir.parent / 'schema.json'


@pytest.fixture
def runs_db(tmp_path):
    return str(tmp_path / 'runs.json')
