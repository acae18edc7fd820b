"""
Lineitem-style desk data: a six-table schema, a seeded generator and
queries mixing the operators of common decision-support workloads.
"""
import random
from typing import Dict

from frontend import Schema
from witness import Database, Relation

LINEITEM_SCHEMA = {
    'tables': {
        'nation': {
            'columns': ['n_nationkey', 'n_regionkey'],
            'primary_key': 'n_nationkey',
        },
        'customer': {
            'columns': [{'name': 'c_custkey'}, {'name': 'c_nationkey'}, {'name': 'c_acctbal', 'scale': 2}],
            'primary_key': 'c_custkey',
            'foreign_keys': {'c_nationkey': 'nation.n_nationkey'},
        },
        'orders': {
            'columns': [{'name': 'o_orderkey'}, {'name': 'o_custkey'}, {'name': 'o_orderdate'},
                        {'name': 'o_totalprice', 'scale': 2}],
            'primary_key': 'o_orderkey',
            'foreign_keys': {'o_custkey': 'customer.c_custkey'},
        },
        'supplier': {
            'columns': ['s_suppkey', 's_nationkey'],
            'primary_key': 's_suppkey',
            'foreign_keys': {'s_nationkey': 'nation.n_nationkey'},
        },
        'part': {
            'columns': ['p_partkey', 'p_size'],
            'primary_key': 'p_partkey',
        },
        'lineitem': {
            'columns': [{'name': 'l_orderkey'}, {'name': 'l_partkey'}, {'name': 'l_suppkey'},
                        {'name': 'l_quantity'}, {'name': 'l_extendedprice', 'scale': 2},
                        {'name': 'l_discount', 'scale': 2}, {'name': 'l_shipdate'},
                        {'name': 'l_returnflag'}],
            'foreign_keys': {
                'l_orderkey': 'orders.o_orderkey',
                'l_partkey': 'part.p_partkey',
                'l_suppkey': 'supplier.s_suppkey',
            },
        },
    }
}

# Operator mixes of six well-known decision-support queries, reduced to the supported grammar.
DESK_QUERIES: Dict[str, str] = {
    'pricing_summary': (
        "SELECT l_returnflag, SUM(l_quantity) AS sum_qty, SUM(l_extendedprice) AS sum_price, "
        "AVG(l_quantity) AS avg_qty, COUNT(*) AS count_order "
        "FROM lineitem WHERE l_shipdate <= 19980901 "
        "GROUP BY l_returnflag ORDER BY l_returnflag"
    ),
    'shipping_priority': (
        "SELECT o_orderkey, SUM(l_extendedprice) AS revenue "
        "FROM customer, orders, lineitem "
        "WHERE c_custkey = o_custkey AND l_orderkey = o_orderkey AND c_acctbal > 2500.00 "
        "AND o_orderdate < 19950315 "
        "GROUP BY o_orderkey ORDER BY revenue DESC"
    ),
    'local_supplier_volume': (
        "SELECT n_nationkey, SUM(l_extendedprice) AS revenue "
        "FROM customer, orders, lineitem, supplier, nation "
        "WHERE c_custkey = o_custkey AND l_orderkey = o_orderkey AND l_suppkey = s_suppkey "
        "AND s_nationkey = n_nationkey AND o_orderdate BETWEEN 19940101 AND 19941231 "
        "GROUP BY n_nationkey ORDER BY revenue DESC"
    ),
    'market_share': (
        "SELECT o_orderdate, SUM(l_extendedprice) AS volume "
        "FROM part, lineitem, orders "
        "WHERE p_partkey = l_partkey AND l_orderkey = o_orderkey AND p_size = 15 "
        "GROUP BY o_orderdate ORDER BY o_orderdate"
    ),
    'product_type_profit': (
        "SELECT n_nationkey, SUM(l_extendedprice) AS amount, SUM(l_quantity) AS quantity "
        "FROM part, lineitem, supplier, nation "
        "WHERE p_partkey = l_partkey AND s_suppkey = l_suppkey AND s_nationkey = n_nationkey "
        "AND p_size > 10 "
        "GROUP BY n_nationkey ORDER BY n_nationkey DESC"
    ),
    'large_volume_customer': (
        "SELECT c_custkey, o_orderkey, SUM(l_quantity) AS total_qty, MAX(l_quantity) AS max_qty "
        "FROM customer, orders, lineitem "
        "WHERE c_custkey = o_custkey AND o_orderkey = l_orderkey "
        "GROUP BY c_custkey, o_orderkey ORDER BY c_custkey, o_orderkey"
    ),
}


def lineitem_schema() -> Schema:
    return Schema.from_dict(LINEITEM_SCHEMA)


def _date(rng: random.Random) -> int:
    year = rng.randint(1992, 1998)
    return year * 10000 + rng.randint(1, 12) * 100 + rng.randint(1, 28)


def generate_lineitem_database(seed: int = 0, rows: int = 1000) -> Database:
    """
    Random database with `rows` lineitem rows and proportionally sized
    dimension tables. Every foreign key references an existing row.
    """
    rng = random.Random(seed)
    n_orders = max(rows // 4, 1)
    n_customers = max(rows // 10, 1)
    n_suppliers = 10
    n_parts = 50
    n_nations = 25

    nation = [(k, k % 5) for k in range(1, n_nations + 1)]
    customer = [(k, rng.randint(1, n_nations), rng.randint(0, 999999)) for k in range(1, n_customers + 1)]
    orders = [(k, rng.randint(1, n_customers), _date(rng), rng.randint(100000, 50000000))
              for k in range(1, n_orders + 1)]
    supplier = [(k, rng.randint(1, n_nations)) for k in range(1, n_suppliers + 1)]
    part = [(k, rng.randint(1, 50)) for k in range(1, n_parts + 1)]
    lineitem = []
    for _ in range(rows):
        quantity = rng.randint(1, 50)
        lineitem.append((
            rng.randint(1, n_orders),
            rng.randint(1, n_parts),
            rng.randint(1, n_suppliers),
            quantity,
            quantity * rng.randint(90000, 200000) // 100,
            rng.randint(0, 10),
            _date(rng),
            rng.randint(0, 2),
        ))

    schema = lineitem_schema()
    tables = {
        'nation': nation,
        'customer': customer,
        'orders': orders,
        'supplier': supplier,
        'part': part,
        'lineitem': lineitem,
    }
    return {name: Relation(name, list(schema.table(name).columns), data) for name, data in tables.items()}
