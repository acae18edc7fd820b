import pytest

from commitment import (
    ENCODING_VERSION,
    CommitmentRoot,
    MerkleTree,
    check_root,
    commit_database,
    empty_root,
    leaf_hash,
    prove_row,
    verify_proof,
    verify_row,
)
from errors import CommitmentMismatch
from witness import Relation


def test_root_is_deterministic(example_db):
    assert commit_database(example_db) == commit_database(dict(reversed(list(example_db.items()))))
    assert commit_database(example_db).leaf_count == sum(r.row_count for r in example_db.values())


def test_every_single_cell_edit_changes_the_root(example_db):
    root = commit_database(example_db).root
    for name, rel in example_db.items():
        for i, row in enumerate(rel.rows):
            for j in range(len(row)):
                edited = dict(example_db)
                rows = list(rel.rows)
                changed = list(row)
                changed[j] += 1
                rows[i] = tuple(changed)
                edited[name] = Relation(name, rel.columns, rows)
                assert commit_database(edited).root != root


def test_row_order_and_placement_matter():
    a = {'A': Relation('A', ['x'], [(1,), (2,)])}
    swapped = {'A': Relation('A', ['x'], [(2,), (1,)])}
    moved = {'B': Relation('B', ['x'], [(1,), (2,)])}
    assert commit_database(a) != commit_database(swapped)
    assert commit_database(a) != commit_database(moved)


def test_empty_database():
    root = commit_database({})
    assert root.leaf_count == 0
    assert root.root == empty_root().hex()
    assert commit_database({'A': Relation('A', ['x'], [])}).root == root.root


def test_inclusion_proofs(example_db):
    root = commit_database(example_db)
    for name, rel in example_db.items():
        for i, row in enumerate(rel.rows):
            proof = prove_row(example_db, name, i)
            assert verify_row(root, name, i, row, proof)
            assert not verify_row(root, name, i, tuple(v + 1 for v in row), proof)
    with pytest.raises(IndexError):
        prove_row(example_db, 'T', 99)


def test_tree_update_matches_rebuild():
    leaves = [leaf_hash('A', i, (i,)) for i in range(7)]
    tree = MerkleTree(leaves)
    new_leaf = leaf_hash('A', 3, (99,))
    leaves[3] = new_leaf
    assert tree.update(3, new_leaf) == MerkleTree(leaves).root
    assert verify_proof(new_leaf, tree.proof(3), tree.root)
    with pytest.raises(IndexError):
        tree.update(7, new_leaf)


def test_check_root(example_db):
    root = commit_database(example_db)
    assert check_root(root.to_dict(), root.to_dict()) == root.root

    other = commit_database({'A': Relation('A', ['x'], [(1,)])})
    with pytest.raises(CommitmentMismatch):
        check_root(root.to_dict(), other.to_dict())
    with pytest.raises(CommitmentMismatch):
        check_root(None, root.to_dict())

    future = dict(root.to_dict(), encoding_version=ENCODING_VERSION + 1)
    with pytest.raises(CommitmentMismatch):
        check_root(root.to_dict(), future)


def test_root_serialization(example_db):
    root = commit_database(example_db)
    assert CommitmentRoot.from_dict(root.to_dict()) == root
    assert '"root"' in root.to_json()
