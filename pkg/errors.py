"""
Exception hierarchy for CircuitQL.
Every error carries the exit status the CLI reports for it.
"""
from typing import List, Optional, Tuple


class CircuitQLError(Exception):
    """Base class for all CircuitQL errors."""
    exit_code = 1


# --- field ---

class ZeroInverse(CircuitQLError):
    """Raised when inverting the zero field element."""
    exit_code = 10


# --- constraint system ---

class FrozenSystem(CircuitQLError):
    """Raised when the circuit shape is modified after it was frozen."""
    exit_code = 11


class DegreeTooHigh(CircuitQLError):
    """Raised when a gate constraint exceeds the degree cap."""
    exit_code = 12


class UnknownColumn(CircuitQLError):
    """Raised for references to columns that were never declared."""
    exit_code = 13


class ShapeMismatch(CircuitQLError):
    """Raised when an assignment does not fit the declared circuit shape."""
    exit_code = 14


# --- witness generation ---

class WitnessInfeasible(CircuitQLError):
    """Raised when no satisfying witness exists for the claimed values."""
    exit_code = 20


class DivisionByZeroGroup(CircuitQLError):
    """Raised when an AVG is requested over an empty group."""
    exit_code = 21


class BudgetExceeded(CircuitQLError):
    """Raised when a relation has more rows than its padded budget."""
    exit_code = 22


class InternalInconsistency(CircuitQLError):
    """Raised when an honestly generated witness does not satisfy its circuit."""
    exit_code = 23


class OutOfRange(CircuitQLError):
    """Raised when a tamper location does not index an existing cell."""
    exit_code = 24


# --- frontend ---

class ParseError(CircuitQLError):
    """Raised for SQL text outside the grammar."""
    exit_code = 30


class UnsupportedFeature(CircuitQLError):
    """Raised for SQL features that have no circuit counterpart."""
    exit_code = 31


# --- verification ---

class CommitmentMismatch(CircuitQLError):
    """Raised when a bundle is not bound to the expected database commitment."""
    exit_code = 40


class ConstraintFailure(CircuitQLError):
    """Raised when a bundle fails constraint checking."""
    exit_code = 41

    def __init__(self, message: str, failures: Optional[List[Tuple[str, int]]] = None):
        super().__init__(message)
        self.failures = failures or []


# --- storage ---

class StorageError(CircuitQLError):
    """Raised for artifact or database file errors."""
    exit_code = 50
