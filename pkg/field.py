"""
Prime-field arithmetic and the Fiat-Shamir transcript.

All circuit values live in the scalar field of the BN254 curve. Hot paths
(constraint evaluation, witness filling) work on canonical Python ints;
FieldElement wraps the same arithmetic for API-level code and tests.
"""
import hashlib
from dataclasses import dataclass
from typing import Union

from errors import ZeroInverse

MODULUS = 21888242871839275222246405745257275088548364400416034343698204186575808495617
MODULUS_BITS = MODULUS.bit_length()
HASH_NAME = 'sha256'

IntLike = Union[int, 'FieldElement']


@dataclass(frozen=True, order=False)
class FieldElement:
    """Integer residue modulo MODULUS, always stored in canonical form."""
    value: int

    def __post_init__(self):
        if not 0 <= self.value < MODULUS:
            object.__setattr__(self, 'value', self.value % MODULUS)

    @staticmethod
    def _coerce(other: IntLike) -> int:
        if isinstance(other, FieldElement):
            return other.value
        if isinstance(other, int):
            return other % MODULUS
        raise TypeError(f"cannot combine a field element with {type(other).__name__}")

    def __add__(self, other: IntLike) -> 'FieldElement':
        return FieldElement((self.value + self._coerce(other)) % MODULUS)

    __radd__ = __add__

    def __sub__(self, other: IntLike) -> 'FieldElement':
        return FieldElement((self.value - self._coerce(other)) % MODULUS)

    def __rsub__(self, other: IntLike) -> 'FieldElement':
        return FieldElement((self._coerce(other) - self.value) % MODULUS)

    def __mul__(self, other: IntLike) -> 'FieldElement':
        return FieldElement((self.value * self._coerce(other)) % MODULUS)

    __rmul__ = __mul__

    def __neg__(self) -> 'FieldElement':
        return FieldElement(-self.value % MODULUS)

    def __truediv__(self, other: IntLike) -> 'FieldElement':
        return self * field_inv(FieldElement(self._coerce(other)))

    def __pow__(self, exponent: int) -> 'FieldElement':
        return FieldElement(pow(self.value, exponent, MODULUS))

    def __int__(self) -> int:
        return self.value

    def __bool__(self) -> bool:
        return self.value != 0

    def inverse(self) -> 'FieldElement':
        return field_inv(self)

    def to_bytes(self) -> bytes:
        """32-byte big-endian encoding."""
        return self.value.to_bytes(32, 'big')

    def __repr__(self) -> str:
        return f"F({self.value})"


ZERO = FieldElement(0)
ONE = FieldElement(1)


def field_add(a: FieldElement, b: FieldElement) -> FieldElement:
    """Return a + b reduced modulo MODULUS."""
    return FieldElement((a.value + b.value) % MODULUS)


def field_sub(a: FieldElement, b: FieldElement) -> FieldElement:
    """Return a - b reduced modulo MODULUS."""
    return FieldElement((a.value - b.value) % MODULUS)


def field_mul(a: FieldElement, b: FieldElement) -> FieldElement:
    """Return a * b reduced modulo MODULUS."""
    return FieldElement((a.value * b.value) % MODULUS)


def field_inv(a: FieldElement) -> FieldElement:
    """
    Multiplicative inverse.

    Args:
        a: Non-zero field element

    Returns:
        b with a * b = 1

    Raises:
        ZeroInverse: If a is zero
    """
    if a.value == 0:
        raise ZeroInverse("zero has no multiplicative inverse")
    return FieldElement(pow(a.value, MODULUS - 2, MODULUS))


def inv(value: int) -> int:
    """Inverse of a canonical int; 0 maps to 0 (the is-zero convention)."""
    return pow(value, MODULUS - 2, MODULUS) if value % MODULUS else 0


def _frame(data: bytes) -> bytes:
    return len(data).to_bytes(8, 'big') + data


class Transcript:
    """
    Deterministic Fiat-Shamir transcript over SHA-256.

    Every absorbed item is length-prefixed. Squeezing a challenge absorbs
    the label and the counter, reduces the 256-bit digest modulo MODULUS
    and feeds the digest back into the running state.
    """

    def __init__(self, domain: str = 'circuitql/v1', seed: bytes = b''):
        self._state = hashlib.sha256()
        self.counter = 0
        self.absorb(b'domain', domain.encode('utf-8'))
        self.absorb(b'seed', seed)

    def absorb(self, label: bytes, data: bytes) -> None:
        self._state.update(_frame(label))
        self._state.update(_frame(data))

    @property
    def state(self) -> bytes:
        return self._state.copy().digest()

    def challenge(self, label: bytes) -> FieldElement:
        self._state.update(_frame(label))
        self._state.update(self.counter.to_bytes(8, 'big'))
        digest = self._state.copy().digest()
        self._state.update(digest)
        self.counter += 1
        return FieldElement(int.from_bytes(digest, 'big') % MODULUS)


def transcript_challenge(t: Transcript, label: bytes) -> FieldElement:
    """Absorb label into t and squeeze one challenge."""
    return t.challenge(label)


def field_info() -> dict:
    """Modulus and hash identifier, as printed by `circuitql --field-info`."""
    return {
        'modulus_decimal': str(MODULUS),
        'modulus_hex': hex(MODULUS),
        'modulus_bits': MODULUS_BITS,
        'hash': HASH_NAME,
    }
