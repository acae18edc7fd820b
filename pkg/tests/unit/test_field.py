import pytest

from errors import ZeroInverse
from field import (
    MODULUS,
    ONE,
    ZERO,
    FieldElement,
    Transcript,
    field_add,
    field_info,
    field_inv,
    field_mul,
    field_sub,
    inv,
    transcript_challenge,
)


def test_elements_are_canonical():
    assert FieldElement(MODULUS).value == 0
    assert FieldElement(-1).value == MODULUS - 1
    assert FieldElement(MODULUS + 5) == FieldElement(5)


def test_arithmetic_wraps_modulus():
    a = FieldElement(MODULUS - 1)
    assert field_add(a, ONE) == ZERO
    assert field_sub(ZERO, ONE) == a
    assert field_mul(a, a) == ONE  # (-1)^2
    assert a + 2 == ONE
    assert 3 - FieldElement(5) == FieldElement(-2)


def test_inverse_round_trip(rng):
    for _ in range(100):
        a = FieldElement(rng.randrange(1, MODULUS))
        assert field_mul(a, field_inv(a)) == ONE
        assert a / a == ONE


def test_field_axioms(rng):
    for _ in range(1000):
        a, b, c = (FieldElement(rng.randrange(MODULUS)) for _ in range(3))
        assert a + b == b + a
        assert a * b == b * a
        assert (a + b) + c == a + (b + c)
        assert (a * b) * c == a * (b * c)
        assert a * (b + c) == a * b + a * c
        assert a - a == ZERO
        assert a * ONE == a


@pytest.mark.parametrize('other', [1.5, '3', None])
def test_mixing_other_types_names_the_type(other):
    with pytest.raises(TypeError, match=type(other).__name__):
        FieldElement(3) + other
    with pytest.raises(TypeError, match=type(other).__name__):
        FieldElement(3) * other


def test_inverse_of_zero_raises():
    with pytest.raises(ZeroInverse):
        field_inv(ZERO)
    with pytest.raises(ZeroInverse):
        ONE / 0
    # The is-zero helper maps zero to zero instead
    assert inv(0) == 0
    assert inv(7) * 7 % MODULUS == 1


def test_transcript_is_deterministic():
    t1 = Transcript('circuitql/v1', b'seed')
    t2 = Transcript('circuitql/v1', b'seed')
    t1.absorb(b'column', b'abc')
    t2.absorb(b'column', b'abc')
    assert t1.challenge(b'alpha') == t2.challenge(b'alpha')
    assert t1.state == t2.state


def test_transcript_depends_on_every_input():
    base = Transcript('circuitql/v1', b'')
    base.absorb(b'column', b'abc')
    reference = base.challenge(b'alpha')

    other_domain = Transcript('circuitql/v2', b'')
    other_domain.absorb(b'column', b'abc')
    assert other_domain.challenge(b'alpha') != reference

    other_seed = Transcript('circuitql/v1', b'x')
    other_seed.absorb(b'column', b'abc')
    assert other_seed.challenge(b'alpha') != reference

    other_data = Transcript('circuitql/v1', b'')
    other_data.absorb(b'column', b'abd')
    assert other_data.challenge(b'alpha') != reference


def test_successive_challenges_differ():
    t = Transcript()
    first = t.challenge(b'alpha')
    second = t.challenge(b'alpha')
    assert first != second
    assert t.counter == 2


def test_transcript_challenge_matches_method():
    a, b = Transcript('d', b's'), Transcript('d', b's')
    a.absorb(b'col', b'\x01')
    b.absorb(b'col', b'\x01')
    value = transcript_challenge(a, b'beta')
    assert value == b.challenge(b'beta')
    assert 0 <= value.value < MODULUS


def test_field_info():
    info = field_info()
    assert int(info['modulus_decimal']) == MODULUS
    assert info['modulus_bits'] == 254
    assert info['hash'] == 'sha256'
