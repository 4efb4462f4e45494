"""Exact finite floating-point systems with saturating arithmetic.

A system is parameterized by significand digits ``p``, exponent digits ``q``
and base ``beta``; a value is (+/- 0.d1...dp) * beta^(+/- e1...eq).  All
arithmetic goes through exact rationals: the true sum or product is formed
first and then rounded to the closest representable value, saturating at the
largest magnitude.  There are no infinities, NaNs or subnormal special
cases; the value set is finite and symmetric around a single zero.

Ties round half away from zero, and negative zero normalizes to +0 with a
zero exponent; both choices are fixed here so runs are bit-reproducible.
``values()`` counts values, not digit encodings (one value can have several
encodings; the canonical one maximizes significand digits in use).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Tuple

from .errors import SystemTooSmallError


@dataclass(frozen=True)
class FloatSystem:
    sig_digits: int
    exp_digits: int
    base: int = 2

    def __post_init__(self):
        if self.sig_digits < 1 or self.exp_digits < 1:
            raise ValueError("digit counts must be at least 1")
        if self.base < 2:
            raise ValueError("base must be at least 2")

    @property
    def max_exponent(self) -> int:
        return self.base ** self.exp_digits - 1

    @property
    def max_significand(self) -> int:
        return self.base ** self.sig_digits - 1

    def max_value(self) -> Fraction:
        return (
            Fraction(self.max_significand, self.base ** self.sig_digits)
            * Fraction(self.base) ** self.max_exponent
        )

    def representable(self, value: Fraction) -> bool:
        if value == 0:
            return True
        mag = abs(value)
        if mag > self.max_value():
            return False
        for exponent in range(-self.max_exponent, self.max_exponent + 1):
            sig = mag * Fraction(self.base) ** (self.sig_digits - exponent)
            if sig.denominator == 1 and sig.numerator <= self.max_significand:
                return True
        return False

    def values(self) -> Iterator[Fraction]:
        """Every representable value exactly once, in increasing order."""
        seen = {Fraction(0)}
        scale = self.base ** self.sig_digits
        for exponent in range(-self.max_exponent, self.max_exponent + 1):
            power = Fraction(self.base) ** exponent
            for significand in range(1, self.max_significand + 1):
                mag = Fraction(significand, scale) * power
                seen.add(mag)
                seen.add(-mag)
        return iter(sorted(seen))

    def size(self) -> int:
        return sum(1 for _ in self.values())

    def nearest(self, value) -> "FloatNum":
        """Closest representable value; ties away from zero, overflow saturates."""
        value = Fraction(value)
        if value == 0:
            return FloatNum(self, Fraction(0))
        sign = 1 if value > 0 else -1
        mag = abs(value)
        top = self.max_value()
        if mag >= top:
            return FloatNum(self, sign * top)
        best = None
        best_err = None
        scale = self.base ** self.sig_digits
        for exponent in range(-self.max_exponent, self.max_exponent + 1):
            # Candidate grid at this exponent: significand/scale * base^exponent.
            power = Fraction(self.base) ** exponent
            target = mag / power * scale
            for significand in {
                min(max(target.numerator // target.denominator, 0), self.max_significand),
                min(max(-(-target.numerator // target.denominator), 0), self.max_significand),
            }:
                candidate = Fraction(significand, scale) * power
                err = abs(mag - candidate)
                if (
                    best_err is None
                    or err < best_err
                    or (err == best_err and candidate > best)
                ):
                    best = candidate
                    best_err = err
        return FloatNum(self, sign * best)

    def one(self) -> "FloatNum":
        one = self.nearest(1)
        if one.value != 1:
            raise SystemTooSmallError("1 is not representable in this system")
        return one

    def zero(self) -> "FloatNum":
        return FloatNum(self, Fraction(0))

    def from_digits(
        self, sign: int, digits: Tuple[int, ...], exp_sign: int, exp_digits: Tuple[int, ...]
    ) -> "FloatNum":
        """Decode a digit-level encoding (canonicalizing zero to +0)."""
        if len(digits) != self.sig_digits or len(exp_digits) != self.exp_digits:
            raise ValueError("digit strings have the wrong length")
        if any(not 0 <= d < self.base for d in digits + exp_digits):
            raise ValueError("digits out of range for the base")
        if sign not in (1, -1) or exp_sign not in (1, -1):
            raise ValueError("signs must be +1 or -1")
        significand = 0
        for d in digits:
            significand = significand * self.base + d
        exponent = 0
        for d in exp_digits:
            exponent = exponent * self.base + d
        value = (
            sign
            * Fraction(significand, self.base ** self.sig_digits)
            * Fraction(self.base) ** (exp_sign * exponent)
        )
        return FloatNum(self, value)


@dataclass(frozen=True)
class FloatNum:
    """A representable value; the exact rational is the identity."""

    system: FloatSystem
    value: Fraction

    def __post_init__(self):
        if not self.system.representable(self.value):
            raise ValueError(f"{self.value} is not representable")

    def encoding(self):
        """Canonical (sign, digits, exp_sign, exp_digits) for this value.

        Of all encodings the one with the smallest exponent (most significand
        digits in use) is canonical; zero encodes as +0 with exponent +0.
        """
        system = self.system
        base = system.base
        if self.value == 0:
            return (1, (0,) * system.sig_digits, 1, (0,) * system.exp_digits)
        sign = 1 if self.value > 0 else -1
        mag = abs(self.value)
        for exponent in range(-system.max_exponent, system.max_exponent + 1):
            sig = mag * Fraction(base) ** (system.sig_digits - exponent)
            if sig.denominator == 1 and sig.numerator <= system.max_significand:
                digits = _to_digits(sig.numerator, base, system.sig_digits)
                exp_digits = _to_digits(abs(exponent), base, system.exp_digits)
                return (sign, digits, 1 if exponent >= 0 else -1, exp_digits)
        raise AssertionError("representable value without encoding")

    def __repr__(self) -> str:
        return f"FloatNum({self.value})"


def _to_digits(number: int, base: int, width: int) -> tuple:
    digits = []
    for _ in range(width):
        digits.append(number % base)
        number //= base
    if number:
        raise ValueError("number does not fit the digit width")
    return tuple(reversed(digits))


def decode(x: FloatNum) -> Fraction:
    return x.value


def nearest(value, system: FloatSystem) -> FloatNum:
    return system.nearest(value)


def _check_same_system(a: FloatNum, b: FloatNum):
    if a.system != b.system:
        raise ValueError("operands come from different systems")


def fsum(a: FloatNum, b: FloatNum) -> FloatNum:
    """Saturating sum: exact rational sum, then round to the closest value."""
    _check_same_system(a, b)
    return a.system.nearest(a.value + b.value)


def fmul(a: FloatNum, b: FloatNum) -> FloatNum:
    """Saturating product, defined like the sum."""
    _check_same_system(a, b)
    return a.system.nearest(a.value * b.value)


def relu_star(x: FloatNum) -> FloatNum:
    """Clamp to [0, 1] exactly."""
    one = x.system.one()
    if x.value <= 0:
        return x.system.zero()
    if x.value >= 1:
        return one
    return x


def saturating_sum(values, system: FloatSystem) -> FloatNum:
    """Fold a multiset of values in increasing order with the saturating sum."""
    total = system.zero()
    for v in sorted(values, key=lambda f: f.value):
        total = fsum(total, v)
    return total
