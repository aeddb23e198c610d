"""Exact arithmetic on dyadic rationals ``k / 2**j``.

Every value a network with weights in {0, +-1/2, +-1, 2} produces from
dyadic inputs is again dyadic, so this small type is enough to evaluate
such networks without rounding.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from numbers import Rational


class InexactConversionError(ArithmeticError):
    """Raised when a dyadic value has no exact binary64 representation."""


_TEXT_RE = re.compile(r"^\s*(-?\d+)\s*(?:/\s*2\^(\d+))?\s*$")


def _canonical(mantissa: int, exponent: int) -> tuple[int, int]:
    if mantissa == 0:
        return 0, 0
    if exponent > 0:
        tz = (mantissa & -mantissa).bit_length() - 1
        shift = min(tz, exponent)
        mantissa >>= shift
        exponent -= shift
    return mantissa, exponent


class Dyadic:
    """Immutable value ``mantissa / 2**exponent`` in canonical form.

    Canonical form: the mantissa is odd unless the exponent is zero, and
    zero is stored as ``0 / 2**0``.
    """

    __slots__ = ("_m", "_e")

    def __init__(self, mantissa: int = 0, exponent: int = 0) -> None:
        if exponent < 0:
            mantissa <<= -exponent
            exponent = 0
        m, e = _canonical(int(mantissa), int(exponent))
        object.__setattr__(self, "_m", m)
        object.__setattr__(self, "_e", e)

    def __setattr__(self, name, value):
        raise AttributeError("Dyadic is immutable")

    @property
    def mantissa(self) -> int:
        return self._m

    @property
    def exponent(self) -> int:
        return self._e

    # construction helpers

    @classmethod
    def coerce(cls, value) -> Dyadic:
        if isinstance(value, Dyadic):
            return value
        if isinstance(value, bool):
            return cls(int(value))
        if isinstance(value, int):
            return cls(value)
        if isinstance(value, float):
            return cls.from_float(value)
        if isinstance(value, Rational):
            return cls.from_fraction(Fraction(value))
        if isinstance(value, str):
            return cls.parse(value)
        raise TypeError(f"cannot convert {type(value).__name__} to Dyadic")

    @classmethod
    def from_fraction(cls, value: Fraction) -> Dyadic:
        den = value.denominator
        if den & (den - 1):
            raise ValueError(f"{value} is not a dyadic rational")
        return cls(value.numerator, den.bit_length() - 1)

    @classmethod
    def from_float(cls, value: float) -> Dyadic:
        if not math.isfinite(value):
            raise ValueError(f"non-finite float {value!r}")
        num, den = value.as_integer_ratio()
        return cls(num, den.bit_length() - 1)

    @classmethod
    def parse(cls, text: str) -> Dyadic:
        """Parse ``"m/2^e"`` or a plain integer ``"m"``."""
        match = _TEXT_RE.match(text)
        if match is None:
            raise ValueError(f"not a dyadic literal: {text!r}")
        m, e = match.groups()
        return cls(int(m), int(e) if e is not None else 0)

    # conversions

    def as_fraction(self) -> Fraction:
        return Fraction(self._m, 1 << self._e)

    def to_float(self, strict: bool = False) -> float:
        """Nearest binary64 value; ``strict`` raises if that is not exact."""
        if strict and not self.is_float_exact():
            raise InexactConversionError(f"{self} is not exactly representable in binary64")
        return self._m / (1 << self._e) if self._e else float(self._m)

    def is_float_exact(self) -> bool:
        return abs(self._m) < 2**53 and self._e <= 1022

    def __float__(self) -> float:
        return self.to_float()

    def __str__(self) -> str:
        return str(self._m) if self._e == 0 else f"{self._m}/2^{self._e}"

    def __repr__(self) -> str:
        return f"Dyadic({self._m}, {self._e})"

    # arithmetic

    def __add__(self, other):
        try:
            o = Dyadic.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        e = max(self._e, o._e)
        return Dyadic((self._m << (e - self._e)) + (o._m << (e - o._e)), e)

    __radd__ = __add__

    def __neg__(self) -> Dyadic:
        return Dyadic(-self._m, self._e)

    def __pos__(self) -> Dyadic:
        return self

    def __abs__(self) -> Dyadic:
        return self if self._m >= 0 else -self

    def __sub__(self, other):
        try:
            o = Dyadic.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        try:
            o = Dyadic.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return Dyadic(self._m * o._m, self._e + o._e)

    __rmul__ = __mul__

    def halve(self) -> Dyadic:
        return Dyadic(self._m, self._e + 1)

    def double(self) -> Dyadic:
        return Dyadic(self._m, self._e - 1)

    # ordering

    def _cmp_key(self, other) -> tuple[int, int]:
        o = Dyadic.coerce(other)
        e = max(self._e, o._e)
        return self._m << (e - self._e), o._m << (e - o._e)

    def __eq__(self, other) -> bool:
        if isinstance(other, Dyadic):
            return self._m == other._m and self._e == other._e
        try:
            o = Dyadic.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self == o

    def __hash__(self) -> int:
        return hash(self.as_fraction())

    def __lt__(self, other) -> bool:
        a, b = self._cmp_key(other)
        return a < b

    def __le__(self, other) -> bool:
        a, b = self._cmp_key(other)
        return a <= b

    def __gt__(self, other) -> bool:
        a, b = self._cmp_key(other)
        return a > b

    def __ge__(self, other) -> bool:
        a, b = self._cmp_key(other)
        return a >= b

    def __bool__(self) -> bool:
        return self._m != 0

    def __reduce__(self):
        return (Dyadic, (self._m, self._e))


ZERO = Dyadic(0)
ONE = Dyadic(1)
HALF = Dyadic(1, 1)


def add(a: Dyadic, b: Dyadic) -> Dyadic:
    return a + b


def mul(a: Dyadic, b: Dyadic) -> Dyadic:
    return a * b


def relu(a: Dyadic) -> Dyadic:
    return a if a._m > 0 else ZERO


def to_float(a: Dyadic, strict: bool = True) -> float:
    return a.to_float(strict=strict)


def canonical(a: Dyadic) -> Dyadic:
    return Dyadic(a.mantissa, a.exponent)
