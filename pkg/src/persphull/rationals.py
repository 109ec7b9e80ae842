"""Exact rational arithmetic shim.

All polytope coefficients and LP tableau entries in this package are exact
rationals.  ``gmpy2.mpq`` is used when available (much faster), otherwise
``fractions.Fraction``.  Both types share the arithmetic surface we need;
``QQ`` constructs a rational from ints, strings, floats-free inputs, or
another rational.
"""

from __future__ import annotations

from fractions import Fraction

try:  # pragma: no cover - exercised implicitly by the whole suite
    from gmpy2 import mpq as _mpq

    _BACKEND = "gmpy2"

    def QQ(num=0, den=None):
        if den is None:
            return _mpq(num)
        return _mpq(num, den)

except ImportError:  # pragma: no cover
    _BACKEND = "fractions"

    def QQ(num=0, den=None):
        if den is None:
            return Fraction(num)
        return Fraction(num, den)


ZERO = QQ(0)
ONE = QQ(1)


def backend_name() -> str:
    return _BACKEND


def is_rational(x) -> bool:
    return isinstance(x, type(ZERO)) or isinstance(x, (int, Fraction))


def as_float(x) -> float:
    return float(x)


def rat_str(x) -> str:
    """Canonical text form: ``p`` or ``p/q``."""
    f = Fraction(int(x.numerator), int(x.denominator))
    if f.denominator == 1:
        return str(f.numerator)
    return f"{f.numerator}/{f.denominator}"


def parse_rat(text: str):
    """Parse ``p`` or ``p/q`` into an exact rational."""
    text = text.strip()
    if "/" in text:
        num, den = text.split("/")
        return QQ(int(num), int(den))
    return QQ(int(text))
