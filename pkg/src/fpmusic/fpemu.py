"""Software emulation of reduced-precision binary floating-point formats.

Values are stored in the host's native float64; a target format is simulated
by rounding after every elementary operation (operate-then-round). Rounding
is round-to-nearest, ties to even. Exponent limits are enforced by default
(realistic overflow, gradual underflow through subnormals); a format can be
constructed with ``enforce_range=False`` to isolate pure significand effects.

The rounding core scales into the target binade with exact power-of-two
shifts (frexp/ldexp) and rounds the scaled significand with rint, so results
are bit-exact against hardware IEEE rounding for the builtin formats. The
operate-then-round model is single-rounding-exact for significand widths
t <= 25 and t = 53 (2t+2 <= 53); custom widths in between may double-round
on exact ties, which no builtin format hits.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

__all__ = [
    "PrecisionFormat",
    "FormatOverflowError",
    "builtin_formats",
    "parse_format",
    "round_to_format",
    "rounded_add",
    "rounded_mul",
]


class FormatOverflowError(OverflowError):
    """A rounded result exceeds the format's largest finite value."""

    def __init__(self, fmt_name: str, detail: str = ""):
        self.fmt_name = fmt_name
        msg = f"overflow in format {fmt_name!r}"
        super().__init__(msg + (f": {detail}" if detail else ""))


@dataclass(frozen=True)
class PrecisionFormat:
    """Descriptor of a binary floating-point format.

    significand_bits counts the implicit leading bit, so fp16/fp32/fp64 are
    t = 11/24/53. cost_weight is the relative arithmetic cost of one
    operation in this format (fp16:fp32:fp64 = 1:2:4).
    """

    name: str
    significand_bits: int
    emin: int
    emax: int
    cost_weight: Fraction
    enforce_range: bool = True

    def __post_init__(self):
        if self.significand_bits < 2:
            raise ValueError("significand_bits must be >= 2")
        if self.significand_bits > 53:
            raise ValueError("significand_bits > 53 cannot be hosted in float64")
        if self.emin >= self.emax:
            raise ValueError("emin must be < emax")
        object.__setattr__(self, "cost_weight", Fraction(self.cost_weight))
        if self.cost_weight <= 0:
            raise ValueError("cost_weight must be positive")

    @cached_property
    def unit_roundoff(self) -> float:
        """u = 2**(-t), half the spacing of the format at 1.0."""
        return 2.0 ** (-self.significand_bits)

    @cached_property
    def max_finite(self) -> float:
        """(2 - 2**(1-t)) * 2**emax, the largest representable magnitude."""
        t = self.significand_bits
        return (2.0 - 2.0 ** (1 - t)) * 2.0**self.emax

    @cached_property
    def min_subnormal(self) -> float:
        return 2.0 ** (self.emin - self.significand_bits + 1)

    @cached_property
    def is_host_double(self) -> bool:
        """True when rounding to this format is the identity on finite doubles."""
        return (
            self.significand_bits == 53 and self.emin == -1022 and self.emax == 1023
        )


_BUILTINS = {
    "fp16": PrecisionFormat("fp16", 11, -14, 15, Fraction(1)),
    "fp32": PrecisionFormat("fp32", 24, -126, 127, Fraction(2)),
    "fp64": PrecisionFormat("fp64", 53, -1022, 1023, Fraction(4)),
}


def builtin_formats() -> dict[str, PrecisionFormat]:
    """The IEEE half/single/double descriptors with cost weights 1:2:4."""
    return dict(_BUILTINS)


def parse_format(text: str) -> PrecisionFormat:
    """Resolve a format from a builtin name or a "t:emin:emax:q" string.

    The q field is parsed exactly as a Fraction, e.g. "8:-14:15:1/2".
    """
    key = text.strip()
    if key in _BUILTINS:
        return _BUILTINS[key]
    parts = key.split(":")
    if len(parts) != 4:
        raise ValueError(
            f"unknown format {text!r}: expected a builtin name or 't:emin:emax:q'"
        )
    t, emin, emax = (int(p) for p in parts[:3])
    return PrecisionFormat(key, t, emin, emax, Fraction(parts[3]))


def _round_core(x: np.ndarray, fmt: PrecisionFormat) -> np.ndarray:
    """Round finite float64 values to the format's grid, RNE, unbounded emax.

    The scaled value x * 2**(-shift) is an exponent shift of x (exact), its
    magnitude lies in [2**(t-1), 2**t) for normal-range inputs, and rint
    applies ties-to-even on it. Subnormals fall out of clamping the shift at
    the emin binade (gradual underflow); |scaled| < 0.5 flushes to zero.
    Range-free formats skip the clamp: pure significand rounding.
    """
    _, e = np.frexp(x)
    if fmt.enforce_range:
        e = np.maximum(e, fmt.emin + 1)
    shift = e - fmt.significand_bits
    return np.ldexp(np.rint(np.ldexp(x, -shift)), shift)


def _round_checked(x: np.ndarray, fmt: PrecisionFormat) -> np.ndarray:
    if fmt.is_host_double and fmt.enforce_range:
        # Identity on finite doubles; non-finite values mean the host
        # operation itself overflowed.
        if not np.all(np.isfinite(x)):
            raise FormatOverflowError(fmt.name, "host double overflow")
        return x
    y = _round_core(x, fmt)
    if fmt.enforce_range:
        if np.any(np.abs(y) > fmt.max_finite):
            raise FormatOverflowError(fmt.name)
    elif not np.all(np.isfinite(y)):
        raise FormatOverflowError(fmt.name, "host double overflow")
    return y


def round_to_format(x, fmt: PrecisionFormat):
    """Nearest value with t significand bits and exponent in [emin, emax].

    Ties to even. Idempotent and monotone; for normal-range x the result y
    satisfies y = x(1+d) with |d| <= u. Accepts scalars or arrays (elementwise).
    Raises FormatOverflowError when the nearest grid value exceeds the
    format's maximum finite magnitude (unless range enforcement is off).
    """
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("round_to_format requires finite input")
    out = _round_checked(arr, fmt)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def rounded_add(a, b, fmt: PrecisionFormat):
    """fl(a + b) in fmt: the exact sum, rounded once to the format's grid.

    Operands are expected to be representable in fmt already (callers round
    inputs first). Elementwise over arrays.
    """
    with np.errstate(over="ignore"):
        s = np.asarray(a, dtype=np.float64) + b
    return _round_checked(s, fmt)


def rounded_mul(a, b, fmt: PrecisionFormat):
    """fl(a * b) in fmt, same contract as rounded_add."""
    with np.errstate(over="ignore"):
        p = np.asarray(a, dtype=np.float64) * b
    return _round_checked(p, fmt)
