"""Independent test oracles.

Deliberately coded through different machinery than the package (exact
Fractions, compensated summation, dense products) so oracle and
implementation cannot share a bug.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from fpmusic.fpemu import PrecisionFormat


def kahan_dot(b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Compensated double-precision dot over the last axis (batched)."""
    prods = np.asarray(b, dtype=np.float64) * np.asarray(c, dtype=np.float64)
    s = np.zeros(prods.shape[:-1])
    comp = np.zeros_like(s)
    for i in range(prods.shape[-1]):
        t = prods[..., i] - comp
        tot = s + t
        comp = (tot - s) - t
        s = tot
    return s


def reference_round(x: float, fmt: PrecisionFormat) -> float:
    """Bit-exact reference rounder over the format grid via exact rationals.

    Walks the grid with Fractions (ties to even on the scaled significand);
    raises OverflowError past the max finite value when the format enforces
    its range. Independent of the frexp/ldexp implementation path.
    """
    xf = Fraction(x)
    if xf == 0:
        return x  # preserves signed zero
    t = fmt.significand_bits
    mag = abs(xf)
    # Binade exponent e with 2^(e-1) <= |x| < 2^e, by exact comparisons.
    e = 0
    while Fraction(2) ** e <= mag:
        e += 1
    while Fraction(2) ** (e - 1) > mag:
        e -= 1
    if fmt.enforce_range:
        e = max(e, fmt.emin + 1)
    scale = Fraction(2) ** (e - t)
    q = mag / scale
    lo = q.numerator // q.denominator
    frac = q - lo
    if frac > Fraction(1, 2) or (frac == Fraction(1, 2) and lo % 2 == 1):
        lo += 1
    result = lo * scale
    if fmt.enforce_range:
        max_finite = (Fraction(2) - Fraction(2) ** (1 - t)) * Fraction(2) ** fmt.emax
        if result > max_finite:
            raise OverflowError("reference rounder overflow")
    out = float(result)
    return -out if x < 0 else out


def corrected_ap_bound(assignment, cfg, b, c):
    """Certificate including the additive input-conversion term per group.

    The product of group k passes through two conversions and one multiply,
    so its group contributes [m_k u_k (1+u_k)^2 + 2u_k + u_k^2] beta_k; the
    in-package bound folds the conversion factor multiplicatively instead,
    which undercounts for small dominant groups. This form is rigorous.
    """
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    s = np.asarray(assignment.magnitude_sum)
    absprod = np.abs(b * c)
    eps = (cfg.num_levels - 1) * cfg.levels[0].unit_roundoff
    total = np.zeros(s.shape)
    for k, fmt in enumerate(cfg.levels, start=1):
        u = fmt.unit_roundoff
        mass = np.where(assignment.group_of == k, absprod, 0.0).sum(axis=-1)
        mk = assignment.group_sizes[..., k - 1]
        total = total + (mk * u * (1.0 + u) ** 2 + 2.0 * u + u * u) * (mass / s)
    return eps + (1.0 + eps) * total


def principal_angles(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sine-based principal angles (accurate near zero)."""
    import scipy.linalg

    return scipy.linalg.subspace_angles(u, v)
