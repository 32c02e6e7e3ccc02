"""Format descriptors and the elementary rounding model."""

import dataclasses
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpmusic.fpemu import (
    FormatOverflowError,
    PrecisionFormat,
    builtin_formats,
    parse_format,
    round_to_format,
    rounded_add,
    rounded_mul,
)

from oracles import reference_round


class TestBuiltinFormats:
    def test_fp16_descriptor(self, fmts):
        f = fmts["fp16"]
        assert f.unit_roundoff == 2.0**-11
        assert (f.significand_bits, f.emin, f.emax) == (11, -14, 15)
        assert f.cost_weight == 1
        assert f.max_finite == 65504.0

    def test_fp32_descriptor(self, fmts):
        f = fmts["fp32"]
        assert f.unit_roundoff == 2.0**-24
        assert (f.significand_bits, f.emin, f.emax) == (24, -126, 127)
        assert f.cost_weight == 2

    def test_fp64_descriptor(self, fmts):
        f = fmts["fp64"]
        assert f.unit_roundoff == 2.0**-53
        assert (f.significand_bits, f.emin, f.emax) == (53, -1022, 1023)
        assert f.cost_weight == 4
        assert f.is_host_double

    def test_cost_ratio_1_2_4(self, fmts):
        qs = [fmts[n].cost_weight for n in ("fp16", "fp32", "fp64")]
        assert qs == [1, 2, 4]

    def test_unit_roundoff_is_two_to_minus_t(self):
        for t in (2, 5, 8, 11, 24, 53):
            f = PrecisionFormat("x", t, -14, 15, Fraction(1))
            assert f.unit_roundoff == 2.0**-t

    def test_validation(self):
        with pytest.raises(ValueError):
            PrecisionFormat("bad", 1, -14, 15, Fraction(1))
        with pytest.raises(ValueError):
            PrecisionFormat("bad", 60, -14, 15, Fraction(1))
        with pytest.raises(ValueError):
            PrecisionFormat("bad", 11, 15, -14, Fraction(1))
        with pytest.raises(ValueError):
            PrecisionFormat("bad", 11, -14, 15, Fraction(0))


class TestParseFormat:
    def test_builtin_names(self, fmts):
        assert parse_format("fp16") == fmts["fp16"]
        assert parse_format(" fp64 ") == fmts["fp64"]

    def test_config_string(self):
        f = parse_format("8:-14:15:1/2")
        assert f.significand_bits == 8
        assert (f.emin, f.emax) == (-14, 15)
        assert f.cost_weight == Fraction(1, 2)

    def test_rejects_garbage(self):
        with pytest.raises(ValueError):
            parse_format("fp8")
        with pytest.raises(ValueError):
            parse_format("11:-14:15")


class TestRoundToFormat:
    def test_exactly_representable(self, fmts):
        assert round_to_format(1.0, fmts["fp16"]) == 1.0

    def test_below_half_spacing_rounds_down(self, fmts):
        # spacing at 1.0 in fp16 is 2^-10; 1 + 2^-12 is below the midpoint
        assert round_to_format(1.0 + 2.0**-12, fmts["fp16"]) == 1.0

    def test_overflow_above_fp16_max(self, fmts):
        # max finite is (2 - 2^-10) * 2^15 = 65504
        with pytest.raises(FormatOverflowError):
            round_to_format(70000.0, fmts["fp16"])
        assert round_to_format(65504.0, fmts["fp16"]) == 65504.0

    def test_overflow_threshold_ties(self, fmts):
        # 65519.99 still rounds to 65504; 65520 ties up to 65536 > max
        assert round_to_format(65519.99, fmts["fp16"]) == 65504.0
        with pytest.raises(FormatOverflowError):
            round_to_format(65520.0, fmts["fp16"])

    def test_gradual_underflow(self, fmts):
        fp16 = fmts["fp16"]
        tiny = 2.0**-24  # smallest fp16 subnormal
        assert round_to_format(tiny, fp16) == tiny
        assert round_to_format(tiny * 0.75, fp16) == tiny
        assert round_to_format(tiny / 2, fp16) == 0.0  # tie to even -> 0
        assert round_to_format(tiny * 0.51, fp16) == tiny

    def test_signed_zero_preserved(self, fmts):
        out = round_to_format(np.array([0.0, -0.0]), fmts["fp16"])
        assert np.signbit(out[1]) and not np.signbit(out[0])

    def test_rejects_non_finite(self, fmts):
        with pytest.raises(ValueError):
            round_to_format(np.inf, fmts["fp16"])
        with pytest.raises(ValueError):
            round_to_format(np.nan, fmts["fp32"])

    def test_array_and_scalar_agree(self, fmts):
        xs = np.array([0.1, -3.7, 1234.5])
        arr = round_to_format(xs, fmts["fp16"])
        for x, y in zip(xs, arr):
            assert round_to_format(float(x), fmts["fp16"]) == y

    def test_bit_exact_vs_numpy_half(self, fmts):
        rng = np.random.default_rng(101)
        x = np.concatenate(
            [
                rng.uniform(-65504, 65504, 50_000),
                rng.uniform(-1, 1, 50_000),
                rng.uniform(-1e-3, 1e-3, 50_000),
                rng.uniform(-1e-7, 1e-7, 50_000),
            ]
        )
        got = round_to_format(x, fmts["fp16"])
        want = np.float16(x).astype(np.float64)
        assert np.array_equal(got, want)

    def test_bit_exact_vs_numpy_single(self, fmts):
        rng = np.random.default_rng(102)
        x = np.concatenate(
            [
                rng.uniform(-3e38, 3e38, 50_000),
                10.0 ** rng.uniform(-44, 38, 50_000) * rng.choice([-1, 1], 50_000),
            ]
        )
        got = round_to_format(x, fmts["fp32"])
        want = np.float32(x).astype(np.float64)
        assert np.array_equal(got, want)

    @pytest.mark.parametrize("spec", ["fp16", "8:-14:15:1", "5:-6:7:1"])
    def test_matches_fraction_reference_rounder(self, spec):
        fmt = parse_format(spec)
        rng = np.random.default_rng(103)
        xs = np.concatenate(
            [
                10.0 ** rng.uniform(-8, 4, 400) * rng.choice([-1, 1], 400),
                rng.uniform(-2, 2, 200),
            ]
        )
        for x in xs:
            x = float(x)
            try:
                want = reference_round(x, fmt)
            except OverflowError:
                with pytest.raises(FormatOverflowError):
                    round_to_format(x, fmt)
                continue
            assert round_to_format(x, fmt) == want


finite_doubles = st.floats(
    allow_nan=False, allow_infinity=False, min_value=-1e30, max_value=1e30
)


class TestRoundingProperties:
    @given(finite_doubles)
    @settings(max_examples=300, deadline=None)
    def test_idempotent(self, x):
        fmt = dataclasses.replace(builtin_formats()["fp16"], enforce_range=False)
        once = round_to_format(x, fmt)
        assert round_to_format(once, fmt) == once

    @given(finite_doubles, finite_doubles)
    @settings(max_examples=300, deadline=None)
    def test_monotone(self, x, y):
        fmt = dataclasses.replace(builtin_formats()["fp32"], enforce_range=False)
        lo, hi = min(x, y), max(x, y)
        assert round_to_format(lo, fmt) <= round_to_format(hi, fmt)

    @given(
        st.floats(allow_nan=False, min_value=2.0**-14, max_value=65504.0),
        st.sampled_from([1, -1]),
    )
    @settings(max_examples=300, deadline=None)
    def test_relative_error_in_normal_range(self, mag, sign):
        fmt = builtin_formats()["fp16"]
        x = sign * mag
        assert abs(round_to_format(x, fmt) - x) <= fmt.unit_roundoff * abs(x)

    @given(st.floats(allow_nan=False, allow_infinity=False))
    @settings(max_examples=500, deadline=None)
    def test_fp64_passthrough(self, x):
        assert round_to_format(x, builtin_formats()["fp64"]) == x


class TestRoundedOps:
    def test_add_identity(self, fmts):
        assert rounded_add(1.0, 0.0, fmts["fp16"]) == 1.0

    def test_add_tie_to_even(self, fmts):
        # exact sum 1 + 2^-11 is the midpoint of [1, 1 + 2^-10]
        assert rounded_add(1.0, 2.0**-11, fmts["fp16"]) == 1.0

    def test_add_spacing_at_1024(self, fmts):
        # fp16 spacing on [1024, 2048) is exactly 1, so 1025 is on the grid
        # (cross-checked against the reference rounder and numpy half)
        got = rounded_add(1024.0, 1.0, fmts["fp16"])
        assert got == reference_round(1025.0, fmts["fp16"])
        assert got == float(np.float16(1024.0) + np.float16(1.0)) == 1025.0

    def test_mul_identity_and_exact_ints(self, fmts):
        fp16 = fmts["fp16"]
        for x in (0.5, -3.0, 1024.0):
            assert rounded_mul(x, 1.0, fp16) == x
        assert rounded_mul(3.0, 3.0, fp16) == 9.0

    def test_mul_rounds_product(self, fmts):
        # (1 + 2^-10)^2 = 1 + 2^-9 + 2^-20 -> 1 + 2^-9
        got = rounded_mul(1.0 + 2.0**-10, 1.0 + 2.0**-10, fmts["fp16"])
        assert got == 1.0 + 2.0**-9

    def test_add_overflow_propagates(self, fmts):
        with pytest.raises(FormatOverflowError):
            rounded_add(60000.0, 60000.0, fmts["fp16"])

    def test_host_double_overflow_detected(self, fmts):
        big = 1.6e308
        with pytest.raises(FormatOverflowError):
            rounded_add(big, big, fmts["fp64"])

    def test_unlimited_range_mode(self, free_fmts):
        free16 = free_fmts["fp16"]
        # no overflow, pure significand rounding far outside [emin, emax]
        assert rounded_mul(60000.0, 60000.0, free16) == round_to_format(
            3.6e9, free16
        )
        assert round_to_format(2.0**-30, free16) == 2.0**-30
        # and no subnormal coarsening below emin
        x = (1 + 2.0**-10) * 2.0**-20
        assert round_to_format(x, free16) == x
