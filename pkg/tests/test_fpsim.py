"""Bit-level checks of the reduced-precision emulation.

The reference for each preset is an independent oracle: numpy's native
casts for fp16/fp32, and an exact rational round-to-nearest-even built
from integer arithmetic for every format (used as the bf16 authority).
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from trinv import (
    BFLOAT16,
    FLOAT16,
    FLOAT32,
    FLOAT64,
    PrecisionPolicy,
    TriMatrix,
    default_policy,
    emulated_add,
    emulated_matmul,
    fp_add,
    fp_matmul,
    gen_deltanet,
    get_format,
    matmul_tally,
    quantize,
    round_to_format,
)

FORMATS = (FLOAT16, BFLOAT16, FLOAT32, FLOAT64)


def rational_round(x: float, fmt) -> float:
    """Round-to-nearest-even on the fmt grid via exact integer arithmetic."""
    if not math.isfinite(x):
        return x
    if x == 0.0:
        return x
    v = Fraction(x)
    av = abs(v)
    e = av.numerator.bit_length() - av.denominator.bit_length()
    if Fraction(2) ** e > av:
        e -= 1
    e = max(e, fmt.emin)
    step = Fraction(2) ** (e - fmt.t)
    q, rem = divmod(av, step)
    half = step / 2
    if rem > half or (rem == half and q % 2 == 1):
        q += 1
    r = float(q * step)
    if r > fmt.max_finite:
        r = math.inf
    return math.copysign(r, x)


def sample_values(count=4000, seed=123):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(count) * 10.0 ** rng.integers(-12, 12, count)
    specials = np.array([0.0, -0.0, 1.0, -1.0, 65504.0, 65519.0, 65520.0, 7e4,
                         2.0 ** -14, 2.0 ** -24, 2.0 ** -25, 3e38, 3.4e38, 4e38,
                         1e-38, 1e-45, np.inf, -np.inf, np.nan])
    return np.concatenate([vals, specials])


def test_round_trivial_values():
    for fmt in FORMATS:
        assert round_to_format(1.0, fmt) == 1.0
    assert round_to_format(1.0 + 2.0 ** -11, FLOAT16) == 1.0  # tie to even
    assert round_to_format(70000.0, FLOAT16) == math.inf
    assert round_to_format(-70000.0, FLOAT16) == -math.inf
    assert round_to_format(65504.0, FLOAT16) == 65504.0
    assert round_to_format(65519.0, FLOAT16) == 65504.0
    assert round_to_format(65520.0, FLOAT16) == math.inf  # ties across max go up
    assert math.isnan(round_to_format(math.nan, BFLOAT16))
    # bf16 ties go to even as well (grid spacing at 1.0 is 2^-7)
    assert round_to_format(1.0 + 2.0 ** -8, BFLOAT16) == 1.0
    assert round_to_format(1.0 + 3.0 * 2.0 ** -8, BFLOAT16) == 1.0 + 2.0 ** -6


def test_round_matches_native_casts():
    x = sample_values()
    with np.errstate(all="ignore"):
        got16 = round_to_format(x, FLOAT16)
        want16 = x.astype(np.float16).astype(np.float64)
        got32 = round_to_format(x, FLOAT32)
        want32 = x.astype(np.float32).astype(np.float64)
    assert np.array_equal(got16, want16, equal_nan=True)
    assert np.array_equal(got32, want32, equal_nan=True)
    assert np.array_equal(round_to_format(x, FLOAT64), x, equal_nan=True)


@pytest.mark.parametrize("fmt", FORMATS, ids=lambda f: f.name)
def test_round_matches_rational_oracle(fmt):
    for x in sample_values(count=1000, seed=77):
        got = round_to_format(float(x), fmt)
        want = rational_round(float(x), fmt)
        assert got == want or (math.isnan(got) and math.isnan(want)), \
            f"{fmt.name}: {x!r} -> {got!r}, oracle {want!r}"


@pytest.mark.parametrize("fmt", FORMATS, ids=lambda f: f.name)
def test_round_monotone_and_idempotent(fmt):
    x = np.sort(sample_values(seed=5)[:-1])  # drop the NaN
    with np.errstate(all="ignore"):
        r = round_to_format(x, fmt)
    assert np.all(r[1:] >= r[:-1])
    assert np.array_equal(round_to_format(r, fmt), r, equal_nan=True)


@pytest.mark.parametrize("fmt", FORMATS, ids=lambda f: f.name)
def test_round_relative_error_bound(fmt):
    rng = np.random.default_rng(9)
    x = rng.standard_normal(5000) * 2.0 ** rng.integers(fmt.emin + 1, fmt.emax - 1, 5000)
    x = x[(np.abs(x) >= 2.0 ** fmt.emin) & (np.abs(x) <= fmt.max_finite)]  # normalized range only
    assert x.size > 3000
    r = round_to_format(x, fmt)
    assert np.all(np.abs(r - x) <= fmt.u * np.abs(x))


def test_exponent_range_asymmetry():
    assert round_to_format(7e4, FLOAT16) == math.inf
    assert math.isfinite(round_to_format(7e4, BFLOAT16))
    assert FLOAT16.max_finite == 65504.0
    assert BFLOAT16.max_finite > 1e38


def test_subnormals_representable():
    tiny16 = FLOAT16.smallest_subnormal
    assert tiny16 == 2.0 ** -24
    assert round_to_format(tiny16, FLOAT16) == tiny16
    assert round_to_format(tiny16 / 4, FLOAT16) == 0.0
    # gradual underflow: halfway between 0 and the smallest subnormal ties to even (0)
    assert round_to_format(tiny16 / 2, FLOAT16) == 0.0
    assert round_to_format(tiny16 * 0.75, FLOAT16) == tiny16


def test_quantize_preserves_structure():
    a = gen_deltanet(16, seed=2)
    for fmt in FORMATS:
        q = quantize(a, fmt)
        assert q.kind == "unit_lower"
        assert np.array_equal(np.diagonal(q.data), np.ones(16))
    dyadic = TriMatrix.wrap(np.tril(np.full((4, 4), 0.25), -1) + np.eye(4))
    for fmt in FORMATS:
        assert np.array_equal(quantize(dyadic, fmt).data, dyadic.data)


def test_quantize_grid_subset():
    a = gen_deltanet(24, seed=3)
    coarse = quantize(a, BFLOAT16)
    assert np.array_equal(quantize(coarse, FLOAT32).data, coarse.data)
    fine16 = quantize(a, FLOAT16)
    assert np.array_equal(quantize(fine16, FLOAT32).data, fine16.data)


def test_policy_validation():
    with pytest.raises(ValueError):
        PrecisionPolicy(FLOAT32, FLOAT16)
    assert default_policy("fp16").accumulate is FLOAT32
    assert default_policy("bf16").accumulate is FLOAT32
    assert default_policy("fp32").accumulate is FLOAT32
    assert default_policy("fp64").accumulate is FLOAT64
    assert get_format("bfloat16") is BFLOAT16
    with pytest.raises(ValueError):
        get_format("fp8")


def test_emulated_matmul_identity_and_scalar():
    a = gen_deltanet(8, seed=4)
    for fmt in FORMATS:
        pol = default_policy(fmt)
        aq = quantize(a, fmt)
        out = emulated_matmul(aq, TriMatrix.identity(8), pol)
        assert np.array_equal(out.data, aq.data)
    one = TriMatrix.wrap([[2.0]])
    other = TriMatrix.wrap([[3.0]])
    assert emulated_matmul(one, other, default_policy("fp16")).data[0, 0] == 6.0


def test_matmul_fp64_matches_host_loop():
    rng = np.random.default_rng(6)
    a = rng.standard_normal((16, 16))
    b = rng.standard_normal((16, 16))
    got = fp_matmul(a, b, PrecisionPolicy(FLOAT64, FLOAT64))
    want = np.empty((16, 16))
    for i in range(16):
        for j in range(16):
            s = 0.0
            for k in range(16):
                s += float(a[i, k]) * float(b[k, j])
            want[i, j] = s
    assert np.array_equal(got, want)


def test_matmul_native_path_equals_generic_path():
    # the fp16/fp32 fast paths must agree bit for bit with explicit rounding
    from trinv.fpsim import _matmul_generic, _matmul_native
    rng = np.random.default_rng(7)
    for fmt, dt in ((FLOAT16, np.float16), (FLOAT32, np.float32)):
        a = round_to_format(rng.standard_normal((12, 12)) * 8, fmt)
        b = round_to_format(rng.standard_normal((12, 12)) * 8, fmt)
        assert np.array_equal(_matmul_native(a, b, dt), _matmul_generic(a, b, fmt))


def test_matmul_low_precision_differs_from_exact():
    a = quantize(gen_deltanet(32, seed=8), FLOAT16)
    pol16 = default_policy("fp16")
    exact = fp_matmul(a.data, a.data, PrecisionPolicy(FLOAT64, FLOAT64))
    low = fp_matmul(a.data, a.data, pol16)
    assert not np.array_equal(exact, low)
    assert np.max(np.abs(exact - low)) < 1e-2


def test_emulated_add_examples():
    a = quantize(gen_deltanet(8, seed=10), FLOAT16)
    zero = TriMatrix.wrap(np.zeros((8, 8)))
    assert np.array_equal(emulated_add(a, zero, FLOAT16).data, a.data)
    neg = TriMatrix.wrap(-a.data)
    assert np.all(emulated_add(a, neg, FLOAT16).data == 0.0)
    # absorption: the fp16 ulp at 1e4 is 8, so adding 1 changes nothing
    assert fp_add(np.array([1e4]), np.array([1.0]), FLOAT16)[0] == 1e4
    assert fp_add(np.array([1e4]), np.array([5.0]), FLOAT16)[0] == 10008.0


def test_inf_nan_propagation():
    pol = default_policy("fp16")
    a = TriMatrix.wrap(np.array([[np.inf, 0.0], [0.0, 1.0]]))
    b = TriMatrix.identity(2)
    out = emulated_matmul(a, b, pol)
    assert out.data[0, 0] == math.inf
    c = TriMatrix.wrap(np.array([[np.inf, 0.0], [0.0, 0.0]]))
    d = TriMatrix.wrap(np.array([[0.0, 0.0], [1.0, 0.0]]))
    prod = emulated_matmul(c, d, pol)
    assert math.isnan(prod.data[0, 0])  # inf * 0


def test_matmul_tally_counts_and_nests():
    a = gen_deltanet(4, seed=11)
    pol = default_policy("fp64")
    with matmul_tally() as outer:
        emulated_matmul(a, a, pol)
        with matmul_tally() as inner:
            emulated_matmul(a, a, pol)
        emulated_matmul(a, a, pol)
    assert inner.count == 1
    assert outer.count == 3
