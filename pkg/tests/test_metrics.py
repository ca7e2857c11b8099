import math

import numpy as np
import pytest
import scipy.linalg

from trinv import (
    TriMatrix,
    condition_number,
    error_report,
    gen_allones_worstcase,
    gen_deltanet,
    gen_gaussian_tril,
    inverse_entry_bound_check,
    reference_inverse,
)


def test_reference_inverse_small_cases():
    eye = TriMatrix.identity(5)
    assert np.array_equal(reference_inverse(eye).data, np.eye(5))
    a = TriMatrix.wrap([[1.0, 0.0], [0.625, 1.0]])
    assert np.array_equal(reference_inverse(a).data, [[1.0, 0.0], [-0.625, 1.0]])


def test_reference_inverse_residual():
    for n, seed in ((16, 0), (64, 1), (128, 2)):
        a = gen_deltanet(n, seed=seed)
        x = reference_inverse(a)
        r = np.eye(n) - x.data @ a.data
        assert np.linalg.norm(r) <= 1e-13


def test_reference_inverse_matches_lapack():
    # independent route: LAPACK triangular solve against all basis columns
    for seed in range(4):
        a = gen_deltanet(48, seed=seed, key_corr=0.7)
        mine = reference_inverse(a).data
        lapack = scipy.linalg.solve_triangular(a.data, np.eye(48), lower=True,
                                               unit_diagonal=True)
        assert np.allclose(mine, lapack, rtol=0, atol=1e-13)


def test_error_report_zero_for_identical():
    t = reference_inverse(gen_deltanet(12, seed=3))
    rep = error_report(t, t)
    assert rep.max_abs == 0.0 and rep.max_rel == 0.0 and rep.frob_rel == 0.0
    assert rep.nonfinite_count == 0


def test_error_report_single_perturbation():
    t = reference_inverse(gen_deltanet(8, seed=4))
    x = np.array(t.data)
    x[5, 2] += 0.5
    rep = error_report(t, TriMatrix.wrap(x))
    assert rep.max_abs == pytest.approx(0.5)
    assert rep.max_rel == pytest.approx(0.5 / abs(t.data[5, 2]))


def test_error_report_nonfinite_poisons_fields():
    t = reference_inverse(gen_deltanet(8, seed=5))
    x = np.array(t.data)
    x[3, 1] = np.inf
    x[7, 0] = np.nan
    rep = error_report(t, TriMatrix.wrap(x))
    assert rep.nonfinite_count == 2
    assert math.isnan(rep.max_abs) and math.isnan(rep.frob_rel) and math.isnan(rep.max_rel)


def test_error_report_residual_when_matrix_given():
    a = gen_deltanet(16, seed=6)
    t = reference_inverse(a)
    rep = error_report(t, t, a=a)
    assert rep.residual_frob <= 1e-13
    rep2 = error_report(t, t)
    assert math.isnan(rep2.residual_frob)


def test_error_report_scale_invariance():
    t = reference_inverse(gen_deltanet(10, seed=7))
    x = TriMatrix.wrap(t.data + 1e-6 * np.tril(np.ones((10, 10))))
    r1 = error_report(t, x)
    t2 = TriMatrix.wrap(3.0 * t.data)
    x2 = TriMatrix.wrap(3.0 * x.data)
    r2 = error_report(t2, x2)
    assert r1.frob_rel == pytest.approx(r2.frob_rel, rel=1e-12)


def test_error_report_shape_mismatch():
    t = reference_inverse(gen_deltanet(4, seed=0))
    with pytest.raises(ValueError):
        error_report(t, TriMatrix.identity(5))


def test_error_report_serializes_one_csv_row():
    from trinv.metrics import CSV_FIELDS
    a = gen_deltanet(8, seed=1)
    t = reference_inverse(a)
    rep = error_report(t, t, a=a)
    row = rep.csv_fields("VCS", 8, "fp16", 42)
    assert CSV_FIELDS == ("method", "n", "format", "seed",
                          "max_abs", "max_rel", "frob_rel", "residual", "nonfinite")
    assert len(row) == len(CSV_FIELDS)
    assert row[:4] == ["VCS", 8, "fp16", 42]
    assert row[8] == 0


def test_condition_number_basics():
    assert condition_number(TriMatrix.identity(7)) == pytest.approx(1.0)
    a = gen_deltanet(32, seed=8)
    k = condition_number(a)
    assert k >= 1.0
    assert condition_number(TriMatrix.wrap(5.0 * np.asarray(a.data))) == pytest.approx(k, rel=1e-10)


@pytest.mark.parametrize("n", [16, 32, 64, 128])
def test_condition_number_deltanet_bound(n):
    for seed in range(5):
        assert condition_number(gen_deltanet(n, seed=seed)) <= n ** 2


def test_condition_number_power_iteration_cross_check():
    # independent estimator of the spectral norms
    def normest(m, iters=400):
        rng = np.random.default_rng(0)
        v = rng.standard_normal(m.shape[1])
        for _ in range(iters):
            v = m.T @ (m @ v)
            v /= np.linalg.norm(v)
        return float(np.linalg.norm(m @ v))

    a = gen_deltanet(24, seed=9)
    inv = reference_inverse(a)
    est = normest(a.data) * normest(inv.data)
    assert condition_number(a) == pytest.approx(est, rel=1e-4)


def test_condition_number_rejects_singular():
    with pytest.raises(ValueError):
        condition_number(np.zeros((3, 3)))


def test_inverse_entry_bound_examples():
    assert inverse_entry_bound_check(TriMatrix.identity(6))
    for seed in range(10):
        assert inverse_entry_bound_check(gen_deltanet(64, seed=seed))
    assert not inverse_entry_bound_check(gen_allones_worstcase(8, -1))


def test_gaussian_family_fails_nothing_but_is_illconditioned():
    kappa = condition_number(gen_gaussian_tril(64, seed=0))
    assert kappa > 10 * 64 ** 2
