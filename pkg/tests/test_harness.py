import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from trinv import (
    ExperimentSpec,
    GeneratorSpec,
    default_policy,
    emit_plots,
    make_matrix,
    parse_generator,
    parse_method,
    run_decay_sweep,
    run_method,
    run_ns_iteration_sweep,
    run_sweep,
)
from trinv.harness import HARD_KEY_CORR, render_method


def tiny_spec(**kw):
    base = dict(generator=GeneratorSpec.make("deltanet", corr=HARD_KEY_CORR),
                sizes=(16,), formats=("fp32",), methods=("VCS",), trials=2, seed=0)
    base.update(kw)
    return ExperimentSpec(**base)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def test_parse_method_tokens():
    pol = default_policy("fp32")
    assert parse_method("VCS", pol).method == "VCS"
    ns = parse_method("NS-8", pol)
    assert ns.method == "NS" and ns.m == 8 and ns.x0_scale == 0.25
    ns_plain = parse_method("NS(m=6,c=1.0)", pol)
    assert ns_plain.m == 6 and ns_plain.x0_scale == 1.0
    mxr = parse_method("mxr(b0=8,r=2)", pol)
    assert mxr.method == "MXR" and mxr.b0 == 8 and mxr.r == 2
    wrapped = parse_method("MCH+IR", pol)
    assert wrapped.method == "MCH" and wrapped.post_ir == 1
    double = parse_method("VCS+2IR", pol)
    assert double.post_ir == 2
    assert render_method(mxr) == "MXR(b0=8,r=2)"
    assert render_method(parse_method("NS-12", pol)) == "NS(m=12,c=0.25)"
    for bad in ("LU", "NS-", "MXR(q=3)", "VCS-2"):
        with pytest.raises(ValueError):
            parse_method(bad, pol)


def test_parse_generator_strings():
    g = parse_generator("deltanet(corr=0.88)")
    assert g.name == "deltanet" and g.get("corr") == 0.88
    g2 = parse_generator("worstcase,sign=-1")
    assert g2.name == "worstcase" and g2.get("sign") == -1
    assert parse_generator("gaussian").params == ()
    assert g.render() == "deltanet(corr=0.88)"


def test_make_matrix_families():
    for name, params in (("deltanet", {"corr": 0.5}), ("gaussian", {}),
                         ("worstcase", {"sign": 1}), ("kkt", {}),
                         ("beta", {"beta": 0.9}), ("decay", {"gamma": 0.9})):
        a = make_matrix(GeneratorSpec.make(name, **params), 8, seed=3)
        assert a.n == 8 and a.kind == "unit_lower"
    with pytest.raises(ValueError):
        make_matrix(GeneratorSpec("nope"), 8, 0)


def test_run_method_dispatch():
    a = make_matrix(GeneratorSpec.make("deltanet"), 16, seed=1)
    pol = default_policy("fp64")
    for token in ("VCS", "MCS", "MCH", "MBH", "MXR(b0=4,r=1)", "NS(m=4,c=1.0)", "VCS+IR"):
        x = run_method(parse_method(token, pol), a)
        assert x.n == 16


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def test_row_counts_and_ordering():
    spec = tiny_spec(sizes=(16, 32), formats=("fp16", "fp32"),
                     methods=("VCS", "MCH"), trials=3)
    res = run_sweep(spec)
    assert len(res.rows) == 3 * 2 * 2 * 2
    assert len(res.aggregates) == 2 * 2 * 2
    keys = [(r["trial"], r["n"], r["format"], r["method"]) for r in res.rows]
    assert keys == sorted(keys)
    assert all(r["trial"] == "median" for r in res.aggregates)


def test_sweep_deterministic_bytes():
    spec = tiny_spec(sizes=(16, 32), formats=("fp16",), methods=("VCS", "NS-6"), trials=2)
    assert run_sweep(spec).to_csv() == run_sweep(spec).to_csv()


def test_sweep_threaded_matches_serial(monkeypatch):
    spec = tiny_spec(sizes=(16, 32), formats=("fp16", "fp32"),
                     methods=("VCS", "MXR(r=1)"), trials=3)
    serial = run_sweep(spec).to_csv()
    monkeypatch.setenv("TRINV_THREADS", "4")
    assert run_sweep(spec).to_csv() == serial


def test_sweep_oracle_self_consistency():
    spec = tiny_spec(sizes=(16,), formats=("fp64",), methods=("VCS",), trials=1)
    res = run_sweep(spec)
    assert res.rows[0]["frob_rel"] <= 1e-12
    assert res.rows[0]["residual"] <= 1e-12


def test_sweep_seeds_offset_by_trial():
    spec = tiny_spec(trials=3, seed=100)
    res = run_sweep(spec)
    assert sorted({r["seed"] for r in res.rows}) == [100, 101, 102]


def test_headline_phenomena_in_miniature():
    spec = tiny_spec(sizes=(32, 64), formats=("fp16", "bf16"),
                     methods=("VCS", "MCH"), trials=3)
    res = run_sweep(spec)
    for n in (32, 64):
        for r in res.select(method="MCH", n=n, format="fp16"):
            assert r["nonfinite"] > 0
        for r in res.select(method="MCH", n=n, format="bf16"):
            assert r["nonfinite"] == 0
        # coarser mantissa: bf16 beats fp16 nowhere among stable methods
        assert (res.median("frob_rel", method="VCS", n=n, format="bf16")
                > res.median("frob_rel", method="VCS", n=n, format="fp16"))


def test_sweep_writes_file(tmp_path):
    out = tmp_path / "rows.csv"
    spec = tiny_spec(output=str(out))
    run_sweep(spec)
    text = out.read_text()
    assert text.startswith("# trinv csv v1\n")
    assert text.count("\n") == 2 + 2 + 1


def test_accumulate_override_changes_results():
    hot = GeneratorSpec.make("deltanet", corr=HARD_KEY_CORR)
    base = ExperimentSpec(generator=hot, sizes=(32,), formats=("fp32",),
                          methods=("MCH",), trials=2, seed=0)
    wide = ExperimentSpec(generator=hot, sizes=(32,), formats=("fp32",),
                          methods=("MCH",), trials=2, seed=0, accumulate="fp64")
    b, w = run_sweep(base), run_sweep(wide)
    # storage rounding still dominates, but the accumulation grid is visible
    assert b.to_csv() != w.to_csv()


# ---------------------------------------------------------------------------
# iteration sweep
# ---------------------------------------------------------------------------

def test_ns_sweep_monotone_then_flat():
    res = run_ns_iteration_sweep(sizes=(64,), formats=("fp32",),
                                 m_values=(0, 2, 4, 6, 8, 10, 12, 14),
                                 trials=5, seed=0)
    meds = [res.median("frob_rel", method=f"NS(m={m},c=0.25)", n=64, format="fp32")
            for m in (0, 2, 4, 6, 8, 10, 12, 14)]
    floor = meds[-1]
    for before, after in zip(meds, meds[1:]):
        assert after <= before or max(before, after) <= 10 * floor  # monotone until the floor
    assert meds[-2] <= meds[3]          # error(12) <= error(6)
    assert abs(meds[-1] - meds[-2]) <= 0.1 * meds[-2]  # 12 vs 14 within 10%


def test_ns_sweep_zero_iterations_is_start_error():
    res = run_ns_iteration_sweep(sizes=(16,), formats=("fp64",), m_values=(0,),
                                 trials=1, seed=4, x0_scale=1.0)
    row = res.rows[0]
    a = make_matrix(GeneratorSpec.make("deltanet", corr=HARD_KEY_CORR), 16, seed=4)
    from trinv import reference_inverse
    t = reference_inverse(a).data
    expect = np.linalg.norm(t - np.eye(16)) / np.linalg.norm(t)
    assert row["frob_rel"] == pytest.approx(expect, rel=1e-12)


# ---------------------------------------------------------------------------
# decay sweep
# ---------------------------------------------------------------------------

def test_decay_gamma_one_matches_plain_sweep():
    kw = dict(sizes=(16, 32), formats=("fp16", "fp32"), methods=("VCS", "MXR(r=0)"),
              trials=2, seed=5)
    block = run_decay_sweep(gammas=(1.0,), **kw)
    plain = run_sweep(ExperimentSpec(
        generator=GeneratorSpec.make("decay", gamma=1.0, corr=HARD_KEY_CORR), **kw))
    assert block.to_csv() == plain.to_csv()


def test_decay_improves_mxr_accuracy():
    res = run_decay_sweep(gammas=(1.0, 0.9, 0.8), sizes=(64,),
                          formats=("fp16", "fp32"), methods=("MXR(r=0)",),
                          trials=5, seed=0)
    for fmt in ("fp16", "fp32"):
        meds = {g: res.median("frob_rel", n=64, format=fmt,
                              generator=f"decay(corr=0.88,gamma={g:g})")
                for g in (1.0, 0.9, 0.8)}
        assert meds[0.9] < meds[1.0]
        assert meds[1.0] >= 10 * meds[0.8]  # one-to-two digit gain, pinned at 0.8


def test_decay_strong_limit_is_easy():
    res = run_decay_sweep(gammas=(0.05,), sizes=(32,), formats=("fp32",),
                          methods=("VCS", "MCH", "MXR(r=0)"), trials=2, seed=1)
    for r in res.rows:
        assert r["frob_rel"] <= 1e-5


def test_decay_rejects_bad_gamma():
    with pytest.raises(ValueError):
        run_decay_sweep(gammas=(0.0,), sizes=(16,), formats=("fp32",),
                        methods=("VCS",), trials=1)


# ---------------------------------------------------------------------------
# plots
# ---------------------------------------------------------------------------

def test_emit_plots_panel_counts(tmp_path):
    spec = tiny_spec(sizes=(16, 32), formats=("fp16", "bf16", "fp32"),
                     methods=("VCS", "MCH"), trials=2)
    csv_text = run_sweep(spec).to_csv()
    paths = emit_plots(csv_text, str(tmp_path))
    assert len(paths) == 9  # 3 formats x 3 metrics
    assert all(p.endswith(".svg") and os.path.exists(p) for p in paths)


def test_emit_plots_ns_panel(tmp_path):
    res = run_ns_iteration_sweep(sizes=(16, 32), formats=("fp32",),
                                 m_values=(2, 4, 6), trials=2, seed=0)
    paths = emit_plots(res.to_csv(), str(tmp_path))
    assert [os.path.basename(p) for p in paths] == ["ns_iterations_fp32.svg"]


def test_emit_plots_empty_dataset(tmp_path, capsys):
    paths = emit_plots("# trinv csv v1\n" + ",".join(
        ["trial", "generator", "method", "n", "format", "seed",
         "max_abs", "max_rel", "frob_rel", "residual", "nonfinite"]) + "\n",
        str(tmp_path))
    assert paths == []
    assert "empty dataset" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def run_cli(*args, **kw):
    return subprocess.run([sys.executable, "-m", "trinv", *args],
                          capture_output=True, text=True, **kw)


def test_cli_sweep_roundtrip(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["sweep", "--sizes", "16", "--formats", "fp16,fp32", "--methods",
            "VCS,MCH", "--trials", "2", "--seed", "3"]
    r1 = run_cli(*argv, "--out", str(out1))
    r2 = run_cli(*argv, "--out", str(out2))
    assert r1.returncode == 0 and r2.returncode == 0, r1.stderr
    assert out1.read_bytes() == out2.read_bytes()
    assert out1.read_text().startswith("# trinv csv v1\n")


def test_cli_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "spec.json"
    cfg.write_text(json.dumps({"sizes": "16", "formats": "fp32", "methods": "VCS",
                               "trials": 4, "seed": 9}))
    direct = run_cli("sweep", "--config", str(cfg))
    overridden = run_cli("sweep", "--config", str(cfg), "--trials", "1")
    assert direct.returncode == 0 and overridden.returncode == 0
    assert direct.stdout.count("\n") == 2 + 4 + 1
    assert overridden.stdout.count("\n") == 2 + 1 + 1


def test_cli_plot_and_verify(tmp_path):
    csv_path = tmp_path / "rows.csv"
    r = run_cli("sweep", "--sizes", "16", "--formats", "fp32", "--methods", "VCS",
                "--trials", "1", "--out", str(csv_path))
    assert r.returncode == 0
    p = run_cli("plot", "--in", str(csv_path), "--out", str(tmp_path / "plots"))
    assert p.returncode == 0
    assert len(p.stdout.splitlines()) == 3  # one format x three metrics
    v = run_cli("verify")
    assert v.returncode == 0, v.stdout + v.stderr
    assert "FAIL" not in v.stdout


def test_spec_validation():
    with pytest.raises(ValueError):
        tiny_spec(trials=0)
