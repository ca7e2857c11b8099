"""Experiment runner: accuracy sweeps over sizes, formats and methods.

A sweep generates one matrix per (trial, size) cell, quantizes it to each
input format, inverts it with each configured method under the
storage-in-input-format / accumulate-in-float32 policy, and compares
against the float64 reference inverse of the quantized input. Rows are
emitted in a canonical order with per-cell medians appended, so a sweep's
CSV is byte-identical across runs and hosts for a fixed spec.

Set TRINV_THREADS to run independent (trial, size) cells in parallel;
ordering and content do not depend on the schedule.
"""

from __future__ import annotations

import concurrent.futures
import csv
import io
import math
import os
import re
import statistics
from dataclasses import dataclass, field

import numpy as np

from . import algos, gen, metrics
from .core import TriMatrix
from .fpsim import PrecisionPolicy, default_policy, get_format, quantize

__all__ = [
    "GeneratorSpec",
    "ExperimentSpec",
    "SweepResult",
    "parse_method",
    "parse_generator",
    "make_matrix",
    "run_method",
    "run_sweep",
    "run_ns_iteration_sweep",
    "run_decay_sweep",
    "emit_plots",
    "verify_invariants",
]

CSV_VERSION = "# trinv csv v1"
CSV_HEADER = ("trial", "generator", "method", "n", "format", "seed",
              "max_abs", "max_rel", "frob_rel", "residual", "nonfinite")

# key correlation of the headline benchmark family: hot enough to expose
# the repeated-squaring blow-up, tame enough for the stable methods
HARD_KEY_CORR = 0.88

DEFAULT_SIZES = (16, 32, 64, 128)
DEFAULT_FORMATS = ("fp16", "bf16", "fp32")
DEFAULT_METHODS = ("VCS", "MCS", "MCH", "MBH", "MXR(r=0)", "MXR(r=1)", "NS-12")


@dataclass(frozen=True)
class GeneratorSpec:
    """Matrix family by name plus keyword parameters (sizes/seeds come per cell)."""

    name: str
    params: tuple = ()

    @staticmethod
    def make(name: str, **params) -> "GeneratorSpec":
        return GeneratorSpec(name, tuple(sorted(params.items())))

    def get(self, key, default=None):
        return dict(self.params).get(key, default)

    def with_params(self, **extra) -> "GeneratorSpec":
        d = dict(self.params)
        d.update(extra)
        return GeneratorSpec(self.name, tuple(sorted(d.items())))

    def render(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={_fmt_value(v)}" for k, v in self.params)
        return f"{self.name}({inner})"


def _fmt_value(v) -> str:
    if isinstance(v, float):
        return f"{v:g}"
    return str(v)


def parse_generator(text: str) -> GeneratorSpec:
    """Parse 'name' or 'name,k=v,...' or 'name(k=v,...)' into a GeneratorSpec."""
    text = text.strip()
    m = re.fullmatch(r"(\w+)\((.*)\)", text)
    if m:
        name, body = m.group(1), m.group(2)
    elif "," in text:
        name, body = text.split(",", 1)
    else:
        name, body = text, ""
    params = {}
    for part in filter(None, (p.strip() for p in body.split(","))):
        if "=" not in part:
            raise ValueError(f"generator parameter {part!r} is not key=value")
        k, v = part.split("=", 1)
        try:
            params[k.strip()] = int(v)
        except ValueError:
            params[k.strip()] = float(v)
    return GeneratorSpec.make(name.strip(), **params)


def make_matrix(gspec: GeneratorSpec, n: int, seed: int) -> TriMatrix:
    """Instantiate one matrix of the family at size n with the given seed."""
    p = dict(gspec.params)
    name = gspec.name
    if name == "deltanet":
        return gen.gen_deltanet(n, d=p.get("d"), seed=seed, key_corr=p.get("corr", 0.0))
    if name == "decay":
        return gen.gen_deltanet(n, d=p.get("d"), seed=seed, key_corr=p.get("corr", 0.0),
                                decay=float(p.get("gamma", 1.0)))
    if name == "gaussian":
        return gen.gen_gaussian_tril(n, seed=seed)
    if name == "worstcase":
        return gen.gen_allones_worstcase(n, sign=int(p.get("sign", -1)))
    keys = gen.unit_keys(n, p.get("d"), seed, p.get("corr", 0.0))
    if name == "kkt":
        return gen.gen_with_phi(keys, gen.PhiKind("plain_kkt"))
    if name == "beta":
        beta = np.full(n, float(p.get("beta", 1.0)))
        return gen.gen_with_phi(keys, gen.PhiKind("deltanet_beta", beta=beta))
    raise ValueError(f"unknown generator {name!r}")


# ---------------------------------------------------------------------------
# method tokens
# ---------------------------------------------------------------------------

_METHOD_RE = re.compile(r"(?i)^(VCS|MCS|MCH|MBH|MXR|NS)(?:-(\d+))?(?:\(([^)]*)\))?((?:\+\d*IR)*)$")


def parse_method(token: str, policy: PrecisionPolicy) -> algos.AlgorithmConfig:
    """Parse a method token into a configuration.

    Grammar: NAME, NS-<m>, NAME(k=v,...), and a +IR / +kIR suffix for
    full-matrix refinement of the finished inverse. Keys: b0, r, m, and c
    (scale of the starting guess for NS). The harness default for NS is
    the damped start c=0.25, which keeps the iteration's transient inside
    half-precision range on hard inputs.
    """
    m = _METHOD_RE.match(token.strip())
    if not m:
        raise ValueError(f"cannot parse method token {token!r}")
    name = m.group(1).upper()
    cfg = dict(b0=16 if name == "MXR" else 1, r=0, m=12, x0_scale=0.25 if name == "NS" else 1.0)
    if m.group(2):
        if name != "NS":
            raise ValueError(f"the -<count> shorthand is only for NS, got {token!r}")
        cfg["m"] = int(m.group(2))
    for part in filter(None, (p.strip() for p in (m.group(3) or "").split(","))):
        k, v = (s.strip() for s in part.split("="))
        if k == "c":
            cfg["x0_scale"] = float(v)
        elif k == "b0" and name == "MXR":
            cfg[k] = int(v)
        elif k == "r" and name == "MXR":
            cfg[k] = int(v)
        elif k == "m" and name == "NS":
            cfg[k] = int(v)
        else:
            raise ValueError(f"unknown method parameter {k!r} in {token!r}")
    post_ir = 0
    for rep in re.findall(r"\+(\d*)IR", m.group(4) or ""):
        post_ir += int(rep) if rep else 1
    return algos.AlgorithmConfig(name, policy, b0=cfg["b0"], r=cfg["r"], m=cfg["m"],
                                 x0_scale=cfg["x0_scale"], post_ir=post_ir)


def render_method(cfg: algos.AlgorithmConfig) -> str:
    name = cfg.method
    if name == "MXR":
        name = f"MXR(b0={cfg.b0},r={cfg.r})"
    elif name == "NS":
        name = f"NS(m={cfg.m})" if cfg.x0_scale == 1.0 else f"NS(m={cfg.m},c={cfg.x0_scale:g})"
    if cfg.post_ir:
        name += f"+{cfg.post_ir}IR"
    return name


def run_method(cfg: algos.AlgorithmConfig, a: TriMatrix) -> TriMatrix:
    """Invert a quantized matrix with one configured method."""
    if cfg.method == "VCS":
        x = algos.vcs_invert(a, cfg.policy)
    elif cfg.method == "MCS":
        x = algos.mcs_invert(a, cfg.policy)
    elif cfg.method == "MCH":
        x = algos.mch_invert(a, cfg.policy)
    elif cfg.method == "MBH":
        x = algos.mbh_invert(a, cfg.policy, b0=cfg.b0)
    elif cfg.method == "MXR":
        x = algos.mxr_invert(a, cfg.policy, b0=cfg.b0, r=cfg.r)
    elif cfg.method == "NS":
        x0 = None
        if cfg.x0_scale != 1.0:
            x0 = quantize(TriMatrix.wrap(cfg.x0_scale * np.eye(a.n)), cfg.policy.storage)
        x, _ = algos.ns_invert(a, cfg.policy, cfg.m, x0=x0)
    else:  # pragma: no cover - AlgorithmConfig validates
        raise ValueError(cfg.method)
    for _ in range(cfg.post_ir):
        x = algos.ir_refine(x, a, cfg.policy)
    return x


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentSpec:
    """Everything one sweep needs; identical specs give identical CSV bytes."""

    generator: GeneratorSpec = GeneratorSpec("deltanet", (("corr", HARD_KEY_CORR),))
    sizes: tuple = DEFAULT_SIZES
    formats: tuple = DEFAULT_FORMATS
    methods: tuple = DEFAULT_METHODS
    trials: int = 50
    seed: int = 0
    accumulate: str | None = None
    output: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "formats", tuple(self.formats))
        object.__setattr__(self, "methods", tuple(self.methods))

    def policy_for(self, fmt: str) -> PrecisionPolicy:
        storage = get_format(fmt)
        if self.accumulate is not None:
            return PrecisionPolicy(storage, get_format(self.accumulate))
        return default_policy(storage)


@dataclass
class SweepResult:
    """Raw rows plus per-cell medians, renderable as a canonical CSV."""

    rows: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_VERSION + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows + self.aggregates:
            writer.writerow([_csv_cell(row[k]) for k in CSV_HEADER])
        return buf.getvalue()

    def write(self, path: str) -> str:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_csv())
        return path

    def select(self, **match) -> list:
        return [r for r in self.rows if all(r[k] == v for k, v in match.items())]

    def median(self, key: str = "frob_rel", **match) -> float:
        vals = [r[key] for r in self.select(**match)]
        return _median(vals)


def _median(vals) -> float:
    vals = list(vals)
    if not vals:
        return float("nan")
    finite = [v for v in vals if not (isinstance(v, float) and math.isnan(v))]
    if len(finite) * 2 <= len(vals):  # NaN-majority cells stay NaN
        return float("nan")
    return float(statistics.median(finite))


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _cell_rows(spec: ExperimentSpec, trial: int, n: int) -> list:
    seed = spec.seed + trial
    base = make_matrix(spec.generator, n, seed)
    gname = spec.generator.render()
    rows = []
    for fmt in spec.formats:
        policy = spec.policy_for(fmt)
        aq = quantize(base, policy.storage)
        truth = metrics.reference_inverse(aq)
        for token in spec.methods:
            cfg = parse_method(token, policy)
            approx = run_method(cfg, aq)
            rep = metrics.error_report(truth, approx, a=aq)
            rows.append({
                "trial": trial, "generator": gname, "method": render_method(cfg),
                "n": n, "format": get_format(fmt).name, "seed": seed,
                "max_abs": rep.max_abs, "max_rel": rep.max_rel,
                "frob_rel": rep.frob_rel, "residual": rep.residual_frob,
                "nonfinite": rep.nonfinite_count,
            })
    return rows


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("TRINV_THREADS", "1")))
    except ValueError:
        return 1


def _run_cells(spec: ExperimentSpec) -> list:
    cells = [(t, n) for t in range(spec.trials) for n in spec.sizes]
    workers = _thread_count()
    if workers == 1 or len(cells) == 1:
        chunks = [_cell_rows(spec, t, n) for t, n in cells]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda c: _cell_rows(spec, *c), cells))
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r["trial"], r["n"], r["format"], r["method"]))
    return rows


def _aggregate(rows: list) -> list:
    cells = {}
    for r in rows:
        cells.setdefault((r["generator"], r["n"], r["format"], r["method"]), []).append(r)
    out = []
    for (gname, n, fmt, method) in sorted(cells, key=lambda c: (c[1], c[2], c[3], c[0])):
        group = cells[(gname, n, fmt, method)]
        out.append({
            "trial": "median", "generator": gname, "method": method,
            "n": n, "format": fmt, "seed": "",
            "max_abs": _median(r["max_abs"] for r in group),
            "max_rel": _median(r["max_rel"] for r in group),
            "frob_rel": _median(r["frob_rel"] for r in group),
            "residual": _median(r["residual"] for r in group),
            "nonfinite": sum(r["nonfinite"] for r in group),
        })
    return out


def run_sweep(spec: ExperimentSpec) -> SweepResult:
    """Full accuracy sweep over trials x sizes x formats x methods."""
    rows = _run_cells(spec)
    result = SweepResult(rows, _aggregate(rows))
    if spec.output:
        result.write(spec.output)
    return result


def run_ns_iteration_sweep(sizes=(64,), formats=("fp32",), m_values=(0, 2, 4, 6, 8, 10, 12, 14),
                           trials: int = 25, seed: int = 0,
                           generator: GeneratorSpec | None = None,
                           x0_scale: float = 0.25, output: str | None = None) -> SweepResult:
    """Newton-Schulz error versus iteration count (default: chunk size 64, fp32)."""
    gspec = generator or GeneratorSpec("deltanet", (("corr", HARD_KEY_CORR),))
    if not m_values:
        raise ValueError("m_values must be nonempty")
    methods = tuple(f"NS(m={m},c={x0_scale:g})" for m in m_values)
    spec = ExperimentSpec(generator=gspec, sizes=tuple(sizes), formats=tuple(formats),
                          methods=methods, trials=trials, seed=seed, output=output)
    return run_sweep(spec)


def run_decay_sweep(gammas=(1.0, 0.9), sizes=DEFAULT_SIZES, formats=DEFAULT_FORMATS,
                    methods=DEFAULT_METHODS, trials: int = 25, seed: int = 0,
                    key_corr: float = HARD_KEY_CORR, d: int | None = None,
                    output: str | None = None) -> SweepResult:
    """Accuracy sweep of the decay-scaled chunk family, one block per gamma.

    gamma = 1 reproduces the undecayed Gram family exactly, so the first
    block of a (1.0, ...) sweep is row-for-row identical to a plain sweep
    with the same generator.
    """
    if any(not 0.0 < g <= 1.0 for g in gammas):
        raise ValueError("decay factors must lie in (0, 1]")
    rows = []
    aggs = []
    for gamma in gammas:
        params = {"gamma": float(gamma), "corr": key_corr}
        if d is not None:
            params["d"] = d
        spec = ExperimentSpec(generator=GeneratorSpec.make("decay", **params),
                              sizes=tuple(sizes), formats=tuple(formats),
                              methods=tuple(methods), trials=trials, seed=seed)
        block = run_sweep(spec)
        rows.extend(block.rows)
        aggs.extend(block.aggregates)
    result = SweepResult(rows, aggs)
    if output:
        result.write(output)
    return result


# ---------------------------------------------------------------------------
# plots
# ---------------------------------------------------------------------------

def _read_csv_rows(source: str) -> list:
    text = source
    if "\n" not in source and os.path.exists(source):
        with open(source) as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines:
        return []
    parsed = list(csv.reader(lines))
    if tuple(parsed[0]) != CSV_HEADER:
        raise ValueError(f"unexpected CSV columns: {parsed[0]}")
    rows = []
    for parts in parsed[1:]:
        row = dict(zip(CSV_HEADER, parts))
        if row["trial"] == "median":
            continue
        row["n"] = int(row["n"])
        for k in ("max_abs", "max_rel", "frob_rel", "residual"):
            row[k] = float(row[k])
        rows.append(row)
    return rows


def emit_plots(source: str, outdir: str = ".") -> list:
    """Render log-scale accuracy panels from a sweep CSV.

    Produces one error-versus-size panel per (format, metric) and, when
    the dataset contains a Newton-Schulz iteration sweep, one
    error-versus-iterations panel per format. Derived purely from the CSV.
    Returns the written file paths (empty, with a warning, for an empty
    dataset).
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = _read_csv_rows(source)
    if not rows:
        print("warning: empty dataset, no panels emitted")
        return []
    os.makedirs(outdir, exist_ok=True)
    written = []
    formats = sorted({r["format"] for r in rows})
    ns_re = re.compile(r"^NS\(m=(\d+)")

    def med(sel, key):
        return _median([r[key] for r in sel])

    ns_rows = [r for r in rows if ns_re.match(r["method"])]
    plain_rows = [r for r in rows if not ns_re.match(r["method"])]
    ns_ms = sorted({int(ns_re.match(r["method"]).group(1)) for r in ns_rows})
    iteration_style = len(ns_ms) > 1

    if plain_rows or not iteration_style:
        data = plain_rows if iteration_style else rows
        for fmt in formats:
            sub = [r for r in data if r["format"] == fmt]
            if not sub:
                continue
            sizes = sorted({r["n"] for r in sub})
            methods = sorted({r["method"] for r in sub})
            for metric in ("max_abs", "max_rel", "frob_rel"):
                fig, ax = plt.subplots(figsize=(5, 3.5))
                for method in methods:
                    ys = [med([r for r in sub if r["n"] == n and r["method"] == method], metric)
                          for n in sizes]
                    ax.plot(sizes, ys, marker="o", label=method)
                ax.set_yscale("log")
                ax.set_xscale("log", base=2)
                ax.set_xlabel("matrix size n")
                ax.set_ylabel(metric)
                ax.set_title(f"{metric} vs size ({fmt})")
                ax.legend(fontsize=6)
                ax.grid(True, which="both", alpha=0.3)
                path = os.path.join(outdir, f"err_vs_n_{fmt}_{metric}.svg")
                fig.savefig(path, bbox_inches="tight")
                plt.close(fig)
                written.append(path)

    if iteration_style:
        for fmt in formats:
            sub = [r for r in ns_rows if r["format"] == fmt]
            if not sub:
                continue
            sizes = sorted({r["n"] for r in sub})
            fig, ax = plt.subplots(figsize=(5, 3.5))
            for n in sizes:
                ys = [med([r for r in sub if r["n"] == n
                           and int(ns_re.match(r["method"]).group(1)) == m], "frob_rel")
                      for m in ns_ms]
                ax.plot(ns_ms, ys, marker="o", label=f"n={n}")
            ax.set_yscale("log")
            ax.set_xlabel("iterations")
            ax.set_ylabel("frob_rel")
            ax.set_title(f"Newton-Schulz error vs iterations ({fmt})")
            ax.legend(fontsize=7)
            ax.grid(True, which="both", alpha=0.3)
            path = os.path.join(outdir, f"ns_iterations_{fmt}.svg")
            fig.savefig(path, bbox_inches="tight")
            plt.close(fig)
            written.append(path)
    return written


# ---------------------------------------------------------------------------
# invariant battery (the `verify` verb)
# ---------------------------------------------------------------------------

def verify_invariants(verbose: bool = True) -> bool:
    """Run the library's invariant suite; True iff everything holds."""
    from . import verify as _verify
    return _verify.run_all(verbose=verbose)
