"""Command-line front end for the experiment harness.

Verbs: sweep, ns-sweep, decay-sweep, plot, verify. Options may also come
from a JSON config file (--config); explicit flags win over file values.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import harness


def _split(text: str) -> list:
    return [p.strip() for p in text.split(",") if p.strip()]


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--sizes", help="comma list of matrix sizes (default 16,32,64,128)")
    p.add_argument("--formats", help="comma list of input formats (default fp16,bf16,fp32)")
    p.add_argument("--trials", type=int, help="random trials per cell (default 50)")
    p.add_argument("--seed", type=int, help="base seed; trial k uses seed+k (default 0)")
    p.add_argument("--d", type=int, help="head dimension for the key generators (default n)")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--config", help="JSON file with defaults for any flag")


def _merge(args: argparse.Namespace, defaults: dict) -> dict:
    cfg = dict(defaults)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise SystemExit(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in cfg:
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            cfg[key] = val
    return cfg


def _generator_spec(cfg: dict) -> harness.GeneratorSpec:
    gspec = harness.parse_generator(cfg["generator"])
    if cfg.get("d") is not None:
        gspec = gspec.with_params(d=int(cfg["d"]))
    return gspec


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="trinv",
        description="Accuracy experiments for triangular chunk-matrix inversion.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("sweep", help="error sweep over sizes x formats x methods")
    _add_common(p)
    p.add_argument("--methods", help="comma list of method tokens "
                                     "(VCS, MCS, MCH, MBH, MXR(b0=16,r=1), NS-12, ...)")
    p.add_argument("--generator", help="matrix family, e.g. deltanet(corr=0.88) "
                                       "or gaussian or worstcase(sign=-1)")
    p.add_argument("--b0", type=int, help="override MXR/MBH base block size")
    p.add_argument("--refine", type=int, help="override MXR refinement step count")
    p.add_argument("--accumulate", help="override accumulation format")

    p = sub.add_parser("ns-sweep", help="Newton-Schulz error vs iteration count")
    _add_common(p)
    p.add_argument("--m-values", help="comma list of iteration counts (default 0,2,...,14)")
    p.add_argument("--x0-scale", type=float, help="starting guess scale c (X0 = c I)")
    p.add_argument("--generator")

    p = sub.add_parser("decay-sweep", help="accuracy vs decay factor gamma")
    _add_common(p)
    p.add_argument("--gammas", help="comma list of decay factors (default 1.0,0.9)")
    p.add_argument("--methods")
    p.add_argument("--key-corr", type=float, help="key correlation of the family")

    p = sub.add_parser("plot", help="render SVG panels from a sweep CSV")
    p.add_argument("--in", dest="infile", required=True, help="input CSV")
    p.add_argument("--out", default=".", help="output directory")

    sub.add_parser("verify", help="run the invariant suite; nonzero exit on failure")

    args = parser.parse_args(argv)

    if args.verb == "verify":
        return 0 if harness.verify_invariants(verbose=True) else 1

    if args.verb == "plot":
        written = harness.emit_plots(args.infile, args.out)
        for path in written:
            print(path)
        return 0

    if args.verb == "sweep":
        cfg = _merge(args, {
            "sizes": "16,32,64,128", "formats": "fp16,bf16,fp32",
            "methods": ",".join(harness.DEFAULT_METHODS),
            "generator": f"deltanet(corr={harness.HARD_KEY_CORR})",
            "trials": 50, "seed": 0, "d": None, "b0": None, "refine": None,
            "accumulate": None, "out": None,
        })
        methods = _split(cfg["methods"]) if isinstance(cfg["methods"], str) else list(cfg["methods"])
        if cfg.get("b0") is not None or cfg.get("refine") is not None:
            rewritten = []
            for tok in methods:
                if tok.upper().startswith("MXR"):
                    parts = []
                    if cfg.get("b0") is not None:
                        parts.append(f"b0={cfg['b0']}")
                    if cfg.get("refine") is not None:
                        parts.append(f"r={cfg['refine']}")
                    tok = "MXR" + ("(" + ",".join(parts) + ")" if parts else "")
                rewritten.append(tok)
            methods = rewritten
        spec = harness.ExperimentSpec(
            generator=_generator_spec(cfg),
            sizes=[int(s) for s in _split(str(cfg["sizes"]))],
            formats=_split(cfg["formats"]) if isinstance(cfg["formats"], str) else cfg["formats"],
            methods=methods, trials=int(cfg["trials"]), seed=int(cfg["seed"]),
            accumulate=cfg.get("accumulate"), output=cfg.get("out"))
        result = harness.run_sweep(spec)
        if not spec.output:
            sys.stdout.write(result.to_csv())
        return 0

    if args.verb == "ns-sweep":
        cfg = _merge(args, {
            "sizes": "64", "formats": "fp32", "m_values": "0,2,4,6,8,10,12,14",
            "generator": f"deltanet(corr={harness.HARD_KEY_CORR})",
            "trials": 25, "seed": 0, "d": None, "x0_scale": 0.25, "out": None,
        })
        gspec = _generator_spec(cfg)
        result = harness.run_ns_iteration_sweep(
            sizes=[int(s) for s in _split(str(cfg["sizes"]))],
            formats=_split(cfg["formats"]) if isinstance(cfg["formats"], str) else cfg["formats"],
            m_values=[int(m) for m in _split(str(cfg["m_values"]))],
            trials=int(cfg["trials"]), seed=int(cfg["seed"]),
            generator=gspec, x0_scale=float(cfg["x0_scale"]), output=cfg.get("out"))
        if not cfg.get("out"):
            sys.stdout.write(result.to_csv())
        return 0

    if args.verb == "decay-sweep":
        cfg = _merge(args, {
            "sizes": "16,32,64,128", "formats": "fp16,bf16,fp32",
            "methods": ",".join(harness.DEFAULT_METHODS), "gammas": "1.0,0.9",
            "key_corr": harness.HARD_KEY_CORR,
            "trials": 25, "seed": 0, "d": None, "out": None,
        })
        result = harness.run_decay_sweep(
            gammas=[float(g) for g in _split(str(cfg["gammas"]))],
            sizes=[int(s) for s in _split(str(cfg["sizes"]))],
            formats=_split(cfg["formats"]) if isinstance(cfg["formats"], str) else cfg["formats"],
            methods=_split(cfg["methods"]) if isinstance(cfg["methods"], str) else cfg["methods"],
            trials=int(cfg["trials"]), seed=int(cfg["seed"]),
            key_corr=float(cfg["key_corr"]), d=cfg.get("d"), output=cfg.get("out"))
        if not cfg.get("out"):
            sys.stdout.write(result.to_csv())
        return 0

    return 2  # pragma: no cover


if __name__ == "__main__":
    raise SystemExit(main())
