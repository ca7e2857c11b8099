"""
A miniature accuracy sweep, end to end
======================================

The harness drives the same experiment the demos above explore piecemeal:
generate seeded chunk matrices, quantize to each input format, invert with
every method (products accumulating in float32), compare against the
float64 reference, and emit a canonical CSV plus SVG panels. Decay-scaled
variants (the gated flavour of the chunk family) get easier as the decay
strengthens.

Writes its outputs under demos/out/.
"""

import os

from trinv import ExperimentSpec, GeneratorSpec, emit_plots, run_decay_sweep, run_sweep

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

spec = ExperimentSpec(
    generator=GeneratorSpec.make("deltanet", corr=0.88),
    sizes=(16, 32, 64), formats=("fp16", "bf16", "fp32"),
    methods=("VCS", "MCH", "MBH", "MXR(r=1)", "NS-12"),
    trials=5, seed=0, output=os.path.join(OUT, "sweep.csv"))
result = run_sweep(spec)

print(f"wrote {spec.output} ({len(result.rows)} rows + {len(result.aggregates)} medians)")
print()
print("median Frobenius-relative error:")
print(f"{'method':<12}" + "".join(f"{fmt:>12}" for fmt in spec.formats))
for method in sorted({r['method'] for r in result.rows}):
    cells = [result.median('frob_rel', method=method, n=64, format=fmt)
             for fmt in spec.formats]
    print(f"{method:<12}" + "".join(f"{c:>12.2e}" for c in cells))

for path in emit_plots(result.to_csv(), OUT):
    print("panel:", path)

print()
print("decay scaling (gamma < 1 shrinks off-diagonals, every method benefits):")
dec = run_decay_sweep(gammas=(1.0, 0.8), sizes=(64,), formats=("fp16",),
                      methods=("MXR(r=0)",), trials=5, seed=0)
for gamma in (1.0, 0.8):
    med = dec.median("frob_rel", n=64, format="fp16",
                     generator=f"decay(corr=0.88,gamma={gamma:g})")
    print(f"  gamma={gamma:<4}  MXR(r=0) fp16 frob_rel = {med:.3e}")
