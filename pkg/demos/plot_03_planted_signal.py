"""
Recovering a planted signal
===========================

The synthetic generator plants the class signal in the entity relation, so
only paths that pass through entities should carry information.
"""

from lts.hin import SyntheticSpec, generate_synthetic
from lts.trainer import RunConfig, ablate, run

records, planted = generate_synthetic(SyntheticSpec(num_classes=4, texts_per_class=200, seed=0))
print("planted:", [p.canonical_name for p in planted])

# default model and schedule: 30 outer iterations of 10 epochs, k = 10
config = RunConfig(max_hops=4, seed=0)
result = run(config, records)

for name, m in zip(result.ranked_names, result.ranked):
    print(f"{name:<8} {result.mu.mu[m]:.4f}")
print(f"test Micro-F1 {result.test_micro_f1:.3f}, Macro-F1 {result.test_macro_f1:.3f}")

###############################################################################
# Removing the best paths from the selected set should hurt.

for level in ("none", "mild", "medium", "strong"):
    out = ablate(result, level)
    print(f"{level:>7}  removed {out['removed']}  val Micro-F1 {out['micro_f1']:.3f}")
