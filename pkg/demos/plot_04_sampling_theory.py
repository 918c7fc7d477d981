"""
Two facts about weighted sampling
=================================

First, if weights are ordered like accuracies, drawing by weight beats
drawing uniformly in expectation.  Second, with a decaying epsilon the
multinomial epsilon-greedy frequencies approach the weights.
"""

import numpy as np

from lts import theory

rep = theory.verify_theorem1(trials=1000, M=10)
print(f"violations {rep.violations}, smallest margin {rep.min_margin:.4f}")
print(f"reversed weights give margin {rep.counterexample_margin:.4f}")

###############################################################################
# Frequencies after 10^5 draws, with and without decay.

for beta in (0.99, 1.0):
    rep = theory.verify_theorem2([0.7, 0.3], epsilon0=0.5, beta=beta)
    print(f"beta {beta}: frequencies {np.round(rep.frequencies, 4)}, deviation {rep.max_deviation:.4f}")

###############################################################################
# Without decay, the exploration share never fades: 0.5 * 0.5 + 0.5 * 0.7 = 0.6.
# With decay, compare each trial's deviation at 10^3 and 10^5 draws.

trend = theory.deviation_trend([0.7, 0.3])
print(f"deviation did not grow in {trend['fraction_non_increasing']:.0%} of trials")
print(f"median deviation: {np.median(trend['short_deviation']):.4f} -> {np.median(trend['long_deviation']):.4f}")
