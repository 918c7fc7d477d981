"""
How the sampling strategies pick paths
======================================

Given an importance vector, each strategy implies a distribution over the
next path to draw.  We compare that distribution with empirical draws.
"""

import numpy as np

from lts.sampling import SamplerState, SamplerStrategy, sample_k, sample_one, single_draw_distribution

mu = np.array([0.45, 0.25, 0.15, 0.1, 0.05])

for strategy in SamplerStrategy:
    state = SamplerState(strategy, epsilon0=0.5, beta=0.9, t=3, rng_seed=0)
    exact = single_draw_distribution(mu, state)
    draws = np.bincount([sample_one(mu, state) for _ in range(20_000)], minlength=len(mu)) / 20_000
    print(f"{strategy.value:>7}  exact {np.round(exact, 3)}  drawn {np.round(draws, 3)}")

###############################################################################
# Greedy variants pile almost everything onto the best path.  The encouraged
# variant explores in proportion to ``1 - mu``, which favours weak paths.
#
# During training, k distinct paths are drawn per epoch:

state = SamplerState("m-eps", rng_seed=1)
for epoch in range(5):
    print(epoch, sample_k(mu, 3, state))
