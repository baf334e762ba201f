"""Shared fixtures: a follower-count population and synthetic corpora.

The heavy corpora are session-scoped so the acceptance tests and the
harness tests reuse one simulation pass.
"""

import numpy as np
import pytest

from tideh import (
    DAY_SECONDS,
    FollowerSampler,
    InfectiousRateParams,
    KernelParams,
    simulate_batch,
)

DONOR_SEED = 20240815
ORIGIN_FOLLOWERS = 1_000_000

# Circadian ground truth used by the recovery and ordering experiments.
TRUTH = InfectiousRateParams(p0=1e-3, r0=0.424, phi0=0.125 * DAY_SECONDS,
                             tau_m=2.0 * DAY_SECONDS)


@pytest.fixture(scope="session")
def kernel():
    return KernelParams()


@pytest.fixture(scope="session")
def donors():
    """Log-normal follower population, capped; heavy tail but subcritical."""
    rng = np.random.default_rng(DONOR_SEED)
    raw = rng.lognormal(mean=np.log(120.0), sigma=1.3, size=4000)
    return np.minimum(raw.astype(np.int64) + 1, 3_000_000)


@pytest.fixture(scope="session")
def donor_sampler(donors):
    return FollowerSampler.empirical(donors)


@pytest.fixture(scope="session")
def circadian_corpus_100(kernel, donor_sampler):
    """100 cascades from TRUTH observed for 2 days (recovery experiments)."""
    return simulate_batch(100, TRUTH, kernel, ORIGIN_FOLLOWERS, donor_sampler,
                          2.0 * DAY_SECONDS, base_seed=101)


@pytest.fixture(scope="session")
def circadian_corpus_50(kernel, donor_sampler):
    """50 cascades from TRUTH observed for 3 days (method ordering)."""
    return simulate_batch(50, TRUTH, kernel, ORIGIN_FOLLOWERS, donor_sampler,
                          3.0 * DAY_SECONDS, base_seed=202)
