"""Exact sampling of cascades from the time-dependent model by thinning.

The proposal bound exploits that both the rate envelope
p0 * (1 + |r0|) * exp(-(t - t0)/tau_m) and the kernel load
sum_i d_i * phi(t - t_i) are non-increasing between events, so the bound
computed at the current time dominates the true rate until the next event
is inserted.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .cascade import Cascade, InfectiousRateParams, KernelParams, memory_kernel

__all__ = ["FollowerSampler", "simulate", "simulate_batch", "continue_cascade"]


@dataclass(frozen=True)
class FollowerSampler:
    """Source of follower counts for newly generated events.

    Modes:
      * ``replay``: cycle through ``values`` in order (deterministic).
      * ``empirical``: draw uniformly with replacement from ``values``.
      * ``constant``: every event gets ``values[0]``.

    ``seed`` is only used when a stream is requested without an external
    generator (stand-alone use); inside a simulation the run's own generator
    drives the draws so one seed reproduces the whole cascade.
    """

    mode: str
    values: tuple[int, ...]
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("replay", "empirical", "constant"):
            raise ValueError(f"unknown sampler mode {self.mode!r}")
        if len(self.values) == 0:
            raise ValueError("sampler needs at least one follower count")
        if any(v < 0 for v in self.values):
            raise ValueError("follower counts must be non-negative")

    @classmethod
    def replay(cls, counts, seed: int | None = None) -> "FollowerSampler":
        return cls("replay", tuple(int(v) for v in counts), seed)

    @classmethod
    def empirical(cls, counts, seed: int | None = None) -> "FollowerSampler":
        return cls("empirical", tuple(int(v) for v in counts), seed)

    @classmethod
    def constant(cls, value: int) -> "FollowerSampler":
        return cls("constant", (int(value),))

    def stream(self, rng: np.random.Generator | None = None):
        """Return a zero-argument callable producing follower counts."""
        if self.mode == "constant":
            value = self.values[0]
            return lambda: value
        if self.mode == "replay":
            cycle = itertools.cycle(self.values)
            return lambda: next(cycle)
        if rng is None:
            rng = np.random.default_rng(self.seed)
        values = np.asarray(self.values, dtype=np.int64)
        return lambda: int(values[rng.integers(values.size)])


def _thin(times0, followers0, t_start, horizon, rate: InfectiousRateParams,
          k: KernelParams, draw, rng: np.random.Generator):
    """Core thinning loop; returns the extended (times, followers) lists."""
    times = list(times0)
    fols = list(followers0)
    # Growing buffers so each intensity evaluation is one vectorised pass.
    cap = max(1024, 2 * len(times))
    buf_t = np.empty(cap)
    buf_d = np.empty(cap)
    n = len(times)
    buf_t[:n] = times
    buf_d[:n] = fols

    amp = rate.p0 * (1.0 + abs(rate.r0))
    t_cur = t_start
    while True:
        load_cur = float(np.dot(buf_d[:n], memory_kernel(t_cur - buf_t[:n], k)))
        bound = amp * np.exp(-(t_cur - rate.t0) / rate.tau_m) * load_cur
        if not np.isfinite(bound):
            raise ValueError("non-finite proposal bound; corrupt parameters or history")
        if bound <= 0.0:
            break
        t_cand = t_cur + rng.exponential(1.0 / bound)
        if t_cand > horizon:
            break
        lam = float(rate(t_cand)) * float(
            np.dot(buf_d[:n], memory_kernel(t_cand - buf_t[:n], k))
        )
        # The envelope argument guarantees lam <= bound up to rounding.
        assert lam <= bound * (1.0 + 1e-9), "thinning bound violated"
        if rng.random() * bound <= lam:
            if n == cap:
                cap *= 2
                buf_t = np.resize(buf_t, cap)
                buf_d = np.resize(buf_d, cap)
            d_new = draw()
            buf_t[n] = t_cand
            buf_d[n] = d_new
            n += 1
            times.append(float(t_cand))
            fols.append(int(d_new))
        t_cur = t_cand
    return times, fols


def simulate(rate: InfectiousRateParams, k: KernelParams, origin_followers: int,
             fs: FollowerSampler, horizon: float, seed) -> Cascade:
    """Sample one cascade on [0, horizon] seeded by an origin event at t = 0."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if origin_followers < 0:
        raise ValueError("origin follower count must be non-negative")
    rng = np.random.default_rng(seed)
    draw = fs.stream(rng)
    times, fols = _thin([0.0], [int(origin_followers)], 0.0, horizon, rate, k,
                        draw, rng)
    label = seed if isinstance(seed, int) else "ss"
    return Cascade(f"sim-{label}", times, fols)


def continue_cascade(prefix: Cascade, rate: InfectiousRateParams, k: KernelParams,
                     fs: FollowerSampler, start: float, horizon: float,
                     seed) -> Cascade:
    """Extend an observed prefix with sampled events on (start, horizon].

    All prefix events must be at or before ``start``; they keep exciting the
    future through the kernel.
    """
    if prefix.end_time > start:
        raise ValueError("prefix extends beyond the continuation start")
    if horizon <= start:
        raise ValueError("horizon must exceed the continuation start")
    rng = np.random.default_rng(seed)
    draw = fs.stream(rng)
    times, fols = _thin(prefix.times, prefix.followers, start, horizon, rate, k,
                        draw, rng)
    return Cascade(prefix.id, times, fols)


def simulate_batch(n: int, rate: InfectiousRateParams, k: KernelParams,
                   origin_followers: int, fs: FollowerSampler, horizon: float,
                   base_seed: int) -> list[Cascade]:
    """Sample ``n`` independent cascades with per-run seeds derived from one.

    The per-run streams are spawned from ``base_seed`` up front, so the
    result does not depend on evaluation order.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    children = np.random.SeedSequence(base_seed).spawn(n)
    out = []
    for i, child in enumerate(children):
        c = simulate(rate, k, origin_followers, fs, horizon, child)
        out.append(Cascade(f"sim-{base_seed}-{i:04d}", c.times, c.followers))
    return out
