"""Core cascade types and the closed-form pieces of the event-rate model.

A cascade is an ordered sequence of (time, follower count) events rooted at
an origin post at time zero.  Its instantaneous event rate is

    lambda(t) = p(t) * sum_{i: t_i < t} d_i * phi(t - t_i)

where ``p`` is a slowly varying per-follower infectious rate and ``phi`` a
fast power-law reaction-time density.  All times are in seconds measured
from the origin post.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DAY_SECONDS",
    "HOUR_SECONDS",
    "Event",
    "KernelParams",
    "InfectiousRateParams",
    "Cascade",
    "memory_kernel",
    "kernel_integral",
    "infectious_rate",
    "intensity",
]

DAY_SECONDS = 86_400.0
HOUR_SECONDS = 3_600.0


@dataclass(frozen=True)
class Event:
    """One post: seconds since the origin and the author's follower count."""

    time: float
    followers: int


@dataclass(frozen=True)
class KernelParams:
    """Reaction-time density: constant ``c0`` up to ``s0``, power-law tail after.

    phi(s) = 0                            for s < 0
           = c0                           for 0 <= s <= s0
           = c0 * (s / s0) ** -(1+theta)  for s > s0

    The defaults are the values measured on large-scale retweet data; with
    them the density integrates to just under one (``total_mass``).
    """

    c0: float = 6.49e-4
    s0: float = 300.0
    theta: float = 0.242

    def __post_init__(self) -> None:
        if not (self.c0 > 0 and self.s0 > 0 and self.theta > 0):
            raise ValueError("kernel parameters must be positive")

    @property
    def total_mass(self) -> float:
        """Integral of the density over [0, inf)."""
        return self.c0 * self.s0 * (1.0 + 1.0 / self.theta)


@dataclass(frozen=True)
class InfectiousRateParams:
    """Oscillating, exponentially decaying per-follower infectious rate.

    p(t) = p0 * (1 - r0 * sin(2*pi*(t + phi0) / period)) * exp(-(t - t0) / tau_m)

    ``r0`` is the relative oscillation amplitude (|r0| < 1 keeps the rate
    positive), ``phi0`` the phase offset in seconds, ``tau_m`` the aging
    time constant in seconds and ``period`` the oscillation period (one day
    by default).  ``tau_m = inf`` gives a constant-amplitude rate.
    """

    p0: float
    r0: float = 0.0
    phi0: float = 0.0
    tau_m: float = math.inf
    period: float = DAY_SECONDS
    t0: float = 0.0

    def __post_init__(self) -> None:
        if self.p0 < 0 or not math.isfinite(self.p0):
            raise ValueError("p0 must be finite and non-negative")
        if not abs(self.r0) < 1:
            raise ValueError("|r0| must be < 1 so the rate stays positive")
        if not self.tau_m > 0:
            raise ValueError("tau_m must be positive")
        if not self.period > 0:
            raise ValueError("period must be positive")

    @classmethod
    def constant(cls, p0: float) -> "InfectiousRateParams":
        """Rate with no oscillation and no aging: p(t) = p0."""
        return cls(p0=p0)

    def __call__(self, t):
        return infectious_rate(t, self)


class Cascade:
    """Event sequence for one original post; ``events[0]`` is the origin at t = 0.

    Events are stored as parallel read-only arrays (``times`` float seconds,
    ``followers`` integer counts) so the model sums vectorise.
    """

    __slots__ = ("id", "times", "followers")

    def __init__(self, id: str, times, followers):
        times = np.asarray(times, dtype=float)
        followers = np.asarray(followers, dtype=np.int64)
        if times.ndim != 1 or times.shape != followers.shape:
            raise ValueError("times and followers must be 1-d arrays of equal length")
        if times.size == 0:
            raise ValueError("a cascade must contain at least the origin event")
        if times[0] != 0.0:
            raise ValueError("the first event must be the origin at time 0")
        if np.any(np.diff(times) < 0):
            raise ValueError("event times must be non-decreasing")
        if np.any(times < 0):
            raise ValueError("event times must be non-negative")
        if np.any(followers < 0):
            raise ValueError("follower counts must be non-negative")
        times = times.copy()
        followers = followers.copy()
        times.flags.writeable = False
        followers.flags.writeable = False
        self.id = id
        self.times = times
        self.followers = followers

    @classmethod
    def from_events(cls, id: str, events) -> "Cascade":
        events = list(events)
        return cls(id, [e.time for e in events], [e.followers for e in events])

    @property
    def events(self) -> tuple[Event, ...]:
        return tuple(
            Event(float(t), int(d)) for t, d in zip(self.times, self.followers)
        )

    def __len__(self) -> int:
        return int(self.times.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Cascade):
            return NotImplemented
        return (
            self.id == other.id
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.followers, other.followers)
        )

    def __repr__(self) -> str:
        return f"Cascade(id={self.id!r}, n_events={len(self)})"

    @property
    def end_time(self) -> float:
        return float(self.times[-1])

    def count_at(self, t: float) -> int:
        """R(t): number of re-shares (origin excluded) with time <= t."""
        n = int(np.searchsorted(self.times, t, side="right"))
        return max(n - 1, 0)

    def follower_sum_at(self, t: float, include_origin: bool = False) -> int:
        """Cumulative follower count over events with time <= t."""
        n = int(np.searchsorted(self.times, t, side="right"))
        start = 0 if include_origin else 1
        return int(self.followers[start:n].sum())

    def prefix(self, t: float) -> "Cascade":
        """The sub-cascade of events with time <= t (always keeps the origin)."""
        if t < 0:
            raise ValueError("prefix time must be >= 0")
        n = int(np.searchsorted(self.times, t, side="right"))
        n = max(n, 1)
        return Cascade(self.id, self.times[:n], self.followers[:n])


def memory_kernel(s, k: KernelParams):
    """Reaction-time density phi(s); accepts scalars or arrays.

    Zero for s < 0, flat at ``k.c0`` on the plateau, power-law decay after.
    """
    s = np.asarray(s, dtype=float)
    # Evaluate the tail on max(s, s0) so the plateau branch never sees s <= 0.
    tail = k.c0 * (np.maximum(s, k.s0) / k.s0) ** -(1.0 + k.theta)
    out = np.where(s < 0, 0.0, np.where(s <= k.s0, k.c0, tail))
    return out if out.ndim else float(out)


def kernel_integral(t, k: KernelParams):
    """Phi(t) = integral of the reaction-time density over [0, t].

    Closed form: c0*t on the plateau, then
    c0*s0 + (c0*s0/theta) * (1 - (t/s0)**-theta).  Zero for t <= 0 and
    ``k.total_mass`` in the limit t -> inf.
    """
    t = np.asarray(t, dtype=float)
    plateau = k.c0 * np.clip(t, 0.0, k.s0)
    tail_mass = (k.c0 * k.s0 / k.theta) * (
        1.0 - (np.maximum(t, k.s0) / k.s0) ** -k.theta
    )
    out = plateau + np.where(t > k.s0, tail_mass, 0.0)
    return out if out.ndim else float(out)


def infectious_rate(t, q: InfectiousRateParams):
    """p(t): per-follower infectious rate at time ``t`` (scalar or array)."""
    t = np.asarray(t, dtype=float)
    osc = 1.0 - q.r0 * np.sin(2.0 * math.pi * (t + q.phi0) / q.period)
    decay = np.exp(-(t - q.t0) / q.tau_m)
    out = q.p0 * osc * decay
    return out if out.ndim else float(out)


def _as_arrays(history):
    """Accept a Cascade or a (times, followers) pair; return float/int arrays."""
    if isinstance(history, Cascade):
        return history.times, history.followers
    times, followers = history
    return np.asarray(times, dtype=float), np.asarray(followers, dtype=float)


def intensity(t: float, history, rate, k: KernelParams) -> float:
    """Event rate lambda(t) given the history of events strictly before ``t``.

    ``history`` is a Cascade (or a (times, followers) pair) whose event times
    must all be < t; ``rate`` is any callable p(t).
    """
    times, followers = _as_arrays(history)
    if times.size and times.max() >= t:
        raise ValueError("history contains events at or after t; lambda(t) "
                         "conditions on events strictly before t")
    if times.size == 0:
        return 0.0
    load = float(np.dot(followers, memory_kernel(t - times, k)))
    return float(rate(t)) * load
