"""Simulation: CTMC trajectories, occupation measures and regenerative estimators."""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from itertools import accumulate
from typing import Callable, Optional

import numpy as np

from . import _rng
from .chain import check_reversible, guarded_ratio, stationary_distribution, validate_stochastic
from .errors import NotReversible, ValidationError, ZeroAcceptance
from .jackson import GeneratorView
from .randomization import modify, validate_acceptance

_CHUNK = 1 << 16


@dataclass(frozen=True)
class Trajectory:
    """Path of a CTMC.

    ``states[ids[i]]`` is the state entered at ``times[i]`` (``times[0] = 0``
    is the initial state).  The path ends at ``horizon``; ``absorbed`` tells
    whether it stopped in a state without exits.
    """

    ids: np.ndarray
    times: np.ndarray
    states: tuple
    horizon: float
    absorbed: bool = False

    @property
    def initial(self):
        return self.states[self.ids[0]]

    @property
    def n_events(self) -> int:
        return len(self.ids) - 1

    def events(self):
        """``(time, target)`` pairs of every jump."""
        for t, i in zip(self.times[1:], self.ids[1:]):
            yield float(t), self.states[i]

    def holding_times(self) -> np.ndarray:
        return np.diff(np.append(self.times, self.horizon))


class _Uniforms:
    # buffered draws keep the per-event cost low without changing the stream contract
    def __init__(self, rng):
        self.rng = rng
        self.buf = rng.random(_CHUNK)
        self.pos = 0

    def __call__(self):
        if self.pos == _CHUNK:
            self.buf = self.rng.random(_CHUNK)
            self.pos = 0
        u = self.buf[self.pos]
        self.pos += 1
        return u


def simulate_ctmc(gen: GeneratorView, init, events: Optional[int] = None, time: Optional[float] = None,
                  seed: int = 0) -> Trajectory:
    """Simulate ``gen`` from ``init`` for a number of jumps or a time horizon.

    Holding times are drawn by inversion, ``-log(1 - U) / q``; the target
    is the first state whose cumulative rate exceeds ``U' q``.  The run is
    a deterministic function of ``seed``.
    """
    if (events is None) == (time is None):
        raise ValueError("give exactly one of events or time")
    if events is not None and events <= 0 or time is not None and not time > 0:
        raise ValueError("budget must be positive")
    draw = _Uniforms(_rng.substream(seed, 0))
    index = {}
    states = []
    table = {}

    def sid(s):
        i = index.get(s)
        if i is None:
            i = index[s] = len(states)
            states.append(s)
        return i

    def exits(i):
        e = table.get(i)
        if e is None:
            out = gen.outgoing(states[i])
            targets = [sid(t) for t, _ in out]
            cum = list(accumulate(r for _, r in out))
            e = table[i] = (targets, cum, cum[-1] if cum else 0.0)
        return e

    cur = sid(init)
    ids = [cur]
    times = [0.0]
    t = 0.0
    absorbed = False
    limit = events if events is not None else math.inf
    horizon = time if time is not None else math.inf
    while len(ids) <= limit:
        targets, cum, q = exits(cur)
        if q <= 0:
            absorbed = True
            break
        h = -math.log(1.0 - draw()) / q
        if t + h > horizon:
            break
        t += h
        k = bisect_right(cum, draw() * q)
        cur = targets[min(k, len(targets) - 1)]
        ids.append(cur)
        times.append(t)
    end = horizon if time is not None else t
    return Trajectory(np.asarray(ids, dtype=np.intp), np.asarray(times), tuple(states), float(end), absorbed)


@dataclass(frozen=True)
class OccupationMeasure:
    """Fraction of simulated time spent in each (projected) state."""

    fractions: dict
    total_time: float

    def __getitem__(self, s) -> float:
        return self.fractions.get(s, 0.0)


def occupation_measure(traj: Trajectory, key: Optional[Callable] = None) -> OccupationMeasure:
    """Time-weighted occupation; ``key`` projects states before aggregation."""
    if traj.horizon <= 0:
        raise ValidationError("trajectory has zero length")
    w = np.bincount(traj.ids, weights=traj.holding_times(), minlength=len(traj.states))
    frac = {}
    for s, x in zip(traj.states, w / traj.horizon):
        if x > 0:
            kk = key(s) if key else s
            frac[kk] = frac.get(kk, 0.0) + float(x)
    return OccupationMeasure(frac, traj.horizon)


def empirical_compare(occ: OccupationMeasure, pmf: Callable, support) -> float:
    """Total-variation distance between ``occ`` and ``pmf``.

    Cells outside ``support`` are lumped into one remainder cell on each side.
    """
    support = list(support)
    d = 0.0
    occ_in = 0.0
    pmf_in = 0.0
    for s in support:
        a = occ[s]
        b = pmf(s)
        d += abs(a - b)
        occ_in += a
        pmf_in += b
    d += abs((1.0 - occ_in) - (1.0 - pmf_in))
    return 0.5 * d


def batch_means_se(traj: Trajectory, indicator: Callable, batches: int = 20) -> tuple:
    """Time-average of ``indicator`` over the path and its batch-means standard error."""
    if batches < 2:
        raise ValueError("need at least two batches")
    hold = traj.holding_times()
    val = np.array([float(indicator(s)) for s in traj.states])[traj.ids]
    edges = np.linspace(0.0, traj.horizon, batches + 1)
    start = traj.times
    end = start + hold
    means = []
    for a, b in zip(edges[:-1], edges[1:]):
        overlap = np.clip(np.minimum(end, b) - np.maximum(start, a), 0.0, None)
        means.append(float(np.dot(val, overlap) / (b - a)))
    means = np.array(means)
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(batches))


@dataclass(frozen=True)
class RegenerativeEstimate:
    estimate: float
    se: float
    cycles: int


def ratio_estimate(A, B) -> RegenerativeEstimate:
    """Ratio of cycle-sum means with a delta-method standard error."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    K = A.size
    if K < 2:
        raise ValueError("need at least two cycles")
    mb = B.mean()
    R = A.mean() / mb
    se = math.sqrt(np.var(A - R * B, ddof=1) / K) / mb
    return RegenerativeEstimate(float(R), float(se), K)


def _as_values(f, n: int) -> np.ndarray:
    if callable(f):
        return np.array([float(f(x)) for x in range(n)])
    v = np.asarray(f, dtype=float)
    if v.shape != (n,):
        raise ValidationError(f"f must be callable or a vector of length {n}")
    return v


def _cycle_sums(P, num_w, den_w, anchor, K, seed, workers, accept=None):
    # num_w/den_w: per-state weights summed over each cycle of P from anchor.
    # With ``accept`` the chain carries a Bernoulli(accept[x]) mark; weights
    # only count on marked steps and a cycle ends on a marked return to anchor.
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0

    def run_block(block, count):
        rng = _rng.substream(seed, block)
        A = np.zeros(count)
        B = np.zeros(count)
        cur = np.full(count, anchor, dtype=np.intp)
        mark = np.ones(count, dtype=bool)
        active = np.arange(count)
        while active.size:
            x = cur[active]
            m = mark[active]
            A[active] += np.where(m, num_w[x], 0.0)
            B[active] += np.where(m, den_w[x], 0.0)
            u = rng.random(active.size)
            nxt = (u[:, None] >= cum[x]).sum(axis=1)
            cur[active] = nxt
            if accept is not None:
                mark[active] = rng.random(active.size) < accept[nxt]
                done = (nxt == anchor) & mark[active]
            else:
                done = nxt == anchor
            active = active[~done]
        return A, B

    res = _rng.map_blocks(run_block, K, workers)
    return np.concatenate([a for a, _ in res]), np.concatenate([b for _, b in res])


def regenerative_estimate(r, alpha, f, anchor: int, K: int, seed: int, mode: str = "skipping",
                          workers: int = 1) -> RegenerativeEstimate:
    """Estimate ``sum_x f(x) eta_x`` from ``K`` regeneration cycles of the modified chain.

    The modified chain has stationary law proportional to ``eta * alpha``;
    summing ``f / alpha`` and ``1 / alpha`` over cycles from ``anchor`` and
    taking the ratio of means undoes the weighting.  Reflection needs a
    reversible ``r``; otherwise :class:`NotReversible` is raised.
    """
    r = validate_stochastic(r)
    n = r.shape[0]
    alpha = validate_acceptance(alpha, n)
    if np.any(alpha == 0):
        raise ZeroAcceptance("every acceptance probability must be positive")
    if not 0 <= anchor < n:
        raise ValueError(f"anchor {anchor} out of range")
    if mode == "reflection" and not check_reversible(r, stationary_distribution(r)):
        raise NotReversible("reflection estimator needs a reversible chain")
    fv = _as_values(f, n)
    kernel = modify(r, alpha, mode).kernel
    A, B = _cycle_sums(kernel, fv / alpha, 1.0 / alpha, anchor, K, seed, workers)
    return ratio_estimate(A, B)


def simulate_augmented_chain(r, alpha, anchor: int, K: int, seed: int, f, workers: int = 1) -> RegenerativeEstimate:
    """Same target via the non-absorbing augmented chain ``(X, Y)``.

    ``X`` moves under ``r`` and ``Y`` marks each step accepted with
    probability ``alpha`` of the new state.  Cycles run between marked
    visits to ``anchor``; marked steps contribute ``f / alpha`` and
    ``1 / alpha`` (``0/0 = 0`` for never-accepted states).
    """
    r = validate_stochastic(r)
    n = r.shape[0]
    alpha = validate_acceptance(alpha, n)
    if not alpha[anchor] > 0:
        raise ZeroAcceptance("anchor must have positive acceptance")
    fv = _as_values(f, n)
    num = guarded_ratio(fv * (alpha > 0), alpha)
    den = guarded_ratio((alpha > 0).astype(float), alpha)
    A, B = _cycle_sums(r, num, den, anchor, K, seed, workers, accept=alpha)
    return ratio_estimate(A, B)
