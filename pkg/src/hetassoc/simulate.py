"""Discrete-event simulation of the association system.

Independent oracle for the analytic pipeline: arrivals, admissions,
redirections and departures are replayed event by event with exponential
clocks, and every user's delivered volume integrates his instantaneous
rate over his sojourn (piecewise-constant between events, which is exact
for this model). Admission decisions are recomputed from the throughput
definition rather than read from the chain engine's tables.

One seeded generator drives a single stream, so runs are bit-identical
given (config, rule, events, seed).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .config import NETWORK_WIDE, NetworkConfig
from .rules import AssignmentRule

CI_LEVEL = 0.99
MIN_EVENTS_FOR_CI = 100_000


class _Uniforms:
    """Buffered uniform draws from one named stream."""

    def __init__(self, seed: int, block: int = 1 << 16):
        self._rng = np.random.default_rng(seed)
        self._block = block
        self._buf = self._rng.random(block)
        self._pos = 0

    def __call__(self) -> float:
        if self._pos == self._block:
            self._buf = self._rng.random(self._block)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


@dataclass
class SimReport:
    """Empirical distributions, blocking and volumes with batch-means CIs."""

    seed: int
    num_events: int
    num_batches: int
    total_time: float
    arrivals: np.ndarray              # (batches, classes)
    blocked: np.ndarray               # (batches, classes)
    admitted: np.ndarray              # (batches, classes, systems)
    state_time: dict
    state_time_batches: list
    batch_time: np.ndarray
    arrival_seen: dict
    volume_sum: np.ndarray            # (batches, classes, systems)
    volume_count: np.ndarray
    volume_by_entry: dict = field(default_factory=dict)

    def state_distribution(self) -> dict:
        """Time-weighted occupancy distribution (sums to one over visited
        states)."""
        return {occ: t / self.total_time for occ, t in self.state_time.items()}

    def arrival_distribution(self) -> dict:
        total = sum(self.arrival_seen.values())
        return {occ: c / total for occ, c in self.arrival_seen.items()}

    def _t_quantile(self, df: int, level: float) -> float:
        return float(stats.t.ppf(0.5 + level / 2, df))

    def blocking_estimate(self, user_class: int,
                          level: float = CI_LEVEL) -> tuple[float, float]:
        """(estimate, CI half-width) of the class blocking probability."""
        arr = self.arrivals[:, user_class]
        blk = self.blocked[:, user_class]
        ok = arr > 0
        fractions = blk[ok] / arr[ok]
        est = blk.sum() / arr.sum()
        half = self._t_quantile(ok.sum() - 1, level) \
            * fractions.std(ddof=1) / math.sqrt(ok.sum())
        return float(est), float(half)

    def volume_estimate(self, user_class: int, system: int,
                        level: float = CI_LEVEL) -> tuple[float, float, int]:
        """(mean delivered megabits, CI half-width, completed calls) of
        (class, system) users."""
        sums = self.volume_sum[:, user_class, system]
        counts = self.volume_count[:, user_class, system]
        ok = counts > 0
        if ok.sum() < 2:
            return float("nan"), float("nan"), int(counts.sum())
        means = sums[ok] / counts[ok]
        est = sums.sum() / counts.sum()
        half = self._t_quantile(ok.sum() - 1, level) \
            * means.std(ddof=1) / math.sqrt(ok.sum())
        return float(est), float(half), int(counts.sum())

    def state_probability_estimate(self, occ,
                                   level: float = CI_LEVEL) -> tuple[float, float]:
        """(estimate, CI half-width) of one state's stationary probability
        from per-batch time fractions."""
        occ = tuple(occ)
        fracs = np.array([bt.get(occ, 0.0) for bt in self.state_time_batches])
        fracs = fracs / self.batch_time
        b = len(fracs)
        half = self._t_quantile(b - 1, level) * fracs.std(ddof=1) / math.sqrt(b)
        return float(self.state_time.get(occ, 0.0) / self.total_time), float(half)

    def entry_volume_estimate(self, user_class: int, system: int, seen
                              ) -> tuple[float, float, int]:
        """(mean, std error, count) of volumes of users admitted to `system`
        who saw state `seen` on arrival."""
        count, mean, m2 = self.volume_by_entry.get(
            (user_class, system, tuple(seen)), (0, float("nan"), 0.0))
        if count < 2:
            return mean, float("nan"), count
        return mean, math.sqrt(m2 / (count - 1) / count), count


def _admits(config: NetworkConfig, occ: list, sys_count: list, total: int,
            user_class: int, system: int) -> bool:
    """Would adding one (user_class, system) user keep everyone above t_min?

    Direct evaluation of the rate formula on the hypothetical state, with
    the same arithmetic as the chain engine's admission test so that
    boundary cases quantize identically.
    """
    N = config.num_classes
    peak = config.peak_rate
    t_min = config.t_min
    if config.sharing_scope == NETWORK_WIDE:
        k = total + 1
        g = config.gain(k)
        if peak[user_class][system] * g / k < t_min:
            return False
        for s in range(config.num_systems):
            base = s * N
            for n in range(N):
                if occ[base + n] > 0 and peak[n][s] * g / k < t_min:
                    return False
        return True
    k = sys_count[system] + 1
    g = config.gain(k)
    if peak[user_class][system] * g / k < t_min:
        return False
    base = system * N
    for n in range(N):
        if occ[base + n] > 0 and peak[n][system] * g / k < t_min:
            return False
    return True


def simulate(config: NetworkConfig, rule: AssignmentRule, num_events: int,
             seed: int, *, num_batches: int = 25,
             strict_arrivals: bool = False) -> SimReport:
    """Run `num_events` arrival/departure events and report empirical
    distributions, blocking and per-call volumes.

    Batch-means confidence intervals need enough events; a warning is
    issued below 10^5.
    """
    if num_events < 1:
        raise ValueError("num_events must be positive")
    if num_batches < 20:
        raise ValueError("at least 20 batches are required for the CIs")
    if num_events < MIN_EVENTS_FOR_CI:
        warnings.warn(f"fewer than {MIN_EVENTS_FOR_CI} events; "
                      "confidence intervals may be unreliable", stacklevel=2)

    N, S = config.num_classes, config.num_systems
    mu = config.service_rate
    lam = list(config.arrival_rate)
    lam_total = sum(lam)
    draw = _Uniforms(seed)

    occ = [0] * (N * S)
    sys_count = [0] * S
    total = 0
    thr = [[0.0] * S for _ in range(N)]

    def refresh_throughputs():
        for s in range(S):
            if config.sharing_scope == NETWORK_WIDE:
                k = total
            else:
                k = sys_count[s]
            if k <= 0:
                for n in range(N):
                    thr[n][s] = 0.0
                continue
            g = config.gain(k)
            for n in range(N):
                thr[n][s] = min(config.peak_rate[n][s] * g / k, config.t_max)

    cum = [[0.0] * S for _ in range(N)]
    users: list[tuple] = []           # (class, system, cum snapshot, seen state)

    arrivals = np.zeros((num_batches, N))
    blocked = np.zeros((num_batches, N))
    admitted = np.zeros((num_batches, N, S))
    volume_sum = np.zeros((num_batches, N, S))
    volume_count = np.zeros((num_batches, N, S), dtype=np.int64)
    state_time_batches: list[dict] = [{} for _ in range(num_batches)]
    batch_time = np.zeros(num_batches)
    arrival_seen: dict = {}
    volume_by_entry: dict = {}

    t = 0.0
    for ev in range(num_events):
        batch = ev * num_batches // num_events
        rate_total = lam_total + len(users) * mu
        dt = -math.log(1.0 - draw()) / rate_total
        t += dt
        batch_time[batch] += dt
        key = tuple(occ)
        bt = state_time_batches[batch]
        bt[key] = bt.get(key, 0.0) + dt
        if total:
            for n in range(N):
                row_occ = occ
                cum_n = cum[n]
                thr_n = thr[n]
                for s in range(S):
                    if row_occ[s * N + n]:
                        cum_n[s] += thr_n[s] * dt

        pick = draw() * rate_total
        if pick < lam_total:
            # arrival; locate the class on the cumulative rate axis
            n = 0
            acc = lam[0]
            while pick >= acc:
                n += 1
                acc += lam[n]
            seen = key
            arrival_seen[seen] = arrival_seen.get(seen, 0) + 1
            arrivals[batch, n] += 1
            preferred = rule.choose(config, seen, n)
            joined = -1
            if _admits(config, occ, sys_count, total, n, preferred):
                joined = preferred
            elif not strict_arrivals:
                for s in range(S):
                    if s != preferred and _admits(config, occ, sys_count, total, n, s):
                        joined = s
                        break
            if joined < 0:
                blocked[batch, n] += 1
            else:
                users.append((n, joined, cum[n][joined], seen))
                occ[joined * N + n] += 1
                sys_count[joined] += 1
                total += 1
                admitted[batch, n, joined] += 1
                refresh_throughputs()
        else:
            idx = min(int((pick - lam_total) / mu), len(users) - 1)
            n, s, snapshot, seen = users[idx]
            users[idx] = users[-1]
            users.pop()
            vol = cum[n][s] - snapshot
            volume_sum[batch, n, s] += vol
            volume_count[batch, n, s] += 1
            entry_key = (n, s, seen)
            count, mean, m2 = volume_by_entry.get(entry_key, (0, 0.0, 0.0))
            count += 1
            delta = vol - mean
            mean += delta / count
            m2 += delta * (vol - mean)
            volume_by_entry[entry_key] = (count, mean, m2)
            occ[s * N + n] -= 1
            sys_count[s] -= 1
            total -= 1
            refresh_throughputs()

    state_time: dict = {}
    for bt in state_time_batches:
        for key, val in bt.items():
            state_time[key] = state_time.get(key, 0.0) + val

    return SimReport(
        seed=seed, num_events=num_events, num_batches=num_batches,
        total_time=t, arrivals=arrivals, blocked=blocked, admitted=admitted,
        state_time=state_time, state_time_batches=state_time_batches,
        batch_time=batch_time, arrival_seen=arrival_seen,
        volume_sum=volume_sum, volume_count=volume_count,
        volume_by_entry=volume_by_entry)
