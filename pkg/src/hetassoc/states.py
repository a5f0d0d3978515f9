"""Feasible-state enumeration, dense state indexing and per-state throughput.

Network states are plain tuples of N*S non-negative ints in system-major
order: entry occ[s * N + n] counts the class-n users connected to system s.
The feasible space is the set of states where every connected user reaches
the minimal codec rate; it is closed under departures because the scheduler
gain per user is non-increasing in the occupancy.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .config import NETWORK_WIDE, NetworkConfig

Occupancy = tuple[int, ...]

DEFAULT_STATE_CEILING = 1_000_000


class CapacityError(RuntimeError):
    """The feasible state space exceeds the configured ceiling."""


def occ_index(config: NetworkConfig, user_class: int, system: int) -> int:
    """Position of the (class, system) counter inside an occupancy tuple."""
    return system * config.num_classes + user_class


def zero_state(config: NetworkConfig) -> Occupancy:
    return (0,) * (config.num_classes * config.num_systems)


def scope_count(config: NetworkConfig, occ: Occupancy, system: int) -> int:
    """Number of users sharing the scheduler with a user of `system`."""
    if config.sharing_scope == NETWORK_WIDE:
        return sum(occ)
    n = config.num_classes
    return sum(occ[system * n:(system + 1) * n])


def user_throughput(config: NetworkConfig, occ: Occupancy,
                    user_class: int, system: int) -> float:
    """Instantaneous rate of one class-`user_class` user present in `system`.

    The state must already count the user; callers probing a hypothetical
    admission add him first.
    """
    if occ[occ_index(config, user_class, system)] < 1:
        raise ValueError("state does not contain the probed user")
    k = scope_count(config, occ, system)
    rate = config.peak_rate[user_class][system] * config.gain(k) / k
    return min(rate, config.t_max)


def is_feasible(config: NetworkConfig, occ: Occupancy) -> bool:
    """True iff every connected user reaches the minimal rate t_min."""
    n_classes = config.num_classes
    for s in range(config.num_systems):
        base = s * n_classes
        for n in range(n_classes):
            if occ[base + n] > 0 and user_throughput(config, occ, n, s) < config.t_min:
                return False
    return True


class StateSpace:
    """The enumerated feasible space with dense, lexicographic state ids."""

    def __init__(self, config: NetworkConfig, states: list[Occupancy]):
        self.config = config
        self.states: tuple[Occupancy, ...] = tuple(states)
        self.index: dict[Occupancy, int] = {occ: i for i, occ in enumerate(self.states)}
        self.occ = np.array(self.states, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def num_states(self) -> int:
        return len(self.states)

    def id_of(self, occ: Occupancy) -> int:
        return self.index[tuple(occ)]

    def get_id(self, occ: Occupancy, default: int = -1) -> int:
        return self.index.get(tuple(occ), default)

    def __contains__(self, occ) -> bool:
        return tuple(occ) in self.index


def enumerate_states(config: NetworkConfig,
                     max_states: int = DEFAULT_STATE_CEILING) -> StateSpace:
    """Enumerate every feasible state by closure from the empty network.

    Breadth-first search under single arrivals visits the whole feasible set
    because feasibility is monotone in the occupancy. Ids are assigned in
    lexicographic order of the occupancy vector so two runs produce
    identical layouts.
    """
    start = zero_state(config)
    seen = {start}
    queue = deque([start])
    size = len(start)
    while queue:
        occ = queue.popleft()
        for i in range(size):
            child = occ[:i] + (occ[i] + 1,) + occ[i + 1:]
            if child in seen or not is_feasible(config, child):
                continue
            seen.add(child)
            if len(seen) > max_states:
                raise CapacityError(
                    f"feasible state space exceeds the ceiling of {max_states} states")
            queue.append(child)
    return StateSpace(config, sorted(seen))


def state_table_rows(space: StateSpace):
    """Rows for the state-table CSV dump: id, occupancy, per-(n,s) throughput.

    Throughput cells are empty for (class, system) pairs with no user in the
    state.
    """
    config = space.config
    for i, occ in enumerate(space.states):
        row: list[object] = [i, *occ]
        for s in range(config.num_systems):
            for n in range(config.num_classes):
                if occ[occ_index(config, n, s)] > 0:
                    row.append(user_throughput(config, occ, n, s))
                else:
                    row.append("")
        yield row
