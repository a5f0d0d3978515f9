"""Expected per-call transmitted volume via absorbing-chain solves.

To value one tagged (class, system) user, the chain is restricted to the
states containing him, his own departure is split off into an absorbing
state reached at rate mu, and the remaining dynamics (everyone else's
arrivals and departures, under the same assignment rule) are kept. The
expected volume sent before absorption solves a linear system whose right
hand side is the tagged user's instantaneous rate in each state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .ctmc import ChainTables, DENSE_SOLVE_LIMIT, assemble_generator, chain_tables
from .rules import AssignmentRule
from .states import Occupancy, StateSpace


class InfeasibleTargetError(LookupError):
    """The probed admission leads outside the feasible space."""


class SingularTaggedChainError(RuntimeError):
    """The tagged chain cannot reach absorption (requires mu > 0)."""


@dataclass
class TaggedChain:
    """Absorbing chain of one tagged (class, system) user.

    matrix is the transient-to-transient block (diagonal included); the
    absorption column is the constant rate mu from every transient state.
    state_ids maps local rows back to dense space ids.
    """

    state_ids: np.ndarray
    matrix: np.ndarray | sp.csr_matrix
    absorb_rate: float
    user_class: int
    system: int

    def row_sum_error(self) -> float:
        """Deviation of (transient rows + absorption column) from the original
        zero row sums."""
        if sp.issparse(self.matrix):
            sums = np.asarray(self.matrix.sum(axis=1)).ravel()
        else:
            sums = self.matrix.sum(axis=1)
        return float(np.abs(sums + self.absorb_rate).max())


def tagged_state_ids(space: StateSpace, user_class: int, system: int) -> np.ndarray:
    """Ids of the states containing at least one (user_class, system) user."""
    tables = chain_tables(space)
    return np.nonzero(tables.occ_ns[user_class, system] > 0)[0]


def _tagged_matrix(q, tables: ChainTables, user_class: int, system: int):
    """Restrict a full generator to the tagged states and lower the tagged
    departure rate by mu (the tagged user himself leaves toward absorption).

    Diagonals are kept from the original generator, so each transient row
    plus the mu absorption entry still sums to zero.
    """
    mu = tables.space.config.service_rate
    ids = np.nonzero(tables.occ_ns[user_class, system] > 0)[0]
    local = np.full(tables.space.num_states, -1, dtype=np.int64)
    local[ids] = np.arange(len(ids))

    if sp.issparse(q):
        sub = q[ids][:, ids].tolil()
    else:
        sub = q[np.ix_(ids, ids)].copy()
    multi = ids[tables.occ_ns[user_class, system, ids] >= 2]
    for i in multi:
        j = tables.departure_id[user_class, system, i]
        sub[local[i], local[j]] -= mu
    if sp.issparse(sub):
        sub = sub.tocsr()
    return ids, sub


def build_tagged_generator(space: StateSpace, rule: AssignmentRule,
                           user_class: int, system: int,
                           strict_arrivals: bool = False) -> TaggedChain:
    """Absorbing-chain generator for a tagged (class, system) user under a
    rule."""
    tables = chain_tables(space)
    q = assemble_generator(tables, rule.choice_table(space), strict=strict_arrivals)
    if space.num_states <= DENSE_SOLVE_LIMIT:
        q = q.toarray()
    ids, sub = _tagged_matrix(q, tables, user_class, system)
    return TaggedChain(state_ids=ids, matrix=sub,
                       absorb_rate=space.config.service_rate,
                       user_class=user_class, system=system)


def _solve_tagged(matrix, rhs: np.ndarray) -> np.ndarray:
    if sp.issparse(matrix):
        return spla.spsolve(matrix.tocsc(), -rhs)
    return np.linalg.solve(matrix, -rhs)


def solve_volume_from_matrix(tables: ChainTables, q, user_class: int,
                             system: int) -> np.ndarray:
    """Expected megabits of a tagged user, indexed by dense state id (nan on
    states where he is absent). Takes an already assembled full generator."""
    config = tables.space.config
    if config.service_rate <= 0:
        raise SingularTaggedChainError("absorption requires a positive service rate")
    ids, sub = _tagged_matrix(q, tables, user_class, system)
    out = np.full(tables.space.num_states, np.nan)
    if len(ids) == 0:
        return out
    rhs = tables.throughput[user_class, system, ids]
    values = _solve_tagged(sub, rhs)
    out[ids] = values
    return out


def solve_volume(space: StateSpace, rule: AssignmentRule, user_class: int,
                 system: int, strict_arrivals: bool = False) -> np.ndarray:
    """Expected megabits sent by a tagged (class, system) user from every
    state containing him; nan elsewhere."""
    tables = chain_tables(space)
    q = assemble_generator(tables, rule.choice_table(space), strict=strict_arrivals)
    if space.num_states <= DENSE_SOLVE_LIMIT:
        q = q.toarray()
    return solve_volume_from_matrix(tables, q, user_class, system)


@dataclass
class VolumeTable:
    """Expected volumes for every (class, system) pair under one rule.

    volumes[n, s, i] is the tagged-user expectation from state i, nan where
    state i holds no (n, s) user.
    """

    space: StateSpace
    volumes: np.ndarray
    rule_key: tuple

    def arrival_utility(self, occ_or_id, user_class: int, system: int) -> float:
        """Expected volume of a user who finds the network in the given state
        and joins `system`: the tagged expectation from the post-admission
        state."""
        space = self.space
        if isinstance(occ_or_id, (int, np.integer)):
            state_id = int(occ_or_id)
        else:
            state_id = space.id_of(tuple(occ_or_id))
        tables = chain_tables(space)
        target = tables.arrival_id[user_class, system, state_id]
        if target < 0:
            raise InfeasibleTargetError(
                f"system {system} cannot admit a class-{user_class} user from state "
                f"{space.states[state_id]}")
        return float(self.volumes[user_class, system, target])


def volume_tables(space: StateSpace, rule: AssignmentRule,
                  strict_arrivals: bool = False, cache: bool = True) -> VolumeTable:
    """Solve (or fetch) the full set of tagged-user volume tables for a rule.

    Cached per space, keyed by the rule fingerprint and the arrival mode.
    """
    store = getattr(space, "_volume_cache", None)
    if store is None:
        store = space._volume_cache = {}
    key = (rule.fingerprint(), strict_arrivals)
    if cache and key in store:
        return store[key]
    tables = chain_tables(space)
    config = space.config
    q = assemble_generator(tables, rule.choice_table(space), strict=strict_arrivals)
    if space.num_states <= DENSE_SOLVE_LIMIT:
        q = q.toarray()
    volumes = np.full((config.num_classes, config.num_systems, space.num_states), np.nan)
    for n in range(config.num_classes):
        for s in range(config.num_systems):
            volumes[n, s] = solve_volume_from_matrix(tables, q, n, s)
    table = VolumeTable(space=space, volumes=volumes, rule_key=key)
    if cache:
        store[key] = table
    return table


def arrival_utility(table: VolumeTable, occ: Occupancy, user_class: int,
                    system: int) -> float:
    """Module-level convenience wrapper around VolumeTable.arrival_utility."""
    return table.arrival_utility(occ, user_class, system)
