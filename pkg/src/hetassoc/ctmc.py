"""Continuous-time Markov chain engine: generator, steady state, blocking.

Transitions connect states differing by one user. Arrivals of class n occur
at rate lambda_n toward the system the assignment rule picks; a saturated
pick is redirected to the lowest-index system with room, and the arrival is
lost only when no system can admit the user (this matches the blocking
counts, which treat a state as blocking only when every system is
saturated). A strict mode that silently drops arrivals whose picked system
is full is available for comparison. Departures of (n, s) users occur at
rate M_n^s * mu; diagonal entries make every row sum to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .aggregation import label_array
from .config import AggregationScheme
from .rules import AssignmentRule
from .states import StateSpace, occ_index, scope_count

# Above this state count the steady-state solve switches from a dense LU to
# a sparse factorization.
DENSE_SOLVE_LIMIT = 2000

STEADY_RESIDUAL_TOL = 1e-10
EMPTY_LABEL_MASS = 1e-12


class SingularChainError(RuntimeError):
    """The balance equations have no unique solution over the space."""


class ResidualError(RuntimeError):
    """A solved distribution failed its post-solve residual check."""


class ChainTables:
    """Policy-independent transition structure precomputed for one space.

    Arrival targets, redirection outcomes, departure edges, blocking masks
    and per-state tagged-user throughputs depend only on the config and the
    enumerated space, so every policy and rule evaluation shares them.
    """

    def __init__(self, space: StateSpace):
        config = space.config
        N, S = config.num_classes, config.num_systems
        nst = space.num_states
        occ = space.occ
        self.space = space

        # occ_ns[n, s, i]: class-n users in system s at state i
        self.occ_ns = np.empty((N, S, nst), dtype=np.int64)
        # arrival_id[n, s, i]: id of the state with one more (n, s) user, -1
        # if that state is infeasible
        self.arrival_id = np.full((N, S, nst), -1, dtype=np.int64)
        # departure_id[n, s, i]: id after one (n, s) departure, -1 if none
        self.departure_id = np.full((N, S, nst), -1, dtype=np.int64)
        # throughput of one (n, s) user present at state i (nan if absent)
        self.throughput = np.full((N, S, nst), np.nan)

        index = space.index
        for i, state in enumerate(space.states):
            for s in range(S):
                for n in range(N):
                    j = occ_index(config, n, s)
                    self.occ_ns[n, s, i] = state[j]
                    up = state[:j] + (state[j] + 1,) + state[j + 1:]
                    self.arrival_id[n, s, i] = index.get(up, -1)
                    if state[j] > 0:
                        down = state[:j] + (state[j] - 1,) + state[j + 1:]
                        self.departure_id[n, s, i] = index[down]
                k = scope_count(config, state, s)
                if k > 0:
                    g = config.gain(k)
                    for n in range(N):
                        if state[occ_index(config, n, s)] > 0:
                            # same association order as user_throughput
                            self.throughput[n, s, i] = min(
                                config.peak_rate[n][s] * g / k, config.t_max)

        feasible = self.arrival_id >= 0                      # (N, S, nst)
        self.blocked = ~feasible.any(axis=1)                 # (N, nst)
        first_open = np.argmax(feasible, axis=1)             # lowest open system

        # admit_sys / admit_id: outcome with redirection, indexed by the
        # preferred system; strict_id drops redirected arrivals instead.
        self.admit_sys = np.empty((N, S, nst), dtype=np.int64)
        self.admit_id = np.empty((N, S, nst), dtype=np.int64)
        for n in range(N):
            for s in range(S):
                sys_taken = np.where(feasible[n, s], s, first_open[n])
                sys_taken = np.where(self.blocked[n], -1, sys_taken)
                self.admit_sys[n, s] = sys_taken
                ids = self.arrival_id[n, sys_taken.clip(min=0), np.arange(nst)]
                self.admit_id[n, s] = np.where(sys_taken >= 0, ids, -1)
        self.strict_id = self.arrival_id

        # departure triplets, shared by every generator
        src, rate, dst = [], [], []
        for n in range(N):
            for s in range(S):
                present = self.occ_ns[n, s] > 0
                idx = np.nonzero(present)[0]
                src.append(idx)
                dst.append(self.departure_id[n, s, idx])
                rate.append(self.occ_ns[n, s, idx] * config.service_rate)
        self.dep_src = np.concatenate(src)
        self.dep_dst = np.concatenate(dst)
        self.dep_rate = np.concatenate(rate).astype(float)

    def arrival_edges(self, choice: np.ndarray, strict: bool = False):
        """Arrival triplets (src, dst, rate) for a preferred-system table of
        shape (N, num_states)."""
        config = self.space.config
        nst = self.space.num_states
        rows, cols, rates = [], [], []
        targets = self.strict_id if strict else self.admit_id
        for n in range(config.num_classes):
            dst = targets[n, choice[n], np.arange(nst)]
            ok = dst >= 0
            rows.append(np.nonzero(ok)[0])
            cols.append(dst[ok])
            rates.append(np.full(ok.sum(), config.arrival_rate[n]))
        return (np.concatenate(rows), np.concatenate(cols), np.concatenate(rates))


def chain_tables(space: StateSpace) -> ChainTables:
    """Shared ChainTables for a space, built on first use."""
    tables = getattr(space, "_chain_tables", None)
    if tables is None:
        tables = ChainTables(space)
        space._chain_tables = tables
    return tables


@dataclass
class Generator:
    """Sparse CTMC rate matrix over dense state ids; rows sum to zero."""

    matrix: sp.csr_matrix
    space: StateSpace
    rule_name: str

    @property
    def num_states(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def row_sum_error(self) -> float:
        return float(np.abs(np.asarray(self.matrix.sum(axis=1)).ravel()).max())

    def coo_triplets(self):
        """(row, col, rate) triplets of the off-diagonal transitions."""
        coo = self.matrix.tocoo()
        for r, c, v in zip(coo.row, coo.col, coo.data):
            if r != c and v != 0.0:
                yield int(r), int(c), float(v)


def assemble_generator(tables: ChainTables, choice: np.ndarray,
                       strict: bool = False) -> sp.csr_matrix:
    arr_src, arr_dst, arr_rate = tables.arrival_edges(choice, strict=strict)
    rows = np.concatenate([arr_src, tables.dep_src])
    cols = np.concatenate([arr_dst, tables.dep_dst])
    rates = np.concatenate([arr_rate, tables.dep_rate])
    nst = tables.space.num_states
    q = sp.coo_matrix((rates, (rows, cols)), shape=(nst, nst)).tocsr()
    q = q - sp.diags(np.asarray(q.sum(axis=1)).ravel(), format="csr")
    return q


def assemble_dense(tables: ChainTables, choice: np.ndarray,
                   strict: bool = False) -> np.ndarray:
    """Dense variant of assemble_generator for solver hot paths."""
    arr_src, arr_dst, arr_rate = tables.arrival_edges(choice, strict=strict)
    nst = tables.space.num_states
    q = np.zeros((nst, nst))
    np.add.at(q, (arr_src, arr_dst), arr_rate)
    np.add.at(q, (tables.dep_src, tables.dep_dst), tables.dep_rate)
    np.fill_diagonal(q, q.diagonal() - q.sum(axis=1))
    return q


def build_generator(space: StateSpace, rule: AssignmentRule,
                    strict_arrivals: bool = False) -> Generator:
    """Generator of the chain induced by an assignment rule."""
    tables = chain_tables(space)
    choice = rule.choice_table(space)
    matrix = assemble_generator(tables, choice, strict=strict_arrivals)
    return Generator(matrix=matrix, space=space, rule_name=rule.describe())


@dataclass
class SteadyState:
    """Stationary distribution with optional per-label masses."""

    pi: np.ndarray
    residual: float
    label_mass: np.ndarray | None = None
    empty_labels: np.ndarray | None = None

    def mass_of(self, label: int) -> float:
        return float(self.label_mass[label])


def _solve_stationary(matrix) -> np.ndarray:
    """Solve pi Q = 0, sum(pi) = 1 with one balance row replaced by the
    normalization; valid because the balance equations always sum to zero."""
    n = matrix.shape[0]
    if n == 1:
        return np.ones(1)
    b = np.zeros(n)
    b[-1] = 1.0
    if n <= DENSE_SOLVE_LIMIT:
        a = matrix.toarray().T if sp.issparse(matrix) else np.array(matrix.T)
        a[-1, :] = 1.0
        try:
            return np.linalg.solve(a, b)
        except np.linalg.LinAlgError as exc:
            raise SingularChainError(f"stationary solve failed: {exc}") from exc
    a = matrix.T.tolil()
    a[-1, :] = 1.0
    try:
        return spla.spsolve(a.tocsc(), b)
    except RuntimeError as exc:
        raise SingularChainError(f"stationary solve failed: {exc}") from exc


def solve_steady_state(gen: Generator, scheme: AggregationScheme | None = None,
                       residual_tol: float = STEADY_RESIDUAL_TOL) -> SteadyState:
    """Unique stationary distribution of the generator.

    The solution is checked against the balance equations afterwards; tiny
    negative entries from roundoff are clamped to zero. When a scheme is
    given, the conditional label masses (and which labels carry no mass at
    all) are attached to the result.
    """
    pi = _solve_stationary(gen.matrix)
    if pi.min() < -1e-9:
        raise ResidualError(f"stationary solve produced negative mass {pi.min():.3e}")
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    residual = float(np.abs(pi @ gen.matrix).max())
    if residual > residual_tol:
        raise ResidualError(
            f"stationary residual {residual:.3e} exceeds {residual_tol:.1e}")
    ss = SteadyState(pi=pi, residual=residual)
    if scheme is not None:
        labels = label_array(scheme, gen.space)
        ss.label_mass = np.bincount(labels, weights=pi, minlength=scheme.label_count)
        ss.empty_labels = ss.label_mass <= EMPTY_LABEL_MASS
    return ss


def blocking_states(space: StateSpace, user_class: int) -> np.ndarray:
    """Mask of states where no system can admit a class-`user_class` user."""
    return chain_tables(space).blocked[user_class]


def blocking_by_label(space: StateSpace, scheme: AggregationScheme,
                      steady: SteadyState, user_class: int,
                      restrict_numerator: bool = True) -> np.ndarray:
    """Conditional blocking probability of one class per load label.

    The numerator is restricted to the label's own states so the result is a
    probability; restrict_numerator=False reproduces the unrestricted
    variant (blocking mass over label mass) for comparison. Labels without
    stationary mass report zero.
    """
    labels = label_array(scheme, space)
    blocked = blocking_states(space, user_class)
    L = scheme.label_count
    mass = np.bincount(labels, weights=steady.pi, minlength=L)
    if restrict_numerator:
        num = np.bincount(labels[blocked], weights=steady.pi[blocked], minlength=L)
    else:
        num = np.full(L, steady.pi[blocked].sum())
    out = np.zeros(L)
    nonempty = mass > EMPTY_LABEL_MASS
    out[nonempty] = num[nonempty] / mass[nonempty]
    return out


def overall_blocking(space: StateSpace, steady: SteadyState) -> float:
    """Arrival-rate-weighted probability that a new call finds every system
    saturated."""
    config = space.config
    total = sum(config.arrival_rate)
    b = 0.0
    for n in range(config.num_classes):
        weight = config.arrival_rate[n] / total
        b += weight * steady.pi[blocking_states(space, n)].sum()
    return b


def per_class_blocking(space: StateSpace, steady: SteadyState) -> np.ndarray:
    """Unconditional blocking probability per class."""
    config = space.config
    return np.array([steady.pi[blocking_states(space, n)].sum()
                     for n in range(config.num_classes)])
