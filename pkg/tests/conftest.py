"""Shared fixtures: hand-solvable instances and a random-instance generator."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from hetassoc import (AggregationScheme, NetworkConfig, enumerate_states,
                      load_instance)

REPO_ROOT = Path(__file__).resolve().parent.parent
CONFIG_DIR = REPO_ROOT / "configs"


@pytest.fixture(scope="session")
def erlang_config() -> NetworkConfig:
    """Single class, single system: D=2, t_min=1, t_max=2, lambda=mu=1.

    The chain over {0, 1, 2} users is the two-server Erlang loss system at
    one Erlang: pi = (0.4, 0.4, 0.2), blocking 1/5.
    """
    return NetworkConfig(peak_rate=((2.0,),), t_min=1.0, t_max=2.0,
                         arrival_rate=(1.0,), service_rate=1.0)


@pytest.fixture(scope="session")
def erlang_space(erlang_config):
    return enumerate_states(erlang_config)


@pytest.fixture(scope="session")
def erlang_scheme() -> AggregationScheme:
    """Thresholds that put all three Erlang states into one label."""
    return AggregationScheme(((1.0, 1.0),))


@pytest.fixture(scope="session")
def hybrid_instance():
    text = (CONFIG_DIR / "hybrid_example.json").read_text()
    return load_instance(text)


@pytest.fixture(scope="session")
def twin_config() -> NetworkConfig:
    """Two independent single-class systems: class n is only feasible in
    system n, so the chain is a product of two Erlang chains."""
    return NetworkConfig(peak_rate=((2.0, 0.5), (0.5, 2.0)), t_min=1.0,
                         t_max=2.0, arrival_rate=(1.0, 0.7), service_rate=1.0)


def random_instance(rng: np.random.Generator, max_space: int = 500):
    """Small random instance (S <= 2, N <= 2) with a bounded feasible space.

    Peak rates, traffic, thresholds and the gain table are all randomized;
    gain tables respect the gain(k)/k monotonicity requirement by
    construction (non-increasing gains).
    """
    while True:
        S = int(rng.integers(1, 3))
        N = int(rng.integers(1, 3))
        peak = tuple(tuple(float(np.round(rng.uniform(0.6, 6.0), 3))
                           for _ in range(S)) for _ in range(N))
        t_min = 1.0
        t_max = float(np.round(rng.uniform(1.0, 3.0), 3))
        lam = tuple(float(np.round(rng.uniform(0.05, 3.0), 3)) for _ in range(N))
        mu = float(np.round(rng.uniform(0.4, 2.0), 3))
        gain_len = int(rng.integers(1, 4))
        gains = np.round(np.sort(rng.uniform(0.5, 1.5, size=gain_len))[::-1], 3)
        scope = "network_wide" if rng.random() < 0.25 else "per_system"
        config = NetworkConfig(peak_rate=peak, t_min=t_min, t_max=t_max,
                               arrival_rate=lam, service_rate=mu,
                               scheduler_gain=tuple(gains), sharing_scope=scope)
        try:
            space = enumerate_states(config, max_states=max_space)
        except Exception:
            continue
        if space.num_states >= 2:
            lo = float(np.round(rng.uniform(0.0, 0.6), 2))
            hi = float(np.round(rng.uniform(lo, 1.0), 2))
            scheme = AggregationScheme(tuple((lo, hi) for _ in range(S)))
            return config, space, scheme


def random_policy(rng: np.random.Generator, config, scheme):
    from hetassoc import Policy
    return Policy(tuple(tuple(int(rng.integers(config.num_systems))
                              for _ in range(scheme.label_count))
                        for _ in range(config.num_classes)))


# ----- property-family checks shared by the property and acceptance suites


def check_generator_row_sums(instances, rng) -> None:
    from hetassoc import PolicyRule, build_generator
    for config, space, scheme in instances:
        rule = PolicyRule(random_policy(rng, config, scheme), scheme)
        assert build_generator(space, rule).row_sum_error() <= 1e-12


def check_steady_residuals(instances, rng) -> None:
    from hetassoc import PolicyRule, build_generator, solve_steady_state
    for config, space, scheme in instances:
        rule = PolicyRule(random_policy(rng, config, scheme), scheme)
        ss = solve_steady_state(build_generator(space, rule))
        assert ss.residual <= 1e-10
        assert ss.pi.min() >= 0.0
        assert abs(ss.pi.sum() - 1.0) <= 1e-12


def check_departure_closure(instances) -> None:
    for _, space, _ in instances:
        for occ in space.states:
            for j, count in enumerate(occ):
                if count > 0:
                    assert occ[:j] + (count - 1,) + occ[j + 1:] in space


def check_label_totality(instances) -> None:
    from hetassoc.aggregation import (label_array, label_of,
                                      state_counts_per_label)
    for config, space, scheme in instances:
        labels = label_array(scheme, space)
        assert labels.min() >= 0 and labels.max() < scheme.label_count
        assert state_counts_per_label(scheme, space).sum() == space.num_states
        for i, occ in enumerate(space.states):
            assert labels[i] == label_of(scheme, config, occ)


def swap_label_two_systems(label: int) -> int:
    return (label % 3) * 3 + label // 3


def check_relabel_equivariance(instances, rng, tol: float = 1e-9) -> None:
    """System-swap equivariance of the game layer, S = 2 instances only."""
    from hetassoc import Policy, enumerate_states
    from hetassoc.game import PolicyGameSolver
    for config, space, scheme in instances:
        assert config.num_systems == 2
        policy = random_policy(rng, config, scheme)
        ev = PolicyGameSolver(space, scheme).evaluate(policy)

        swapped_cfg = NetworkConfig(
            peak_rate=tuple((row[1], row[0]) for row in config.peak_rate),
            t_min=config.t_min, t_max=config.t_max,
            arrival_rate=config.arrival_rate, service_rate=config.service_rate,
            scheduler_gain=config.scheduler_gain,
            sharing_scope=config.sharing_scope)
        swapped_scheme = AggregationScheme((scheme.thresholds[1],
                                            scheme.thresholds[0]))
        swapped_space = enumerate_states(swapped_cfg)
        rows = []
        for row in policy.choice:
            out = [0] * 9
            for l, s in enumerate(row):
                out[swap_label_two_systems(l)] = 1 - s
            rows.append(tuple(out))
        ev2 = PolicyGameSolver(swapped_space, swapped_scheme).evaluate(
            Policy(tuple(rows)))

        assert swapped_space.num_states == space.num_states
        assert abs(ev2.global_utility - ev.global_utility) <= tol
        assert abs(ev2.overall_blocking - ev.overall_blocking) <= 1e-10
        for n in range(config.num_classes):
            for l in range(9):
                l2 = swap_label_two_systems(l)
                assert abs(ev2.label_mass[l2] - ev.label_mass[l]) <= 1e-10
                if ev.empty_labels[l]:
                    assert ev2.empty_labels[l2]
                    continue
                if ev.label_mass[l] < 1e-9:
                    # conditional quantities on near-zero mass are noise
                    continue
                assert abs(ev2.blocking[n, l2] - ev.blocking[n, l]) <= tol
                for s in range(2):
                    a = ev2.individual[n, l2, 1 - s]
                    b = ev.individual[n, l, s]
                    assert (np.isnan(a) and np.isnan(b)) or abs(a - b) <= tol
