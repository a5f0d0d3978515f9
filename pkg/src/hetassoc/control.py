"""Operator-side control: choose the broadcast thresholds that minimize the
blocking users generate at equilibrium.

For each candidate aggregation scheme the user game is re-solved; the
scheme whose equilibrium blocks the least traffic wins (maximizing the
acceptance ratio 1/b gives the same winner, which is asserted). Equilibrium
multiplicity is surfaced instead of hidden: a declared selection rule picks
the representative equilibrium and the worst case is reported next to it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import AggregationScheme, NetworkConfig
from .game import PolicyEvaluation, PolicyGameSolver
from .states import StateSpace, enumerate_states

SELECTION_RULES = ("max_utility", "min_blocking")


@dataclass
class SchemeOutcome:
    """Equilibrium findings for one candidate aggregation scheme."""

    scheme: AggregationScheme
    equilibria: list[PolicyEvaluation]
    selected: PolicyEvaluation | None
    blocking: float | None           # under the declared selection rule
    utility: float | None
    worst_blocking: float | None     # across all found equilibria
    note: str


@dataclass
class ControlResult:
    outcomes: list[SchemeOutcome]
    best_index: int | None
    selection_rule: str

    @property
    def best(self) -> SchemeOutcome | None:
        return None if self.best_index is None else self.outcomes[self.best_index]


def threshold_lattice(num_systems: int, step: float = 0.1) -> list[AggregationScheme]:
    """All per-system (low, high) combinations on a regular grid with
    0 <= low <= high <= 1."""
    ticks = np.round(np.arange(0.0, 1.0 + step / 2, step), 10)
    pairs = [(float(lo), float(hi)) for lo in ticks for hi in ticks if lo <= hi]

    def build(prefix, remaining):
        if remaining == 0:
            yield AggregationScheme(tuple(prefix))
            return
        for pair in pairs:
            yield from build(prefix + [pair], remaining - 1)

    return list(build([], num_systems))


def _select(equilibria: list[PolicyEvaluation], rule: str) -> PolicyEvaluation:
    if rule == "max_utility":
        return max(equilibria, key=lambda ev: (ev.global_utility, -ev.overall_blocking))
    return min(equilibria, key=lambda ev: (ev.overall_blocking, -ev.global_utility))


def optimize_thresholds(config: NetworkConfig, grid, *,
                        selection_rule: str = "max_utility",
                        nash_mode: str = "auto", restarts: int = 64,
                        seed: int = 0, eps: float = 1e-9,
                        strict_arrivals: bool = False,
                        space: StateSpace | None = None) -> ControlResult:
    """Evaluate every scheme in the grid and pick the blocking argmin.

    Schemes for which no pure equilibrium is found are recorded but
    excluded from the argmin. The feasible space does not depend on the
    thresholds, so it is enumerated once and shared.
    """
    if selection_rule not in SELECTION_RULES:
        raise ValueError(f"selection_rule must be one of {SELECTION_RULES}")
    grid = list(grid)
    if not grid:
        raise ValueError("threshold grid must not be empty")
    if space is None:
        space = enumerate_states(config)
    outcomes = []
    for scheme in grid:
        solver = PolicyGameSolver(space, scheme, strict_arrivals=strict_arrivals)
        equilibria = solver.find_nash(nash_mode, eps=eps, restarts=restarts, seed=seed)
        if not equilibria:
            outcomes.append(SchemeOutcome(
                scheme=scheme, equilibria=[], selected=None, blocking=None,
                utility=None, worst_blocking=None,
                note="no pure equilibrium found; excluded from argmin"))
            continue
        selected = _select(equilibria, selection_rule)
        worst = max(ev.overall_blocking for ev in equilibria)
        note = "" if len(equilibria) == 1 else f"{len(equilibria)} equilibria"
        outcomes.append(SchemeOutcome(
            scheme=scheme, equilibria=equilibria, selected=selected,
            blocking=selected.overall_blocking, utility=selected.global_utility,
            worst_blocking=worst, note=note))

    scored = [(i, o.blocking) for i, o in enumerate(outcomes) if o.blocking is not None]
    best_index = None
    if scored:
        best_index = min(scored, key=lambda item: item[1])[0]
        # maximizing the acceptance ratio must agree with minimizing blocking
        inv = [(i, (1.0 / b) if b > 0 else np.inf) for i, b in scored]
        assert max(inv, key=lambda item: item[1])[0] == best_index
    return ControlResult(outcomes=outcomes, best_index=best_index,
                         selection_rule=selection_rule)
