"""Online dispatch recommendation: UCT search over the generative model,
plus a myopic greedy baseline used both standalone and as the rollout policy.

plan() is fully reproducible given (state, config): sampling flows through a
single seeded stream and every tie-break is structural (legal-action order),
never random.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from random import Random
from typing import Callable

import numpy as np

from .scenario import Scenario
from .simkit import run
from .smdp import (
    HOLD,
    ActionKind,
    DispatchAction,
    WorldState,
    is_terminal,
    legal_actions,
    predict_timeline,
    step,
)
from .world import Precedence


class TerminalState(ValueError):
    """plan/greedy_policy called on a state with nothing left to decide."""


@dataclass(frozen=True)
class PlannerConfig:
    iterations: int = 1000
    exploration_c: float = 1.4
    max_rollout_depth: int = 30
    seed: int = 0
    stochastic: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.exploration_c > 0:
            raise ValueError("exploration_c must be positive")


@dataclass(frozen=True)
class Recommendation:
    action: DispatchAction
    estimated_return: float
    visit_counts: tuple[tuple[DispatchAction, int], ...]
    predicted_timeline: tuple[tuple[str, float], ...]


_PRECEDENCE_RANK = {Precedence.URGENT: 0, Precedence.PRIORITY: 1, Precedence.ROUTINE: 2}


def _request_order(s: WorldState):
    reqs = [s.request(rid) for rid in s.pending]
    return sorted(reqs, key=lambda r: (_PRECEDENCE_RANK[r.precedence], r.time, r.id))


def greedy_policy(s: WorldState) -> DispatchAction:
    """Serve the highest-precedence oldest request by fastest predicted delivery.

    Ties break to the lowest aircraft id, then lowest watercraft id. Holds when
    no request has a feasible action.
    """
    if is_terminal(s):
        raise TerminalState("no decisions left in a terminal state")
    acts = legal_actions(s)
    by_request: dict[str, list[DispatchAction]] = {}
    for a in acts:
        if a.kind is not ActionKind.HOLD:
            by_request.setdefault(a.request_id, []).append(a)
    for req in _request_order(s):
        candidates = by_request.get(req.id)
        if not candidates:
            continue
        best = None
        best_key = None
        for a in candidates:
            _, delivery = predict_timeline(s, a)
            if delivery is None:
                continue
            key = (delivery, a.aircraft_id, a.axp_watercraft_id or "",
                   a.receiving_aircraft_id or "")
            if best_key is None or key < best_key:
                best, best_key = a, key
        if best is not None:
            return best
    return HOLD


class _Node:
    __slots__ = ("state", "actions", "children", "visits", "value_sum",
                 "rollout_value", "terminal")

    def __init__(self, state: WorldState):
        self.state = state
        self.terminal = is_terminal(state)
        self.actions = [] if self.terminal else legal_actions(state)
        self.children: list[tuple[float, _Node] | None] = [None] * len(self.actions)
        self.visits = 0
        self.value_sum = 0.0
        self.rollout_value: float | None = None


def _rollout(state: WorldState, depth: int, rng: Random | None) -> float:
    """Greedy rollout to the depth cap; truncation bootstraps with 0."""
    total = 0.0
    for _ in range(depth):
        if is_terminal(state):
            break
        tr = step(state, greedy_policy(state), rng)
        total += tr.reward
        state = tr.next_state
    return total


def plan(s: WorldState, cfg: PlannerConfig,
         restrict_to_request: str | None = None) -> Recommendation:
    """UCT search from s; returns the most-visited root action.

    Children are tried unvisited-first in the deterministic legal-action order;
    visited children score mean return + exploration_c * sqrt(ln N / n). When
    cfg.stochastic is set, each child's transition is sampled once at expansion
    and rollouts re-sample, so the seed shapes the search but two identical
    calls still return bit-identical recommendations.
    """
    if is_terminal(s):
        raise TerminalState("cannot plan from a terminal state")
    rng = Random(cfg.seed) if cfg.stochastic else None
    root = _Node(s)
    if restrict_to_request is not None:
        keep = [i for i, a in enumerate(root.actions)
                if a.kind is ActionKind.HOLD or a.request_id == restrict_to_request]
        root.actions = [root.actions[i] for i in keep]
        root.children = [None] * len(root.actions)

    for _ in range(cfg.iterations):
        node = root
        path: list[_Node] = [root]
        rewards: list[float] = []
        depth = 0
        # Selection / expansion.
        while not node.terminal and depth < cfg.max_rollout_depth:
            unvisited = next((i for i, c in enumerate(node.children) if c is None), None)
            if unvisited is not None:
                tr = step(node.state, node.actions[unvisited], rng)
                child = _Node(tr.next_state)
                node.children[unvisited] = (tr.reward, child)
                rewards.append(tr.reward)
                path.append(child)
                node = child
                depth += 1
                break
            if not node.children:
                break
            log_n = math.log(node.visits)
            best_i, best_score = 0, -math.inf
            for i, entry in enumerate(node.children):
                r, child = entry
                # Mean return of taking this action: edge reward plus the
                # child's mean value onward.
                score = (r + child.value_sum / child.visits
                         + cfg.exploration_c * math.sqrt(log_n / child.visits))
                if score > best_score:
                    best_i, best_score = i, score
            r, child = node.children[best_i]
            rewards.append(r)
            path.append(child)
            node = child
            depth += 1

        # Rollout from the frontier node (cached when noise-free).
        if node.terminal:
            tail = 0.0
        elif rng is None:
            if node.rollout_value is None:
                node.rollout_value = _rollout(node.state, cfg.max_rollout_depth - depth, None)
            tail = node.rollout_value
        else:
            tail = _rollout(node.state, cfg.max_rollout_depth - depth, rng)

        # Backpropagate returns-from-node along the path.
        value = tail
        for i in range(len(path) - 1, -1, -1):
            path[i].visits += 1
            path[i].value_sum += value
            if i > 0:
                value += rewards[i - 1]

    counts = []
    for i, a in enumerate(root.actions):
        entry = root.children[i]
        counts.append((a, entry[1].visits if entry else 0))
    best_action, best_child = None, None
    best_visits = -1
    for i, a in enumerate(root.actions):
        entry = root.children[i]
        v = entry[1].visits if entry else 0
        if v > best_visits:
            best_visits = v
            best_action = a
            best_child = entry
    est = 0.0
    if best_child is not None:
        r, child = best_child
        est = r + (child.value_sum / child.visits if child.visits else 0.0)
    events, _ = predict_timeline(s, best_action)
    timeline = tuple((e.kind.value, e.t_ms / 1000.0) for e in events)
    return Recommendation(action=best_action, estimated_return=est,
                          visit_counts=tuple(counts), predicted_timeline=timeline)


def mcts_policy(cfg: PlannerConfig) -> Callable[[WorldState], DispatchAction]:
    """A simulator policy that replans with UCT at every decision epoch."""
    def policy(s: WorldState) -> DispatchAction:
        return plan(s, cfg).action
    return policy


@dataclass(frozen=True)
class MetricsSummary:
    episodes: int
    response_time: dict[str, float] = field(default_factory=dict)
    time_to_facility: dict[str, float] = field(default_factory=dict)
    axp_dwell: dict[str, float] = field(default_factory=dict)
    utilization: dict[str, float] = field(default_factory=dict)


def _summary(values: list[float]) -> dict[str, float]:
    if not values:
        return {}
    return {
        "mean": statistics.fmean(values),
        "median": statistics.median(values),
        "p95": float(np.percentile(values, 95)),
    }


def evaluate_policy(scenario: Scenario, policy: Callable[[WorldState], DispatchAction],
                    episodes: int, seed: int = 0) -> MetricsSummary:
    """Run repeated simulations with per-episode derived seeds and pool metrics."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    resp: list[float] = []
    ttf: list[float] = []
    dwell: list[float] = []
    util: list[float] = []
    for i in range(episodes):
        _, m = run(scenario, policy, seed=seed * 1_000_003 + i)
        resp.extend(m.response_time.values())
        ttf.extend(m.time_to_facility.values())
        dwell.extend(d for _, _, d in m.axp_dwell)
        util.extend(m.utilization.values())
    return MetricsSummary(
        episodes=episodes,
        response_time=_summary(resp),
        time_to_facility=_summary(ttf),
        axp_dwell=_summary(dwell),
        utilization=_summary(util),
    )
