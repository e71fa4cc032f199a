"""Discrete-event network simulator.

Local timers are i.i.d. exponential. When a timer fires its entity (a node
or an edge) runs its awake handler, every message it emits is delivered
instantly and handled to quiescence, and only then is the next timer
processed. The universal counter ``t`` counts awake events and is used for
measurement only.
"""

from __future__ import annotations

import csv
import heapq
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algorithms import SYNC_MODES, AlgorithmConfig, Network
from .dual import DualCostTracker
from .problem import ProblemInstance


def exponential_from_uniform(u: float, rate: float) -> float:
    """Inverse-CDF draw of an Exp(rate) waiting time from ``u`` in (0, 1]."""
    return -math.log(u) / rate


class EventQueue:
    """Pending timer events ordered by ``(trigger_time, entity index)``."""

    def __init__(self, n_entities: int, seed: int, rate: float = 1.0):
        if rate <= 0:
            raise ValueError(f"rate must be positive, got {rate}")
        self.rate = rate
        self.rng = np.random.default_rng(seed)
        self._heap: list[tuple[float, int]] = []
        for k in range(n_entities):
            self.schedule_next(k, 0.0)

    def draw_wait(self) -> float:
        while True:
            w = exponential_from_uniform(1.0 - self.rng.random(), self.rate)
            if w > 0.0:
                return w

    def schedule_next(self, entity: int, now: float) -> float:
        when = now + self.draw_wait()
        heapq.heappush(self._heap, (when, entity))
        return when

    def pop(self) -> tuple[float, int]:
        return heapq.heappop(self._heap)

    def __len__(self):
        return len(self._heap)


@dataclass
class TraceRecord:
    t: int
    sim_time: float
    activated: str
    dual_cost_error: float
    consensus_error: float
    primal: np.ndarray | None = None


@dataclass
class Trace:
    records: list[TraceRecord]
    truncated: bool
    gamma_star: float | None
    mode: str
    activations: list = field(default_factory=list)
    duals: list[np.ndarray] | None = None
    network: Network | None = field(default=None, repr=False)
    wall_time: float = 0.0

    @property
    def iterations(self) -> int:
        return self.records[-1].t if self.records else 0

    @property
    def final_primal(self) -> np.ndarray:
        return self.network.primal()

    def error_column(self) -> np.ndarray:
        return np.array([r.dual_cost_error for r in self.records])

    def first_below(self, level: float) -> int | None:
        """Smallest ``t`` whose dual error is at or below ``level``."""
        for r in self.records:
            if r.dual_cost_error <= level:
                return r.t
        return None

    def write_csv(self, path: str | Path) -> None:
        with_primal = bool(self.records) and self.records[0].primal is not None
        header = ["t", "sim_time", "activated", "dual_cost_error", "consensus_error"]
        if with_primal:
            n, d = self.records[0].primal.shape
            header += [f"x_{i}_{k}" for i in range(n) for k in range(d)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in self.records:
                row = [str(r.t), _fmt(r.sim_time), r.activated, _fmt(r.dual_cost_error), _fmt(r.consensus_error)]
                if with_primal:
                    row += [_fmt(v) for v in r.primal.ravel()]
                w.writerow(row)


def _fmt(v: float) -> str:
    return "%.17g" % v


def read_trace_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def consensus_error(problem: ProblemInstance, X: np.ndarray) -> float:
    """``max over edges of ||x_i - x_j||_inf``."""
    if not problem.graph.edges:
        return 0.0
    e = np.asarray(problem.graph.edges)
    return float(np.max(np.abs(X[e[:, 0]] - X[e[:, 1]])))


def run(problem: ProblemInstance, config: AlgorithmConfig, seed: int = 0, *,
        gamma_star: float | None = None, rate: float = 1.0,
        record_primal: bool = False, record_duals: bool = False) -> Trace:
    """Drive one run of ``config.mode`` and record one row per iteration.

    Synchronous modes record one row per round (``sim_time`` = round number).
    Asynchronous modes record one row per awake event. The run stops once the
    dual error reaches ``config.threshold`` or after ``config.max_iterations``;
    in the latter case, with a threshold set, ``truncated`` is True. Without
    ``gamma_star`` the error column holds the raw dual cost.
    """
    started = time.perf_counter()
    net = Network(problem, config)
    offset = gamma_star if gamma_star is not None else 0.0
    mode = config.mode
    graph = problem.graph
    hat = mode == "sync_nesterov"
    y = net.dual_state(hat=hat)
    tracker = DualCostTracker(problem, y)
    records: list[TraceRecord] = []
    activations: list = []
    duals = [y.y.copy()] if record_duals else None

    if mode in SYNC_MODES:
        queue = None
    elif mode == "async_node":
        queue = EventQueue(problem.n, seed, rate)
    else:
        queue = EventQueue(len(graph.edges), seed, rate)

    reached = False
    for t in range(1, config.max_iterations + 1):
        if queue is None:
            net.round(t)
            sim_time, label = float(t), "all"
            y = net.dual_state(hat=hat)
            tracker.refresh(y, range(problem.n))
        elif mode == "async_node":
            sim_time, i = queue.pop()
            net.awake(i)
            queue.schedule_next(i, sim_time)
            label = str(i)
            activations.append(i)
            y = net.dual_state()
            tracker.refresh_around(y, [i])
        else:
            sim_time, e = queue.pop()
            i, j = graph.edges[e]
            net.edge(i, j)
            queue.schedule_next(e, sim_time)
            label = f"{i}-{j}"
            activations.append((i, j))
            y = net.dual_state()
            tracker.refresh(y, [i, j])
        X = net.primal()
        err = tracker.value - offset
        records.append(TraceRecord(t, sim_time, label, err, consensus_error(problem, X),
                                   X.copy() if record_primal else None))
        if record_duals:
            duals.append(y.y.copy())
        if config.threshold is not None and err <= config.threshold:
            reached = True
            break

    truncated = config.threshold is not None and not reached
    return Trace(records, truncated, gamma_star, mode, activations, duals, net,
                 wall_time=time.perf_counter() - started)
