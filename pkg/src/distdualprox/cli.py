"""Command-line experiment runner.

Builds the constrained LASSO instance, computes the centralised optimum,
runs one algorithm mode for one or more simulator seeds and writes, per
seed, a trace CSV (and optionally a primal-trajectory CSV), plus one
summary for the batch. Wall-clock times go to a separate ``timing.txt`` so
that the other files are byte-identical across repeated runs.
"""

from __future__ import annotations

import argparse
import logging
import statistics
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .algorithms import MODES, AlgorithmConfig
from .lasso import MAPPINGS, ConfigError, ExperimentConfig, generate_lasso, load_config
from .reference import ReferenceSolution, centralized_solve
from .simnet import Trace, run

log = logging.getLogger("distdualprox")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    mode: str
    seeds: list[int]
    reference: ReferenceSolution
    traces: list[Trace]
    files: list[Path]

    @property
    def iterations(self) -> list[int]:
        return [tr.iterations for tr in self.traces]

    @property
    def median_iterations(self) -> float:
        return statistics.median(self.iterations)


def _fmt(v: float) -> str:
    return "%.17g" % v


def write_primal_csv(trace: Trace, path: Path) -> None:
    n, d = trace.records[0].primal.shape
    header = ["t", "sim_time"] + [f"x_{i}_{k}" for i in range(n) for k in range(d)]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in trace.records:
            fh.write(",".join([str(r.t), _fmt(r.sim_time)] + [_fmt(v) for v in r.primal.ravel()]) + "\n")


def _summary(res: ExperimentResult) -> str:
    cfg, ref = res.config, res.reference
    lines = [
        f"mode: {res.mode}",
        f"mapping: {cfg.mapping}",
        f"nodes: {cfg.n}  dim: {cfg.d}  samples per node: {cfg.samples}",
        f"threshold: {_fmt(cfg.threshold)}  max_iterations: {cfg.max_iterations}",
        f"gamma_star: {_fmt(ref.dual_opt_value)}",
        "x_opt: " + " ".join(_fmt(v) for v in ref.x_opt),
        "",
    ]
    per_node = []
    for seed, tr in zip(res.seeds, res.traces):
        last = tr.records[-1]
        X = tr.final_primal
        lines.append(f"[seed {seed}]")
        lines.append(f"iterations: {tr.iterations}")
        lines.append(f"truncated: {str(tr.truncated).lower()}")
        lines.append(f"final_dual_error: {_fmt(last.dual_cost_error)}")
        lines.append(f"final_consensus_error: {_fmt(last.consensus_error)}")
        lines.append(f"final_sim_time: {_fmt(last.sim_time)}")
        for i, x in enumerate(X):
            lines.append(f"x_{i}: " + " ".join(_fmt(v) for v in x))
        lines.append("")
        if res.mode == "async_node":
            per_node.append(tr.iterations / cfg.n)
    lines.append(f"median_iterations: {_fmt(res.median_iterations)}")
    if per_node:
        lines.append(f"median_awake_per_node: {_fmt(statistics.median(per_node))}")
    lines.append(f"truncated_runs: {sum(tr.truncated for tr in res.traces)}")
    return "\n".join(lines) + "\n"


def run_experiment(cfg: ExperimentConfig, seeds=(0,), out_dir: str | Path | None = None) -> ExperimentResult:
    """Generate, solve centrally, simulate every seed and write the output files."""
    mode = cfg.effective_mode
    problem = generate_lasso(cfg)
    ref = centralized_solve(problem)
    if not ref.converged:
        log.warning("centralised solve hit its iteration cap (residual %.3g)", ref.residual)
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    algo = AlgorithmConfig(mode=mode, step_scale=cfg.step_scale,
                           max_iterations=cfg.max_iterations, threshold=cfg.threshold)
    traces, files, timing = [], [], []
    for seed in seeds:
        tr = run(problem, algo, seed=seed, gamma_star=ref.dual_opt_value, record_primal=cfg.primal_trace)
        stem = f"{mode}_seed{seed}"
        path = out / f"trace_{stem}.csv"
        tr.write_csv(path) if not cfg.primal_trace else _write_plain(tr, path)
        files.append(path)
        if cfg.primal_trace:
            ppath = out / f"primal_{stem}.csv"
            write_primal_csv(tr, ppath)
            files.append(ppath)
        traces.append(tr)
        timing.append(f"seed {seed}: {tr.wall_time:.6f} s")
        log.info("seed %d: %d iterations%s", seed, tr.iterations, " (truncated)" if tr.truncated else "")
    res = ExperimentResult(cfg, mode, list(seeds), ref, traces, files)
    summary = out / f"summary_{mode}.txt"
    summary.write_text(_summary(res))
    (out / f"timing_{mode}.txt").write_text("\n".join(timing) + "\n")
    res.files += [summary]
    return res


def _write_plain(tr: Trace, path: Path) -> None:
    # trace without the per-node columns; those go to the primal CSV
    saved = [r.primal for r in tr.records]
    for r in tr.records:
        r.primal = None
    try:
        tr.write_csv(path)
    finally:
        for r, p in zip(tr.records, saved):
            r.primal = p


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="distdualprox",
                                description="Run distributed dual proximal gradient on a constrained LASSO.")
    p.add_argument("--config", type=Path, help="INI experiment file (desk-scale defaults when omitted)")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--seed", type=int, default=0, help="first simulator seed")
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds to run")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--mapping", choices=MAPPINGS)
    p.add_argument("--step-scale", type=float, dest="step_scale")
    p.add_argument("--primal-trace", action="store_true", default=None, dest="primal_trace",
                   help="also write the per-node primal trajectory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.seed < 0 or args.seeds < 1:
        print("error: --seed must be >= 0 and --seeds >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        overrides = dict(mode=args.mode, mapping=args.mapping, step_scale=args.step_scale,
                         primal_trace=args.primal_trace)
        if args.mode is not None:
            overrides["nesterov"] = False
        cfg = cfg.with_overrides(**overrides)
        seeds = list(range(args.seed, args.seed + args.seeds))
        res = run_experiment(cfg, seeds, args.out)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{res.mode}: median iterations {res.median_iterations:g} over {len(seeds)} seed(s); "
          f"{sum(tr.truncated for tr in res.traces)} truncated; outputs in {res.files[-1].parent}")
    return 1 if any(tr.truncated for tr in res.traces) else 0


if __name__ == "__main__":
    raise SystemExit(main())
