"""Experiment runner: seeded loops, sweeps, CSV traces, and SVG figures.

A run is one (config, seed) cell: T rounds of sample-context / choose / step /
update with per-round wall time measured around the policy work only.  Random
streams are split so that the policy and the sampler depend on the run seed
alone while the environment also folds in its own seed; replaying any cell
is bit-reproducible, which the test suite asserts.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .config import RunConfig
from .diagnostics import complexity_report
from .dictionary import KorsParams
from .environments import Environment
from .kernels import StatePoint, gram_packed, pack
from .policies import (
    ExactKernelUcb,
    ProjectedKernelUcb,
    ResamplingKernelUcb,
    UniformRandomPolicy,
)

TRACE_COLUMNS = (
    "t",
    "chosen_action_index",
    "reward",
    "instantaneous_regret",
    "cumulative_regret",
    "dictionary_size",
    "step_wall_time_ns",
)

# wall-clock columns are the only nondeterministic ones; tests strip them
NONDETERMINISTIC_COLUMNS = ("step_wall_time_ns",)


def _env_for_run(config: RunConfig, seed: int) -> Environment:
    # fold the run seed into the environment stream; the policy streams below
    # use the run seed only, so changing env.seed never moves a coin flip
    spec = replace(config.env, seed=config.env.seed + 1_000_003 * seed)
    return Environment(spec)


def resolve_gamma(config: RunConfig) -> float:
    if config.gamma is not None:
        return config.gamma
    return KorsParams.theory_default(config.horizon, config.mu).gamma


def build_policy(config: RunConfig, seed: int):
    policy_rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB0]))
    kors_rng = np.random.default_rng(np.random.SeedSequence([seed, 0xD1C7]))
    if config.policy == "kucb":
        return ExactKernelUcb(config.kernel, config.lam, config.schedule)
    if config.policy == "random":
        return UniformRandomPolicy(policy_rng)
    kors = KorsParams(mu=config.mu, epsilon=config.epsilon, gamma=resolve_gamma(config))
    if config.policy == "ekucb":
        return ProjectedKernelUcb(
            config.kernel,
            config.lam,
            kors,
            config.schedule,
            policy_rng,
            kors_rng,
            refactor_every=config.refactor_every,
        )
    # cbkb is the resampling baseline pinned to an every-round threshold
    threshold = 1.0 if config.policy == "cbkb" else config.accumulation_threshold
    return ResamplingKernelUcb(
        config.kernel,
        config.lam,
        kors,
        config.schedule,
        policy_rng,
        kors_rng,
        accumulation_threshold=threshold,
    )


@dataclass
class RunRecord:
    label: str
    policy: str
    seed: int
    chosen: list[int] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    instant_regret: list[float] = field(default_factory=list)
    cumulative_regret: list[float] = field(default_factory=list)
    dictionary_sizes: list[int] = field(default_factory=list)
    wall_ns: list[int] = field(default_factory=list)
    error: str | None = None
    states: list[StatePoint] | None = None
    dictionary_rows: list[tuple] | None = None

    @property
    def rounds(self) -> int:
        return len(self.chosen)

    @property
    def total_regret(self) -> float:
        return self.cumulative_regret[-1] if self.cumulative_regret else 0.0

    @property
    def total_wall_ns(self) -> int:
        return int(sum(self.wall_ns))

    @property
    def final_dictionary_size(self) -> int:
        return self.dictionary_sizes[-1] if self.dictionary_sizes else 0


def run_single(
    config: RunConfig, seed: int, collect_states: bool = False
) -> RunRecord:
    """One seeded run; failures abort the loop and mark the partial record."""
    env = _env_for_run(config, seed)
    policy = build_policy(config, seed)
    actions = env.action_grid()
    record = RunRecord(label=config.label, policy=config.policy, seed=seed)
    if collect_states:
        record.states = []
    cum = 0.0
    for _ in range(config.horizon):
        x = env.sample_context()
        try:
            started = time.perf_counter_ns()
            idx = policy.choose(x, actions)
            mid = time.perf_counter_ns()
            outcome = env.step(x, actions[idx])
            s = StatePoint(x, actions[idx])
            resumed = time.perf_counter_ns()
            policy.update(s, outcome.reward)
            finished = time.perf_counter_ns()
        except Exception as exc:  # noqa: BLE001 - any policy failure ends the run
            record.error = f"{type(exc).__name__}: {exc}"
            break
        cum += outcome.best_value - outcome.chosen_value
        record.chosen.append(idx)
        record.rewards.append(outcome.reward)
        record.instant_regret.append(outcome.best_value - outcome.chosen_value)
        record.cumulative_regret.append(cum)
        record.dictionary_sizes.append(policy.dictionary_size)
        record.wall_ns.append((mid - started) + (finished - resumed))
        if collect_states:
            record.states.append(s)
    if config.dump_dictionary and hasattr(policy, "dictionary_rows"):
        record.dictionary_rows = policy.dictionary_rows()
    return record


@dataclass
class SweepCell:
    config: RunConfig
    records: list[RunRecord]

    def _complete(self) -> list[RunRecord]:
        return [r for r in self.records if r.error is None]

    @property
    def total_regrets(self) -> np.ndarray:
        return np.array([r.total_regret for r in self._complete()])

    @property
    def total_wall_ns(self) -> np.ndarray:
        return np.array([float(r.total_wall_ns) for r in self._complete()])

    def regret_curves(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(t, mean, std) of cumulative regret across completed seeds."""
        done = self._complete()
        if not done:
            return np.zeros(0), np.zeros(0), np.zeros(0)
        curves = np.array([r.cumulative_regret for r in done])
        t = np.arange(1, curves.shape[1] + 1)
        return t, curves.mean(axis=0), curves.std(axis=0)

    def time_curves(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(t, mean, std) of cumulative policy wall time in seconds."""
        done = self._complete()
        if not done:
            return np.zeros(0), np.zeros(0), np.zeros(0)
        curves = np.cumsum(np.array([r.wall_ns for r in done]), axis=1) / 1e9
        t = np.arange(1, curves.shape[1] + 1)
        return t, curves.mean(axis=0), curves.std(axis=0)


def max_parallelism(requested: int | None = None) -> int:
    cap = os.environ.get("BANDIT_LAB_THREADS")
    limit = requested if requested is not None else (os.cpu_count() or 1)
    if cap is not None:
        limit = min(limit, max(int(cap), 1))
    return max(limit, 1)


def run_sweep(configs: list[RunConfig], parallelism: int | None = None) -> list[SweepCell]:
    """Run every (config, seed) cell, at most ``parallelism`` at a time.

    Cells share nothing, so the schedule cannot change any result; a crashed
    cell is reported in its record and does not stop its neighbors.
    """
    jobs = [(ci, config, seed) for ci, config in enumerate(configs) for seed in config.seeds]
    results: dict[tuple[int, int], RunRecord] = {}

    def _one(job):
        ci, config, seed = job
        try:
            return ci, seed, run_single(config, seed)
        except Exception as exc:  # noqa: BLE001 - isolate infrastructure failures too
            bad = RunRecord(label=config.label, policy=config.policy, seed=seed)
            bad.error = f"{type(exc).__name__}: {exc}"
            return ci, seed, bad

    workers = max_parallelism(parallelism)
    if workers == 1:
        finished = map(_one, jobs)
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        finished = pool.map(_one, jobs)
    for ci, seed, record in finished:
        results[(ci, seed)] = record
    if workers > 1:
        pool.shutdown()
    return [
        SweepCell(config, [results[(ci, seed)] for seed in config.seeds])
        for ci, config in enumerate(configs)
    ]


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trace(record: RunRecord, path: str) -> None:
    lines = [",".join(TRACE_COLUMNS)]
    for i in range(record.rounds):
        row = (
            i + 1,
            record.chosen[i],
            record.rewards[i],
            record.instant_regret[i],
            record.cumulative_regret[i],
            record.dictionary_sizes[i],
            record.wall_ns[i],
        )
        lines.append(",".join(_format(v) for v in row))
    if record.error is not None:
        lines.append(f"# aborted: {record.error}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def emit_outputs(cells: list[SweepCell], out_dir: str) -> list[str]:
    """Write traces, summary, figures, and optional dictionary dumps.

    Returns the paths written, relative order stable across replays.
    """
    from . import svgplot

    os.makedirs(out_dir, exist_ok=True)
    written = []
    for cell in cells:
        for record in cell.records:
            path = os.path.join(out_dir, f"trace_{record.label}_{record.seed}.csv")
            write_trace(record, path)
            written.append(path)
            if record.dictionary_rows is not None:
                dpath = os.path.join(
                    out_dir, f"dictionary_{record.label}_{record.seed}.csv"
                )
                width = len(record.dictionary_rows[0]) - 3 if record.dictionary_rows else 0
                header = "anchor_index,step_added,inclusion_prob," + ",".join(
                    f"coord_{j}" for j in range(width)
                )
                rows = [header]
                for row in record.dictionary_rows:
                    rows.append(",".join(_format(v) for v in row))
                with open(dpath, "w") as fh:
                    fh.write("\n".join(rows) + "\n")
                written.append(dpath)
    summary_path = os.path.join(out_dir, "summary.csv")
    lines = [
        "label,policy,seeds,mean_total_regret,std_total_regret,"
        "mean_total_wall_s,std_total_wall_s,mean_final_dictionary_size,errors"
    ]
    for cell in cells:
        regrets = cell.total_regrets
        walls = cell.total_wall_ns / 1e9
        sizes = np.array([r.final_dictionary_size for r in cell.records if r.error is None])
        errors = sum(1 for r in cell.records if r.error is not None)
        lines.append(
            ",".join(
                _format(v)
                for v in (
                    cell.config.label,
                    cell.config.policy,
                    len(cell.records),
                    float(regrets.mean()) if regrets.size else math.nan,
                    float(regrets.std()) if regrets.size else math.nan,
                    float(walls.mean()) if walls.size else math.nan,
                    float(walls.std()) if walls.size else math.nan,
                    float(sizes.mean()) if sizes.size else math.nan,
                    errors,
                )
            )
        )
    with open(summary_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    written.append(summary_path)

    regret_fig = svgplot.Figure("Cumulative regret", "round", "regret")
    time_fig = svgplot.Figure("Cumulative policy wall time", "round", "seconds")
    for cell in cells:
        t, mean, std = cell.regret_curves()
        if t.size:
            regret_fig.series.append(svgplot.Series(cell.config.label, t, mean, std))
        t, mean, std = cell.time_curves()
        if t.size:
            time_fig.series.append(svgplot.Series(cell.config.label, t, mean, std))
    for name, fig in (("regret.svg", regret_fig), ("time.svg", time_fig)):
        path = os.path.join(out_dir, name)
        with open(path, "w") as fh:
            fh.write(svgplot.render(fig))
        written.append(path)
    return written


def diagnostic_checkpoints(horizon: int, count: int = 8) -> list[int]:
    """Geometrically spaced round indices ending at the horizon."""
    first = min(10, horizon)
    points = set([horizon])
    value = float(first)
    while value < horizon:
        points.add(int(round(value)))
        value *= 1.7
    return sorted(points)


def write_diagnostics(config: RunConfig, out_dir: str) -> str:
    """Replay the first seed, then report complexity measures at checkpoints."""
    os.makedirs(out_dir, exist_ok=True)
    record = run_single(config, config.seeds[0], collect_states=True)
    if record.error is not None:
        raise RuntimeError(f"replay failed: {record.error}")
    packed = pack(record.states)
    ctx_dim = record.states[0].context.size
    lines = ["t,lambda,d_eff,info_gain,valko_d,prop1_lhs,prop1_rhs"]
    for t in diagnostic_checkpoints(config.horizon):
        k = gram_packed(config.kernel, packed[:t], packed[:t], context_dim=ctx_dim)
        report = complexity_report(
            k, config.lam, config.kernel.kappa, max(config.horizon, 2)
        )
        lines.append(
            ",".join(
                _format(v)
                for v in (
                    t,
                    report.lam,
                    report.d_eff,
                    report.info_gain,
                    report.valko_d,
                    report.prop1_lhs,
                    report.prop1_rhs,
                )
            )
        )
    path = os.path.join(out_dir, "diagnostics.csv")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
