"""Seeded multi-run simulation, summaries and exports.

All algorithms in an experiment replay the same per-run stream: run ``r``
draws its contexts and a noise table indexed by (step, arm) from a
generator seeded with ``base_seed + r``.  Regret is the exact
pseudo-regret computed from the mean reward table.
"""
from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from .core import ContextualProblem, load_problem, mean_rewards, sample_contexts
from .learners import Exp4IX, GlrBai, Leader, LinUCB, RegBal
from .repgen import DEFAULT_SEED, PRESETS, preset_representation_set

log = logging.getLogger(__name__)

CSV_HEADER = ["run_id", "t", "algorithm", "inst_regret", "cum_regret", "arm",
              "selecting_rep", "active_set_size"]
N_CHECKPOINTS = 200
WORKERS_ENV = "BANDITLAB_WORKERS"
ALGORITHMS = ("linucb", "leader", "eleader", "exp4ix", "regbal", "glr_bai")


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    """Experiment description; see ``configs/`` for annotated examples."""

    problem: str = "fig1"
    preset_seed: int = DEFAULT_SEED
    algorithms: list = field(default_factory=lambda: [{"type": "linucb"}, {"type": "leader"}])
    horizon: int = 50_000
    n_runs: int = 20
    base_seed: int = 0
    delta: float = 0.01
    reg: float = 1.0
    sigma: Optional[float] = None
    out_dir: Optional[str] = None
    confidence_schedule: str = "fixed"
    shared_updates: bool = False
    csv_stride: int = 1
    log_x: bool = False

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.reg <= 0:
            raise ValueError("reg must be positive")
        if self.confidence_schedule not in ("fixed", "cubic"):
            raise ValueError("confidence_schedule must be 'fixed' or 'cubic'")
        if self.csv_stride < 1:
            raise ValueError("csv_stride must be >= 1")
        for spec in self.algorithms:
            if not isinstance(spec, dict) or spec.get("type") not in ALGORITHMS:
                raise ValueError(f"bad algorithm entry {spec!r}; types: {', '.join(ALGORITHMS)}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)

    @classmethod
    def from_yaml(cls, path) -> "ExperimentConfig":
        data = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(data, dict):
            raise ValueError("config file must hold a mapping")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def resolve_problem(config: ExperimentConfig) -> ContextualProblem:
    if config.problem in PRESETS:
        prob, _ = preset_representation_set(config.problem, config.preset_seed)
    else:
        path = Path(config.problem)
        if not path.exists():
            raise ValueError(f"problem {config.problem!r} is neither a preset nor a file")
        prob = load_problem(path)
    if config.sigma is not None:
        prob = prob.with_representations(prob.representations, noise_sigma=config.sigma)
    return prob


# ---------------------------------------------------------------------------
# streams and traces


@dataclass(frozen=True, eq=False)
class Stream:
    """Pre-drawn contexts ``(R, n[, 2])`` and standard-normal noise ``(R, n, K)``."""
    contexts: np.ndarray
    noise: np.ndarray
    seeds: np.ndarray

    @property
    def n_runs(self) -> int:
        return self.noise.shape[0]

    @property
    def horizon(self) -> int:
        return self.noise.shape[1]

    def runs(self, idx) -> "Stream":
        return Stream(self.contexts[idx], self.noise[idx], self.seeds[idx])


def make_stream(problem: ContextualProblem, n_runs: int, horizon: int, base_seed: int = 0,
                run_ids: Optional[Sequence[int]] = None) -> Stream:
    """Per-run generator ``default_rng(base_seed + r)`` draws contexts then noise."""
    run_ids = np.arange(n_runs) if run_ids is None else np.asarray(run_ids)
    ctx, noise = [], []
    for r in run_ids:
        rng = np.random.default_rng(base_seed + int(r))
        ctx.append(sample_contexts(problem, rng, horizon))
        noise.append(rng.standard_normal((horizon, problem.n_arms)))
    return Stream(np.stack(ctx), np.stack(noise), base_seed + run_ids)


@dataclass(eq=False)
class RegretTrace:
    """Per-step record of one algorithm over all runs, arrays of shape ``(R, n)``.

    ``arm``, ``selecting_rep`` and ``active_size`` are -1 where not
    applicable or where the run was not live.
    """
    algorithm: str
    inst_regret: np.ndarray
    arm: np.ndarray
    seeds: np.ndarray
    selecting_rep: Optional[np.ndarray] = None
    active_size: Optional[np.ndarray] = None
    extras: dict = field(default_factory=dict)

    @property
    def n_runs(self) -> int:
        return self.inst_regret.shape[0]

    @property
    def horizon(self) -> int:
        return self.inst_regret.shape[1]

    @property
    def cum_regret(self) -> np.ndarray:
        return np.cumsum(self.inst_regret, axis=1)

    def final_window_clean(self, frac: float = 0.1, tol: float = 0.0) -> np.ndarray:
        """Per run: no instantaneous regret above ``tol`` in the last ``frac`` of steps."""
        start = self.horizon - max(1, int(round(frac * self.horizon)))
        return np.all(self.inst_regret[:, start:] <= tol, axis=1)

    def last_regret_step(self) -> np.ndarray:
        """Per run: last 1-based step with positive regret (0 if none)."""
        pos = self.inst_regret > 0
        any_pos = pos.any(axis=1)
        last = self.horizon - np.argmax(pos[:, ::-1], axis=1)
        return np.where(any_pos, last, 0)


def simulate(problem: ContextualProblem, policy, stream: Stream, *,
             start=None, stop=None) -> list[RegretTrace]:
    """Run ``policy`` on ``stream``; one trace per policy track.

    ``start``/``stop`` (per run) restrict the live window ``[start, stop)``;
    outside it the policy neither acts nor learns.
    """
    R, n = stream.n_runs, stream.horizon
    start = np.zeros(R, dtype=np.int64) if start is None else np.asarray(start, np.int64)
    stop = np.full(R, n, dtype=np.int64) if stop is None else np.asarray(stop, np.int64)
    T = policy.n_tracks
    inst = np.zeros((T, R, n))
    arm_log = np.full((T, R, n), -1, dtype=np.int16)
    sel_log = np.full((T, R, n), -1, dtype=np.int16) if policy.selecting_rep is not None else None
    act_log = np.full((T, R, n), -1, dtype=np.int16) if policy.active_size is not None else None
    runs = np.arange(R)
    sigma = problem.noise_sigma
    t0 = int(start.min()) if R else 0
    t1 = int(stop.max()) if R else 0
    for t in range(t0, t1):
        live = (start <= t) & (t < stop)
        x = stream.contexts[:, t]
        arms = policy.select(x, t, live)
        means = mean_rewards(problem, x)
        chosen = means[runs[None, :], arms]
        y = chosen + sigma * stream.noise[runs[None, :], t, arms]
        policy.update(x, arms, y, live)
        gap = means.max(axis=1)[None, :] - chosen
        inst[:, :, t] = np.where(live, gap, 0.0)
        arm_log[:, :, t] = np.where(live, arms, -1)
        if sel_log is not None:
            sel_log[:, :, t] = np.where(live, policy.selecting_rep, -1)
        if act_log is not None:
            act_log[:, :, t] = np.where(live, policy.active_size, -1)
    out = []
    for k, name in enumerate(policy.track_names):
        out.append(RegretTrace(name, inst[k], arm_log[k], stream.seeds,
                               None if sel_log is None else sel_log[k],
                               None if act_log is None else act_log[k]))
    return out


def reward_range(problem: ContextualProblem):
    """Affine loss range ``[min mu - 3 sigma, max mu + 3 sigma]``."""
    if problem.is_finite:
        lo, hi = problem.reward_table.min(), problem.reward_table.max()
    else:
        # half-disc rewards satisfy |mu| <= sqrt(2)
        lo, hi = -np.sqrt(2.0), np.sqrt(2.0)
    return float(lo - 3 * problem.noise_sigma), float(hi + 3 * problem.noise_sigma)


def build_policy(spec: dict, problem: ContextualProblem, config: ExperimentConfig,
                 n_runs: int, run_ids=None):
    """Instantiate one algorithm entry of a config."""
    reps = list(problem.representations)
    spec = dict(spec)
    kind = spec.pop("type")
    name = spec.pop("name", None)
    sel = spec.pop("reps", None)
    if sel is not None and sel != "all":
        reps = [reps[i] for i in sel]
    common = dict(delta=config.delta, reg=config.reg, sigma=problem.noise_sigma,
                  schedule=config.confidence_schedule)
    if kind == "linucb":
        pol = LinUCB(reps, n_runs, **common)
    elif kind == "leader":
        pol = Leader(reps, n_runs, name=name, **common)
    elif kind == "eleader":
        pol = Leader(reps, n_runs, elimination=True, name=name,
                     use_rls_for_mse=bool(spec.pop("use_rls_for_mse", False)), **common)
    elif kind == "exp4ix":
        pol = Exp4IX(reps, n_runs, horizon=config.horizon, reward_range=reward_range(problem),
                     seed=int(spec.pop("seed", config.base_seed)), run_ids=run_ids, **common)
    elif kind == "regbal":
        shared = bool(spec.pop("shared_updates", config.shared_updates))
        pol = RegBal(reps, n_runs, shared_updates=shared, name=name, **common)
    elif kind == "glr_bai":
        if not problem.is_finite:
            raise ValueError("GLR-BAI needs a finite problem")
        rep = problem.representations[int(spec.pop("rep", 0))]
        pol = GlrBai(rep, problem, n_runs, name=name, **common)
    else:
        raise ValueError(f"unknown algorithm {kind!r}")
    if spec:
        raise ValueError(f"unknown options for {kind}: {', '.join(sorted(spec))}")
    if name and kind == "linucb" and pol.n_tracks == 1:
        pol._names = [name]
    return pol


def _run_chunk(args):
    problem, spec, config, run_ids = args
    stream = make_stream(problem, len(run_ids), config.horizon, config.base_seed, run_ids)
    pol = build_policy(spec, problem, config, len(run_ids), run_ids)
    traces = simulate(problem, pol, stream)
    for tr in traces:
        if hasattr(pol, "stop_time"):
            tr.extras["stop_time"] = pol.stop_time.copy()
        if hasattr(pol, "elimination_time") and pol.elimination:
            tr.extras["elimination_time"] = pol.elimination_time.copy()
    return traces


def _merge(parts: list[list[RegretTrace]]) -> list[RegretTrace]:
    out = []
    for k in range(len(parts[0])):
        pieces = [p[k] for p in parts]
        cat = lambda a: None if a[0] is None else np.concatenate(a, axis=0)  # noqa: E731
        extras = {}
        for key in pieces[0].extras:
            axis = 1 if pieces[0].extras[key].ndim == 2 else 0
            extras[key] = np.concatenate([p.extras[key] for p in pieces], axis=axis)
        out.append(RegretTrace(pieces[0].algorithm,
                               cat([p.inst_regret for p in pieces]),
                               cat([p.arm for p in pieces]),
                               cat([p.seeds for p in pieces]),
                               cat([p.selecting_rep for p in pieces]),
                               cat([p.active_size for p in pieces]), extras))
    return out


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_experiment(config: ExperimentConfig, problem: Optional[ContextualProblem] = None,
                   workers: Optional[int] = None) -> list[RegretTrace]:
    """Simulate every configured algorithm on the common per-run streams."""
    problem = problem if problem is not None else resolve_problem(config)
    workers = worker_count() if workers is None else workers
    chunks = np.array_split(np.arange(config.n_runs), min(workers, config.n_runs))
    jobs = [(problem, spec, config, c) for spec in config.algorithms for c in chunks]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_chunk, jobs))
    else:
        results = [_run_chunk(j) for j in jobs]
    traces = []
    per_spec = len(chunks)
    for i in range(len(config.algorithms)):
        traces.extend(_merge(results[i * per_spec:(i + 1) * per_spec]))
        log.info("finished %s", config.algorithms[i]["type"])
    return traces


# ---------------------------------------------------------------------------
# summaries and exports


@dataclass(frozen=True, eq=False)
class Summary:
    checkpoints: np.ndarray
    mean: dict
    band: dict
    final_mean: dict
    final_std: dict

    @property
    def ranking(self) -> list[str]:
        return sorted(self.final_mean, key=lambda k: (self.final_mean[k], k))

    def table(self) -> str:
        lines = [f"{'algorithm':<28} {'final mean':>12} {'2 std':>10}"]
        for name in self.ranking:
            lines.append(f"{name:<28} {self.final_mean[name]:>12.3f} "
                         f"{2 * self.final_std[name]:>10.3f}")
        return "\n".join(lines)


def checkpoint_grid(horizon: int, n_points: int = N_CHECKPOINTS) -> np.ndarray:
    """Log-spaced 1-based steps, always including ``1`` and ``horizon``."""
    pts = np.unique(np.round(np.geomspace(1, horizon, n_points)).astype(np.int64))
    return pts


def summarize(traces: Sequence[RegretTrace], n_points: int = N_CHECKPOINTS) -> Summary:
    """Mean and two-standard-deviation band of cumulative regret per algorithm."""
    if not traces:
        raise ValueError("no traces to summarize")
    horizon = traces[0].horizon
    grid = checkpoint_grid(horizon, n_points)
    mean, band, fmean, fstd = {}, {}, {}, {}
    for tr in traces:
        cum = tr.cum_regret[:, grid - 1]
        m = cum.mean(axis=0)
        s = cum.std(axis=0)
        mean[tr.algorithm] = m
        band[tr.algorithm] = (m - 2 * s, m + 2 * s)
        fmean[tr.algorithm] = float(m[-1])
        fstd[tr.algorithm] = float(s[-1])
    return Summary(grid, mean, band, fmean, fstd)


def _fmt(v) -> str:
    return repr(float(v))


def write_csv(traces: Sequence[RegretTrace], path, stride: int = 1) -> Path:
    """Write traces as CSV rows (every ``stride``-th step plus the last)."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            fh.write(traces_to_csv(traces, stride))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def traces_to_csv(traces: Sequence[RegretTrace], stride: int = 1) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for tr in traces:
        cum = tr.cum_regret
        steps = np.arange(0, tr.horizon, stride)
        if tr.horizon and steps[-1] != tr.horizon - 1:
            steps = np.append(steps, tr.horizon - 1)
        for r in range(tr.n_runs):
            for t in steps:
                sel = "" if tr.selecting_rep is None or tr.selecting_rep[r, t] < 0 \
                    else int(tr.selecting_rep[r, t])
                act = "" if tr.active_size is None or tr.active_size[r, t] < 0 \
                    else int(tr.active_size[r, t])
                arm = "" if tr.arm[r, t] < 0 else int(tr.arm[r, t])
                w.writerow([r, int(t) + 1, tr.algorithm, _fmt(tr.inst_regret[r, t]),
                            _fmt(cum[r, t]), arm, sel, act])
    return buf.getvalue()


def read_csv(path) -> list[RegretTrace]:
    """Parse a full-fidelity CSV back into traces."""
    rows: dict = {}
    with Path(path).open() as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError("unexpected CSV header")
        for row in reader:
            rows.setdefault(row["algorithm"], []).append(row)
    out = []
    for name, rs in rows.items():
        R = max(int(r["run_id"]) for r in rs) + 1
        n = max(int(r["t"]) for r in rs)
        inst = np.zeros((R, n))
        arm = np.full((R, n), -1, dtype=np.int16)
        for r in rs:
            i, t = int(r["run_id"]), int(r["t"]) - 1
            inst[i, t] = float(r["inst_regret"])
            arm[i, t] = int(r["arm"]) if r["arm"] else -1
        out.append(RegretTrace(name, inst, arm, np.arange(R)))
    return out


def write_svg(summary: Summary, path, log_x: bool = False, title: str = "") -> Path:
    """Mean cumulative regret with a two-standard-deviation band."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "banditlab"
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in sorted(summary.mean):
        m = summary.mean[name]
        lo, hi = summary.band[name]
        line, = ax.plot(summary.checkpoints, m, label=name)
        ax.fill_between(summary.checkpoints, lo, hi, color=line.get_color(), alpha=0.2)
    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel("cumulative pseudo-regret")
    if title:
        ax.set_title(title)
    ax.legend(fontsize="small")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def export(traces: Sequence[RegretTrace], out_dir, *, stride: int = 1, log_x: bool = False,
           title: str = "") -> dict:
    """Write ``traces.csv`` and, for non-empty traces, ``regret.svg``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {"csv": write_csv(traces, out_dir / "traces.csv", stride)}
    if traces:
        files["svg"] = write_svg(summarize(traces), out_dir / "regret.svg", log_x, title)
    return files
