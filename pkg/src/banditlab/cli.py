"""Command line entry point: ``banditlab {run,preset,check,bounds}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from . import bounds as bd
from .core import BanditLabError, gap_profile, load_problem, save_problem
from .diversity import CONDITIONS, check_mixed_hls, diversity_report, moment_matrix
from .harness import ExperimentConfig, export, run_experiment, summarize
from .repgen import DEFAULT_SEED, PRESETS, preset_representation_set


def _load(problem: str, seed: int):
    if problem in PRESETS:
        return preset_representation_set(problem, seed)[0]
    path = Path(problem)
    if not path.exists():
        raise BanditLabError(f"{problem!r} is neither a preset ({', '.join(PRESETS)}) nor a file")
    return load_problem(path)


def cmd_run(args) -> int:
    config = ExperimentConfig.from_yaml(args.config)
    over = {"preset_seed": args.seed, "horizon": args.horizon, "n_runs": args.runs,
            "out_dir": args.out}
    data = config.to_dict()
    data.update({k: v for k, v in over.items() if v is not None})
    if args.shared_updates:
        data["shared_updates"] = True
    config = ExperimentConfig.from_dict(data)
    traces = run_experiment(config)
    print(summarize(traces).table())
    if config.out_dir:
        files = export(traces, config.out_dir, stride=config.csv_stride, log_x=config.log_x,
                       title=config.problem)
        for kind, path in files.items():
            print(f"wrote {kind}: {path}")
    return 0


def cmd_preset(args) -> int:
    if args.name == "list":
        for name in PRESETS:
            print(name)
        return 0
    if args.name not in PRESETS:
        raise BanditLabError(f"unknown preset {args.name!r}; choose from {', '.join(PRESETS)}")
    prob, reps = preset_representation_set(args.name, args.seed)
    if args.out:
        save_problem(prob, args.out)
        print(f"wrote {args.out}")
    else:
        for rep in reps:
            print(f"{rep.label:<16} d={rep.dim}")
    return 0


def check_payload(problem) -> dict:
    reps = [diversity_report(r, problem).as_dict() for r in problem.representations]
    payload = {"problem": problem.label, "representations": reps}
    if problem.is_finite:
        realizable = [r for r in problem.representations if r.realizable]
        if realizable:
            mixed = check_mixed_hls(realizable, problem)
            payload["mixed_hls"] = {"holds": mixed.holds,
                                    "uncovered": [list(p) for p in mixed.uncovered()],
                                    "reps": [r.label for r in realizable]}
    return payload


def _table(payload: dict) -> str:
    cols = CONDITIONS + ("lambda_hls",)
    lines = [f"{'representation':<18}" + "".join(f"{c:>15}" for c in cols)]
    for r in payload["representations"]:
        cells = ["yes" if r[c] else "no" for c in CONDITIONS] + [f"{r['lambda_hls']:.4g}"]
        lines.append(f"{r['label']:<18}" + "".join(f"{c:>15}" for c in cells))
    mixed = payload.get("mixed_hls")
    if mixed is not None:
        lines.append(f"mixed-HLS over {len(mixed['reps'])} realizable reps: "
                     f"{'yes' if mixed['holds'] else 'no'}")
    return "\n".join(lines)


def cmd_check(args) -> int:
    payload = check_payload(_load(args.problem, args.seed))
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(_table(payload))
    return 0


def bounds_rows(problem, delta: float = 0.01, reg: float = 1.0, horizon: int = 50_000,
                final_display: bool = False):
    """Per-representation ``(label, lambda_hls, tau)`` and the selection envelope.

    The envelope only ranges over realizable representations.
    """
    prof = gap_profile(problem)
    rows, inputs = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for rep in problem.representations:
            mm = moment_matrix(rep, problem, "optimal")
            lam = mm.lambda_min if mm.full_rank else 0.0
            p = bd.BoundInputs(d=rep.dim, L=rep.feature_bound, S=rep.param_bound,
                               sigma=problem.noise_sigma, reg=reg, delta=delta,
                               gap=prof.min_gap, max_gap=prof.max_gap,
                               lambda_hls=lam)
            if rep.realizable:
                inputs.append(p)
            rows.append((rep.label, lam, bd.tau_hls(p, final_display)))
        env = bd.leader_regret_envelope(inputs, horizon, final_display)
    return rows, env


def cmd_bounds(args) -> int:
    prob = preset_representation_set(args.preset, args.seed)[0]
    rows, env = bounds_rows(prob, args.delta, horizon=args.horizon,
                            final_display=args.final_display)
    print(f"{'representation':<18}{'lambda_hls':>14}{'tau':>14}")
    for label, lam, tau in rows:
        print(f"{label:<18}{lam:>14.4g}{tau:>14.4g}")
    print(f"selection regret envelope at n={args.horizon}: {env:.4g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="banditlab", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="preset seed override")
    p.add_argument("--horizon", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--out")
    p.add_argument("--shared-updates", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preset", help="'list' or write a named preset problem")
    p.add_argument("name")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out")
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("check", help="diversity conditions of a preset or problem file")
    p.add_argument("problem")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bounds", help="time-to-constant-regret per representation")
    p.add_argument("--preset", required=True, choices=[n for n in PRESETS if n != "continuous"])
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--horizon", type=int, default=50_000)
    p.add_argument("--final-display", action="store_true",
                   help="use the lambda_hls^-1 variant of the first branch")
    p.set_defaults(func=cmd_bounds)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (BanditLabError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
