"""LEADER against single-representation LinUCB on the ``fig1`` preset.

Runs a short version of the main experiment (5 seeds, 10k steps by
default), prints the final mean regret per learner and writes the CSV and
SVG to ``demo_out/leader_vs_linucb``.  The HLS representation's LinUCB
should flatten out; the deranked ones keep paying.

    python3 demos/leader_vs_linucb.py [horizon] [runs]
"""
import sys

from banditlab.harness import ExperimentConfig, export, run_experiment, summarize


def main(horizon=10_000, runs=5):
    cfg = ExperimentConfig(problem="fig1", horizon=horizon, n_runs=runs,
                           algorithms=[{"type": "linucb"}, {"type": "leader"}])
    traces = run_experiment(cfg)
    print(summarize(traces).table())
    print("\nruns with no regret in the last 10% of steps")
    for tr in traces:
        print(f"  {tr.algorithm:<24} {int(tr.final_window_clean().sum())}/{runs}")
    files = export(traces, "demo_out/leader_vs_linucb", stride=50, log_x=True, title="fig1")
    print(f"\nwrote {files['csv']} and {files['svg']}")


if __name__ == "__main__":
    args = [int(a) for a in sys.argv[1:3]]
    main(*args)
