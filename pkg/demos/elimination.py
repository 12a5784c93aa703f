"""E-LEADER discarding misspecified representations.

The ``misspec_toy`` preset mixes six realizable representations with four
whose linear fit is off by more than 1.5 somewhere.  This runs E-LEADER for
a few seeds and reports when each representation was dropped.

    python3 demos/elimination.py [horizon] [runs]
"""
import sys

import numpy as np

from banditlab.harness import make_stream, simulate
from banditlab.learners import Leader
from banditlab.repgen import preset_representation_set


def main(horizon=10_000, runs=3):
    prob, reps = preset_representation_set("misspec_toy")
    pol = Leader(reps, runs, elimination=True, sigma=prob.noise_sigma)
    trace = simulate(prob, pol, make_stream(prob, runs, horizon))[0]
    print(f"{'representation':<14} {'eps':>6}  elimination step per run")
    for i, rep in enumerate(reps):
        times = pol.elimination_time[i]
        cells = " ".join(f"{t + 1:>6}" if t >= 0 else "     -" for t in times)
        print(f"{rep.label:<14} {rep.misspec_level:>6.2f}  {cells}")
    print(f"\nactive set size at the end: {trace.active_size[:, -1].tolist()}")
    print(f"mean final regret: {np.mean(trace.cum_regret[:, -1]):.1f}")


if __name__ == "__main__":
    args = [int(a) for a in sys.argv[1:3]]
    main(*args)
