"""Compare the numba and pure-numpy integration backends.

Each backend runs in its own interpreter because the selection is made at
import time. Reports wall time per run and the final-state difference.
"""

import argparse
import json
import os
import subprocess
import sys

import numpy as np

WORKER = """
import json, sys, time
import numpy as np
from blfmrac import BACKEND
from blfmrac.scenario import load_preset
from blfmrac.simulation import simulate

horizon, repeats = float(sys.argv[1]), int(sys.argv[2])
sc = load_preset("paper-s4")
models = sc.build()
loop = models.closed_loop()
simulate(loop, initial=models.initial, horizon=min(horizon, 0.1), dt=sc.dt)  # warm-up / compile
times = []
for _ in range(repeats):
    t0 = time.perf_counter()
    traj, rep = simulate(loop, initial=models.initial, horizon=horizon, dt=sc.dt)
    times.append(time.perf_counter() - t0)
z = traj.final_state.to_vector()
print(json.dumps({"backend": BACKEND, "best": min(times), "final": z.tolist(), "ok": rep.ok}))
"""


def run(disable, horizon, repeats):
    env = dict(os.environ, BLFMRAC_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", WORKER, str(horizon), str(repeats)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description="Benchmark numba vs numpy backends")
    parser.add_argument("--horizon", type=float, default=5.0,
                        help="simulated seconds per run (the numpy path is slow)")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    fast = run(False, args.horizon, args.repeats)
    slow = run(True, args.horizon, args.repeats)
    diff = float(np.max(np.abs(np.subtract(fast["final"], slow["final"]))))
    print("bench_backends")
    print(f"horizon_sec={args.horizon} dt=1e-3 repeats={args.repeats}")
    for r in (fast, slow):
        print(f"{r['backend']:<6s} best_wall_sec={r['best']:.4f} monitors_ok={r['ok']}")
    print(f"speedup={slow['best'] / fast['best']:.1f}x")
    print(f"max_final_state_diff={diff:.3e}")


if __name__ == "__main__":
    main()
