"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own subprocess because the switch is read at import
time. JIT compilation is excluded by a warm-up call before timing.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

CASES = ("rollout_1e5", "collisions_1e4", "signed_rank_n25", "pilot_goal")


def _best(fn, repeat):
    fn()  # warm-up, triggers compilation under numba
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def run_cases(repeat):
    from scooterloco import host, kernels
    from scooterloco._accel import BACKEND
    from scooterloco.mapping import MotionParams
    from scooterloco.pilot import Pilot
    from scooterloco.sim import AvatarState, walls_array
    from scooterloco.tasks import default_map

    city = default_map()
    params = MotionParams()
    parr = params.as_array()
    walls = walls_array(city.walls)
    rng = np.random.default_rng(0)
    inputs = np.repeat(rng.uniform(-1, 1, size=(2000, 2)), 50, axis=0)
    start = AvatarState(*city.start[:2], city.start[2]).to_array()
    ranks = np.arange(2, 52, 2, dtype=np.int64)  # doubled ranks 1..25

    def rollout():
        kernels.rollout(start.copy(), inputs, parr, 0.01, np.zeros((0, 4)), 0.4)

    def collisions():
        state = start.copy()
        for k in range(10_000):
            kernels.tick(state, inputs[k, 0], inputs[k, 1], parr, 0.01, walls, 0.4)

    def signed_rank():
        kernels.signed_rank_counts(ranks)

    def pilot():
        session = host.single_goal_session(city, "P01", "scooter", "pizzeria")
        host.run_pilot_session(host.Pipeline(city, params, session), Pilot(params))

    fns = dict(zip(CASES, (rollout, collisions, signed_rank, pilot)))
    return {"backend": BACKEND, "seconds": {name: _best(fn, repeat) for name, fn in fns.items()}}


def spawn(disable, repeat):
    env = dict(os.environ)
    if disable:
        env["SCOOTERLOCO_DISABLE_NUMBA"] = "1"
    else:
        env.pop("SCOOTERLOCO_DISABLE_NUMBA", None)
    out = subprocess.run(
        [sys.executable, __file__, "--worker", "--repeat", str(repeat)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="print raw timings as JSON")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.worker:
        print(json.dumps(run_cases(args.repeat)))
        return 0
    numba_res = spawn(False, args.repeat)
    numpy_res = spawn(True, args.repeat)
    if args.json:
        print(json.dumps({"numba": numba_res, "numpy": numpy_res}, indent=2))
        return 0
    if numba_res["backend"] != "numba":
        print("numba is not importable; both columns use the numpy path", file=sys.stderr)
    print(f"{'case':<18}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name in CASES:
        a = numba_res["seconds"][name] * 1e3
        b = numpy_res["seconds"][name] * 1e3
        print(f"{name:<18}{a:>12.3f}{b:>12.3f}{b / a:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
