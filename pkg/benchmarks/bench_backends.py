"""Compare the compiled and pure-Python cores on one scenario.

    python benchmarks/bench_backends.py --mode mmpep --seconds 5 --repeat 3

Both backends must produce the same dispatch digest; the script exits 1 if
they do not, or if the compiled extension is missing.
"""

import argparse
import statistics
import sys
import time

from mmpep import _backend
from mmpep.config import ScenarioConfig
from mmpep.runner import simulate


def time_backend(ns, cfg, repeat):
    walls = []
    res = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        res = simulate(cfg, trace=True, backend=ns)
        walls.append(time.perf_counter() - t0)
    return statistics.median(walls), res


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mode", choices=("none", "pep", "mmpep"), default="mmpep")
    ap.add_argument("--seconds", type=float, default=5.0, help="simulated seconds")
    ap.add_argument("--los", type=float, default=1.0)
    ap.add_argument("--nlos", type=float, default=1.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not _backend.compiled_available():
        print("compiled extension not built; run: python setup.py build_ext --inplace")
        return 1
    cfg = ScenarioConfig.from_dict({"scenario": {"duration_s": args.seconds},
                                    "channel": {"los_s": args.los, "nlos_s": args.nlos}},
                                   mode=args.mode)
    results = {}
    for name, package in (("python", "mmpep.core"), ("cython", "mmpep._ccore")):
        wall, res = time_backend(_backend.load(package), cfg, args.repeat)
        results[name] = (wall, res)
        events = res.counters["events"]
        print(f"{name:<7} wall={wall:7.3f} s  events={events}  "
              f"{events / wall / 1e3:8.1f} k events/s  rate={res.avg_rate_mbps:.3f} Mbps")
    py, cy = results["python"], results["cython"]
    print(f"speedup {py[0] / cy[0]:.2f}x")
    if py[1].digest != cy[1].digest:
        print("backends disagree: dispatch digests differ")
        return 1
    print("digests match")
    return 0


if __name__ == "__main__":
    sys.exit(main())
