"""Command line: ``run``, ``sweep`` and ``gamma``.

Exit status is 0 on success, 1 for configuration errors, 2 when a
simulation fails at runtime.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import List, Optional

from . import BACKEND, core
from .config import PRESETS, ConfigError, ScenarioConfig
from .runner import SUMMARY, run, sweep

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

log = logging.getLogger("mmpep")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; bad usage is a config error here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mmpep", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("--config", help="YAML scenario file")
    r.add_argument("--preset", choices=sorted(PRESETS))
    r.add_argument("--mode", choices=("none", "pep", "mmpep"))
    r.add_argument("--seed", type=int)
    r.add_argument("--out", default="out")

    s = sub.add_parser("sweep", help="run a preset's full grid over all three modes")
    s.add_argument("--preset", required=True, choices=sorted(PRESETS))
    s.add_argument("--config", help="YAML file layered over the preset")
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", default="out")

    g = sub.add_parser("gamma", help="print the safety margin and batch size")
    g.add_argument("--alpha", type=float, default=1.12)
    g.add_argument("--beta", type=float, default=10)
    g.add_argument("--sigma", type=float, default=0.1)
    g.add_argument("--epsilon", type=float, default=0.01)
    g.add_argument("--rounding", choices=("ceil", "floor"), default="ceil")
    return p


def _load(args) -> ScenarioConfig:
    over = {"seed": args.seed}
    if getattr(args, "mode", None):
        over["mode"] = args.mode
    if args.config:
        return ScenarioConfig.load(args.config, preset=args.preset, **over)
    if args.preset is None:
        raise ConfigError("--config", "give a scenario file or a --preset")
    return ScenarioConfig.from_dict(preset=args.preset, **over)


def cmd_run(args) -> int:
    cfg = _load(args)
    res = run(cfg, args.out)
    dr = "n/a" if res.delivery_ratio is None else f"{res.delivery_ratio:.4f}"
    print(f"{cfg.name} mode={cfg.mode} avg_rate={res.avg_rate_mbps:.3f} Mbps "
          f"delivery_ratio={dr} -> {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = None
    if args.config or args.seed is not None:
        base = _load(args)
    rows = sweep(args.preset, args.out, base=base, jobs=args.jobs)
    failed = [r for r in rows if r.get("status") != "ok"]
    for r in rows:
        if r.get("status") == "ok":
            print(f"{r['run']:<24} rate={float(r['avg_rate_mbps']):8.3f} Mbps "
                  f"dr={r['delivery_ratio']}")
        else:
            print(f"{r['run']:<24} ERROR {r['error']}")
    print(f"{len(rows) - len(failed)}/{len(rows)} runs ok -> {os.path.join(args.out, SUMMARY)}")
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_gamma(args) -> int:
    sz = core.sizing
    try:
        params = sz.BatchSizingParams(alpha=args.alpha, beta=args.beta, sigma=args.sigma,
                                      epsilon=args.epsilon, rounding=args.rounding)
        gamma = sz.compute_gamma(args.alpha, args.beta, args.sigma, args.epsilon)
    except ValueError as exc:
        raise ConfigError("gamma", str(exc)) from None
    print(f"gamma={gamma:.6f}")
    print(f"raw_batch={params.raw:.4f}")
    print(f"batch_size={sz.batch_size(params)}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    log.debug("backend: %s", BACKEND)
    handler = {"run": cmd_run, "sweep": cmd_sweep, "gamma": cmd_gamma}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
