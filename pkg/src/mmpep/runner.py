"""Single runs and preset sweeps, with CSV outputs."""

from __future__ import annotations

import csv
import io
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from . import core
from .config import SWEEP_GRIDS, SWEEP_MODES, ConfigError, ScenarioConfig

NS_PER_S = core.engine.NS_PER_S

TIMESERIES = "timeseries.csv"
SUMMARY = "summary.csv"
ECHO = "resolved_config.yaml"
COMPARISON = "comparison.csv"


@dataclass
class RunResult:
    config: ScenarioConfig
    avg_rate_mbps: float
    delivery_ratio: Optional[float]
    counters: Dict[str, int]
    series: List[tuple]
    measure_start_ns: int
    measure_end_ns: int
    cycle_rates_mbps: List[float] = field(default_factory=list)
    digest: Optional[str] = None
    sim: Any = field(default=None, repr=False, compare=False)

    @property
    def cycle_cv(self) -> Optional[float]:
        return coefficient_of_variation(self.cycle_rates_mbps)

    def summary_row(self) -> Dict[str, Any]:
        row: Dict[str, Any] = dict(self.config.flat())
        row["mode"] = self.config.mode
        row["status"] = "ok"
        row["error"] = ""
        row["avg_rate_mbps"] = _fmt(self.avg_rate_mbps)
        row["delivery_ratio"] = _fmt(self.delivery_ratio)
        row["measure_start_s"] = _fmt(self.measure_start_ns / NS_PER_S)
        row["measure_end_s"] = _fmt(self.measure_end_ns / NS_PER_S)
        row["cycles"] = len(self.cycle_rates_mbps)
        row["cycle_cv"] = _fmt(self.cycle_cv)
        row.update(self.counters)
        return row


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def coefficient_of_variation(values: Sequence[float]) -> Optional[float]:
    if len(values) < 2:
        return None
    mean = statistics.fmean(values)
    if mean == 0:
        return 0.0 if all(v == 0 for v in values) else math.inf
    return statistics.pstdev(values) / mean


def channel_label(schedule, t0: int, t1: int) -> str:
    los = schedule.los_time(t0, t1)
    if los == t1 - t0:
        return "LOS"
    if los == 0:
        return "NLOS"
    return "MIXED"


def simulate(cfg: ScenarioConfig, audit: bool = False, trace: bool = False,
             backend=None) -> RunResult:
    """Run one scenario to completion and collect its metrics."""
    mod = backend if backend is not None else core
    params = cfg.sim_params()
    if backend is not None:
        params = _rebuild_params(params, mod, cfg)
    sim = mod.simulation.Simulation(params, trace=trace, audit=audit)
    sc = cfg["scenario"]
    schedule = params.schedule
    cycle_rates: List[float] = []
    if sc["adaptive"]:
        if not schedule.periodic:
            raise ConfigError("scenario.adaptive", "needs a periodic LOS/NLOS schedule")
        period = schedule.period_ns
        # windows run NLOS-then-LOS, so each holds one outage and its recovery
        start = schedule.los_duration_ns if schedule.start_state == "LOS" else 0
        sim.run_until(start)
        end = start
        while True:
            t0, end = end, end + period
            sim.run_until(end)
            cycle_rates.append(sim.metrics.rate(t0, end) / 1e6)
            n = len(cycle_rates)
            if n >= sc["max_cycles"]:
                break
            cv = coefficient_of_variation(cycle_rates)
            if n >= sc["min_cycles"] and cv is not None and cv < sc["cv_target"]:
                break
        avg = statistics.fmean(cycle_rates)
    else:
        start, end = 0, int(round(sc["duration_s"] * NS_PER_S))
        sim.run_until(end)
        avg = sim.metrics.rate(start, end) / 1e6
    bin_ns = sim.metrics.bin_ns
    series = []
    t = 0
    while t < end:
        t1 = min(t + bin_ns, end)
        series.append((t / NS_PER_S, sim.metrics.rate(t, t1) / 1e6,
                       channel_label(schedule, t, t1)))
        t = t1
    return RunResult(cfg, avg, sim.metrics.delivery_ratio(), sim.counters(), series,
                       start, end, cycle_rates,
                       sim.digest.hexdigest() if sim.digest is not None else None, sim)


def _rebuild_params(params, mod, cfg):
    # a SimParams for another backend: same fields, that backend's schedule class
    sched = params.schedule
    fields = dict(params.__dict__)
    fields["schedule"] = mod.channel.ChannelSchedule(
        sched.los_duration_ns, sched.nlos_duration_ns, start_state=sched.start_state,
        intervals=None if sched.periodic else list(sched.intervals))
    return mod.simulation.SimParams(**fields)


# output writers ----------------------------------------------------------------
def write_csv(path: str, rows: List[Dict[str, Any]], columns: Optional[List[str]] = None) -> None:
    if columns is None:
        columns = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: row.get(k, "") for k in columns})
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def write_run(result: RunResult, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, TIMESERIES), "w", encoding="utf-8", newline="") as fh:
        fh.write("t_s,rate_mbps,channel_state\n")
        for t, rate, state in result.series:
            fh.write(f"{t:.6f},{rate:.6f},{state}\n")
    write_csv(os.path.join(out_dir, SUMMARY), [result.summary_row()])
    with open(os.path.join(out_dir, ECHO), "w", encoding="utf-8") as fh:
        fh.write(result.config.to_yaml())


def run(cfg: ScenarioConfig, out_dir: str) -> RunResult:
    result = simulate(cfg)
    write_run(result, out_dir)
    return result


# sweeps ------------------------------------------------------------------------
def sweep_configs(preset: str, base: Optional[ScenarioConfig] = None,
                  points: Optional[List[Dict[str, Any]]] = None,
                  modes: Sequence[str] = SWEEP_MODES) -> List[tuple]:
    """(label, overrides) pairs for every grid point crossed with every mode."""
    if preset not in SWEEP_GRIDS:
        raise ConfigError("preset", f"unknown preset {preset!r}; choose from "
                          + ", ".join(sorted(SWEEP_GRIDS)))
    grid = SWEEP_GRIDS[preset] if points is None else points
    out = []
    for point in grid:
        for mode in modes:
            label = "_".join([f"{k}{v:g}" if isinstance(v, (int, float)) else f"{k}{v}"
                              for k, v in point.items()] + [mode])
            out.append((label, dict(point, mode=mode)))
    return out


def _sweep_one(job):
    preset, base_data, label, over, out_dir = job
    row: Dict[str, Any] = {"run": label, "mode": over.get("mode", "")}
    for k, v in over.items():
        if k != "mode":
            row[f"channel.{k}"] = v
    try:
        if base_data is None:
            cfg = ScenarioConfig.from_dict(preset=preset, **over)
        else:
            cfg = ScenarioConfig.from_dict(base_data, **over)
        result = simulate(cfg)
        write_run(result, os.path.join(out_dir, label))
        full = result.summary_row()
        full["run"] = label
        return full
    except Exception as exc:  # one failed point must not sink the sweep
        row["status"] = "error"
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row


def sweep(preset: str, out_dir: str, base: Optional[ScenarioConfig] = None,
          points: Optional[List[Dict[str, Any]]] = None,
          modes: Sequence[str] = SWEEP_MODES, jobs: int = 1) -> List[Dict[str, Any]]:
    """Run the preset grid; writes per-run directories plus the aggregates."""
    os.makedirs(out_dir, exist_ok=True)
    base_data = None if base is None else base.data
    jobs_list = [(preset, base_data, label, over, out_dir)
                 for label, over in sweep_configs(preset, base, points, modes)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, jobs_list))
    else:
        rows = [_sweep_one(j) for j in jobs_list]
    columns = ["run", "mode", "status", "error", "avg_rate_mbps", "delivery_ratio"]
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    write_csv(os.path.join(out_dir, SUMMARY), rows, columns)
    write_csv(os.path.join(out_dir, COMPARISON), comparison_table(rows, modes))
    return rows


def comparison_table(rows: List[Dict[str, Any]], modes: Sequence[str] = SWEEP_MODES):
    """One line per scenario point with rate and delivery ratio per mode."""
    points: Dict[str, Dict[str, Any]] = {}
    for row in rows:
        label = row["run"]
        mode = row.get("mode", "")
        point = label[: -len(mode) - 1] if mode and label.endswith("_" + mode) else label
        entry = points.setdefault(point, {"point": point,
                                          "los_s": row.get("channel.los_s", ""),
                                          "nlos_s": row.get("channel.nlos_s", "")})
        ok = row.get("status") == "ok"
        entry[f"rate_{mode}"] = row["avg_rate_mbps"] if ok else "error"
        entry[f"dr_{mode}"] = row["delivery_ratio"] if ok else "error"
    table = []
    for entry in points.values():
        for m in modes:
            entry.setdefault(f"rate_{m}", "")
            entry.setdefault(f"dr_{m}", "")
        try:
            entry["gap_mmpep_pep_mbps"] = _fmt(float(entry["rate_mmpep"]) - float(entry["rate_pep"]))
        except (KeyError, ValueError):
            entry["gap_mmpep_pep_mbps"] = ""
        table.append(entry)
    return table
