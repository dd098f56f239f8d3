"""Scenario configuration: YAML loading, validation, presets and the resolved echo."""

from __future__ import annotations

import copy
import random
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import yaml

from . import core

NS_PER_S = core.engine.NS_PER_S
NS_PER_MS = core.engine.NS_PER_MS


class ConfigError(ValueError):
    """Invalid scenario configuration. ``key`` is the dotted path at fault."""

    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"{key}: {message}")
        self.key = key


# Every accepted key with its default. Nested dicts are sections.
DEFAULTS: Dict[str, Dict[str, Any]] = {
    "scenario": {
        "name": "custom",
        "mode": "none",
        "seed": 1,
        "duration_s": 20.0,
        # measure over whole NLOS+LOS cycles until the per-cycle rate settles
        "adaptive": False,
        "min_cycles": 3,
        "max_cycles": 12,
        "cv_target": 0.05,
    },
    "channel": {
        "los_s": 1.0,
        "nlos_s": 1.0,
        "start_state": "LOS",
        "always": None,
        "intervals": None,
        "random": None,
        "slot_us": 125.0,
        "tdd_pattern": "CCDDDUUU",
        "alpha": 1.12,
        "link_rate": None,
        "delivery_latency_slots": 1,
        "uplink_latency_slots": 1,
        "csi_delay_slots": 10,
    },
    "link": {
        "beta_slots": 10,
        "max_link_retx": 3,
        "rlc_buffer_capacity": 1024,
    },
    "wired": {
        "one_way_delay_ms": 10.0,
    },
    "tcp": {
        "app_rate_cap_mbps": 100.0,
        "mss_bytes": 1400,
        "receiver_buffer_bytes": 6 * 1024 * 1024,
        "rto_min_ms": 200.0,
        "initial_rto_ms": 1000.0,
        "initial_cwnd_segments": 10,
        "dupack_threshold": 3,
    },
    "proxy": {
        "cache_bytes": 6 * 1024 * 1024,
        "sigma": 0.1,
        "epsilon": 0.01,
        "batch_rounding": "ceil",
        "proxy_dupack_threshold": 3,
        "proxy_timer_base_ms": None,
    },
    "metrics": {
        "bin_s": 1.0,
    },
}

RANDOM_KEYS = {"mean_los_s", "mean_nlos_s", "min_s", "count"}

_INT_KEYS = {
    "seed", "min_cycles", "max_cycles", "delivery_latency_slots", "uplink_latency_slots",
    "csi_delay_slots", "beta_slots", "max_link_retx", "rlc_buffer_capacity", "mss_bytes",
    "receiver_buffer_bytes", "initial_cwnd_segments", "dupack_threshold", "cache_bytes",
    "proxy_dupack_threshold",
}
_FLOAT_KEYS = {
    "duration_s", "cv_target", "los_s", "nlos_s", "slot_us", "alpha", "link_rate",
    "one_way_delay_ms", "app_rate_cap_mbps", "rto_min_ms", "initial_rto_ms", "sigma",
    "epsilon", "proxy_timer_base_ms", "bin_s",
}
_POSITIVE = _FLOAT_KEYS - {"sigma", "link_rate", "proxy_timer_base_ms", "cv_target"} | {
    "min_cycles", "max_cycles", "beta_slots", "rlc_buffer_capacity", "mss_bytes",
    "receiver_buffer_bytes", "initial_cwnd_segments", "dupack_threshold", "cache_bytes",
    "proxy_dupack_threshold", "delivery_latency_slots", "uplink_latency_slots",
}

# Fast mmWave link and enlarged proxy cache used by the blockage sweeps;
# see the README section on presets for why these differ from the defaults.
SWEEP_LINK_RATE = 11.2
SWEEP_CACHE_BYTES = 32 * 1024 * 1024

PRESETS: Dict[str, Dict[str, Any]] = {
    "fig1": {
        "scenario": {"name": "fig1", "mode": "none", "duration_s": 60.0},
        "channel": {"los_s": 10.0, "nlos_s": 5.0},
        "tcp": {"app_rate_cap_mbps": 50.0},
    },
    "fig5": {
        "scenario": {"name": "fig5", "adaptive": True, "min_cycles": 3, "max_cycles": 12},
        "channel": {"los_s": 1.0, "nlos_s": 1.0, "start_state": "NLOS",
                    "link_rate": SWEEP_LINK_RATE},
        "proxy": {"cache_bytes": SWEEP_CACHE_BYTES},
    },
    "fig6": {
        "scenario": {"name": "fig6", "adaptive": True, "min_cycles": 2, "max_cycles": 3},
        "channel": {"los_s": 100.0, "nlos_s": 10.0, "start_state": "NLOS",
                    "link_rate": SWEEP_LINK_RATE},
        "proxy": {"cache_bytes": SWEEP_CACHE_BYTES},
    },
}

# sweep grids: list of channel overrides, crossed with the three modes
SWEEP_GRIDS: Dict[str, List[Dict[str, float]]] = {
    "fig1": [{}],
    "fig5": [{"los_s": d, "nlos_s": d} for d in (0.5, 1.0, 2.0, 3.0)],
    "fig6": [{"los_s": 100.0, "nlos_s": n} for n in (1.0, 5.0, 10.0, 15.0, 20.0)],
}
SWEEP_MODES = ("none", "pep", "mmpep")


def _merge(base: Dict[str, Any], over: Dict[str, Any], where: str = "") -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in over.items():
        path = f"{where}{key}"
        if key not in out:
            raise ConfigError(path, "unknown key")
        if isinstance(out[key], dict) or (where == "" and key in DEFAULTS):
            if not isinstance(value, dict):
                raise ConfigError(path, "expected a mapping")
            out[key] = _merge(out[key], value, path + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _coerce(path: str, key: str, value: Any) -> Any:
    if value is None:
        return None
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        value = int(value)
    elif key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        value = float(value)
    if key in _POSITIVE and value <= 0:
        raise ConfigError(path, "must be > 0")
    return value


@dataclass
class ScenarioConfig:
    """A fully resolved scenario. ``data`` mirrors :data:`DEFAULTS` section by section."""

    data: Dict[str, Dict[str, Any]]

    # construction ------------------------------------------------------------
    @classmethod
    def from_dict(cls, raw: Optional[Dict[str, Any]] = None, preset: Optional[str] = None,
                  **overrides: Any) -> "ScenarioConfig":
        base = DEFAULTS
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError("preset", f"unknown preset {preset!r}; choose from "
                                  + ", ".join(sorted(PRESETS)))
            base = _merge(DEFAULTS, PRESETS[preset])
        raw = dict(raw or {})
        if "preset" in raw:
            name = raw.pop("preset")
            if preset is None:
                return cls.from_dict(raw, preset=name, **overrides)
        merged = _merge(base, raw)
        for key, value in overrides.items():
            if value is None:
                continue
            section = _section_of(key)
            merged = _merge(merged, {section: {key: value}})
        cfg = cls(merged)
        cfg.validate()
        return cfg

    @classmethod
    def from_yaml(cls, text: str, preset: Optional[str] = None, **overrides: Any) -> "ScenarioConfig":
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError("<file>", f"not valid YAML: {exc}") from None
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError("<file>", "top level must be a mapping")
        return cls.from_dict(raw, preset=preset, **overrides)

    @classmethod
    def load(cls, path: str, preset: Optional[str] = None, **overrides: Any) -> "ScenarioConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
        return cls.from_yaml(text, preset=preset, **overrides)

    # accessors ---------------------------------------------------------------
    def __getitem__(self, section: str) -> Dict[str, Any]:
        return self.data[section]

    @property
    def mode(self) -> str:
        return self.data["scenario"]["mode"]

    @property
    def seed(self) -> int:
        return self.data["scenario"]["seed"]

    @property
    def name(self) -> str:
        return self.data["scenario"]["name"]

    def replace(self, **overrides: Any) -> "ScenarioConfig":
        return ScenarioConfig.from_dict(self.data, **overrides)

    # validation --------------------------------------------------------------
    def validate(self) -> None:
        for section, values in self.data.items():
            for key, value in list(values.items()):
                path = f"{section}.{key}"
                if key in ("intervals", "random", "always"):
                    continue
                values[key] = _coerce(path, key, value)
        sc, ch, px = self.data["scenario"], self.data["channel"], self.data["proxy"]
        try:
            core.proxy.ProxyMode.parse(sc["mode"])
        except ValueError as exc:
            raise ConfigError("scenario.mode", str(exc)) from None
        sc["mode"] = core.proxy.ProxyMode.parse(sc["mode"]).value
        if sc["min_cycles"] > sc["max_cycles"]:
            raise ConfigError("scenario.min_cycles", "must not exceed max_cycles")
        if ch["start_state"] not in ("LOS", "NLOS"):
            raise ConfigError("channel.start_state", "must be LOS or NLOS")
        if ch["always"] not in (None, "LOS", "NLOS"):
            raise ConfigError("channel.always", "must be LOS, NLOS or null")
        if px["batch_rounding"] not in ("ceil", "floor"):
            raise ConfigError("proxy.batch_rounding", "must be ceil or floor")
        if not 0 < px["epsilon"] < 1:
            raise ConfigError("proxy.epsilon", "must lie in (0, 1)")
        if px["sigma"] < 0:
            raise ConfigError("proxy.sigma", "must be >= 0")
        if ch["link_rate"] is not None and ch["link_rate"] <= 0:
            raise ConfigError("channel.link_rate", "must be > 0")
        if ch["csi_delay_slots"] < 0:
            raise ConfigError("channel.csi_delay_slots", "must be >= 0")
        if self.data["link"]["max_link_retx"] < 0:
            raise ConfigError("link.max_link_retx", "must be >= 0")
        pattern = ch["tdd_pattern"]
        if not isinstance(pattern, str) or not pattern or set(pattern) - set("CDU") \
                or "D" not in pattern or "U" not in pattern:
            raise ConfigError("channel.tdd_pattern", "needs C/D/U letters with at least one D and one U")
        if px["cache_bytes"] < self.data["tcp"]["mss_bytes"]:
            raise ConfigError("proxy.cache_bytes", "must hold at least one segment")
        self._check_intervals()
        self._check_random()
        if sc["adaptive"] not in (True, False):
            raise ConfigError("scenario.adaptive", "must be true or false")

    def _check_intervals(self) -> None:
        iv = self.data["channel"]["intervals"]
        if iv is None:
            return
        if not isinstance(iv, list) or not iv:
            raise ConfigError("channel.intervals", "expected a non-empty list of [duration_s, state]")
        out = []
        for i, item in enumerate(iv):
            path = f"channel.intervals[{i}]"
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                raise ConfigError(path, "expected [duration_s, state]")
            d, state = item
            if isinstance(d, bool) or not isinstance(d, (int, float)) or d <= 0:
                raise ConfigError(path, "duration must be a positive number")
            if state not in ("LOS", "NLOS"):
                raise ConfigError(path, "state must be LOS or NLOS")
            out.append([float(d), state])
        self.data["channel"]["intervals"] = out

    def _check_random(self) -> None:
        rnd = self.data["channel"]["random"]
        if rnd is None:
            return
        if not isinstance(rnd, dict):
            raise ConfigError("channel.random", "expected a mapping")
        for key in rnd:
            if key not in RANDOM_KEYS:
                raise ConfigError(f"channel.random.{key}", "unknown key")
        for key in ("mean_los_s", "mean_nlos_s"):
            if key not in rnd:
                raise ConfigError(f"channel.random.{key}", "required")
            v = rnd[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
                raise ConfigError(f"channel.random.{key}", "must be a positive number")
        count = rnd.get("count", 64)
        if isinstance(count, bool) or not isinstance(count, int) or count < 2:
            raise ConfigError("channel.random.count", "must be an integer >= 2")

    # conversion --------------------------------------------------------------
    def schedule(self):
        ch = self.data["channel"]
        CS = core.channel.ChannelSchedule
        if ch["always"] is not None:
            return CS.always(ch["always"])
        if ch["intervals"] is not None:
            return CS(intervals=[(_ns(d), s) for d, s in ch["intervals"]])
        if ch["random"] is not None:
            return CS(intervals=random_intervals(ch["random"], self.seed, ch["start_state"]))
        return CS(_ns(ch["los_s"]), _ns(ch["nlos_s"]), start_state=ch["start_state"])

    def sim_params(self):
        sc, ch, ln = self.data["scenario"], self.data["channel"], self.data["link"]
        wd, tc, px = self.data["wired"], self.data["tcp"], self.data["proxy"]
        base = px["proxy_timer_base_ms"]
        return core.simulation.SimParams(
            mode=sc["mode"],
            seed=sc["seed"],
            schedule=self.schedule(),
            slot_ns=int(round(ch["slot_us"] * 1000)),
            tdd_pattern=ch["tdd_pattern"],
            alpha=ch["alpha"],
            link_rate=ch["link_rate"],
            delivery_latency_slots=ch["delivery_latency_slots"],
            uplink_latency_slots=ch["uplink_latency_slots"],
            csi_delay_slots=ch["csi_delay_slots"],
            beta_slots=ln["beta_slots"],
            max_link_retx=ln["max_link_retx"],
            rlc_buffer_capacity=ln["rlc_buffer_capacity"],
            wired_one_way_delay_ns=int(round(wd["one_way_delay_ms"] * NS_PER_MS)),
            mss_bytes=tc["mss_bytes"],
            app_rate_cap_bps=tc["app_rate_cap_mbps"] * 1e6,
            initial_cwnd_segments=tc["initial_cwnd_segments"],
            rto_min_ns=int(round(tc["rto_min_ms"] * NS_PER_MS)),
            initial_rto_ns=int(round(tc["initial_rto_ms"] * NS_PER_MS)),
            dupack_threshold=tc["dupack_threshold"],
            receiver_buffer_bytes=tc["receiver_buffer_bytes"],
            cache_bytes=px["cache_bytes"],
            sigma=px["sigma"],
            epsilon=px["epsilon"],
            batch_rounding=px["batch_rounding"],
            proxy_dupack_threshold=px["proxy_dupack_threshold"],
            proxy_timer_base_ns=None if base is None else int(round(base * NS_PER_MS)),
            bin_ns=_ns(self.data["metrics"]["bin_s"]),
        )

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=False, default_flow_style=None)

    def flat(self) -> Dict[str, Any]:
        """Scalar parameters as ``section.key`` columns, for summary rows."""
        out = {}
        for section, values in self.data.items():
            for key, value in values.items():
                if isinstance(value, (list, dict)):
                    continue
                out[f"{section}.{key}"] = value
        return out


def _ns(seconds: float) -> int:
    return int(round(seconds * NS_PER_S))


def _section_of(key: str) -> str:
    for section, keys in DEFAULTS.items():
        if key in keys:
            return section
    raise ConfigError(key, "unknown key")


def random_intervals(shape: Dict[str, Any], seed: int, start_state: str = "LOS"):
    """Exponentially distributed LOS/NLOS durations drawn from ``seed``."""
    rng = random.Random(seed)
    count = shape.get("count", 64)
    floor = shape.get("min_s", 0.01)
    state = start_state
    out = []
    for _ in range(count):
        mean = shape["mean_los_s"] if state == "LOS" else shape["mean_nlos_s"]
        out.append((_ns(max(rng.expovariate(1.0 / mean), floor)), state))
        state = "NLOS" if state == "LOS" else "LOS"
    return out
