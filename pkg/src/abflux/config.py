"""Run configuration: TOML (or JSON) files with ``[section]`` headers.

Schema::

    [params]        e, m, B, Phi0
    [params.potential]  kind = "zero" | "sinusoidal" | "tabulated", ...
    [initial]       form = "action_angle": s, phi1, phi2, I1, I2
                    form = "phase":        s, q = [..], p = [..], winding (optional)
    [run]           s_span = [a, b]
    [integrator]    any IntegratorConfig field
    [outputs]       trajectory_csv, events_json, constants_json, plot_data,
                    error_table_csv, sweep_csv, averaged_csv (file names)
    [sweep]         grid lists over any of B, Phi0, I1, I2
    [average]       f_values, T, dt
    [asymptotics]   future_window, past_window (optional [a, b])
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Union

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python < 3.11
    import tomli
import tomli_w

from .actionangle import ActionAngleState
from .dynamics import IntegratorConfig
from .errors import ABFluxError, ConfigError
from .model import PhaseState, SinusoidalPotential, SystemParams

OUTPUT_KEYS = ("trajectory_csv", "events_json", "constants_json", "plot_data",
               "error_table_csv", "sweep_csv", "averaged_csv")
SWEEP_KEYS = ("B", "Phi0", "I1", "I2")
AA_KEYS = ("s", "phi1", "phi2", "I1", "I2")
SECTIONS = ("params", "initial", "run", "integrator", "outputs", "sweep", "average", "asymptotics")


@dataclass
class RunConfig:
    params: SystemParams
    initial: Union[PhaseState, ActionAngleState]
    s_span: tuple
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    outputs: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    average: dict = field(default_factory=dict)
    asymptotics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.s_span = tuple(float(x) for x in self.s_span)
        if len(self.s_span) != 2 or not all(math.isfinite(x) for x in self.s_span):
            raise ConfigError("s_span must be two finite numbers")
        bad = set(self.outputs) - set(OUTPUT_KEYS)
        if bad:
            raise ConfigError(f"unknown output keys: {sorted(bad)}")
        names = list(self.outputs.values())
        if len(set(names)) != len(names):
            raise ConfigError("output paths must be distinct")
        bad = set(self.sweep) - set(SWEEP_KEYS)
        if bad:
            raise ConfigError(f"sweep grid may only vary {SWEEP_KEYS}, got {sorted(bad)}")
        if {"I1", "I2"} & set(self.sweep) and not isinstance(self.initial, ActionAngleState):
            raise ConfigError("sweeping actions needs an action-angle initial condition")

    # -- dict form ---------------------------------------------------------

    def to_dict(self) -> dict:
        ini = self.initial
        if isinstance(ini, ActionAngleState):
            initial = {"form": "action_angle", **{k: getattr(ini, k) for k in AA_KEYS}}
        else:
            initial = {"form": "phase", "s": ini.s, "q": [float(x) for x in ini.q],
                       "p": [float(x) for x in ini.p], "winding": ini.winding}
        d = {"params": self.params.to_dict(), "initial": initial,
             "run": {"s_span": list(self.s_span)}, "integrator": self.integrator.to_dict(),
             "outputs": dict(self.outputs)}
        for name in ("sweep", "average", "asymptotics"):
            if getattr(self, name):
                d[name] = dict(getattr(self, name))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a table")
        unknown = set(d) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown sections: {sorted(unknown)}")
        try:
            params = SystemParams.from_dict(d.get("params", {}))
            initial = _initial_from_dict(d.get("initial"))
            run = d.get("run", {})
            if "s_span" not in run:
                raise ConfigError("[run] s_span is required")
            integ = d.get("integrator", {})
            known = {f.name for f in fields(IntegratorConfig)}
            if set(integ) - known:
                raise ConfigError(f"unknown integrator keys: {sorted(set(integ) - known)}")
            return cls(params, initial, tuple(run["s_span"]), IntegratorConfig(**integ),
                       dict(d.get("outputs", {})), dict(d.get("sweep", {})),
                       dict(d.get("average", {})), dict(d.get("asymptotics", {})))
        except ConfigError:
            raise
        except (ABFluxError, ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.to_dict() == other.to_dict()

    # -- text form ---------------------------------------------------------

    def to_toml(self) -> str:
        return tomli_w.dumps(_drop_none(self.to_dict()))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _drop_none(d):
    if isinstance(d, dict):
        return {k: _drop_none(v) for k, v in d.items() if v is not None}
    return d


def _initial_from_dict(d) -> Union[PhaseState, ActionAngleState]:
    if not isinstance(d, dict):
        raise ConfigError("[initial] section is required")
    form = d.get("form")
    has_aa = any(k in d for k in ("phi1", "phi2", "I1", "I2"))
    has_ph = any(k in d for k in ("q", "p"))
    if has_aa and has_ph:
        raise ConfigError("give exactly one initial-condition form")
    if form is None:
        form = "action_angle" if has_aa else "phase"
    if form == "action_angle":
        missing = [k for k in AA_KEYS[1:] if k not in d]
        if missing:
            raise ConfigError(f"[initial] missing {missing}")
        return ActionAngleState(float(d.get("s", 0.0)), *(float(d[k]) for k in AA_KEYS[1:]))
    if form == "phase":
        if "q" not in d or "p" not in d:
            raise ConfigError("[initial] phase form needs q and p")
        return PhaseState(float(d.get("s", 0.0)), d["q"], d["p"], d.get("winding"))
    raise ConfigError(f"unknown initial form {form!r}")


def parse_config(text: str, fmt: str = "toml") -> RunConfig:
    try:
        data = json.loads(text) if fmt == "json" else tomli.loads(text)
    except (json.JSONDecodeError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from exc
    return RunConfig.from_dict(data)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    fmt = "json" if path.suffix.lower() == ".json" or text.lstrip().startswith("{") else "toml"
    return parse_config(text, fmt)


def preset(name: str) -> RunConfig:
    """Built-in configurations; ``fig1`` is the spiral-then-drift example."""
    if name != "fig1":
        raise ConfigError(f"unknown preset {name!r}")
    params = SystemParams(1.0, 1.0, 1.0, 2 * math.pi, SinusoidalPotential(1.0 / 3.0))
    return RunConfig(params, ActionAngleState(0.0, 0.3, 1.1, 1.0, 20.0), (0.0, 120.0),
                     IntegratorConfig(sample_step=0.02),
                     {"trajectory_csv": "fig1_trajectory.csv", "events_json": "fig1_events.json",
                      "plot_data": "fig1_plot.dat"})
