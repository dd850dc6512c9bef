"""Scenario registry and config files.

A scenario is a tree of small dataclasses. Config files are YAML with
the same nesting; any key that is not a field is rejected::

    id: rd1d
    fom:
      grid: 4000
    decomposition:
      max_iter: 4000
    rom:
      ranks: [4]
      sample_fractions: [1.0, 0.2]
"""
from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from ..errors import ConfigError
from ..front import FrontFunction

SCENARIO_IDS = ("moving_disk", "topo_merge", "advect1d", "rd1d", "ard2d", "pod_decay")


@dataclass
class FomConfig:
    grid: int = 128
    T: float = 1.0
    n_t: int = 101
    rtol: float = 1e-6
    atol: float = 1e-8
    # scenario specific physical constants
    params: dict = field(default_factory=dict)


@dataclass
class ParamSet:
    train: list = field(default_factory=list)
    test: list = field(default_factory=list)


@dataclass
class FrontConfig:
    kind: str = "tanh"
    lam: float = 1.0

    def build(self) -> FrontFunction:
        return FrontFunction(self.kind, self.lam)


@dataclass
class DecompConfig:
    tau: float = 1.0
    max_iter: int = 3000
    momentum: float = 0.0
    tol: float = 0.0
    init: str = "zero"
    # ALM settings
    lambda_reg: float = 1e-3
    mu0: float = 1e-2
    rho: float = 1.01
    alm_err_tol: float = 1e-3
    alm_max_iter: int = 3000


@dataclass
class RomConfig:
    ranks: list = field(default_factory=lambda: [4])
    sample_fractions: list = field(default_factory=lambda: [1.0])
    rtol: float = 1e-6
    atol: float = 1e-8


@dataclass
class KoopmanConfig:
    p: int = 20
    sweep_resolution: int = 8


@dataclass
class Scenario:
    id: str
    fom: FomConfig = field(default_factory=FomConfig)
    params: ParamSet = field(default_factory=ParamSet)
    front: FrontConfig = field(default_factory=FrontConfig)
    decomposition: DecompConfig = field(default_factory=DecompConfig)
    rom: RomConfig = field(default_factory=RomConfig)
    koopman: KoopmanConfig = field(default_factory=KoopmanConfig)
    methods: list = field(default_factory=lambda: ["pod", "ftr"])
    seed: int = 0
    full: bool = False

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def key(self) -> str:
        """Stable text form, used to tag cached artifacts."""
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


def _defaults(sid: str, full: bool) -> Scenario:
    if sid == "moving_disk":
        return Scenario(
            sid,
            FomConfig(grid=129, T=1.0, n_t=200, params={"R": 0.22}),
            front=FrontConfig("tanh", 0.01),
            decomposition=DecompConfig(tau=0.1, max_iter=300, momentum=0.9),
            rom=RomConfig(ranks=list(range(1, 11))),
            koopman=KoopmanConfig(p=20),
        )
    if sid == "topo_merge":
        return Scenario(
            sid,
            FomConfig(grid=256, T=0.5, n_t=101, params={"offset": 0.9}),
            front=FrontConfig("tanh", 0.1),
            decomposition=DecompConfig(tau=0.4, max_iter=300, init="inverse"),
            rom=RomConfig(ranks=[1, 2, 3, 4]),
        )
    if sid == "advect1d":
        return Scenario(
            sid,
            FomConfig(grid=1000, T=2.5, n_t=101, params={"half_width": 20.0, "amp": 5.0}),
            ParamSet(train=[-2.0, 2.0], test=["sine"]),
            front=FrontConfig("tanh", 0.4),
            decomposition=DecompConfig(tau=1.0, max_iter=3000),
            rom=RomConfig(ranks=[2, 4, 6, 8, 10, 15]),
        )
    if sid == "rd1d":
        return Scenario(
            sid,
            FomConfig(grid=4000, T=1.0, n_t=101, params={"half_width": 15.0}),
            ParamSet(train=[0.2, 1.0], test=[0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]),
            front=FrontConfig("tanh", 1.0),
            decomposition=DecompConfig(tau=4.0, max_iter=8000),
            rom=RomConfig(ranks=list(range(2, 10)), sample_fractions=[1.0, 0.2]),
        )
    if sid == "ard2d":
        if full:
            grid, train, test = 512, [10.0, 30.0, 50.0, 70.0, 100.0], [20.0, 40.0, 60.0, 80.0, 90.0]
        else:
            grid, train, test = 128, [10.0, 100.0], [40.0]
        return Scenario(
            sid,
            FomConfig(grid=grid, T=3.0, n_t=101,
                      params={"omega0": 0.05, "r0": 5e-4, "c": 0.1, "kappa": 1e-3}),
            ParamSet(train=train, test=test),
            front=FrontConfig("sigmoid", 1.0),
            decomposition=DecompConfig(tau=4.0, max_iter=500),
            rom=RomConfig(ranks=[8], sample_fractions=[1.0]),
            full=full,
        )
    if sid == "pod_decay":
        return Scenario(
            sid,
            FomConfig(grid=1000, T=1.0, n_t=500),
            ParamSet(train=[2.0 ** -k for k in range(7)]),
            methods=["pod"],
        )
    raise ConfigError(f"unknown scenario {sid!r}; choose from {', '.join(SCENARIO_IDS)}")


def default_scenario(sid: str, full: bool = False) -> Scenario:
    """Built-in defaults. ``full=True`` selects the large ard2d sweep."""
    return _defaults(sid, full)


def _apply(obj, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    names = {f.name: f for f in dataclasses.fields(obj)}
    for key, value in data.items():
        where = f"{path}.{key}" if path else key
        if key not in names:
            raise ConfigError(f"unknown config key {where!r}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            _apply(current, value, where)
        elif isinstance(current, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where}: expected a mapping")
            current.update(value)
        elif isinstance(current, list):
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{where}: expected a list")
            setattr(obj, key, list(value))
        elif isinstance(current, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{where}: expected true/false")
            setattr(obj, key, value)
        elif isinstance(current, (int, float)):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{where}: expected a number, got {value!r}")
            setattr(obj, key, type(current)(value) if isinstance(current, float) else value)
        else:
            setattr(obj, key, value)


def _validate(s: Scenario) -> Scenario:
    if s.front.kind not in ("tanh", "sigmoid"):
        raise ConfigError(f"front.kind must be tanh or sigmoid, got {s.front.kind!r}")
    if not s.front.lam > 0:
        raise ConfigError("front.lam must be positive")
    bad = [m for m in s.methods if m not in ("pod", "ftr", "ftr_alm")]
    if bad:
        raise ConfigError(f"unknown methods {bad}")
    if any(int(r) < 1 for r in s.rom.ranks):
        raise ConfigError("ranks must be >= 1")
    if any(not 0 < float(x) <= 1 for x in s.rom.sample_fractions):
        raise ConfigError("sample fractions must lie in (0, 1]")
    if s.decomposition.init not in ("zero", "inverse"):
        raise ConfigError(f"decomposition.init must be zero or inverse, got {s.decomposition.init!r}")
    if s.koopman.p < 2 or s.koopman.p % 2:
        raise ConfigError("koopman.p must be a positive even number")
    return s


def scenario_from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict) or "id" not in data:
        raise ConfigError("config needs an 'id' entry")
    data = copy.deepcopy(data)
    sid = data.pop("id")
    full = data.get("full", False)
    s = default_scenario(sid, bool(full))
    _apply(s, data, "")
    return _validate(s)


def load_config(path) -> Scenario:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return scenario_from_dict(data)


def dump_config(s: Scenario, path) -> None:
    Path(path).write_text(yaml.safe_dump(s.to_dict(), sort_keys=False))


def resolve(sid_or_path: str, full: bool = False, overrides: Optional[dict] = None) -> Scenario:
    """Scenario from a registry id or a YAML file, with optional overrides."""
    p = Path(sid_or_path)
    if sid_or_path not in SCENARIO_IDS and p.suffix in (".yaml", ".yml") and p.exists():
        s = load_config(p)
    else:
        s = default_scenario(sid_or_path, full)
    if overrides:
        _apply(s, overrides, "")
        _validate(s)
    return s
