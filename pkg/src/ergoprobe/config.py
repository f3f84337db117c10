"""Scenario configuration: INI-style config files, figure presets, validation.

A config is a flat key-value file with fixed sections. Unknown sections or
keys are errors. Presets carry the parameter sets of the paper-style
figures and can be overlaid by a config file and CLI flags (precedence:
preset < file < flags).
"""

from __future__ import annotations

import configparser
import enum
from dataclasses import dataclass, field
from typing import Optional

DEFAULT_DIMENSION_CAP = 50_000


class ScenarioKind(enum.Enum):
    INTEGRABLE_TRANSITION = "integrable_transition"
    MBL = "mbl"
    PXP_SCARS = "pxp_scars"


class InitialStateKind(enum.Enum):
    PROBE_UP_X_BATH_EIGENSTATE = "probe_up_x_bath_eigenstate"
    PROBE_UP_Z_BATH_EIGENSTATE = "probe_up_z_bath_eigenstate"
    EIGENSTATE_INDEX = "eigenstate_index"
    NEEL_Z2 = "neel_z2"
    NEEL_Z2_PRIME = "neel_z2_prime"
    RANDOM_EIGEN_SUPERPOSITION = "random_eigen_superposition"
    # seeded random basis configuration with the probe site up: an ergodic,
    # genuinely out-of-equilibrium reference for observable-decay fits
    RANDOM_PRODUCT_CONFIGURATION = "random_product_configuration"


@dataclass
class InitialStateSpec:
    kind: InitialStateKind = InitialStateKind.PROBE_UP_Z_BATH_EIGENSTATE
    alpha0: Optional[int] = None
    alpha0_fraction: Optional[float] = None
    count: int = 128
    state_seed: int = 0
    reference: str = "uncoupled"  # reference Hamiltonian for eigenstate_index
    bath_energy: Optional[float] = None  # None = mid-spectrum
    pool_window: float = 0.6  # central index window for the random pool

    def resolve_alpha0(self, dim: int) -> int:
        if self.alpha0 is not None:
            if not 0 <= self.alpha0 < dim:
                raise ValueError(f"alpha0={self.alpha0} outside spectrum of dim {dim}")
            return self.alpha0
        if self.alpha0_fraction is not None:
            return min(dim - 1, max(0, round(self.alpha0_fraction * dim)))
        return dim // 2


@dataclass
class TimeGridSpec:
    t_min: float = 0.0
    t_max: Optional[float] = None  # None = 20x Heisenberg-time estimate
    n_points: int = 400
    spacing: str = "linear"  # linear | log


@dataclass
class ScenarioConfig:
    scenario: ScenarioKind
    analysis: str
    n_sites: int = 10
    b_probe: float = 0.01
    bx_bath: float = 0.3
    jx_bath: float = 1.0
    jz_sb: float = 0.2
    jx_sb: float = 0.4
    contact_site: Optional[int] = None
    w_disorder: float = 0.0
    probe_site: str = "first"  # first | central (scar-model probe placement)
    scan_parameter: str = "none"  # coupling | w_disorder | n_sites | none
    scan_values: list = field(default_factory=lambda: [0.0])
    n_realizations: int = 30
    base_seed: int = 1
    threads: int = 1
    time: TimeGridSpec = field(default_factory=TimeGridSpec)
    initial_state: InitialStateSpec = field(default_factory=InitialStateSpec)
    out_dir: str = "out"
    dimension_cap: int = DEFAULT_DIMENSION_CAP
    entropy_kept: str = "half"  # half | probe | comma-separated site list
    microcanonical_window: float = 0.05
    chi: float = 1.0
    fit_t_min: Optional[float] = None
    pxp_analyses: list = field(default_factory=lambda: ["overlaps", "survival", "qfi", "fdt"])

    def __post_init__(self):
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if not self.scan_values:
            raise ValueError("scan_values must be nonempty")

    def kept_sites(self) -> list:
        if self.entropy_kept == "half":
            return list(range(1, self.n_sites // 2 + 1))
        if self.entropy_kept == "probe":
            return [1]
        return [int(s) for s in self.entropy_kept.split(",")]

    def resolved_probe_site(self, n: int) -> int:
        return 1 if self.probe_site == "first" else (n + 1) // 2


# section -> key -> (parser, ScenarioConfig attribute path)
_SCHEMA = {
    "scenario": {
        "kind": ("str", "scenario"),
        "analysis": ("str", "analysis"),
        "dimension_cap": ("int", "dimension_cap"),
        "entropy_kept": ("str", "entropy_kept"),
        "microcanonical_window": ("float", "microcanonical_window"),
        "chi": ("float", "chi"),
        "fit_t_min": ("float", "fit_t_min"),
        "pxp_analyses": ("strlist", "pxp_analyses"),
    },
    "model": {
        "n_sites": ("int", "n_sites"),
        "b_probe": ("float", "b_probe"),
        "bx_bath": ("float", "bx_bath"),
        "jx_bath": ("float", "jx_bath"),
        "jz_sb": ("float", "jz_sb"),
        "jx_sb": ("float", "jx_sb"),
        "contact_site": ("int", "contact_site"),
        "w_disorder": ("float", "w_disorder"),
        "probe_site": ("str", "probe_site"),
    },
    "scan": {
        "parameter": ("str", "scan_parameter"),
        "values": ("floatlist", "scan_values"),
    },
    "ensemble": {
        "n_realizations": ("int", "n_realizations"),
        "base_seed": ("int", "base_seed"),
        "threads": ("int", "threads"),
    },
    "time": {
        "t_min": ("float", "time.t_min"),
        "t_max": ("float", "time.t_max"),
        "n_points": ("int", "time.n_points"),
        "spacing": ("str", "time.spacing"),
    },
    "initial_state": {
        "kind": ("str", "initial_state.kind"),
        "alpha0": ("int", "initial_state.alpha0"),
        "alpha0_fraction": ("float", "initial_state.alpha0_fraction"),
        "count": ("int", "initial_state.count"),
        "state_seed": ("int", "initial_state.state_seed"),
        "reference": ("str", "initial_state.reference"),
        "bath_energy": ("float", "initial_state.bath_energy"),
        "pool_window": ("float", "initial_state.pool_window"),
    },
    "output": {
        "directory": ("str", "out_dir"),
    },
}

_PARSERS = {
    "str": lambda s: s.strip(),
    "int": lambda s: int(s),
    "float": lambda s: float(s),
    "floatlist": lambda s: [float(x) for x in s.split(",") if x.strip()],
    "strlist": lambda s: [x.strip() for x in s.split(",") if x.strip()],
}


def _apply(cfg: ScenarioConfig, section: str, key: str, raw: str) -> None:
    if section not in _SCHEMA:
        raise ValueError(f"unknown config section [{section}]")
    if key not in _SCHEMA[section]:
        raise ValueError(f"unknown key '{key}' in section [{section}]")
    kind, attr = _SCHEMA[section][key]
    value = _PARSERS[kind](raw)
    if attr == "scenario":
        value = ScenarioKind(value)
    if attr == "initial_state.kind":
        value = InitialStateKind(value)
    if attr == "scan_values" and key == "values":
        pass
    if "." in attr:
        head, tail = attr.split(".")
        setattr(getattr(cfg, head), tail, value)
    else:
        setattr(cfg, attr, value)


def _overlay(cfg: ScenarioConfig, sections: dict) -> ScenarioConfig:
    for sec, kv in sections.items():
        for key, raw in kv.items():
            _apply(cfg, sec, key, str(raw))
    return cfg


def load_config(path, base: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    """Parse an INI config file over an optional base (preset) config."""
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    cfg = base if base is not None else ScenarioConfig(
        scenario=ScenarioKind.MBL, analysis="levels")
    sections = {s: dict(parser.items(s)) for s in parser.sections()}
    return _overlay(cfg, sections)


def config_from_preset(name: str) -> ScenarioConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset '{name}'; available: {sorted(PRESETS)}")
    spec = PRESETS[name]
    cfg = ScenarioConfig(scenario=ScenarioKind(spec["scenario"]["kind"]),
                         analysis=spec["scenario"]["analysis"])
    return _overlay(cfg, spec)


# Figure-style parameter presets. The integrable-transition scan variable is
# the overall probe-bath contact strength: scanning 'coupling' to value v
# sets jx_sb = v and jz_sb = (jz_sb/jx_sb ratio of the preset) * v, so the
# weak-coupling limit actually decouples the probe (the bath alone is
# integrable; a finite z contact already makes it chaotic).
PRESETS = {
    "fig1a": {
        "scenario": {"kind": "integrable_transition", "analysis": "levels"},
        "model": {"n_sites": 13, "b_probe": 0.01, "bx_bath": 0.3, "jx_bath": 1.0,
                  "jz_sb": 0.2, "jx_sb": 0.4, "contact_site": 5},
        "scan": {"parameter": "coupling", "values": "0.001, 0.01, 0.1, 0.2, 0.4"},
        "ensemble": {"n_realizations": 1, "base_seed": 1},
    },
    "fig1b": {
        "scenario": {"kind": "mbl", "analysis": "levels"},
        "model": {"n_sites": 10, "b_probe": 0.01, "bx_bath": 0.3, "jx_bath": 1.0,
                  "jz_sb": 0.2, "jx_sb": 0.4, "contact_site": 5},
        "scan": {"parameter": "w_disorder",
                 "values": "0.5, 1, 1.5, 2, 2.5, 3, 3.5, 4, 5, 6"},
        "ensemble": {"n_realizations": 30, "base_seed": 1},
    },
    "fig1c": {
        "scenario": {"kind": "mbl", "analysis": "entropy"},
        "model": {"n_sites": 11, "b_probe": 0.01, "bx_bath": 0.3, "jx_bath": 1.0,
                  "jz_sb": 0.2, "jx_sb": 0.4, "contact_site": 5},
        "scan": {"parameter": "w_disorder", "values": "0.5, 2, 5"},
        "ensemble": {"n_realizations": 30, "base_seed": 1},
        "time": {"t_min": 0.1, "t_max": 1e4, "n_points": 120, "spacing": "log"},
        "initial_state": {"kind": "eigenstate_index", "alpha0": 1000,
                          "reference": "uncoupled"},
    },
    "fig1d": {
        "scenario": {"kind": "mbl", "analysis": "dos"},
        "model": {"n_sites": 13, "b_probe": 0.01, "bx_bath": 0.3, "jx_bath": 1.0,
                  "jz_sb": 0.2, "jx_sb": 0.4, "contact_site": 5},
        "scan": {"parameter": "w_disorder", "values": "0.5, 1, 2, 3, 4, 5"},
        "ensemble": {"n_realizations": 30, "base_seed": 1},
        "initial_state": {"kind": "eigenstate_index", "alpha0": 5500,
                          "reference": "uncoupled"},
    },
    "fig1e": {
        "scenario": {"kind": "pxp_scars", "analysis": "pxp",
                     "pxp_analyses": "overlaps"},
        "model": {"n_sites": 20, "b_probe": 0.4, "probe_site": "first"},
        "scan": {"parameter": "none", "values": "0"},
        "ensemble": {"n_realizations": 1, "base_seed": 1},
    },
    "fig1f": {
        "scenario": {"kind": "pxp_scars", "analysis": "pxp",
                     "pxp_analyses": "overlaps, survival"},
        "model": {"n_sites": 16, "b_probe": 0.4, "probe_site": "first"},
        "scan": {"parameter": "none", "values": "0"},
        "ensemble": {"n_realizations": 1, "base_seed": 1},
        "time": {"t_min": 0.0, "t_max": 50.0, "n_points": 2001, "spacing": "linear"},
        "initial_state": {"kind": "neel_z2", "count": 128, "state_seed": 7},
    },
    "fig2a": {
        "scenario": {"kind": "integrable_transition", "analysis": "qfi"},
        "model": {"n_sites": 11, "b_probe": 0.01, "bx_bath": 0.3, "jx_bath": 1.0,
                  "jz_sb": 0.2, "jx_sb": 0.4, "contact_site": 5},
        "scan": {"parameter": "coupling", "values": "0.001, 0.01, 0.1, 0.4"},
        "ensemble": {"n_realizations": 1, "base_seed": 1},
        "time": {"t_min": 0.05, "n_points": 240, "spacing": "log"},
        "initial_state": {"kind": "probe_up_x_bath_eigenstate"},
    },
    "fig2b": {
        "scenario": {"kind": "mbl", "analysis": "qfi"},
        "model": {"n_sites": 13, "b_probe": 0.01, "bx_bath": 0.3, "jx_bath": 1.0,
                  "jz_sb": 0.2, "jx_sb": 0.4, "contact_site": 5},
        "scan": {"parameter": "w_disorder", "values": "0.5, 1, 2, 3, 4, 5"},
        "ensemble": {"n_realizations": 30, "base_seed": 1},
        "time": {"t_min": 0.05, "n_points": 240, "spacing": "log"},
        "initial_state": {"kind": "eigenstate_index", "alpha0": 5500,
                          "reference": "uncoupled"},
    },
    "fig2c": {
        "scenario": {"kind": "pxp_scars", "analysis": "pxp", "pxp_analyses": "qfi"},
        "model": {"n_sites": 16, "b_probe": 0.4, "probe_site": "first"},
        "scan": {"parameter": "none", "values": "0"},
        "ensemble": {"n_realizations": 1, "base_seed": 1},
        "time": {"t_min": 0.05, "n_points": 200, "spacing": "log"},
        "initial_state": {"kind": "neel_z2", "count": 128, "state_seed": 7},
    },
    "fig3a": {
        "scenario": {"kind": "integrable_transition", "analysis": "flucts"},
        "model": {"n_sites": 13, "b_probe": 0.01, "bx_bath": 0.3, "jx_bath": 1.0,
                  "jz_sb": 0.2, "jx_sb": 0.4, "contact_site": 5},
        "scan": {"parameter": "coupling", "values": "0.01, 0.05, 0.1, 0.2, 0.4"},
        "ensemble": {"n_realizations": 1, "base_seed": 1},
        "time": {"n_points": 600, "spacing": "linear"},
        "initial_state": {"kind": "probe_up_z_bath_eigenstate"},
    },
    "fig3b": {
        "scenario": {"kind": "mbl", "analysis": "flucts"},
        "model": {"n_sites": 13, "b_probe": 0.01, "bx_bath": 0.3, "jx_bath": 1.0,
                  "jz_sb": 0.2, "jx_sb": 0.4, "contact_site": 5},
        "scan": {"parameter": "w_disorder", "values": "0.5, 1, 2, 3, 4, 5"},
        "ensemble": {"n_realizations": 30, "base_seed": 1},
        "time": {"n_points": 600, "spacing": "linear"},
        "initial_state": {"kind": "probe_up_z_bath_eigenstate"},
    },
    "fig3c": {
        "scenario": {"kind": "pxp_scars", "analysis": "pxp", "pxp_analyses": "fdt"},
        "model": {"n_sites": 14, "b_probe": 0.0, "probe_site": "central"},
        "scan": {"parameter": "n_sites", "values": "14, 16, 18"},
        "ensemble": {"n_realizations": 6, "base_seed": 1},
        "time": {"n_points": 600, "spacing": "linear"},
        "initial_state": {"kind": "random_product_configuration", "state_seed": 7},
    },
    "fig4": {
        "scenario": {"kind": "mbl", "analysis": "flucts"},
        "model": {"n_sites": 9, "b_probe": 0.01, "bx_bath": 0.3, "jx_bath": 1.0,
                  "jz_sb": 0.2, "jx_sb": 0.4, "contact_site": 5, "w_disorder": 5.0},
        "scan": {"parameter": "n_sites", "values": "9, 10, 11, 12"},
        "ensemble": {"n_realizations": 10, "base_seed": 1},
        "time": {"n_points": 600, "spacing": "linear"},
        "initial_state": {"kind": "probe_up_z_bath_eigenstate"},
    },
}
