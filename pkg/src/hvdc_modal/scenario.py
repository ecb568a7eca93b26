"""Scenario files: YAML with sections system, topology, fault, relay, sim.

All physical quantities are plain numbers in SI base units (ohm, henry,
farad, volt, second, ampere).  Strings such as ``"130 mH"`` are rejected
rather than guessed.  Omitted entries take the library defaults.

Example::

    id: ptp-10pct
    topology:
      clr: 0.09
    fault:
      kind: InternalPTP
      location_d: 0.1
      r_f: 0
    relay:
      snr_db: 30
      seed: 7
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields
from typing import NamedTuple

import yaml

from .errors import ScenarioParseError
from .relay import RelaySettings
from .system import (ClrSet, FaultKind, FaultScenario, LineParams, MmcParams, SystemParams,
                     Topology)
from .transient import SimSettings

SECTIONS = ("id", "system", "topology", "fault", "relay", "sim")
LINE_NAMES = ("12", "14", "23")


@dataclass(frozen=True)
class NoiseSpec:
    snr_db: float = math.inf
    seed: int = 0


class Scenario(NamedTuple):
    system: SystemParams
    topology: Topology
    fault: FaultScenario
    relay: RelaySettings
    sim: SimSettings
    noise: NoiseSpec = NoiseSpec()
    id: str = "scenario"


# -- YAML with line numbers ----------------------------------------------------

def _lines(node, path=(), out=None):
    """Map dotted key paths to 1-based source lines."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            p = path + (str(k.value),)
            out[".".join(p)] = k.start_mark.line + 1
            _lines(v, p, out)
    return out


class _Reader:
    def __init__(self, text):
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ScenarioParseError(f"malformed YAML: {exc}",
                                     line=None if mark is None else mark.line + 1) from exc
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ScenarioParseError("scenario must be a mapping of sections", line=1)
        self.data = data
        self.where = _lines(node) if node is not None else {}

    def fail(self, msg, path):
        raise ScenarioParseError(msg, field=path, line=self.where.get(path))

    def section(self, name, parent=None):
        path = name if parent is None else f"{parent}.{name}"
        src = self.data if parent is None else self._get(parent)
        val = src.get(name) if isinstance(src, dict) else None
        if val is None:
            return {}
        if not isinstance(val, dict):
            self.fail("expected a mapping", path)
        return {str(k): v for k, v in val.items()}

    def _get(self, dotted):
        cur = self.data
        for part in dotted.split("."):
            cur = cur.get(part) if isinstance(cur, dict) else None
        return cur or {}

    def check_keys(self, mapping, allowed, path):
        for key in mapping:
            if key not in allowed:
                sub = f"{path}.{key}" if path else key
                self.fail(f"unknown entry '{key}' (allowed: {', '.join(allowed)})", sub)

    def number(self, value, path, integer=False):
        if isinstance(value, bool):
            self.fail("expected a number, got a boolean", path)
        if isinstance(value, str):
            try:
                value = float(value)
            except ValueError:
                self.fail(f"expected a plain number in SI base units, got {value!r}", path)
        if not isinstance(value, (int, float)):
            self.fail(f"expected a number, got {type(value).__name__}", path)
        if integer:
            if float(value) != int(value):
                self.fail("expected an integer", path)
            return int(value)
        return float(value)

    def numbers(self, mapping, path, names, integer=()):
        out = {}
        for name in names:
            if name in mapping and mapping[name] is not None:
                out[name] = self.number(mapping[name], f"{path}.{name}", name in integer)
        return out

    def build(self, cls, kwargs, path):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("default")
                return cls(**kwargs)
        except (ValueError, TypeError) as exc:
            bad = next((k for k in kwargs if k in str(exc)), None)
            self.fail(str(exc), f"{path}.{bad}" if bad else path)


_MMC = tuple(f.name for f in fields(MmcParams))
_LINE = tuple(f.name for f in fields(LineParams))
_RELAY = tuple(f.name for f in fields(RelaySettings))
_SIM = tuple(f.name for f in fields(SimSettings))


def _parse_mmc(r: _Reader, path, base: dict):
    sec = r.section(path.split(".")[-1], "system")
    r.check_keys(sec, _MMC, path)
    kw = dict(base)
    kw.update(r.numbers(sec, path, _MMC, integer=("sm_count",)))
    return kw


def load_scenario(text) -> Scenario:
    """Parse and validate scenario text."""
    r = _Reader(text)
    r.check_keys(r.data, SECTIONS, "")

    system = r.section("system")
    r.check_keys(system, ("mmc", "mmc1", "mmc2"), "system")
    base = _parse_mmc(r, "system.mmc", {})
    mmc1 = r.build(MmcParams, _parse_mmc(r, "system.mmc1", base), "system.mmc1")
    mmc2 = r.build(MmcParams, _parse_mmc(r, "system.mmc2", base), "system.mmc2")
    sysp = r.build(SystemParams, {"mmc1": mmc1, "mmc2": mmc2}, "system")

    topo = r.section("topology")
    r.check_keys(topo, ("line", "lines", "clr", "c14", "c23"), "topology")
    line_sec = r.section("line", "topology")
    r.check_keys(line_sec, _LINE, "topology.line")
    line_base = r.numbers(line_sec, "topology.line", _LINE)
    lines_sec = r.section("lines", "topology")
    r.check_keys(lines_sec, LINE_NAMES, "topology.lines")
    lines = []
    for name in LINE_NAMES:
        path = f"topology.lines.{name}"
        sec = lines_sec.get(name) or {}
        if not isinstance(sec, dict):
            r.fail("expected a mapping", path)
        r.check_keys(sec, _LINE, path)
        kw = dict(line_base)
        kw.update(r.numbers(sec, path, _LINE))
        lines.append((name, r.build(LineParams, kw, path)))
    clr_raw = topo.get("clr")
    if clr_raw is None:
        clr = ClrSet()
    elif isinstance(clr_raw, dict):
        vals = {str(k): r.number(v, f"topology.clr.{k}") for k, v in clr_raw.items()}
        r.check_keys(vals, ("12", "21", "14", "23"), "topology.clr")
        full = ClrSet().as_dict()
        full.update(vals)
        clr = r.build(ClrSet.from_mapping, {"mapping": full}, "topology.clr")
    else:
        clr = r.build(ClrSet.uniform, {"value": r.number(clr_raw, "topology.clr")}, "topology.clr")
    caps = r.numbers(topo, "topology", ("c14", "c23"))
    topology = r.build(Topology, {"lines": tuple(lines), "clr": clr, **caps}, "topology")

    fsec = r.section("fault")
    r.check_keys(fsec, ("kind", "location_d", "r_f", "t_fault"), "fault")
    kind_raw = fsec.get("kind")
    if kind_raw is None:
        kind = FaultKind.NONE
    else:
        try:
            kind = FaultKind(str(kind_raw))
        except ValueError:
            r.fail(f"unknown fault kind {kind_raw!r} "
                   f"(one of {', '.join(k.value for k in FaultKind)})", "fault.kind")
    fkw = {"kind": kind, **r.numbers(fsec, "fault", ("location_d", "r_f", "t_fault"))}
    fault = r.build(FaultScenario, fkw, "fault")

    rsec = r.section("relay")
    r.check_keys(rsec, _RELAY + ("snr_db", "seed"), "relay")
    rkw = r.numbers(rsec, "relay", [n for n in _RELAY if n != "use_filter"],
                    integer=("rolling_window",))
    if "use_filter" in rsec:
        if not isinstance(rsec["use_filter"], bool):
            r.fail("expected true or false", "relay.use_filter")
        rkw["use_filter"] = rsec["use_filter"]
    relay = r.build(RelaySettings, rkw, "relay")
    nkw = {}
    if rsec.get("snr_db") is not None:
        raw = rsec["snr_db"]
        nkw["snr_db"] = math.inf if str(raw).lower() in ("inf", ".inf", "none") \
            else r.number(raw, "relay.snr_db")
    if rsec.get("seed") is not None:
        nkw["seed"] = r.number(rsec["seed"], "relay.seed", integer=True)
    noise = NoiseSpec(**nkw)

    ssec = r.section("sim")
    r.check_keys(ssec, _SIM, "sim")
    skw = r.numbers(ssec, "sim", [n for n in _SIM if n != "stiff_sources"])
    if "stiff_sources" in ssec:
        if not isinstance(ssec["stiff_sources"], bool):
            r.fail("expected true or false", "sim.stiff_sources")
        skw["stiff_sources"] = ssec["stiff_sources"]
    sim = r.build(SimSettings, skw, "sim")
    if fault.kind is not FaultKind.NONE and not sim.t_end > fault.t_fault:
        r.fail("sim.t_end must be after fault.t_fault", "sim.t_end")

    sid = r.data.get("id", "scenario")
    return Scenario(sysp, topology, fault, relay, sim, noise, str(sid))


def scenario_to_dict(sc: Scenario) -> dict:
    """Fully explicit form of a scenario (every default spelled out)."""
    def mmc(p):
        return {f.name: getattr(p, f.name) for f in fields(MmcParams)}

    def lp(p):
        return {f.name: getattr(p, f.name) for f in fields(LineParams)}

    out = {
        "id": sc.id,
        "system": {"mmc1": mmc(sc.system.mmc1), "mmc2": mmc(sc.system.mmc2)},
        "topology": {
            "lines": {name: lp(p) for name, p in sc.topology.lines},
            "clr": sc.topology.clr.as_dict(),
        },
        "fault": {"kind": sc.fault.kind.value, "r_f": sc.fault.r_f, "t_fault": sc.fault.t_fault},
        "relay": {f.name: getattr(sc.relay, f.name) for f in fields(RelaySettings)},
        "sim": {f.name: getattr(sc.sim, f.name) for f in fields(SimSettings)},
    }
    for cap in ("c14", "c23"):
        if getattr(sc.topology, cap) is not None:
            out["topology"][cap] = getattr(sc.topology, cap)
    if sc.fault.location_d is not None:
        out["fault"]["location_d"] = sc.fault.location_d
    out["relay"]["snr_db"] = "inf" if math.isinf(sc.noise.snr_db) else sc.noise.snr_db
    out["relay"]["seed"] = sc.noise.seed
    return out


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False)


def default_scenario(kind=FaultKind.INTERNAL_PTP, location_d=0.5, r_f=0.0, clr=None,
                     sid=None) -> Scenario:
    kind = FaultKind(kind)
    topology = Topology() if clr is None else Topology().with_clr(clr)
    fault = FaultScenario(kind, location_d if kind.is_internal else None,
                          r_f if kind is not FaultKind.NONE else 0.0)
    return Scenario(SystemParams(), topology, fault, RelaySettings(), SimSettings(),
                    NoiseSpec(), sid or kind.value)
