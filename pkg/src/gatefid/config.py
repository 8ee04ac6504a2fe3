"""Declarative analysis configs: TOML documents with mandatory physical units.

Quantities are written as strings such as ``"50 ns"``, ``"2.5 MHz*2pi"`` or
``"5398 1/s"`` and canonicalised to seconds and rad/s. Bare numbers are only
accepted for dimensionless parameters.
"""

from __future__ import annotations

import copy
import inspect
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import tomli

from . import gatelib
from .analytic import FORMULAS, NoiseChannel, QuadratureSpec
from .hilbert import LayoutError, compose, embed, embed_sites, lift_cmp, transition
from .liouville import FRAMES
from .propagator import ScheduleError, piecewise

COMMANDS = ("budget", "oracle", "compare", "sweep")
CHANNEL_KINDS = ("relaxation", "dephasing", "sigma_minus", "sigma_z", "rydberg_decay")


class ConfigError(ValueError):
    """Invalid configuration; ``where`` locates the offending entry."""

    def __init__(self, where: str, message: str):
        self.where = where
        super().__init__(f"{where}: {message}")


_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_QUANTITY = re.compile(rf"^\s*({_NUMBER})\s*(.*?)\s*$")
_INVERSE_TIME = re.compile(rf"^\s*1\s*/\s*\(?\s*({_NUMBER})\s*([^\s)]+)\s*\)?\s*$")

TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}
_PREFIX = {"": 1.0, "k": 1e3, "M": 1e6, "G": 1e9}


def _norm_unit(unit: str) -> str:
    unit = unit.strip().replace(" ", "").replace("·", "*").replace("π", "pi")
    return unit.replace("µ", "u").replace("μ", "u")


def _rate_units() -> dict[str, float]:
    out = {}
    for u, f in TIME_UNITS.items():
        for form in (f"1/{u}", f"/{u}", f"{u}^-1", f"{u}-1"):
            out[form] = 1.0 / f
    return out


def _freq_units() -> dict[str, float]:
    out = {"rad/s": 1.0}
    for u, f in TIME_UNITS.items():
        out[f"rad/{u}"] = 1.0 / f
    for p, f in _PREFIX.items():
        hz = f"{p}Hz"
        for form in (f"{hz}*2pi", f"2pi*{hz}", f"2pi{hz}"):
            out[form] = 2 * math.pi * f
    return out


RATE_UNITS = _rate_units()
FREQ_UNITS = _freq_units()


def _split(value: Any, where: str) -> tuple[float, str]:
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise ConfigError(where, f"expected a quantity string, got {value!r}")
    if not isinstance(value, str):
        return float(value), ""
    m = _QUANTITY.match(value)
    if not m:
        raise ConfigError(where, f"cannot parse quantity {value!r}")
    return float(m.group(1)), _norm_unit(m.group(2))


def parse_time(value: Any, where: str) -> float:
    """Duration in seconds from e.g. ``"50 ns"``."""
    num, unit = _split(value, where)
    if unit not in TIME_UNITS:
        raise ConfigError(where, f"time {value!r} needs a unit from {sorted(TIME_UNITS)} (us/µs accepted)")
    t = num * TIME_UNITS[unit]
    if not t > 0:
        raise ConfigError(where, f"time must be positive, got {value!r}")
    return t


def parse_rate(value: Any, where: str) -> float:
    """Decay rate in 1/s from ``"5398 1/s"``, ``"0.02 1/us"`` or ``"1/(50 us)"``."""
    if isinstance(value, str):
        m = _INVERSE_TIME.match(value)
        if m and _norm_unit(m.group(2)) in TIME_UNITS:
            t = float(m.group(1)) * TIME_UNITS[_norm_unit(m.group(2))]
            if not t > 0:
                raise ConfigError(where, f"time constant must be positive in {value!r}")
            return 1.0 / t
    num, unit = _split(value, where)
    if unit not in RATE_UNITS:
        raise ConfigError(where, f"rate {value!r} needs a unit such as 1/s, s^-1, 1/us or 1/(T us)")
    rate = num * RATE_UNITS[unit]
    if rate < 0:
        raise ConfigError(where, f"rate must be non-negative, got {value!r}")
    return rate


def parse_frequency(value: Any, where: str, tau: float | None = None) -> float:
    """Angular frequency in rad/s from ``"10 MHz*2pi"``, ``"6.28e7 rad/s"`` or ``"1 pi/tau"``."""
    num, unit = _split(value, where)
    if unit == "pi/tau":
        if tau is None:
            raise ConfigError(where, "unit pi/tau needs the gate time tau")
        return num * math.pi / tau
    if unit not in FREQ_UNITS:
        hint = " (plain Hz is ambiguous: write MHz*2pi or rad/s)" if unit.endswith("Hz") else ""
        raise ConfigError(where, f"frequency {value!r} has no angular unit{hint}")
    return num * FREQ_UNITS[unit]


def parse_angle(value: Any, where: str) -> float:
    num, unit = _split(value, where)
    if unit in ("", "rad"):
        return num
    if unit == "pi":
        return num * math.pi
    if unit == "deg":
        return math.radians(num)
    raise ConfigError(where, f"angle {value!r}: unit must be rad, pi or deg")


def read_matrix(path: str | Path, where: str = "matrix") -> np.ndarray:
    """Load a complex matrix file: ``dim n`` then ``n`` rows of ``n`` ``re,im`` pairs."""
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text().splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    except OSError as exc:
        raise ConfigError(where, f"cannot read matrix file {path}: {exc.strerror}") from None
    head = lines[0].split() if lines else []
    if len(head) != 2 or head[0] != "dim" or not head[1].isdigit():
        raise ConfigError(f"{path}:1", "first line must be 'dim <n>'")
    n = int(head[1])
    if len(lines) - 1 != n:
        raise ConfigError(str(path), f"expected {n} rows, found {len(lines) - 1}")
    out = np.empty((n, n), dtype=complex)
    for r, line in enumerate(lines[1:]):
        pairs = line.split()
        if len(pairs) != n:
            raise ConfigError(f"{path}:{r + 2}", f"expected {n} entries, found {len(pairs)}")
        for c, pair in enumerate(pairs):
            try:
                re_, im = pair.split(",")
                out[r, c] = complex(float(re_), float(im))
            except ValueError:
                raise ConfigError(f"{path}:{r + 2}", f"bad complex pair {pair!r}") from None
    return out


def write_matrix(path: str | Path, mat: np.ndarray) -> None:
    mat = np.asarray(mat, dtype=complex)
    rows = [" ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row) for row in mat]
    Path(path).write_text(f"dim {mat.shape[0]}\n" + "\n".join(rows) + "\n")


# parameter kinds per builtin gate
GATE_PARAMS: dict[str, dict[str, str]] = {
    "cz": {"lam": "frequency", "tau": "time"},
    "rydberg_cz": {"omega": "frequency", "delta_ratio": "number", "xi": "angle", "refine": "bool"},
    "cczs": {"lam": "frequency", "phi": "angle"},
    "iswap": {"g": "frequency", "tau": "time"},
    "idle": {"n_qubits": "int", "tau": "time", "dims": "intlist"},
}


def _param(kind: str, value: Any, where: str, tau: float | None) -> Any:
    if kind == "time":
        return parse_time(value, where)
    if kind == "frequency":
        return parse_frequency(value, where, tau)
    if kind == "angle":
        return parse_angle(value, where)
    if kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(where, f"expected a plain number, got {value!r}")
        return float(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(where, f"expected true/false, got {value!r}")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise ConfigError(where, f"expected a positive integer, got {value!r}")
        return value
    if kind == "intlist":
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ConfigError(where, f"expected a list of integers, got {value!r}")
        return list(value)
    raise AssertionError(kind)


def resolve_gate(table: dict, where: str = "gate", base: Path | None = None) -> dict:
    """Canonical gate description: builtin name plus SI parameters, or explicit segments."""
    if not isinstance(table, dict) or "name" not in table:
        raise ConfigError(where, "needs a 'name' (builtin gate or 'custom')")
    name = table["name"]
    if name == "parallel":
        members = table.get("members")
        if not isinstance(members, list) or not members:
            raise ConfigError(f"{where}.members", "parallel gate needs a non-empty list of member gates")
        pad = table.get("pad", False)
        if not isinstance(pad, bool):
            raise ConfigError(f"{where}.pad", "expected true/false")
        extra = set(table) - {"name", "members", "pad"}
        if extra:
            raise ConfigError(where, f"unknown keys {sorted(extra)}")
        return {"name": "parallel", "pad": pad,
                "members": [resolve_gate(m, f"{where}.members[{i}]", base) for i, m in enumerate(members)]}
    if name == "custom":
        return _resolve_custom(table, where, base)
    if name not in GATE_PARAMS:
        raise ConfigError(f"{where}.name", f"unknown gate {name!r}; builtins: {sorted([*GATE_PARAMS, 'parallel', 'custom'])}")
    schema = GATE_PARAMS[name]
    extra = set(table) - set(schema) - {"name"}
    if extra:
        raise ConfigError(where, f"unknown parameters {sorted(extra)} for gate {name!r}; known: {sorted(schema)}")
    params: dict[str, Any] = {}
    tau = parse_time(table["tau"], f"{where}.tau") if "tau" in table else _default_tau(name)
    for key, kind in schema.items():
        if key in table:
            params[key] = _param(kind, table[key], f"{where}.{key}", tau)
    return {"name": name, "params": params}


def _default_tau(name: str) -> float | None:
    param = inspect.signature(gatelib.REGISTRY[name]).parameters.get("tau")
    return param.default if param is not None and isinstance(param.default, float) else None


def _resolve_custom(table: dict, where: str, base: Path | None) -> dict:
    allowed = {"name", "dims", "cmp_levels", "segments", "target", "phase_convention"}
    extra = set(table) - allowed
    if extra:
        raise ConfigError(where, f"unknown keys {sorted(extra)} for a custom gate")
    dims = _param("intlist", table.get("dims"), f"{where}.dims", None)
    segs = table.get("segments")
    if not isinstance(segs, list) or not segs:
        raise ConfigError(f"{where}.segments", "custom gate needs at least one segment")
    out_segs = []
    for i, seg in enumerate(segs):
        w = f"{where}.segments[{i}]"
        if not isinstance(seg, dict) or not {"hamiltonian", "unit", "duration"} <= set(seg):
            raise ConfigError(w, "segment needs 'hamiltonian' (file), 'unit' and 'duration'")
        scale = parse_frequency(f"1 {seg['unit']}", f"{w}.unit")
        out_segs.append({
            "hamiltonian": str(_path(seg["hamiltonian"], base)),
            "scale": scale,
            "duration": parse_time(seg["duration"], f"{w}.duration"),
        })
    if "target" not in table:
        raise ConfigError(where, "custom gate needs a 'target' matrix file")
    convention = table.get("phase_convention", "none")
    if convention not in ("none", "global", "local_z"):
        raise ConfigError(f"{where}.phase_convention", f"unknown convention {convention!r}")
    return {
        "name": "custom",
        "dims": dims,
        "cmp_levels": table.get("cmp_levels"),
        "segments": out_segs,
        "target": str(_path(table["target"], base)),
        "phase_convention": convention,
    }


def _path(value: Any, base: Path | None) -> Path:
    p = Path(str(value))
    return p if p.is_absolute() or base is None else base / p


def build_model(gate: dict, where: str = "gate") -> gatelib.GateModel:
    """Instantiate a :class:`GateModel` from a resolved gate description."""
    name = gate["name"]
    try:
        if name == "parallel":
            members = [build_model(m, f"{where}.members[{i}]") for i, m in enumerate(gate["members"])]
            return gatelib.parallel(members, pad=gate["pad"])
        if name == "custom":
            layout = compose(gate["dims"], gate["cmp_levels"])
            gens = [read_matrix(s["hamiltonian"], f"{where}.segments[{i}]") * s["scale"]
                    for i, s in enumerate(gate["segments"])]
            target = read_matrix(gate["target"], f"{where}.target")
            if target.shape == (layout.cmp_dim, layout.cmp_dim):
                target = lift_cmp(target, layout)
            schedule = piecewise(layout, gens, [s["duration"] for s in gate["segments"]], target)
            return gatelib.GateModel("custom", schedule, gate["phase_convention"],
                                     tuple(gatelib.transmon_noise(layout)))
        return gatelib.build(name, **gate["params"])
    except (LayoutError, ScheduleError) as exc:
        raise ConfigError(where, str(exc)) from None
    except ValueError as exc:
        raise ConfigError(where, str(exc)) from None


def _channel_rate(entry: dict, where: str, tau: float) -> float:
    if "rate" in entry and "gamma_tau" in entry:
        raise ConfigError(where, "give either 'rate' or 'gamma_tau', not both")
    if "rate" in entry:
        return parse_rate(entry["rate"], f"{where}.rate")
    if "gamma_tau" in entry:
        gt = entry["gamma_tau"]
        if isinstance(gt, bool) or not isinstance(gt, (int, float)) or gt < 0:
            raise ConfigError(f"{where}.gamma_tau", f"expected a non-negative number, got {gt!r}")
        return float(gt) / tau
    raise ConfigError(where, "channel needs 'rate' (with unit) or dimensionless 'gamma_tau'")


def _kind_channel(kind: str, site: int, layout, label: str) -> NoiseChannel:
    dim = layout.dims[site]
    if kind == "relaxation":
        if dim == 2:
            return gatelib.qubit_relaxation(layout, site)
        jump = np.diag(np.sqrt(np.arange(1, dim)), 1)
        return NoiseChannel(label, embed(jump, site, layout), 0.0, 1.0, (site,), kind)
    if kind == "dephasing":
        if dim == 2:
            return gatelib.qubit_dephasing(layout, site)
        return NoiseChannel(label, embed(np.diag(np.arange(dim)), site, layout), 0.0, 2.0, (site,), kind)
    if kind == "sigma_minus":
        return NoiseChannel(label, embed(transition(dim, 0, 1), site, layout), 0.0, 1.0, (site,), "relaxation")
    if kind == "sigma_z":
        z = np.zeros((dim, dim))
        z[0, 0], z[1, 1] = 1.0, -1.0
        return NoiseChannel(label, embed(z, site, layout), 0.0, 0.5, (site,), "dephasing")
    if kind == "rydberg_decay":
        if dim != 4:
            raise LayoutError(f"rydberg_decay needs a 4-level subsystem (0, 1, r, O), site has {dim}")
        return NoiseChannel(label, embed(transition(4, 3, 2), site, layout), 0.0, 1.0, (site,), kind)
    raise AssertionError(kind)


def resolve_channels(entries: list, noise: dict, model: gatelib.GateModel, base: Path | None = None,
                     where: str = "channels") -> list[dict]:
    """Resolve channel entries to canonical dicts (label, rate in 1/s, origin)."""
    tau = model.tau
    layout = model.layout
    resolved: dict[str, dict] = {}
    uniform = noise.get("gamma_tau")
    for label in model.labels:
        rate = 0.0
        if uniform is not None:
            if isinstance(uniform, bool) or not isinstance(uniform, (int, float)) or uniform < 0:
                raise ConfigError("noise.gamma_tau", f"expected a non-negative number, got {uniform!r}")
            rate = float(uniform) / tau
        resolved[label] = {"label": label, "rate": rate, "source": "builtin"}
    extra = set(noise) - {"gamma_tau"}
    if extra:
        raise ConfigError("noise", f"unknown keys {sorted(extra)}")
    for i, entry in enumerate(entries):
        w = f"{where}[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(w, "channel entry must be a table")
        allowed = {"label", "rate", "gamma_tau", "site", "sites", "kind", "matrix", "convention"}
        unknown = set(entry) - allowed
        if unknown:
            raise ConfigError(w, f"unknown keys {sorted(unknown)}")
        rate = _channel_rate(entry, w, tau)
        if "kind" in entry or "matrix" in entry:
            item = _explicit_channel(entry, w, layout, base)
            item["rate"] = rate
            resolved[item["label"]] = item
            continue
        label = entry.get("label")
        if label not in resolved:
            raise ConfigError(f"{w}.label", f"unknown channel {label!r}; model channels: {model.labels}")
        resolved[label] = {**resolved[label], "rate": rate}
    return list(resolved.values())


def _explicit_channel(entry: dict, where: str, layout, base: Path | None) -> dict:
    sites = entry.get("sites", [entry["site"]] if "site" in entry else None)
    if sites is not None:
        if not isinstance(sites, list) or not all(isinstance(s, int) and not isinstance(s, bool) for s in sites):
            raise ConfigError(f"{where}.sites", f"expected subsystem numbers, got {sites!r}")
        for s in sites:
            if not 1 <= s <= layout.n_qubits:
                raise ConfigError(f"{where}.site", f"subsystem {s} does not exist (layout has {layout.n_qubits}, counted from 1)")
    if "kind" in entry and "matrix" in entry:
        raise ConfigError(where, "give either 'kind' or 'matrix', not both")
    if "kind" in entry:
        kind = entry["kind"]
        if kind not in CHANNEL_KINDS:
            raise ConfigError(f"{where}.kind", f"unknown kind {kind!r}; choose from {CHANNEL_KINDS}")
        if not sites or len(sites) != 1:
            raise ConfigError(where, f"kind {kind!r} needs exactly one 'site'")
        if "convention" in entry:
            raise ConfigError(f"{where}.convention", "builtin kinds carry their own rate convention")
        label = entry.get("label", f"{kind}_q{sites[0]}")
        return {"label": label, "kind": kind, "sites": sites, "source": "kind"}
    conv = entry.get("convention", 1.0)
    if isinstance(conv, bool) or not isinstance(conv, (int, float)) or conv < 0:
        raise ConfigError(f"{where}.convention", f"expected a non-negative number, got {conv!r}")
    label = entry.get("label")
    if not isinstance(label, str):
        raise ConfigError(f"{where}.label", "explicit matrix channels need a label")
    return {"label": label, "matrix": str(_path(entry["matrix"], base)), "sites": sites,
            "convention": float(conv), "source": "matrix"}


def build_channels(resolved: list[dict], model: gatelib.GateModel, where: str = "channels") -> list[NoiseChannel]:
    layout = model.layout
    templates = {ch.label: ch for ch in model.channel_templates}
    out = []
    for i, item in enumerate(resolved):
        label = item["label"]
        try:
            if item["source"] == "builtin":
                ch = templates[label]
            elif item["source"] == "kind":
                ch = _kind_channel(item["kind"], item["sites"][0] - 1, layout, label)
                ch = NoiseChannel(label, ch.jump, 0.0, ch.convention, ch.sites, ch.kind)
            else:
                mat = read_matrix(item["matrix"], f"{where}.{label}")
                sites = item["sites"]
                if sites is None:
                    jump = layout.check_operator(mat, f"channel {label}")
                    idx = None
                else:
                    idx = tuple(s - 1 for s in sites)
                    jump = embed_sites(mat, list(idx), layout)
                ch = NoiseChannel(label, jump, 0.0, item["convention"], idx, "custom")
        except LayoutError as exc:
            raise ConfigError(f"{where}.{label}", str(exc)) from None
        out.append(ch.with_rate(item["rate"]))
    return out


@dataclass
class AnalysisConfig:
    """Fully resolved analysis request; ``to_dict`` echoes it with defaults expanded."""

    gate: dict
    channel_entries: list = field(default_factory=list)
    noise: dict = field(default_factory=dict)
    formula: str = "standard"
    quadrature: str = "simpson"
    quad_tol: float = 1e-10
    gauss_order: int = 20
    solver_tol: float = 1e-9
    frame: str = "interaction"
    mc_samples: int = 0
    seed: int = 12345
    scales: list[float] = field(default_factory=list)
    sweep: dict | None = None
    source: str | None = None
    base: Path | None = None

    def model(self, overrides: dict | None = None) -> gatelib.GateModel:
        gate = self.gate
        if overrides:
            gate = copy.deepcopy(gate)
            gate["params"] = {**gate.get("params", {}), **overrides}
        return build_model(gate)

    def channels(self, model: gatelib.GateModel) -> list[NoiseChannel]:
        resolved = resolve_channels(self.channel_entries, self.noise, model, self.base)
        return build_channels(resolved, model)

    def resolved_channels(self, model: gatelib.GateModel) -> list[dict]:
        return resolve_channels(self.channel_entries, self.noise, model, self.base)

    @property
    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(self.quadrature, self.quad_tol, self.gauss_order)

    def to_dict(self) -> dict:
        out = {
            "gate": self.gate,
            "analysis": {
                "formula": self.formula,
                "quadrature": self.quadrature,
                "quad_tol": self.quad_tol,
                "gauss_order": self.gauss_order,
                "solver_tol": self.solver_tol,
                "frame": self.frame,
                "mc_samples": self.mc_samples,
                "seed": self.seed,
                "scales": self.scales,
            },
            "source": self.source,
        }
        if self.sweep is not None:
            out["sweep"] = self.sweep
        return out


_ANALYSIS_KEYS = {"formula", "quadrature", "quad_tol", "gauss_order", "solver_tol", "frame",
                  "mc_samples", "seed", "scales"}


def _positive(value: Any, where: str, integer: bool = False, allow_zero: bool = False) -> Any:
    ok_type = isinstance(value, int) if integer else isinstance(value, (int, float))
    if isinstance(value, bool) or not ok_type or value < 0 or (value == 0 and not allow_zero):
        raise ConfigError(where, f"expected a {'non-negative' if allow_zero else 'positive'} "
                                 f"{'integer' if integer else 'number'}, got {value!r}")
    return value


def _resolve_sweep(table: dict, gate: dict) -> dict:
    where = "sweep"
    allowed = {"parameter", "values", "start", "stop", "num", "unit", "oracle"}
    extra = set(table) - allowed
    if extra:
        raise ConfigError(where, f"unknown keys {sorted(extra)}")
    if gate["name"] not in GATE_PARAMS:
        raise ConfigError(where, "sweeps need a builtin (non-parallel, non-custom) gate")
    param = table.get("parameter")
    schema = GATE_PARAMS[gate["name"]]
    if param not in schema or schema[param] not in ("time", "frequency", "angle", "number"):
        raise ConfigError(f"{where}.parameter", f"cannot sweep {param!r} for gate {gate['name']!r}")
    if "values" in table:
        raw = table["values"]
        if not isinstance(raw, list) or not raw:
            raise ConfigError(f"{where}.values", "expected a non-empty list")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw):
            raise ConfigError(f"{where}.values", "grid values must be numbers; put the unit in 'unit'")
        grid = [float(v) for v in raw]
    else:
        try:
            start, stop, num = float(table["start"]), float(table["stop"]), int(table["num"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError(where, "give 'values' or numeric 'start', 'stop' and 'num'") from None
        if num < 1:
            raise ConfigError(f"{where}.num", "need at least one point")
        grid = [float(v) for v in np.linspace(start, stop, num)]
    unit = table.get("unit", "")
    oracle = table.get("oracle", False)
    if not isinstance(oracle, bool):
        raise ConfigError(f"{where}.oracle", "expected true/false")
    tau = gate.get("params", {}).get("tau", _default_tau(gate["name"]))
    values = []
    for k, v in enumerate(grid):
        text = f"{v!r} {unit}".strip()
        values.append(_param(schema[param], text if unit else v, f"{where}.values[{k}]", tau))
    return {"parameter": param, "grid": grid, "unit": unit, "values": values, "oracle": oracle}


def load_config(path: str | Path) -> AnalysisConfig:
    """Parse a TOML analysis file.

    Raises
    ------
    ConfigError
        With the file and key path of the first problem found.
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(str(path), f"cannot open config: {exc.strerror}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"TOML syntax error: {exc}") from None
    return config_from_dict(doc, base=path.parent, source=str(path))


def config_from_dict(doc: dict, base: Path | None = None, source: str | None = None) -> AnalysisConfig:
    extra = set(doc) - {"gate", "channels", "noise", "analysis", "sweep"}
    if extra:
        raise ConfigError("config", f"unknown top-level tables {sorted(extra)}")
    if "gate" not in doc:
        raise ConfigError("config", "missing [gate] table")
    gate = resolve_gate(doc["gate"], "gate", base)
    analysis = doc.get("analysis", {})
    unknown = set(analysis) - _ANALYSIS_KEYS
    if unknown:
        raise ConfigError("analysis", f"unknown keys {sorted(unknown)}")
    cfg = AnalysisConfig(gate, list(doc.get("channels", [])), dict(doc.get("noise", {})), source=source, base=base)
    if not isinstance(doc.get("channels", []), list):
        raise ConfigError("channels", "use [[channels]] array-of-tables entries")
    if "formula" in analysis:
        if analysis["formula"] not in FORMULAS:
            raise ConfigError("analysis.formula", f"expected one of {FORMULAS}")
        cfg.formula = analysis["formula"]
    if "quadrature" in analysis:
        if analysis["quadrature"] not in ("simpson", "gauss"):
            raise ConfigError("analysis.quadrature", "expected 'simpson' or 'gauss'")
        cfg.quadrature = analysis["quadrature"]
    if "frame" in analysis:
        if analysis["frame"] not in FRAMES:
            raise ConfigError("analysis.frame", f"expected one of {FRAMES}")
        cfg.frame = analysis["frame"]
    if "quad_tol" in analysis:
        cfg.quad_tol = float(_positive(analysis["quad_tol"], "analysis.quad_tol"))
    if "gauss_order" in analysis:
        cfg.gauss_order = _positive(analysis["gauss_order"], "analysis.gauss_order", integer=True)
    if "solver_tol" in analysis:
        cfg.solver_tol = float(_positive(analysis["solver_tol"], "analysis.solver_tol"))
    if "mc_samples" in analysis:
        cfg.mc_samples = _positive(analysis["mc_samples"], "analysis.mc_samples", integer=True, allow_zero=True)
    if "seed" in analysis:
        cfg.seed = _positive(analysis["seed"], "analysis.seed", integer=True, allow_zero=True)
    if "scales" in analysis:
        sc = analysis["scales"]
        if not isinstance(sc, list) or not all(isinstance(s, (int, float)) and not isinstance(s, bool) and s > 0 for s in sc):
            raise ConfigError("analysis.scales", "expected a list of positive numbers")
        cfg.scales = [float(s) for s in sc]
    if "sweep" in doc:
        cfg.sweep = _resolve_sweep(doc["sweep"], gate)
    # surface model and channel problems at load time
    model = cfg.model()
    cfg.resolved_channels(model)
    return cfg
