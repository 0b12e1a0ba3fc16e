"""Network data model and loader for the multimachine test system.

Network files are JSON documents; the field-by-field layout is described in
``docs/formats.md``.  All quantities are per-unit on the system MVA base,
time constants are in seconds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

BUS_TYPES = ("slack", "PV", "PQ")


class NetworkError(ValueError):
    """Raised when a network file cannot be parsed or violates an invariant."""


@dataclass(frozen=True)
class Bus:
    id: int
    type: str
    v_set: float = 1.0


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float = 0.0

    @property
    def admittance(self) -> complex:
        return 1.0 / complex(self.r, self.x)


@dataclass(frozen=True)
class Machine:
    """Two-axis synchronous machine parameters (machine base == system base)."""

    H: float
    D: float
    xd: float
    xd_p: float
    xq: float
    xq_p: float
    Td0_p: float
    Tq0_p: float


@dataclass(frozen=True)
class Exciter:
    """IEEE Type-I exciter; saturation ``S_E(Efd) = AE * exp(BE * Efd)``."""

    KA: float
    TA: float
    KE: float
    TE: float
    KF: float
    TF: float
    AE: float = 0.0
    BE: float = 0.0


@dataclass(frozen=True)
class Generator:
    bus: int
    p_set: float
    machine: Machine
    exciter: Exciter


@dataclass(frozen=True)
class Load:
    bus: int
    p: float
    q: float


@dataclass(frozen=True)
class NetworkModel:
    name: str
    base_mva: float
    frequency_hz: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    loads: tuple[Load, ...]
    base_point: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        validate(self)

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def omega_s(self) -> float:
        return 2.0 * math.pi * self.frequency_hz

    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    def bus_index(self, bus_id: int) -> int:
        for i, b in enumerate(self.buses):
            if b.id == bus_id:
                return i
        raise KeyError(f"no bus {bus_id}")

    @property
    def slack_index(self) -> int:
        return next(i for i, b in enumerate(self.buses) if b.type == "slack")

    @property
    def gen_bus_indices(self) -> list[int]:
        return [self.bus_index(g.bus) for g in self.generators]

    def load_vectors(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-bus load ``(P, Q)`` arrays."""
        p = np.zeros(self.n_bus)
        q = np.zeros(self.n_bus)
        for ld in self.loads:
            i = self.bus_index(ld.bus)
            p[i] += ld.p
            q[i] += ld.q
        return p, q

    def ybus(self) -> np.ndarray:
        n = self.n_bus
        Y = np.zeros((n, n), dtype=complex)
        for br in self.branches:
            i, k = self.bus_index(br.from_bus), self.bus_index(br.to_bus)
            y = br.admittance
            Y[i, i] += y + 0.5j * br.b
            Y[k, k] += y + 0.5j * br.b
            Y[i, k] -= y
            Y[k, i] -= y
        return Y

    def with_loads(self, loads) -> "NetworkModel":
        return replace(self, loads=tuple(loads))


def validate(net: NetworkModel) -> None:
    ids = [b.id for b in net.buses]
    if len(set(ids)) != len(ids):
        raise NetworkError("duplicate bus ids")
    for b in net.buses:
        if b.type not in BUS_TYPES:
            raise NetworkError(f"bus {b.id}: unknown type {b.type!r}")
    n_slack = sum(b.type == "slack" for b in net.buses)
    if n_slack == 0:
        raise NetworkError("no slack bus")
    if n_slack > 1:
        raise NetworkError("multiple slack buses")
    for br in net.branches:
        for end in (br.from_bus, br.to_bus):
            if end not in ids:
                raise NetworkError(f"branch {br.from_bus}-{br.to_bus}: unknown bus {end}")
        vals = (br.r, br.x, br.b)
        if not all(math.isfinite(v) for v in vals) or (br.r == 0.0 and br.x == 0.0):
            raise NetworkError(f"branch {br.from_bus}-{br.to_bus}: admittance not finite")
    gen_buses = [g.bus for g in net.generators]
    if len(set(gen_buses)) != len(gen_buses):
        raise NetworkError("more than one generator on a bus")
    for k, g in enumerate(net.generators, start=1):
        if g.bus not in ids:
            raise NetworkError(f"machine {k}: unknown bus {g.bus}")
        btype = net.buses[ids.index(g.bus)].type
        if btype == "PQ":
            raise NetworkError(f"machine {k}: bus {g.bus} is a PQ bus")
        m = g.machine
        for name in ("H", "Td0_p", "Tq0_p"):
            if not getattr(m, name) > 0:
                raise NetworkError(f"machine {k}: {name} must be positive (got {getattr(m, name)})")
        for name in ("xd", "xd_p", "xq", "xq_p"):
            if not getattr(m, name) > 0:
                raise NetworkError(f"machine {k}: {name} must be positive (got {getattr(m, name)})")
        e = g.exciter
        for name in ("KA", "TA", "TE", "KF", "TF"):
            if not getattr(e, name) > 0:
                raise NetworkError(f"machine {k}: exciter {name} must be positive")
    for b in net.buses:
        if b.type in ("slack", "PV") and b.id not in gen_buses:
            raise NetworkError(f"bus {b.id}: {b.type} bus without a generator")
    for ld in net.loads:
        if ld.bus not in ids:
            raise NetworkError(f"load: unknown bus {ld.bus}")
        if not (math.isfinite(ld.p) and math.isfinite(ld.q)):
            raise NetworkError(f"load at bus {ld.bus}: non-finite value")


def _get(d: dict, key: str, where: str, cast=float):
    if key not in d:
        raise NetworkError(f"{where}: missing field {key!r}")
    try:
        return cast(d[key])
    except (TypeError, ValueError):
        raise NetworkError(f"{where}: field {key!r} has invalid value {d[key]!r}") from None


def network_from_dict(doc: dict) -> NetworkModel:
    for key in ("buses", "branches", "generators", "loads"):
        if not isinstance(doc.get(key), list):
            raise NetworkError(f"missing or malformed section {key!r}")
    buses = tuple(
        Bus(_get(b, "id", f"buses[{i}]", int), _get(b, "type", f"buses[{i}]", str),
            float(b.get("v_set", 1.0)))
        for i, b in enumerate(doc["buses"])
    )
    branches = tuple(
        Branch(_get(b, "from", f"branches[{i}]", int), _get(b, "to", f"branches[{i}]", int),
               _get(b, "r", f"branches[{i}]"), _get(b, "x", f"branches[{i}]"),
               float(b.get("b", 0.0)))
        for i, b in enumerate(doc["branches"])
    )
    gens = []
    for i, g in enumerate(doc["generators"]):
        where = f"generators[{i}]"
        m, e = g.get("machine"), g.get("exciter")
        if not isinstance(m, dict) or not isinstance(e, dict):
            raise NetworkError(f"{where}: missing machine or exciter block")
        machine = Machine(**{f: _get(m, f, f"{where}.machine") for f in
                             ("H", "D", "xd", "xd_p", "xq", "xq_p", "Td0_p", "Tq0_p")})
        exciter = Exciter(**{f: _get(e, f, f"{where}.exciter") for f in
                             ("KA", "TA", "KE", "TE", "KF", "TF")},
                          AE=float(e.get("AE", 0.0)), BE=float(e.get("BE", 0.0)))
        gens.append(Generator(_get(g, "bus", where, int), float(g.get("p_set", 0.0)),
                              machine, exciter))
    loads = tuple(
        Load(_get(ld, "bus", f"loads[{i}]", int), _get(ld, "p", f"loads[{i}]"),
             _get(ld, "q", f"loads[{i}]"))
        for i, ld in enumerate(doc["loads"])
    )
    base_point = {str(k): float(v) for k, v in doc.get("base_point", {}).items()}
    return NetworkModel(
        name=str(doc.get("name", "")),
        base_mva=float(doc.get("base_mva", 100.0)),
        frequency_hz=float(doc.get("frequency_hz", 60.0)),
        buses=buses, branches=branches, generators=tuple(gens), loads=loads,
        base_point=base_point,
    )


def network_to_dict(net: NetworkModel) -> dict:
    def machine(m: Machine):
        return {k: getattr(m, k) for k in ("H", "D", "xd", "xd_p", "xq", "xq_p", "Td0_p", "Tq0_p")}

    def exciter(e: Exciter):
        return {k: getattr(e, k) for k in ("KA", "TA", "KE", "TE", "KF", "TF", "AE", "BE")}

    doc = {
        "name": net.name,
        "base_mva": net.base_mva,
        "frequency_hz": net.frequency_hz,
        "buses": [{"id": b.id, "type": b.type, "v_set": b.v_set} for b in net.buses],
        "branches": [{"from": b.from_bus, "to": b.to_bus, "r": b.r, "x": b.x, "b": b.b}
                     for b in net.branches],
        "generators": [{"bus": g.bus, "p_set": g.p_set, "machine": machine(g.machine),
                        "exciter": exciter(g.exciter)} for g in net.generators],
        "loads": [{"bus": ld.bus, "p": ld.p, "q": ld.q} for ld in net.loads],
    }
    if net.base_point:
        doc["base_point"] = dict(net.base_point)
    return doc


def load_network(path) -> NetworkModel:
    """Read and validate a network file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise NetworkError(f"cannot read network file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise NetworkError(f"{path}: top level must be an object")
    return network_from_dict(doc)


def save_network(net: NetworkModel, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net), indent=2) + "\n")


def bundled_network_path(name: str = "wscc9.json") -> Path:
    return Path(str(resources.files("prscert") / "data" / name))


def wscc9(calibrated: bool = True) -> NetworkModel:
    """The bundled 9-bus system; ``calibrated`` selects the heavy base-point loading."""
    return load_network(bundled_network_path("wscc9.json" if calibrated else "wscc9_standard.json"))
