"""MATPOWER-subset case parsing, bus geolocation, and islanded-load loss.

Only the three matrix blocks needed for connectivity-based loss are read
(``mpc.bus``, ``mpc.gen``, ``mpc.branch``); every other assignment in the
case file is skipped.  Loss under an outage set is purely topological: the
load on every bus outside the main-grid component, with no power flow.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import IntEnum
from functools import cached_property
from typing import Mapping

from .geo import GeoPoint

# Zero-length branches (internal substation ties) are exempt from wind.
ZERO_LENGTH_DEG = 1e-6

# MATPOWER column positions (0-based) of the fields this model needs.
_BUS_ID, _BUS_TYPE, _BUS_PD = 0, 1, 2
_GEN_BUS, _GEN_PMAX = 0, 8
_BR_FROM, _BR_TO, _BR_STATUS = 0, 1, 10
_MIN_COLUMNS = {"bus": 3, "gen": 9, "branch": 11}


class BusType(IntEnum):
    PQ = 1
    PV = 2
    REF = 3


class ParseError(ValueError):
    """Malformed case or coordinate input; message names the source line."""


@dataclass(frozen=True)
class Bus:
    id: int
    bus_type: BusType
    load_mw: float
    location: GeoPoint | None = None


@dataclass(frozen=True)
class Branch:
    id: int
    from_bus: int
    to_bus: int
    in_service_initially: bool = True


@dataclass(frozen=True)
class GridModel:
    """Buses, branches and generators of one case, plus derived totals."""

    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[tuple[int, float], ...]

    @cached_property
    def bus_by_id(self) -> dict[int, Bus]:
        return {bus.id: bus for bus in self.buses}

    @property
    def total_load_mw(self) -> float:
        return sum(bus.load_mw for bus in self.buses)

    @property
    def total_gen_mw(self) -> float:
        return sum(cap for _, cap in self.generators)

    @property
    def n_loads(self) -> int:
        """Number of buses with nonzero load."""
        return sum(1 for bus in self.buses if bus.load_mw > 0.0)

    @property
    def located(self) -> bool:
        return all(bus.location is not None for bus in self.buses)

    def wind_exempt_branch_ids(self) -> frozenset[int]:
        """Branches whose endpoints coincide geographically (within 1e-6
        degrees): modelled for connectivity but never failed by wind."""
        if not self.located:
            raise ValueError("grid has no coordinates; load them before exposure checks")
        exempt = set()
        for br in self.branches:
            a = self.bus_by_id[br.from_bus].location
            b = self.bus_by_id[br.to_bus].location
            if abs(a.lat - b.lat) <= ZERO_LENGTH_DEG and abs(a.lon - b.lon) <= ZERO_LENGTH_DEG:
                exempt.add(br.id)
        return frozenset(exempt)


@dataclass(frozen=True)
class OutageState:
    """Per-branch outage flags: 1 = out of service, 0 = in service."""

    delta: Mapping[int, int]

    @classmethod
    def no_outages(cls, model: GridModel) -> "OutageState":
        return cls({br.id: 0 for br in model.branches})

    @classmethod
    def from_outage_ids(cls, model: GridModel, out_ids) -> "OutageState":
        out = set(out_ids)
        unknown = out - {br.id for br in model.branches}
        if unknown:
            raise ValueError(f"unknown branch ids in outage set: {sorted(unknown)}")
        return cls({br.id: int(br.id in out) for br in model.branches})


_BLOCK_OPEN = re.compile(r"^\s*mpc\.(\w+)\s*=\s*(\[|\{)")


def _strip_comment(line: str) -> str:
    pos = line.find("%")
    return line if pos < 0 else line[:pos]


def parse_case(text) -> GridModel:
    """Parse the MATPOWER textual subset into a GridModel without locations.

    Accepts a string or a file-like object.  Comments (``%``) and blank
    lines are ignored; unknown ``mpc.*`` assignments and blocks are skipped.
    Raises :class:`ParseError` naming the offending line for a missing
    block, a ragged or short row, an unknown bus reference, a duplicate bus
    id, an unsupported bus type, or a case without a REF bus.
    """
    if not isinstance(text, str):
        text = text.read()
    blocks: dict[str, list[tuple[int, list[str]]]] = {}
    current: str | None = None
    skipping_close: str | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if skipping_close is not None:
            if skipping_close in line:
                skipping_close = None
            continue
        if current is None:
            m = _BLOCK_OPEN.match(line)
            if not m:
                continue
            name, opener = m.group(1), m.group(2)
            rest = line[m.end():].strip()
            closer = "];" if opener == "[" else "};"
            if name in ("bus", "gen", "branch"):
                if name in blocks:
                    raise ParseError(f"line {line_no}: duplicate mpc.{name} block")
                blocks[name] = []
                current = name
                line = rest
                if not line:
                    continue
            else:
                if closer not in rest:
                    skipping_close = closer
                continue
        # inside a target block: collect rows until "];"
        done = False
        if "];" in line:
            line = line.split("];", 1)[0].strip()
            done = True
        if line:
            tokens = line.rstrip(";").split()
            if tokens:
                blocks[current].append((line_no, tokens))
        if done:
            current = None
    if current is not None:
        raise ParseError(f"mpc.{current} block is not terminated with '];'")

    for name in ("bus", "gen", "branch"):
        if name not in blocks:
            raise ParseError(f"mpc.{name} block not found")
        rows = blocks[name]
        if not rows:
            raise ParseError(f"mpc.{name} block is empty")
        width = len(rows[0][1])
        for line_no, tokens in rows:
            if len(tokens) != width:
                raise ParseError(
                    f"line {line_no}: ragged mpc.{name} row "
                    f"({len(tokens)} columns, expected {width})"
                )
        if width < _MIN_COLUMNS[name]:
            raise ParseError(
                f"mpc.{name} rows have {width} columns; at least "
                f"{_MIN_COLUMNS[name]} are required"
            )

    def number(line_no: int, token: str, what: str) -> float:
        try:
            return float(token)
        except ValueError:
            raise ParseError(f"line {line_no}: non-numeric {what} {token!r}") from None

    buses = []
    seen_ids = set()
    for line_no, tokens in blocks["bus"]:
        bus_id = int(number(line_no, tokens[_BUS_ID], "bus id"))
        if bus_id in seen_ids:
            raise ParseError(f"line {line_no}: duplicate bus id {bus_id}")
        seen_ids.add(bus_id)
        type_code = int(number(line_no, tokens[_BUS_TYPE], "bus type"))
        try:
            bus_type = BusType(type_code)
        except ValueError:
            raise ParseError(f"line {line_no}: unsupported bus type {type_code}") from None
        load = number(line_no, tokens[_BUS_PD], "bus load")
        if load < 0.0:
            raise ParseError(f"line {line_no}: negative load {load} on bus {bus_id}")
        buses.append(Bus(bus_id, bus_type, load))
    if not any(bus.bus_type == BusType.REF for bus in buses):
        raise ParseError("case has no REF (type 3) bus")

    generators = []
    for line_no, tokens in blocks["gen"]:
        gen_bus = int(number(line_no, tokens[_GEN_BUS], "generator bus"))
        if gen_bus not in seen_ids:
            raise ParseError(f"line {line_no}: generator references unknown bus {gen_bus}")
        generators.append((gen_bus, number(line_no, tokens[_GEN_PMAX], "generator Pmax")))

    branches = []
    for idx, (line_no, tokens) in enumerate(blocks["branch"], start=1):
        from_bus = int(number(line_no, tokens[_BR_FROM], "branch from-bus"))
        to_bus = int(number(line_no, tokens[_BR_TO], "branch to-bus"))
        for bus_id in (from_bus, to_bus):
            if bus_id not in seen_ids:
                raise ParseError(f"line {line_no}: branch references unknown bus {bus_id}")
        if from_bus == to_bus:
            raise ParseError(f"line {line_no}: branch connects bus {from_bus} to itself")
        status = number(line_no, tokens[_BR_STATUS], "branch status")
        branches.append(Branch(idx, from_bus, to_bus, status != 0.0))

    return GridModel(tuple(buses), tuple(branches), tuple(generators))


def load_geo(text, model: GridModel) -> GridModel:
    """Attach bus coordinates from a CSV with header ``bus_id,lat_deg,lon_deg``.

    Every bus of the model must appear exactly once; rows for unknown buses
    are errors.  Returns a new, fully located GridModel.
    """
    import csv
    import io

    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("coordinate CSV is empty") from None
    if tuple(h.strip() for h in header) != ("bus_id", "lat_deg", "lon_deg"):
        raise ParseError(
            f"coordinate CSV header must be bus_id,lat_deg,lon_deg, got {','.join(header)}"
        )
    known = {bus.id for bus in model.buses}
    locations: dict[int, GeoPoint] = {}
    for i, raw in enumerate(reader, start=2):
        if not raw or all(not cell.strip() for cell in raw):
            continue
        if len(raw) != 3:
            raise ParseError(f"coordinate line {i}: expected 3 fields, got {len(raw)}")
        try:
            bus_id = int(raw[0])
            point = GeoPoint(float(raw[1]), float(raw[2]))
        except ValueError as exc:
            raise ParseError(f"coordinate line {i}: {exc}") from None
        if bus_id not in known:
            raise ParseError(f"coordinate line {i}: unknown bus id {bus_id}")
        if bus_id in locations:
            raise ParseError(f"coordinate line {i}: duplicate bus id {bus_id}")
        locations[bus_id] = point
    missing = known - locations.keys()
    if missing:
        raise ParseError(f"coordinate CSV is missing buses {sorted(missing)[:10]}")
    buses = tuple(replace(bus, location=locations[bus.id]) for bus in model.buses)
    return GridModel(buses, model.branches, model.generators)


class _Topology:
    """Index-based view of a grid for repeated connectivity evaluations.

    Branch arrays are ordered by ascending branch id, which is also the
    fixed outage-draw order of the Monte-Carlo engine.
    """

    def __init__(self, model: GridModel):
        self.bus_index = {bus.id: i for i, bus in enumerate(model.buses)}
        branches = sorted(model.branches, key=lambda b: b.id)
        self.branch_ids = [br.id for br in branches]
        self.from_idx = [self.bus_index[br.from_bus] for br in branches]
        self.to_idx = [self.bus_index[br.to_bus] for br in branches]
        self.in_service = [br.in_service_initially for br in branches]
        self.loads = [bus.load_mw for bus in model.buses]
        self.total_load = sum(self.loads)
        self.gen_entries = [(self.bus_index[bus_id], cap) for bus_id, cap in model.generators]
        self.ref_buses = [
            (self.bus_index[bus.id], bus.id)
            for bus in model.buses
            if bus.bus_type == BusType.REF
        ]
        if not self.ref_buses:
            raise ValueError("grid has no REF bus")
        self.n_buses = len(model.buses)
        self.n_branches = len(branches)

    def loss(self, delta) -> float:
        """Load disconnected from the main grid for a branch-aligned delta
        vector (ordered like ``branch_ids``)."""
        parent = list(range(self.n_buses))

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        from_idx, to_idx, in_service = self.from_idx, self.to_idx, self.in_service
        for pos in range(self.n_branches):
            if in_service[pos] and not delta[pos]:
                ra, rb = find(from_idx[pos]), find(to_idx[pos])
                if ra != rb:
                    parent[ra] = rb

        gen_by_root: dict[int, float] = {}
        for idx, cap in self.gen_entries:
            root = find(idx)
            gen_by_root[root] = gen_by_root.get(root, 0.0) + cap

        # Main grid: the REF component; several REF buses in different
        # components resolve to the one with the most generation capacity,
        # ties to the lowest REF bus id.
        main_root = None
        best_key = None
        for idx, bus_id in self.ref_buses:
            root = find(idx)
            key = (gen_by_root.get(root, 0.0), -bus_id)
            if best_key is None or key > best_key:
                best_key = key
                main_root = root

        main_load = 0.0
        for i, load in enumerate(self.loads):
            if load and find(i) == main_root:
                main_load += load
        return self.total_load - main_load


def disconnected_load(model: GridModel, outages: OutageState) -> float:
    """MW of load disconnected or islanded from the main grid.

    The graph is built over initially-in-service branches whose outage flag
    is 0; the result is the total load on buses outside the main component.
    """
    topo = _Topology(model)
    try:
        delta = [outages.delta[bid] for bid in topo.branch_ids]
    except KeyError as exc:
        raise ValueError(f"outage state is missing branch id {exc.args[0]}") from None
    return topo.loss(delta)
