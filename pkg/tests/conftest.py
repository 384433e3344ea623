"""Shared fixtures and independent oracles for the test suite.

The flood-fill loss oracle here is deliberately separate from the union-find
implementation in the package: equivalence tests compare the two.
"""

from __future__ import annotations

import math

import pytest

import stormgrid as sg
from stormgrid.geo import GeoPoint, LocalPoint, unproject_local
from stormgrid.grid import Branch, Bus, BusType, GridModel, load_geo, parse_case


@pytest.fixture(scope="session")
def history_text() -> str:
    return sg.data_path("history_sample.csv").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def case4_model() -> GridModel:
    model = parse_case(sg.data_path("case4.m").read_text(encoding="utf-8"))
    return load_geo(sg.data_path("case4_coords.csv").read_text(encoding="utf-8"), model)


@pytest.fixture(scope="session")
def case50_model() -> GridModel:
    model = parse_case(sg.data_path("case50_coastal.m").read_text(encoding="utf-8"))
    return load_geo(
        sg.data_path("case50_coastal_coords.csv").read_text(encoding="utf-8"), model
    )


def make_located_grid(origin: GeoPoint, buses, branches, generators=()):
    """Build a GridModel from local-frame bus placements.

    buses: (id, BusType, load_mw, (x_nmi, y_nmi)); branches: (id, from, to);
    generators: (bus_id, capacity_mw).
    """
    bus_objs = tuple(
        Bus(bus_id, BusType(bus_type), load, unproject_local(origin, LocalPoint(x, y)))
        for bus_id, bus_type, load, (x, y) in buses
    )
    branch_objs = tuple(Branch(bid, f, t) for bid, f, t in branches)
    return GridModel(bus_objs, branch_objs, tuple(generators))


def flood_fill_components(bus_ids, edges):
    """Independent connectivity oracle: BFS over an adjacency dict."""
    adjacency = {b: [] for b in bus_ids}
    for f, t in edges:
        adjacency[f].append(t)
        adjacency[t].append(f)
    seen = set()
    components = []
    for start in bus_ids:
        if start in seen:
            continue
        stack = [start]
        component = set()
        while stack:
            node = stack.pop()
            if node in component:
                continue
            component.add(node)
            stack.extend(n for n in adjacency[node] if n not in component)
        seen |= component
        components.append(component)
    return components


def flood_fill_loss(model: GridModel, out_branch_ids) -> float:
    """Oracle for disconnected load: flood fill + the main-grid rule."""
    out = set(out_branch_ids)
    edges = [
        (br.from_bus, br.to_bus)
        for br in model.branches
        if br.in_service_initially and br.id not in out
    ]
    components = flood_fill_components([b.id for b in model.buses], edges)
    gen_by_bus: dict[int, float] = {}
    for bus_id, cap in model.generators:
        gen_by_bus[bus_id] = gen_by_bus.get(bus_id, 0.0) + cap
    best = None
    main = None
    for component in components:
        refs = sorted(
            b.id for b in model.buses if b.id in component and b.bus_type == BusType.REF
        )
        if not refs:
            continue
        capacity = sum(gen_by_bus.get(b, 0.0) for b in component)
        key = (capacity, -refs[0])
        if best is None or key > best:
            best = key
            main = component
    assert main is not None, "oracle requires at least one REF bus"
    return sum(b.load_mw for b in model.buses if b.id not in main)


def enumerate_expected_loss(model: GridModel, q_by_branch: dict[int, float]) -> tuple[float, float]:
    """Exact (mean, std) of disconnected load when each listed branch is out
    independently with probability q (all other branches stay in).

    Enumerates all 2^L outage subsets against the flood-fill oracle.
    """
    ids = sorted(q_by_branch)
    mean = 0.0
    second = 0.0
    for mask in range(1 << len(ids)):
        prob = 1.0
        out = []
        for i, bid in enumerate(ids):
            if mask >> i & 1:
                prob *= q_by_branch[bid]
                out.append(bid)
            else:
                prob *= 1.0 - q_by_branch[bid]
        if prob == 0.0:
            continue
        loss = flood_fill_loss(model, out)
        mean += prob * loss
        second += prob * loss * loss
    variance = max(second - mean * mean, 0.0)
    return mean, math.sqrt(variance)
