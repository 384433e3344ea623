import itertools

import numpy as np
import pytest

import stormgrid as sg
from conftest import flood_fill_loss, make_located_grid
from stormgrid.geo import GeoPoint
from stormgrid.grid import (
    Branch,
    Bus,
    BusType,
    GridModel,
    OutageState,
    ParseError,
    disconnected_load,
    load_geo,
    parse_case,
)

MINIMAL_CASE = """function mpc = minimal
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1.0	0	138	1	1.05	0.95;
	2	1	10	0	0	0	1	1.0	0	138	1	1.05	0.95;
	3	1	20	0	0	0	1	1.0	0	138	1	1.05	0.95;
];
mpc.gen = [
	1	30	0	10	-10	1.0	100	1	100	0;
];
mpc.branch = [
	1	2	0.01	0.05	0	100	100	100	0	0	1;
	2	3	0.01	0.05	0	100	100	100	0	0	1;
];
"""


def chain_grid():
    """A(REF, gen) -- B(10 MW) -- C(20 MW), branches 1 and 2."""
    return make_located_grid(
        GeoPoint(29.0, -95.0),
        buses=[
            (1, 3, 0.0, (0.0, 0.0)),
            (2, 1, 10.0, (10.0, 0.0)),
            (3, 1, 20.0, (20.0, 0.0)),
        ],
        branches=[(1, 1, 2), (2, 2, 3)],
        generators=[(1, 100.0)],
    )


class TestParseCase:
    def test_minimal_case(self):
        model = parse_case(MINIMAL_CASE)
        assert len(model.buses) == 3
        assert len(model.branches) == 2
        assert model.generators == ((1, 100.0),)
        assert model.total_load_mw == 30.0
        assert model.n_loads == 2

    def test_bundled_case4(self):
        model = parse_case(sg.data_path("case4.m").read_text())
        assert len(model.buses) == 4
        assert len(model.branches) == 3
        assert len(model.generators) == 1
        assert model.total_gen_mw == 500.0
        assert model.n_loads == 3
        assert model.total_load_mw == 175.0

    def test_bundled_case50(self):
        model = parse_case(sg.data_path("case50_coastal.m").read_text())
        assert len(model.buses) == 51
        assert len(model.branches) == 66
        assert len(model.generators) == 7
        assert model.total_gen_mw == pytest.approx(5300.0)
        assert model.n_loads == 43
        assert model.total_load_mw == pytest.approx(4273.2)

    def test_reparse_counts_stable(self):
        first = parse_case(MINIMAL_CASE)
        second = parse_case(MINIMAL_CASE)
        assert first == second

    def test_missing_block(self):
        text = MINIMAL_CASE.replace("mpc.gen", "mpc.other")
        with pytest.raises(ParseError, match="mpc.gen"):
            parse_case(text)

    def test_ragged_row_names_line(self):
        text = MINIMAL_CASE.replace(
            "	2	3	0.01	0.05	0	100	100	100	0	0	1;",
            "	2	3	0.01	0.05	0	100	100	100	0	0	1	9	9	9;",
        )
        with pytest.raises(ParseError, match="line .*ragged"):
            parse_case(text)

    def test_branch_to_unknown_bus_names_line(self):
        text = MINIMAL_CASE.replace(
            "	2	3	0.01	0.05	0	100	100	100	0	0	1;",
            "	2	9	0.01	0.05	0	100	100	100	0	0	1;",
        )
        with pytest.raises(ParseError, match="unknown bus 9"):
            parse_case(text)

    def test_no_ref_bus(self):
        text = MINIMAL_CASE.replace(
            "	1	3	0	0	0	0	1	1.0	0	138	1	1.05	0.95;",
            "	1	2	0	0	0	0	1	1.0	0	138	1	1.05	0.95;",
        )
        with pytest.raises(ParseError, match="REF"):
            parse_case(text)

    def test_duplicate_bus_id(self):
        text = MINIMAL_CASE.replace(
            "	2	1	10	0	0	0	1	1.0	0	138	1	1.05	0.95;",
            "	1	1	10	0	0	0	1	1.0	0	138	1	1.05	0.95;",
        )
        with pytest.raises(ParseError, match="duplicate bus id 1"):
            parse_case(text)

    def test_unsupported_bus_type(self):
        text = MINIMAL_CASE.replace(
            "	2	1	10	0	0	0	1	1.0	0	138	1	1.05	0.95;",
            "	2	4	10	0	0	0	1	1.0	0	138	1	1.05	0.95;",
        )
        with pytest.raises(ParseError, match="bus type 4"):
            parse_case(text)

    def test_self_loop_branch(self):
        text = MINIMAL_CASE.replace(
            "	2	3	0.01	0.05	0	100	100	100	0	0	1;",
            "	2	2	0.01	0.05	0	100	100	100	0	0	1;",
        )
        with pytest.raises(ParseError, match="itself"):
            parse_case(text)

    def test_comments_and_unknown_blocks_ignored(self):
        text = MINIMAL_CASE + "\nmpc.gencost = [\n\t2 0 0 3 0.01 40 0;\n];\n% trailing comment\n"
        model = parse_case(text)
        assert len(model.buses) == 3

    def test_out_of_service_branch_flag(self):
        text = MINIMAL_CASE.replace(
            "	2	3	0.01	0.05	0	100	100	100	0	0	1;",
            "	2	3	0.01	0.05	0	100	100	100	0	0	0;",
        )
        model = parse_case(text)
        assert model.branches[1].in_service_initially is False


class TestLoadGeo:
    COORDS = "bus_id,lat_deg,lon_deg\n1,29.0,-95.0\n2,29.1,-95.1\n3,29.2,-95.2\n"

    def test_complete_file(self):
        model = load_geo(self.COORDS, parse_case(MINIMAL_CASE))
        assert model.located
        assert model.bus_by_id[2].location == GeoPoint(29.1, -95.1)

    def test_missing_bus_named(self):
        text = "bus_id,lat_deg,lon_deg\n1,29.0,-95.0\n2,29.1,-95.1\n"
        with pytest.raises(ParseError, match=r"missing buses \[3\]"):
            load_geo(text, parse_case(MINIMAL_CASE))

    def test_unknown_bus_rejected(self):
        with pytest.raises(ParseError, match="unknown bus id 9999"):
            load_geo(self.COORDS + "9999,29.0,-95.0\n", parse_case(MINIMAL_CASE))

    def test_duplicate_bus_rejected(self):
        with pytest.raises(ParseError, match="duplicate bus id 1"):
            load_geo(self.COORDS + "1,29.0,-95.0\n", parse_case(MINIMAL_CASE))

    def test_header_checked(self):
        with pytest.raises(ParseError, match="header"):
            load_geo("id,lat,lon\n1,29.0,-95.0\n", parse_case(MINIMAL_CASE))

    def test_wind_exempt_zero_length(self, case50_model):
        # branch 66 is the co-located substation tie in the bundled demo
        assert case50_model.wind_exempt_branch_ids() == frozenset({66})


class TestDisconnectedLoad:
    def test_no_outages_connected(self):
        model = chain_grid()
        assert disconnected_load(model, OutageState.no_outages(model)) == 0.0

    def test_cut_bc_islands_c(self):
        model = chain_grid()
        outages = OutageState.from_outage_ids(model, {2})
        assert disconnected_load(model, outages) == 20.0

    def test_cut_both_islands_b_and_c(self):
        model = chain_grid()
        outages = OutageState.from_outage_ids(model, {1, 2})
        assert disconnected_load(model, outages) == 30.0

    def test_outage_state_must_cover_all_branches(self):
        model = chain_grid()
        with pytest.raises(ValueError, match="missing branch id"):
            disconnected_load(model, OutageState({1: 0}))

    def test_initially_out_branch_never_connects(self):
        model = chain_grid()
        branches = (model.branches[0], Branch(2, 2, 3, in_service_initially=False))
        model = GridModel(model.buses, branches, model.generators)
        assert disconnected_load(model, OutageState.no_outages(model)) == 20.0

    def test_multiple_ref_capacity_tiebreak(self):
        # two disconnected halves, each with a REF bus; the main grid is the
        # half with more generation capacity
        model = make_located_grid(
            GeoPoint(29.0, -95.0),
            buses=[
                (1, 3, 5.0, (0.0, 0.0)),
                (2, 1, 10.0, (10.0, 0.0)),
                (3, 3, 7.0, (50.0, 0.0)),
                (4, 1, 20.0, (60.0, 0.0)),
            ],
            branches=[(1, 1, 2), (2, 3, 4)],
            generators=[(1, 100.0), (3, 900.0)],
        )
        loss = disconnected_load(model, OutageState.no_outages(model))
        assert loss == 15.0  # buses 1 and 2 are outside the high-capacity half

    def test_multiple_ref_equal_capacity_lowest_id_wins(self):
        model = make_located_grid(
            GeoPoint(29.0, -95.0),
            buses=[
                (1, 3, 5.0, (0.0, 0.0)),
                (2, 1, 10.0, (10.0, 0.0)),
                (3, 3, 7.0, (50.0, 0.0)),
                (4, 1, 20.0, (60.0, 0.0)),
            ],
            branches=[(1, 1, 2), (2, 3, 4)],
            generators=[(1, 100.0), (3, 100.0)],
        )
        loss = disconnected_load(model, OutageState.no_outages(model))
        assert loss == 27.0  # the component of REF bus 1 is the main grid

    def test_monotone_in_outage_set(self):
        rng = np.random.default_rng(61)
        model = _random_grid(rng, n_buses=9, n_branches=10)
        ids = [br.id for br in model.branches]
        for _ in range(200):
            subset = {b for b in ids if rng.random() < 0.35}
            superset = subset | {b for b in ids if rng.random() < 0.25}
            small = disconnected_load(model, OutageState.from_outage_ids(model, subset))
            large = disconnected_load(model, OutageState.from_outage_ids(model, superset))
            assert small <= large
            assert 0.0 <= small <= model.total_load_mw

    def test_exhaustive_flood_fill_equivalence(self):
        rng = np.random.default_rng(67)
        for _ in range(5):
            model = _random_grid(rng, n_buses=rng.integers(4, 13), n_branches=rng.integers(3, 11))
            ids = [br.id for br in model.branches]
            for r in range(len(ids) + 1):
                for out in itertools.combinations(ids, r):
                    got = disconnected_load(model, OutageState.from_outage_ids(model, out))
                    want = flood_fill_loss(model, out)
                    assert got == pytest.approx(want)


def _random_grid(rng, n_buses: int, n_branches: int) -> GridModel:
    """Random connected-ish grid with one REF bus and a couple of gens."""
    n_buses = int(n_buses)
    n_branches = int(n_branches)
    buses = [
        Bus(i + 1, BusType.REF if i == 0 else BusType.PQ, float(rng.integers(0, 50)), GeoPoint(29.0, -95.0))
        for i in range(n_buses)
    ]
    branches = []
    # spanning backbone then random extras
    for i in range(2, n_buses + 1):
        branches.append((i - 1, int(rng.integers(1, i)), i))
    while len(branches) < n_branches:
        a, b = rng.integers(1, n_buses + 1, 2)
        if a != b:
            branches.append((len(branches) + 1, int(a), int(b)))
    branches = [Branch(idx + 1, f, t) for idx, (_, f, t) in enumerate(branches[:n_branches])]
    gens = [(1, 100.0)]
    if n_buses > 3:
        gens.append((3, 50.0))
    return GridModel(tuple(buses), tuple(branches), tuple(gens))
