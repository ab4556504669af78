import io
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reroute.errors import FormatError
from reroute.ingest import (
    EuMembership,
    FlowType,
    Provenance,
    TradeRecord,
    aggregate_eu,
    harmonize_flow_types,
    load_eu_membership,
    mirror_average,
    parse_trade_records,
)
from reroute.periods import YearMonth

from oracles import brute_force_mirror

HEADER = "period,reporter,partner,flow_type,hs6,value_usd,quantity_kg\n"
DEC15 = YearMonth(2015, 12)


def rec(reporter, partner, flow="import", value=None, quantity=None, hs6="690710", period=DEC15):
    return TradeRecord(period, reporter, partner, FlowType(flow), hs6, value, quantity)


def parse(text):
    return parse_trade_records(io.BytesIO(text.encode()))


class TestParse:
    def test_field_mapping(self):
        res = parse(HEADER + "2015-12,CHN,EU,import,690710,1000,500\n")
        assert res.errors == []
        assert res.records == [rec("CHN", "EU", "import", 1000.0, 500.0)]

    def test_empty_body(self):
        assert parse(HEADER).records == []

    def test_reporter_equals_partner_rejected(self):
        res = parse(HEADER + "2015-12,CHN,EU,import,690710,1,1\n2015-12,CHN,CHN,import,690710,1,1\n")
        assert len(res.records) == 1
        assert res.errors[0].line == 3
        assert "reporter equals partner" in res.errors[0].message

    def test_missing_fields_and_text_stream(self):
        res = parse_trade_records(io.StringIO(HEADER + "2015-12,CHN,EU,export,690710,,\n"))
        assert res.records[0].value is None and res.records[0].quantity is None

    @pytest.mark.parametrize(
        "row",
        [
            "2015-12,CHN,EU,import,69071,1,1",
            "2015-12,chn,EU,import,690710,1,1",
            "2015-13,CHN,EU,import,690710,1,1",
            "2015-12,CHN,EU,import,690710,-5,1",
            "2015-12,CHN,EU,smuggle,690710,1,1",
            "2015-12,CHN,EU,import,690710,nan,1",
        ],
    )
    def test_malformed_rows_collected(self, row):
        good = "2015-12,CHN,EU,import,690710,1,1\n"
        res = parse(HEADER + good * 2 + row + "\n")
        assert len(res.records) == 2
        assert [e.line for e in res.errors] == [4]

    def test_mostly_malformed_is_fatal(self):
        with pytest.raises(FormatError, match="malformed"):
            parse(HEADER + "2015-12,CHN,CHN,import,690710,1,1\n" * 3 + "2015-12,CHN,EU,import,690710,1,1\n")

    def test_bad_header_is_fatal(self):
        with pytest.raises(FormatError, match="lacks columns"):
            parse("period,reporter\n2015-12,CHN\n")

    def test_alternate_delimiter(self):
        res = parse_trade_records(io.StringIO(HEADER.replace(",", ";") + "2015-12;CHN;EU;import;690710;3;4\n"), ";")
        assert res.records[0].value == 3.0


class TestHarmonize:
    def test_reimport_becomes_import(self):
        assert harmonize_flow_types([rec("EU", "CHN", "re_import", 10.0)]) == [rec("EU", "CHN", "import", 10.0)]

    def test_collisions_summed(self):
        out = harmonize_flow_types([rec("EU", "CHN", "import", 10.0), rec("EU", "CHN", "re_import", 5.0)])
        assert out == [rec("EU", "CHN", "import", 15.0)]

    def test_export_unchanged(self):
        r = rec("CHN", "EU", "export", 7.0, 2.0)
        assert harmonize_flow_types([r]) == [r]

    def test_reexport_becomes_export_missing_plus_present(self):
        out = harmonize_flow_types([rec("CHN", "EU", "export", 7.0, None), rec("CHN", "EU", "re_export", None, 3.0)])
        assert out == [rec("CHN", "EU", "export", 7.0, 3.0)]


class TestAggregateEu:
    eu = EuMembership.default()

    def test_intra_eu_dropped(self):
        assert aggregate_eu([rec("FRA", "DEU", "import", 5.0)], self.eu) == []

    def test_members_collapse_and_sum(self):
        out = aggregate_eu([rec("DEU", "CHN", "import", 7.0), rec("ITA", "CHN", "import", 3.0)], self.eu)
        assert out == [rec("EU", "CHN", "import", 10.0)]

    def test_extra_eu_untouched(self):
        r = rec("USA", "CHN", "import", 4.0)
        assert aggregate_eu([r], self.eu) == [r]

    def test_dated_membership(self):
        text = "country,member_from,member_to\nDEU,,\nHRV,2013-07,\n"
        eu = load_eu_membership(io.StringIO(text))
        before = rec("HRV", "CHN", "import", 1.0, period=YearMonth(2013, 6))
        after = rec("HRV", "CHN", "import", 1.0, period=YearMonth(2013, 7))
        out = aggregate_eu([before, after], eu)
        assert [r.reporter for r in out] == ["HRV", "EU"]

    def test_label_collision_rejected(self):
        with pytest.raises(ValueError):
            EuMembership(frozenset({"EU", "DEU"}))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.sampled_from(["DEU", "FRA", "ITA", "CHN", "USA", "MYS"]),
                              st.sampled_from(["DEU", "FRA", "ITA", "CHN", "USA", "MYS"]),
                              st.integers(0, 1000)), max_size=30))
    def test_pairs_shrink_and_extra_eu_value_kept(self, rows):
        recs = [rec(a, b, "import", float(v)) for a, b, v in rows if a != b]
        out = aggregate_eu(recs, self.eu)
        assert len({(r.reporter, r.partner) for r in out}) <= len({(r.reporter, r.partner) for r in recs})
        extra = sum(r.value for r in recs if not (r.reporter in self.eu.members and r.partner in self.eu.members))
        assert sum(r.value for r in out) == pytest.approx(extra, abs=0)


class TestMirror:
    def test_average_of_both_reports(self):
        out = mirror_average([rec("CHN", "EU", "export", 100.0), rec("EU", "CHN", "import", 120.0)])
        assert len(out) == 1
        o = out[0]
        assert (o.origin, o.destination, o.value, o.provenance) == ("CHN", "EU", 110.0, Provenance.MIRROR_AVERAGED)

    def test_single_report_passes_through(self):
        (o,) = mirror_average([rec("EU", "CHN", "import", 120.0)])
        assert (o.origin, o.destination, o.value, o.provenance) == ("CHN", "EU", 120.0, Provenance.DESTINATION_REPORTED)
        (o,) = mirror_average([rec("CHN", "EU", "export", 90.0)])
        assert o.provenance is Provenance.ORIGIN_REPORTED

    def test_fieldwise_average_over_present_fields(self):
        records = [rec("CHN", "EU", "export", 100.0, None), rec("EU", "CHN", "import", 120.0, 50.0)]
        oracle = brute_force_mirror(records)
        (o,) = mirror_average(records)
        assert oracle[o.key] == (110.0, 50.0)
        assert (o.value, o.quantity) == (110.0, 50.0)

    def test_matches_brute_force_on_random_reports(self):
        rng = random.Random(7)
        countries = ["CHN", "EU", "MYS", "VNM", "USA"]
        records = []
        for _ in range(300):
            a, b = rng.sample(countries, 2)
            v = None if rng.random() < 0.1 else float(rng.randint(0, 500))
            q = None if rng.random() < 0.3 else float(rng.randint(0, 500))
            records.append(
                rec(a, b, rng.choice(["import", "export", "re_import", "re_export"]), v, q,
                    hs6=rng.choice(["690710", "850134"]), period=YearMonth(2015, rng.randint(1, 3)))
            )
        oracle = brute_force_mirror(records)
        out = mirror_average(harmonize_flow_types(records))
        assert {o.key: (o.value, o.quantity) for o in out} == pytest.approx(oracle)
        assert len(out) == len(oracle)

    def test_unique_keys_and_provenance_invariant(self):
        records = [rec("CHN", "EU", "export", 1.0), rec("EU", "CHN", "import", 3.0), rec("MYS", "EU", "export", 2.0)]
        out = mirror_average(records)
        assert len({o.key for o in out}) == len(out)
        assert {o.provenance for o in out} == {Provenance.MIRROR_AVERAGED, Provenance.ORIGIN_REPORTED}

    def test_idempotent_on_own_output(self):
        records = [rec("CHN", "EU", "export", 100.0, 3.0), rec("EU", "CHN", "import", 121.0, 5.0),
                   rec("EU", "MYS", "import", 40.0)]
        first = mirror_average(records)
        again = mirror_average([rec(o.destination, o.origin, "import", o.value, o.quantity) for o in first])
        assert [(o.key, o.value, o.quantity) for o in again] == [(o.key, o.value, o.quantity) for o in first]

    def test_symmetric_reports_change_nothing(self):
        records = [rec("CHN", "EU", "export", 80.0), rec("EU", "CHN", "import", 80.0)]
        assert mirror_average(records)[0].value == 80.0

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 1e9), st.floats(0, 1e9))
    def test_reporter_swap_symmetry(self, a, b):
        one = mirror_average([rec("CHN", "EU", "export", a), rec("EU", "CHN", "import", b)])
        two = mirror_average([rec("CHN", "EU", "export", b), rec("EU", "CHN", "import", a)])
        assert one[0].value == two[0].value

    def test_order_independent(self):
        rng = random.Random(3)
        records = [
            rec("EU", "CHN", rng.choice(["import", "re_import"]), rng.random() * 1e6, rng.random())
            for _ in range(50)
        ] + [rec("CHN", "EU", "export", rng.random() * 1e6) for _ in range(20)]
        shuffled = records[:]
        rng.shuffle(shuffled)
        assert mirror_average(harmonize_flow_types(records)) == mirror_average(harmonize_flow_types(shuffled))
