import pathlib

import pytest

import drillex

ROOT = pathlib.Path(__file__).resolve().parents[2]
CONFIG = ROOT / "data" / "toy" / "config.json"
COMPLAINT = {"tuple": {"District": "Ofla", "Year": "1986"}, "stat": "STD", "direction": "too_high"}


def test_view_has_five_years():
    view = drillex.Engine(CONFIG).view()
    assert view["groupby"] == ["District", "Year"]
    assert len(view["groups"]) == 5


def test_complaint_highlights_zata():
    rec = drillex.Engine(CONFIG).complain(COMPLAINT)
    assert rec["highlight"]["group"]["Village"] == "Zata"
    top = rec["hierarchies"][0]["top"]
    assert [c["score"] for c in top] == sorted(c["score"] for c in top)
    assert top[1]["group"]["Village"] == "Darube"


def test_drilldown_and_records():
    eng = drillex.Engine(CONFIG)
    view = eng.drilldown("Geo", {"District": "Ofla", "Year": 1986})
    assert len(view["groups"]) == 6
    rows = eng.records({"Village": "Zata"})
    assert len(rows) == 10
    assert all(r["Year"] == "1986" for r in rows)


def test_errors_are_translated():
    eng = drillex.Engine(CONFIG)
    with pytest.raises(drillex.Error, match="AtLeafLevel"):
        eng.drilldown("Time", {"District": "Ofla", "Year": "1986"})
    with pytest.raises(drillex.Error, match="InvalidComplaint"):
        eng.complain({"stat": "MEDIAN", "direction": "too_high"})


def test_synth_and_bench():
    acc = drillex.synth("missing", rho=1.0, trials=5)
    assert set(acc) == {"ours", "sensitivity", "support", "outlier"}
    assert acc["ours"] >= 0.8
    rows = drillex.bench(max_d=3, width=5)
    assert [r["rows"] for r in rows] == [5, 25, 125]
