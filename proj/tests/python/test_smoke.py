import csv
import json

import pytest

import flowforge

ONE_TCP = json.dumps(
    {
        "seed": 7,
        "conversations": [
            {
                "src": "10.0.0.1",
                "dst": "10.0.0.2",
                "sport": 40000,
                "dport": 80,
                "proto": "tcp",
                "packets": 10,
                "mean_gap": 0.1,
                "payload": 200,
                "label": "DoS",
            }
        ],
    }
)


def test_profiles_headers():
    p = flowforge.profiles()
    assert set(p) == {"botiot", "iot23", "ciciot23", "full"}
    assert p["ciciot23"][7:] == ["Sport", "Dport", "Dur", "Max", "Min", "Rate", "Mean", "StdDev", "Label"]


def test_gen_export_label_stats(tmp_path):
    g = flowforge.gen(str(tmp_path / "one.pcap"), scenario_json=ONE_TCP)
    assert g["ip_packets"] == 10
    assert g["flows"] == 1

    summary = flowforge.export(str(tmp_path / "one.pcap"), profile="iot23", rules=g["rules_csv"],
                               out_dir=str(tmp_path / "out"))
    assert summary["rows"] == 1
    out = tmp_path / "out" / "one.iot23.csv"
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert rows[0]["Label"] == "DoS"
    assert int(rows[0]["SrcPkts"]) + int(rows[0]["DstPkts"]) == 10

    empty = tmp_path / "empty.csv"
    empty.write_text("src_addr,dst_addr,sport,dport,proto,start_time,end_time,label,bidirectional\n")
    counts = flowforge.label(str(out), str(empty), str(tmp_path / "relabelled.csv"))
    assert counts == [("Benign", 1)]
    assert flowforge.stats(str(tmp_path / "relabelled.csv")) == [("Benign", 1)]


def test_extract_rows_and_identities(tmp_path):
    flowforge.gen(str(tmp_path / "r.pcap"), seed=3, packets=2000)
    rows = flowforge.extract(str(tmp_path / "r.pcap"), interval=5.0)
    assert rows
    for r in rows:
        assert r["TotPkts"] == r["SrcPkts"] + r["DstPkts"]
        if r["Dur"] > 0:
            assert r["Rate"] * r["Dur"] == pytest.approx(r["TotPkts"] - 1, rel=1e-9)
        else:
            assert r["Rate"] == 0.0
    windows = flowforge.extract(str(tmp_path / "r.pcap"), mode="window", window_size=100)
    assert all(w["TotPkts"] == 100 for w in windows[:-1])


def test_errors(tmp_path):
    with pytest.raises(flowforge.ExportError, match="missing.pcap"):
        flowforge.export(str(tmp_path / "missing.pcap"), out_dir=str(tmp_path))
    with pytest.raises(flowforge.ScenarioError):
        flowforge.gen(str(tmp_path / "x.pcap"), scenario_json="{")
    with pytest.raises(ValueError):
        flowforge.extract(str(tmp_path / "x.pcap"), mode="sideways")
