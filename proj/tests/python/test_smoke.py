import json
import math
import os
from pathlib import Path

import pytest

import agentab

SRC = Path(os.environ.get("AGENTAB_SOURCE_DIR", Path(__file__).resolve().parents[2]))
CATALOG = str(SRC / "data" / "catalog.json")


def test_action_grammar():
    assert agentab.parse_action("Click_product(3)") == {"kind": "click_product", "index": 3}
    assert agentab.parse_action("Click_filter_option(Brand: Sony)") == {
        "kind": "click_filter_option",
        "group": "Brand",
        "value": "Sony",
    }
    assert agentab.parse_action("nothing here") is None
    a = {"kind": "search", "query": 'say "hi"'}
    assert agentab.parse_action(agentab.serialize_action(a)) == a


def test_statistics():
    t = agentab.two_sample_t([1, 2, 3], [2, 3, 4])
    assert t["df"] == 4
    assert t["statistic"] == pytest.approx(-1.224744871, abs=1e-9)
    w = agentab.two_sample_t([1, 2, 3], [2, 3, 9], welch=True)
    assert w["test_kind"] == "welch_t"
    c = agentab.chi_square_2x2(404, 96, 414, 86)
    assert c["statistic"] == pytest.approx(0.6717, abs=1e-3)
    assert 0 < c["p_value"] < 1
    with pytest.raises(ValueError, match="degenerate variance"):
        agentab.two_sample_t([3, 3], [4, 4])


def test_mock_shop_panels():
    q = "solar filter for telescope"
    ids = agentab.search(CATALOG, q)
    assert 0 < len(ids) <= 10
    full = dict(agentab.filter_options(CATALOG, q))
    reduced = dict(agentab.filter_options(CATALOG, q, threshold=0.8))
    assert dict(agentab.filter_options(CATALOG, q, threshold=0.0)) == full
    for group, values in reduced.items():
        assert set(values) <= set(full[group])


def test_pipeline(tmp_path):
    out = Path(os.environ.get("AGENTAB_SCRATCH_DIR", tmp_path)) / "python_pipeline"
    r = agentab.run_pipeline(str(SRC / "data" / "configs" / "demo.json"), output_dir=str(out), parallelism=2)
    assert r["sessions"] == 100
    assert r["abandoned"] == 0
    report = json.loads(Path(r["report_json"]).read_text())
    assert [row["metric"] for row in report["table"]][:3] == ["search", "click_product", "click_filter_option"]
    assert not math.isnan(report["table"][-1]["values"]["control"])
    with pytest.raises(ValueError):
        agentab.run_pipeline(str(SRC / "data" / "configs" / "missing.json"))
