import json
import xml.dom.minidom

import numpy as np

from milpcbf.report import (compare_svg, compare_table, csv_header, run_svg, summary_dict, to_csv,
                            to_json, _segments)
from milpcbf.scenario import from_dict
from milpcbf.sim import run

SC = from_dict({
    "robot": [[0.2, 0], [-0.1, 0.15], [-0.1, -0.15]],
    "obstacles": [[[2.5, 1.2], [3.5, 1.2], [3.5, 2.8], [2.5, 2.8]], [[1, 3], [2, 3], [1.5, 3.8]]],
    "start": [0.5, 2.0], "goal": [5.5, 2.2], "workspace": [0, 0, 6, 4],
    "params": {"t_final": 1.0},
}, "report")


def test_csv_layout():
    lg = run(SC, "MilpMpcCbf")
    text = to_csv(lg)
    lines = text.splitlines()
    assert lines[0] == "t,px,py,u_ref_x,u_ref_y,u_star_x,u_star_y,h_1,h_2"
    assert len(lines) == len(lg) + 1
    back = np.loadtxt(text.splitlines()[1:], delimiter=",")
    assert np.array_equal(back[:, 1:3], lg.x)
    assert np.array_equal(back[:, -2:], lg.h)
    assert "-0.0," not in text


def test_csv_header_double():
    lg = run(SC.with_params(t_final=0.05), "ClfCbfQp")
    assert csv_header(lg)[:3] == ["t", "px", "py"]
    sc = from_dict({**_doc(), "dynamics": "double"}, "d")
    lg = run(sc, "ClfCbfQp")
    assert csv_header(lg)[3:5] == ["vx", "vy"]


def _doc():
    return {"robot": [[0.2, 0], [-0.1, 0.15], [-0.1, -0.15]], "obstacles": [],
            "start": [0.5, 2.0], "goal": [0.6, 2.0], "params": {"t_final": 0.1}}


def test_json_summary_handles_infinity():
    sc = from_dict(_doc(), "free")
    lg = run(sc, "MilpMpcCbf")
    d = json.loads(to_json(lg, sc))
    assert d["min_h"] == "inf"
    assert d["controller"] == "MilpMpcCbf" and d["dynamics"] == "single"
    assert summary_dict(lg)["reached"] is True


def test_svgs_are_well_formed():
    logs = {c: run(SC, c) for c in ("MilpMpcCbf", "MilpMpcOnly", "ClfCbfQp")}
    for svg in [run_svg(SC, logs["MilpMpcCbf"]), compare_svg(SC, logs)]:
        doc = xml.dom.minidom.parseString(svg)
        assert doc.documentElement.tagName == "svg"
        assert len(doc.getElementsByTagName("polygon")) >= 5
    table = compare_table(logs)
    assert table.count("\n") == 5 and "MilpMpcOnly" in table


def test_segments():
    assert _segments([False, True, True, False, True]) == [(1, 3), (4, 5)]
    assert _segments([]) == []
