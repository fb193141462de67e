import json

import numpy as np

from nonlocal_ap.ap_analysis import APDiagram, DiagramRow
from nonlocal_ap.reports import diagram_csv, dumps, fmt


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, -2.0, 1e-300, 123456789.123456789):
        assert float(fmt(x)) == x
    assert fmt(1.0) == "1" and fmt(0.1) == "0.10000000000000001"


def test_dumps_is_valid_json_with_trailing_newline():
    text = dumps({"a": np.float64(0.1), "b": np.arange(3), "c": None, "d": float("nan"), "e": True, "f": {}})
    assert text.endswith("}\n")
    data = json.loads(text)
    assert data == {"a": 0.1, "b": [0, 1, 2], "c": None, "d": None, "e": True, "f": {}}
    assert '"b": [0, 1, 2]' in text


def test_diagram_csv_padding_and_diagnostics():
    class Rep:
        def __init__(self, v):
            self.solution = np.array(v, dtype=float)

    diag = APDiagram([DiagramRow(-1.0, [Rep([-2, -2]), Rep([1, 1.5])]), DiagramRow(0.5, [])], ["note"])
    assert diagram_csv(diag) == "t,count,u_min_1,u_max_1,u_min_2,u_max_2\n-1,2,-2,-2,1,1.5\n0.5,0,,,,\n# note\n"
