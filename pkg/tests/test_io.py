import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from splitplot import CovarianceModel, DataSet, run_test
from splitplot.exceptions import SplitPlotError
from splitplot.io import (
    ParseError,
    dumps_json,
    format_dataset,
    loads_json,
    parse_covariance,
    parse_dataset,
    report_dict,
    sim_config_from_dict,
)
from splitplot.plotting import line_plot_svg

SMALL = "group,t1,t2,t3\nA,1,2,3\nA,4,5,6\nB,0.5,-1,2e3\nB,7,8,9\n"


class TestParseDataset:
    def test_small(self):
        ds = parse_dataset(SMALL)
        assert (ds.design.a, ds.design.n, ds.design.d) == (2, (2, 2), 3)
        assert ds.labels == ("A", "B")
        assert ds.groups[1][0, 2] == 2000.0

    def test_first_appearance_order(self):
        ds = parse_dataset("group,t1\nz,1\na,2\nz,3\n")
        assert ds.labels == ("z", "a")
        assert ds.design.n == (2, 1)

    def test_empty_cell(self):
        with pytest.raises(ParseError) as info:
            parse_dataset("group,t1,t2\nA,1,\n")
        assert (info.value.row, info.value.col) == (2, 3)
        assert "row 2, column 3" in str(info.value)

    def test_ragged(self):
        with pytest.raises(ParseError, match="row 3"):
            parse_dataset("group,t1,t2\nA,1,2\nA,1\n")

    def test_non_numeric(self):
        with pytest.raises(ParseError, match="column 2"):
            parse_dataset("group,t1\nA,abc\n")

    @pytest.mark.parametrize("text", ["", "group\n", "group,t1\n"])
    def test_degenerate_files(self, text):
        with pytest.raises(ParseError):
            parse_dataset(text)

    def test_large_round_trip(self, rng):
        groups = [rng.standard_normal((2500, 4)) * 10.0 ** rng.integers(-5, 6) for _ in range(4)]
        ds = DataSet.from_groups(groups, ["g1", "g2", "g3", "g4"])
        back = parse_dataset(format_dataset(ds))
        assert back.design == ds.design and back.labels == ds.labels
        for g, h in zip(ds.groups, back.groups):
            np.testing.assert_array_equal(g, h)

    @given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 4)),
                  elements=st.floats(allow_nan=False, allow_infinity=False)))
    def test_round_trip_exact(self, x):
        ds = DataSet.from_groups([x, x[::-1]], ["a", "b"])
        back = parse_dataset(format_dataset(ds))
        for g, h in zip(ds.groups, back.groups):
            np.testing.assert_array_equal(g, h)


class TestJson:
    @given(st.floats(allow_nan=False))
    def test_float_round_trip(self, x):
        assert loads_json(dumps_json({"x": x}))["x"] == x

    def test_non_finite(self):
        text = dumps_json({"a": math.inf, "b": -math.inf, "c": [math.nan]})
        json.loads(text)  # strict JSON
        back = loads_json(text)
        assert back["a"] == math.inf and back["b"] == -math.inf and math.isnan(back["c"][0])

    def test_seventeen_digits(self):
        assert dumps_json([0.1]).strip() == "[0.10000000000000001]"

    def test_report_schema(self, rng):
        ds = DataSet.from_groups([rng.standard_normal((n, 5)) for n in (8, 9)])
        rep = report_dict(run_test(ds, seed=1), ds, 0.05)
        assert list(rep) == [
            "tool", "version", "design", "hypothesis", "alpha", "upsilon", "seed",
            "statistic", "traces", "eta", "f_hat", "tau_hat", "critical_values",
            "p_value", "p_value_note", "decisions",
        ]
        assert set(rep["decisions"]) == {"psi_z", "psi_chi", "phi_star"}
        assert loads_json(dumps_json(rep)) == json.loads(json.dumps(rep))


class TestConfig:
    def test_from_dict(self):
        cfg = sim_config_from_dict({"a": 3, "d": 10, "covariance": "ar:0.6",
                                    "alternative": "trend", "deltas": [0, 1]})
        assert cfg.n == (15, 15, 20)
        assert cfg.covariance.spec() == "ar:0.6"
        assert cfg.deltas == (0.0, 1.0)

    @pytest.mark.parametrize("raw", [
        {"d": 5},
        {"a": 2, "d": 5, "colour": "red"},
        {"a": 2, "d": 5, "reps": "lots"},
        {"n": [6, 6], "a": 3, "d": 5},
        [1, 2],
    ])
    def test_malformed(self, raw):
        with pytest.raises(SplitPlotError):
            sim_config_from_dict(raw)

    @pytest.mark.parametrize("text, form", [("ar:0.3", "ar"), ("cs:0.2", "compound-symmetry"),
                                             ("identity", "identity")])
    def test_covariance(self, text, form):
        assert parse_covariance(text, 4).form == form

    @pytest.mark.parametrize("text", ["ar", "ar:x", "toeplitz:0.3", "ar:1.5"])
    def test_bad_covariance(self, text):
        with pytest.raises(SplitPlotError):
            parse_covariance(text, 4)


class TestSvg:
    def test_well_formed(self):
        svg = line_plot_svg({"one": ([0, 1, 2], [0.05, 0.3, 0.9]),
                             "two": ([0, 1, 2], [0.04, 0.2, 0.8])},
                            xlabel="delta", ylabel="rate", hline=0.05)
        root = ET.fromstring(svg)
        lines = [e for e in root.iter("{http://www.w3.org/2000/svg}polyline")]
        assert len(lines) == 2
        texts = [e.text for e in root.iter("{http://www.w3.org/2000/svg}text")]
        assert "delta" in texts and "rate" in texts and "one" in texts

    def test_empty(self):
        with pytest.raises(ValueError):
            line_plot_svg({}, xlabel="x", ylabel="y")
