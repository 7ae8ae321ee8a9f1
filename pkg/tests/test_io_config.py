import json

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from vgwarp.config import DEFAULTS, from_dict, load_config
from vgwarp.exceptions import ConfigError, DataError, ParameterError
from vgwarp.io import (
    SpatialDataset,
    ingest_csv,
    read_csv_table,
    sha256_file,
    split,
    transform,
    write_csv,
    write_json,
)

SCENARIO = {
    "grid": {"xmin": 0.0, "xmax": 2.0, "ymin": 0.0, "ymax": 2.0, "nx": 5, "ny": 5},
    "nu": 0.6,
    "regions": [{"box": [[0, 2], [0, 2]], "kernel": [[0.1, 0], [0, 0.1]]}],
}


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestIngest:
    def test_well_formed(self, tmp_path):
        d = ingest_csv(write(tmp_path, "x,y,value\n0,0,1\n1,0,2\n0,1,3\n"))
        assert len(d) == 3
        assert_allclose(d.values, [1, 2, 3])
        assert d.n_dropped == 0 and not d.duplicates

    def test_missing_value_dropped(self, tmp_path):
        d = ingest_csv(write(tmp_path, "x,y,value\n0,0,1\n1,0,\n0,1,NA\n2,2,4\n"))
        assert len(d) == 2
        assert d.n_dropped == 2

    def test_custom_columns_and_extra_fields(self, tmp_path):
        d = ingest_csv(write(tmp_path, "id,lon,lat,prcp\na,1,2,3\nb,4,5,6\n"), "lon", "lat", "prcp")
        assert_allclose(d.sites, [[1, 2], [4, 5]])

    def test_duplicates_flagged(self, tmp_path):
        assert ingest_csv(write(tmp_path, "x,y,value\n0,0,1\n0,0,2\n")).duplicates

    def test_bad_number_reports_line(self, tmp_path):
        with pytest.raises(DataError, match=":3:"):
            ingest_csv(write(tmp_path, "x,y,value\n0,0,1\n1,zero,2\n"))

    @pytest.mark.parametrize("text", ["", "x,y,value\n", "x,y,value\n,,\n", "a,b,c\n1,2,3\n"])
    def test_unusable(self, tmp_path, text):
        with pytest.raises(DataError):
            ingest_csv(write(tmp_path, text))

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            ingest_csv(tmp_path / "nope.csv")


class TestTransform:
    def data(self, values):
        v = np.asarray(values, float)
        return SpatialDataset(np.zeros((len(v), 2)), v)

    def test_identity(self):
        d, st = transform(self.data([1.0, 2.0]))
        assert_allclose(d.values, [1, 2])
        assert_allclose(st.inverse(d.values), [1, 2])

    def test_log(self):
        d, _ = transform(self.data([1, np.e, np.e ** 2]), ("log",))
        assert_allclose(d.values, [0, 1, 2], atol=1e-15)

    def test_round_trip(self, rng):
        v = rng.lognormal(size=30)
        d, st = transform(self.data(v), ("log", "zscore"))
        assert d.values.mean() == pytest.approx(0, abs=1e-12)
        assert_allclose(st.inverse(d.values), v, rtol=1e-12)
        assert_allclose(st.inverse_sd(np.ones(2)), st.sd)

    def test_log_nonpositive(self):
        with pytest.raises(DataError, match=r"\[1, 2\]"):
            transform(self.data([1.0, 0.0, -1.0]), ("log",))

    def test_unknown(self):
        with pytest.raises(ParameterError):
            transform(self.data([1.0]), ("sqrt",))


class TestSplit:
    def data(self, n):
        return SpatialDataset(np.column_stack([np.arange(n), np.zeros(n)]), np.arange(n, dtype=float))

    def test_counts_and_determinism(self):
        train, test = split(self.data(254), 3, 30)
        assert (len(train), len(test)) == (224, 30)
        again = split(self.data(254), 3, 30)[1]
        assert_allclose(test.ids, again.ids)
        assert not set(train.ids) & set(test.ids)

    def test_uniform_over_seeds(self):
        n, counts = 40, np.zeros(40)
        for seed in range(100):
            counts[split(self.data(n), seed, 10)[1].ids] += 1
        assert stats.chisquare(counts).pvalue > 0.001

    def test_too_many(self):
        with pytest.raises(ParameterError):
            split(self.data(5), 0, 5)


class TestWriters:
    def test_csv_round_trip(self, tmp_path):
        p = write_csv(tmp_path / "a.csv", ["a", "b"], [[0.1, 1], [1 / 3, True]])
        assert p.read_text() == "a,b\n0.1,1\n0.3333333333333333,1\n"
        header, rows = read_csv_table(p)
        assert header == ["a", "b"]
        assert rows[1, 0] == 1 / 3

    def test_json_is_canonical(self, tmp_path):
        a = write_json(tmp_path / "a.json", {"b": np.float64(1.5), "a": np.arange(2), "c": float("nan")})
        b = write_json(tmp_path / "b.json", {"a": [0, 1], "c": None, "b": 1.5})
        assert sha256_file(a) == sha256_file(b)
        assert json.loads(a.read_text())["c"] is None


class TestConfig:
    def test_defaults_and_derived_seeds(self):
        cfg = from_dict({"seed": 7, "scenario": SCENARIO})
        assert cfg.split_seed == 8 and cfg.fit_seed == 9
        assert not cfg.with_nugget()
        assert cfg["registration"]["ht_rel_tol"] == DEFAULTS["registration"]["ht_rel_tol"]

    def test_overrides(self, tmp_path):
        cfg = from_dict({"seed": 7, "scenario": SCENARIO}, seed=11, out=tmp_path)
        assert cfg.seed == 11 and cfg["out"] == str(tmp_path)

    def test_hash_changes_with_content(self):
        a = from_dict({"seed": 7, "scenario": SCENARIO})
        b = from_dict({"seed": 8, "scenario": SCENARIO})
        assert a.hash() != b.hash()
        assert a.hash() == from_dict({"seed": 7, "scenario": SCENARIO}).hash()
        assert a.hash() == from_dict({"seed": 7, "scenario": SCENARIO}, out="elsewhere").hash()

    @pytest.mark.parametrize(
        "bad, msg",
        [
            ({"seed": 7, "scenario": SCENARIO, "bogus": 1}, "unknown key"),
            ({"seed": 7, "scenario": SCENARIO, "fit": {"nope": 1}}, "unknown key 'fit.nope'"),
            ({"scenario": SCENARIO}, "seed is required"),
            ({"seed": -1, "scenario": SCENARIO}, "unsigned"),
            ({"seed": 7}, "regions"),
            ({"seed": 7, "scenario": SCENARIO, "registration": {"ht_rel_tol": 2}}, "ht_rel_tol"),
            ({"seed": 7, "mode": "other"}, "mode"),
            ({"seed": 7, "mode": "ingest", "data": {"path": "/nonexistent.csv"}}, "not found"),
            ({"seed": 7, "scenario": SCENARIO, "fit": "x"}, "must be a table"),
        ],
    )
    def test_invalid(self, bad, msg):
        with pytest.raises(ConfigError, match=msg):
            from_dict(bad)

    def test_ingest_defaults_nugget_on_and_relative_path(self, tmp_path):
        write(tmp_path, "x,y,value\n0,0,1\n")
        cfg_path = write(tmp_path, 'mode = "ingest"\nseed = 1\n[data]\npath = "d.csv"\n'
                                   "[partition]\nboxes = [[[0, 1], [0, 1]]]\n", "c.toml")
        cfg = load_config(cfg_path)
        assert cfg.with_nugget() and cfg.deformed_with_nugget()
        assert cfg["data"]["path"] == str(tmp_path / "d.csv")

    def test_toml_syntax_error(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, "seed = = 1", "c.toml"))
