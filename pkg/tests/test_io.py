import json

import numpy as np
import pytest

from tvsq import io
from tvsq.data import TrainingDataset, TVSQTrace
from tvsq.dataprep import SubjectScorePanel
from tvsq.errors import DatasetFormatError
from tvsq.model import HWParams


@pytest.fixture
def dataset(rng):
    stsq = rng.uniform(30, 70, (3, 25))
    tvsq = stsq + rng.normal(0, 1, stsq.shape) / 3
    ci = rng.uniform(0.5, 3, stsq.shape)
    return TrainingDataset.from_arrays(stsq, tvsq, ci, groups=["a", "a", "b"])


class TestTraceCsv:
    def test_round_trip_exact(self, tmp_path, rng):
        stsq = rng.uniform(0, 100, 40)
        tr = TVSQTrace(rng.uniform(0, 100, 40), rng.uniform(0.1, 5, 40))
        io.write_trace_csv(tmp_path / "x.csv", stsq, tr)
        s2, t2 = io.read_trace_csv(tmp_path / "x.csv")
        assert np.array_equal(s2, stsq)
        assert np.array_equal(t2.values, tr.values) and np.array_equal(t2.ci, tr.ci)

    def test_crlf_equals_lf(self, tmp_path):
        body = ["t,stsq,tvsq,ci", "1,50.0,49.5,2.0", "2,55.0,51.25,2.0"]
        (tmp_path / "lf.csv").write_bytes("\n".join(body).encode() + b"\n")
        (tmp_path / "crlf.csv").write_bytes("\r\n".join(body).encode() + b"\r\n")
        a = io.read_trace_csv(tmp_path / "lf.csv")
        b = io.read_trace_csv(tmp_path / "crlf.csv")
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1].values, b[1].values)

    def test_column_order_free(self, tmp_path):
        (tmp_path / "x.csv").write_text("ci,tvsq,t,stsq\n2,40,1,45\n2,41,2,46\n")
        s, tr = io.read_trace_csv(tmp_path / "x.csv")
        assert s.tolist() == [45.0, 46.0] and tr.values.tolist() == [40.0, 41.0]

    def test_missing_column(self, tmp_path):
        (tmp_path / "x.csv").write_text("t,stsq,tvsq\n1,50,50\n")
        with pytest.raises(DatasetFormatError) as exc:
            io.read_trace_csv(tmp_path / "x.csv")
        assert "ci" in str(exc.value) and exc.value.line == 1

    def test_bad_number_location(self, tmp_path):
        (tmp_path / "x.csv").write_text("t,stsq,tvsq,ci\n1,50,50,2\n2,50,abc,2\n")
        with pytest.raises(DatasetFormatError) as exc:
            io.read_trace_csv(tmp_path / "x.csv")
        assert (exc.value.line, exc.value.column) == (3, 3)

    def test_non_finite(self, tmp_path):
        (tmp_path / "x.csv").write_text("t,stsq,tvsq,ci\n1,nan,50,2\n")
        with pytest.raises(DatasetFormatError):
            io.read_trace_csv(tmp_path / "x.csv")

    def test_time_gap(self, tmp_path):
        (tmp_path / "x.csv").write_text("t,stsq,tvsq,ci\n1,50,50,2\n3,50,50,2\n")
        with pytest.raises(DatasetFormatError) as exc:
            io.read_trace_csv(tmp_path / "x.csv")
        assert exc.value.line == 3

    def test_nonpositive_ci(self, tmp_path):
        (tmp_path / "x.csv").write_text("t,stsq,tvsq,ci\n1,50,50,0\n")
        with pytest.raises(DatasetFormatError):
            io.read_trace_csv(tmp_path / "x.csv")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetFormatError):
            io.read_trace_csv(tmp_path / "nope.csv")

    def test_prediction_csv(self, tmp_path):
        io.write_prediction_csv(tmp_path / "p.csv", [1.5, 2.5, 3.5], warmup=2)
        lines = (tmp_path / "p.csv").read_text().splitlines()
        assert lines == ["t,tvsq_pred,warmup", "1,1.5,1", "2,2.5,1", "3,3.5,0"]


class TestDatasetManifest:
    def test_round_trip(self, tmp_path, dataset):
        io.save_dataset(tmp_path / "d" / "dataset.json", dataset, session={"note": "x"})
        back = io.load_dataset(tmp_path / "d" / "dataset.json")
        for name in ("stsq", "tvsq", "ci"):
            assert np.array_equal(getattr(back, name), getattr(dataset, name))
        assert back.groups() == ["a", "a", "b"]
        doc = json.loads((tmp_path / "d" / "dataset.json").read_text())
        assert doc["kind"] == "tvsq.Dataset" and doc["version"] == 1 and doc["session"] == {"note": "x"}

    def test_single_csv(self, tmp_path, dataset):
        io.write_trace_csv(tmp_path / "one.csv", dataset.stsq[0], dataset.items[0].tvsq)
        d = io.load_dataset(tmp_path / "one.csv")
        assert d.n_traces == 1 and d.items[0].name == "one"

    def test_wrong_kind(self, tmp_path):
        io.write_json(tmp_path / "m.json", {"kind": "other", "version": 1, "traces": []})
        with pytest.raises(DatasetFormatError):
            io.load_dataset(tmp_path / "m.json")

    def test_bad_version(self, tmp_path):
        io.write_json(tmp_path / "m.json", {"kind": "tvsq.Dataset", "version": 9, "traces": []})
        with pytest.raises(DatasetFormatError, match="version"):
            io.load_dataset(tmp_path / "m.json")

    def test_length_mismatch(self, tmp_path, dataset):
        io.save_dataset(tmp_path / "m.json", dataset)
        io.write_trace_csv(tmp_path / "trace002.csv", dataset.stsq[1, :10],
                           TVSQTrace(dataset.tvsq[1, :10], dataset.ci[1, :10]))
        with pytest.raises(DatasetFormatError):
            io.load_dataset(tmp_path / "m.json")

    def test_json_syntax_location(self, tmp_path):
        (tmp_path / "m.json").write_text('{\n  "kind": "tvsq.Dataset",\n  "version": 1,,\n}\n')
        with pytest.raises(DatasetFormatError) as exc:
            io.load_dataset(tmp_path / "m.json")
        assert exc.value.line == 3


class TestModelFiles:
    def test_round_trip(self, tmp_path):
        p = HWParams((0.1, 0.2, 0.3), (0.4, -0.1), (0.04, -2.0, 0.5, 100.0), (0.05, -2.5, 1.0, 98.0))
        io.save_model(tmp_path / "m.json", p)
        q = io.load_model(tmp_path / "m.json")
        assert q.to_dict() == p.to_dict()

    def test_missing_key(self, tmp_path):
        io.write_json(tmp_path / "m.json", {"kind": "tvsq.HWParams", "b": [0.1], "f": []})
        with pytest.raises(DatasetFormatError):
            io.load_model(tmp_path / "m.json")

    def test_wrong_kind(self, tmp_path):
        io.write_json(tmp_path / "m.json", {"kind": "tvsq.Dataset"})
        with pytest.raises(DatasetFormatError):
            io.load_model(tmp_path / "m.json")

    def test_nan_refused_on_write(self, tmp_path):
        with pytest.raises(ValueError):
            io.write_json(tmp_path / "x.json", {"x": float("nan")})


class TestPanelCsv:
    def test_round_trip(self, tmp_path, rng):
        panel = SubjectScorePanel(rng.uniform(0, 100, (3, 2, 5)), rng.uniform(0, 100, (3, 5)),
                                  video_names=("v1", "v2"))
        io.write_panel_csv(tmp_path / "s.csv", tmp_path / "r.csv", panel)
        back = io.read_panel_csv(tmp_path / "s.csv", tmp_path / "r.csv")
        assert np.array_equal(back.scores, panel.scores)
        assert np.array_equal(back.ref_scores, panel.ref_scores)
        assert back.video_names == ("v1", "v2")

    def test_missing_entry(self, tmp_path):
        (tmp_path / "s.csv").write_text("subject,video,t,score\n1,a,1,50\n2,a,1,60\n1,a,2,50\n")
        (tmp_path / "r.csv").write_text("subject,t,score\n1,1,80\n2,1,80\n1,2,80\n2,2,80\n")
        with pytest.raises(DatasetFormatError, match="subject 2"):
            io.read_panel_csv(tmp_path / "s.csv", tmp_path / "r.csv")

    def test_duplicate_entry(self, tmp_path):
        (tmp_path / "s.csv").write_text("subject,video,t,score\n1,a,1,50\n1,a,1,60\n2,a,1,50\n")
        (tmp_path / "r.csv").write_text("subject,t,score\n1,1,80\n2,1,80\n")
        with pytest.raises(DatasetFormatError) as exc:
            io.read_panel_csv(tmp_path / "s.csv", tmp_path / "r.csv")
        assert exc.value.line == 3

    def test_long_stsq(self, tmp_path):
        (tmp_path / "q.csv").write_text("video,t,stsq\na,2,41\na,1,40\n")
        assert io.read_long_stsq(tmp_path / "q.csv", ["a"], 2)["a"].tolist() == [40.0, 41.0]
        with pytest.raises(DatasetFormatError):
            io.read_long_stsq(tmp_path / "q.csv", ["a"], 3)


def test_dataprep_reexports(tmp_path, dataset):
    from tvsq import dataprep

    dataprep.save_dataset(tmp_path / "d.json", dataset)
    assert np.array_equal(dataprep.load_dataset(tmp_path / "d.json").tvsq, dataset.tvsq)
