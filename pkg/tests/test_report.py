"""CSV / JSON / SVG report emission and parsing."""

import numpy as np
import pytest

from floorloc.errors import IoError
from floorloc.pipeline import Report, TrialRecord, compute_aggregates
from floorloc.report import emit_report, read_csv, scatter_svg, write_csv


def record(i, strategy="base", rot=1.0, trans=0.1, success=True):
    return TrialRecord(
        scene_id=i,
        trial_seed=1000 + i,
        strategy=strategy,
        coverage=0.1 * i,
        rot_err=rot,
        trans_err=trans,
        success=success,
        completion_activated=bool(i % 2),
        wall_time=0.5 + i,
        error="",
    )


def sample_records(n=5):
    rng = np.random.default_rng(42)
    return [
        record(
            i,
            rot=float(rng.uniform(0, 30)),
            trans=float(rng.uniform(0, 1)),
            success=bool(rng.integers(0, 2)),
        )
        for i in range(n)
    ]


class TestCsvRoundtrip:
    def test_exact_roundtrip(self, tmp_path):
        records = sample_records()
        path = tmp_path / "out.csv"
        write_csv(records, path)
        loaded = read_csv(path)
        assert len(loaded.records) == len(records)
        for a, b in zip(records, loaded.records):
            # repr-based serialization keeps floats bit-exact
            assert a == b

    def test_aggregates_recomputed_on_read(self, tmp_path):
        records = sample_records()
        path = tmp_path / "out.csv"
        write_csv(records, path)
        loaded = read_csv(path)
        assert loaded.aggregates == compute_aggregates(records)


class TestAggregates:
    def test_hand_example(self):
        rows = [
            record(0, rot=2.0, trans=0.1, success=True),
            record(1, rot=4.0, trans=0.3, success=False),
        ]
        agg = compute_aggregates(rows)["base"]
        assert agg["trials"] == 2
        assert agg["R_mean"] == pytest.approx(3.0)
        assert agg["R_median"] == pytest.approx(3.0)
        assert agg["T_mean"] == pytest.approx(0.2)
        assert agg["SR"] == pytest.approx(0.5)

    def test_grouped_by_strategy(self):
        rows = [record(0, "base"), record(0, "viola")]
        agg = compute_aggregates(rows)
        assert set(agg) == {"base", "viola"}

    def test_nonfinite_errors_excluded_from_means(self):
        rows = [
            record(0, rot=2.0, trans=0.1),
            record(1, rot=float("inf"), trans=float("inf"), success=False),
        ]
        agg = compute_aggregates(rows)["base"]
        assert agg["R_mean"] == pytest.approx(2.0)
        assert agg["SR"] == pytest.approx(0.5)


class TestSvg:
    def test_reference_lines_present(self):
        svg = scatter_svg(sample_records())
        assert 'id="rot-bound"' in svg
        assert 'id="trans-bound"' in svg
        assert svg.count("reference-line") == 2

    def test_one_marker_per_finite_record(self):
        records = sample_records(7)
        svg = scatter_svg(records)
        # one circle per record per panel
        assert svg.count("<circle") == 2 * len(records)

    def test_nonfinite_records_skipped(self):
        records = [record(0), record(1, rot=float("nan"), trans=float("nan"))]
        svg = scatter_svg(records)
        assert svg.count("<circle") == 2  # only the finite record, both panels


class TestEmitReport:
    def test_emits_three_files(self, tmp_path):
        records = sample_records()
        report = Report(tuple(records), compute_aggregates(records))
        paths = emit_report(report, str(tmp_path / "out"))
        for p in paths.values():
            assert (tmp_path / "out").exists()
            assert open(p).read()

    def test_empty_report_raises(self, tmp_path):
        with pytest.raises(IoError):
            emit_report(Report((), {}), str(tmp_path))

    def test_unwritable_directory_raises_io_error(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        records = sample_records(1)
        report = Report(tuple(records), compute_aggregates(records))
        # target dir path collides with an existing file -> OSError -> IoError
        with pytest.raises(IoError):
            emit_report(report, str(blocker))
