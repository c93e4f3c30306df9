import json

import pytest

from kappa_lab.distributions import ParetoParams
from kappa_lab.errors import DomainError
from kappa_lab.montecarlo import bias_table, fit_bias_scaling, mc_superadditivity, reference_bias_points
from kappa_lab.report import (
    COLUMNS,
    ExperimentReport,
    ReportKind,
    bias_table_report,
    default_filename,
    from_json,
    parse_csv,
    scaling_fit_report,
    superadd_report,
    to_csv,
    to_json,
    write_report,
)

ROW_1E3 = {"n": 1000, "mean": 0.405235, "median": 0.367698, "std": 0.160244}
CONFIG = {"command": "bias-table", "master_seed": 2**64 - 1, "q": 0.01, "runs": 100000, "n": [1000]}


@pytest.fixture
def bias_report():
    return ExperimentReport(ReportKind.BIAS_TABLE, dict(CONFIG), [dict(ROW_1E3)], created_at="2026-01-01T00:00:00Z")


@pytest.fixture
def simulated_report():
    spec = ParetoParams(1.1, 1.0)
    rows = bias_table(spec, 0.01, [1000, 2000, 4000], 30, 5)
    return bias_table_report(rows, {"master_seed": 5, "spec": spec.to_dict(), "n": [1000, 2000, 4000]}, 0.657933)


class TestCsv:
    def test_single_row(self, bias_report):
        lines = to_csv(bias_report).splitlines()
        assert len(lines) == 2
        assert lines[0] == ",".join(COLUMNS[ReportKind.BIAS_TABLE])
        assert lines[1].startswith("1000,0.405235,0.367698,0.160244,")

    def test_empty_rows_rejected(self):
        with pytest.raises(DomainError):
            ExperimentReport(ReportKind.BIAS_TABLE, dict(CONFIG), [])

    def test_unknown_column_rejected(self):
        with pytest.raises(DomainError):
            ExperimentReport(ReportKind.BIAS_TABLE, dict(CONFIG), [{"n": 1, "bogus": 2}])

    def test_idempotent(self, simulated_report):
        text = to_csv(simulated_report)
        header, rows = parse_csv(text)
        assert tuple(header) == simulated_report.columns
        again = ExperimentReport(simulated_report.kind, simulated_report.config_echo, rows)
        assert to_csv(again) == text

    def test_six_significant_digits(self):
        rep = ExperimentReport(ReportKind.BIAS_TABLE, {}, [{"n": 10, "mean": 1 / 3, "std": 1.23456789e-7}])
        row = to_csv(rep).splitlines()[1].split(",")
        assert row[1] == "0.333333"
        assert row[3] == "1.23457e-07"

    def test_list_cells(self):
        rec = mc_superadditivity([ParetoParams(1.1, 1.0)] * 2, [200, 300], 0.01, 20, 0)
        text = to_csv(superadd_report(rec, {"master_seed": 0}))
        assert text.splitlines()[1].startswith("200;300,0.01,20,")


class TestJson:
    def test_parses(self, simulated_report):
        doc = json.loads(to_json(simulated_report))
        assert doc["kind"] == "bias_table"
        assert doc["columns"] == list(COLUMNS[ReportKind.BIAS_TABLE])

    def test_master_seed_round_trip(self, bias_report):
        back = from_json(to_json(bias_report))
        assert back.config_echo["master_seed"] == 2**64 - 1
        assert back.config_echo == bias_report.config_echo

    def test_full_precision(self, simulated_report):
        back = from_json(to_json(simulated_report))
        assert back.rows == simulated_report.rows
        assert to_json(back) == to_json(simulated_report)

    def test_rows_match_requested_sizes(self, simulated_report):
        doc = json.loads(to_json(simulated_report))
        assert len(doc["rows"]) == len(doc["config_echo"]["n"])

    def test_csv_and_json_agree(self, simulated_report):
        _, csv_rows = parse_csv(to_csv(simulated_report))
        json_rows = json.loads(to_json(simulated_report))["rows"]
        for c, j in zip(csv_rows, json_rows):
            for key, value in j.items():
                if isinstance(value, float):
                    assert float(f"{value:.6g}") == c[key]
                else:
                    assert value == c[key]

    def test_source_date_epoch(self, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
        rep = ExperimentReport(ReportKind.BIAS_TABLE, {}, [dict(ROW_1E3)])
        assert rep.created_at == "1970-01-01T00:00:00Z"

    def test_provenance(self, simulated_report):
        doc = json.loads(to_json(simulated_report))
        assert doc["tool_version"]
        assert doc["config_echo"]["spec"] == {"law": "pareto", "alpha": 1.1, "x_min": 1.0}
        assert doc["config_echo"]["master_seed"] == 5


class TestFiles:
    def test_default_name(self, bias_report):
        assert default_filename(bias_report, "csv") == f"bias-table-{2**64 - 1}.csv"

    def test_write_into_directory(self, tmp_path, bias_report):
        path = write_report(bias_report, tmp_path, "json")
        assert path.name == f"bias-table-{2**64 - 1}.json"
        assert from_json(path.read_text()).rows == bias_report.rows

    def test_scaling_report(self, tmp_path):
        fit = fit_bias_scaling(reference_bias_points())
        rep = scaling_fit_report(fit, {"source": "reference", "master_seed": 0})
        path = write_report(rep, tmp_path / "fit.csv")
        header, rows = parse_csv(path.read_text())
        assert len(rows) == 6
        assert rows[0]["n"] == 1000
