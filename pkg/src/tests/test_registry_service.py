"""
Tests pour le registre des runs et le rapport de synthèse.
"""
import pytest
from rich.console import Console

from app import open_registry
from controllers.report_controller import SUMMARY_COLUMNS, ReportController
from core.exceptions import ConfigError
from utils.json_utils import write_json
from views.report_view import ReportView


def make_manifest(run_id, kind="lin-dyn", config_hash="a" * 64, seed=0, metrics=None):
    return {
        "run_id": run_id,
        "kind": kind,
        "config_hash": config_hash,
        "seed": seed,
        "seed_source": "config",
        "tool_version": "1.0.0",
        "started_at": "2026-01-01T00:00:00+00:00",
        "finished_at": "2026-01-01T00:00:01+00:00",
        "status": "success",
        "metrics": metrics if metrics is not None else {"final_deviation": 0.0},
        "files": ["metrics.json", "run_record.json"],
        "config": {"kind": kind, "seed": seed},
    }


def store(directory, manifest):
    (directory / manifest["run_id"]).mkdir(parents=True)
    write_json(directory / manifest["run_id"] / "run_record.json", manifest)


@pytest.fixture
def report_controller():
    return ReportController(open_registry, ReportView(Console(record=True, width=200)))


def test_upsert_creates_then_updates(registry_service, tmp_path):
    manifest = make_manifest("lin-dyn-aaaaaaaaaaaa")
    registry_service.upsert(manifest, tmp_path)
    manifest["metrics"] = {"final_deviation": 1.5}
    registry_service.upsert(manifest, tmp_path)

    records = registry_service.get_all_runs()
    assert len(records) == 1
    assert records[0].metrics_dict == {"final_deviation": 1.5}
    assert records[0].to_manifest() == manifest


def test_upsert_missing_field_rolls_back(registry_service, tmp_path):
    manifest = make_manifest("lin-dyn-aaaaaaaaaaaa")
    del manifest["kind"]
    with pytest.raises(KeyError):
        registry_service.upsert(manifest, tmp_path)
    assert registry_service.get_all_runs() == []


def test_sync_indexes_and_removes_stale_runs(registry_service, tmp_path):
    store(tmp_path, make_manifest("lin-dyn-aaaaaaaaaaaa"))
    store(tmp_path, make_manifest("lddmm-bbbbbbbbbbbb", kind="lddmm", config_hash="b" * 64))
    registry_service.upsert(make_manifest("curvature-cccccccccccc", kind="curvature"), tmp_path / "gone")

    assert registry_service.sync(tmp_path) == 2
    assert {record.id for record in registry_service.get_all_runs()} == {
        "lin-dyn-aaaaaaaaaaaa",
        "lddmm-bbbbbbbbbbbb",
    }


def test_sync_skips_unreadable_manifest(registry_service, tmp_path):
    store(tmp_path, make_manifest("lin-dyn-aaaaaaaaaaaa"))
    broken = tmp_path / "broken"
    broken.mkdir()
    (broken / "run_record.json").write_text("{", encoding="utf-8")
    assert registry_service.sync(tmp_path) == 1


def test_delete_absent_run_is_noop(registry_service):
    registry_service.delete("absent")
    assert registry_service.get_run("absent") is None


def test_report_single_run(report_controller, output_dir, read_table):
    store(output_dir, make_manifest("lin-dyn-aaaaaaaaaaaa", metrics={"final_deviation": 0.25}))
    rows = report_controller.report(output_dir)

    assert len(rows) == 1
    table = read_table(output_dir / "summary.csv")
    assert list(table[0]) == SUMMARY_COLUMNS
    assert table[0]["run_id"] == "lin-dyn-aaaaaaaaaaaa"
    assert "final_deviation" in table[0]["metrics"]
    assert "lin-dyn-aaaaaaaaaaaa" in (output_dir / "summary.txt").read_text(encoding="utf-8")


def test_report_is_idempotent(report_controller, output_dir):
    store(output_dir, make_manifest("lin-dyn-aaaaaaaaaaaa"))
    store(output_dir, make_manifest("lddmm-bbbbbbbbbbbb", kind="lddmm"))
    report_controller.report(output_dir)
    first = [(output_dir / name).read_bytes() for name in ("summary.csv", "summary.txt")]
    report_controller.report(output_dir)
    second = [(output_dir / name).read_bytes() for name in ("summary.csv", "summary.txt")]
    assert first == second


def test_report_groups_by_kind_then_hash(report_controller, output_dir):
    store(output_dir, make_manifest("lin-dyn-cccccccccccc", config_hash="c" * 64))
    store(output_dir, make_manifest("lin-dyn-aaaaaaaaaaaa", config_hash="a" * 64))
    store(output_dir, make_manifest("lddmm-bbbbbbbbbbbb", kind="lddmm", config_hash="b" * 64))

    rows = report_controller.report(output_dir)
    assert [row["run_id"] for row in rows] == [
        "lddmm-bbbbbbbbbbbb",
        "lin-dyn-aaaaaaaaaaaa",
        "lin-dyn-cccccccccccc",
    ]


def test_report_without_runs(report_controller, output_dir):
    with pytest.raises(ConfigError):
        report_controller.report(output_dir)


def test_report_missing_directory(report_controller, tmp_path):
    with pytest.raises(ConfigError):
        report_controller.report(tmp_path / "absent")
