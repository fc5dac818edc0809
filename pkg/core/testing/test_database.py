from core.services.database.database import (
    add_activity_log,
    create_run_record,
    finish_run_record,
    get_recent_logs,
    get_recent_runs,
    get_run_statistics,
)
from core.services.monitoring import check_stats, show_logs


def _log_from_procedure(run_id):
    return add_activity_log("WARNING", "Оболочка пуста", run_id)


def test_activity_log_records_procedure():
    run_id = create_run_record("poincare")
    log_id = _log_from_procedure(run_id)
    assert log_id

    logs = get_recent_logs(5, run_id=run_id)
    assert len(logs) == 1
    assert logs[0].level == "WARNING"
    assert logs[0].procedure == "_log_from_procedure"
    assert logs[0].message == "Оболочка пуста"


def test_run_record_lifecycle():
    run_id = create_run_record("contour", artifact_dir="runs/contour")
    run = next(r for r in get_recent_runs(50) if r.id == run_id)
    assert run.status == "running"

    finish_run_record(run_id, 2, 150, "ConvergenceError", "нет сходимости", config_hash="abc")
    run = next(r for r in get_recent_runs(50) if r.id == run_id)
    assert run.status == "failed"
    assert run.exit_code == 2
    assert run.duration_ms == 150
    assert run.error_type == "ConvergenceError"
    assert run.config_hash == "abc"


def test_finish_without_journal_is_noop():
    finish_run_record(None, 0, 1)


def test_run_statistics():
    ok = create_run_record("pr-map")
    finish_run_record(ok, 0, 100)
    failed = create_run_record("pr-map")
    finish_run_record(failed, 1, 300, "ParameterError")

    stats = get_run_statistics(hours=1)["pr-map"]
    assert stats["total"] >= 2
    assert stats["ok"] >= 1
    assert stats["failed"] >= 1


def test_monitoring_report(capsys):
    run_id = create_run_record("spectrum")
    finish_run_record(run_id, 2, 40, "ConvergenceError", "нет сходимости")
    check_stats.main(["--all"])
    out = capsys.readouterr().out
    assert "spectrum" in out
    assert "n_max" in out


def test_show_logs_for_run(capsys):
    run_id = create_run_record("contour")
    add_activity_log("INFO", "Контур построен", run_id)
    show_logs.show_logs(10, run_id)
    assert "Контур построен" in capsys.readouterr().out
