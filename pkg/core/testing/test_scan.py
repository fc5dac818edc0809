import os

import numpy as np
import pytest

from core.config.config import CHAOS_CUTOFF, COARSE_GRID_SIZE
from core.model.dicke import ModelParams
from core.model.dynamics import pr_map
from core.model.errors import GridMismatchError, ParameterError
from core.model.grid import STATUS_MISSING, STATUS_OK, STATUS_TIMEOUT, ScanMap, SurfaceGrid
from core.model.spectrum import get_or_diagonalize
from core.scan.ledger import LEDGER_FILE, ScanLedger
from core.scan.scan_core import ScanJob, correlate_maps, orbit_seed, run_scan

PARAMS = ModelParams(omega=1.0, omega0=1.0, gamma=1.0, j=1.0)


def _job(task="sections", **kwargs):
    defaults = dict(params=PARAMS, energy=-0.5, grid=SurfaceGrid.square(3), task=task,
                    n_crossings=20, section_max_time=200.0, t_total=10.0, rtol=1e-10, atol=1e-10,
                    timeout_factor=1e6)
    defaults.update(kwargs)
    return ScanJob(**defaults)


def _map(values, n=2):
    grid = SurfaceGrid.square(n)
    scan = ScanMap.empty(grid)
    scan.values[:] = values
    scan.status[:] = STATUS_OK
    return scan


def test_job_validation():
    with pytest.raises(ParameterError):
        _job(task="spectrum")
    with pytest.raises(ParameterError):
        _job(task="lyapunov", lyapunov_method="gradient")
    with pytest.raises(ParameterError):
        _job(task="pr")


def test_job_hash_ignores_execution_settings(tmp_path):
    base = _job()
    assert base.job_hash() == _job(processes=4, output_dir=str(tmp_path)).job_hash()
    assert base.job_hash() != _job(seed=1).job_hash()
    assert base.job_hash() != _job(energy=-0.4).job_hash()


def test_orbit_seed_is_deterministic():
    assert orbit_seed(12345, 7) == orbit_seed(12345, 7)
    assert len({orbit_seed(12345, i) for i in range(100)}) == 100


def test_empty_shell_gives_missing_map():
    messages = []
    result = run_scan(_job(energy=-3.0), log_callback=lambda level, msg: messages.append((level, msg)),
                      progress=False)
    assert result.map.n_present == 0
    assert np.all(result.map.status == STATUS_MISSING)
    assert result.diagnostics
    assert messages[0][0] == "WARNING"


def test_sections_scan_is_reproducible():
    first = run_scan(_job(), progress=False).map
    second = run_scan(_job(), progress=False).map
    np.testing.assert_array_equal(first.values, second.values)
    mask = first.grid.shell_mask(_job().surface)
    assert np.all(first.status[~mask] == STATUS_MISSING)
    assert np.all(np.isin(first.status[mask], ["ok", "partial"]))


def test_lyapunov_scan_independent_of_process_count():
    serial = run_scan(_job(task="lyapunov"), progress=False)
    parallel = run_scan(_job(task="lyapunov", processes=2), progress=False)
    np.testing.assert_array_equal(serial.map.values, parallel.map.values)
    np.testing.assert_array_equal(serial.map.status, parallel.map.status)
    assert serial.budget is not None


def test_scan_resumes_from_ledger(tmp_path):
    job = _job(task="lyapunov", output_dir=str(tmp_path))
    first = run_scan(job, progress=False)
    assert (tmp_path / LEDGER_FILE).exists()
    assert first.resumed_points == 0

    second = run_scan(job, progress=False)
    assert second.resumed_points == int(job.grid.shell_mask(job.surface).sum())
    np.testing.assert_array_equal(first.map.values, second.map.values)
    np.testing.assert_array_equal(first.map.status, second.map.status)

    fresh = run_scan(job, resume=False, progress=False)
    assert fresh.resumed_points == 0


def test_point_budget_is_reproducible():
    job = _job(task="lyapunov", grid=SurfaceGrid.square(6), timeout_factor=0.5)
    runs = [run_scan(job, progress=False) for _ in range(3)]
    assert runs[0].budget is not None
    assert np.any(runs[0].map.status == STATUS_TIMEOUT)
    for other in runs[1:]:
        assert other.budget == runs[0].budget
        np.testing.assert_array_equal(other.map.status, runs[0].map.status)
        np.testing.assert_array_equal(other.map.values, runs[0].map.values)


def test_calibration_points_never_time_out():
    job = _job(task="lyapunov", grid=SurfaceGrid.square(6), timeout_factor=0.5)
    result = run_scan(job, progress=False)
    shell = np.flatnonzero(job.grid.shell_mask(job.surface))
    assert not np.any(result.map.status[shell[:job.calibration_points]] == STATUS_TIMEOUT)


def test_resume_retries_timed_out_points(tmp_path):
    job = _job(task="lyapunov", grid=SurfaceGrid.square(6), timeout_factor=0.5, output_dir=str(tmp_path))
    first = run_scan(job, progress=False)
    timed_out = np.flatnonzero(first.map.status == STATUS_TIMEOUT)
    assert timed_out.size

    ledger = ScanLedger(str(tmp_path), job.job_hash())
    try:
        recorded = ledger.completed()
    finally:
        ledger.close()
    assert not set(timed_out.tolist()) & set(recorded)
    assert all(status != STATUS_TIMEOUT for _, status, _ in recorded.values())

    second = run_scan(job, progress=False)
    assert second.resumed_points == len(recorded)
    assert second.budget == first.budget
    np.testing.assert_array_equal(second.map.status, first.map.status)
    np.testing.assert_array_equal(second.map.values, first.map.values)


def test_ledger_is_keyed_by_job(tmp_path):
    run_scan(_job(task="lyapunov", output_dir=str(tmp_path)), progress=False)
    other = run_scan(_job(task="lyapunov", output_dir=str(tmp_path), seed=99), progress=False)
    assert other.resumed_points == 0


def test_pr_scan_matches_direct_map(tmp_path):
    params = ModelParams(omega=1.0, omega0=1.0, gamma=1.0, j=2.0)
    es = get_or_diagonalize(params, 40, cache_dir=str(tmp_path))
    grid = SurfaceGrid.square(4)
    job = ScanJob(params=params, energy=-2.0, grid=grid, task="pr", n_max=40, cache_dir=str(tmp_path))
    result = run_scan(job, progress=False)
    expected = pr_map(job.surface, grid, es)
    np.testing.assert_allclose(result.map.values, expected.values, rtol=1e-10)
    assert result.budget is None


def test_pr_scan_requires_cache(tmp_path):
    job = ScanJob(params=PARAMS, energy=-0.5, grid=SurfaceGrid.square(2), task="pr",
                  n_max=10, cache_dir=str(tmp_path))
    with pytest.raises(ParameterError, match="spectrum"):
        run_scan(job, progress=False)


def test_correlation_of_map_with_itself():
    scan = _map([1.0, 3.0, 2.0, 5.0])
    corr = correlate_maps(scan, scan, bins=4)
    assert corr.rho == pytest.approx(1.0)
    assert not corr.degenerate
    assert corr.n_points == 4
    assert corr.histogram.sum() == 4


def test_correlation_uses_common_points():
    a = _map([1.0, 2.0, 3.0, np.nan])
    b = _map([3.0, 2.0, 1.0, 7.0])
    corr = correlate_maps(a, b)
    assert corr.n_points == 3
    assert corr.rho == pytest.approx(-1.0)


def test_correlation_with_constant_map():
    corr = correlate_maps(_map([1.0, 2.0, 3.0, 4.0]), _map([2.0, 2.0, 2.0, 2.0]))
    assert corr.rho == 0.0
    assert corr.degenerate
    assert corr.as_dict()["degenerate"] is True


def test_correlation_grid_mismatch():
    with pytest.raises(GridMismatchError):
        correlate_maps(_map([1.0, 2.0, 3.0, 4.0]), _map(np.arange(9.0), n=3))


def test_map_frame_infers_its_grid():
    scan = ScanMap.empty(SurfaceGrid(n_phi=4, n_jz=3))
    scan.values[:] = np.arange(12.0)
    scan.status[:] = STATUS_OK
    frame = scan.to_frame()
    grid = ScanMap.infer_grid(frame)
    assert grid == scan.grid
    np.testing.assert_array_equal(ScanMap.from_frame(frame, grid).values, scan.values)


def test_map_frame_with_dropped_rows_is_rejected():
    frame = _map(np.arange(9.0), n=3).to_frame().drop(index=4).reset_index(drop=True)
    with pytest.raises(GridMismatchError):
        ScanMap.infer_grid(frame)


@pytest.mark.slow
@pytest.mark.parametrize("energy_per_j, low, high", [(-1.8, 0.0, 0.2), (-1.1, 0.8, 1.0)])
def test_chaotic_fraction_of_lyapunov_map(energy_per_j, low, high):
    job = ScanJob(params=PARAMS, energy=energy_per_j * PARAMS.j, grid=SurfaceGrid.square(COARSE_GRID_SIZE),
                  task="lyapunov", processes=os.cpu_count() or 1)
    result = run_scan(job, progress=False)
    fraction = result.map.fraction_above(CHAOS_CUTOFF)
    assert low <= fraction <= high


@pytest.mark.slow
def test_lyapunov_map_correlates_with_pr_map(tmp_path):
    params = ModelParams(omega=1.0, omega0=1.0, gamma=1.0, j=30.0)
    grid = SurfaceGrid.square(COARSE_GRID_SIZE)
    get_or_diagonalize(params, 250, cache_dir=str(tmp_path))
    common = dict(params=params, energy=-1.5 * params.j, grid=grid, processes=os.cpu_count() or 1)
    lyapunov = run_scan(ScanJob(task="lyapunov", **common), progress=False).map
    pr = run_scan(ScanJob(task="pr", n_max=250, cache_dir=str(tmp_path), **common), progress=False).map
    corr = correlate_maps(lyapunov, pr)
    assert corr.n_points > 100
    assert corr.rho >= 0.5
