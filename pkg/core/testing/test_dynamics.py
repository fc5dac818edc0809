import math

import numpy as np
import pytest

from core.config.config import N_TIME_POINTS, T_LOG_END, T_MAX
from core.model.classical import PoincareSurface, hcl
from core.model.coherent import coherent_vector, phase_to_labels
from core.model.dicke import ModelParams, build_basis, build_hamiltonian
from core.model.dynamics import (
    Decomposition,
    decompose,
    decompose_point,
    equilibration_stats,
    infinite_time_average,
    participation_ratios,
    pr_map,
    survival_probability,
    time_grid,
)
from core.model.errors import DegeneracyError, EmptyShellError, ParameterError, TruncationError
from core.model.grid import STATUS_MISSING, STATUS_OK, SurfaceGrid
from core.model.spectrum import diagonalize, get_or_diagonalize

PARAMS = ModelParams(omega=1.0, omega0=1.0, gamma=1.0, j=4.0)


def _es(n_max):
    return diagonalize(build_hamiltonian(PARAMS, build_basis(PARAMS, n_max)))


@pytest.fixture(scope="module")
def eigensystem():
    return _es(70)


@pytest.fixture
def surface():
    return PoincareSurface(energy=-1.0 * PARAMS.j, params=PARAMS)


def test_participation_ratio_limits():
    assert Decomposition.from_weights([1.0], [0.0]).pr == pytest.approx(1.0)
    assert Decomposition.from_weights(np.ones(7), np.arange(7.0)).pr == pytest.approx(7.0)
    assert Decomposition.from_weights([0.5, 0.5], [0.0, 1.0]).pr == pytest.approx(2.0)


def test_from_weights_validation():
    with pytest.raises(ParameterError):
        Decomposition.from_weights([0.5, 0.5], [0.0])
    with pytest.raises(ParameterError):
        Decomposition.from_weights([1.5, -0.5], [0.0, 1.0])
    with pytest.raises(ParameterError):
        Decomposition.from_weights([0.0, 0.0], [0.0, 1.0])


def test_two_component_survival():
    d = Decomposition.from_weights([0.5, 0.5], [0.0, 1.0])
    t = np.linspace(0.0, 20.0, 201)
    series = survival_probability(d, t)
    assert series.sp[0] == pytest.approx(1.0)
    np.testing.assert_allclose(series.sp, np.cos(t / 2) ** 2, atol=1e-13)
    assert series.plateau == pytest.approx(0.5)


def test_survival_rejects_bad_times():
    d = Decomposition.from_weights([0.5, 0.5], [0.0, 1.0])
    with pytest.raises(ParameterError):
        survival_probability(d, [0.0, 2.0, 1.0])
    with pytest.raises(ParameterError):
        survival_probability(d, [])
    with pytest.raises(ParameterError):
        survival_probability(d, [0.0, 1e17])


def test_survival_refuses_degenerate_spectrum():
    d = Decomposition.from_weights([0.5, 0.5], [0.0, 1.0], degenerate=True)
    with pytest.raises(DegeneracyError):
        survival_probability(d, [0.0, 1.0])
    series = survival_probability(d, [0.0, 1.0], allow_degenerate=True)
    assert series.sp[0] == pytest.approx(1.0)


def test_infinite_time_average_groups_levels():
    d = Decomposition.from_weights(np.ones(3), [0.0, 1e-12, 1.0])
    assert infinite_time_average(d) == pytest.approx(1.0 / d.pr)
    assert infinite_time_average(d, tol=1e-9) == pytest.approx(5.0 / 9.0)


def test_time_grid_defaults():
    t = time_grid()
    assert t.size == N_TIME_POINTS
    assert t[0] == 0.0
    assert t[-1] == pytest.approx(T_MAX)
    assert np.all(np.diff(t) > 0)
    assert np.any(np.isclose(t, T_LOG_END))


def test_time_grid_validation():
    with pytest.raises(ParameterError):
        time_grid(t_max=10.0, t_log_start=1.0, t_log_end=0.5)
    with pytest.raises(ParameterError):
        time_grid(t_max=4.0, t_log_end=5.0)
    with pytest.raises(ParameterError):
        time_grid(n_points=3)


def test_equilibration_of_two_level_state():
    d = Decomposition.from_weights([0.5, 0.5], [0.0, 1.0])
    # t_decay = 1/σ_E = 2, окно начинается с 20 и покрывает 50 периодов
    times = np.linspace(0.0, 20.0 + 100 * math.pi, 40001)
    stats = equilibration_stats(survival_probability(d, times), d)
    assert stats.t_decay == pytest.approx(2.0)
    assert stats.window[0] >= 20.0
    assert stats.ratio_to_plateau == pytest.approx(1.0, abs=1e-3)
    assert stats.rms_ratio == pytest.approx(1 / math.sqrt(2), abs=1e-2)
    assert set(stats.as_dict()) >= {"time_average", "rms_fluctuation", "plateau", "window"}


def test_equilibration_window_checks():
    d = Decomposition.from_weights([0.5, 0.5], [0.0, 1.0])
    series = survival_probability(d, np.linspace(0.0, 100.0, 1001))
    with pytest.raises(ParameterError):
        equilibration_stats(series, d, window=(5.0, 100.0))
    with pytest.raises(ParameterError):
        equilibration_stats(series, d, window=(20.0, 25.0))


def test_decomposition_of_coherent_state(eigensystem, surface):
    pt = surface.point(math.pi, -0.25)
    d = decompose_point(pt, eigensystem)
    assert d.weights.sum() == pytest.approx(1.0)
    assert d.capture == pytest.approx(1.0, abs=1e-8)
    assert d.mean_energy == pytest.approx(hcl(pt, PARAMS), rel=1e-8)
    assert 1.0 <= d.pr <= eigensystem.dim
    assert survival_probability(d, [0.0]).sp[0] == pytest.approx(1.0)
    assert infinite_time_average(d) == pytest.approx(1.0 / d.pr, rel=1e-12)


def test_decompose_rejects_other_basis(eigensystem, surface):
    pt = surface.point(math.pi, -0.25)
    other = build_basis(PARAMS, 60)
    cv = coherent_vector(phase_to_labels(pt, PARAMS), PARAMS, other)
    with pytest.raises(ParameterError):
        decompose(cv, eigensystem)


def test_decompose_reports_truncation(surface):
    pt = surface.point(math.pi, -0.25)
    with pytest.raises(TruncationError):
        decompose_point(pt, _es(10))


def test_participation_ratios_match_single_decompositions(eigensystem, surface):
    points = [surface.point(phi, -0.25) for phi in (2.6, math.pi, 3.6)]
    values, capture = participation_ratios(points, eigensystem)
    expected = [decompose_point(pt, eigensystem).pr for pt in points]
    np.testing.assert_allclose(values, expected, rtol=1e-10)
    assert np.all(capture > 0.99)


def test_pr_map_marks_points_outside_shell(eigensystem, surface):
    grid = SurfaceGrid.square(6)
    result = pr_map(surface, grid, eigensystem)
    mask = grid.shell_mask(surface)
    assert result.task == "pr"
    assert np.all(result.status[~mask] == STATUS_MISSING)
    assert np.all(np.isnan(result.values[~mask]))
    assert np.all(result.status[mask] == STATUS_OK)
    assert np.all(result.values[mask] >= 1.0)

    index = int(np.flatnonzero(mask)[0])
    pt = surface.point(*grid.coordinates(index))
    assert result.values[index] == pytest.approx(decompose_point(pt, eigensystem).pr, rel=1e-10)


def test_pr_map_empty_shell(eigensystem):
    below = PoincareSurface(energy=-3.0 * PARAMS.j, params=PARAMS)
    with pytest.raises(EmptyShellError):
        pr_map(below, SurfaceGrid.square(4), eigensystem)


def test_pr_map_rejects_other_params(eigensystem, surface):
    other = ModelParams(omega=1.0, omega0=1.0, gamma=0.5, j=4.0)
    with pytest.raises(ParameterError):
        pr_map(surface, SurfaceGrid.square(4), eigensystem, params=other)


@pytest.mark.slow
def test_chaotic_state_fluctuates_around_plateau(tmp_path):
    params = ModelParams(omega=1.0, omega0=1.0, gamma=1.0, j=30.0)
    es = get_or_diagonalize(params, 250, cache_dir=str(tmp_path))
    center = PoincareSurface(energy=-1.1 * params.j, params=params).point(math.pi, 0.0)
    d = decompose_point(center, es)
    assert d.pr > 50

    # окно после времени Гейзенберга: корреляционная дыра уже закрыта
    series = survival_probability(d, time_grid(t_max=4000.0, n_points=40000))
    stats = equilibration_stats(series, d, window=(1000.0, 4000.0))
    assert stats.ratio_to_plateau == pytest.approx(1.0, rel=0.1)
    assert infinite_time_average(d) == pytest.approx(1.0 / d.pr, rel=1e-10)
