# dynamics.py
"""
Quantum Dynamics - разложение когерентных состояний по собственному базису
API: Decomposition, SPSeries, decompose, survival_probability, time_grid, equilibration_stats, pr_map
Основные возможности: коэффициент участия P_R, вероятность выживания SP(t), плато 1/P_R,
     пакетный расчет карты P_R на поверхности Пуанкаре
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from core.config.config import (
    DECAY_MULTIPLE,
    DROP_WEIGHT_BELOW,
    LOG_FRACTION,
    MIN_CAPTURE,
    MIN_WINDOW_POINTS,
    N_TIME_POINTS,
    T_LOG_END,
    T_LOG_START,
    T_MAX,
)
from core.model.classical import PoincareSurface
from core.model.coherent import coherent_vector, phase_to_labels
from core.model.dicke import ModelParams
from core.model.errors import DegeneracyError, EmptyShellError, ParameterError, TruncationError
from core.model.grid import STATUS_ERROR, STATUS_OK, ScanMap, SurfaceGrid
from core.model.phase_space import PhasePoint
from core.model.spectrum import EigenSystem

logger = logging.getLogger(__name__)

PHASE_GUARD = 2.0 ** 53
SP_CHUNK = 512
PR_BATCH = 256


@dataclass
class Decomposition:
    """
    API: Разложение начального состояния |Ψ⟩ = Σ c_k |E_k⟩
    Вход: weights (|c_k|², перенормированы), energies (E_k), norm_captured (вес до перенормировки),
          parity_weight, j, degenerate (в спектре есть почти вырожденные пары)
    Выход: None
    Логика: mean_energy = Σ w_k E_k, pr = 1/Σ w_k²
    """
    weights: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)
    norm_captured: float = 1.0
    parity_weight: float = 1.0
    j: float = float("nan")
    degenerate: bool = False

    @classmethod
    def from_weights(cls, weights, energies, j: float = float("nan"), degenerate: bool = False) -> "Decomposition":
        weights = np.asarray(weights, dtype=float)
        energies = np.asarray(energies, dtype=float)
        if weights.shape != energies.shape:
            raise ParameterError("Размеры весов и энергий не совпадают")
        if np.any(weights < 0):
            raise ParameterError("Веса должны быть неотрицательны")
        total = float(weights.sum())
        if total <= 0:
            raise ParameterError("Нулевая сумма весов")
        return cls(weights=weights / total, energies=energies, j=j, degenerate=degenerate)

    @property
    def mean_energy(self) -> float:
        return float(np.dot(self.weights, self.energies))

    @property
    def energy_width(self) -> float:
        return float(math.sqrt(max(0.0, np.dot(self.weights, (self.energies - self.mean_energy) ** 2))))

    @property
    def pr(self) -> float:
        return float(1.0 / np.sum(self.weights ** 2))

    @property
    def capture(self) -> float:
        return self.norm_captured / self.parity_weight if self.parity_weight > 0 else 0.0


@dataclass
class SPSeries:
    """
    API: Вероятность выживания на сетке времен
    Вход: times (строго возрастают), sp, plateau (1/P_R)
    """
    times: np.ndarray
    sp: np.ndarray
    plateau: float


@dataclass
class EquilibrationStats:
    time_average: float
    rms_fluctuation: float
    plateau: float
    window: Tuple[float, float]
    n_points: int
    t_decay: float

    @property
    def ratio_to_plateau(self) -> float:
        return self.time_average / self.plateau

    @property
    def rms_ratio(self) -> float:
        return self.rms_fluctuation / self.plateau

    def as_dict(self) -> dict:
        return {"time_average": self.time_average, "rms_fluctuation": self.rms_fluctuation,
                "plateau": self.plateau, "ratio_to_plateau": self.ratio_to_plateau,
                "rms_ratio": self.rms_ratio, "window": list(self.window),
                "n_points": self.n_points, "t_decay": self.t_decay}


def _check_same_basis(cv_basis, es: EigenSystem) -> None:
    if (cv_basis.n_max != es.basis.n_max or cv_basis.parity != es.basis.parity
            or cv_basis.dim != es.dim or abs(cv_basis.j - es.basis.j) > 1e-12):
        raise ParameterError(
            f"Базисы различаются: состояние {cv_basis.header()}, собственная система {es.basis.header()}"
        )


def decompose(cv, es: EigenSystem, min_capture: float = MIN_CAPTURE) -> Decomposition:
    """
    API: Разложение когерентного вектора по собственным векторам
    Вход: cv (CoherentVector), es (EigenSystem в том же базисе), min_capture (0.99)
    Выход: Decomposition с перенормированными весами
    Логика: c_k = ⟨v_k|cv⟩; захваченная доля веса сектора проверяется до перенормировки
    """
    _check_same_basis(cv.basis, es)
    amplitudes = es.vectors.T @ cv.coefficients
    raw = np.abs(amplitudes) ** 2
    norm = float(raw.sum())
    capture = norm / cv.parity_weight if cv.parity_weight > 0 else 0.0
    if capture < min_capture:
        raise TruncationError(
            f"Захвачено {capture:.6f} веса состояния (< {min_capture}); увеличьте n_max (сейчас {es.basis.n_max})"
        )
    logger.debug(f"Разложение: norm_captured={norm:.12f}, parity_weight={cv.parity_weight:.12f}")
    return Decomposition(weights=raw / norm, energies=np.asarray(es.energies), norm_captured=norm,
                         parity_weight=cv.parity_weight, j=es.params.j, degenerate=es.has_degeneracies)


def decompose_point(pt: PhasePoint, es: EigenSystem, min_capture: float = MIN_CAPTURE) -> Decomposition:
    """Разложение когерентного состояния, построенного по точке фазового пространства"""
    cv = coherent_vector(phase_to_labels(pt, es.params), es.params, es.basis)
    return decompose(cv, es, min_capture)


def survival_probability(d: Decomposition, times: Iterable[float],
                         allow_degenerate: bool = False) -> SPSeries:
    """
    API: Вероятность выживания SP(t) = |Σ_k w_k e^(−i E_k t)|²
    Вход: d, times (строго возрастают), allow_degenerate (разрешить вырожденный спектр)
    Выход: SPSeries
    Логика: Компоненты с весом < 1e−14·max отбрасываются; фазы E_k t в двойной точности
            блоками по времени
    """
    if d.degenerate and not allow_degenerate:
        raise DegeneracyError("Спектр содержит вырожденные уровни; используйте allow_degenerate")
    times = np.asarray(list(times) if not isinstance(times, np.ndarray) else times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ParameterError("Сетка времен должна быть непустым одномерным массивом")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise ParameterError("Сетка времен должна строго возрастать")

    keep = d.weights >= DROP_WEIGHT_BELOW * float(d.weights.max())
    weights = d.weights[keep]
    energies = d.energies[keep]
    dropped = float(d.weights[~keep].sum())
    if dropped > 0:
        logger.debug(f"Отброшено {int((~keep).sum())} компонент с весом {dropped:.3e}")

    if float(np.max(np.abs(times))) * float(np.max(np.abs(energies))) >= PHASE_GUARD:
        raise ParameterError("Фаза E·t выходит за пределы точности двойной арифметики")

    sp = np.empty(times.size)
    for start in range(0, times.size, SP_CHUNK):
        t = times[start:start + SP_CHUNK]
        amplitude = np.exp(-1j * np.outer(t, energies)) @ weights
        sp[start:start + SP_CHUNK] = np.abs(amplitude) ** 2
    return SPSeries(times=times, sp=sp, plateau=1.0 / d.pr)


def infinite_time_average(d: Decomposition, tol: float = 0.0) -> float:
    """
    API: Бесконечное временное среднее SP без квадратур
    Вход: d, tol (уровни ближе tol считаются вырожденными)
    Выход: Σ по группам уровней (Σ w)²; без вырождений равно 1/P_R
    """
    order = np.argsort(d.energies, kind="stable")
    energies, weights = d.energies[order], d.weights[order]
    breaks = np.flatnonzero(np.diff(energies) > tol) + 1
    groups = np.add.reduceat(weights, np.concatenate([[0], breaks]))
    return float(np.sum(groups ** 2))


def time_grid(t_max: float = T_MAX, n_points: int = N_TIME_POINTS,
              t_log_start: float = T_LOG_START, t_log_end: float = T_LOG_END,
              log_fraction: float = LOG_FRACTION) -> np.ndarray:
    """
    API: Гибридная сетка времен
    Вход: t_max, n_points, t_log_start, t_log_end, log_fraction (доля логарифмического участка)
    Выход: np.ndarray: 0, затем логарифмически до t_log_end, затем равномерно до t_max
    """
    if not 0 < t_log_start < t_log_end < t_max:
        raise ParameterError(f"Нужно 0 < {t_log_start} < {t_log_end} < {t_max}")
    n_log = max(2, int(round(log_fraction * n_points)))
    if n_points - n_log < 2:
        raise ParameterError(f"Слишком мало точек: {n_points}")
    early = np.concatenate([[0.0], np.geomspace(t_log_start, t_log_end, n_log - 1)])
    late = np.linspace(t_log_end, t_max, n_points - n_log + 1)[1:]
    return np.concatenate([early, late])


def equilibration_stats(series: SPSeries, d: Decomposition,
                        window: Optional[Tuple[float, float]] = None,
                        decay_multiple: float = DECAY_MULTIPLE,
                        min_points: int = MIN_WINDOW_POINTS) -> EquilibrationStats:
    """
    API: Статистика выхода SP на плато
    Вход: series, d, window (t_start, t_end; по умолчанию от decay_multiple·t_decay до конца),
          decay_multiple, min_points
    Выход: EquilibrationStats (среднее, среднеквадратичное отклонение, отношения к 1/P_R)
    Логика: t_decay = 1/σ_E (ширина энергетического распределения); средние - трапециями
    """
    width = d.energy_width
    t_decay = 1.0 / width if width > 0 else 0.0
    t_min = decay_multiple * t_decay
    if window is None:
        window = (t_min, float(series.times[-1]))
    t_start, t_end = window
    if t_start < t_min:
        raise ParameterError(f"Окно начинается при t={t_start} < {decay_multiple}·t_decay = {t_min:.4g}")

    sel = (series.times >= t_start) & (series.times <= t_end)
    n_sel = int(np.count_nonzero(sel))
    if n_sel < min_points:
        raise ParameterError(f"Окно слишком короткое: {n_sel} точек < {min_points}")

    t = series.times[sel]
    sp = series.sp[sel]
    span = float(t[-1] - t[0])
    average = float(trapezoid(sp, t) / span)
    rms = float(math.sqrt(max(0.0, trapezoid((sp - average) ** 2, t) / span)))
    return EquilibrationStats(time_average=average, rms_fluctuation=rms, plateau=1.0 / d.pr,
                              window=(float(t[0]), float(t[-1])), n_points=n_sel, t_decay=t_decay)


# ---------------------------------------------------------------------------
# Карта P_R

def participation_ratios(points: List[PhasePoint], es: EigenSystem,
                         min_capture: float = MIN_CAPTURE) -> Tuple[np.ndarray, np.ndarray]:
    """
    API: P_R для набора точек одним матричным умножением на пакет
    Вход: points, es, min_capture
    Выход: (pr, capture); для точек с недостаточным захватом pr = NaN
    """
    params = es.params
    pr = np.full(len(points), np.nan)
    capture = np.zeros(len(points))
    for start in range(0, len(points), PR_BATCH):
        batch = points[start:start + PR_BATCH]
        vectors = [coherent_vector(phase_to_labels(pt, params), params, es.basis) for pt in batch]
        states = np.column_stack([cv.coefficients for cv in vectors])
        weights = np.abs(es.vectors.T @ states) ** 2
        norms = weights.sum(axis=0)
        parity = np.array([cv.parity_weight for cv in vectors])
        cap = norms / parity
        ok = cap >= min_capture
        values = norms ** 2 / np.sum(weights ** 2, axis=0)
        pr[start:start + len(batch)] = np.where(ok, values, np.nan)
        capture[start:start + len(batch)] = cap
    bad = int(np.count_nonzero(capture < min_capture))
    if bad:
        logger.warning(f"{bad} точек с захватом веса < {min_capture}; увеличьте n_max")
    return pr, capture


def pr_map(surface: PoincareSurface, grid: SurfaceGrid, es: EigenSystem,
           params: Optional[ModelParams] = None) -> ScanMap:
    """
    API: Карта коэффициента участия на поверхности Пуанкаре
    Вход: surface, grid, es, params (по умолчанию es.params)
    Выход: ScanMap (task="pr"); точки вне оболочки - missing
    Логика: Когерентные векторы точек сетки собираются в пакеты, c = Vᵀ·C одним GEMM
    """
    params = params or es.params
    if params != es.params:
        raise ParameterError("Параметры карты не совпадают с параметрами собственной системы")
    mask = grid.shell_mask(surface)
    if not mask.any():
        raise EmptyShellError(f"Оболочка E={surface.energy} пуста")

    indices = np.flatnonzero(mask)
    points = [surface.point(*grid.coordinates(int(i))) for i in indices]
    values, _ = participation_ratios(points, es)

    result = ScanMap.empty(grid, energy=surface.energy, task="pr")
    result.values[indices] = values
    result.status[indices] = np.where(np.isfinite(values), STATUS_OK, STATUS_ERROR)
    logger.info(f"Карта P_R: {result.n_present}/{grid.size} точек, E={surface.energy}")
    return result
