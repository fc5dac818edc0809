# spectrum.py
"""
Spectrum - диагонализация, контроль сходимости и статистика уровней
API: EigenSystem, ConvergenceReport, SpacingStats; дисковый кэш собственных систем
Основные возможности: плотная симметричная диагонализация, проверка обрезания, r̃-статистика
"""

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from numpy.polynomial import Polynomial

from core.config.config import (
    CONVERGENCE_ABS_TOL,
    CONVERGENCE_REL_TOL,
    CONVERGENCE_TAIL_TOL,
    DEGENERACY_TOL,
    MIN_SPACING_LEVELS,
    ORTHONORMALITY_TOL,
    RESIDUAL_TOL,
    SPACING_BINS,
    TAIL_FRACTION,
    UNFOLD_DEGREE,
    VERIFY_MAX_DIM,
)
from core.model.dicke import BasisSpec, HamiltonianMatrix, ModelParams, build_basis, build_hamiltonian
from core.model.errors import DiagonalizationError, ParameterError

logger = logging.getLogger(__name__)

CACHE_FORMAT = 1


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """
    API: Результат диагонализации
    Вход: energies (по возрастанию), vectors (столбцы - собственные векторы в порядке базиса),
          basis, params, degenerate_pairs (индексы k, k+1 почти вырожденных уровней)
    Выход: None (массивы только для чтения)
    """
    energies: np.ndarray = field(repr=False)
    vectors: np.ndarray = field(repr=False)
    basis: BasisSpec
    params: ModelParams
    degenerate_pairs: np.ndarray = field(repr=False, default_factory=lambda: np.empty((0, 2), dtype=int))

    @property
    def dim(self) -> int:
        return int(self.energies.size)

    @property
    def has_degeneracies(self) -> bool:
        return bool(self.degenerate_pairs.size)


@dataclass
class ConvergenceReport:
    """
    API: Отчет о сходимости уровней при двух обрезаниях n_max_low < n_max_high
    Логика: Уровень сошелся, если |ΔE| ≤ abs_tol + rel_tol |E| и вес хвоста ≤ tail_tol
    """
    n_max_low: int
    n_max_high: int
    energy_window: Tuple[float, float]
    level_indices: np.ndarray
    energies: np.ndarray
    shifts: np.ndarray
    tail_weights: np.ndarray
    converged: np.ndarray
    dim_low: int
    abs_tol: float = CONVERGENCE_ABS_TOL
    rel_tol: float = CONVERGENCE_REL_TOL
    tail_tol: float = CONVERGENCE_TAIL_TOL

    @property
    def converged_count(self) -> int:
        return int(np.count_nonzero(self.converged))

    @property
    def all_converged(self) -> bool:
        return bool(self.converged.all())

    def table_rows(self, limit: Optional[int] = None):
        rows = []
        for k, e, de, tail, ok in zip(self.level_indices, self.energies, self.shifts,
                                      self.tail_weights, self.converged):
            rows.append([int(k), float(e), float(de), float(tail), "yes" if ok else "no"])
        return rows[:limit] if limit else rows


@dataclass
class SpacingStats:
    """
    API: Статистика ближайших соседей после разворачивания спектра
    Вход: spacings (нормированные на среднее), ratios r̃_k, histogram / bin_edges
    """
    spacings: np.ndarray
    ratios: np.ndarray
    histogram: np.ndarray
    bin_edges: np.ndarray
    degree: int

    @property
    def mean_ratio(self) -> float:
        return float(np.mean(self.ratios))

    def fraction_below(self, s: float) -> float:
        return float(np.mean(self.spacings < s))


def _verify(h: HamiltonianMatrix, energies: np.ndarray, vectors: np.ndarray) -> None:
    dim = energies.size
    gram = vectors.T @ vectors
    ortho_error = float(np.max(np.abs(gram - np.eye(dim))))
    if ortho_error > ORTHONORMALITY_TOL:
        raise DiagonalizationError(f"Нарушена ортонормированность: {ortho_error:.3e} (dim={dim})")
    residual = h.entries @ vectors - vectors * energies
    worst = float(np.max(np.linalg.norm(residual, axis=0)))
    if worst > RESIDUAL_TOL * max(h.norm(), 1.0):
        raise DiagonalizationError(f"Невязка собственных векторов {worst:.3e} (dim={dim})")


def _find_degeneracies(energies: np.ndarray, scale: float) -> np.ndarray:
    if energies.size < 2:
        return np.empty((0, 2), dtype=int)
    gaps = np.diff(energies)
    idx = np.flatnonzero(gaps < DEGENERACY_TOL * max(scale, 1.0))
    return np.stack([idx, idx + 1], axis=1) if idx.size else np.empty((0, 2), dtype=int)


def diagonalize(h: HamiltonianMatrix, verify: Optional[bool] = None) -> EigenSystem:
    """
    API: Полная диагонализация плотной симметричной матрицы
    Вход: h (HamiltonianMatrix), verify (проверка ортонормированности и невязки;
          по умолчанию только для dim ≤ VERIFY_MAX_DIM)
    Выход: EigenSystem
    Логика: scipy.linalg.eigh; ошибки решателя переупаковываются с метаданными матрицы
    """
    dim = h.basis.dim
    if dim < 1:
        raise ParameterError("Пустая матрица")
    meta = f"dim={dim}, n_max={h.basis.n_max}, params={h.params.as_dict()}"

    try:
        energies, vectors = scipy.linalg.eigh(h.entries, check_finite=True)
    except np.linalg.LinAlgError as e:
        raise DiagonalizationError(f"Сбой eigh ({meta}): {e}") from e
    except ValueError as e:
        raise DiagonalizationError(f"Некорректная матрица ({meta}): {e}") from e

    if verify is None:
        verify = dim <= VERIFY_MAX_DIM
    if verify:
        _verify(h, energies, vectors)

    degenerate = _find_degeneracies(energies, float(np.max(np.abs(energies))))
    if degenerate.size:
        logger.warning(f"Обнаружено {len(degenerate)} почти вырожденных пар уровней ({meta})")

    energies.flags.writeable = False
    vectors.flags.writeable = False
    logger.info(f"Диагонализация завершена: {meta}")
    return EigenSystem(energies=energies, vectors=vectors, basis=h.basis, params=h.params,
                       degenerate_pairs=degenerate)


def _tail_weights(es: EigenSystem, indices: np.ndarray) -> np.ndarray:
    n_max = es.basis.n_max
    n_cut = n_max + 1 - math.ceil(TAIL_FRACTION * (n_max + 1))
    tail_rows = es.basis.n >= n_cut
    return np.sum(es.vectors[tail_rows][:, indices] ** 2, axis=0)


def check_convergence(
        params: ModelParams,
        n_max_low: int,
        n_max_high: int,
        energy_window: Tuple[float, float],
        abs_tol: float = CONVERGENCE_ABS_TOL,
        rel_tol: float = CONVERGENCE_REL_TOL,
        tail_tol: float = CONVERGENCE_TAIL_TOL,
        cache_dir: Optional[str] = None,
) -> ConvergenceReport:
    """
    API: Сертификация сходимости уровней по обрезанию бозонов
    Вход: params, n_max_low < n_max_high, energy_window (E_min, E_max), допуски, cache_dir
    Выход: ConvergenceReport
    Логика: Сравнение k-го уровня при двух обрезаниях + вес собственного вектора в верхних
            10% фоковских слоев низкого обрезания
    """
    if n_max_high <= n_max_low:
        raise ParameterError(f"n_max_high ({n_max_high}) должно быть > n_max_low ({n_max_low})")
    e_lo, e_hi = sorted(energy_window)

    es_low = get_or_diagonalize(params, n_max_low, cache_dir)
    es_high = get_or_diagonalize(params, n_max_high, cache_dir)

    indices = np.flatnonzero((es_low.energies >= e_lo) & (es_low.energies <= e_hi))
    if indices.size == 0:
        raise ParameterError(
            f"Окно [{e_lo}, {e_hi}] вне вычисленного спектра "
            f"[{es_low.energies[0]}, {es_low.energies[-1]}]"
        )

    energies = np.asarray(es_low.energies[indices])
    shifts = np.asarray(es_high.energies[indices]) - energies
    tails = _tail_weights(es_low, indices)
    converged = (np.abs(shifts) <= abs_tol + rel_tol * np.abs(energies)) & (tails <= tail_tol)

    report = ConvergenceReport(
        n_max_low=n_max_low,
        n_max_high=n_max_high,
        energy_window=(e_lo, e_hi),
        level_indices=indices,
        energies=energies,
        shifts=shifts,
        tail_weights=tails,
        converged=converged,
        dim_low=es_low.dim,
        abs_tol=abs_tol,
        rel_tol=rel_tol,
        tail_tol=tail_tol,
    )
    logger.info(f"Сходимость: {report.converged_count}/{indices.size} уровней в окне "
                f"(n_max {n_max_low} → {n_max_high})")
    return report


def unfold_spectrum(levels: Sequence[float], degree: int = UNFOLD_DEGREE) -> np.ndarray:
    """
    API: Разворачивание спектра
    Вход: levels (уровни), degree (степень полинома)
    Выход: np.ndarray развернутых уровней
    Логика: Полиномиальная аппроксимация кумулятивного числа уровней N(E)
    """
    levels = np.sort(np.asarray(levels, dtype=float))
    staircase = np.arange(1, levels.size + 1, dtype=float)
    fit = Polynomial.fit(levels, staircase, deg=degree)
    return fit(levels)


def spacing_statistics(
        levels: Sequence[float],
        degree: int = UNFOLD_DEGREE,
        bins: int = SPACING_BINS,
        min_levels: int = MIN_SPACING_LEVELS,
) -> SpacingStats:
    """
    API: Статистика расстояний между соседними уровнями
    Вход: levels, degree, bins, min_levels
    Выход: SpacingStats
    Логика: Разворачивание → s_k (нормированы на среднее) → r̃_k = min(s_k, s_k+1)/max(...)
    """
    levels = np.asarray(levels, dtype=float)
    if levels.size < min_levels:
        raise ParameterError(f"Слишком мало уровней: {levels.size} < {min_levels}")
    unfolded = unfold_spectrum(levels, degree)
    spacings = np.diff(unfolded)
    spacings = spacings / np.mean(spacings)

    lo, hi = spacings[:-1], spacings[1:]
    largest = np.maximum(lo, hi)
    valid = largest > 0
    ratios = np.minimum(lo, hi)[valid] / largest[valid]

    upper = max(4.0, float(np.max(spacings)))
    histogram, edges = np.histogram(spacings, bins=bins, range=(0.0, upper), density=True)
    return SpacingStats(spacings=spacings, ratios=ratios, histogram=histogram, bin_edges=edges,
                        degree=degree)


def level_spacing_stats(
        es: EigenSystem,
        energy_window: Tuple[float, float],
        degree: int = UNFOLD_DEGREE,
        bins: int = SPACING_BINS,
        min_levels: int = MIN_SPACING_LEVELS,
        converged_mask: Optional[np.ndarray] = None,
) -> SpacingStats:
    """
    API: Статистика уровней собственной системы в окне энергий
    Вход: es, energy_window, degree, bins, min_levels, converged_mask (опционально, по уровням es)
    Выход: SpacingStats
    """
    e_lo, e_hi = sorted(energy_window)
    mask = (es.energies >= e_lo) & (es.energies <= e_hi)
    if converged_mask is not None:
        mask &= converged_mask
    return spacing_statistics(es.energies[mask], degree=degree, bins=bins, min_levels=min_levels)


# ---------------------------------------------------------------------------
# Дисковый кэш

def _cache_key(params: ModelParams, n_max: int, parity: int = 1) -> str:
    raw = f"{params.omega!r}|{params.omega0!r}|{params.gamma!r}|{params.j!r}|{n_max}|{parity}"
    return hashlib.sha256(raw.encode()).hexdigest()[:20]


def cache_path(params: ModelParams, n_max: int, cache_dir: str) -> Path:
    return Path(cache_dir) / f"eigen_{_cache_key(params, n_max)}.npz"


def _checksum(energies: np.ndarray, vectors: np.ndarray) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(energies).tobytes())
    digest.update(np.ascontiguousarray(vectors).tobytes())
    return digest.hexdigest()


def save_eigensystem(es: EigenSystem, cache_dir: str) -> Path:
    """
    API: Сохранение собственной системы в кэш
    Вход: es, cache_dir
    Выход: Path файла
    Логика: npz с JSON-заголовком {params, basis, checksum}; запись через временный файл
    """
    path = cache_path(es.params, es.basis.n_max, cache_dir)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format": CACHE_FORMAT,
        "params": es.params.as_dict(),
        "basis": es.basis.header(),
        "checksum": _checksum(es.energies, es.vectors),
    }
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)),
                 energies=es.energies, vectors=es.vectors,
                 degenerate_pairs=es.degenerate_pairs)
    os.replace(tmp, path)
    logger.info(f"Собственная система сохранена: {path}")
    return path


def load_eigensystem(params: ModelParams, n_max: int, cache_dir: str) -> Optional[EigenSystem]:
    """
    API: Загрузка собственной системы из кэша
    Вход: params, n_max, cache_dir
    Выход: EigenSystem или None (нет файла, несовпадение заголовка или контрольной суммы)
    """
    path = cache_path(params, n_max, cache_dir)
    if not path.exists():
        return None
    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            energies = np.array(data["energies"])
            vectors = np.array(data["vectors"])
            degenerate = np.array(data["degenerate_pairs"])
    except (OSError, KeyError, ValueError) as e:
        logger.warning(f"Поврежденный файл кэша {path}: {e}")
        return None

    if header.get("params") != params.as_dict() or header.get("basis", {}).get("n_max") != n_max:
        logger.warning(f"Заголовок кэша не совпадает с параметрами: {path}")
        return None
    if header.get("checksum") != _checksum(energies, vectors):
        logger.warning(f"Контрольная сумма кэша не совпадает: {path}")
        return None

    basis = build_basis(params, n_max)
    if basis.dim != energies.size:
        logger.warning(f"Размерность кэша {energies.size} ≠ размерности базиса {basis.dim}")
        return None
    energies.flags.writeable = False
    vectors.flags.writeable = False
    return EigenSystem(energies=energies, vectors=vectors, basis=basis, params=params,
                       degenerate_pairs=degenerate.reshape(-1, 2).astype(int))


def get_or_diagonalize(params: ModelParams, n_max: int, cache_dir: Optional[str] = None) -> EigenSystem:
    """
    API: Собственная система из кэша или новая диагонализация
    Вход: params, n_max, cache_dir (None - без кэша)
    Выход: EigenSystem
    """
    if cache_dir:
        cached = load_eigensystem(params, n_max, cache_dir)
        if cached is not None:
            logger.info(f"cache hit: {cache_path(params, n_max, cache_dir)}")
            return cached
    es = diagonalize(build_hamiltonian(params, build_basis(params, n_max)))
    if cache_dir:
        save_eigensystem(es, cache_dir)
    return es
