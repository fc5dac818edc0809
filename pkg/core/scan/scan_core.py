# scan_core.py
"""
Phase Scan Core - сканирование сетки начальных условий на поверхности Пуанкаре
API: ScanJob, ScanRunner, run_scan, correlate_maps
Основные возможности: статическое разбиение строк сетки между процессами, детерминированная сборка,
     возобновление по журналу точек, калибровка бюджета точки, ранговая корреляция карт
"""

import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from multiprocessing import Pool
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import spearmanr
from tqdm import tqdm

from core.config.config import (
    BENETTIN_D0,
    CALIBRATION_POINTS,
    CHAOS_CUTOFF,
    CLOUD_NEIGHBORS,
    CLOUD_RADIUS,
    GLOBAL_SEED,
    LYAPUNOV_T_TOTAL,
    ODE_ATOL,
    ODE_RTOL,
    RENORM_INTERVAL,
    SECTION_CROSSINGS,
    SECTION_MAX_TIME,
    TIMEOUT_FACTOR,
)
from core.model.classical import (
    PoincareSurface,
    WorkBudget,
    lyapunov_benettin,
    lyapunov_cloud,
    poincare_section,
    section_dimension,
)
from core.model.dicke import ModelParams
from core.model.dynamics import participation_ratios
from core.model.errors import ParameterError, PointTimeout
from core.model.grid import (
    STATUS_ERROR,
    STATUS_MISSING,
    STATUS_OK,
    STATUS_PARTIAL,
    STATUS_TIMEOUT,
    ScanMap,
    SurfaceGrid,
)
from core.model.spectrum import load_eigensystem
from core.scan.ledger import ScanLedger

logger = logging.getLogger(__name__)

TASKS = ("sections", "lyapunov", "pr")
PointResult = Tuple[int, float, str, float]


@dataclass
class ScanJob:
    """
    API: Задание сканирования
    Вход: params, energy, grid, task (sections | lyapunov | pr), параметры задач, seed,
          processes, output_dir (журнал возобновления), n_max / cache_dir (для pr)
    Выход: None
    """
    params: ModelParams
    energy: float
    grid: SurfaceGrid
    task: str
    n_crossings: int = SECTION_CROSSINGS
    section_max_time: float = SECTION_MAX_TIME
    lyapunov_method: str = "benettin"
    t_total: float = LYAPUNOV_T_TOTAL
    renorm_interval: float = RENORM_INTERVAL
    d0: float = BENETTIN_D0
    n_neighbors: int = CLOUD_NEIGHBORS
    radius: float = CLOUD_RADIUS
    cutoff: float = CHAOS_CUTOFF
    rtol: float = ODE_RTOL
    atol: float = ODE_ATOL
    seed: int = GLOBAL_SEED
    processes: int = 1
    timeout_factor: float = TIMEOUT_FACTOR
    calibration_points: int = CALIBRATION_POINTS
    output_dir: Optional[str] = None
    n_max: Optional[int] = None
    cache_dir: Optional[str] = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ParameterError(f"Неизвестная задача {self.task}, ожидается одна из {TASKS}")
        if self.lyapunov_method not in ("benettin", "cloud"):
            raise ParameterError(f"Неизвестный метод Ляпунова {self.lyapunov_method}")
        if self.task == "pr" and (self.n_max is None or not self.cache_dir):
            raise ParameterError("Для карты P_R нужны n_max и cache_dir")

    @property
    def surface(self) -> PoincareSurface:
        return PoincareSurface(energy=self.energy, params=self.params)

    def spec(self) -> Dict:
        """Все поля, влияющие на результат (без processes и output_dir)"""
        data = asdict(self)
        data["params"] = self.params.as_dict()
        data["grid"] = self.grid.spec()
        for key in ("processes", "output_dir", "cache_dir"):
            data.pop(key)
        if self.task != "lyapunov":
            for key in ("lyapunov_method", "t_total", "renorm_interval", "d0", "n_neighbors", "radius"):
                data.pop(key)
        return data

    def job_hash(self) -> str:
        raw = json.dumps(self.spec(), sort_keys=True)
        return hashlib.sha256(raw.encode()).hexdigest()


def orbit_seed(global_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([global_seed, index]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Расчет точек (выполняется в рабочих процессах)

_WORKER_STATE: Dict = {}


def _init_worker(job: ScanJob) -> None:
    _WORKER_STATE.clear()
    _WORKER_STATE["job"] = job
    if job.task == "pr":
        _WORKER_STATE["es"] = load_eigensystem(job.params, job.n_max, job.cache_dir)


def _classical_point(job: ScanJob, index: int, budget: WorkBudget) -> PointResult:
    phi, x = job.grid.coordinates(index)
    pt = job.surface.point(phi, x)
    if pt is None:
        return index, math.nan, STATUS_MISSING, math.nan
    try:
        if job.task == "sections":
            section = poincare_section(pt, job.n_crossings, job.params, job.section_max_time,
                                       job.rtol, job.atol, budget=budget)
            status = STATUS_PARTIAL if section.partial else STATUS_OK
            return index, section_dimension(section), status, float(len(section))
        seed = orbit_seed(job.seed, index)
        if job.lyapunov_method == "cloud":
            est = lyapunov_cloud(pt, job.params, job.n_neighbors, job.radius, job.t_total,
                                 job.rtol, job.atol, job.cutoff, seed=seed, budget=budget)
        else:
            est = lyapunov_benettin(pt, job.params, job.t_total, job.renorm_interval, job.d0,
                                    job.rtol, job.atol, job.cutoff, seed=seed, budget=budget)
        status = STATUS_OK if est.converged else STATUS_PARTIAL
        return index, est.lam, status, float(est.is_chaotic)
    except PointTimeout:
        return index, math.nan, STATUS_TIMEOUT, math.nan
    except Exception as e:
        logger.debug(f"Точка {index}: {type(e).__name__}: {e}")
        return index, math.nan, STATUS_ERROR, math.nan


def _pr_points(job: ScanJob, indices: List[int]) -> List[PointResult]:
    es = _WORKER_STATE.get("es")
    surface = job.surface
    results: List[PointResult] = []
    points, on_shell = [], []
    for index in indices:
        pt = surface.point(*job.grid.coordinates(index))
        if pt is None:
            results.append((index, math.nan, STATUS_MISSING, math.nan))
        else:
            points.append(pt)
            on_shell.append(index)
    if points:
        values, capture = participation_ratios(points, es)
        for index, value, cap in zip(on_shell, values, capture):
            status = STATUS_OK if np.isfinite(value) else STATUS_ERROR
            results.append((index, float(value), status, float(cap)))
    return sorted(results)


def _evaluate_points(args) -> List[PointResult]:
    indices, limit = args
    job: ScanJob = _WORKER_STATE["job"]
    if job.task == "pr":
        return _pr_points(job, indices)
    results = []
    for index in indices:
        results.append(_classical_point(job, index, WorkBudget(limit)))
    return results


# ---------------------------------------------------------------------------
# Оркестрация

@dataclass
class ScanResult:
    map: ScanMap
    timings: Dict[str, float]
    diagnostics: List[str] = field(default_factory=list)
    resumed_points: int = 0
    budget: Optional[int] = None


class ScanRunner:
    """
    Scan Runner - оркестрация сканирования сетки
    API: Калибровка, распределение строк по процессам, сборка карты, журнал возобновления
    Основные возможности: детерминированный результат, независимый от расписания процессов
    """

    def __init__(self, job: ScanJob, log_callback: Optional[Callable] = None, resume: bool = True,
                 progress: bool = True):
        """
        API: Инициализация исполнителя
        Вход: job, log_callback (функция журнала (level, message)), resume, progress (tqdm)
        Выход: None
        """
        self.job = job
        self.resume = resume
        self.progress = progress
        self.add_activity_log = log_callback or (lambda level, msg: logger.log(logging.getLevelName(level), msg))
        self.ledger = ScanLedger(job.output_dir, job.job_hash()) if job.output_dir else None

    def _check_prerequisites(self) -> None:
        if self.job.task == "pr":
            if load_eigensystem(self.job.params, self.job.n_max, self.job.cache_dir) is None:
                raise ParameterError(
                    f"Нет кэша собственной системы для n_max={self.job.n_max} в {self.job.cache_dir}; "
                    f"сначала выполните команду spectrum"
                )

    def _calibrate(self, shell: List[int], pending: List[int]) -> Tuple[List[PointResult], Optional[int]]:
        """
        API: Бюджет точки по первым точкам оболочки
        Вход: shell (все точки оболочки по порядку), pending (еще не посчитанные)
        Выход: (результаты калибровочных точек из pending, лимит вызовов правой части)
        Логика: Выборка не зависит от журнала, поэтому лимит одинаков при повторе и возобновлении
        """
        job = self.job
        if job.task == "pr" or not pending:
            return [], None
        pending_set = set(pending)
        costs, results = [], []
        for index in shell[:job.calibration_points]:
            budget = WorkBudget()
            result = _classical_point(job, index, budget)
            costs.append(budget.used)
            if index in pending_set:
                results.append(result)
        limit = int(math.ceil(job.timeout_factor * float(np.median(costs))))
        logger.info(f"Калибровка: медиана {np.median(costs):.0f} вызовов правой части, лимит точки {limit}")
        return results, limit

    def run(self) -> ScanResult:
        """
        API: Выполнение сканирования
        Вход: None
        Выход: ScanResult (карта, тайминги, диагностика)
        Логика: Точки вне оболочки сразу missing; завершенные точки берутся из журнала;
                оставшиеся строки сетки - статически по процессам через imap (порядок сохраняется)
        """
        job = self.job
        t_start = time.monotonic()
        self._check_prerequisites()

        result_map = ScanMap.empty(job.grid, energy=job.energy, task=job.task)
        mask = job.grid.shell_mask(job.surface)
        diagnostics: List[str] = []
        if not mask.any():
            message = f"Оболочка E={job.energy} пуста: все {job.grid.size} точек отсутствуют"
            diagnostics.append(message)
            self.add_activity_log("WARNING", message)
            return ScanResult(map=result_map, timings={"total_s": time.monotonic() - t_start},
                              diagnostics=diagnostics)

        done: Dict[int, Tuple[float, str, float]] = {}
        if self.ledger is not None:
            if self.resume:
                done = self.ledger.completed()
            else:
                self.ledger.clear()
        if done:
            self.add_activity_log("INFO", f"Возобновление: {len(done)} точек уже в журнале")

        aux = np.full(job.grid.size, np.nan)
        for index, (value, status, extra) in done.items():
            result_map.values[index] = value
            result_map.status[index] = status
            aux[index] = extra

        shell = [int(i) for i in np.flatnonzero(mask)]
        pending = [i for i in shell if i not in done]
        calibrated, limit = self._calibrate(shell, pending)
        self._store(calibrated, result_map, aux)
        calibrated_set = {r[0] for r in calibrated}

        tasks = []
        for row in range(job.grid.n_jz):
            indices = [i for i in job.grid.row_indices(row)
                       if mask[i] and i not in done and i not in calibrated_set]
            if indices:
                tasks.append((indices, limit))

        t_points = time.monotonic()
        if tasks:
            if job.processes > 1:
                with Pool(processes=job.processes, initializer=_init_worker, initargs=(job,)) as pool:
                    self._consume(pool.imap(_evaluate_points, tasks), len(tasks), result_map, aux)
            else:
                _init_worker(job)
                self._consume(map(_evaluate_points, tasks), len(tasks), result_map, aux)

        counts = {s: int(np.count_nonzero(result_map.status == s))
                  for s in (STATUS_OK, STATUS_PARTIAL, STATUS_TIMEOUT, STATUS_ERROR, STATUS_MISSING)}
        for status in (STATUS_TIMEOUT, STATUS_ERROR):
            if counts[status]:
                diagnostics.append(f"{counts[status]} точек со статусом {status}")
        result_map.aux = {"aux": aux, "counts": counts}
        timings = {"total_s": time.monotonic() - t_start, "points_s": time.monotonic() - t_points}
        self.add_activity_log("INFO", f"Сканирование {job.task} E={job.energy}: {counts}")
        return ScanResult(map=result_map, timings=timings, diagnostics=diagnostics,
                          resumed_points=len(done), budget=limit)

    def _store(self, results: List[PointResult], result_map: ScanMap, aux: np.ndarray) -> None:
        for index, value, status, extra in results:
            result_map.values[index] = value
            result_map.status[index] = status
            aux[index] = extra
        # точки с превышенным бюджетом не попадают в журнал и пересчитываются при возобновлении
        finished = [r for r in results if r[2] != STATUS_TIMEOUT]
        if self.ledger is not None and finished:
            self.ledger.record(finished)

    def _consume(self, iterator, total: int, result_map: ScanMap, aux: np.ndarray) -> None:
        bar = tqdm(iterator, total=total, desc=f"{self.job.task} E={self.job.energy:g}",
                   unit="row", disable=not self.progress)
        for row_results in bar:
            self._store(row_results, result_map, aux)


def run_scan(job: ScanJob, log_callback: Optional[Callable] = None, resume: bool = True,
             progress: bool = True) -> ScanResult:
    """
    API: Запуск сканирования
    Вход: job, log_callback, resume, progress
    Выход: ScanResult
    """
    runner = ScanRunner(job, log_callback=log_callback, resume=resume, progress=progress)
    try:
        return runner.run()
    finally:
        if runner.ledger is not None:
            runner.ledger.close()


# ---------------------------------------------------------------------------
# Корреляция карт

@dataclass
class MapCorrelation:
    rho: float
    n_points: int
    degenerate: bool
    histogram: np.ndarray = field(repr=False)
    x_edges: np.ndarray = field(repr=False)
    y_edges: np.ndarray = field(repr=False)

    def as_dict(self) -> Dict:
        return {"spearman": self.rho, "n_points": self.n_points, "degenerate": self.degenerate}


def correlate_maps(map_a: ScanMap, map_b: ScanMap, bins: int = 20) -> MapCorrelation:
    """
    API: Ранговая корреляция двух карт
    Вход: map_a, map_b (одинаковые сетки), bins (совместная гистограмма)
    Выход: MapCorrelation
    Логика: Спирмен по точкам, присутствующим в обеих картах; постоянная карта - 0 с флагом
    """
    map_a.check_same_grid(map_b)
    both = map_a.present & map_b.present
    a, b = map_a.values[both], map_b.values[both]
    n = int(a.size)
    if n > 0:
        histogram, x_edges, y_edges = np.histogram2d(a, b, bins=bins)
    else:
        histogram, x_edges, y_edges = np.zeros((bins, bins)), np.zeros(bins + 1), np.zeros(bins + 1)

    if n < 3 or np.ptp(a) == 0 or np.ptp(b) == 0:
        logger.warning(f"Корреляция не определена (точек: {n}); возвращается 0")
        return MapCorrelation(rho=0.0, n_points=n, degenerate=True, histogram=histogram,
                              x_edges=x_edges, y_edges=y_edges)
    rho = float(spearmanr(a, b)[0])
    return MapCorrelation(rho=rho, n_points=n, degenerate=False, histogram=histogram,
                          x_edges=x_edges, y_edges=y_edges)
