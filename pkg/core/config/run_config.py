# run_config.py
"""
Run Config - конфигурация запуска команд CLI
API: RunConfig (pydantic-модели блоков), load_config, apply_overrides, config_hash, format_validation_error
Основные возможности: строгая схема (неизвестные ключи отклоняются), повторная проверка
     физических инвариантов, переопределение ключей из командной строки (--set a.b=value)
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core.config.config import (
    BENETTIN_D0,
    CALIBRATION_POINTS,
    CHAOS_CUTOFF,
    CLOUD_NEIGHBORS,
    CLOUD_RADIUS,
    COARSE_GRID_SIZE,
    CONTOUR_DIRECTIONS,
    CONTOUR_XTOL,
    CONVERGENCE_ABS_TOL,
    CONVERGENCE_REL_TOL,
    CONVERGENCE_TAIL_TOL,
    DEFAULT_CACHE_DIR,
    DEFAULT_N_MAX,
    DEFAULT_OUTPUT_DIR,
    GLOBAL_SEED,
    GRID_SIZE,
    LOG_FRACTION,
    LYAPUNOV_T_TOTAL,
    MIN_CAPTURE,
    MIN_FIT_QUALITY,
    N_TIME_POINTS,
    ODE_ATOL,
    ODE_RTOL,
    RENORM_INTERVAL,
    SECTION_CROSSINGS,
    SECTION_MAX_TIME,
    SEQUENCE_FRAC_TOL,
    SEQUENCE_MIN_MEMBERS,
    SEQUENCE_THRESHOLD,
    SPACING_BINS,
    T_LOG_END,
    T_LOG_START,
    T_MAX,
    TIMEOUT_FACTOR,
    UNFOLD_DEGREE,
)
from core.model.classical import PoincareSurface
from core.model.dicke import ModelParams
from core.model.errors import EmptyShellError, ParameterError
from core.model.phase_space import PhasePoint

logger = logging.getLogger(__name__)


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelBlock(_Block):
    omega: float
    omega0: float
    gamma: float
    j: float

    @model_validator(mode="after")
    def _check_physics(self):
        # ParameterError наследует ValueError и превращается в ошибку валидации
        self.params()
        return self

    def params(self) -> ModelParams:
        return ModelParams(omega=self.omega, omega0=self.omega0, gamma=self.gamma, j=self.j)


class BasisBlock(_Block):
    n_max: int = Field(DEFAULT_N_MAX, ge=0)
    n_max_high: Optional[int] = None
    parity: Literal[1] = 1

    @model_validator(mode="after")
    def _check_truncations(self):
        if self.n_max_high is not None and self.n_max_high <= self.n_max:
            raise ValueError(f"n_max_high ({self.n_max_high}) должно быть > n_max ({self.n_max})")
        return self


class SurfaceBlock(_Block):
    energies_per_j: List[float] = Field(default_factory=lambda: [-1.8], min_length=1)


class PhasePointBlock(_Block):
    """
    API: Начальная точка
    Логика: Либо явное q (и p), либо energy_per_j - тогда q = q₊ на поверхности p = 0
    """
    phi: float
    jz_tilde: float = Field(ge=-1.0, le=1.0)
    q: Optional[float] = None
    p: float = 0.0
    energy_per_j: Optional[float] = None

    @model_validator(mode="after")
    def _check_source(self):
        if self.q is None and self.energy_per_j is None:
            raise ValueError("нужно задать q или energy_per_j")
        if self.q is None and self.p != 0.0:
            raise ValueError("точка по энергии строится только на поверхности p = 0")
        return self

    def to_point(self, params: ModelParams) -> PhasePoint:
        jz = self.jz_tilde * params.j
        if self.q is not None:
            return PhasePoint(q=self.q, p=self.p, jz=jz, phi=self.phi)
        surface = PoincareSurface(energy=self.energy_per_j * params.j, params=params)
        point = surface.point(self.phi, self.jz_tilde)
        if point is None:
            raise EmptyShellError(
                f"Точка (φ={self.phi}, j̃z={self.jz_tilde}) вне оболочки E/J={self.energy_per_j}"
            )
        return point


class TimeGridBlock(_Block):
    t_max: float = Field(T_MAX, gt=0)
    n_points: int = Field(N_TIME_POINTS, ge=4)
    t_log_start: float = Field(T_LOG_START, gt=0)
    t_log_end: float = Field(T_LOG_END, gt=0)
    log_fraction: float = Field(LOG_FRACTION, gt=0, lt=1)
    window_start: Optional[float] = None
    window_end: Optional[float] = None


class ScanBlock(_Block):
    grid_size: int = Field(GRID_SIZE, ge=1)
    coarse_grid_size: int = Field(COARSE_GRID_SIZE, ge=1)
    coarse: bool = False
    n_crossings: int = Field(SECTION_CROSSINGS, ge=1)
    section_max_time: float = Field(SECTION_MAX_TIME, gt=0)
    collage_orbits: int = Field(25, ge=0)
    timeout_factor: float = Field(TIMEOUT_FACTOR, gt=0)
    calibration_points: int = Field(CALIBRATION_POINTS, ge=1)
    processes: int = Field(1, ge=1)
    resume: bool = True
    seed: int = GLOBAL_SEED

    @property
    def effective_grid_size(self) -> int:
        return self.coarse_grid_size if self.coarse else self.grid_size


class LyapunovBlock(_Block):
    method: Literal["benettin", "cloud"] = "benettin"
    t_total: float = Field(LYAPUNOV_T_TOTAL, gt=0)
    renorm_interval: float = Field(RENORM_INTERVAL, gt=0)
    d0: float = Field(BENETTIN_D0, gt=0)
    n_neighbors: int = Field(CLOUD_NEIGHBORS, ge=1)
    radius: float = Field(CLOUD_RADIUS, gt=0)
    cutoff: float = CHAOS_CUTOFF


class SequencesBlock(_Block):
    threshold: float = Field(SEQUENCE_THRESHOLD, gt=0)
    frac_tol: float = Field(SEQUENCE_FRAC_TOL, gt=0, lt=1)
    min_members: int = Field(SEQUENCE_MIN_MEMBERS, ge=3)
    n_sequences: Optional[int] = Field(None, ge=1)
    min_quality: float = Field(MIN_FIT_QUALITY, ge=0, le=1)


class ContourBlock(_Block):
    n_directions: int = Field(CONTOUR_DIRECTIONS, ge=3)
    xtol: float = Field(CONTOUR_XTOL, gt=0)


class TolerancesBlock(_Block):
    ode_rtol: float = Field(ODE_RTOL, gt=0)
    ode_atol: float = Field(ODE_ATOL, gt=0)
    convergence_abs: float = Field(CONVERGENCE_ABS_TOL, gt=0)
    convergence_rel: float = Field(CONVERGENCE_REL_TOL, ge=0)
    convergence_tail: float = Field(CONVERGENCE_TAIL_TOL, gt=0)
    min_capture: float = Field(MIN_CAPTURE, gt=0, le=1)


class SpectrumBlock(_Block):
    energy_window_per_j: Optional[Tuple[float, float]] = None
    unfold_degree: int = Field(UNFOLD_DEGREE, ge=1)
    spacing_bins: int = Field(SPACING_BINS, ge=2)
    dump_matrix: bool = False


class IOBlock(_Block):
    output: str = DEFAULT_OUTPUT_DIR
    cache_dir: str = DEFAULT_CACHE_DIR
    plot: bool = False
    analytic: bool = False


class RunConfig(_Block):
    """
    API: Полная конфигурация запуска
    Вход: JSON-словарь с блоками model (обязателен), basis, surface, phase_point, time_grid,
          scan, lyapunov, sequences, contour, tolerances, spectrum, io
    Выход: None
    """
    model: ModelBlock
    basis: BasisBlock = Field(default_factory=BasisBlock)
    surface: SurfaceBlock = Field(default_factory=SurfaceBlock)
    phase_point: Optional[PhasePointBlock] = None
    time_grid: TimeGridBlock = Field(default_factory=TimeGridBlock)
    scan: ScanBlock = Field(default_factory=ScanBlock)
    lyapunov: LyapunovBlock = Field(default_factory=LyapunovBlock)
    sequences: SequencesBlock = Field(default_factory=SequencesBlock)
    contour: ContourBlock = Field(default_factory=ContourBlock)
    tolerances: TolerancesBlock = Field(default_factory=TolerancesBlock)
    spectrum: SpectrumBlock = Field(default_factory=SpectrumBlock)
    io: IOBlock = Field(default_factory=IOBlock)

    @property
    def params(self) -> ModelParams:
        return self.model.params()

    def energies(self) -> List[float]:
        return [e * self.model.j for e in self.surface.energies_per_j]

    @field_validator("phase_point", mode="before")
    @classmethod
    def _empty_point(cls, value):
        return value or None


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(data: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """
    API: Переопределение ключей по точечным путям
    Вход: data (словарь конфигурации), overrides ({"scan.seed": 7, ...})
    Выход: Dict (тот же объект, измененный на месте)
    """
    for dotted, value in overrides.items():
        keys = dotted.split(".")
        node = data
        for key in keys[:-1]:
            child = node.get(key)
            if not isinstance(child, dict):
                child = {}
                node[key] = child
            node = child
        node[keys[-1]] = value
    return data


def parse_set_arguments(items: Optional[List[str]]) -> Dict[str, Any]:
    """Разбор аргументов --set key.path=value; значение читается как JSON, иначе строка"""
    result = {}
    for item in items or []:
        if "=" not in item:
            raise ParameterError(f"Ожидается key.path=value, получено: {item}")
        key, raw = item.split("=", 1)
        result[key.strip()] = _parse_value(raw.strip())
    return result


def load_config(path: Optional[str], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    API: Загрузка и валидация конфигурации
    Вход: path (JSON-файл или None), overrides (точечные ключи из командной строки)
    Выход: RunConfig
    Логика: Файл → словарь → переопределения → pydantic; ValidationError пробрасывается
    """
    data: Dict[str, Any] = {}
    if path:
        file_path = Path(path)
        if not file_path.exists():
            raise ParameterError(f"Файл конфигурации не найден: {path}")
        try:
            data = json.loads(file_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ParameterError(f"Некорректный JSON в {path}: {e}")
        if not isinstance(data, dict):
            raise ParameterError(f"Корень конфигурации {path} должен быть объектом")
    apply_overrides(data, overrides or {})
    config = RunConfig.model_validate(data)
    logger.debug(f"Конфигурация загружена: {config_hash(config)[:12]}")
    return config


def config_hash(config: RunConfig) -> str:
    raw = json.dumps(config.model_dump(mode="json"), sort_keys=True)
    return hashlib.sha256(raw.encode()).hexdigest()


def format_validation_error(error: ValidationError) -> str:
    """Сообщения схемы в виде 'model.j: Field required'"""
    lines = []
    for item in error.errors():
        path = ".".join(str(part) for part in item["loc"])
        lines.append(f"{path}: {item['msg']}")
    return "\n".join(lines)
